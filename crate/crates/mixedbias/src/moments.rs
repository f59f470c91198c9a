//! Empirical moment summaries: the Gram matrix G, the moment vectors M1 and
//! M2, and the imbalance vector of a candidate nuisance.
//!
//! All entries are empirical means accumulated with compensated summation.
//! G is assembled as ℙn{-s_ab(O) φ(Z)φ(Z)ᵀ} and then symmetrized exactly as
//! (G + Gᵀ)/2; no centering or scaling of features happens implicitly.

use crate::basis::FeatureBasis;
use crate::data::{CompensatedSum, Dataset};
use crate::error::{Error, Result};
use crate::functional::MixedBiasFunctional;
use crate::nuisance::Nuisance;
use crate::solve::Matrix;

/// The moment summaries every fit and identity consumes:
/// G_{jk} = ℙn{-s_ab φ_j φ_k}, M1_j = ℙn{m1(O, φ_j)}, M2_j = ℙn{m2(O, φ_j)}.
#[derive(Debug, Clone)]
pub struct MomentSummaries {
    pub g: Matrix,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub n: usize,
}

impl MomentSummaries {
    pub fn p(&self) -> usize {
        self.m1.len()
    }
}

/// Φ̂_b with entries ℙn{-s_ab b(Z) φ_j(Z)}.
#[derive(Debug, Clone)]
pub struct ImbalanceVector {
    pub phi_hat: Vec<f64>,
}

fn check_finite(row: usize, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteEvaluation { row, value })
    }
}

fn check_compatible(functional: &MixedBiasFunctional, basis: &FeatureBasis) -> Result<()> {
    if basis.z_arity() != functional.z_arity() {
        return Err(Error::ArityMismatch {
            basis_arity: basis.z_arity(),
            z_arity: functional.z_arity(),
        });
    }
    Ok(())
}

/// Accumulates G, M1 and M2 over the dataset in one pass.
pub fn moment_summaries(
    dataset: &Dataset,
    functional: &MixedBiasFunctional,
    basis: &FeatureBasis,
) -> Result<MomentSummaries> {
    check_compatible(functional, basis)?;
    let p = basis.p();
    let n = dataset.n();
    let mut g_sums = vec![CompensatedSum::new(); p * p];
    let mut m1_sums = vec![CompensatedSum::new(); p];
    let mut m2_sums = vec![CompensatedSum::new(); p];
    let mut phi = vec![0.0; p];
    let mut phi_term = vec![0.0; p];

    for obs in dataset.rows() {
        let row = obs.row();
        let s_ab = functional.s_ab(&obs)?;
        let z = functional.extract_z(&obs)?;
        basis.eval_into(&z, &mut phi)?;
        for &v in &phi {
            check_finite(row, v)?;
        }
        for j in 0..p {
            let w = -s_ab * phi[j];
            for k in 0..p {
                g_sums[j * p + k].add(check_finite(row, w * phi[k])?);
            }
        }

        let mut term_error = None;
        functional.for_each_m1_term(&obs, |w, zt| {
            if term_error.is_some() {
                return;
            }
            if let Err(e) = basis.eval_into(zt, &mut phi_term) {
                term_error = Some(e);
                return;
            }
            for j in 0..p {
                match check_finite(row, w * phi_term[j]) {
                    Ok(v) => m1_sums[j].add(v),
                    Err(e) => {
                        term_error = Some(e);
                        return;
                    }
                }
            }
        })?;
        if let Some(e) = term_error {
            return Err(e);
        }

        let mut term_error = None;
        functional.for_each_m2_term(&obs, |w, zt| {
            if term_error.is_some() {
                return;
            }
            if let Err(e) = basis.eval_into(zt, &mut phi_term) {
                term_error = Some(e);
                return;
            }
            for j in 0..p {
                match check_finite(row, w * phi_term[j]) {
                    Ok(v) => m2_sums[j].add(v),
                    Err(e) => {
                        term_error = Some(e);
                        return;
                    }
                }
            }
        })?;
        if let Some(e) = term_error {
            return Err(e);
        }
    }

    let nf = n as f64;
    let mut g = Matrix::zeroed(p, p);
    for j in 0..p {
        for k in 0..p {
            g[(j, k)] = g_sums[j * p + k].value() / nf;
        }
    }
    g.symmetrize();
    let m1 = m1_sums.iter().map(|s| s.value() / nf).collect();
    let m2 = m2_sums.iter().map(|s| s.value() / nf).collect();
    Ok(MomentSummaries { g, m1, m2, n })
}

/// Accumulates Φ̂_b = ℙn{-s_ab b(Z) φ(Z)} for a candidate b.
pub fn imbalance_vector(
    dataset: &Dataset,
    functional: &MixedBiasFunctional,
    basis: &FeatureBasis,
    b: &Nuisance,
) -> Result<ImbalanceVector> {
    check_compatible(functional, basis)?;
    let p = basis.p();
    let n = dataset.n() as f64;
    let mut sums = vec![CompensatedSum::new(); p];
    let mut phi = vec![0.0; p];
    for obs in dataset.rows() {
        let row = obs.row();
        let s_ab = functional.s_ab(&obs)?;
        let z = functional.extract_z(&obs)?;
        let bz = check_finite(row, b.eval(&z)?)?;
        basis.eval_into(&z, &mut phi)?;
        for j in 0..p {
            sums[j].add(check_finite(row, -s_ab * bz * phi[j])?);
        }
    }
    Ok(ImbalanceVector {
        phi_hat: sums.iter().map(|s| s.value() / n).collect(),
    })
}
