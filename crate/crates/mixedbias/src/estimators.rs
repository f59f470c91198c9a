//! The estimators of the functional and the coefficient machinery behind
//! the prop1 identity: γ imbalance coefficients and the augmented
//! coefficients that collapse the one-step estimator onto an
//! outcome-regression form.
//!
//! Every estimator is assembled from the same four empirical means,
//!
//! * T_ab = ℙn{s_ab·a(Z)·b(Z)},
//! * T_m1 = ℙn{m1(O,a)},
//! * T_m2 = ℙn{m2(O,b)},
//! * T_s0 = ℙn{s_0},
//!
//! combined in a fixed order: one_step = ((T_ab + T_m1) + T_m2) + T_s0,
//! outcome regression and IPW are literally one_step with the other
//! nuisance set to zero, and the plug-in is -T_ab + T_s0. Sharing the term
//! code path is what makes the decomposition identity hold to the last bit.

use crate::data::{empirical_mean, Dataset, ZPoint};
use crate::error::{Error, Result};
use crate::functional::MixedBiasFunctional;
use crate::moments::ImbalanceVector;
use crate::nuisance::Nuisance;

/// The four empirical means every estimator combines.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorTerms {
    pub t_ab: f64,
    pub t_m1: f64,
    pub t_m2: f64,
    pub t_s0: f64,
}

/// Computes the shared estimator terms in one pass over the data.
pub fn estimator_terms(
    dataset: &Dataset,
    functional: &MixedBiasFunctional,
    a: &Nuisance,
    b: &Nuisance,
) -> Result<EstimatorTerms> {
    let a_fn = |z: &ZPoint| a.eval(z).unwrap_or(f64::NAN);
    let b_fn = |z: &ZPoint| b.eval(z).unwrap_or(f64::NAN);
    let t_ab = empirical_mean(dataset, |obs| {
        let z = functional.extract_z(obs)?;
        Ok(functional.s_ab(obs)? * a_fn(&z) * b_fn(&z))
    })?;
    let t_m1 = empirical_mean(dataset, |obs| functional.m1(obs, &a_fn))?;
    let t_m2 = empirical_mean(dataset, |obs| functional.m2(obs, &b_fn))?;
    let t_s0 = empirical_mean(dataset, |obs| functional.s_0(obs))?;
    Ok(EstimatorTerms {
        t_ab,
        t_m1,
        t_m2,
        t_s0,
    })
}

impl EstimatorTerms {
    pub fn one_step(&self) -> f64 {
        ((self.t_ab + self.t_m1) + self.t_m2) + self.t_s0
    }

    pub fn plugin_product(&self) -> f64 {
        -self.t_ab + self.t_s0
    }
}

/// χ̂_{a,b} = ℙn{s_ab·a·b} + ℙn{m1(O,a)} + ℙn{m2(O,b)} + ℙn{s_0}.
pub fn one_step(
    dataset: &Dataset,
    functional: &MixedBiasFunctional,
    a: &Nuisance,
    b: &Nuisance,
) -> Result<f64> {
    Ok(estimator_terms(dataset, functional, a, b)?.one_step())
}

/// χ̂_{a,0} = ℙn{m1(O,a)} + ℙn{s_0}, computed as one_step with b ≡ 0 so
/// the equality with the one-step estimator is by construction.
pub fn or_estimate(
    dataset: &Dataset,
    functional: &MixedBiasFunctional,
    a: &Nuisance,
) -> Result<f64> {
    one_step(dataset, functional, a, &Nuisance::zero())
}

/// χ̂_{0,b} = ℙn{m2(O,b)} + ℙn{s_0}, as one_step with a ≡ 0.
pub fn ipw_estimate(
    dataset: &Dataset,
    functional: &MixedBiasFunctional,
    b: &Nuisance,
) -> Result<f64> {
    one_step(dataset, functional, &Nuisance::zero(), b)
}

/// The plug-in product form -ℙn{s_ab·a·b} + ℙn{s_0}.
pub fn plugin_product(
    dataset: &Dataset,
    functional: &MixedBiasFunctional,
    a: &Nuisance,
    b: &Nuisance,
) -> Result<f64> {
    Ok(estimator_terms(dataset, functional, a, b)?.plugin_product())
}

/// All four estimators of one (a, b) pair, from a single term pass.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct EstimateBundle {
    pub one_step: f64,
    pub outcome_regression: f64,
    pub ipw: f64,
    pub plugin_product: f64,
    pub s0_mean: f64,
}

pub fn estimate_bundle(
    dataset: &Dataset,
    functional: &MixedBiasFunctional,
    a: &Nuisance,
    b: &Nuisance,
) -> Result<EstimateBundle> {
    let t = estimator_terms(dataset, functional, a, b)?;
    Ok(EstimateBundle {
        one_step: t.one_step(),
        outcome_regression: t.t_m1 + t.t_s0,
        ipw: t.t_m2 + t.t_s0,
        plugin_product: t.plugin_product(),
        s0_mean: t.t_s0,
    })
}

/// Per-feature imbalance coefficients γ_j = Φ̂_j / M1_j, with the both-zero
/// convention recorded in `degenerate_mask`.
#[derive(Debug, Clone)]
pub struct GammaVector {
    pub gamma: Vec<f64>,
    pub degenerate_mask: Vec<bool>,
}

/// Forms γ_j = phi_hat_j / M1_j.
///
/// M1_j counts as zero when |M1_j| ≤ 1e-12·(1+|Φ̂_j|). A zero denominator
/// against a zero numerator (judged symmetrically) yields γ_j = 0 with the
/// mask set; the j-th augmentation term is then Φ̂_j·(β̂_j - β̃_j) = 0
/// regardless of the value chosen. A zero denominator against a nonzero
/// imbalance cannot be represented by a coordinate rescaling at all and is
/// an error naming the feature.
pub fn gamma_coefficients(phi_hat: &ImbalanceVector, m1: &[f64]) -> Result<GammaVector> {
    let v = &phi_hat.phi_hat;
    if v.len() != m1.len() {
        return Err(Error::DimensionMismatch {
            context: "imbalance vector",
            got: v.len(),
            expected: m1.len(),
        });
    }
    let mut gamma = Vec::with_capacity(v.len());
    let mut degenerate_mask = vec![false; v.len()];
    for j in 0..v.len() {
        let m1_zero = m1[j].abs() <= 1e-12 * (1.0 + v[j].abs());
        if !m1_zero {
            gamma.push(v[j] / m1[j]);
        } else if v[j].abs() <= 1e-12 * (1.0 + m1[j].abs()) {
            gamma.push(0.0);
            degenerate_mask[j] = true;
        } else {
            return Err(Error::IllPosedGamma {
                index: j,
                m1: m1[j],
                phi_hat: v[j],
            });
        }
    }
    Ok(GammaVector {
        gamma,
        degenerate_mask,
    })
}

/// β̃_aug,j = (1 - γ_j)·β̂_j + γ_j·β̃_j; degenerate coordinates keep β̂_j.
pub fn augmented_coefficients(
    beta_hat: &[f64],
    beta_tilde: &[f64],
    gamma: &GammaVector,
) -> Result<Vec<f64>> {
    if beta_tilde.len() != beta_hat.len() {
        return Err(Error::DimensionMismatch {
            context: "beta_tilde",
            got: beta_tilde.len(),
            expected: beta_hat.len(),
        });
    }
    if gamma.gamma.len() != beta_hat.len() {
        return Err(Error::DimensionMismatch {
            context: "gamma vector",
            got: gamma.gamma.len(),
            expected: beta_hat.len(),
        });
    }
    Ok((0..beta_hat.len())
        .map(|j| (1.0 - gamma.gamma[j]) * beta_hat[j] + gamma.gamma[j] * beta_tilde[j])
        .collect())
}
