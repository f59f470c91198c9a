//! The mixed-bias functional interface and its registry of concrete
//! functionals.
//!
//! A functional in this class is described by a statistic `s_ab(O)`, a
//! statistic `s_0(O)`, two maps `m1(O, h)` and `m2(O, h)` that are linear in
//! the function argument `h: Z -> R`, and the rule extracting the subvector
//! `Z` from an observation. Every estimator in this crate is an empirical
//! mean of combinations of these pieces.
//!
//! The registry instances:
//!
//! * `cf-mean`: counterfactual outcome mean under treatment. Z = (A, L...),
//!   s_ab = -1, s_0 = 0, m1(O, h) = h(1, L), m2(O, h) = Y * h(A, L).
//! * `ate`: average treatment effect. As `cf-mean`, but
//!   m1(O, h) = h(1, L) - h(0, L).
//! * `ecc`: expected conditional covariance E[Cov(A, Y | L)]. Z = L...,
//!   s_ab = +1, s_0 = A * Y, m1(O, h) = -A * h(L), m2(O, h) = -Y * h(L).
//!
//! `s_0` is carried explicitly and added (as an empirical mean) to every
//! estimator, so functionals with nonzero `s_0` such as `ecc` are exercised
//! end to end rather than relabeled away.

use std::collections::BTreeMap;

use crate::data::{Observation, ZPoint};
use crate::error::{Error, Result};

/// Registry membership for concrete mixed-bias functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionalKind {
    CfMean,
    Ate,
    Ecc,
}

impl FunctionalKind {
    pub fn name(self) -> &'static str {
        match self {
            FunctionalKind::CfMean => "cf-mean",
            FunctionalKind::Ate => "ate",
            FunctionalKind::Ecc => "ecc",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cf-mean" => Ok(FunctionalKind::CfMean),
            "ate" => Ok(FunctionalKind::Ate),
            "ecc" => Ok(FunctionalKind::Ecc),
            other => Err(Error::UnknownFunctional {
                kind: other.to_string(),
            }),
        }
    }
}

/// A concrete member of the mixed-bias class, bound to dataset columns.
///
/// Construction validates that every role the kind requires has a binding;
/// whether the bound columns exist in a particular dataset is checked at
/// first evaluation, as an [`Error::UnknownColumn`].
#[derive(Debug, Clone)]
pub struct MixedBiasFunctional {
    kind: FunctionalKind,
    a_col: String,
    l_cols: Vec<String>,
    y_col: String,
}

impl MixedBiasFunctional {
    pub fn kind(&self) -> FunctionalKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Length of the Z subvector: (A, L...) for cf-mean/ate, L... for ecc.
    pub fn z_arity(&self) -> usize {
        match self.kind {
            FunctionalKind::CfMean | FunctionalKind::Ate => 1 + self.l_cols.len(),
            FunctionalKind::Ecc => self.l_cols.len(),
        }
    }

    /// The statistic S_ab = s_ab(O).
    pub fn s_ab(&self, _obs: &Observation<'_>) -> Result<f64> {
        Ok(match self.kind {
            FunctionalKind::CfMean | FunctionalKind::Ate => -1.0,
            FunctionalKind::Ecc => 1.0,
        })
    }

    /// The statistic S_0 = s_0(O).
    pub fn s_0(&self, obs: &Observation<'_>) -> Result<f64> {
        match self.kind {
            FunctionalKind::CfMean | FunctionalKind::Ate => Ok(0.0),
            FunctionalKind::Ecc => Ok(obs.value(&self.a_col)? * obs.value(&self.y_col)?),
        }
    }

    /// Extracts the Z subvector of one observation in declared order.
    pub fn extract_z(&self, obs: &Observation<'_>) -> Result<ZPoint> {
        let mut values = Vec::with_capacity(self.z_arity());
        if matches!(self.kind, FunctionalKind::CfMean | FunctionalKind::Ate) {
            values.push(obs.value(&self.a_col)?);
        }
        for l in &self.l_cols {
            values.push(obs.value(l)?);
        }
        Ok(ZPoint::new(values))
    }

    /// Visits the point-evaluation terms of the linear map `h -> m1(O, h)`:
    /// m1(O, h) = sum of `weight * h(point)` over the visited pairs.
    pub fn for_each_m1_term<F>(&self, obs: &Observation<'_>, mut visit: F) -> Result<()>
    where
        F: FnMut(f64, &ZPoint),
    {
        match self.kind {
            FunctionalKind::CfMean => {
                // m1(O, h) = h(A = 1, L)
                let z = self.z_with_a(obs, 1.0)?;
                visit(1.0, &z);
            }
            FunctionalKind::Ate => {
                // m1(O, h) = h(1, L) - h(0, L)
                let z1 = self.z_with_a(obs, 1.0)?;
                visit(1.0, &z1);
                let z0 = self.z_with_a(obs, 0.0)?;
                visit(-1.0, &z0);
            }
            FunctionalKind::Ecc => {
                // m1(O, h) = -A * h(L)
                let a = obs.value(&self.a_col)?;
                let z = self.extract_z(obs)?;
                visit(-a, &z);
            }
        }
        Ok(())
    }

    /// Visits the point-evaluation terms of the linear map `h -> m2(O, h)`.
    pub fn for_each_m2_term<F>(&self, obs: &Observation<'_>, mut visit: F) -> Result<()>
    where
        F: FnMut(f64, &ZPoint),
    {
        let y = obs.value(&self.y_col)?;
        match self.kind {
            FunctionalKind::CfMean | FunctionalKind::Ate => {
                // m2(O, h) = Y * h(A, L)
                let z = self.extract_z(obs)?;
                visit(y, &z);
            }
            FunctionalKind::Ecc => {
                // m2(O, h) = -Y * h(L)
                let z = self.extract_z(obs)?;
                visit(-y, &z);
            }
        }
        Ok(())
    }

    /// m1(O, h) for an arbitrary function of Z.
    pub fn m1(&self, obs: &Observation<'_>, h: &dyn Fn(&ZPoint) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        self.for_each_m1_term(obs, |w, z| acc += w * h(z))?;
        Ok(acc)
    }

    /// m2(O, h) for an arbitrary function of Z.
    pub fn m2(&self, obs: &Observation<'_>, h: &dyn Fn(&ZPoint) -> f64) -> Result<f64> {
        let mut acc = 0.0;
        self.for_each_m2_term(obs, |w, z| acc += w * h(z))?;
        Ok(acc)
    }

    fn z_with_a(&self, obs: &Observation<'_>, a: f64) -> Result<ZPoint> {
        let mut values = Vec::with_capacity(self.z_arity());
        values.push(a);
        for l in &self.l_cols {
            values.push(obs.value(l)?);
        }
        Ok(ZPoint::new(values))
    }
}

/// Column bindings for the roles a functional requires. The `L` role may
/// bind several columns (a covariate vector); `A` and `Y` bind one each.
pub type Bindings = BTreeMap<String, Vec<String>>;

fn take_single(kind: FunctionalKind, bindings: &Bindings, role: &str) -> Result<String> {
    match bindings.get(role) {
        Some(cols) if cols.len() == 1 => Ok(cols[0].clone()),
        Some(cols) => Err(Error::InvalidNuisanceSpec {
            descriptor: format!("{role}={}", cols.join(",")),
            reason: format!("role {role} must bind exactly one column"),
        }),
        None => Err(Error::MissingBinding {
            kind: kind.name().to_string(),
            role: role.to_string(),
        }),
    }
}

fn take_multi(kind: FunctionalKind, bindings: &Bindings, role: &str) -> Result<Vec<String>> {
    match bindings.get(role) {
        Some(cols) if !cols.is_empty() => Ok(cols.clone()),
        _ => Err(Error::MissingBinding {
            kind: kind.name().to_string(),
            role: role.to_string(),
        }),
    }
}

/// Instantiates a registry functional with the given column bindings.
///
/// All three kinds require roles `A`, `L` (one or more columns) and `Y`.
pub fn make_functional(kind: FunctionalKind, bindings: &Bindings) -> Result<MixedBiasFunctional> {
    let a_col = take_single(kind, bindings, "A")?;
    let l_cols = take_multi(kind, bindings, "L")?;
    let y_col = take_single(kind, bindings, "Y")?;
    Ok(MixedBiasFunctional {
        kind,
        a_col,
        l_cols,
        y_col,
    })
}

/// Convenience constructor for the standard single-covariate bindings
/// `A -> a_col, L -> l_col, Y -> y_col`.
pub fn make_functional_aly(
    kind: FunctionalKind,
    a_col: &str,
    l_col: &str,
    y_col: &str,
) -> MixedBiasFunctional {
    MixedBiasFunctional {
        kind,
        a_col: a_col.to_string(),
        l_cols: vec![l_col.to_string()],
        y_col: y_col.to_string(),
    }
}

#[doc(hidden)]
pub mod test_fixture {
    use crate::data::Dataset;

    /// Canonical 4-row fixture: a = (1,0,1,0), l = (0,0,1,1), y = (1,2,3,4).
    pub fn fix4() -> Dataset {
        Dataset::new(vec![
            ("a".into(), vec![1.0, 0.0, 1.0, 0.0]),
            ("l".into(), vec![0.0, 0.0, 1.0, 1.0]),
            ("y".into(), vec![1.0, 2.0, 3.0, 4.0]),
        ])
        .unwrap()
    }
}
