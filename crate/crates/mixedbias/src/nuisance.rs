//! Nuisance functions over Z: linear forms in a feature basis, opaque
//! callables, and the constructions that make an estimator pair satisfy
//! the estimating equations (the alpha equation solve, balanced
//! coefficients, rescaling onto the second equation).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::data::{empirical_mean, CompensatedSum, Dataset, ZPoint};
use crate::error::{Error, Result};
use crate::functional::MixedBiasFunctional;
use crate::moments::{ImbalanceVector, MomentSummaries};
use crate::basis::FeatureBasis;
use crate::solve::{
    fit_lasso, fit_ols, fit_ridge, solve_linear, Matrix, DEFAULT_LASSO_MAX_ITER,
    DEFAULT_LASSO_TOL,
};

/// A linear nuisance h(z) = coefficientsᵀ φ(z).
#[derive(Debug, Clone, PartialEq)]
pub struct LinearNuisance {
    basis: FeatureBasis,
    coefficients: Vec<f64>,
}

impl LinearNuisance {
    pub fn new(basis: FeatureBasis, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != basis.p() {
            return Err(Error::DimensionMismatch {
                context: "nuisance coefficients",
                got: coefficients.len(),
                expected: basis.p(),
            });
        }
        Ok(LinearNuisance {
            basis,
            coefficients,
        })
    }

    pub fn basis(&self) -> &FeatureBasis {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// coefficientsᵀ φ(z), accumulated with product error compensation.
    pub fn eval(&self, z: &ZPoint) -> Result<f64> {
        if z.len() != self.basis.z_arity() {
            return Err(Error::ArityMismatch {
                basis_arity: self.basis.z_arity(),
                z_arity: z.len(),
            });
        }
        let mut sum = CompensatedSum::new();
        for (c, feature) in self.coefficients.iter().zip(self.basis.features()) {
            let v = feature.eval(z);
            let prod = c * v;
            sum.add(prod);
            sum.add(f64::mul_add(*c, v, -prod));
        }
        Ok(sum.value())
    }
}

/// Either a linear nuisance or an arbitrary deterministic callable.
#[derive(Clone)]
pub enum Nuisance {
    Linear(LinearNuisance),
    Opaque(Arc<dyn Fn(&ZPoint) -> f64 + Send + Sync>),
}

impl fmt::Debug for Nuisance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Nuisance::Linear(lin) => f.debug_tuple("Linear").field(lin).finish(),
            Nuisance::Opaque(_) => f.write_str("Opaque(..)"),
        }
    }
}

impl Nuisance {
    pub fn linear(basis: FeatureBasis, coefficients: Vec<f64>) -> Result<Self> {
        Ok(Nuisance::Linear(LinearNuisance::new(basis, coefficients)?))
    }

    pub fn opaque(f: Arc<dyn Fn(&ZPoint) -> f64 + Send + Sync>) -> Self {
        Nuisance::Opaque(f)
    }

    /// The identically-zero nuisance.
    pub fn zero() -> Self {
        Nuisance::Opaque(Arc::new(|_z: &ZPoint| 0.0))
    }

    pub fn eval(&self, z: &ZPoint) -> Result<f64> {
        match self {
            Nuisance::Linear(lin) => lin.eval(z),
            Nuisance::Opaque(f) => Ok(f(z)),
        }
    }

    /// The linear representation, when there is one.
    pub fn as_linear(&self) -> Option<&LinearNuisance> {
        match self {
            Nuisance::Linear(lin) => Some(lin),
            Nuisance::Opaque(_) => None,
        }
    }

    /// c·self, staying linear when self is linear so downstream consumers
    /// keep the coefficient representation.
    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Nuisance::Linear(lin) => Nuisance::Linear(LinearNuisance {
                basis: lin.basis.clone(),
                coefficients: lin.coefficients.iter().map(|w| c * w).collect(),
            }),
            Nuisance::Opaque(f) => {
                let f = Arc::clone(f);
                Nuisance::Opaque(Arc::new(move |z: &ZPoint| c * f(z)))
            }
        }
    }
}

/// Solves the scalar alpha equation Φ̂ᵀβ = m2bar for β.
///
/// When `linear_hint = (G, M2)` is supplied (b̂ is linear in the basis) and
/// G is nonsingular, the OLS-type solution G⁻¹M2 is returned: it satisfies
/// the vector form of the equation and therefore the scalar form for every
/// linear b̂. Otherwise the minimum-norm solution Φ̂·m2bar/(Φ̂ᵀΦ̂) is a
/// canonical representative; which solution to prefer for nonlinear b̂ is a
/// convention, not a consequence of the estimating equations.
///
/// A zero imbalance vector leaves nothing to solve: the zero vector is
/// returned when m2bar is also zero, and the equation is declared
/// unsolvable otherwise. Both branches test exact zeros; near-degenerate
/// imbalances legitimately produce large coefficients.
pub fn solve_main_alpha_eq(
    phi_hat: &ImbalanceVector,
    m2bar: f64,
    linear_hint: Option<(&Matrix, &[f64])>,
) -> Result<Vec<f64>> {
    if let Some((g, m2)) = linear_hint {
        match fit_ols(g, m2) {
            Ok(beta) => return Ok(beta),
            Err(Error::SingularSystem { .. }) | Err(Error::IllConditionedSystem { .. }) => {}
            Err(other) => return Err(other),
        }
    }
    let v = &phi_hat.phi_hat;
    if v.iter().all(|&x| x == 0.0) {
        if m2bar == 0.0 {
            return Ok(vec![0.0; v.len()]);
        }
        return Err(Error::NoSolution { m2bar });
    }
    let mut norm2 = CompensatedSum::new();
    for &x in v {
        norm2.add(x * x);
    }
    let scale = m2bar / norm2.value();
    Ok(v.iter().map(|&x| x * scale).collect())
}

/// The perfectly balanced coefficients α̂ = G⁻¹M1 as a linear nuisance;
/// its imbalance vector reproduces M1, making every γ_j equal to 1.
pub fn balanced_b(g: &Matrix, m1: &[f64], basis: &FeatureBasis) -> Result<LinearNuisance> {
    if m1.len() != g.nrows() {
        return Err(Error::DimensionMismatch {
            context: "moment vector",
            got: m1.len(),
            expected: g.nrows(),
        });
    }
    LinearNuisance::new(basis.clone(), solve_linear(g, m1)?)
}

/// Rescales b0 so that the pair (â, c·b0) satisfies the second estimating
/// equation: c = -ℙn{m1(O,â)} / ℙn{s_ab·â·b0}.
///
/// The denominator is declared degenerate when its magnitude does not
/// exceed 1e-12·(1 + ℙn{|s_ab·â·b0|}), so cancellation-to-noise is refused
/// rather than amplified into an arbitrarily large c.
pub fn rescale_to_l2(
    dataset: &Dataset,
    functional: &MixedBiasFunctional,
    a_hat: &Nuisance,
    b0: &Nuisance,
) -> Result<Nuisance> {
    for nuisance in [a_hat, b0] {
        if let Some(lin) = nuisance.as_linear() {
            if lin.basis.z_arity() != functional.z_arity() {
                return Err(Error::ArityMismatch {
                    basis_arity: lin.basis.z_arity(),
                    z_arity: functional.z_arity(),
                });
            }
        }
    }
    let a_fn = |z: &ZPoint| a_hat.eval(z).unwrap_or(f64::NAN);
    let numerator = empirical_mean(dataset, |obs| functional.m1(obs, &a_fn))?;
    let denominator = empirical_mean(dataset, |obs| {
        let z = functional.extract_z(obs)?;
        Ok(functional.s_ab(obs)? * a_hat.eval(&z)? * b0.eval(&z)?)
    })?;
    let magnitude = empirical_mean(dataset, |obs| {
        let z = functional.extract_z(obs)?;
        Ok((functional.s_ab(obs)? * a_hat.eval(&z)? * b0.eval(&z)?).abs())
    })?;
    if denominator.abs() <= 1e-12 * (1.0 + magnitude) {
        return Err(Error::CannotRescale {
            denominator,
        });
    }
    Ok(b0.scaled(-numerator / denominator))
}

/// Which nuisance a descriptor fits: the a-side solves against M2, the
/// b-side against M1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

impl Side {
    fn moment<'m>(&self, summaries: &'m MomentSummaries) -> &'m [f64] {
        match self {
            Side::A => &summaries.m2,
            Side::B => &summaries.m1,
        }
    }
}

/// Parsed nuisance descriptor.
#[derive(Debug, Clone, PartialEq)]
pub enum NuisanceSpec {
    Ols,
    Ridge(f64),
    Lasso(f64),
    Coeffs(Vec<f64>),
    Balanced,
    ExpitLinear(Vec<f64>),
}

fn parse_lambda(descriptor: &str, text: &str) -> Result<f64> {
    let lambda: f64 = text.parse().map_err(|_| Error::InvalidNuisanceSpec {
        descriptor: descriptor.to_string(),
        reason: format!("{text:?} is not a number"),
    })?;
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidNuisanceSpec {
            descriptor: descriptor.to_string(),
            reason: "lambda must be finite and nonnegative".to_string(),
        });
    }
    Ok(lambda)
}

fn parse_vector(descriptor: &str, text: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| {
            v.trim().parse().map_err(|_| Error::InvalidNuisanceSpec {
                descriptor: descriptor.to_string(),
                reason: format!("{:?} is not a number", v.trim()),
            })
        })
        .collect::<Result<_>>()?;
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidNuisanceSpec {
            descriptor: descriptor.to_string(),
            reason: "coefficient list must be nonempty and finite".to_string(),
        });
    }
    Ok(values)
}

impl FromStr for NuisanceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t {
            "ols" => return Ok(NuisanceSpec::Ols),
            "balanced" => return Ok(NuisanceSpec::Balanced),
            "" => {
                return Err(Error::InvalidNuisanceSpec {
                    descriptor: s.to_string(),
                    reason: "empty descriptor".to_string(),
                })
            }
            _ => {}
        }
        if let Some(rest) = t.strip_prefix("ridge:") {
            return Ok(NuisanceSpec::Ridge(parse_lambda(t, rest)?));
        }
        if let Some(rest) = t.strip_prefix("lasso:") {
            return Ok(NuisanceSpec::Lasso(parse_lambda(t, rest)?));
        }
        if let Some(rest) = t.strip_prefix("coeffs:") {
            return Ok(NuisanceSpec::Coeffs(parse_vector(t, rest)?));
        }
        if let Some(rest) = t.strip_prefix("expit-linear:") {
            return Ok(NuisanceSpec::ExpitLinear(parse_vector(t, rest)?));
        }
        Err(Error::InvalidNuisanceSpec {
            descriptor: s.to_string(),
            reason: "unknown descriptor".to_string(),
        })
    }
}

impl fmt::Display for NuisanceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(values: &[f64]) -> String {
            values
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
        match self {
            NuisanceSpec::Ols => write!(f, "ols"),
            NuisanceSpec::Ridge(l) => write!(f, "ridge:{l}"),
            NuisanceSpec::Lasso(l) => write!(f, "lasso:{l}"),
            NuisanceSpec::Coeffs(v) => write!(f, "coeffs:{}", join(v)),
            NuisanceSpec::Balanced => write!(f, "balanced"),
            NuisanceSpec::ExpitLinear(v) => write!(f, "expit-linear:{}", join(v)),
        }
    }
}

/// Fits a descriptor on one side of the product. `balanced` is the b-side
/// OLS-type solve by another name and is rejected on the a-side to keep
/// reports honest about what was fit.
pub fn fit_side(
    spec: &NuisanceSpec,
    side: Side,
    summaries: &MomentSummaries,
    basis: &FeatureBasis,
) -> Result<Nuisance> {
    let m = side.moment(summaries);
    match spec {
        NuisanceSpec::Ols => Nuisance::linear(basis.clone(), fit_ols(&summaries.g, m)?),
        NuisanceSpec::Ridge(lambda) => {
            Nuisance::linear(basis.clone(), fit_ridge(&summaries.g, m, *lambda)?)
        }
        NuisanceSpec::Lasso(lambda) => {
            let fit = fit_lasso(
                &summaries.g,
                m,
                *lambda,
                DEFAULT_LASSO_TOL,
                DEFAULT_LASSO_MAX_ITER,
            )?;
            Nuisance::linear(basis.clone(), fit.coefficients)
        }
        NuisanceSpec::Coeffs(v) => Nuisance::linear(basis.clone(), v.clone()),
        NuisanceSpec::Balanced => match side {
            Side::B => Ok(Nuisance::Linear(balanced_b(
                &summaries.g,
                &summaries.m1,
                basis,
            )?)),
            Side::A => Err(Error::InvalidNuisanceSpec {
                descriptor: "balanced".to_string(),
                reason: "balanced coefficients are defined for the b side".to_string(),
            }),
        },
        NuisanceSpec::ExpitLinear(v) => {
            let lin = LinearNuisance::new(basis.clone(), v.clone())?;
            Ok(Nuisance::Opaque(Arc::new(move |z: &ZPoint| {
                let u = lin.eval(z).unwrap_or(f64::NAN);
                1.0 / (1.0 + (-u).exp())
            })))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::test_fixture::fix4;
    use crate::functional::{make_functional_aly, FunctionalKind};
    use crate::moments::{imbalance_vector, moment_summaries};
    use proptest::prelude::*;

    fn cf_mean() -> MixedBiasFunctional {
        make_functional_aly(FunctionalKind::CfMean, "a", "l", "y")
    }

    fn intercept2() -> FeatureBasis {
        FeatureBasis::parse("intercept", 2).unwrap()
    }

    #[test]
    fn linear_nuisance_checks_lengths_and_evaluates() {
        let basis = FeatureBasis::parse("intercept,raw", 2).unwrap();
        assert!(matches!(
            LinearNuisance::new(basis.clone(), vec![1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let lin = LinearNuisance::new(basis, vec![1.0, 2.0, -0.5]).unwrap();
        let z = ZPoint::new(vec![1.0, 3.0]);
        assert_eq!(lin.eval(&z).unwrap(), 1.0 + 2.0 - 1.5);
        assert!(matches!(
            lin.eval(&ZPoint::new(vec![1.0])),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn alpha_eq_scalar_example() {
        let phi = ImbalanceVector {
            phi_hat: vec![2.0],
        };
        let beta = solve_main_alpha_eq(&phi, 5.0, None).unwrap();
        assert_eq!(beta, vec![2.5]);
    }

    #[test]
    fn alpha_eq_degenerate_consistent_case() {
        let phi = ImbalanceVector {
            phi_hat: vec![0.0, 0.0],
        };
        assert_eq!(solve_main_alpha_eq(&phi, 0.0, None).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(
            solve_main_alpha_eq(&phi, 1.5, None),
            Err(Error::NoSolution { .. })
        ));
    }

    #[test]
    fn alpha_eq_prefers_ols_under_linear_hint() {
        let ds = fix4();
        let s = moment_summaries(&ds, &cf_mean(), &intercept2()).unwrap();
        let phi = ImbalanceVector {
            phi_hat: vec![2.0],
        };
        let beta = solve_main_alpha_eq(&phi, 5.0, Some((&s.g, &s.m2))).unwrap();
        assert_eq!(beta, vec![2.5]);
    }

    #[test]
    fn alpha_eq_falls_back_when_hint_is_singular() {
        let g = Matrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
        let phi = ImbalanceVector {
            phi_hat: vec![3.0, 4.0],
        };
        let beta = solve_main_alpha_eq(&phi, 5.0, Some((&g, &[1.0, 1.0]))).unwrap();
        // Minimum-norm: phi_hat * m2bar / ||phi_hat||^2 = (3,4)/5.
        assert!((beta[0] - 0.6).abs() <= 1e-15);
        assert!((beta[1] - 0.8).abs() <= 1e-15);
    }

    #[test]
    fn balanced_b_reproduces_m1_as_imbalance() {
        let ds = fix4();
        let f = cf_mean();
        let basis = FeatureBasis::parse("intercept,raw", 2).unwrap();
        let s = moment_summaries(&ds, &f, &basis).unwrap();
        let alpha = balanced_b(&s.g, &s.m1, &basis).unwrap();
        let iv = imbalance_vector(&ds, &f, &basis, &Nuisance::Linear(alpha)).unwrap();
        let bound = 1e-10 * (1.0 + s.m1.iter().fold(0.0f64, |a, b| a.max(b.abs())));
        for (got, want) in iv.phi_hat.iter().zip(&s.m1) {
            assert!((got - want).abs() <= bound, "{got} vs {want}");
        }
    }

    #[test]
    fn balanced_b_on_intercept_is_one() {
        let ds = fix4();
        let s = moment_summaries(&ds, &cf_mean(), &intercept2()).unwrap();
        let alpha = balanced_b(&s.g, &s.m1, &intercept2()).unwrap();
        assert_eq!(alpha.coefficients(), &[1.0]);
    }

    #[test]
    fn balanced_b_of_zero_moment_is_zero() {
        let g = Matrix::identity(2);
        let basis = FeatureBasis::parse("intercept,raw", 1).unwrap();
        let alpha = balanced_b(&g, &[0.0, 0.0], &basis).unwrap();
        assert_eq!(alpha.coefficients(), &[0.0, 0.0]);
    }

    #[test]
    fn rescale_fix4_hand_example() {
        let ds = fix4();
        let f = cf_mean();
        let a_hat = Nuisance::linear(intercept2(), vec![2.5]).unwrap();
        let b0 = Nuisance::linear(intercept2(), vec![1.0]).unwrap();
        let b = rescale_to_l2(&ds, &f, &a_hat, &b0).unwrap();
        assert_eq!(b.eval(&ZPoint::new(vec![0.0, 0.0])).unwrap(), 1.0);
        // l2: Pn{s_ab a b} + Pn{m1(O,a)} = 0.
        let lhs = empirical_mean(&ds, |obs| {
            let z = f.extract_z(obs)?;
            Ok(f.s_ab(obs)? * a_hat.eval(&z)? * b.eval(&z)?)
        })
        .unwrap();
        let m1bar = empirical_mean(&ds, |obs| f.m1(obs, &|z| a_hat.eval(z).unwrap())).unwrap();
        assert!((lhs + m1bar).abs() <= 1e-10 * (1.0 + m1bar.abs()));
    }

    #[test]
    fn rescale_refuses_zero_a() {
        let ds = fix4();
        let f = cf_mean();
        let a_hat = Nuisance::zero();
        let b0 = Nuisance::linear(intercept2(), vec![1.0]).unwrap();
        assert!(matches!(
            rescale_to_l2(&ds, &f, &a_hat, &b0),
            Err(Error::CannotRescale { .. })
        ));
    }

    #[test]
    fn rescale_is_invariant_to_b0_scale() {
        let ds = fix4();
        let f = cf_mean();
        let basis = FeatureBasis::parse("intercept,raw", 2).unwrap();
        let a_hat = Nuisance::linear(basis.clone(), vec![0.5, 1.0, -0.25]).unwrap();
        let b0 = Nuisance::linear(basis.clone(), vec![1.0, 0.0, 0.5]).unwrap();
        let b0_doubled = b0.scaled(2.0);
        let b1 = rescale_to_l2(&ds, &f, &a_hat, &b0).unwrap();
        let b2 = rescale_to_l2(&ds, &f, &a_hat, &b0_doubled).unwrap();
        for obs in ds.rows() {
            let z = f.extract_z(&obs).unwrap();
            assert_eq!(b1.eval(&z).unwrap(), b2.eval(&z).unwrap());
        }
    }

    #[test]
    fn nuisance_spec_grammar_round_trips() {
        for text in [
            "ols",
            "ridge:0.5",
            "lasso:0.01",
            "coeffs:1,-2,0.5",
            "balanced",
            "expit-linear:0.5,1",
        ] {
            let spec: NuisanceSpec = text.parse().unwrap();
            let again: NuisanceSpec = spec.to_string().parse().unwrap();
            assert_eq!(spec, again);
        }
    }

    #[test]
    fn nuisance_spec_rejects_malformed_descriptors() {
        for text in ["", "magic", "ridge:-1", "ridge:x", "lasso:", "coeffs:", "coeffs:1,zz"] {
            assert!(
                matches!(
                    text.parse::<NuisanceSpec>(),
                    Err(Error::InvalidNuisanceSpec { .. })
                ),
                "{text:?} should be rejected"
            );
        }
    }

    #[test]
    fn fit_side_dispatches_moments_by_side() {
        let ds = fix4();
        let s = moment_summaries(&ds, &cf_mean(), &intercept2()).unwrap();
        let a = fit_side(&NuisanceSpec::Ols, Side::A, &s, &intercept2()).unwrap();
        assert_eq!(a.as_linear().unwrap().coefficients(), &[2.5]);
        let b = fit_side(&NuisanceSpec::Ols, Side::B, &s, &intercept2()).unwrap();
        assert_eq!(b.as_linear().unwrap().coefficients(), &[1.0]);
        let bal = fit_side(&NuisanceSpec::Balanced, Side::B, &s, &intercept2()).unwrap();
        assert_eq!(bal.as_linear().unwrap().coefficients(), &[1.0]);
        assert!(matches!(
            fit_side(&NuisanceSpec::Balanced, Side::A, &s, &intercept2()),
            Err(Error::InvalidNuisanceSpec { .. })
        ));
    }

    #[test]
    fn expit_linear_is_the_logistic_of_the_linear_form() {
        let ds = fix4();
        let basis = FeatureBasis::parse("intercept,raw", 2).unwrap();
        let s = moment_summaries(&ds, &cf_mean(), &basis).unwrap();
        let spec = NuisanceSpec::ExpitLinear(vec![0.5, 1.0, -1.0]);
        let b = fit_side(&spec, Side::B, &s, &basis).unwrap();
        let z = ZPoint::new(vec![1.0, 0.25]);
        let u: f64 = 0.5 + 1.0 - 0.25;
        assert!((b.eval(&z).unwrap() - 1.0 / (1.0 + (-u).exp())).abs() <= 1e-15);
        assert!(b.as_linear().is_none());
    }

    proptest! {
        #[test]
        fn min_norm_solution_is_along_phi_hat_and_solves(
            v in proptest::collection::vec(-4.0f64..4.0, 1..8),
            m2bar in -10.0f64..10.0,
        ) {
            prop_assume!(v.iter().any(|&x| x != 0.0));
            let phi = ImbalanceVector { phi_hat: v.clone() };
            let beta = solve_main_alpha_eq(&phi, m2bar, None).unwrap();
            // Scalar equation holds.
            let dot: f64 = beta.iter().zip(&v).map(|(b, p)| b * p).sum();
            prop_assert!((dot - m2bar).abs() <= 1e-10 * (1.0 + m2bar.abs()));
            // beta is a scalar multiple of phi_hat.
            let norm2: f64 = v.iter().map(|x| x * x).sum();
            let scale = m2bar / norm2;
            for (b, p) in beta.iter().zip(&v) {
                prop_assert!((b - scale * p).abs() <= 1e-12 * (1.0 + (scale * p).abs()));
            }
        }
    }
}
