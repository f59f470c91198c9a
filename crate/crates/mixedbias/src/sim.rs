//! Seeded data-generating processes with closed-form truths, and the Monte
//! Carlo replication engine for double-robustness experiments.
//!
//! Both processes draw the covariate from Uniform(-1,1) so every population
//! moment used as a truth is analytic. Sampling uses ChaCha12 seeded from a
//! u64; replication r of a run with master seed s is seeded with
//! `splitmix64(s ^ splitmix64(r))`, which decorrelates nearby replication
//! indices while keeping every replication reproducible in isolation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::Normal;
use serde::Serialize;

use crate::basis::{BasisSpec, FeatureBasis};
use crate::data::{CompensatedSum, Dataset, ZPoint};
use crate::error::{Error, Result};
use crate::estimators::{ipw_estimate, one_step, or_estimate};
use crate::functional::{make_functional_aly, FunctionalKind, MixedBiasFunctional};
use crate::moments::moment_summaries;
use crate::nuisance::{fit_side, Nuisance, NuisanceSpec, Side};

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// A data-generating process with analytic truth and true nuisances.
///
/// * `cf-mean-dgp(c0, c1)`: L ~ Uniform(-1,1), A ~ Bernoulli(expit(c0+c1·L)),
///   Y = 1 + 2L + A(1+L) + ε with ε ~ Normal(0,1). The counterfactual mean
///   truth is E[1+2L+1+L] = 2. True nuisances: a(A,L) = 1+2L+A(1+L),
///   b(A,L) = A/expit(c0+c1·L).
/// * `ecc-dgp(theta, sigma2_u)`: L ~ Uniform(-1,1), A = L + u with
///   u ~ Normal(0, σ²_u), Y = L + θA + e with e ~ Normal(0,1), u ⊥ e.
///   The expected conditional covariance truth is θ·σ²_u. True nuisances:
///   a(L) = (1+θ)L, b(L) = L.
#[derive(Debug, Clone, PartialEq)]
pub enum Dgp {
    CfMean { c0: f64, c1: f64 },
    Ecc { theta: f64, sigma2_u: f64 },
}

impl Dgp {
    /// Counterfactual-mean process. The propensity expit(c0 + c1·L) must
    /// stay inside [0.01, 0.99] over L in [-1, 1].
    pub fn cf_mean(c0: f64, c1: f64) -> Result<Self> {
        if !c0.is_finite() || !c1.is_finite() {
            return Err(Error::InvalidDgpParam {
                reason: "c0 and c1 must be finite".to_string(),
            });
        }
        let lo = expit(c0 - c1.abs());
        let hi = expit(c0 + c1.abs());
        if lo < 0.01 || hi > 0.99 {
            return Err(Error::PositivityViolation { lo, hi });
        }
        Ok(Dgp::CfMean { c0, c1 })
    }

    /// Expected-conditional-covariance process; requires σ²_u > 0.
    pub fn ecc(theta: f64, sigma2_u: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidDgpParam {
                reason: "theta must be finite".to_string(),
            });
        }
        if !sigma2_u.is_finite() || sigma2_u <= 0.0 {
            return Err(Error::InvalidDgpParam {
                reason: format!("sigma2_u must be positive, got {sigma2_u}"),
            });
        }
        Ok(Dgp::Ecc { theta, sigma2_u })
    }

    /// Instantiates from a CLI-style kind name and parameter map.
    /// Unrecognized parameters are rejected; omitted ones take the defaults
    /// cf-mean-dgp(c0=0.5, c1=1) and ecc-dgp(theta=1, sigma2_u=0.25).
    pub fn from_params(kind: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let lookup = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        let allowed: &[&str] = match kind {
            "cf-mean-dgp" => &["c0", "c1"],
            "ecc-dgp" => &["theta", "sigma2_u"],
            other => {
                return Err(Error::InvalidDgpParam {
                    reason: format!("unknown DGP kind {other:?}"),
                })
            }
        };
        for key in params.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::InvalidDgpParam {
                    reason: format!("unknown parameter {key:?} for {kind}"),
                });
            }
        }
        match kind {
            "cf-mean-dgp" => Dgp::cf_mean(lookup("c0", 0.5), lookup("c1", 1.0)),
            _ => Dgp::ecc(lookup("theta", 1.0), lookup("sigma2_u", 0.25)),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Dgp::CfMean { .. } => "cf-mean-dgp",
            Dgp::Ecc { .. } => "ecc-dgp",
        }
    }

    /// The registry functional this process targets.
    pub fn functional_kind(&self) -> FunctionalKind {
        match self {
            Dgp::CfMean { .. } => FunctionalKind::CfMean,
            Dgp::Ecc { .. } => FunctionalKind::Ecc,
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut map = BTreeMap::new();
        match *self {
            Dgp::CfMean { c0, c1 } => {
                map.insert("c0".to_string(), c0);
                map.insert("c1".to_string(), c1);
            }
            Dgp::Ecc { theta, sigma2_u } => {
                map.insert("theta".to_string(), theta);
                map.insert("sigma2_u".to_string(), sigma2_u);
            }
        }
        map
    }

    /// The analytic value of the target functional.
    pub fn truth(&self) -> f64 {
        match *self {
            // E[1 + 2L + 1 + L] with E[L] = 0.
            Dgp::CfMean { .. } => 2.0,
            // E[Cov(A, Y | L)] = theta * Var(u).
            Dgp::Ecc { theta, sigma2_u } => theta * sigma2_u,
        }
    }

    /// The analytic nuisance pair (a_P, b_P) as opaque callables.
    pub fn true_nuisances(&self) -> (Nuisance, Nuisance) {
        match *self {
            Dgp::CfMean { c0, c1 } => {
                let a = Nuisance::opaque(Arc::new(|z: &ZPoint| {
                    1.0 + 2.0 * z[1] + z[0] * (1.0 + z[1])
                }));
                let b = Nuisance::opaque(Arc::new(move |z: &ZPoint| {
                    z[0] / expit(c0 + c1 * z[1])
                }));
                (a, b)
            }
            Dgp::Ecc { theta, .. } => {
                let a = Nuisance::opaque(Arc::new(move |z: &ZPoint| (1.0 + theta) * z[0]));
                let b = Nuisance::opaque(Arc::new(|z: &ZPoint| z[0]));
                (a, b)
            }
        }
    }

    /// Draws n rows into columns `a`, `l`, `y`. Per-row draw order is
    /// documented per process: cf-mean draws L, then the Bernoulli uniform,
    /// then ε; ecc draws L, then u, then e. Identical (process, n, seed)
    /// give bit-identical datasets.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::InvalidSimulation {
                reason: "sample size must be at least 1".to_string(),
            });
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let covariate = Uniform::new(-1.0f64, 1.0);
        let mut a = Vec::with_capacity(n);
        let mut l = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        match *self {
            Dgp::CfMean { c0, c1 } => {
                let unit = Uniform::new(0.0f64, 1.0);
                let noise = Normal::new(0.0, 1.0).expect("unit normal");
                for _ in 0..n {
                    let li = covariate.sample(&mut rng);
                    let ai = if unit.sample(&mut rng) < expit(c0 + c1 * li) {
                        1.0
                    } else {
                        0.0
                    };
                    let eps = noise.sample(&mut rng);
                    l.push(li);
                    a.push(ai);
                    y.push(1.0 + 2.0 * li + ai * (1.0 + li) + eps);
                }
            }
            Dgp::Ecc { theta, sigma2_u } => {
                let u_noise = Normal::new(0.0, sigma2_u.sqrt()).expect("validated sigma");
                let e_noise = Normal::new(0.0, 1.0).expect("unit normal");
                for _ in 0..n {
                    let li = covariate.sample(&mut rng);
                    let ui = u_noise.sample(&mut rng);
                    let ei = e_noise.sample(&mut rng);
                    let ai = li + ui;
                    l.push(li);
                    a.push(ai);
                    y.push(li + theta * ai + ei);
                }
            }
        }
        Dataset::new(vec![("a".into(), a), ("l".into(), l), ("y".into(), y)])
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The per-replication seed for replication `r` under a master seed.
pub fn replication_seed(master: u64, r: u64) -> u64 {
    splitmix64(master ^ splitmix64(r))
}

/// Which estimator a Monte Carlo run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    OneStep,
    Or,
    Ipw,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::OneStep => "one-step",
            EstimatorKind::Or => "or",
            EstimatorKind::Ipw => "ipw",
        }
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-step" => Ok(EstimatorKind::OneStep),
            "or" => Ok(EstimatorKind::Or),
            "ipw" => Ok(EstimatorKind::Ipw),
            other => Err(Error::InvalidSimulation {
                reason: format!("unknown estimator {other:?}"),
            }),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Monte Carlo run configuration. The bases may differ per side so basis
/// truncation (the misspecification device of the double-robustness
/// experiments) can hit one nuisance at a time.
#[derive(Debug, Clone)]
pub struct McConfig {
    pub basis_a: BasisSpec,
    pub basis_b: BasisSpec,
    pub nuisance_a: NuisanceSpec,
    pub nuisance_b: NuisanceSpec,
    pub estimator: EstimatorKind,
    pub n: usize,
    pub reps: u64,
    pub seed: u64,
}

/// Summary of one Monte Carlo run.
#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub estimator: String,
    pub n: usize,
    pub reps: u64,
    pub truth: f64,
    pub mean_estimate: f64,
    pub bias: f64,
    pub sd: f64,
    pub mc_se: f64,
    pub seed: u64,
}

fn functional_for(dgp: &Dgp) -> MixedBiasFunctional {
    make_functional_aly(dgp.functional_kind(), "a", "l", "y")
}

/// Runs `reps` independent replications: sample, fit the nuisances the
/// estimator actually uses, evaluate. Aggregation is in replication-index
/// order, so identical inputs give bit-identical reports. Any failing
/// replication aborts the run carrying its index.
pub fn monte_carlo(dgp: &Dgp, config: &McConfig) -> Result<McReport> {
    if config.reps < 2 {
        return Err(Error::InvalidSimulation {
            reason: format!("reps must be at least 2, got {}", config.reps),
        });
    }
    let functional = functional_for(dgp);
    let basis_a = FeatureBasis::build(&config.basis_a, functional.z_arity())?;
    let basis_b = FeatureBasis::build(&config.basis_b, functional.z_arity())?;

    let mut estimates = Vec::with_capacity(config.reps as usize);
    for r in 0..config.reps {
        let run = || -> Result<f64> {
            let dataset = dgp.sample(config.n, replication_seed(config.seed, r))?;
            let fit = |spec: &NuisanceSpec, side: Side, basis: &FeatureBasis| -> Result<Nuisance> {
                let summaries = moment_summaries(&dataset, &functional, basis)?;
                fit_side(spec, side, &summaries, basis)
            };
            match config.estimator {
                EstimatorKind::OneStep => {
                    let a = fit(&config.nuisance_a, Side::A, &basis_a)?;
                    let b = fit(&config.nuisance_b, Side::B, &basis_b)?;
                    one_step(&dataset, &functional, &a, &b)
                }
                EstimatorKind::Or => {
                    let a = fit(&config.nuisance_a, Side::A, &basis_a)?;
                    or_estimate(&dataset, &functional, &a)
                }
                EstimatorKind::Ipw => {
                    let b = fit(&config.nuisance_b, Side::B, &basis_b)?;
                    ipw_estimate(&dataset, &functional, &b)
                }
            }
        };
        estimates.push(run().map_err(|e| Error::ReplicationFailed {
            replication: r,
            source: Box::new(e),
        })?);
    }

    let reps_f = config.reps as f64;
    let mut mean_sum = CompensatedSum::new();
    for &e in &estimates {
        mean_sum.add(e);
    }
    let mean_estimate = mean_sum.value() / reps_f;
    let mut ss = CompensatedSum::new();
    for &e in &estimates {
        let d = e - mean_estimate;
        ss.add(d * d);
    }
    let sd = (ss.value() / (reps_f - 1.0)).sqrt();
    Ok(McReport {
        estimator: config.estimator.name().to_string(),
        n: config.n,
        reps: config.reps,
        truth: dgp.truth(),
        mean_estimate,
        bias: mean_estimate - dgp.truth(),
        sd,
        mc_se: sd / reps_f.sqrt(),
        seed: config.seed,
    })
}
