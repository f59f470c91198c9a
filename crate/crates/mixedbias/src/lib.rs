//! Estimation of mixed-bias-class functionals over linear feature bases,
//! with mechanical verification of the algebraic collapse identities that
//! relate the one-step, outcome-regression-type, IPW-type and plug-in
//! estimators.
//!
//! A functional in this class pairs two nuisance functions a and b of a
//! subvector Z with linear maps m1 and m2 so that
//!
//! ```text
//! χ̂_{a,b} = ℙn{s_ab·a(Z)·b(Z)} + ℙn{m1(O,a)} + ℙn{m2(O,b)} + ℙn{s_0}.
//! ```
//!
//! When the a-side is a linear form β̂ᵀφ(Z) fitted by OLS, ridge or lasso,
//! the choice of b̂ can be absorbed into an augmented coefficient vector,
//! collapsing the one-step estimator onto a pure outcome-regression form;
//! [`identities::verify_identities`] checks those collapses to machine
//! precision on concrete data. [`sim`] adds seeded data-generating
//! processes with closed-form truths and a Monte Carlo engine for
//! double-robustness experiments.
//!
//! The registry ships three functionals: the counterfactual outcome mean
//! (`cf-mean`), the average treatment effect (`ate`), and the expected
//! conditional covariance (`ecc`, which exercises a nonzero s_0 and a
//! positive s_ab).

pub mod basis;
pub mod data;
pub mod error;
pub mod estimators;
pub mod functional;
pub mod identities;
pub mod moments;
pub mod nuisance;
pub mod sim;
pub mod solve;

pub use basis::{BasisSpec, Feature, FeatureBasis};
pub use data::{compensated_dot, compensated_sum, empirical_mean, Dataset, Observation, ZPoint};
pub use error::{Error, Result};
pub use estimators::{
    augmented_coefficients, estimate_bundle, gamma_coefficients, ipw_estimate, one_step,
    or_estimate, plugin_product, EstimateBundle, GammaVector,
};
pub use functional::{
    make_functional, make_functional_aly, Bindings, FunctionalKind, MixedBiasFunctional,
};
pub use identities::{verify_identities, IdentityReport};
pub use moments::{imbalance_vector, moment_summaries, ImbalanceVector, MomentSummaries};
pub use nuisance::{
    balanced_b, fit_side, rescale_to_l2, solve_main_alpha_eq, LinearNuisance, Nuisance,
    NuisanceSpec, Side,
};
pub use sim::{monte_carlo, replication_seed, Dgp, EstimatorKind, McConfig, McReport};
pub use solve::{fit_lasso, fit_ols, fit_ridge, LassoResult, Matrix};

/// Library version, surfaced in machine-readable reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
