//! Command orchestration: turn a validated [`RunConfig`] into a [`Report`].

use std::path::Path;
use std::str::FromStr;

use mixedbias::{
    estimate_bundle, moment_summaries, verify_identities, BasisSpec, Dataset, Dgp, EstimatorKind,
    FeatureBasis, FunctionalKind, McConfig, NuisanceSpec, Side,
};

use crate::config::{Command, RunConfig};
use crate::csv::load_csv;
use crate::error::CliError;
use crate::report::Report;

fn load_dataset(config: &RunConfig) -> Result<Dataset, CliError> {
    if let Some(path) = &config.data {
        load_csv(Path::new(path))
    } else {
        let kind = config.dgp.as_deref().expect("validated: dgp present");
        let dgp = Dgp::from_params(kind, &config.dgp_params)?;
        Ok(dgp.sample(config.n[0] as usize, config.seed)?)
    }
}

fn run_on_data(config: &RunConfig, verify: bool) -> Result<Report, CliError> {
    let dataset = load_dataset(config)?;
    let kind = FunctionalKind::parse(config.functional.as_deref().expect("validated"))?;
    let functional = mixedbias::make_functional(kind, &config.bindings)?;
    let arity = functional.z_arity();
    let basis_a = FeatureBasis::parse(config.basis_a.as_deref().expect("validated"), arity)?;
    let basis_b = FeatureBasis::parse(config.basis_b.as_deref().expect("validated"), arity)?;
    let spec_a = NuisanceSpec::from_str(&config.nuisance_a)?;
    let spec_b = NuisanceSpec::from_str(&config.nuisance_b)?;

    let summaries_a = moment_summaries(&dataset, &functional, &basis_a)?;
    let a_hat = mixedbias::fit_side(&spec_a, Side::A, &summaries_a, &basis_a)?;
    let b_hat = if basis_b == basis_a {
        mixedbias::fit_side(&spec_b, Side::B, &summaries_a, &basis_b)?
    } else {
        let summaries_b = moment_summaries(&dataset, &functional, &basis_b)?;
        mixedbias::fit_side(&spec_b, Side::B, &summaries_b, &basis_b)?
    };

    let estimates = estimate_bundle(&dataset, &functional, &a_hat, &b_hat)?;
    let identities = if verify {
        let linear = a_hat
            .as_linear()
            .expect("validated: a-side nuisance is linear");
        Some(verify_identities(
            &dataset,
            &functional,
            &basis_a,
            linear.coefficients(),
            &b_hat,
        )?)
    } else {
        None
    };
    Ok(Report::new(config.clone(), Some(estimates), identities, None))
}

fn run_simulate(config: &RunConfig) -> Result<Report, CliError> {
    let dgp = Dgp::from_params(config.dgp.as_deref().expect("validated"), &config.dgp_params)?;
    let estimator = EstimatorKind::from_str(config.estimator.as_deref().expect("validated"))?;
    let basis_a = BasisSpec::from_str(config.basis_a.as_deref().expect("validated"))?;
    let basis_b = BasisSpec::from_str(config.basis_b.as_deref().expect("validated"))?;
    let nuisance_a = NuisanceSpec::from_str(&config.nuisance_a)?;
    let nuisance_b = NuisanceSpec::from_str(&config.nuisance_b)?;
    let reps = config.reps.expect("validated: reps present");

    let mut reports = Vec::with_capacity(config.n.len());
    for &n in &config.n {
        let mc = McConfig {
            basis_a: basis_a.clone(),
            basis_b: basis_b.clone(),
            nuisance_a: nuisance_a.clone(),
            nuisance_b: nuisance_b.clone(),
            estimator,
            n: n as usize,
            reps,
            seed: config.seed,
        };
        reports.push(mixedbias::monte_carlo(&dgp, &mc)?);
    }
    Ok(Report::new(config.clone(), None, None, Some(reports)))
}

/// Executes the configured command and assembles its report.
pub fn run(config: &RunConfig) -> Result<Report, CliError> {
    match config.command {
        Command::Estimate => run_on_data(config, false),
        Command::Verify => run_on_data(config, true),
        Command::Simulate => run_simulate(config),
    }
}
