use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mixedbias_cli::config::{resolve, CliOverrides, Command as RunCommand};
use mixedbias_cli::error::{CliError, EXIT_IDENTITY_FAILURE};
use mixedbias_cli::report::to_json;
use mixedbias_cli::runner::run;

#[derive(Parser)]
#[command(
    name = "mixedbias",
    version,
    about = "Mixed-bias functional estimation, identity verification, and Monte Carlo simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Subcommand)]
enum Commands {
    /// Estimate the functional on a dataset with the configured nuisances.
    Estimate(SharedArgs),
    /// Check the algebraic collapse identities on a dataset.
    Verify(SharedArgs),
    /// Run seeded Monte Carlo replications against an analytic truth.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SharedArgs {
    /// JSON configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Functional kind: cf-mean, ate, or ecc.
    #[arg(long)]
    functional: Option<String>,
    /// Role binding role=column (repeatable; accepts comma lists for l).
    #[arg(long = "bind", value_name = "ROLE=COLUMN")]
    bind: Vec<String>,
    /// Feature basis for both sides, e.g. "intercept,raw,interactions".
    #[arg(long)]
    basis: Option<String>,
    /// a-side basis, overriding --basis.
    #[arg(long)]
    basis_a: Option<String>,
    /// b-side basis, overriding --basis.
    #[arg(long)]
    basis_b: Option<String>,
    /// a-side nuisance: ols, ridge:<l>, lasso:<l>, coeffs:<v,..>, expit-linear:<v,..>.
    #[arg(long)]
    nuisance_a: Option<String>,
    /// b-side nuisance; additionally accepts balanced.
    #[arg(long)]
    nuisance_b: Option<String>,
    /// Numeric CSV file with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Sample from a built-in process instead of --data: cf-mean-dgp or ecc-dgp.
    #[arg(long)]
    dgp: Option<String>,
    /// DGP parameter k=v (repeatable).
    #[arg(long = "dgp-param", value_name = "K=V")]
    dgp_param: Vec<String>,
    /// Sample size; simulate accepts a comma list.
    #[arg(long)]
    n: Option<String>,
    /// Master seed (default 0).
    #[arg(long)]
    seed: Option<u64>,
    /// Report destination (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    shared: SharedArgs,
    /// Replications per grid point (at least 2).
    #[arg(long)]
    reps: Option<u64>,
    /// Estimator to simulate: one-step, or, ipw (default one-step).
    #[arg(long)]
    estimator: Option<String>,
}

fn to_overrides(shared: SharedArgs, reps: Option<u64>, estimator: Option<String>) -> (Option<PathBuf>, CliOverrides) {
    let path_string = |p: PathBuf| p.to_string_lossy().into_owned();
    let config = shared.config;
    let overrides = CliOverrides {
        functional: shared.functional,
        bind: shared.bind,
        basis: shared.basis,
        basis_a: shared.basis_a,
        basis_b: shared.basis_b,
        nuisance_a: shared.nuisance_a,
        nuisance_b: shared.nuisance_b,
        data: shared.data.map(path_string),
        dgp: shared.dgp,
        dgp_param: shared.dgp_param,
        n: shared.n,
        reps,
        seed: shared.seed,
        estimator,
        out: shared.out.map(path_string),
    };
    (config, overrides)
}

fn execute(
    command: RunCommand,
    config_path: Option<&Path>,
    overrides: CliOverrides,
) -> Result<ExitCode, CliError> {
    let config = resolve(command, config_path, overrides)?;
    let report = run(&config)?;
    let json = to_json(&report);
    match &config.out {
        Some(path) => fs::write(path, &json).map_err(|e| CliError::Output {
            path: path.clone(),
            source: e,
        })?,
        None => io::stdout()
            .write_all(json.as_bytes())
            .map_err(|e| CliError::Output {
                path: "stdout".to_string(),
                source: e,
            })?,
    }
    let failed = report.identities.as_ref().is_some_and(|r| !r.pass);
    Ok(if failed {
        ExitCode::from(EXIT_IDENTITY_FAILURE)
    } else {
        ExitCode::SUCCESS
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, config_path, overrides) = match cli.command {
        Commands::Estimate(shared) => {
            let (path, o) = to_overrides(shared, None, None);
            (RunCommand::Estimate, path, o)
        }
        Commands::Verify(shared) => {
            let (path, o) = to_overrides(shared, None, None);
            (RunCommand::Verify, path, o)
        }
        Commands::Simulate(args) => {
            let (path, o) = to_overrides(args.shared, args.reps, args.estimator);
            (RunCommand::Simulate, path, o)
        }
    };
    match execute(command, config_path.as_deref(), overrides) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
