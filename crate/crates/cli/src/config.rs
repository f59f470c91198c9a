//! Run configuration.
//!
//! A run is described by an optional JSON config file plus command-line
//! overrides; flags win field by field. Validation is collecting: every
//! violation found is reported in one configuration error rather than one
//! per invocation.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use mixedbias::{BasisSpec, Dgp, EstimatorKind, FunctionalKind, NuisanceSpec};

use crate::error::CliError;

const ROLES: [&str; 3] = ["A", "L", "Y"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Estimate,
    Verify,
    Simulate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Estimate => "estimate",
            Command::Verify => "verify",
            Command::Simulate => "simulate",
        }
    }
}

/// A fully resolved, validated run. Serialized verbatim into the report as
/// the `config` echo; the shared `--basis` shorthand is resolved into the
/// two per-side descriptors before echoing.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub functional: Option<String>,
    pub bindings: BTreeMap<String, Vec<String>>,
    pub basis_a: Option<String>,
    pub basis_b: Option<String>,
    pub nuisance_a: String,
    pub nuisance_b: String,
    pub data: Option<String>,
    pub dgp: Option<String>,
    pub dgp_params: BTreeMap<String, f64>,
    pub n: Vec<u64>,
    pub reps: Option<u64>,
    pub seed: u64,
    pub estimator: Option<String>,
    pub out: Option<String>,
}

/// Raw command-line values. `None`/empty means "not given"; a given value
/// overrides the config file.
#[derive(Debug, Default, Clone)]
pub struct CliOverrides {
    pub functional: Option<String>,
    pub bind: Vec<String>,
    pub basis: Option<String>,
    pub basis_a: Option<String>,
    pub basis_b: Option<String>,
    pub nuisance_a: Option<String>,
    pub nuisance_b: Option<String>,
    pub data: Option<String>,
    pub dgp: Option<String>,
    pub dgp_param: Vec<String>,
    pub n: Option<String>,
    pub reps: Option<u64>,
    pub seed: Option<u64>,
    pub estimator: Option<String>,
    pub out: Option<String>,
}

/// A binding value in the config file: one column or a list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<String> {
        match self {
            OneOrMany::One(s) => vec![s],
            OneOrMany::Many(v) => v,
        }
    }
}

/// `n` in the config file: one sample size or a list.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum NList {
    One(u64),
    Many(Vec<u64>),
}

impl NList {
    fn into_vec(self) -> Vec<u64> {
        match self {
            NList::One(n) => vec![n],
            NList::Many(v) => v,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    functional: Option<String>,
    bind: BTreeMap<String, OneOrMany>,
    basis: Option<String>,
    basis_a: Option<String>,
    basis_b: Option<String>,
    nuisance_a: Option<String>,
    nuisance_b: Option<String>,
    data: Option<String>,
    dgp: Option<String>,
    dgp_params: BTreeMap<String, f64>,
    n: Option<NList>,
    reps: Option<u64>,
    seed: Option<u64>,
    estimator: Option<String>,
    out: Option<String>,
}

fn parse_role_binding(text: &str) -> Result<(String, Vec<String>), String> {
    let (role, columns) = text
        .split_once('=')
        .ok_or_else(|| format!("--bind {text:?}: expected role=column"))?;
    let role = role.trim().to_ascii_uppercase();
    let columns: Vec<String> = columns
        .split(',')
        .map(|c| c.trim().to_string())
        .filter(|c| !c.is_empty())
        .collect();
    if role.is_empty() || columns.is_empty() {
        return Err(format!("--bind {text:?}: empty role or column"));
    }
    Ok((role, columns))
}

fn parse_dgp_param(text: &str) -> Result<(String, f64), String> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| format!("--dgp-param {text:?}: expected key=value"))?;
    let parsed: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("--dgp-param {text:?}: {value:?} is not a number"))?;
    if !parsed.is_finite() {
        return Err(format!("--dgp-param {text:?}: value must be finite"));
    }
    Ok((key.trim().to_string(), parsed))
}

fn parse_n_list(text: &str) -> Result<Vec<u64>, String> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<u64>()
                .map_err(|_| format!("--n {text:?}: {:?} is not a positive integer", part.trim()))
        })
        .collect()
}

fn canonical_bindings() -> BTreeMap<String, Vec<String>> {
    ROLES
        .iter()
        .map(|role| (role.to_string(), vec![role.to_ascii_lowercase()]))
        .collect()
}

/// Merges the config file (if any) with command-line overrides and
/// validates the result for the given command. All violations are collected
/// before failing.
pub fn resolve(
    command: Command,
    config_path: Option<&Path>,
    cli: CliOverrides,
) -> Result<RunConfig, CliError> {
    let mut violations = Vec::new();

    let file = match config_path {
        None => FileConfig::default(),
        Some(path) => match fs::read_to_string(path) {
            Err(e) => {
                violations.push(format!("config file {}: cannot read: {e}", path.display()));
                FileConfig::default()
            }
            Ok(text) => match serde_json::from_str(&text) {
                Ok(parsed) => parsed,
                Err(e) => {
                    violations.push(format!("config file {}: {e}", path.display()));
                    FileConfig::default()
                }
            },
        },
    };

    let functional = cli.functional.or(file.functional);
    let basis = cli.basis.or(file.basis);
    let basis_a = cli.basis_a.or(file.basis_a).or_else(|| basis.clone());
    let basis_b = cli.basis_b.or(file.basis_b).or(basis);
    let nuisance_a = cli.nuisance_a.or(file.nuisance_a).unwrap_or_else(|| "ols".to_string());
    let nuisance_b = cli.nuisance_b.or(file.nuisance_b).unwrap_or_else(|| "ols".to_string());
    let data = cli.data.or(file.data);
    let dgp = cli.dgp.or(file.dgp);
    let reps = cli.reps.or(file.reps);
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let estimator = cli.estimator.or(file.estimator);
    let out = cli.out.or(file.out);

    let mut bindings: BTreeMap<String, Vec<String>> = file
        .bind
        .into_iter()
        .map(|(role, cols)| (role.to_ascii_uppercase(), cols.into_vec()))
        .collect();
    let mut overridden: Vec<String> = Vec::new();
    for entry in &cli.bind {
        match parse_role_binding(entry) {
            Err(v) => violations.push(v),
            Ok((role, columns)) => {
                if overridden.contains(&role) {
                    bindings.get_mut(&role).expect("role recorded").extend(columns);
                } else {
                    overridden.push(role.clone());
                    bindings.insert(role, columns);
                }
            }
        }
    }

    let mut dgp_params = file.dgp_params;
    for entry in &cli.dgp_param {
        match parse_dgp_param(entry) {
            Err(v) => violations.push(v),
            Ok((key, value)) => {
                dgp_params.insert(key, value);
            }
        }
    }

    let n: Vec<u64> = match (&cli.n, file.n) {
        (Some(text), _) => match parse_n_list(text) {
            Ok(values) => values,
            Err(v) => {
                violations.push(v);
                Vec::new()
            }
        },
        (None, Some(list)) => list.into_vec(),
        (None, None) => Vec::new(),
    };

    for (role, columns) in &bindings {
        if !ROLES.contains(&role.as_str()) {
            violations.push(format!(
                "unknown binding role {role:?} (known roles: A, L, Y)"
            ));
        }
        if columns.is_empty() {
            violations.push(format!("binding for role {role:?} names no columns"));
        }
    }

    if let Some(name) = &functional {
        if let Err(e) = FunctionalKind::parse(name) {
            violations.push(e.to_string());
        }
    }
    for (label, descriptor) in [("--basis-a", &basis_a), ("--basis-b", &basis_b)] {
        if let Some(text) = descriptor {
            if let Err(e) = BasisSpec::from_str(text) {
                violations.push(format!("{label} {text:?}: {e}"));
            }
        }
    }
    let spec_a = match NuisanceSpec::from_str(&nuisance_a) {
        Ok(spec) => Some(spec),
        Err(e) => {
            violations.push(format!("--nuisance-a: {e}"));
            None
        }
    };
    if let Err(e) = NuisanceSpec::from_str(&nuisance_b) {
        violations.push(format!("--nuisance-b: {e}"));
    }

    if basis_a.is_none() {
        violations.push("a-side basis required (--basis or --basis-a)".to_string());
    }
    if basis_b.is_none() {
        violations.push("b-side basis required (--basis or --basis-b)".to_string());
    }

    let uses_dgp = dgp.is_some();
    if let Some(kind) = &dgp {
        if let Err(e) = Dgp::from_params(kind, &dgp_params) {
            violations.push(e.to_string());
        }
    } else if !dgp_params.is_empty() {
        violations.push("--dgp-param requires --dgp".to_string());
    }

    if uses_dgp && !bindings.is_empty() && bindings != canonical_bindings() {
        violations.push(
            "bindings are fixed to A=a, L=l, Y=y when sampling from a DGP".to_string(),
        );
    }

    match command {
        Command::Estimate | Command::Verify => {
            match (&data, uses_dgp) {
                (None, false) => violations.push(format!(
                    "{} requires --data or --dgp",
                    command.name()
                )),
                (Some(_), true) => {
                    violations.push("provide either --data or --dgp, not both".to_string())
                }
                _ => {}
            }
            if functional.is_none() {
                violations.push("--functional is required".to_string());
            }
            if uses_dgp {
                if n.len() != 1 {
                    violations.push(format!(
                        "{} with --dgp needs exactly one --n value, got {}",
                        command.name(),
                        n.len()
                    ));
                } else if n[0] == 0 {
                    violations.push("--n must be at least 1".to_string());
                }
            } else {
                if !n.is_empty() {
                    violations
                        .push("--n applies to DGP sampling and simulate only".to_string());
                }
                if !bindings.is_empty() {
                    for role in ROLES {
                        if !bindings.contains_key(role) {
                            violations.push(format!("missing binding for role {role:?}"));
                        }
                    }
                } else {
                    violations.push(
                        "--bind is required with --data (roles A, L, Y)".to_string(),
                    );
                }
            }
            if reps.is_some() {
                violations.push("--reps applies to simulate only".to_string());
            }
            if estimator.is_some() {
                violations.push("--estimator applies to simulate only".to_string());
            }
            if command == Command::Verify {
                match &spec_a {
                    Some(NuisanceSpec::ExpitLinear(_)) => violations.push(
                        "verify requires a linear a-side nuisance (ols, ridge, lasso, or coeffs)"
                            .to_string(),
                    ),
                    Some(NuisanceSpec::Balanced) => violations
                        .push("balanced is a b-side device; it cannot fit the a-side".to_string()),
                    _ => {}
                }
            }
        }
        Command::Simulate => {
            if !uses_dgp {
                violations.push("simulate requires --dgp".to_string());
            }
            if data.is_some() {
                violations.push("simulate draws its own data; --data is not accepted".to_string());
            }
            if n.is_empty() {
                violations.push("simulate requires --n (a sample size or comma list)".to_string());
            } else if n.contains(&0) {
                violations.push("--n entries must be at least 1".to_string());
            }
            match reps {
                None => violations.push("simulate requires --reps".to_string()),
                Some(r) if r < 2 => violations.push("--reps must be at least 2".to_string()),
                _ => {}
            }
            if let Some(name) = &estimator {
                if let Err(e) = EstimatorKind::from_str(name) {
                    violations.push(e.to_string());
                }
            }
            if let (Some(name), Some(kind)) = (&functional, &dgp) {
                let declared = FunctionalKind::parse(name);
                let implied = Dgp::from_params(kind, &dgp_params).map(|d| d.functional_kind());
                if let (Ok(declared), Ok(implied)) = (declared, implied) {
                    if declared != implied {
                        violations.push(format!(
                            "--functional {name} does not match the {kind} process"
                        ));
                    }
                }
            }
        }
    }

    if !violations.is_empty() {
        return Err(CliError::config(violations));
    }

    let bindings = if uses_dgp || command == Command::Simulate {
        canonical_bindings()
    } else {
        bindings
    };
    let estimator = match command {
        Command::Simulate => Some(estimator.unwrap_or_else(|| "one-step".to_string())),
        _ => None,
    };

    Ok(RunConfig {
        command,
        functional,
        bindings,
        basis_a,
        basis_b,
        nuisance_a,
        nuisance_b,
        data,
        dgp,
        dgp_params,
        n,
        reps,
        seed,
        estimator,
        out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn violations_of(err: CliError) -> Vec<String> {
        match err {
            CliError::Config { violations } => violations,
            other => panic!("expected config error, got {other}"),
        }
    }

    #[test]
    fn empty_estimate_collects_all_missing_pieces() {
        let err = resolve(Command::Estimate, None, CliOverrides::default()).unwrap_err();
        let violations = violations_of(err);
        assert!(violations.iter().any(|v| v.contains("--data or --dgp")));
        assert!(violations.iter().any(|v| v.contains("--functional")));
        assert!(violations.iter().any(|v| v.contains("a-side basis")));
        assert!(violations.iter().any(|v| v.contains("b-side basis")));
    }

    #[test]
    fn data_and_dgp_together_are_rejected() {
        let cli = CliOverrides {
            functional: Some("cf-mean".to_string()),
            basis: Some("intercept".to_string()),
            data: Some("x.csv".to_string()),
            dgp: Some("cf-mean-dgp".to_string()),
            n: Some("10".to_string()),
            ..CliOverrides::default()
        };
        let violations = violations_of(resolve(Command::Estimate, None, cli).unwrap_err());
        assert!(violations.iter().any(|v| v.contains("not both")), "{violations:?}");
    }

    #[test]
    fn simulate_requires_dgp_n_and_reps() {
        let cli = CliOverrides {
            basis: Some("intercept,raw".to_string()),
            ..CliOverrides::default()
        };
        let violations = violations_of(resolve(Command::Simulate, None, cli).unwrap_err());
        assert!(violations.iter().any(|v| v.contains("requires --dgp")));
        assert!(violations.iter().any(|v| v.contains("requires --n")));
        assert!(violations.iter().any(|v| v.contains("requires --reps")));
    }

    #[test]
    fn simulate_resolves_defaults() {
        let cli = CliOverrides {
            dgp: Some("ecc-dgp".to_string()),
            basis: Some("intercept,raw".to_string()),
            n: Some("100,200".to_string()),
            reps: Some(5),
            ..CliOverrides::default()
        };
        let config = resolve(Command::Simulate, None, cli).unwrap();
        assert_eq!(config.estimator.as_deref(), Some("one-step"));
        assert_eq!(config.n, [100, 200]);
        assert_eq!(config.seed, 0);
        assert_eq!(config.nuisance_a, "ols");
        assert_eq!(config.bindings, canonical_bindings());
    }

    #[test]
    fn verify_rejects_opaque_a_side() {
        let cli = CliOverrides {
            functional: Some("cf-mean".to_string()),
            basis: Some("intercept".to_string()),
            data: Some("x.csv".to_string()),
            bind: vec!["a=a".into(), "l=l".into(), "y=y".into()],
            nuisance_a: Some("expit-linear:0.5".to_string()),
            ..CliOverrides::default()
        };
        let violations = violations_of(resolve(Command::Verify, None, cli).unwrap_err());
        assert!(violations.iter().any(|v| v.contains("linear a-side")), "{violations:?}");
    }

    #[test]
    fn cli_flags_override_file_values() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(
            file,
            r#"{{
                "functional": "cf-mean",
                "bind": {{"a": "a", "l": ["l"], "y": "y"}},
                "basis": "intercept",
                "data": "file.csv",
                "seed": 7
            }}"#
        )
        .unwrap();
        let cli = CliOverrides {
            seed: Some(99),
            bind: vec!["y=outcome".into()],
            ..CliOverrides::default()
        };
        let config = resolve(Command::Estimate, Some(file.path()), cli).unwrap();
        assert_eq!(config.seed, 99);
        assert_eq!(config.bindings["Y"], ["outcome"]);
        assert_eq!(config.bindings["A"], ["a"]);
        assert_eq!(config.basis_a.as_deref(), Some("intercept"));
        assert_eq!(config.data.as_deref(), Some("file.csv"));
    }

    #[test]
    fn repeated_cli_bind_appends_within_one_role() {
        let cli = CliOverrides {
            functional: Some("cf-mean".to_string()),
            basis: Some("intercept".to_string()),
            data: Some("x.csv".to_string()),
            bind: vec!["a=a".into(), "l=l1".into(), "l=l2".into(), "y=y".into()],
            ..CliOverrides::default()
        };
        let config = resolve(Command::Estimate, None, cli).unwrap();
        assert_eq!(config.bindings["L"], ["l1", "l2"]);
    }

    #[test]
    fn unknown_config_file_key_is_a_violation() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(file, r#"{{"functionnal": "cf-mean"}}"#).unwrap();
        let err = resolve(Command::Estimate, Some(file.path()), CliOverrides::default());
        let violations = violations_of(err.unwrap_err());
        assert!(violations.iter().any(|v| v.contains("functionnal")), "{violations:?}");
    }

    #[test]
    fn dgp_param_overrides_file_and_validates() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        write!(
            file,
            r#"{{"dgp": "ecc-dgp", "dgp_params": {{"theta": 1.0, "sigma2_u": 0.25}}}}"#
        )
        .unwrap();
        let cli = CliOverrides {
            basis: Some("intercept,raw".to_string()),
            n: Some("50".to_string()),
            reps: Some(3),
            dgp_param: vec!["theta=2.0".into()],
            ..CliOverrides::default()
        };
        let config = resolve(Command::Simulate, Some(file.path()), cli).unwrap();
        assert_eq!(config.dgp_params["theta"], 2.0);
        assert_eq!(config.dgp_params["sigma2_u"], 0.25);
    }

    #[test]
    fn bad_dgp_parameters_are_reported() {
        let cli = CliOverrides {
            dgp: Some("ecc-dgp".to_string()),
            dgp_param: vec!["sigma2_u=-1".into()],
            basis: Some("intercept,raw".to_string()),
            n: Some("50".to_string()),
            reps: Some(3),
            ..CliOverrides::default()
        };
        let violations = violations_of(resolve(Command::Simulate, None, cli).unwrap_err());
        assert!(!violations.is_empty());
    }

    #[test]
    fn functional_mismatching_the_dgp_is_reported() {
        let cli = CliOverrides {
            functional: Some("ecc".to_string()),
            dgp: Some("cf-mean-dgp".to_string()),
            basis: Some("intercept,raw".to_string()),
            n: Some("50".to_string()),
            reps: Some(3),
            ..CliOverrides::default()
        };
        let violations = violations_of(resolve(Command::Simulate, None, cli).unwrap_err());
        assert!(violations.iter().any(|v| v.contains("does not match")), "{violations:?}");
    }
}
