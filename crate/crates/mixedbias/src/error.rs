use thiserror::Error;

/// Errors produced by dataset construction, nuisance fitting and estimation.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dataset has no columns")]
    EmptyDataset,

    #[error("dataset column {column:?} has length {len}, expected {expected}")]
    ColumnLengthMismatch {
        column: String,
        len: usize,
        expected: usize,
    },

    #[error("dataset must have at least one row")]
    NoRows,

    #[error("duplicate column name {column:?}")]
    DuplicateColumn { column: String },

    #[error("non-finite value {value} in column {column:?} at row {row}")]
    NonFiniteValue {
        column: String,
        row: usize,
        value: f64,
    },

    #[error("unknown column {column:?}")]
    UnknownColumn { column: String },

    #[error("row index {row} out of range for dataset with {n} rows")]
    RowOutOfRange { row: usize, n: usize },

    #[error("unknown functional kind {kind:?}")]
    UnknownFunctional { kind: String },

    #[error("functional {kind:?} requires a binding for role {role:?}")]
    MissingBinding { kind: String, role: String },

    #[error("evaluation produced non-finite value {value} at row {row}")]
    NonFiniteEvaluation { row: usize, value: f64 },

    #[error("empty basis descriptor")]
    EmptyBasis,

    #[error("invalid basis descriptor: {reason}")]
    InvalidBasis { reason: String },

    #[error("duplicate feature {feature} in basis")]
    DuplicateFeature { feature: String },

    #[error("feature references Z coordinate {coord}, but Z has arity {z_arity}")]
    CoordOutOfRange { coord: usize, z_arity: usize },

    #[error("basis is built for Z arity {basis_arity} but functional has Z arity {z_arity}")]
    ArityMismatch { basis_arity: usize, z_arity: usize },

    #[error("dimension mismatch: {context} has length {got}, expected {expected}")]
    DimensionMismatch {
        context: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("singular system: pivot {pivot:.3e} at elimination step {index} is below threshold {threshold:.3e}")]
    SingularSystem {
        index: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("ill-conditioned system: backward error {residual:.3e} exceeds {tolerance:.3e} after refinement")]
    IllConditionedSystem { residual: f64, tolerance: f64 },

    #[error("lasso objective unsupported: Gram diagonal entry {index} is {value:.3e} (requires -s_ab >= 0 pointwise)")]
    UnsupportedLassoObjective { index: usize, value: f64 },

    #[error("equation has no solution: imbalance vector is zero but Pn{{m2(O,b)}} = {m2bar:.6e} is nonzero")]
    NoSolution { m2bar: f64 },

    #[error("cannot rescale nuisance: Pn{{s_ab a b0}} = {denominator:.3e} is degenerate")]
    CannotRescale { denominator: f64 },

    #[error("ill-posed gamma at feature {index}: Pn{{m1(O,phi_j)}} = {m1:.3e} is near zero while the imbalance {phi_hat:.3e} is not")]
    IllPosedGamma { index: usize, m1: f64, phi_hat: f64 },

    #[error("invalid nuisance descriptor {descriptor:?}: {reason}")]
    InvalidNuisanceSpec { descriptor: String, reason: String },

    #[error("invalid DGP parameter: {reason}")]
    InvalidDgpParam { reason: String },

    #[error("invalid simulation setting: {reason}")]
    InvalidSimulation { reason: String },

    #[error("positivity violation: propensity range [{lo:.4}, {hi:.4}] exits [0.01, 0.99] on L in [-1, 1]")]
    PositivityViolation { lo: f64, hi: f64 },

    #[error("monte carlo replication {replication} failed: {source}")]
    ReplicationFailed {
        replication: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
