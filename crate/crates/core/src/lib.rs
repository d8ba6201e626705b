//! # sdpi
//!
//! Strong data processing inequalities for finite channels, numerically.
//!
//! A discrete memoryless channel `W` (a column-stochastic |Y|×|X| matrix)
//! together with an input pmf `P_X` contracts every f-divergence:
//!
//! ```text
//! D_f(W R || W P)  <=  eta_f(P, W) * D_f(R || P)
//! ```
//!
//! and the tightest such factor `eta_f` is the *contraction coefficient*.
//! For chi-squared divergence the coefficient has a closed linear-algebraic
//! form: it is the squared second-largest singular value of the divergence
//! transition matrix (DTM)
//!
//! ```text
//! B = diag(sqrt(P_Y))^+ . W . diag(sqrt(P_X))
//! ```
//!
//! which is also the squared maximal correlation of the joint distribution.
//! Coefficients for other f-divergences have no such form, but they are
//! sandwiched by linear bounds of the shape
//!
//! ```text
//! eta_chi2  <=  eta_f  <=  C(P_X, f) * eta_chi2
//! ```
//!
//! and they collapse onto `eta_chi2` when the input divergence is driven
//! to zero. This crate computes all of the above:
//!
//! - [`divergence`]: f-divergence evaluation on finite pmfs with exact
//!   boundary conventions, built-in generators (KL, chi-squared, total
//!   variation, Tsallis) plus user-defined ones, and grid checks of the
//!   analytic side conditions the bound constants require.
//! - [`channel`]: pmfs, channels, joint specs, perturbation vectors,
//!   canonical examples (BSC / BEC / DSBS), tensor products, the DTM.
//! - [`spectral`]: dense SVD (one-sided Jacobi), maximal correlation,
//!   `eta_chi2`, and the principal perturbation direction.
//! - [`contraction`]: multistart estimation of `eta_f` over the simplex,
//!   the input-divergence-capped supremum `tau(delta)`, and the
//!   vanishing-divergence convergence probe.
//! - [`bounds`]: the linear upper bounds, the `phi` / balance-coefficient
//!   refinement, tensorized variants, and the divergence-inequality suite.
//! - [`verify`]: batch verification suites behind `sdpi verify`.
//! - [`cli`]: the `sdpi` command-line front end (`compute`, `sweep`,
//!   `verify`, `fdiv`).
//!
//! All logarithms are natural; divergences are reported in nats. Infinite
//! divergences are first-class values, not errors.
//!
//! Everything here is deterministic: random sampling is driven by seeded
//! counter-mode streams, so identical seeds reproduce identical output
//! bytes.

use thiserror::Error;

pub mod bounds;
pub mod channel;
pub mod cli;
pub mod contraction;
pub mod divergence;
pub mod sampling;
pub mod spectral;
pub mod verify;

pub use bounds::{certify, inequality_suite, tensorized_certify, BoundReport, SuiteReport};
pub use channel::{make_bec, make_bsc, make_dsbs, push_forward, Channel, JointSpec, Pmf};
pub use contraction::{
    estimate_eta_f, estimate_tau, local_limit_probe, EtaEstimate, OptimizerConfig,
};
pub use divergence::{f_divergence, kl_divergence, total_variation, DivergenceValue, FGenerator};
pub use spectral::{analyze, SpectralResult};

/// Errors for channel construction, divergence evaluation, and bound
/// certification.
#[derive(Debug, Error)]
pub enum Error {
    #[error("alphabet is empty")]
    EmptyAlphabet,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid mass at index {index}: {value}")]
    InvalidMass { index: usize, value: f64 },

    #[error("masses sum to {sum}, expected 1 within 1e-8")]
    NotNormalized { sum: f64 },

    #[error("invalid channel entry at row {row}, column {col}: {value}")]
    InvalidChannelEntry { row: usize, col: usize, value: f64 },

    #[error("channel column {col} sums to {sum}, expected 1 within 1e-8")]
    ColumnNotStochastic { col: usize, sum: f64 },

    #[error("channel row {row} has length {got}, expected {expected}")]
    RaggedRow {
        row: usize,
        got: usize,
        expected: usize,
    },

    #[error("parameter {name} out of range: {value}")]
    ParameterOutOfRange { name: &'static str, value: f64 },

    #[error("unknown generator '{0}' (expected kl, chi2, tv, or tsallis:<alpha>)")]
    UnknownGenerator(String),

    #[error("generator lacks required data: {0}")]
    MissingData(&'static str),

    #[error("declared {name} = {declared} disagrees with finite differences ({measured})")]
    DerivativeMismatch {
        name: &'static str,
        declared: f64,
        measured: f64,
    },

    #[error("input pmf must be interior (strictly positive masses)")]
    NonInteriorInput,

    #[error("spherical perturbation not orthogonal to sqrt(P): dot = {dot}")]
    OrthogonalityViolated { dot: f64 },

    #[error("perturbation leaves the simplex at index {index}: mass {mass}")]
    PerturbationTooLarge { index: usize, mass: f64 },

    #[error("tensor product dimension {dim} exceeds cap {cap}")]
    DimensionCapExceeded { dim: usize, cap: usize },

    #[error("alphabet size {size} exceeds exact enumeration cap {cap}; use the DP fallback")]
    AlphabetTooLarge { size: usize, cap: usize },

    #[error("matrix has a non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("malformed sequence: {0}")]
    MalformedSequence(&'static str),

    #[error("grid spec invalid: {0}")]
    InvalidGrid(&'static str),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
