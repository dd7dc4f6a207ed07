//! Variance-based entanglement criteria for bipartite quantum systems.
//!
//! The crate evaluates uncertainty-relation separability bounds for
//! finite-dimensional density matrices ([`criteria`]) and for two-mode
//! Gaussian states described by covariance matrices ([`gaussian`]). Any
//! violated bound certifies entanglement. Exact deciders in [`oracles`]
//! (partial transpose for qudits, the symplectic test for Gaussians) are used
//! to audit the criteria, and [`search`] scans criterion coefficients for the
//! strongest violation a state admits.
//!
//! Batch workloads (audits, searches) run on rayon when the `parallel`
//! feature is enabled and fall back to sequential iteration otherwise; output
//! is identical either way.

// `!(x <= tol)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod criteria;
pub mod error;
pub mod gaussian;
pub mod io;
pub mod operators;
pub mod oracles;
pub mod par;
pub mod rng;
pub mod search;
pub mod states;

pub use criteria::{CriterionId, CriterionVerdict, OtildeBound, OtildeSource};
pub use error::{Error, Result};
pub use gaussian::{CvConfig, GaussianState};
pub use operators::{CollectiveObservables, HermitianOperator, ObservablePair};
pub use oracles::{OracleVerdict, PptVerdict};
pub use par::Execution;
pub use search::{SearchConfig, SearchResult};
pub use states::{CriterionConfig, DensityMatrix, SeparableEnsemble};

/// Dense complex matrix used for every operator and state.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;

/// Slack applied to every verdict: a bound counts as violated only when
/// `lhs < bound - DEFAULT_SLACK`.
pub const DEFAULT_SLACK: f64 = 1e-9;
