//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot parse type string {text:?}: {reason}")]
    TypeString { text: String, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("axis count {0} out of range (1..=32)")]
    BadDimension(usize),

    #[error("a chain graph needs at least one vertex")]
    EmptyGraph,

    #[error("duplicate vertex {0}")]
    DuplicateVertex(String),

    #[error("tensor shape mismatch: expected {expected:?}, got {got:?}")]
    Shape { expected: Vec<usize>, got: Vec<usize> },

    #[error("tensor not normalized: total {total} differs from 1 by more than {tol}")]
    NotNormalized { total: f64, tol: f64 },

    #[error("negative entry {value} at flat index {index}")]
    NegativeEntry { value: f64, index: usize },

    #[error("distributions {a} and {b} are incompatible: deviation {deviation} exceeds {tol}")]
    Incompatible {
        a: String,
        b: String,
        deviation: f64,
        tol: f64,
    },

    #[error("assignments {a} and {b} coincide; no axis set to integrate over")]
    IdenticalAssignments { a: String, b: String },

    #[error("graph is not proper (index {index} repeats)")]
    NonProper { index: usize },

    #[error("graph is not connected")]
    Disconnected,

    #[error("tree expected, found {links} links for {vertices} vertices")]
    NotATree { vertices: usize, links: usize },

    #[error("diagram is not simple: segment endpoint {0} is an inserted vertex")]
    SegmentOnInsertion(String),

    #[error("vertex set containment violated: {0} not contained in the supergraph")]
    Containment(String),

    #[error("vertex {vertex} has {legs} legs, expected a one-leg leaf")]
    NotALeaf { vertex: String, legs: usize },

    #[error("vertex {0} is not part of the tree")]
    UnknownVertex(String),

    #[error("exhaustive enumeration limited to {max} axes, got {n}")]
    EnumerationGuard { n: usize, max: usize },

    #[error("lambda {lambda} outside admissible range [{lo}, {hi}]")]
    LambdaOutOfRange { lambda: f64, lo: f64, hi: f64 },

    #[error("candidate density has mass {value} at flat index {index} outside the support of rho0")]
    SupportViolation { value: f64, index: usize },

    #[error("momentum axis {axis} has {q} position points but {p} momentum points; the unitary transform needs equal sizes")]
    UnequalGridSizes { axis: usize, q: usize, p: usize },

    #[error("ensemble weights sum to {total}, expected 1")]
    BadWeights { total: f64 },

    #[error("problem has {cells} phase-space cells, above the cap {cap}")]
    CellCap { cells: usize, cap: usize },

    #[error("value {value} is not an integer multiple of 1/{denominator} at the declared precision")]
    NonRational { value: f64, denominator: String },

    #[error("counterexample construction needs k >= 3, got {k}{hint}")]
    KTooSmall { k: usize, hint: String },

    #[error("passive factor scope mismatch: expected variables {expected:?}, got {got:?}")]
    PassiveScope {
        expected: Vec<String>,
        got: Vec<String>,
    },

    #[error("internal consistency failure: {0}")]
    InternalInconsistency(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
