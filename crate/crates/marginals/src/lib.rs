//! Phase-space marginal problem on finite grids.
//!
//! Given a collection of joint probability distributions, each over a mixed
//! choice of position/momentum variables (one per axis), this crate decides
//! whether a common nonnegative density on the full 2N-dimensional phase
//! space reproduces all of them as marginals, and constructs the solutions
//! when it does.
//!
//! The pieces:
//!
//! - [`assignment`] / [`graph`]: variable-assignment types as vertices of the
//!   N-dimensional assignment hypercube, with contiguity links, properness,
//!   components, and critical-quartet detection.
//! - [`classify`]: the admissibility trichotomy (fully admissible, admissible
//!   only for quantum-generated data, non-admissible), via connectification
//!   of disconnected graphs and simplicity of the inserted vertices.
//! - [`grid`]: finite-grid probability tensors, marginalization,
//!   compatibility checks, and integrated link distributions.
//! - [`reconstruct`]: the particular solution built from vertex functions and
//!   link propagators, the peeling verification, and the projector-based
//!   general nonnegative solution family.
//! - [`quantum`]: chains generated from discrete wavefunctions via centered
//!   unitary transforms, mixtures, and extension onto connectified graphs.
//! - [`oracle`]: an independent exact-rational linear-feasibility oracle with
//!   Farkas certificates, plus the analytic counterexample family.
//! - [`io`]: JSON schemas for chains, tensors, wavefunctions, and results.

pub mod assignment;
pub mod classify;
pub mod error;
pub mod graph;
pub mod grid;
pub mod io;
pub mod oracle;
pub mod quantum;
pub mod reconstruct;
pub mod tensor;

pub use assignment::{AxisAssignment, CriticalQuartet, Var, VarKind};
pub use classify::{classify, Classification, ConnectifiedDiagram, Segment, Verdict};
pub use error::{Error, Result};
pub use graph::{contiguity_index, derive_links, ChainGraph, Link};
pub use grid::{Chain, GridSpec, MarginalTensor, PhaseTensor};
pub use reconstruct::{Reconstruction, SolutionFamily};

/// Default tolerance for normalization checks on ingested tensors.
pub const NORM_TOL: f64 = 1e-9;

/// Default tolerance for pairwise compatibility checks.
pub const COMPAT_TOL: f64 = 1e-9;

/// Worker-thread cap for the exhaustive searches, from `MF_THREADS`.
///
/// Results are deterministic for any value. Defaults to the available
/// parallelism, capped at 8.
pub fn max_threads() -> usize {
    use std::sync::OnceLock;
    static THREADS: OnceLock<usize> = OnceLock::new();
    *THREADS.get_or_init(|| {
        if let Ok(v) = std::env::var("MF_THREADS") {
            if let Ok(n) = v.trim().parse::<usize>() {
                return n.max(1);
            }
        }
        std::thread::available_parallelism()
            .map(|n| n.get().min(8))
            .unwrap_or(1)
    })
}
