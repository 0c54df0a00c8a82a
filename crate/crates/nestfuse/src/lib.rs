//! Rank fusion for metasearch: combine the ranked output lists of several
//! retrieval systems into a single ranking, without training data.
//!
//! The crate implements two groups of methods:
//!
//! * Nonlinear fusion built from nested pairwise couplings. The couplings are
//!   either Clayton/Gumbel copulas or the relaxed power-function and
//!   exponential-logarithmic compositions, whose inner parameter is modulated
//!   per document by an unsupervised relevance estimate
//!   ([`kernel::estimate_relevance`]).
//! * Linear and rank-based baselines: CombMNZ, inverse square rank, the
//!   rank-biased centroid, and pairwise-average fusion
//!   (the [`baselines`] module).
//!
//! Dependence between two lists is measured per query with Kendall's tau over
//! a shared document universe ([`concordance`]) and converted to the coupling
//! parameter of the chosen kernel family. Ranks become scores in the open unit
//! interval through an empirical-CDF transform ([`marginals`]), oriented so
//! the top rank receives the highest score.
//!
//! The typical pipeline:
//!
//! ```
//! use nestfuse::kernel::FusionKernel;
//! use nestfuse::marginals;
//! use nestfuse::nested::nested_fuse;
//! use nestfuse::runs::{build_universe, RunList};
//! use nestfuse::Tunables;
//!
//! let a = RunList::parse_str("Q1 Q0 D1 1 9.0 sysA\nQ1 Q0 D2 2 7.0 sysA", "a.run")?;
//! let b = RunList::parse_str("Q1 Q0 D2 1 0.8 sysB\nQ1 Q0 D3 2 0.5 sysB", "b.run")?;
//!
//! let universe = build_universe(&[a, b], "Q1")?;
//! let tables = marginals::tables_for_universe(&universe)?;
//! let (fused, trace) = nested_fuse(
//!     &universe,
//!     &tables,
//!     FusionKernel::Gumbel,
//!     None,
//!     &Tunables::default(),
//! )?;
//! assert_eq!(fused.entries.len(), 3);
//! assert_eq!(trace.cycles.len(), 1);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```
//!
//! Evaluation against relevance judgments (MAP, MRR, P@n) and paired
//! significance testing live in [`eval`].

pub mod baselines;
pub mod concordance;
pub mod eval;
pub mod kernel;
pub mod marginals;
pub mod nested;
pub mod runs;

/// Numerical guards shared by the parameter-estimation and fusion stages.
///
/// Every field has a documented default; the CLI exposes each one as a flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tunables {
    /// Upper clamp on the coupling parameter for both families. Keeps
    /// `u^(-theta)` finite for scores down to `1/(m+1)` with universes up to
    /// about a million documents.
    pub theta_max: f64,
    /// Lower clamp on the Clayton-family parameter, whose domain is open at 0.
    pub epsilon_theta: f64,
    /// Floor on the per-document parameter `theta_p`. A zero `theta_p` would
    /// flatten the relaxed kernels to a constant and erase the ordering among
    /// the affected documents.
    pub epsilon_p: f64,
}

impl Default for Tunables {
    fn default() -> Self {
        Self {
            theta_max: 50.0,
            epsilon_theta: 1e-6,
            epsilon_p: 1e-3,
        }
    }
}

pub use concordance::{kendall_tau, tau_from_theta, theta_from_tau, KernelFamily, ThetaEstimate};
pub use kernel::{FusionKernel, KernelParams};
pub use nested::{nested_fuse, FusedList, FusionTrace, Relevance};
pub use runs::{build_universe, DocumentUniverse, Qrels, QuerySet, RunList, TermMatchTable};
