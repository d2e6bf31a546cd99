//! Structured-noise filtering by oblique projection.
//!
//! A signal `f = f1 + f2` with `f1` in a signal subspace `V` and `f2` in a
//! noise subspace `W⊥` is split by the oblique projector onto `V` along `W⊥`.
//! When `V` and `W⊥` are theoretically disjoint but nearly overlapping the
//! full projector is ill-posed; [`pursuit`] then searches for the sparse
//! sub-subspace of `V` on which the projection is both stable and exact.
//!
//! Modules:
//! - [`hilbert`]: sampled inner-product spaces, Gram matrices, orthonormalization.
//! - [`oblique`]: the oblique projector in singular-system form, truncation, diagnostics.
//! - [`pursuit`]: forward/backward selection with swap refinement and restarts.
//! - [`dictionaries`]: B-spline, power-law, cosine and Gaussian families, random test signals.

pub mod dictionaries;
mod error;
pub mod hilbert;
pub mod oblique;
pub mod pursuit;

pub use error::{Error, Result};
pub use hilbert::{AtomFamily, GramMatrix, SpaceKind, SpaceSpec};
pub use oblique::{ObliqueProjector, SplittingProblem, TruncatedProjector};
pub use pursuit::{oblique_pursuit, PursuitConfig, PursuitResult, PursuitState};
