//! Singular ODEs of the form dU/dt = F(U)/ζ(U).
//!
//! Trajectories are integrated in the desingularized time τ with
//! dt/dτ = ζ, which turns the system into the regular field dU/dτ = F(U).
//! On top of that the crate builds local center and uniformly stable
//! manifolds, audits the structural hypotheses near a distinguished point,
//! and reduces block-structured viscous profile problems (including steady
//! compressible Navier–Stokes) to systems of this kind.

pub mod block;
pub mod builtins;
pub mod error;
pub mod hypotheses;
pub mod inline;
pub mod integrate;
pub mod jet;
pub mod linalg;
pub mod manifolds;
pub mod navier_stokes;
pub mod singular;
pub mod system;

pub use error::{Error, Result};
pub use hypotheses::{audit, Check, EquilibriumManifold, HypothesisOptions, HypothesisReport, Verdict};
pub use singular::{integrate_desingularized, integrate_singular, Output, SingularOptions, Termination, Trajectory};
pub use system::{SingularField, SystemSpec};
pub use block::{reduce, BlockSystem, ProfileODE};
pub use manifolds::{center_manifold, decompose_orbit, uniformly_stable_manifold, TaylorManifold};
