//! Observer-based event-triggered control for linear time-invariant plants.
//!
//! - [`numerics`]: Riccati and Lyapunov solvers, spectra, SVD, DFT.
//! - [`model`]: state-space models and discretization.
//! - [`design`]: LQR and observer gains, and the trigger matrix built on them.
//! - [`sim`]: fixed-step closed-loop simulation with event-triggered transmission.
//! - [`sysid`]: identification of SISO models from chirp records with ERA.
//!
//! The guide in `book/` walks through the same pieces with runnable listings.

pub mod design;
pub mod model;
pub mod numerics;
pub mod sim;
pub mod sysid;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/design.md")]
    mod design {}
    #[doc = include_str!("../../../book/src/triggering.md")]
    mod triggering {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/identification.md")]
    mod identification {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
