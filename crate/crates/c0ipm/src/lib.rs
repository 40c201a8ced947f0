#![allow(clippy::needless_range_loop)]

//! C0 interior penalty finite elements for flexoelectricity and strain
//! gradient elasticity.
//!
//! Standard high-order C0 nodal elements are combined with interior-face
//! integrals that impose C1 continuity of the displacement in weak form,
//! which allows the fourth-order coupled electromechanical equations to be
//! discretized without Hermite elements or mixed unknowns. The crate covers
//! the whole pipeline: constitutive tensors, reference elements with second
//! derivatives and face flipping, structured and file-based meshes with the
//! face table, system assembly (volume, interior faces, weak second
//! Dirichlet, electrodes, periodicity), an eigenvalue-based estimate of the
//! stabilization parameter, a direct sparse solve, and postprocessing
//! (manufactured solutions, L2 errors, convergence rates, effective
//! piezoelectric constants).
//!
//! See the runnable examples (`cargo run --release --example ...`) for the
//! main capabilities, or the `c0ipm` binary for the command-line interface.

pub mod assembly;
pub mod config;
pub mod error;
pub mod material;
pub mod mesh;
pub mod penalty;
pub mod post;
pub mod presets;
pub mod refelem;
pub mod solve;

pub use error::{Error, Result};
