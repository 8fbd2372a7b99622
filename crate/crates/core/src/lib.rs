//! Numerical laboratory for the one-dimensional Cucker-Smale model with the singular weight
//! `psi(r) = |r|^-beta`, `0 < beta < 1`.
//!
//! The second-order alignment system is integrated through its first-order reformulation in
//! terms of conserved natural velocities. The same reformulation drives a mass-level solver for
//! the kinetic pseudo-inverse equation, and the crate measures both with modulated `l_p` and
//! Wasserstein distances.

mod assignment;
pub mod error;
pub mod harness;
pub mod io;
pub mod kernel;
pub mod kinetic;
pub mod metrics;
pub mod model;
mod ode;
pub mod order;
pub mod sim;

pub use assignment::{bottleneck_assignment, min_sum_assignment, CostMatrix};
pub use error::{Error, Result};
pub use kernel::CommunicationKernel;
pub use model::{Ensemble, FirstOrderEnsemble, SecondOrderEnsemble};
pub use order::Order;
pub use sim::{IntegratorSpec, Scheme, Trajectory};
