//! Stable linear system identification from a single trajectory.
//!
//! The least-squares estimate of a system matrix is projected onto the set
//! of asymptotically stable matrices by minimizing the moderate-deviations
//! rate function of the estimator, computed through a discrete LQR solve.

pub mod densela;
pub mod error;

pub use densela::Matrix;
pub use error::{Error, Result};
pub mod lyapunov;
pub mod riccati;
pub mod stabproj;
pub mod sysid;
pub mod harness;
