//! Joint antenna activation and resource allocation for a wireless-powered
//! mobile-edge-computing system served by pinching antennas on a waveguide.
pub mod baselines;
pub mod cross_entropy;
pub mod error;
pub mod harness;
pub mod inner_solver;
pub mod model;
mod numeric;
pub mod oracle;
pub mod schemes;

pub use error::{Error, Result};
