//! Gaussian boson sampling with threshold detectors: exact simulation,
//! adversarial mockup samplers, statistical validation and classical cost
//! estimation.

pub mod error;
pub mod gaussian;
pub mod linalg;
pub mod threshold;

pub use error::{GbsError, Result};
pub use gaussian::{haar_random_unitary, CircuitSpec, GaussianState, SqueezerSpec};
pub use threshold::{ClickModel, ClickPattern, KernelConfig, VacuumSource};
pub mod codec;
pub mod samplers;
pub mod fock;
pub mod validation;
pub mod cost;
pub mod pipeline;
