//! Simulation-to-real tactile image translation and shear-aware servo
//! control, end to end on the CPU.
//!
//! The pipeline: render contact depth images from signed distance fields,
//! synthesize marker-based "real" sensor images from them, train a
//! shear-conditioned image translator plus a Gaussian-density estimator on
//! top, and close the loop with tactile tracking and co-lifting tasks.

pub mod contact;
pub mod dataset;
pub mod error;
pub mod estimate;
pub mod image_types;
pub mod losses;
pub mod markers;
pub mod metrics;
pub mod nn;
pub mod pose;
pub mod sensor;
pub mod servo;
pub mod shape;
pub mod translate;

pub use error::{Error, Result};
pub use pose::{compute_shear_pose, Pose4, ShearVector};
