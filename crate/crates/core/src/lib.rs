//! Occupation-time fluctuations of critical branching particle systems
//! driven by symmetric stable motion, and their stable and Gaussian limits.

pub mod density;
pub mod error;
pub mod limits;
pub mod particles;
pub mod quad;
pub mod regime;
pub mod rng;
pub mod special;
pub mod stable;
pub mod stats;

pub use error::{Error, Result};
