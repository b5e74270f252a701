//! Indoor pedestrian tracking from ranked Wi-Fi signal strengths fused with
//! step-and-heading dead reckoning in a particle filter.
//!
//! Signal strengths are compared by *order* rather than by value: a scan is
//! reduced to the sequence of access points sorted by RSS and matched
//! against the sequence each map cell would see if RSS fell off
//! monotonically with distance.

pub mod baseline;
pub mod error;
pub mod eval;
pub mod filter;
pub mod geometry;
pub mod motion;
pub mod numeric;
pub mod observation;
pub mod seqmap;
pub mod similarity;
pub mod simulator;

pub use error::{Error, Result};
pub use geometry::{Bounds, Point2D};
