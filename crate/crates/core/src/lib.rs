//! Plume-rise measurement from binary plume masks.
//!
//! A smokestack plume photographed by a single camera is reduced to a
//! centerline, a saturating curve is fitted to it, and the point where the
//! curve levels off is projected back to the ground using the wind direction.
//! Reference Briggs estimates, loss functions for training a stack-end aware
//! detector, segmentation scores and a synthetic mask generator sit alongside.

pub mod briggs;
pub mod geometry;
pub mod loss;
pub mod mask;
pub mod io;
pub mod metrics;
pub mod synth;
