//! Gravity-aware plane detection and plane-regularized, uncertainty-weighted
//! bundle adjustment for visual-inertial back-ends.
//!
//! The numeric kernels are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the precision used by the simulator and the CLI.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ba;
pub mod depth;
mod error;
pub mod experiment;
pub mod geometry;
pub mod plane;
pub mod sim;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Pose64 = geometry::Pose<f64>;
pub type Intrinsics64 = geometry::Intrinsics<f64>;
pub type Observation64 = geometry::Observation<f64>;
pub type DepthFrame64 = depth::DepthFrame<f64>;
pub type Pose32 = geometry::Pose<f32>;
pub type Intrinsics32 = geometry::Intrinsics<f32>;
