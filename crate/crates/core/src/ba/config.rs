use crate::error::{Error, Result};
use crate::geometry::HUBER_DELTA;
use crate::scalar::Real;

use super::graph::AttachMode;

/// Weights, thresholds and stopping rules for the bundle adjustment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T: Real> {
    /// Weight of the virtual right-view reprojection cost.
    pub alpha: T,
    /// Weight of the plane cost.
    pub beta: T,
    /// Point-to-plane distance for attaching plane factors, meters.
    pub theta: T,
    /// Plane refresh period in frames.
    pub refresh_period: usize,
    /// Huber threshold on reprojection energies (pixels).
    pub huber_delta: T,
    /// Huber threshold on normalized plane energies.
    pub plane_huber_delta: T,
    /// Normalizer of the point-to-plane residual, meters. With 1.0 the plane
    /// energy is the squared distance in meters.
    pub plane_sigma: T,
    pub attach_mode: AttachMode,
    pub max_iterations: usize,
    /// Relative cost decrease below which the solve is converged.
    pub epsilon: T,
    /// Absolute cost below which the solve is converged.
    pub cost_floor: T,
    pub initial_lambda: T,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            alpha: T::one(),
            beta: T::lit(0.1),
            theta: T::lit(0.05),
            refresh_period: 30,
            huber_delta: T::lit(HUBER_DELTA),
            plane_huber_delta: T::lit(HUBER_DELTA),
            plane_sigma: T::lit(0.03),
            attach_mode: AttachMode::All,
            max_iterations: 30,
            epsilon: T::lit(1e-10),
            cost_floor: T::lit(1e-20),
            initial_lambda: T::lit(1e-4),
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let z = T::zero();
        let o = T::one();
        if !(self.alpha >= z && self.alpha <= o) {
            return Err(Error::InvalidInput(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha.as_f64()
            )));
        }
        if !(self.beta >= z && self.beta <= o) {
            return Err(Error::InvalidInput(format!(
                "beta must lie in [0, 1], got {}",
                self.beta.as_f64()
            )));
        }
        if self.refresh_period == 0 {
            return Err(Error::InvalidInput("refresh period must be at least 1".into()));
        }
        if !(self.theta > z && self.huber_delta > z && self.plane_huber_delta > z && self.plane_sigma > z)
        {
            return Err(Error::InvalidInput(
                "theta, Huber thresholds and plane sigma must be positive".into(),
            ));
        }
        Ok(())
    }
}
