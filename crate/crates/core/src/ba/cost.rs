use nalgebra::Vector3;

use crate::depth::clamp_uncertainty;
use crate::geometry::{huber_unchecked, Pose};
use crate::plane::Plane;
use crate::scalar::Real;

use super::config::SolverConfig;
use super::graph::{FactorGraph, ReprojFactor, View};

/// Costs of a graph state, split by term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown<T: Real> {
    /// Robust left-view reprojection cost.
    pub left: T,
    /// Robust right-view reprojection cost, before `alpha`.
    pub right: T,
    /// Robust plane cost, before `beta`.
    pub plane: T,
    /// `left + alpha right + beta plane`.
    pub total: T,
    /// Same weighting without the Huber kernel.
    pub chi2: T,
    /// Reprojection factors skipped because the point is behind the camera.
    pub excluded: usize,
    /// Factors whose uncertainty had to be clamped.
    pub clamped: usize,
}

/// Weighted squared reprojection energy `(1 - u) |e|^2` and the clamp flag,
/// or `None` when the point is not in front of the view.
#[inline]
pub(crate) fn reprojection_energy<T: Real>(
    graph: &FactorGraph<T>,
    pose: &Pose<T>,
    point: &Vector3<T>,
    factor: &ReprojFactor<T>,
) -> Option<(T, bool)> {
    let view = graph.view_pose(pose, factor.view);
    let pc = view.transform_point(point);
    if !(pc.z > T::zero()) {
        return None;
    }
    let k = &graph.intrinsics;
    let ex = factor.obs.pixel.x - (k.fx * pc.x / pc.z + k.cx);
    let ey = factor.obs.pixel.y - (k.fy * pc.y / pc.z + k.cy);
    let (u, clamped) = clamp_uncertainty(factor.obs.uncertainty_u);
    let w = T::one() - u;
    Some((w * (ex * ex + ey * ey), clamped))
}

/// Normalized squared plane energy `(r / sigma)^2`.
#[inline]
pub(crate) fn plane_energy<T: Real>(plane: &Plane<T>, point: &Vector3<T>, sigma: T) -> T {
    let r = plane.signed_distance(point) / sigma;
    r * r
}

/// Sums the robust reprojection cost per view, in factor order.
/// Returns `(left, right, chi2_left, chi2_right, excluded, clamped)`.
fn reprojection_sums<T: Real>(
    graph: &FactorGraph<T>,
    cfg: &SolverConfig<T>,
) -> (T, T, T, T, usize, usize) {
    let (mut left, mut right) = (T::zero(), T::zero());
    let (mut chi_l, mut chi_r) = (T::zero(), T::zero());
    let (mut excluded, mut clamped) = (0, 0);
    for f in &graph.reproj_factors {
        let (Some(pose), Some(x)) = (graph.poses.get(&f.obs.frame_id), graph.points.get(&f.obs.point_id))
        else {
            continue;
        };
        match reprojection_energy(graph, pose, x, f) {
            None => excluded += 1,
            Some((s, c)) => {
                clamped += c as usize;
                let rho = huber_unchecked(s, cfg.huber_delta);
                match f.view {
                    View::Left => {
                        left += rho;
                        chi_l += s;
                    }
                    View::Right => {
                        right += rho;
                        chi_r += s;
                    }
                }
            }
        }
    }
    (left, right, chi_l, chi_r, excluded, clamped)
}

/// `sum rho(e^T (1 - u) e)` over left factors plus `alpha` times the same sum
/// over right factors.
pub fn cost_reprojection<T: Real>(graph: &FactorGraph<T>, cfg: &SolverConfig<T>) -> T {
    let (l, r, ..) = reprojection_sums(graph, cfg);
    l + cfg.alpha * r
}

fn plane_sums<T: Real>(graph: &FactorGraph<T>, cfg: &SolverConfig<T>) -> (T, T) {
    let (mut robust, mut chi) = (T::zero(), T::zero());
    for f in &graph.plane_factors {
        let (Some(x), Some(plane)) = (graph.points.get(&f.point_id), graph.planes.get(f.plane_index))
        else {
            continue;
        };
        let s = plane_energy(plane, x, cfg.plane_sigma);
        robust += huber_unchecked(s, cfg.plane_huber_delta);
        chi += s;
    }
    (robust, chi)
}

/// Robust plane cost, before the `beta` weight.
pub fn cost_plane<T: Real>(graph: &FactorGraph<T>, cfg: &SolverConfig<T>) -> T {
    plane_sums(graph, cfg).0
}

pub fn evaluate_cost<T: Real>(graph: &FactorGraph<T>, cfg: &SolverConfig<T>) -> CostBreakdown<T> {
    let (left, right, chi_l, chi_r, excluded, clamped) = reprojection_sums(graph, cfg);
    let (plane, chi_p) = plane_sums(graph, cfg);
    CostBreakdown {
        left,
        right,
        plane,
        total: left + cfg.alpha * right + cfg.beta * plane,
        chi2: chi_l + cfg.alpha * chi_r + cfg.beta * chi_p,
        excluded,
        clamped,
    }
}

/// `C_reproj + beta C_plane`.
pub fn total_cost<T: Real>(graph: &FactorGraph<T>, cfg: &SolverConfig<T>) -> T {
    evaluate_cost(graph, cfg).total
}

#[cfg(test)]
mod tests {
    use nalgebra::Vector2;

    use super::*;
    use crate::ba::attach_plane_factors;
    use crate::ba::AttachMode;
    use crate::geometry::{Intrinsics, Observation};
    use crate::plane::OrientationClass;

    fn setup(u: f64) -> (FactorGraph<f64>, SolverConfig<f64>) {
        let k = Intrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap();
        let mut g = FactorGraph::new(k, 0.1);
        g.add_pose(0, Pose::identity(), true);
        g.add_point(0, Vector3::new(0.0, 0.0, 2.0));
        let obs = Observation {
            frame_id: 0,
            point_id: 0,
            pixel: Vector2::new(50.0 + 0.6, 50.0 - 0.8),
            uncertainty_u: u,
        };
        g.add_observation(obs, View::Left).unwrap();
        (g, SolverConfig::default())
    }

    #[test]
    fn one_pixel_error_costs_one() {
        let (g, cfg) = setup(0.0);
        let c = evaluate_cost(&g, &cfg);
        assert!((c.left - 1.0).abs() < 1e-12);
        assert_eq!(c.right, 0.0);
    }

    #[test]
    fn uncertainty_scales_energy() {
        let (g, cfg) = setup(0.75);
        assert!((cost_reprojection(&g, &cfg) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn clamped_uncertainty_is_counted() {
        let (g, cfg) = setup(1.5);
        let c = evaluate_cost(&g, &cfg);
        assert_eq!(c.clamped, 1);
        assert!((c.left - 0.01).abs() < 1e-12);
    }

    #[test]
    fn point_behind_camera_is_excluded() {
        let (mut g, cfg) = setup(0.0);
        g.points.insert(0, Vector3::new(0.0, 0.0, -2.0));
        let c = evaluate_cost(&g, &cfg);
        assert_eq!(c.excluded, 1);
        assert_eq!(c.total, 0.0);
    }

    #[test]
    fn plane_cost_regimes() {
        let k = Intrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap();
        let mut g = FactorGraph::new(k, 0.1);
        let floor = Plane::new(Vector3::z(), 0.0, OrientationClass::Horizontal).unwrap();
        let cfg = SolverConfig {
            plane_sigma: 1.0,
            plane_huber_delta: 0.1,
            ..SolverConfig::default()
        };
        g.add_point(0, Vector3::new(1.0, 1.0, 0.03));
        attach_plane_factors(&mut g, vec![floor.clone()], 0.05, AttachMode::All);
        assert!((cost_plane(&g, &cfg) - 0.0009_f64).abs() < 1e-15);

        // A far point in the linear regime: 2 delta |r| - delta^2.
        g.points.insert(0, Vector3::new(1.0, 1.0, 1.0));
        g.plane_factors = vec![super::super::PlaneFactor { point_id: 0, plane_index: 0 }];
        assert!((cost_plane(&g, &cfg) - (2.0_f64 * 0.1 * 1.0 - 0.01)).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_disable_terms() {
        let (mut g, mut cfg) = setup(0.0);
        g.add_observation(g.reproj_factors[0].obs, View::Right).unwrap();
        cfg.alpha = 0.0;
        let c = evaluate_cost(&g, &cfg);
        assert!(c.right > 0.0);
        assert_eq!(c.total, c.left);
    }
}
