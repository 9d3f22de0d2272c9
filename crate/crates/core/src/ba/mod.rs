//! Plane-regularized bundle adjustment.
//!
//! Reprojection factors are weighted by `(1 - u)` and robustified with a
//! Huber kernel on the weighted energy; virtual right-view factors enter
//! with weight `alpha`; map points near a fixed plane get a unary
//! point-to-plane factor scaled by `beta`. The solver is Levenberg-Marquardt
//! over left-multiplicative pose increments and additive point increments,
//! with the point blocks eliminated by Schur complement.

mod config;
mod cost;
mod graph;
mod jacobians;
mod pipeline;
mod solver;

pub use config::SolverConfig;
pub use cost::{cost_plane, cost_reprojection, evaluate_cost, total_cost, CostBreakdown};
pub use graph::{attach_plane_factors, AttachMode, FactorGraph, PlaneFactor, ReprojFactor, View};
pub use jacobians::{linearize_plane, linearize_reprojection, PlaneLinearization, ReprojLinearization};
pub use pipeline::{
    run_window_pipeline, FrameInput, PipelineConfig, PipelineOutput, RefreshLog, RefreshMode, SolveLog,
};
pub use solver::{
    assemble_normal_equations, optimize, optimize_subset, optimize_window, NormalEquations, OptimizeReport,
    SolveStatus,
};
