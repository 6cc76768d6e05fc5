//! Regret, per-step optimal cost, gradient diagnostics and robustness.

pub mod diagnostics;
pub mod optimal;
pub mod regret;
pub mod robustness;

pub use diagnostics::{check_gradient, ct_diagnostic, one_step_cost, GradientCheck};
pub use optimal::{current_interval, min_norm_gains, per_step_optimal_cost, OptimalStep};
pub use regret::{mu_star, ratio_sign_changes, regret, regret_from_gaps, tail_log_slope, RegretReport};
pub use robustness::{
    robustness_study, ModelOutcome, ModelResult, RobustnessConfig, RobustnessStudy,
    ViolationProfile, ViolationStats,
};

use crate::controller::{ConstraintSpec, ControllerState};
use crate::error::Result;
use crate::plant::{run_closed_loop_with, PlantModel, RunOptions, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub optimal_cost: bool,
    pub ct: bool,
    pub gradient_check: bool,
    pub tol_u: f64,
    /// Finite-difference derivatives smaller than this are not compared.
    pub fd_threshold: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            optimal_cost: true,
            ct: true,
            gradient_check: false,
            tol_u: 1e-12,
            fd_threshold: 1e-8,
        }
    }
}

/// Per-step analysis collected alongside a closed-loop run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepAnalysis {
    pub theta_star: Vec<[f64; 2]>,
    pub u_star: Vec<f64>,
    pub unreachable: Vec<bool>,
    pub ct: Vec<f64>,
    pub gradient: Vec<GradientCheck>,
}

/// Closed-loop run with the requested per-step analysis attached.
///
/// `J*` is written into each record; the rest is returned separately.
pub fn analyze_closed_loop<M: PlantModel>(
    model: &M,
    controller: &mut ControllerState,
    spec: &ConstraintSpec,
    t_f: usize,
    x0: M::State,
    run: &RunOptions,
    opts: &AnalysisOptions,
) -> Result<(Trajectory, StepAnalysis)> {
    let mut out = StepAnalysis::default();
    let g_clip = controller.clone();
    let traj = run_closed_loop_with(model, controller, spec, t_f, x0, run, |m, ctx, rec| {
        if opts.optimal_cost {
            let opt = per_step_optimal_cost(
                m,
                ctx.state,
                spec,
                &ctx.stats,
                ctx.gain_box,
                rec.i_star,
                opts.tol_u,
            )?;
            rec.j_star = Some(opt.j_star);
            out.theta_star.push(opt.theta_star);
            out.u_star.push(opt.u_star);
            out.unreachable.push(opt.unreachable);
        }
        if opts.ct {
            out.ct.push(ct_diagnostic(
                m,
                ctx.state,
                rec.u,
                rec.i_star,
                spec.weights()[rec.i_star],
            )?);
        }
        if opts.gradient_check {
            let g = g_clip.gradient(rec.e_active(), ctx.stats.law_gradient());
            out.gradient.push(check_gradient(
                m,
                ctx.state,
                spec,
                &ctx.stats,
                rec.i_star,
                ctx.theta,
                g,
                opts.fd_threshold,
            )?);
        }
        Ok(())
    })?;
    Ok((traj, out))
}
