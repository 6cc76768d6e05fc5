//! Finite-difference checks on the online gradient.

use crate::controller::{ConstraintSpec, HistoryStats};
use crate::error::Result;
use crate::plant::PlantModel;

/// Default relative step for central differences.
pub const FD_STEP: f64 = 1e-6;

fn fd_step(scale: f64) -> f64 {
    FD_STEP * scale.abs().max(1.0)
}

/// `c_t = 2 gamma_i dh_i/du (x_t, u_t)` by central differences.
pub fn ct_diagnostic<M: PlantModel>(
    model: &M,
    x: &M::State,
    u: f64,
    i_star: usize,
    gamma: f64,
) -> Result<f64> {
    let d = fd_step(u);
    let hp = model.output(x, i_star, u + d)?;
    let hm = model.output(x, i_star, u - d)?;
    Ok(2.0 * gamma * (hp - hm) / (2.0 * d))
}

/// One-step cost `J(theta) = (gamma_i (ybar_i - h_i(x, C(H, theta))))^2`.
pub fn one_step_cost<M: PlantModel>(
    model: &M,
    x: &M::State,
    spec: &ConstraintSpec,
    stats: &HistoryStats,
    i_star: usize,
    theta: [f64; 2],
) -> Result<f64> {
    let u = stats.current(theta);
    let e = spec.weights()[i_star] * (spec.bounds()[i_star] - model.output(x, i_star, u)?);
    Ok(e * e)
}

/// Central-difference gradient of [`one_step_cost`] in the gains.
pub fn cost_gradient_fd<M: PlantModel>(
    model: &M,
    x: &M::State,
    spec: &ConstraintSpec,
    stats: &HistoryStats,
    i_star: usize,
    theta: [f64; 2],
) -> Result<[f64; 2]> {
    let mut out = [0.0; 2];
    for k in 0..2 {
        let d = fd_step(theta[k]);
        let mut tp = theta;
        let mut tm = theta;
        tp[k] += d;
        tm[k] -= d;
        let jp = one_step_cost(model, x, spec, stats, i_star, tp)?;
        let jm = one_step_cost(model, x, spec, stats, i_star, tm)?;
        out[k] = (jp - jm) / (2.0 * d);
    }
    Ok(out)
}

/// Result of comparing the online gradient with a finite-difference one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub g: [f64; 2],
    pub fd: [f64; 2],
    pub ct: f64,
    /// Components where `|fd| > threshold`.
    pub compared: usize,
    /// Compared components whose signs differ.
    pub disagreements: usize,
}

impl GradientCheck {
    pub fn agrees(&self) -> bool {
        self.disagreements == 0
    }
}

/// Checks `sign(g_k) == sign(dJ/dtheta_k)` wherever `|dJ/dtheta_k| > threshold`.
#[allow(clippy::too_many_arguments)]
pub fn check_gradient<M: PlantModel>(
    model: &M,
    x: &M::State,
    spec: &ConstraintSpec,
    stats: &HistoryStats,
    i_star: usize,
    theta: [f64; 2],
    g: [f64; 2],
    threshold: f64,
) -> Result<GradientCheck> {
    let fd = cost_gradient_fd(model, x, spec, stats, i_star, theta)?;
    let u = stats.current(theta);
    let ct = ct_diagnostic(model, x, u, i_star, spec.weights()[i_star])?;
    let mut compared = 0;
    let mut disagreements = 0;
    for k in 0..2 {
        if fd[k].abs() > threshold {
            compared += 1;
            if g[k].signum() != fd[k].signum() || g[k] == 0.0 {
                disagreements += 1;
            }
        }
    }
    Ok(GradientCheck {
        g,
        fd,
        ct,
        compared,
        disagreements,
    })
}
