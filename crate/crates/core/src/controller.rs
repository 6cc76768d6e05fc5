//! Model-free bang-ride controller.
//!
//! The controller never sees the plant state. Every step it turns the measured
//! outputs into weighted constraint errors, rides the constraint with the
//! smallest error, and nudges the two PI gains along the direction of the
//! one-step cost gradient. Because every output is increasing in the current,
//! that direction is known from data alone; only its (positive) magnitude is
//! unknown.
//!
//! The PI law only reads the history through two scalars, the previous active
//! error and the running sum of active errors, so that is all the state keeps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Output upper bounds and the positive weights applied to their errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSpec {
    bounds: Vec<f64>,
    weights: Vec<f64>,
}

impl ConstraintSpec {
    pub fn new(bounds: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::config("at least one constraint is required"));
        }
        if bounds.len() != weights.len() {
            return Err(Error::config(format!(
                "{} bounds but {} weights",
                bounds.len(),
                weights.len()
            )));
        }
        if let Some(i) = bounds.iter().position(|b| !b.is_finite()) {
            return Err(Error::config(format!("bound {} is not finite", i + 1)));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::config(format!(
                "weight {} must be strictly positive, got {}",
                i + 1,
                weights[i]
            )));
        }
        Ok(Self { bounds, weights })
    }

    /// Same bounds, every weight set to one.
    pub fn unweighted(bounds: Vec<f64>) -> Result<Self> {
        let weights = vec![1.0; bounds.len()];
        Self::new(bounds, weights)
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }

    /// A copy with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.bounds.clone(),
            self.weights.iter().map(|w| w * factor).collect(),
        )
    }

    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(self.bounds.clone(), weights)
    }
}

/// Weighted constraint errors at one step; `e_i >= 0` iff constraint `i` holds.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorVector(pub Vec<f64>);

impl ErrorVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn active(&self) -> usize {
        active_index(&self.0)
    }
}

/// `e_i = gamma_i * (ybar_i - y_i)`.
pub fn constraint_errors(spec: &ConstraintSpec, y: &[f64]) -> Result<ErrorVector> {
    let mut e = Vec::with_capacity(y.len());
    constraint_errors_into(spec, y, &mut e)?;
    Ok(ErrorVector(e))
}

pub(crate) fn constraint_errors_into(
    spec: &ConstraintSpec,
    y: &[f64],
    out: &mut Vec<f64>,
) -> Result<()> {
    if y.len() != spec.len() {
        return Err(Error::config(format!(
            "plant has {} outputs but {} constraints are configured",
            y.len(),
            spec.len()
        )));
    }
    out.clear();
    out.extend(
        spec.bounds
            .iter()
            .zip(&spec.weights)
            .zip(y)
            .map(|((b, w), y)| w * (b - y)),
    );
    Ok(())
}

/// Index of the smallest error. Ties go to the lowest index.
pub fn active_index(e: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in e.iter().enumerate().skip(1) {
        if *v < e[best] {
            best = i;
        }
    }
    best
}

/// Step-size schedule: one at the first step, then `t^(-mu1)`.
pub fn step_size(t: usize, mu1: f64) -> Result<f64> {
    check_mu1(mu1)?;
    Ok(if t == 0 { 1.0 } else { (t as f64).powf(-mu1) })
}

fn check_mu1(mu1: f64) -> Result<()> {
    if mu1 > 0.0 && mu1 < 1.0 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "step-size exponent must lie in (0, 1), got {mu1}"
        )))
    }
}

/// Axis-aligned admissible box for the gains `(K_p, K_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainBox {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl GainBox {
    pub fn new(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        for k in 0..2 {
            if !(lo[k].is_finite() && hi[k].is_finite()) || lo[k] > hi[k] {
                return Err(Error::config(format!(
                    "gain box component {} is [{}, {}]",
                    k + 1,
                    lo[k],
                    hi[k]
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, theta: [f64; 2]) -> bool {
        (0..2).all(|k| theta[k] >= self.lo[k] && theta[k] <= self.hi[k])
    }

    /// Euclidean projection, which for a box is a componentwise clamp.
    pub fn project(&self, theta: [f64; 2]) -> [f64; 2] {
        [
            theta[0].clamp(self.lo[0], self.hi[0]),
            theta[1].clamp(self.lo[1], self.hi[1]),
        ]
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        [
            [self.lo[0], self.lo[1]],
            [self.lo[0], self.hi[1]],
            [self.hi[0], self.lo[1]],
            [self.hi[0], self.hi[1]],
        ]
    }

    pub fn diameter(&self) -> f64 {
        let d0 = self.hi[0] - self.lo[0];
        let d1 = self.hi[1] - self.lo[1];
        (d0 * d0 + d1 * d1).sqrt()
    }
}

impl Default for GainBox {
    fn default() -> Self {
        Self {
            lo: [0.0, 0.0],
            hi: [10.0, 1.0],
        }
    }
}

/// Everything the PI law needs from the observed history.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HistoryStats {
    /// Active error of the previous step (zero before the first measurement).
    pub last_error: f64,
    /// Sum of all active errors observed so far.
    pub error_sum: f64,
}

impl HistoryStats {
    /// Gradient of the PI law with respect to the gains.
    pub fn law_gradient(&self) -> [f64; 2] {
        [self.last_error, self.error_sum]
    }

    pub fn current(&self, theta: [f64; 2]) -> f64 {
        theta[0] * self.last_error + theta[1] * self.error_sum
    }
}

/// Tunables of the controller, separated from its evolving state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub theta0: [f64; 2],
    pub gain_box: GainBox,
    pub mu1: f64,
    /// Rescale the gradient to this norm when it is larger.
    pub gradient_clip: Option<f64>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            theta0: [0.1, 0.1],
            gain_box: GainBox::default(),
            mu1: 0.5,
            gradient_clip: None,
        }
    }
}

/// Result of evaluating the control law at the current step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlAction {
    pub u: f64,
    /// `d u / d theta` at the current gains.
    pub law_gradient: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerState {
    theta: [f64; 2],
    gain_box: GainBox,
    mu1: f64,
    gradient_clip: Option<f64>,
    stats: HistoryStats,
    last_active: usize,
    t: usize,
}

impl ControllerState {
    pub fn new(config: &ControllerConfig) -> Result<Self> {
        check_mu1(config.mu1)?;
        if !config.gain_box.contains(config.theta0) {
            return Err(Error::config(format!(
                "initial gains {:?} lie outside the admissible box {:?}",
                config.theta0, config.gain_box
            )));
        }
        if let Some(g) = config.gradient_clip {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::config(format!(
                    "gradient clip must be positive, got {g}"
                )));
            }
        }
        Ok(Self {
            theta: config.theta0,
            gain_box: config.gain_box,
            mu1: config.mu1,
            gradient_clip: config.gradient_clip,
            stats: HistoryStats::default(),
            last_active: 0,
            t: 0,
        })
    }

    pub fn theta(&self) -> [f64; 2] {
        self.theta
    }

    pub fn gain_box(&self) -> &GainBox {
        &self.gain_box
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn stats(&self) -> HistoryStats {
        self.stats
    }

    /// Constraint ridden at the previous step; 0 before any measurement.
    pub fn last_active(&self) -> usize {
        self.last_active
    }

    pub fn step_count(&self) -> usize {
        self.t
    }

    /// PI law `u = K_p e_{t-1} + K_i sum_{k<t} e_k`.
    pub fn control(&self) -> Result<ControlAction> {
        let u = self.stats.current(self.theta);
        if !u.is_finite() {
            return Err(Error::Diverged {
                step: self.t,
                reason: format!(
                    "control law produced {u} from gains {:?} and history {:?}",
                    self.theta, self.stats
                ),
            });
        }
        Ok(ControlAction {
            u,
            law_gradient: self.stats.law_gradient(),
        })
    }

    /// `g = -e_active * dC/dtheta`, optionally rescaled to the clip norm.
    pub fn gradient(&self, e_active: f64, law_gradient: [f64; 2]) -> [f64; 2] {
        let mut g = [-e_active * law_gradient[0], -e_active * law_gradient[1]];
        if let Some(limit) = self.gradient_clip {
            let norm = (g[0] * g[0] + g[1] * g[1]).sqrt();
            if norm > limit {
                let s = limit / norm;
                g = [g[0] * s, g[1] * s];
            }
        }
        g
    }

    pub fn step_size(&self) -> f64 {
        // mu1 was validated at construction
        if self.t == 0 {
            1.0
        } else {
            (self.t as f64).powf(-self.mu1)
        }
    }

    /// Projected gradient step, then fold the new active error into the history.
    pub fn update(&mut self, g: [f64; 2], alpha: f64, active: usize, e_active: f64) {
        self.theta = self
            .gain_box
            .project([self.theta[0] - alpha * g[0], self.theta[1] - alpha * g[1]]);
        self.stats.last_error = e_active;
        self.stats.error_sum += e_active;
        self.last_active = active;
        self.t += 1;
    }
}
