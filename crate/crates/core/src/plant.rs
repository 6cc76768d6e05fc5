//! Plant contract and the closed-loop simulation loop.
//!
//! A plant is a discrete-time system `x_{t+1} = f(x_t, u_t)` with `p` scalar
//! outputs `y_i = h_i(x_t, u_t)`, each strictly increasing in the current.
//! States are opaque here; only the models interpret them.

use crate::controller::{
    active_index, constraint_errors_into, ConstraintSpec, ControllerState, GainBox, HistoryStats,
};
use crate::error::{Error, Result};

pub trait PlantModel: Sync {
    type State: Clone + Send + Sync + std::fmt::Debug;

    fn name(&self) -> &str;

    fn state_dim(&self) -> usize;

    fn output_count(&self) -> usize;

    fn step(&self, x: &Self::State, u: f64) -> Result<Self::State>;

    /// Writes all `p` outputs for input `u` at state `x` into `out`.
    fn outputs_into(&self, x: &Self::State, u: f64, out: &mut Vec<f64>) -> Result<()>;

    fn outputs(&self, x: &Self::State, u: f64) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.output_count());
        self.outputs_into(x, u, &mut out)?;
        Ok(out)
    }

    /// A single output. Models with many outputs override this to avoid
    /// evaluating all of them.
    fn output(&self, x: &Self::State, i: usize, u: f64) -> Result<f64> {
        Ok(self.outputs(x, u)?[i])
    }

    fn output_label(&self, i: usize) -> String {
        format!("y_{}", i + 1)
    }

    /// Flattened numeric view of the state, used for finiteness checks and
    /// comparisons.
    fn state_vector(&self, x: &Self::State) -> Vec<f64>;

    /// Running reward `L(x, u)` of the charging problem (stored charge).
    fn reward(&self, x: &Self::State) -> f64;

    /// Named physical signals for logs and plots (voltage, temperature, ...).
    fn channel_names(&self) -> Vec<String> {
        Vec::new()
    }

    fn channels(&self, _x: &Self::State, _u: f64) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }

    /// True when the output vector is too wide to log and the channels
    /// should be written in its place.
    fn compact_log(&self) -> bool {
        false
    }
}

/// One step of a closed-loop (or oracle) run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub u: f64,
    pub y: Vec<f64>,
    pub e: Vec<f64>,
    /// Zero-based index of the constraint selected after observing `y`.
    pub i_star: usize,
    /// Gains at the start of the step; absent for oracle runs.
    pub theta: Option<[f64; 2]>,
    pub alpha: Option<f64>,
    /// Realized one-step cost `e[i_star]^2`.
    pub j: f64,
    /// Best one-step cost achievable with the same history, when computed.
    pub j_star: Option<f64>,
    pub channels: Vec<f64>,
}

impl StepRecord {
    pub fn e_active(&self) -> f64 {
        self.e[self.i_star]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryMeta {
    pub model: String,
    pub label: String,
    pub seed: u64,
    pub config_hash: String,
    pub output_labels: Vec<String>,
    pub channel_names: Vec<String>,
    pub compact: bool,
    pub current_clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    pub records: Vec<StepRecord>,
}

/// A maximal run of consecutive steps riding the same constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Phase {
    pub index: usize,
    pub start: usize,
    pub end: usize,
}

impl Phase {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn currents(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.u).collect()
    }

    pub fn output(&self, i: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.y[i]).collect()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.i_star).collect()
    }

    pub fn channel(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.meta.channel_names.iter().position(|n| n == name)?;
        Some(self.records.iter().map(|r| r.channels[k]).collect())
    }

    pub fn phases(&self) -> Vec<Phase> {
        phases_of(&self.active_indices())
    }
}

/// Groups an index sequence into maximal constant runs.
pub fn phases_of(indices: &[usize]) -> Vec<Phase> {
    let mut out: Vec<Phase> = Vec::new();
    for (t, &i) in indices.iter().enumerate() {
        match out.last_mut() {
            Some(p) if p.index == i => p.end = t,
            _ => out.push(Phase {
                index: i,
                start: t,
                end: t,
            }),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Abort when `|u|` or any `|y_i|` exceeds this magnitude.
    pub divergence_limit: f64,
    /// Optional hard clamp `[lo, hi]` on the applied current.
    pub current_clamp: Option<(f64, f64)>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            divergence_limit: 1e9,
            current_clamp: None,
        }
    }
}

/// What an observer sees at each step, before the controller update.
#[derive(Debug)]
pub struct StepContext<'a, S> {
    pub state: &'a S,
    pub stats: HistoryStats,
    pub gain_box: &'a GainBox,
    pub theta: [f64; 2],
}

pub(crate) fn base_meta<M: PlantModel>(model: &M, label: &str) -> TrajectoryMeta {
    TrajectoryMeta {
        model: model.name().to_string(),
        label: label.to_string(),
        output_labels: (0..model.output_count())
            .map(|i| model.output_label(i))
            .collect(),
        channel_names: model.channel_names(),
        compact: model.compact_log(),
        ..Default::default()
    }
}

pub(crate) fn check_finite_outputs(step: usize, u: f64, y: &[f64], limit: f64) -> Result<()> {
    if !u.is_finite() || u.abs() > limit {
        return Err(Error::Diverged {
            step,
            reason: format!("input current {u} exceeds the divergence limit {limit}"),
        });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite() || v.abs() > limit) {
        return Err(Error::Diverged {
            step,
            reason: format!("output {} is {}", i + 1, y[i]),
        });
    }
    Ok(())
}

pub(crate) fn check_finite_state<M: PlantModel>(model: &M, step: usize, x: &M::State) -> Result<()> {
    if model.state_vector(x).iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged {
            step,
            reason: "state became non-finite".into(),
        })
    }
}

/// Runs the data-driven bang-ride loop for `t_f + 1` steps.
pub fn run_closed_loop<M: PlantModel>(
    model: &M,
    controller: &mut ControllerState,
    spec: &ConstraintSpec,
    t_f: usize,
    x0: M::State,
    opts: &RunOptions,
) -> Result<Trajectory> {
    run_closed_loop_with(model, controller, spec, t_f, x0, opts, |_, _, _| Ok(()))
}

/// As [`run_closed_loop`], calling `observe` on every record before the
/// controller is updated (used to attach per-step analysis).
pub fn run_closed_loop_with<M, F>(
    model: &M,
    controller: &mut ControllerState,
    spec: &ConstraintSpec,
    t_f: usize,
    x0: M::State,
    opts: &RunOptions,
    mut observe: F,
) -> Result<Trajectory>
where
    M: PlantModel,
    F: FnMut(&M, &StepContext<'_, M::State>, &mut StepRecord) -> Result<()>,
{
    if model.output_count() != spec.len() {
        return Err(Error::config(format!(
            "model {} has {} outputs but {} constraints are configured",
            model.name(),
            model.output_count(),
            spec.len()
        )));
    }
    let mut meta = base_meta(model, "model-free");
    meta.current_clamped = opts.current_clamp.is_some();

    let mut records = Vec::with_capacity(t_f + 1);
    let mut x = x0;
    check_finite_state(model, 0, &x)?;
    let mut y = Vec::with_capacity(spec.len());
    for t in 0..=t_f {
        let theta = controller.theta();
        let stats = controller.stats();
        let action = controller.control()?;
        let u = match opts.current_clamp {
            Some((lo, hi)) => action.u.clamp(lo, hi),
            None => action.u,
        };
        model.outputs_into(&x, u, &mut y)?;
        check_finite_outputs(t, u, &y, opts.divergence_limit)?;
        let channels = model.channels(&x, u)?;
        let next = model.step(&x, u)?;
        check_finite_state(model, t + 1, &next)?;

        let mut e = Vec::with_capacity(y.len());
        constraint_errors_into(spec, &y, &mut e)?;
        let i_star = active_index(&e);
        let e_active = e[i_star];
        let g = controller.gradient(e_active, action.law_gradient);
        let alpha = controller.step_size();

        let mut record = StepRecord {
            t,
            u,
            y: y.clone(),
            e,
            i_star,
            theta: Some(theta),
            alpha: Some(alpha),
            j: e_active * e_active,
            j_star: None,
            channels,
        };
        let ctx = StepContext {
            state: &x,
            stats,
            gain_box: controller.gain_box(),
            theta,
        };
        observe(model, &ctx, &mut record)?;
        records.push(record);

        controller.update(g, alpha, i_star, e_active);
        x = next;
    }
    Ok(Trajectory { meta, records })
}

/// Outputs, channels and visited states from applying a fixed current sequence.
#[derive(Debug, Clone)]
pub struct Replay<S> {
    pub outputs: Vec<Vec<f64>>,
    pub channels: Vec<Vec<f64>>,
    /// `states[t]` is the state at which `currents[t]` was applied; one extra
    /// final state is appended.
    pub states: Vec<S>,
}

/// Applies `currents` open loop starting from `x0`.
pub fn replay_open_loop<M: PlantModel>(
    model: &M,
    x0: M::State,
    currents: &[f64],
    divergence_limit: f64,
) -> Result<Replay<M::State>> {
    let mut out = Replay {
        outputs: Vec::with_capacity(currents.len()),
        channels: Vec::with_capacity(currents.len()),
        states: Vec::with_capacity(currents.len() + 1),
    };
    let mut x = x0;
    for (t, &u) in currents.iter().enumerate() {
        let y = model.outputs(&x, u)?;
        check_finite_outputs(t, u, &y, divergence_limit)?;
        out.channels.push(model.channels(&x, u)?);
        out.outputs.push(y);
        let next = model.step(&x, u)?;
        check_finite_state(model, t + 1, &next)?;
        out.states.push(std::mem::replace(&mut x, next));
    }
    out.states.push(x);
    Ok(out)
}

/// Smallest forward-difference slope of each output in `u` over a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub min_slope: Vec<f64>,
    /// Outputs whose smallest slope is not strictly positive.
    pub flagged: Vec<usize>,
}

impl MonotonicityReport {
    pub fn is_clean(&self) -> bool {
        self.flagged.is_empty()
    }
}

pub fn validate_monotonicity<M: PlantModel>(
    model: &M,
    states: &[M::State],
    u_grid: &[f64],
    delta: f64,
) -> Result<MonotonicityReport> {
    if states.is_empty() || u_grid.is_empty() {
        return Err(Error::config("monotonicity check needs states and currents"));
    }
    if !(delta > 0.0) {
        return Err(Error::config("finite-difference step must be positive"));
    }
    let p = model.output_count();
    let mut min_slope = vec![f64::INFINITY; p];
    let mut lo = Vec::with_capacity(p);
    let mut hi = Vec::with_capacity(p);
    for x in states {
        for &u in u_grid {
            model.outputs_into(x, u, &mut lo)?;
            model.outputs_into(x, u + delta, &mut hi)?;
            for i in 0..p {
                let s = (hi[i] - lo[i]) / delta;
                if !s.is_finite() {
                    return Err(Error::Domain {
                        function: "output",
                        detail: format!("output {} is not finite at u = {u}", i + 1),
                    });
                }
                min_slope[i] = min_slope[i].min(s);
            }
        }
    }
    let flagged = (0..p).filter(|&i| !(min_slope[i] > 0.0)).collect();
    Ok(MonotonicityReport { min_slope, flagged })
}
