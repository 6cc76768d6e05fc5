//! Monte-Carlo study of model-based protocols computed from wrong parameters.
//!
//! Each perturbed ECM gets its own oracle protocol, which is then applied
//! open loop to the true ECM. Violations are measured on the true outputs.

use rayon::prelude::*;

use crate::controller::ConstraintSpec;
use crate::error::{Error, Result};
use crate::models::ecm::{EcmModel, EcmParams, EcmState};
use crate::models::perturb::perturb_params_stream;
use crate::oracle::{oracle_trajectory_with, RootConfig};
use crate::plant::{replay_open_loop, PlantModel, RunOptions, Trajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessConfig {
    pub n_models: usize,
    pub fraction: f64,
    pub seed: u64,
    pub t_f: usize,
    pub root: RootConfig,
    /// Exceedances at or below this are not violations.
    pub tol_y: f64,
    pub divergence_limit: f64,
}

/// Violation depth and duration of one output sequence against its bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ViolationProfile {
    /// `max_t (y_i - ybar_i)^+` per constraint, in output units.
    pub depth: Vec<f64>,
    /// Steps with `y_i - ybar_i > tol_y`, per constraint.
    pub duration: Vec<usize>,
}

impl ViolationProfile {
    pub fn of(outputs: &[Vec<f64>], bounds: &[f64], tol_y: f64) -> Self {
        let mut depth = vec![0.0f64; bounds.len()];
        let mut duration = vec![0usize; bounds.len()];
        for y in outputs {
            for (i, (&yi, &b)) in y.iter().zip(bounds).enumerate() {
                let over = yi - b;
                depth[i] = depth[i].max(over);
                if over > tol_y {
                    duration[i] += 1;
                }
            }
        }
        Self { depth, duration }
    }

    pub fn violated(&self) -> bool {
        self.duration.iter().any(|&d| d > 0)
    }

    pub fn max_depth(&self) -> f64 {
        self.depth.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutcome {
    pub index: usize,
    pub params: EcmParams,
    /// Protocol computed on the perturbed model.
    pub currents: Vec<f64>,
    /// Channels of the true model under that protocol.
    pub channels: Vec<Vec<f64>>,
    pub profile: ViolationProfile,
    /// True-model oracle objective minus the objective of this protocol.
    pub suboptimality: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelResult {
    Completed(ModelOutcome),
    /// Oracle or replay failed; the message is kept for the summary.
    Failed { index: usize, reason: String },
}

impl ModelResult {
    pub fn index(&self) -> usize {
        match self {
            Self::Completed(o) => o.index,
            Self::Failed { index, .. } => *index,
        }
    }

    pub fn outcome(&self) -> Option<&ModelOutcome> {
        match self {
            Self::Completed(o) => Some(o),
            Self::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViolationStats {
    /// Largest depth per constraint over all completed runs.
    pub max_depth: Vec<f64>,
    /// Longest duration per constraint over all completed runs.
    pub max_duration: Vec<usize>,
    pub violating_runs: usize,
    pub failed_runs: usize,
    pub mean_suboptimality: f64,
    pub max_suboptimality: f64,
}

impl ViolationStats {
    pub fn collect(results: &[ModelResult], constraints: usize) -> Self {
        let mut s = Self {
            max_depth: vec![0.0; constraints],
            max_duration: vec![0; constraints],
            violating_runs: 0,
            failed_runs: 0,
            mean_suboptimality: 0.0,
            max_suboptimality: f64::NEG_INFINITY,
        };
        let mut completed = 0usize;
        for r in results {
            let Some(o) = r.outcome() else {
                s.failed_runs += 1;
                continue;
            };
            completed += 1;
            for i in 0..constraints {
                s.max_depth[i] = s.max_depth[i].max(o.profile.depth[i]);
                s.max_duration[i] = s.max_duration[i].max(o.profile.duration[i]);
            }
            if o.profile.violated() {
                s.violating_runs += 1;
            }
            s.mean_suboptimality += o.suboptimality;
            s.max_suboptimality = s.max_suboptimality.max(o.suboptimality);
        }
        if completed > 0 {
            s.mean_suboptimality /= completed as f64;
        } else {
            s.max_suboptimality = 0.0;
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct RobustnessStudy {
    /// Oracle of the true model, the reference objective.
    pub true_oracle: Trajectory,
    pub true_objective: f64,
    /// Ordered by model index.
    pub results: Vec<ModelResult>,
    pub stats: ViolationStats,
}

/// Sum of per-step rewards along a state sequence (final state excluded).
pub fn objective<M: PlantModel>(model: &M, states: &[M::State], steps: usize) -> f64 {
    states.iter().take(steps).map(|x| model.reward(x)).sum()
}

/// Runs the study. `spec_for` gives the constraint set in the output units
/// of a parameter set (the normalized voltage bound depends on `R0`).
pub fn robustness_study<F>(
    base: &EcmParams,
    spec_for: F,
    x0: EcmState,
    cfg: &RobustnessConfig,
) -> Result<RobustnessStudy>
where
    F: Fn(&EcmParams) -> Result<ConstraintSpec> + Sync,
{
    if cfg.n_models == 0 {
        return Err(Error::config("robustness study needs at least one model"));
    }
    let truth = EcmModel::new(base.clone())?;
    let true_spec = spec_for(base)?;
    let opts = RunOptions {
        divergence_limit: cfg.divergence_limit,
        current_clamp: None,
    };
    let true_oracle = oracle_trajectory_with(&truth, &true_spec, cfg.t_f, x0, &cfg.root, &opts)?;
    let true_replay = replay_open_loop(&truth, x0, &true_oracle.currents(), cfg.divergence_limit)?;
    let true_objective = objective(&truth, &true_replay.states, cfg.t_f + 1);

    let results: Vec<ModelResult> = (0..cfg.n_models)
        .into_par_iter()
        .map(|k| {
            run_one(k, base, &spec_for, &truth, &true_spec, x0, cfg, &opts, true_objective)
                .unwrap_or_else(|e| ModelResult::Failed {
                    index: k,
                    reason: e.to_string(),
                })
        })
        .collect();
    let stats = ViolationStats::collect(&results, true_spec.len());
    Ok(RobustnessStudy {
        true_oracle,
        true_objective,
        results,
        stats,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_one<F>(
    k: usize,
    base: &EcmParams,
    spec_for: &F,
    truth: &EcmModel,
    true_spec: &ConstraintSpec,
    x0: EcmState,
    cfg: &RobustnessConfig,
    opts: &RunOptions,
    true_objective: f64,
) -> Result<ModelResult>
where
    F: Fn(&EcmParams) -> Result<ConstraintSpec>,
{
    let params = perturb_params_stream(base, cfg.fraction, cfg.seed, k as u64)?;
    let model = EcmModel::new(params.clone())?;
    let spec = spec_for(&params)?;
    let protocol = oracle_trajectory_with(&model, &spec, cfg.t_f, x0, &cfg.root, opts)?;
    let currents = protocol.currents();
    let replay = replay_open_loop(truth, x0, &currents, cfg.divergence_limit)?;
    let profile = ViolationProfile::of(&replay.outputs, true_spec.bounds(), cfg.tol_y);
    let achieved = objective(truth, &replay.states, cfg.t_f + 1);
    Ok(ModelResult::Completed(ModelOutcome {
        index: k,
        params,
        currents,
        channels: replay.channels,
        profile,
        suboptimality: true_objective - achieved,
    }))
}
