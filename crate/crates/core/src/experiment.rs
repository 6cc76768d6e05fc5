//! Experiment drivers behind the command-line subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::analysis::{
    analyze_closed_loop, regret, robustness_study, AnalysisOptions, ModelResult, RegretReport,
    RobustnessConfig, RobustnessStudy, StepAnalysis, ViolationProfile,
};
use crate::controller::{constraint_errors, ConstraintSpec, ControllerState};
use crate::error::{Error, Result};
use crate::io::{self, fmt_num, Quantity, Series, SeriesStyle};
use crate::oracle::oracle_trajectory_with;
use crate::plant::{replay_open_loop, validate_monotonicity, PlantModel, Trajectory};
use crate::scenario::{BuiltModel, ModelKind, ModelVisitor, ScenarioConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub steps: Option<usize>,
    pub mu1: Option<f64>,
    pub gamma: Option<Vec<f64>>,
    pub models: Option<usize>,
    pub fraction: Option<f64>,
    pub full_outputs: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) -> Result<()> {
        if let Some(s) = self.seed {
            cfg.scenario.seed = s;
        }
        if let Some(n) = self.steps {
            cfg.scenario.steps = n;
        }
        if let Some(m) = self.mu1 {
            cfg.controller.mu1 = m;
            cfg.regret.mu1 = vec![m];
        }
        if let Some(g) = &self.gamma {
            cfg.constraints.gamma = Some(g.clone());
        }
        if let Some(n) = self.models {
            cfg.montecarlo.models = n;
        }
        if let Some(f) = self.fraction {
            cfg.montecarlo.fraction = f;
        }
        cfg.scenario.full_outputs |= self.full_outputs;
        cfg.validate()
    }
}

fn stamp(traj: &mut Trajectory, cfg: &ScenarioConfig) -> Result<()> {
    traj.meta.seed = cfg.scenario.seed;
    traj.meta.config_hash = cfg.hash()?;
    if !cfg.scenario.label.is_empty() {
        traj.meta.label = format!("{} {}", cfg.scenario.label, traj.meta.label);
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub trajectory: Trajectory,
    pub analysis: StepAnalysis,
}

struct SimulateVisitor<'a> {
    cfg: &'a ScenarioConfig,
    analysis: AnalysisOptions,
}

impl ModelVisitor for SimulateVisitor<'_> {
    type Output = Result<SimulateOutput>;

    fn visit<M: PlantModel>(self, model: &M, x0: M::State, spec: &ConstraintSpec) -> Self::Output {
        let mut controller = ControllerState::new(&self.cfg.controller_config()?)?;
        let (trajectory, analysis) = analyze_closed_loop(
            model,
            &mut controller,
            spec,
            self.cfg.scenario.steps,
            x0,
            &self.cfg.run_options(),
            &self.analysis,
        )?;
        Ok(SimulateOutput {
            trajectory,
            analysis,
        })
    }
}

/// Model-free closed-loop run with the configured analysis attached.
pub fn simulate(cfg: &ScenarioConfig) -> Result<SimulateOutput> {
    simulate_with(cfg, cfg.analysis_options())
}

pub fn simulate_with(cfg: &ScenarioConfig, analysis: AnalysisOptions) -> Result<SimulateOutput> {
    let mut out = cfg.build()?.accept(SimulateVisitor { cfg, analysis })?;
    stamp(&mut out.trajectory, cfg)?;
    Ok(out)
}

struct OracleVisitor<'a> {
    cfg: &'a ScenarioConfig,
}

impl ModelVisitor for OracleVisitor<'_> {
    type Output = Result<Trajectory>;

    fn visit<M: PlantModel>(self, model: &M, x0: M::State, spec: &ConstraintSpec) -> Self::Output {
        let root = self.cfg.root_config(self.cfg.current_limit()?)?;
        oracle_trajectory_with(
            model,
            spec,
            self.cfg.scenario.steps,
            x0,
            &root,
            &self.cfg.run_options(),
        )
    }
}

/// Ideal bang-ride protocol computed with full model access.
pub fn oracle(cfg: &ScenarioConfig) -> Result<Trajectory> {
    let mut t = cfg.build()?.accept(OracleVisitor { cfg })?;
    stamp(&mut t, cfg)?;
    Ok(t)
}

/// `||u_free - u_oracle|| / ||u_oracle||` over steps `from..`.
pub fn relative_l2(free: &Trajectory, oracle: &Trajectory, from: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in free.records.iter().zip(&oracle.records).skip(from) {
        num += (a.u - b.u).powi(2);
        den += b.u * b.u;
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct CompareOutput {
    pub free: SimulateOutput,
    pub oracle: Trajectory,
    /// Relative L2 current gap from `analysis.compare_from` on.
    pub relative_l2: f64,
}

pub fn compare(cfg: &ScenarioConfig) -> Result<CompareOutput> {
    let (free, oracle) = rayon::join(|| simulate(cfg), || oracle(cfg));
    let (free, oracle) = (free?, oracle?);
    let relative_l2 = relative_l2(&free.trajectory, &oracle, cfg.analysis.compare_from);
    Ok(CompareOutput {
        free,
        oracle,
        relative_l2,
    })
}

#[derive(Debug, Clone)]
pub struct MonteCarloOutput {
    pub study: RobustnessStudy,
    /// Model-free run on the true model.
    pub free: Trajectory,
    pub free_profile: ViolationProfile,
    pub free_suboptimality: f64,
    pub channel_names: Vec<String>,
}

/// Robustness study on the ECM scenario.
pub fn montecarlo(cfg: &ScenarioConfig) -> Result<MonteCarloOutput> {
    if cfg.scenario.model != ModelKind::Ecm {
        return Err(Error::config(format!(
            "montecarlo needs an ecm scenario, got {}",
            cfg.scenario.model.as_str()
        )));
    }
    let scenario = cfg.build()?;
    let BuiltModel::Ecm(truth, x0, _) = &scenario.model else {
        unreachable!("model kind checked above")
    };
    let base = truth.params().clone();
    let spec_for = |p: &crate::models::ecm::EcmParams| -> Result<ConstraintSpec> {
        let mut c = cfg.clone();
        c.params.ecm = Some(p.clone());
        c.scenario.dt = None;
        Ok(c.build()?.spec().clone())
    };
    let u_max = cfg.current_limit()?;
    let rc = RobustnessConfig {
        n_models: cfg.montecarlo.models,
        fraction: cfg.montecarlo.fraction,
        seed: cfg.scenario.seed,
        t_f: cfg.scenario.steps,
        root: cfg.root_config(u_max)?,
        tol_y: cfg.oracle.tol_y,
        divergence_limit: cfg.controller.divergence_limit,
    };
    let (study, free) = rayon::join(
        || robustness_study(&base, spec_for, *x0, &rc),
        || simulate_with(cfg, AnalysisOptions { optimal_cost: false, ct: false, ..Default::default() }),
    );
    let (study, free) = (study?, free?.trajectory);
    let outputs: Vec<Vec<f64>> = free.records.iter().map(|r| r.y.clone()).collect();
    let free_profile = ViolationProfile::of(&outputs, scenario.spec().bounds(), rc.tol_y);
    let replay = replay_open_loop(truth, *x0, &free.currents(), rc.divergence_limit)?;
    let achieved = crate::analysis::robustness::objective(truth, &replay.states, rc.t_f + 1);
    Ok(MonteCarloOutput {
        free_suboptimality: study.true_objective - achieved,
        study,
        free,
        free_profile,
        channel_names: truth.channel_names(),
    })
}

#[derive(Debug, Clone)]
pub struct RegretRun {
    pub mu1: f64,
    pub report: RegretReport,
    /// Sign changes of the `c_t / alpha_t` increments, logged only.
    pub ratio_sign_changes: usize,
}

/// Regret of the model-free run for each configured step-size exponent.
pub fn regret_sweep(cfg: &ScenarioConfig) -> Result<Vec<RegretRun>> {
    let analysis = AnalysisOptions {
        optimal_cost: true,
        ct: true,
        ..cfg.analysis_options()
    };
    cfg.regret
        .mu1
        .par_iter()
        .map(|&mu1| {
            let mut c = cfg.clone();
            c.controller.mu1 = mu1;
            c.controller_config()?;
            let out = simulate_with(&c, analysis)?;
            let report = regret(
                &out.trajectory,
                mu1,
                Some(&out.analysis.theta_star),
                cfg.analysis.tail_fraction,
            )?;
            let alpha: Vec<f64> = out.trajectory.records.iter().filter_map(|r| r.alpha).collect();
            Ok(RegretRun {
                mu1,
                ratio_sign_changes: crate::analysis::ratio_sign_changes(&out.analysis.ct, &alpha),
                report,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail,
        });
    }
}

struct MonotonicityVisitor<'a> {
    oracle: &'a Trajectory,
    u_max: f64,
}

impl ModelVisitor for MonotonicityVisitor<'_> {
    type Output = Result<crate::plant::MonotonicityReport>;

    fn visit<M: PlantModel>(self, model: &M, x0: M::State, _spec: &ConstraintSpec) -> Self::Output {
        let replay = replay_open_loop(model, x0, &self.oracle.currents(), f64::INFINITY)?;
        let stride = (replay.states.len() / 50).max(1);
        let states: Vec<M::State> = replay.states.iter().step_by(stride).cloned().collect();
        let grid: Vec<f64> = (0..=20).map(|k| self.u_max * k as f64 / 20.0).collect();
        validate_monotonicity(model, &states, &grid, 1e-4 * self.u_max.max(1.0))
    }
}

/// Model checks and run invariants; `dir` receives the trajectory file
/// whose schema is checked.
pub fn validate(cfg: &ScenarioConfig, dir: &Path) -> Result<ValidationReport> {
    let mut rep = ValidationReport::default();
    let scenario = cfg.build()?;
    let spec = scenario.spec().clone();
    let u_max = cfg.current_limit()?;
    let oracle_traj = oracle(cfg)?;

    let mono = scenario.accept(MonotonicityVisitor {
        oracle: &oracle_traj,
        u_max,
    })?;
    rep.push(
        "output monotonicity",
        mono.is_clean(),
        format!("smallest slopes {:?}", mono.min_slope.iter().map(|v| fmt_num(*v)).collect::<Vec<_>>()),
    );

    let tol_y = cfg.oracle.tol_y;
    let gmax = spec.max_weight();
    let mut worst_ride = 0.0f64;
    let mut worst_slack = 0.0f64;
    for r in &oracle_traj.records {
        let bound = spec.bounds()[r.i_star];
        if r.u > 0.0 {
            worst_ride = worst_ride.max((r.y[r.i_star] - bound).abs());
        }
        for &e in &r.e {
            worst_slack = worst_slack.min(e);
        }
    }
    rep.push(
        "oracle rides its constraint",
        worst_ride <= tol_y,
        format!("max |h - ybar| = {}", fmt_num(worst_ride)),
    );
    rep.push(
        "oracle feasibility",
        worst_slack >= -tol_y * gmax,
        format!("min e = {}", fmt_num(worst_slack)),
    );

    let free = simulate(cfg)?;
    let gain_box = cfg.controller_config()?.gain_box;
    let outside = free
        .trajectory
        .records
        .iter()
        .filter(|r| !r.theta.is_some_and(|t| gain_box.contains(t)))
        .count();
    rep.push("gains stay in the box", outside == 0, format!("{outside} steps outside"));

    let mut err_mismatch = 0usize;
    for r in &free.trajectory.records {
        if constraint_errors(&spec, &r.y)?.0 != r.e {
            err_mismatch += 1;
        }
    }
    rep.push(
        "constraint errors match their definition",
        err_mismatch == 0,
        format!("{err_mismatch} mismatching steps"),
    );

    let above = free
        .trajectory
        .records
        .iter()
        .filter(|r| r.j_star.is_some_and(|js| js > r.j + 1e-9 * r.j.max(1.0)))
        .count();
    rep.push("optimal cost bounds realized cost", above == 0, format!("{above} steps with J* > J"));

    let min_ct = free.analysis.ct.iter().copied().fold(f64::INFINITY, f64::min);
    rep.push(
        "c_t is positive",
        free.analysis.ct.is_empty() || min_ct > 0.0,
        format!("min c_t = {}", fmt_num(min_ct)),
    );

    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("trajectory.csv");
    io::write_trajectory_csv(&free.trajectory, &path)?;
    let table = io::read_csv(&path)?;
    let missing = table.missing_columns(&io::REQUIRED_COLUMNS);
    let widths_ok = table.rows.iter().all(|r| r.len() == table.header.len());
    let rows_ok = table.rows.len() == free.trajectory.len();
    rep.push(
        "trajectory schema",
        missing.is_empty() && widths_ok && rows_ok,
        if missing.is_empty() {
            format!("{} columns, {} rows", table.header.len(), table.rows.len())
        } else {
            format!("missing columns: {}", missing.join(", "))
        },
    );
    Ok(rep)
}

/// Writes the scenario snapshot and manifest of a run directory.
pub fn write_run_metadata(
    dir: &Path,
    cfg: &ScenarioConfig,
    command: &str,
    files: &[String],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let snapshot = cfg.snapshot();
    io::write_text(&dir.join("scenario.toml"), &snapshot.to_toml()?)?;
    let mut all = vec!["scenario.toml".to_string()];
    all.extend(files.iter().cloned());
    io::write_manifest(
        &dir.join("manifest.txt"),
        &[
            ("software", format!("bangride {VERSION}")),
            ("command", command.to_string()),
            ("model", cfg.scenario.model.as_str().to_string()),
            ("label", cfg.scenario.label.clone()),
            ("seed", cfg.scenario.seed.to_string()),
            ("steps", cfg.scenario.steps.to_string()),
            ("config_hash", cfg.hash()?),
            ("files", all.join(" ")),
        ],
    )
}

/// Output directory: the flag, else the scenario's, else `runs/<model>`.
pub fn output_dir(cfg: &ScenarioConfig, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| cfg.scenario.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(cfg.scenario.model.as_str()))
}

fn write_plot(dir: &Path, name: &str, title: &str, q: Quantity, series: &[Series]) -> Result<String> {
    let file = format!("{name}.svg");
    io::write_text(&dir.join(&file), &io::render_svg(title, q, series)?)?;
    Ok(file)
}

fn available_quantities(traj: &Trajectory) -> Vec<Quantity> {
    Quantity::ALL
        .into_iter()
        .filter(|q| io::trajectory_series(traj, *q, "", SeriesStyle::ModelFree).is_ok())
        .collect()
}

fn write_diagnostics(dir: &Path, traj: &Trajectory, an: &StepAnalysis) -> Result<Option<String>> {
    if an.ct.is_empty() && an.theta_star.is_empty() {
        return Ok(None);
    }
    let header = ["t", "c_t", "u_star", "theta_star_1", "theta_star_2", "unreachable"]
        .map(String::from)
        .to_vec();
    let rows = traj
        .records
        .iter()
        .enumerate()
        .map(|(k, r)| {
            vec![
                r.t.to_string(),
                an.ct.get(k).map(|v| fmt_num(*v)).unwrap_or_default(),
                an.u_star.get(k).map(|v| fmt_num(*v)).unwrap_or_default(),
                an.theta_star.get(k).map(|v| fmt_num(v[0])).unwrap_or_default(),
                an.theta_star.get(k).map(|v| fmt_num(v[1])).unwrap_or_default(),
                an.unreachable.get(k).map(|&b| u8::from(b).to_string()).unwrap_or_default(),
            ]
        })
        .collect::<Vec<_>>();
    io::write_table(&dir.join("diagnostics.csv"), &header, &rows)?;
    Ok(Some("diagnostics.csv".into()))
}

fn write_trajectory_files(dir: &Path, cfg: &ScenarioConfig, stem: &str, traj: &Trajectory) -> Result<Vec<String>> {
    let mut files = vec![format!("{stem}.csv")];
    io::write_trajectory_csv(traj, &dir.join(&files[0]))?;
    if !traj.meta.compact {
        let f = format!("{stem}_channels.csv");
        io::write_channels_csv(traj, &dir.join(&f))?;
        files.push(f);
    } else if cfg.scenario.full_outputs {
        let f = format!("{stem}_outputs.csv");
        io::write_outputs_csv(traj, &dir.join(&f))?;
        files.push(f);
    }
    Ok(files)
}

pub fn write_simulate(dir: &Path, cfg: &ScenarioConfig, out: &SimulateOutput, svg: bool) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = write_trajectory_files(dir, cfg, "trajectory", &out.trajectory)?;
    files.extend(write_diagnostics(dir, &out.trajectory, &out.analysis)?);
    if svg {
        for q in available_quantities(&out.trajectory) {
            let s = io::trajectory_series(&out.trajectory, q, "model-free", SeriesStyle::ModelFree)?;
            files.push(write_plot(dir, q.name(), cfg.scenario.model.as_str(), q, &s)?);
        }
    }
    write_run_metadata(dir, cfg, "simulate", &files)?;
    Ok(files)
}

pub fn write_oracle(dir: &Path, cfg: &ScenarioConfig, traj: &Trajectory, svg: bool) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = write_trajectory_files(dir, cfg, "oracle", traj)?;
    if svg {
        for q in available_quantities(traj) {
            let s = io::trajectory_series(traj, q, "oracle", SeriesStyle::Oracle)?;
            files.push(write_plot(dir, q.name(), cfg.scenario.model.as_str(), q, &s)?);
        }
    }
    write_run_metadata(dir, cfg, "oracle", &files)?;
    Ok(files)
}

pub fn write_compare(dir: &Path, cfg: &ScenarioConfig, out: &CompareOutput, svg: bool) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = write_trajectory_files(dir, cfg, "trajectory", &out.free.trajectory)?;
    files.extend(write_trajectory_files(dir, cfg, "oracle", &out.oracle)?);
    files.extend(write_diagnostics(dir, &out.free.trajectory, &out.free.analysis)?);
    io::write_gap_csv(&out.free.trajectory, &out.oracle, &dir.join("gap.csv"))?;
    files.push("gap.csv".into());
    if svg {
        for q in available_quantities(&out.oracle) {
            let mut s = io::trajectory_series(&out.free.trajectory, q, "model-free", SeriesStyle::ModelFree)?;
            s.extend(io::trajectory_series(&out.oracle, q, "oracle", SeriesStyle::Oracle)?);
            files.push(write_plot(dir, q.name(), cfg.scenario.model.as_str(), q, &s)?);
        }
    }
    write_run_metadata(dir, cfg, "compare", &files)?;
    Ok(files)
}

/// Per-model rows of the Monte-Carlo summary.
pub fn montecarlo_summary(out: &MonteCarloOutput) -> (Vec<String>, Vec<Vec<String>>) {
    let p = out.study.stats.max_depth.len();
    let mut header: Vec<String> = ["model", "status", "r0", "r1", "r2", "c1", "c2", "capacity", "a", "b"]
        .map(String::from)
        .to_vec();
    header.extend((1..=p).map(|i| format!("depth_{i}")));
    header.extend((1..=p).map(|i| format!("duration_{i}")));
    header.extend(["violated", "suboptimality"].map(String::from));
    let rows = out
        .study
        .results
        .iter()
        .map(|r| match r {
            ModelResult::Completed(o) => {
                let q = &o.params;
                let mut row = vec![(o.index + 1).to_string(), "ok".into()];
                row.extend([q.r0, q.r1, q.r2, q.c1, q.c2, q.capacity, q.a, q.b].map(fmt_num));
                row.extend(o.profile.depth.iter().map(|v| fmt_num(*v)));
                row.extend(o.profile.duration.iter().map(|v| v.to_string()));
                row.push(u8::from(o.profile.violated()).to_string());
                row.push(fmt_num(o.suboptimality));
                row
            }
            ModelResult::Failed { index, reason } => {
                let mut row = vec![(index + 1).to_string(), format!("failed: {reason}")];
                row.resize(header.len(), String::new());
                row
            }
        })
        .collect();
    (header, rows)
}

pub fn write_montecarlo(dir: &Path, cfg: &ScenarioConfig, out: &MonteCarloOutput, svg: bool) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (header, rows) = montecarlo_summary(out);
    io::write_table(&dir.join("summary.csv"), &header, &rows)?;
    let mut files = vec!["summary.csv".to_string()];

    let s = &out.study.stats;
    let mut stats: Vec<(String, String)> = [
        ("models", cfg.montecarlo.models.to_string()),
        ("fraction", fmt_num(cfg.montecarlo.fraction)),
        ("seed", cfg.scenario.seed.to_string()),
        ("violating_runs", s.violating_runs.to_string()),
        ("failed_runs", s.failed_runs.to_string()),
        ("mean_suboptimality", fmt_num(s.mean_suboptimality)),
        ("max_suboptimality", fmt_num(s.max_suboptimality)),
        ("true_objective", fmt_num(out.study.true_objective)),
        ("model_free_violated", u8::from(out.free_profile.violated()).to_string()),
        ("model_free_max_depth", fmt_num(out.free_profile.max_depth())),
        ("model_free_suboptimality", fmt_num(out.free_suboptimality)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect();
    for (i, (d, n)) in s.max_depth.iter().zip(&s.max_duration).enumerate() {
        stats.push((format!("max_depth_{}", i + 1), fmt_num(*d)));
        stats.push((format!("max_duration_{}", i + 1), n.to_string()));
    }
    let rows: Vec<Vec<String>> = stats.into_iter().map(|(k, v)| vec![k, v]).collect();
    io::write_table(&dir.join("stats.csv"), &["key".into(), "value".into()], &rows)?;
    files.push("stats.csv".into());

    files.extend(write_trajectory_files(dir, cfg, "trajectory", &out.free)?);
    files.extend(write_trajectory_files(dir, cfg, "oracle", &out.study.true_oracle)?);
    if svg {
        for q in Quantity::ALL {
            let mut series = Vec::new();
            for r in &out.study.results {
                let Some(o) = r.outcome() else { continue };
                let ens = if q == Quantity::Current {
                    Some(vec![Series {
                        label: "perturbed-model protocols".into(),
                        style: SeriesStyle::Ensemble,
                        values: o.currents.clone(),
                        dashed: false,
                    }])
                } else {
                    io::channel_rows_series(&out.channel_names, &o.channels, q, "perturbed-model protocols", SeriesStyle::Ensemble)
                };
                series.extend(ens.into_iter().flatten());
            }
            series.extend(io::trajectory_series(&out.free, q, "model-free", SeriesStyle::ModelFree)?);
            series.extend(io::trajectory_series(&out.study.true_oracle, q, "oracle", SeriesStyle::Oracle)?);
            files.push(write_plot(dir, q.name(), "ecm robustness", q, &series)?);
        }
    }
    write_run_metadata(dir, cfg, "montecarlo", &files)?;
    Ok(files)
}

pub fn write_regret(dir: &Path, cfg: &ScenarioConfig, runs: &[RegretRun], svg: bool) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let header = [
        "mu1", "total_regret", "tail_slope", "converged", "mu2_estimate", "mu_star",
        "tail_gap_mean", "negative_gaps", "ratio_sign_changes",
    ]
    .map(String::from)
    .to_vec();
    let rows: Vec<Vec<String>> = runs
        .iter()
        .map(|r| {
            let p = &r.report;
            vec![
                fmt_num(r.mu1),
                fmt_num(p.total()),
                p.tail_slope.map(fmt_num).unwrap_or_default(),
                u8::from(p.converged).to_string(),
                p.mu2_estimate.map(fmt_num).unwrap_or_default(),
                fmt_num(p.mu_star),
                fmt_num(p.tail_gap_mean),
                p.negative_gaps.to_string(),
                r.ratio_sign_changes.to_string(),
            ]
        })
        .collect();
    io::write_table(&dir.join("regret.csv"), &header, &rows)?;

    let mut header = vec!["t".to_string()];
    header.extend(runs.iter().map(|r| format!("R_mu{}", fmt_num(r.mu1))));
    let n = runs.first().map_or(0, |r| r.report.cumulative.len());
    let rows: Vec<Vec<String>> = (0..n)
        .map(|t| {
            let mut row = vec![t.to_string()];
            row.extend(runs.iter().map(|r| fmt_num(r.report.cumulative[t])));
            row
        })
        .collect();
    io::write_table(&dir.join("regret_series.csv"), &header, &rows)?;
    let mut files = vec!["regret.csv".to_string(), "regret_series.csv".to_string()];
    if svg {
        let series: Vec<Series> = runs
            .iter()
            .enumerate()
            .map(|(k, r)| Series {
                label: format!("R_t, mu1 = {}", fmt_num(r.mu1)),
                style: SeriesStyle::ModelFree,
                values: r.report.cumulative.clone(),
                dashed: k > 0,
            })
            .collect();
        let file = "regret.svg".to_string();
        let svg = io::render_svg("cumulative regret", Quantity::Current, &series)?
            .replace("current [A]", "cumulative regret [-]");
        io::write_text(&dir.join(&file), &svg)?;
        files.push(file);
    }
    write_run_metadata(dir, cfg, "regret", &files)?;
    Ok(files)
}

pub fn write_validation(dir: &Path, cfg: &ScenarioConfig, rep: &ValidationReport) -> Result<Vec<String>> {
    let header = ["check", "passed", "detail"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = rep
        .checks
        .iter()
        .map(|c| vec![c.name.clone(), u8::from(c.passed).to_string(), c.detail.clone()])
        .collect();
    io::write_table(&dir.join("validation.csv"), &header, &rows)?;
    let files = vec!["trajectory.csv".to_string(), "validation.csv".to_string()];
    write_run_metadata(dir, cfg, "validate", &files)?;
    Ok(files)
}
