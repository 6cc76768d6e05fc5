use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use bangride::experiment::{self, Overrides};
use bangride::scenario::ScenarioConfig;
use clap::{Args, Parser, Subcommand};

/// Model-free bang-ride charging laboratory.
#[derive(Debug, Parser)]
#[command(name = "bangride", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Model-free closed-loop run.
    Simulate,
    /// Ideal bang-ride protocol with full model access.
    Oracle,
    /// Model-free run and oracle side by side, with gap.csv.
    Compare,
    /// Oracle protocols of perturbed ECMs replayed on the true ECM.
    Montecarlo,
    /// Regret sweep over the step-size exponent.
    Regret,
    /// Monotonicity and invariant checks; exit 3 on failure.
    Validate,
}

#[derive(Debug, Args)]
struct Flags {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the scenario's.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Horizon t_f.
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    mu1: Option<f64>,
    /// Constraint weights, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    /// Number of perturbed models.
    #[arg(long, global = true)]
    models: Option<usize>,
    /// Relative perturbation bound.
    #[arg(long, global = true)]
    fraction: Option<f64>,
    /// Write every plant output, not only the summary channels (pack).
    #[arg(long, global = true)]
    full_outputs: bool,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    svg: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_DIVERGED: u8 = 2;
const EXIT_VALIDATE: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<bangride::Error>() {
        Some(
            bangride::Error::Diverged { .. }
            | bangride::Error::Domain { .. }
            | bangride::Error::RootNotConverged { .. },
        ) => EXIT_DIVERGED,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load(flags: &Flags) -> anyhow::Result<ScenarioConfig> {
    let path = flags
        .config
        .as_deref()
        .ok_or_else(|| bangride::Error::Config("--config is required".into()))?;
    let mut cfg = ScenarioConfig::load(path)?;
    Overrides {
        seed: flags.seed,
        steps: flags.steps,
        mu1: flags.mu1,
        gamma: flags.gamma.clone(),
        models: flags.models,
        fraction: flags.fraction,
        full_outputs: flags.full_outputs,
    }
    .apply(&mut cfg)?;
    Ok(cfg)
}

fn report(dir: &Path, files: &[String]) {
    println!("wrote {} files to {}", files.len() + 2, dir.display());
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let flags = &cli.flags;
    if let Some(n) = flags.jobs {
        if n == 0 {
            return Err(bangride::Error::Config("--jobs must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot start worker threads")?;
    }
    let cfg = load(flags)?;
    let dir = experiment::output_dir(&cfg, flags.out.as_deref());
    match cli.command {
        Command::Simulate => {
            let out = experiment::simulate(&cfg)?;
            let files = experiment::write_simulate(&dir, &cfg, &out, flags.svg)?;
            let phases: Vec<String> = out
                .trajectory
                .phases()
                .iter()
                .map(|p| format!("{}@{}", p.index + 1, p.start))
                .collect();
            println!("phases: {}", phases.join(" "));
            report(&dir, &files);
        }
        Command::Oracle => {
            let traj = experiment::oracle(&cfg)?;
            let files = experiment::write_oracle(&dir, &cfg, &traj, flags.svg)?;
            report(&dir, &files);
        }
        Command::Compare => {
            let out = experiment::compare(&cfg)?;
            let files = experiment::write_compare(&dir, &cfg, &out, flags.svg)?;
            println!(
                "relative L2 current gap from t = {}: {:.4}",
                cfg.analysis.compare_from, out.relative_l2
            );
            report(&dir, &files);
        }
        Command::Montecarlo => {
            let out = experiment::montecarlo(&cfg)?;
            let files = experiment::write_montecarlo(&dir, &cfg, &out, flags.svg)?;
            let s = &out.study.stats;
            println!(
                "{} of {} perturbed protocols violate a constraint ({} failed)",
                s.violating_runs, cfg.montecarlo.models, s.failed_runs
            );
            report(&dir, &files);
        }
        Command::Regret => {
            let runs = experiment::regret_sweep(&cfg)?;
            let files = experiment::write_regret(&dir, &cfg, &runs, flags.svg)?;
            for r in &runs {
                let slope = r
                    .report
                    .tail_slope
                    .map_or("undefined".to_string(), |s| format!("{s:.3}"));
                println!(
                    "mu1 = {}: R = {:.4e}, tail slope {slope}, mu* = {}",
                    r.mu1,
                    r.report.total(),
                    r.report.mu_star
                );
            }
            report(&dir, &files);
        }
        Command::Validate => {
            let rep = experiment::validate(&cfg, &dir)?;
            let files = experiment::write_validation(&dir, &cfg, &rep)?;
            for c in &rep.checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            report(&dir, &files);
            if !rep.passed() {
                return Ok(EXIT_VALIDATE);
            }
        }
    }
    Ok(0)
}
