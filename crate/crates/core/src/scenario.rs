//! TOML scenario files and their resolution into runnable models.
//!
//! A scenario names a model, its parameters (inline or from a separate
//! file), the constraint bounds and weights, the controller tunables and
//! the analysis settings. Parameter files use the same section names as
//! the inline form.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::AnalysisOptions;
use crate::controller::{ConstraintSpec, ControllerConfig, GainBox};
use crate::error::{Error, Result};
use crate::models::ecm::{EcmModel, EcmParams, EcmState};
use crate::models::pack::{OutputFamily, PackModel, PackParams};
use crate::models::reference;
use crate::models::spmet::{DefaultPotentials, SpmetModel, SpmetParams, SpmetState};
use crate::models::toy::LinearPlant;
use crate::oracle::RootConfig;
use crate::plant::{PlantModel, RunOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Spmet,
    Ecm,
    Pack,
    ToyLinear,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Spmet => "spmet",
            Self::Ecm => "ecm",
            Self::Pack => "pack",
            Self::ToyLinear => "toy-linear",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub model: ModelKind,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub label: String,
    /// Parameter file, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<PathBuf>,
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the model's sampling time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Also write every plant output of compact-logged models.
    #[serde(default, skip_serializing_if = "is_false")]
    pub full_outputs: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Bounds in physical units; which fields apply depends on the model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_max: Option<f64>,
    /// Temperature rise above ambient [K].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dtemp_max: Option<f64>,
    /// Largest cell-to-cell temperature difference in a pack [K].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_t_max: Option<f64>,
    /// Raw output bounds, toy plant only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_max: Option<Vec<f64>>,
    /// One weight per output; for a pack one weight per family
    /// (current, voltage, temperature).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    #[serde(default = "default_theta0")]
    pub theta0: [f64; 2],
    #[serde(default)]
    pub theta_lo: [f64; 2],
    #[serde(default = "default_theta_hi")]
    pub theta_hi: [f64; 2],
    #[serde(default = "default_mu1")]
    pub mu1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_clip: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_clamp: Option<[f64; 2]>,
    #[serde(default = "default_divergence_limit")]
    pub divergence_limit: f64,
}

fn default_theta0() -> [f64; 2] {
    [0.1, 0.1]
}

fn default_theta_hi() -> [f64; 2] {
    [10.0, 1.0]
}

fn default_mu1() -> f64 {
    0.5
}

fn default_divergence_limit() -> f64 {
    1e9
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            theta0: default_theta0(),
            theta_lo: [0.0, 0.0],
            theta_hi: default_theta_hi(),
            mu1: default_mu1(),
            gradient_clip: None,
            current_clamp: None,
            divergence_limit: default_divergence_limit(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// Initial state of charge of battery models.
    #[serde(default)]
    pub soc: f64,
    /// Initial state of the toy plant.
    #[serde(default)]
    pub x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "yes")]
    pub optimal_cost: bool,
    #[serde(default = "yes")]
    pub ct: bool,
    #[serde(default)]
    pub gradient_check: bool,
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    /// Start of the window used when comparing against the oracle.
    #[serde(default)]
    pub compare_from: usize,
}

fn yes() -> bool {
    true
}

fn default_tail_fraction() -> f64 {
    0.5
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            optimal_cost: true,
            ct: true,
            gradient_check: false,
            tail_fraction: default_tail_fraction(),
            compare_from: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    /// Upper bracket; defaults to twice the current limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_hi: Option<f64>,
    #[serde(default = "default_tol_u")]
    pub tol_u: f64,
    #[serde(default = "default_tol_y")]
    pub tol_y: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_tol_u() -> f64 {
    1e-9
}

fn default_tol_y() -> f64 {
    1e-6
}

fn default_max_iterations() -> usize {
    200
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            u_hi: None,
            tol_u: default_tol_u(),
            tol_y: default_tol_y(),
            max_iterations: default_max_iterations(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    #[serde(default = "default_models")]
    pub models: usize,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
}

fn default_models() -> usize {
    200
}

fn default_fraction() -> f64 {
    0.1
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        Self {
            models: default_models(),
            fraction: default_fraction(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegretSection {
    #[serde(default = "default_mu1_sweep")]
    pub mu1: Vec<f64>,
}

fn default_mu1_sweep() -> Vec<f64> {
    vec![0.3, 0.5, 0.7]
}

impl Default for RegretSection {
    fn default() -> Self {
        Self {
            mu1: default_mu1_sweep(),
        }
    }
}

/// Model parameter sections; a parameter file holds exactly these.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSections {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spmet: Option<SpmetParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potentials: Option<DefaultPotentials>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecm: Option<EcmParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pack: Option<PackParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub toy: Option<LinearPlant>,
}

impl ParamSections {
    fn is_empty(&self) -> bool {
        self == &Self::default()
    }

    fn merge_missing(&mut self, other: ParamSections) {
        self.spmet = self.spmet.take().or(other.spmet);
        self.potentials = self.potentials.take().or(other.potentials);
        self.ecm = self.ecm.take().or(other.ecm);
        self.pack = self.pack.take().or(other.pack);
        self.toy = self.toy.take().or(other.toy);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub constraints: ConstraintsSection,
    #[serde(default)]
    pub controller: ControllerSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub montecarlo: MonteCarloSection,
    #[serde(default)]
    pub regret: RegretSection,
    #[serde(flatten)]
    pub params: ParamSections,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("invalid scenario: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("cannot serialize scenario: {e}")))
    }

    /// Reads a scenario and merges its parameter file, if any.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        if let Some(rel) = cfg.scenario.params.take() {
            let base = path.parent().unwrap_or(Path::new("."));
            let file = base.join(&rel);
            let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
            let params: ParamSections = toml::from_str(&text).map_err(|e| {
                Error::config(format!("{}: invalid parameter file: {e}", file.display()))
            })?;
            if params.is_empty() {
                return Err(Error::config(format!(
                    "{}: parameter file has no model section",
                    file.display()
                )));
            }
            cfg.params.merge_missing(params);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Copy with every default filled in and parameters inlined, suitable
    /// for reproducing a run on its own.
    pub fn snapshot(&self) -> Self {
        let mut out = self.clone();
        out.scenario.params = None;
        let p = &mut out.params;
        match out.scenario.model {
            ModelKind::Spmet => {
                p.spmet.get_or_insert_with(reference::spmet_params);
                p.potentials.get_or_insert_with(DefaultPotentials::default);
            }
            ModelKind::Ecm => {
                p.ecm.get_or_insert_with(reference::ecm_params);
            }
            ModelKind::Pack => {
                p.pack.get_or_insert_with(reference::pack_params);
            }
            ModelKind::ToyLinear => {
                p.toy.get_or_insert_with(LinearPlant::integrator);
            }
        }
        out
    }

    /// SHA-256 of the snapshot text, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let text = self.snapshot().to_toml()?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenario.params.is_some() {
            return Err(Error::config(
                "parameter file must be merged with ScenarioConfig::load",
            ));
        }
        if let Some(dt) = self.scenario.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::config(format!("dt must be positive, got {dt}")));
            }
        }
        if !(self.analysis.tail_fraction > 0.0 && self.analysis.tail_fraction <= 1.0) {
            return Err(Error::config("analysis.tail_fraction must lie in (0, 1]"));
        }
        if self.montecarlo.models == 0 {
            return Err(Error::config("montecarlo.models must be at least 1"));
        }
        if self.regret.mu1.is_empty() {
            return Err(Error::config("regret.mu1 must list at least one value"));
        }
        if !(0.0..1.0).contains(&self.initial.soc) {
            return Err(Error::config(format!(
                "initial.soc must lie in [0, 1), got {}",
                self.initial.soc
            )));
        }
        self.controller_config()?;
        self.build()?;
        Ok(())
    }

    pub fn controller_config(&self) -> Result<ControllerConfig> {
        let c = &self.controller;
        Ok(ControllerConfig {
            theta0: c.theta0,
            gain_box: GainBox::new(c.theta_lo, c.theta_hi)?,
            mu1: c.mu1,
            gradient_clip: c.gradient_clip,
        })
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            divergence_limit: self.controller.divergence_limit,
            current_clamp: self.controller.current_clamp.map(|[a, b]| (a, b)),
        }
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            optimal_cost: self.analysis.optimal_cost,
            ct: self.analysis.ct,
            gradient_check: self.analysis.gradient_check,
            ..Default::default()
        }
    }

    pub fn root_config(&self, u_max: f64) -> Result<RootConfig> {
        let o = &self.oracle;
        let cfg = RootConfig {
            u_hi: o.u_hi.unwrap_or(2.0 * u_max),
            tol_u: o.tol_u,
            tol_y: o.tol_y,
            max_iterations: o.max_iterations,
        };
        cfg.validate(u_max)?;
        Ok(cfg)
    }

    fn require(&self, value: Option<f64>, name: &str) -> Result<f64> {
        value.ok_or_else(|| {
            Error::config(format!(
                "constraints.{name} is required for the {} model",
                self.scenario.model.as_str()
            ))
        })
    }

    fn gamma(&self, n: usize) -> Result<Vec<f64>> {
        match &self.constraints.gamma {
            None => Ok(vec![1.0; n]),
            Some(g) if g.len() == n => Ok(g.clone()),
            Some(g) => Err(Error::config(format!(
                "constraints.gamma has {} entries, the {} model needs {n}",
                g.len(),
                self.scenario.model.as_str()
            ))),
        }
    }

    fn with_dt<T>(&self, mut params: T, set: impl Fn(&mut T, f64)) -> T {
        if let Some(dt) = self.scenario.dt {
            set(&mut params, dt);
        }
        params
    }

    /// Instantiates the model, its constraint set and initial state.
    pub fn build(&self) -> Result<Scenario> {
        let kind = self.scenario.model;
        let p = &self.params;
        let c = &self.constraints;
        let model = match kind {
            ModelKind::Spmet => {
                let params = self.with_dt(
                    p.spmet.clone().unwrap_or_else(reference::spmet_params),
                    |p, dt| p.dt = dt,
                );
                let pots = p.potentials.clone().unwrap_or_default();
                let model = SpmetModel::with_potentials(params, std::sync::Arc::new(pots))?;
                let bounds = vec![self.require(c.u_max, "u_max")?, self.require(c.v_max, "v_max")?];
                let spec = ConstraintSpec::new(bounds, self.gamma(2)?)?;
                let mp = model.params();
                let x0 = mp.rest_state(mp.theta1 + self.initial.soc * (mp.theta2 - mp.theta1));
                BuiltModel::Spmet(model, x0, spec)
            }
            ModelKind::Ecm => {
                let params = self.with_dt(
                    p.ecm.clone().unwrap_or_else(reference::ecm_params),
                    |p, dt| p.dt = dt,
                );
                let bounds = vec![
                    self.require(c.u_max, "u_max")?,
                    params.voltage_bound(self.require(c.v_max, "v_max")?),
                    self.require(c.dtemp_max, "dtemp_max")?,
                ];
                let spec = ConstraintSpec::new(bounds, self.gamma(3)?)?;
                let model = EcmModel::new(params)?;
                BuiltModel::Ecm(model, EcmState::at_rest(self.initial.soc), spec)
            }
            ModelKind::Pack => {
                let params = self.with_dt(
                    p.pack.clone().unwrap_or_else(reference::pack_params),
                    |p, dt| p.base.dt = dt,
                );
                let model = PackModel::new(params)?;
                let bounds = model.bounds(
                    self.require(c.u_max, "u_max")?,
                    self.require(c.v_max, "v_max")?,
                    self.require(c.dtemp_max, "dtemp_max")?,
                    self.require(c.delta_t_max, "delta_t_max")?,
                );
                let family = self.gamma(3)?;
                let weights = (0..bounds.len())
                    .map(|i| match model.output_family(i) {
                        OutputFamily::Current => family[0],
                        OutputFamily::Voltage(_) => family[1],
                        OutputFamily::Temperature(_) | OutputFamily::Difference => family[2],
                    })
                    .collect();
                let spec = ConstraintSpec::new(bounds, weights)?;
                let x0 = model.uniform_state(self.initial.soc);
                BuiltModel::Pack(model, x0, spec)
            }
            ModelKind::ToyLinear => {
                let plant = p.toy.clone().unwrap_or_else(LinearPlant::integrator);
                let plant = LinearPlant::new(
                    plant.decay,
                    plant.gain,
                    plant.state_coeff,
                    plant.input_coeff,
                    plant.current_output,
                )?;
                let bounds = c.y_max.clone().ok_or_else(|| {
                    Error::config("constraints.y_max is required for the toy-linear model")
                })?;
                if bounds.len() != plant.output_count() {
                    return Err(Error::config(format!(
                        "constraints.y_max has {} entries, the toy plant has {} outputs",
                        bounds.len(),
                        plant.output_count()
                    )));
                }
                let spec = ConstraintSpec::new(bounds, self.gamma(plant.output_count())?)?;
                BuiltModel::Toy(plant, self.initial.x, spec)
            }
        };
        Ok(Scenario { model })
    }

    /// Current limit used for the oracle bracket.
    pub fn current_limit(&self) -> Result<f64> {
        match self.scenario.model {
            ModelKind::ToyLinear => Ok(self
                .constraints
                .u_max
                .or_else(|| self.constraints.y_max.as_ref().map(|y| y[0]))
                .unwrap_or(1.0)),
            _ => self.require(self.constraints.u_max, "u_max"),
        }
    }
}

/// A model instance with its constraint set and initial state.
#[derive(Debug, Clone)]
pub enum BuiltModel {
    Spmet(SpmetModel, SpmetState, ConstraintSpec),
    Ecm(EcmModel, EcmState, ConstraintSpec),
    Pack(PackModel, Vec<EcmState>, ConstraintSpec),
    Toy(LinearPlant, f64, ConstraintSpec),
}

/// Generic operation over whichever model a scenario builds.
pub trait ModelVisitor {
    type Output;
    fn visit<M: PlantModel>(self, model: &M, x0: M::State, spec: &ConstraintSpec) -> Self::Output;
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: BuiltModel,
}

impl Scenario {
    pub fn spec(&self) -> &ConstraintSpec {
        match &self.model {
            BuiltModel::Spmet(_, _, s)
            | BuiltModel::Ecm(_, _, s)
            | BuiltModel::Pack(_, _, s)
            | BuiltModel::Toy(_, _, s) => s,
        }
    }

    pub fn accept<V: ModelVisitor>(&self, v: V) -> V::Output {
        match &self.model {
            BuiltModel::Spmet(m, x, s) => v.visit(m, *x, s),
            BuiltModel::Ecm(m, x, s) => v.visit(m, *x, s),
            BuiltModel::Pack(m, x, s) => v.visit(m, x.clone(), s),
            BuiltModel::Toy(m, x, s) => v.visit(m, *x, s),
        }
    }
}
