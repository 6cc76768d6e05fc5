//! Series pack of equivalent circuit cells on a thermal ring.
//!
//! Every cell carries the same current. Cell `i` exchanges heat with cells
//! `i - 1` (rate `k1`) and `i + 1` (rate `k2`), indices taken modulo `N`.
//!
//! Output layout (0-based): `0` current, `1..=N` cell voltages,
//! `N+1..=2N` one-step-ahead cell temperature rises, then the temperature
//! difference outputs.

use serde::{Deserialize, Serialize};

use super::ecm::{ecm_step, temperature_rise, terminal_voltage, voltage_output, EcmParams, EcmState};
use super::perturb::vary_rc_links;
use crate::error::{Error, Result};
use crate::plant::PlantModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PairMode {
    /// One output per ordered pair `(j, k)`, `j != k`: `N (N - 1)` outputs.
    AllPairs,
    /// A single output `max_j T_j - min_k T_k`.
    #[default]
    MaxMinusMin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackParams {
    pub cells: usize,
    pub base: EcmParams,
    /// Relative spread of the per-cell RC-link parameters.
    pub rc_variation: f64,
    pub variation_seed: u64,
    /// Heat-transfer rates to the previous and next cell [1/s].
    pub k1: f64,
    pub k2: f64,
    #[serde(default)]
    pub pair_mode: PairMode,
}

impl PackParams {
    pub fn validate(&self) -> Result<()> {
        if self.cells < 2 {
            return Err(Error::config("a pack needs at least two cells"));
        }
        if !(self.k1 >= 0.0 && self.k2 >= 0.0 && self.k1.is_finite() && self.k2.is_finite()) {
            return Err(Error::config("heat-transfer rates k1, k2 must be non-negative"));
        }
        let coupling = self.base.dt * (self.base.a + self.k1 + self.k2);
        if coupling >= 1.0 {
            return Err(Error::config(format!(
                "thermal coupling factor dt (a + k1 + k2) = {coupling} must be below 1"
            )));
        }
        self.base.validate()
    }

    pub fn difference_count(&self) -> usize {
        match self.pair_mode {
            PairMode::AllPairs => self.cells * (self.cells - 1),
            PairMode::MaxMinusMin => 1,
        }
    }
}

/// Which constraint family an output index belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputFamily {
    Current,
    Voltage(usize),
    Temperature(usize),
    Difference,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackModel {
    params: PackParams,
    cells: Vec<EcmParams>,
}

impl PackModel {
    pub fn new(params: PackParams) -> Result<Self> {
        params.validate()?;
        let cells = (0..params.cells)
            .map(|i| vary_rc_links(&params.base, params.rc_variation, params.variation_seed, i as u64))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { params, cells })
    }

    /// Builds a pack from explicit per-cell parameters. The thermal and
    /// output settings of `params.base` still apply to the coupling terms.
    pub fn from_cells(params: PackParams, cells: Vec<EcmParams>) -> Result<Self> {
        params.validate()?;
        if cells.len() != params.cells {
            return Err(Error::config(format!(
                "expected {} cell parameter sets, got {}",
                params.cells,
                cells.len()
            )));
        }
        for c in &cells {
            c.validate()?;
            if c.dt != params.base.dt {
                return Err(Error::config("all cells must share the pack sampling time"));
            }
        }
        Ok(Self { params, cells })
    }

    pub fn params(&self) -> &PackParams {
        &self.params
    }

    pub fn cell_params(&self) -> &[EcmParams] {
        &self.cells
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn with_pair_mode(&self, mode: PairMode) -> Self {
        let mut out = self.clone();
        out.params.pair_mode = mode;
        out
    }

    pub fn uniform_state(&self, soc: f64) -> Vec<EcmState> {
        vec![EcmState::at_rest(soc); self.cells.len()]
    }

    pub fn output_family(&self, i: usize) -> OutputFamily {
        let n = self.cells.len();
        match i {
            0 => OutputFamily::Current,
            i if i <= n => OutputFamily::Voltage(i - 1),
            i if i <= 2 * n => OutputFamily::Temperature(i - n - 1),
            _ => OutputFamily::Difference,
        }
    }

    /// Ordered pair `(j, k)` behind an all-pairs difference output.
    pub fn pair_of(&self, i: usize) -> Option<(usize, usize)> {
        let n = self.cells.len();
        if self.params.pair_mode != PairMode::AllPairs || i < 2 * n + 1 {
            return None;
        }
        let d = i - 2 * n - 1;
        if d >= n * (n - 1) {
            return None;
        }
        let j = d / (n - 1);
        let r = d % (n - 1);
        let k = if r < j { r } else { r + 1 };
        Some((j, k))
    }

    /// Bound vector: current, cell voltages, cell temperature rises and
    /// temperature differences.
    pub fn bounds(&self, u_max: f64, v_max: f64, dtemp_max: f64, delta_t_max: f64) -> Vec<f64> {
        let n = self.cells.len();
        let v_bound = self.params.base.voltage_bound(v_max);
        let mut out = vec![u_max];
        out.extend(std::iter::repeat_n(v_bound, n));
        out.extend(std::iter::repeat_n(dtemp_max, n));
        out.extend(std::iter::repeat_n(delta_t_max, self.params.difference_count()));
        out
    }

    /// Weights with `thermal_weight` on temperature and difference outputs.
    pub fn weights(&self, thermal_weight: f64) -> Vec<f64> {
        let n = self.cells.len();
        let mut out = vec![1.0; n + 1];
        out.extend(std::iter::repeat_n(thermal_weight, n + self.params.difference_count()));
        out
    }

    fn neighbours(&self, i: usize) -> (usize, usize) {
        let n = self.cells.len();
        ((i + n - 1) % n, (i + 1) % n)
    }

    fn coupled_rise(&self, x: &[EcmState], i: usize, u: f64) -> f64 {
        let (prev, next) = self.neighbours(i);
        let dt = self.params.base.dt;
        temperature_rise(&self.cells[i], &x[i], u)
            + dt * self.params.k1 * (x[prev].dtemp - x[i].dtemp)
            + dt * self.params.k2 * (x[next].dtemp - x[i].dtemp)
    }

    fn check_len(&self, x: &[EcmState]) -> Result<()> {
        if x.len() != self.cells.len() {
            return Err(Error::config(format!(
                "pack state has {} cells, model has {}",
                x.len(),
                self.cells.len()
            )));
        }
        Ok(())
    }

    pub fn pack_voltage(&self, x: &[EcmState], u: f64) -> f64 {
        self.cells
            .iter()
            .zip(x)
            .map(|(p, xi)| terminal_voltage(p, xi, u))
            .sum()
    }
}

fn extremes(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    })
}

impl PlantModel for PackModel {
    type State = Vec<EcmState>;

    fn name(&self) -> &str {
        "pack"
    }

    fn state_dim(&self) -> usize {
        4 * self.cells.len()
    }

    fn output_count(&self) -> usize {
        1 + 2 * self.cells.len() + self.params.difference_count()
    }

    fn step(&self, x: &Vec<EcmState>, u: f64) -> Result<Vec<EcmState>> {
        self.check_len(x)?;
        Ok((0..self.cells.len())
            .map(|i| {
                let mut next = ecm_step(&self.cells[i], &x[i], u);
                next.dtemp = self.coupled_rise(x, i, u);
                next
            })
            .collect())
    }

    fn outputs_into(&self, x: &Vec<EcmState>, u: f64, out: &mut Vec<f64>) -> Result<()> {
        self.check_len(x)?;
        let n = self.cells.len();
        out.clear();
        out.reserve(self.output_count());
        out.push(u);
        out.extend(self.cells.iter().zip(x).map(|(p, xi)| voltage_output(p, xi, u)));
        out.extend((0..n).map(|i| self.coupled_rise(x, i, u)));
        match self.params.pair_mode {
            PairMode::AllPairs => {
                for j in 0..n {
                    for k in 0..n {
                        if j != k {
                            out.push(out[1 + n + j] - out[1 + n + k]);
                        }
                    }
                }
            }
            PairMode::MaxMinusMin => {
                let (lo, hi) = extremes(out[1 + n..1 + 2 * n].iter().copied());
                out.push(hi - lo);
            }
        }
        Ok(())
    }

    fn output(&self, x: &Vec<EcmState>, i: usize, u: f64) -> Result<f64> {
        self.check_len(x)?;
        let n = self.cells.len();
        Ok(match self.output_family(i) {
            OutputFamily::Current => u,
            OutputFamily::Voltage(c) => voltage_output(&self.cells[c], &x[c], u),
            OutputFamily::Temperature(c) => self.coupled_rise(x, c, u),
            OutputFamily::Difference => match self.pair_of(i) {
                Some((j, k)) => self.coupled_rise(x, j, u) - self.coupled_rise(x, k, u),
                None => {
                    let (lo, hi) = extremes((0..n).map(|c| self.coupled_rise(x, c, u)));
                    hi - lo
                }
            },
        })
    }

    fn output_label(&self, i: usize) -> String {
        match self.output_family(i) {
            OutputFamily::Current => "u".into(),
            OutputFamily::Voltage(c) => format!("V_{}", c + 1),
            OutputFamily::Temperature(c) => format!("dT_{}", c + 1),
            OutputFamily::Difference => match self.pair_of(i) {
                Some((j, k)) => format!("dT_{}-dT_{}", j + 1, k + 1),
                None => "dT_max-dT_min".into(),
            },
        }
    }

    fn state_vector(&self, x: &Vec<EcmState>) -> Vec<f64> {
        x.iter().flat_map(|c| c.as_array()).collect()
    }

    fn reward(&self, x: &Vec<EcmState>) -> f64 {
        x.iter().map(|c| c.soc).sum()
    }

    fn channel_names(&self) -> Vec<String> {
        ["u", "V_pack", "T_max", "T_min", "dT_max"]
            .map(String::from)
            .to_vec()
    }

    fn channels(&self, x: &Vec<EcmState>, u: f64) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let ta = self.params.base.t_ambient;
        let (lo, hi) = extremes(x.iter().map(|c| c.dtemp));
        Ok(vec![u, self.pack_voltage(x, u), ta + hi, ta + lo, hi - lo])
    }

    fn compact_log(&self) -> bool {
        true
    }
}
