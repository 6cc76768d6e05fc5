//! Single-particle model with electrolyte and thermal states.
//!
//! The particle concentrations follow a two-tank hydraulic model, the
//! electrolyte concentrations a first-order Padé relaxation toward their
//! initial value. Open-circuit, reaction and electrolyte potentials are
//! supplied through [`Potentials`].

use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::PlantModel;

pub const FARADAY: f64 = 96485.0;
pub const GAS_CONSTANT: f64 = 8.314;
const KELVIN: f64 = 273.15;

/// Electrolyte constants of one electrode region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrolyteRegion {
    /// Diffusion coefficient [m^2/s].
    pub diffusivity: f64,
    /// Region thickness [m].
    pub thickness: f64,
    pub porosity: f64,
    pub n1: f64,
    pub n2: f64,
    pub n3: f64,
    /// Electrolyte volume [m^3].
    pub volume: f64,
}

impl ElectrolyteRegion {
    /// Per-step relaxation factor toward the initial concentration.
    pub fn relaxation(&self, dt: f64) -> f64 {
        dt * self.diffusivity * self.n1 / (self.thickness * self.porosity * self.n3)
    }

    /// Per-step concentration change per ampere.
    pub fn input_gain(&self, dt: f64, faraday: f64) -> f64 {
        dt * self.n2 / (self.volume * faraday * self.n3)
    }

    fn fields(&self) -> [(&'static str, f64); 7] {
        [
            ("diffusivity", self.diffusivity),
            ("thickness", self.thickness),
            ("porosity", self.porosity),
            ("n1", self.n1),
            ("n2", self.n2),
            ("n3", self.n3),
            ("volume", self.volume),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpmetParams {
    /// Sampling time [s].
    pub dt: f64,
    /// Aggregated negative particle volume [m^3].
    pub particle_volume: f64,
    /// Faraday constant [C/mol].
    pub faraday: f64,
    /// Hydraulic model constants.
    pub hydraulic_g: f64,
    pub beta: f64,
    /// Solid diffusion time constant [s].
    pub tau: f64,
    pub negative: ElectrolyteRegion,
    pub positive: ElectrolyteRegion,
    /// Initial (and rest) electrolyte concentration [mol/m^3].
    pub ce0: f64,
    /// Heat-exchange rate [1/s].
    pub a: f64,
    /// Inverse heat capacity [K/(W s)].
    pub b: f64,
    /// Ambient temperature [degC].
    pub t_ambient: f64,
    /// Maximum negative particle concentration [mol/m^3].
    pub c_max: f64,
    /// Stoichiometry at SOC = 0 and SOC = 1.
    pub theta1: f64,
    pub theta2: f64,
    /// Capacity [A h]. Informational; the current bound is usually `2 Q`.
    pub capacity_ah: f64,
}

impl SpmetParams {
    /// Particle volume consistent with a capacity in A h.
    pub fn particle_volume_for(capacity_ah: f64, c_max: f64, theta1: f64, theta2: f64) -> f64 {
        capacity_ah * 3600.0 / ((theta2 - theta1) * c_max * FARADAY)
    }

    pub fn validate(&self) -> Result<()> {
        let mut positive = vec![
            ("dt", self.dt),
            ("particle_volume", self.particle_volume),
            ("faraday", self.faraday),
            ("hydraulic_g", self.hydraulic_g),
            ("tau", self.tau),
            ("ce0", self.ce0),
            ("a", self.a),
            ("b", self.b),
            ("c_max", self.c_max),
            ("capacity_ah", self.capacity_ah),
        ];
        positive.extend(self.negative.fields());
        positive.extend(self.positive.fields());
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!(
                    "SPMeT parameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        if !self.t_ambient.is_finite() {
            return Err(Error::config("SPMeT ambient temperature is not finite"));
        }
        if !(0.0 <= self.theta1 && self.theta1 < self.theta2 && self.theta2 <= 1.0) {
            return Err(Error::config(format!(
                "stoichiometric endpoints must satisfy 0 <= theta1 < theta2 <= 1, got {} and {}",
                self.theta1, self.theta2
            )));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::config(format!("beta must lie in (0, 1), got {}", self.beta)));
        }
        let k = self.surface_coupling();
        if !(k > 0.0 && k <= 1.0) {
            return Err(Error::config(format!(
                "hydraulic coupling factor {k} is outside (0, 1]; reduce dt"
            )));
        }
        for (name, r) in [
            ("negative", self.negative.relaxation(self.dt)),
            ("positive", self.positive.relaxation(self.dt)),
        ] {
            if r >= 1.0 {
                return Err(Error::config(format!(
                    "{name} electrolyte relaxation factor {r} must be below 1"
                )));
            }
        }
        if self.a * self.dt >= 1.0 {
            return Err(Error::config("thermal factor a*dt must be below 1"));
        }
        Ok(())
    }

    /// `G dt / (beta (1 - beta) tau)`.
    pub fn surface_coupling(&self) -> f64 {
        self.hydraulic_g * self.dt / (self.beta * (1.0 - self.beta) * self.tau)
    }

    fn charge_gain(&self) -> f64 {
        self.dt / (self.particle_volume * self.faraday)
    }

    pub fn soc(&self, c_avg: f64) -> f64 {
        (c_avg / self.c_max - self.theta1) / (self.theta2 - self.theta1)
    }

    /// Rest state at the given average stoichiometry fraction of `c_max`.
    pub fn rest_state(&self, stoichiometry: f64) -> SpmetState {
        let c = stoichiometry * self.c_max;
        SpmetState {
            c_avg: c,
            c_surf: c,
            ce_neg: self.ce0,
            ce_pos: self.ce0,
            temperature: self.t_ambient,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpmetState {
    /// Average negative particle concentration [mol/m^3].
    pub c_avg: f64,
    /// Surface negative particle concentration [mol/m^3].
    pub c_surf: f64,
    pub ce_neg: f64,
    pub ce_pos: f64,
    /// Cell temperature [degC].
    pub temperature: f64,
}

impl SpmetState {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.c_avg,
            self.c_surf,
            self.ce_neg,
            self.ce_pos,
            self.temperature,
        ]
    }
}

/// Potential terms of the terminal voltage.
///
/// `delta_eta + delta_phi` must be strictly increasing in `u`.
pub trait Potentials: Send + Sync + Debug {
    /// Open-circuit potential difference [V].
    fn delta_u(&self, p: &SpmetParams, x: &SpmetState) -> Result<f64>;
    /// Reaction overpotential difference [V].
    fn delta_eta(&self, p: &SpmetParams, x: &SpmetState, u: f64) -> Result<f64>;
    /// Electrolyte potential difference [V].
    fn delta_phi(&self, p: &SpmetParams, x: &SpmetState, u: f64) -> Result<f64>;
}

/// Linear open-circuit potentials in surface stoichiometry, a Butler-Volmer
/// overpotential and an electrolyte term with ohmic and concentration parts.
///
/// ```text
/// dU   = (up0 - up1 * th_p) - (un0 - un1 * th_n)
/// deta = 2RT/F * asinh(u / (2 i0 sqrt(th_n (1 - th_n)) sqrt(ce- / ce0)))
/// dphi = r_e u + 2RT/F (1 - t+) ln(ce+ / ce-)
/// ```
///
/// `th_n` is the negative surface stoichiometry and `th_p` is the positive
/// stoichiometry from the mass balance, moving linearly from `pos_empty` at
/// SOC 0 to `pos_full` at SOC 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultPotentials {
    pub up0: f64,
    pub up1: f64,
    pub un0: f64,
    pub un1: f64,
    pub pos_empty: f64,
    pub pos_full: f64,
    /// Exchange current scale [A].
    pub i0: f64,
    /// Lumped electrolyte resistance [Ohm].
    pub r_e: f64,
    /// Transference number.
    pub t_plus: f64,
}

impl Default for DefaultPotentials {
    fn default() -> Self {
        Self {
            up0: 4.6,
            up1: 0.9,
            un0: 0.25,
            un1: 0.2,
            pos_empty: 0.95,
            pos_full: 0.45,
            i0: 20.0,
            r_e: 0.003,
            t_plus: 0.38,
        }
    }
}

impl DefaultPotentials {
    fn thermal_voltage(x: &SpmetState) -> f64 {
        2.0 * GAS_CONSTANT * (x.temperature + KELVIN) / FARADAY
    }
}

impl Potentials for DefaultPotentials {
    fn delta_u(&self, p: &SpmetParams, x: &SpmetState) -> Result<f64> {
        let th_n = x.c_surf / p.c_max;
        let soc_surf = (th_n - p.theta1) / (p.theta2 - p.theta1);
        let th_p = self.pos_empty + (self.pos_full - self.pos_empty) * soc_surf;
        Ok((self.up0 - self.up1 * th_p) - (self.un0 - self.un1 * th_n))
    }

    fn delta_eta(&self, p: &SpmetParams, x: &SpmetState, u: f64) -> Result<f64> {
        let th_n = x.c_surf / p.c_max;
        if !(th_n > 0.0 && th_n < 1.0) {
            return Err(Error::Domain {
                function: "delta_eta",
                detail: format!("surface stoichiometry {th_n} outside (0, 1)"),
            });
        }
        if !(x.ce_neg > 0.0) {
            return Err(Error::Domain {
                function: "delta_eta",
                detail: format!("electrolyte concentration {} is not positive", x.ce_neg),
            });
        }
        let i0 = self.i0 * (th_n * (1.0 - th_n)).sqrt() * (x.ce_neg / p.ce0).sqrt();
        Ok(Self::thermal_voltage(x) * (u / (2.0 * i0)).asinh())
    }

    fn delta_phi(&self, _p: &SpmetParams, x: &SpmetState, u: f64) -> Result<f64> {
        if !(x.ce_neg > 0.0 && x.ce_pos > 0.0) {
            return Err(Error::Domain {
                function: "delta_phi",
                detail: format!(
                    "electrolyte concentrations ({}, {}) must be positive",
                    x.ce_neg, x.ce_pos
                ),
            });
        }
        let conc = Self::thermal_voltage(x) * (1.0 - self.t_plus) * (x.ce_pos / x.ce_neg).ln();
        Ok(self.r_e * u + conc)
    }
}

#[derive(Debug, Clone)]
pub struct SpmetModel {
    params: SpmetParams,
    potentials: Arc<dyn Potentials>,
}

impl SpmetModel {
    pub fn new(params: SpmetParams) -> Result<Self> {
        Self::with_potentials(params, Arc::new(DefaultPotentials::default()))
    }

    /// Builds the model and checks that the voltage increases with the
    /// current over a grid of rest states and currents.
    pub fn with_potentials(params: SpmetParams, potentials: Arc<dyn Potentials>) -> Result<Self> {
        params.validate()?;
        let model = Self { params, potentials };
        model.check_voltage_monotone()?;
        Ok(model)
    }

    pub fn params(&self) -> &SpmetParams {
        &self.params
    }

    pub fn potentials(&self) -> &dyn Potentials {
        self.potentials.as_ref()
    }

    pub fn soc(&self, x: &SpmetState) -> f64 {
        self.params.soc(x.c_avg)
    }

    pub fn voltage(&self, x: &SpmetState, u: f64) -> Result<f64> {
        let p = &self.params;
        Ok(self.potentials.delta_u(p, x)?
            + self.potentials.delta_eta(p, x, u)?
            + self.potentials.delta_phi(p, x, u)?)
    }

    fn check_voltage_monotone(&self) -> Result<()> {
        let p = &self.params;
        let u_top = 4.0 * p.capacity_ah;
        for k in 1..10 {
            let soc = k as f64 / 10.0;
            let x = p.rest_state(p.theta1 + soc * (p.theta2 - p.theta1));
            let mut prev = self.voltage(&x, 0.0)?;
            for j in 1..=40 {
                let u = u_top * j as f64 / 40.0;
                let v = self.voltage(&x, u)?;
                if !(v > prev) {
                    return Err(Error::config(format!(
                        "SPMeT voltage is not strictly increasing in the current at SOC {soc}, u = {u}"
                    )));
                }
                prev = v;
            }
        }
        Ok(())
    }
}

impl PlantModel for SpmetModel {
    type State = SpmetState;

    fn name(&self) -> &str {
        "spmet"
    }

    fn state_dim(&self) -> usize {
        5
    }

    fn output_count(&self) -> usize {
        2
    }

    fn step(&self, x: &SpmetState, u: f64) -> Result<SpmetState> {
        let p = &self.params;
        let k = p.surface_coupling();
        let gain = p.charge_gain();
        let eta = self.potentials.delta_eta(p, x, u)?;
        let phi = self.potentials.delta_phi(p, x, u)?;
        let neg = &p.negative;
        let pos = &p.positive;
        Ok(SpmetState {
            c_avg: x.c_avg + gain * u,
            c_surf: k * x.c_avg + (1.0 - k) * x.c_surf + gain / (1.0 - p.beta) * u,
            ce_neg: x.ce_neg
                + neg.relaxation(p.dt) * (p.ce0 - x.ce_neg)
                + neg.input_gain(p.dt, p.faraday) * u,
            ce_pos: x.ce_pos
                + pos.relaxation(p.dt) * (p.ce0 - x.ce_pos)
                + pos.input_gain(p.dt, p.faraday) * u,
            temperature: x.temperature - p.a * p.dt * (x.temperature - p.t_ambient)
                + p.b * p.dt * (eta + phi) * u,
        })
    }

    fn outputs_into(&self, x: &SpmetState, u: f64, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        out.push(u);
        out.push(self.voltage(x, u)?);
        Ok(())
    }

    fn output(&self, x: &SpmetState, i: usize, u: f64) -> Result<f64> {
        if i == 0 {
            Ok(u)
        } else {
            self.voltage(x, u)
        }
    }

    fn output_label(&self, i: usize) -> String {
        ["u", "V"][i].to_string()
    }

    fn state_vector(&self, x: &SpmetState) -> Vec<f64> {
        x.as_array().to_vec()
    }

    fn reward(&self, x: &SpmetState) -> f64 {
        x.c_avg
    }

    fn channel_names(&self) -> Vec<String> {
        ["V", "T", "SOC"].map(String::from).to_vec()
    }

    fn channels(&self, x: &SpmetState, u: f64) -> Result<Vec<f64>> {
        Ok(vec![self.voltage(x, u)?, x.temperature, self.soc(x)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::reference;
    use approx::assert_relative_eq;

    #[test]
    fn zero_current_keeps_average_concentration() {
        let m = SpmetModel::new(reference::spmet_params()).unwrap();
        let x = m.params().rest_state(0.3);
        let next = m.step(&x, 0.0).unwrap();
        assert_eq!(next.c_avg, x.c_avg);
    }

    #[test]
    fn constant_current_accumulates_linearly() {
        let m = SpmetModel::new(reference::spmet_params()).unwrap();
        let p = m.params().clone();
        let x0 = p.rest_state(0.1);
        let mut x = x0;
        let u = 12.5;
        for _ in 0..200 {
            x = m.step(&x, u).unwrap();
        }
        let expected = x0.c_avg + 200.0 * p.dt * u / (p.particle_volume * p.faraday);
        assert_relative_eq!(x.c_avg, expected, max_relative = 1e-12);
    }

    #[test]
    fn idle_cell_at_ambient_stays_at_ambient() {
        let m = SpmetModel::new(reference::spmet_params()).unwrap();
        let x = m.params().rest_state(0.4);
        let next = m.step(&x, 0.0).unwrap();
        assert_eq!(next.temperature, m.params().t_ambient);
    }

    #[test]
    fn soc_is_zero_at_lower_stoichiometry() {
        let p = reference::spmet_params();
        assert_eq!(p.soc(p.theta1 * p.c_max), 0.0);
        assert_relative_eq!(p.soc(p.theta2 * p.c_max), 1.0);
    }

    #[test]
    fn reference_capacity_gives_published_current_limit() {
        let p = reference::spmet_params();
        assert_relative_eq!(2.0 * p.capacity_ah, 56.3739, epsilon = 1e-12);
    }

    #[test]
    fn invalid_stoichiometry_window_is_rejected() {
        let mut p = reference::spmet_params();
        p.theta1 = 0.9;
        p.theta2 = 0.1;
        assert!(SpmetModel::new(p).is_err());
    }

    #[test]
    fn depleted_electrolyte_is_a_domain_error() {
        let m = SpmetModel::new(reference::spmet_params()).unwrap();
        let mut x = m.params().rest_state(0.2);
        x.ce_neg = -1.0;
        match m.voltage(&x, 1.0) {
            Err(Error::Domain { function, .. }) => assert_eq!(function, "delta_eta"),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn voltage_increases_with_current_on_operating_grid() {
        let m = SpmetModel::new(reference::spmet_params()).unwrap();
        let p = m.params();
        for soc in [0.0, 0.25, 0.5, 0.75, 0.95] {
            let mut x = p.rest_state(p.theta1 + soc * (p.theta2 - p.theta1));
            x.temperature = 35.0;
            for j in 0..60 {
                let u = j as f64;
                assert!(m.voltage(&x, u + 0.01).unwrap() > m.voltage(&x, u).unwrap());
            }
        }
    }
}
