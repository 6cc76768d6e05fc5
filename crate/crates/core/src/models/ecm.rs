//! Two-time-constant equivalent circuit cell with a lumped thermal state.
//!
//! Continuous dynamics, discretized with forward Euler at step `dt`:
//!
//! ```text
//! v1'  = -v1 / (R1 C1) + u / C1
//! v2'  = -v2 / (R2 C2) + u / C2
//! SOC' =  u / Q
//! T'   = -a (T - Ta) + b u (R0 u + v1 + v2)
//! ```
//!
//! Outputs are the current, the terminal voltage, and the one-step-ahead
//! temperature rise over ambient.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::PlantModel;

/// How the voltage constraint is expressed as an output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum VoltageOutput {
    /// Terminal voltage in volts, `v_ocv(SOC) + v1 + v2 + R0 u`.
    #[default]
    Terminal,
    /// Terminal voltage above the zero-SOC open-circuit voltage, divided by
    /// `R0`: `K x + u` with unit slope in the current.
    Normalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcmParams {
    /// Series resistance [Ohm].
    pub r0: f64,
    pub r1: f64,
    pub r2: f64,
    /// RC-link capacitances [F].
    pub c1: f64,
    pub c2: f64,
    /// Capacity [A s].
    pub capacity: f64,
    /// Heat-exchange rate with ambient [1/s].
    pub a: f64,
    /// Inverse heat capacity [K/J].
    pub b: f64,
    /// Ambient temperature [degC].
    pub t_ambient: f64,
    /// Open-circuit voltage at SOC = 0 [V].
    pub ocv_offset: f64,
    /// Open-circuit voltage slope [V per unit SOC].
    pub ocv_slope: f64,
    /// Sampling time [s].
    pub dt: f64,
    #[serde(default)]
    pub voltage_output: VoltageOutput,
}

impl EcmParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r0", self.r0),
            ("r1", self.r1),
            ("r2", self.r2),
            ("c1", self.c1),
            ("c2", self.c2),
            ("capacity", self.capacity),
            ("a", self.a),
            ("b", self.b),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!(
                    "ECM parameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("t_ambient", self.t_ambient),
            ("ocv_offset", self.ocv_offset),
            ("ocv_slope", self.ocv_slope),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("ECM parameter {name} is not finite")));
            }
        }
        if self.ocv_slope < 0.0 {
            return Err(Error::config("open-circuit voltage must not decrease with SOC"));
        }
        for (name, f) in [
            ("RC link 1", self.rc1_retention()),
            ("RC link 2", self.rc2_retention()),
            ("thermal", self.thermal_retention()),
        ] {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::config(format!(
                    "{name} discretization factor {f} is outside (0, 1); reduce dt"
                )));
            }
        }
        Ok(())
    }

    pub fn rc1_retention(&self) -> f64 {
        1.0 - self.dt / (self.r1 * self.c1)
    }

    pub fn rc2_retention(&self) -> f64 {
        1.0 - self.dt / (self.r2 * self.c2)
    }

    pub fn thermal_retention(&self) -> f64 {
        1.0 - self.a * self.dt
    }

    /// Readout row `C` with `C x = v1 + v2`, the state part of the dynamic
    /// voltage that multiplies the current in the heat term.
    pub fn heat_row(&self) -> [f64; 4] {
        [1.0, 1.0, 0.0, 0.0]
    }

    /// Readout row `K` of the voltage output `K x + (input term)`.
    pub fn voltage_row(&self) -> [f64; 4] {
        match self.voltage_output {
            VoltageOutput::Terminal => [1.0, 1.0, self.ocv_slope, 0.0],
            VoltageOutput::Normalized => {
                let s = 1.0 / self.r0;
                [s, s, self.ocv_slope * s, 0.0]
            }
        }
    }

    /// Voltage output bound corresponding to a terminal-voltage limit.
    pub fn voltage_bound(&self, v_max: f64) -> f64 {
        match self.voltage_output {
            VoltageOutput::Terminal => v_max,
            VoltageOutput::Normalized => (v_max - self.ocv_offset) / self.r0,
        }
    }

    pub fn ocv(&self, soc: f64) -> f64 {
        self.ocv_offset + self.ocv_slope * soc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcmState {
    pub v1: f64,
    pub v2: f64,
    pub soc: f64,
    /// Temperature above ambient [K].
    pub dtemp: f64,
}

/// Upper end of the SOC range that is still considered representable.
pub const SOC_REPORT_MAX: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SocStatus {
    Normal,
    /// Above full charge; simulated but flagged.
    Overcharged,
    OutOfRange,
}

impl EcmState {
    pub fn at_rest(soc: f64) -> Self {
        Self {
            v1: 0.0,
            v2: 0.0,
            soc,
            dtemp: 0.0,
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.v1, self.v2, self.soc, self.dtemp]
    }

    pub fn soc_status(&self) -> SocStatus {
        if !(0.0..=SOC_REPORT_MAX).contains(&self.soc) {
            SocStatus::OutOfRange
        } else if self.soc > 1.0 {
            SocStatus::Overcharged
        } else {
            SocStatus::Normal
        }
    }
}

fn dot(row: [f64; 4], x: [f64; 4]) -> f64 {
    row.iter().zip(x).map(|(r, x)| r * x).sum()
}

pub(crate) fn ecm_step(p: &EcmParams, x: &EcmState, u: f64) -> EcmState {
    EcmState {
        v1: p.rc1_retention() * x.v1 + p.dt / p.c1 * u,
        v2: p.rc2_retention() * x.v2 + p.dt / p.c2 * u,
        soc: x.soc + p.dt / p.capacity * u,
        dtemp: temperature_rise(p, x, u),
    }
}

/// `T_{t+1} - Ta = (1 - a dt) [x]_4 + b dt (C x) u + b dt R0 u^2`.
pub(crate) fn temperature_rise(p: &EcmParams, x: &EcmState, u: f64) -> f64 {
    let cx = dot(p.heat_row(), x.as_array());
    p.thermal_retention() * x.dtemp + p.b * p.dt * cx * u + p.b * p.dt * p.r0 * u * u
}

pub(crate) fn voltage_output(p: &EcmParams, x: &EcmState, u: f64) -> f64 {
    let kx = dot(p.voltage_row(), x.as_array());
    match p.voltage_output {
        VoltageOutput::Terminal => p.ocv_offset + kx + p.r0 * u,
        VoltageOutput::Normalized => kx + u,
    }
}

pub(crate) fn terminal_voltage(p: &EcmParams, x: &EcmState, u: f64) -> f64 {
    p.ocv(x.soc) + x.v1 + x.v2 + p.r0 * u
}

#[derive(Debug, Clone, PartialEq)]
pub struct EcmModel {
    params: EcmParams,
}

impl EcmModel {
    pub fn new(params: EcmParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &EcmParams {
        &self.params
    }
}

impl PlantModel for EcmModel {
    type State = EcmState;

    fn name(&self) -> &str {
        "ecm"
    }

    fn state_dim(&self) -> usize {
        4
    }

    fn output_count(&self) -> usize {
        3
    }

    fn step(&self, x: &EcmState, u: f64) -> Result<EcmState> {
        Ok(ecm_step(&self.params, x, u))
    }

    fn outputs_into(&self, x: &EcmState, u: f64, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        out.push(u);
        out.push(voltage_output(&self.params, x, u));
        out.push(temperature_rise(&self.params, x, u));
        Ok(())
    }

    fn output(&self, x: &EcmState, i: usize, u: f64) -> Result<f64> {
        Ok(match i {
            0 => u,
            1 => voltage_output(&self.params, x, u),
            _ => temperature_rise(&self.params, x, u),
        })
    }

    fn output_label(&self, i: usize) -> String {
        ["u", "V", "dT_next"][i].to_string()
    }

    fn state_vector(&self, x: &EcmState) -> Vec<f64> {
        x.as_array().to_vec()
    }

    fn reward(&self, x: &EcmState) -> f64 {
        x.soc
    }

    fn channel_names(&self) -> Vec<String> {
        ["V", "v_dyn", "T", "SOC"].map(String::from).to_vec()
    }

    fn channels(&self, x: &EcmState, u: f64) -> Result<Vec<f64>> {
        let p = &self.params;
        Ok(vec![
            terminal_voltage(p, x, u),
            p.r0 * u + x.v1 + x.v2,
            p.t_ambient + x.dtemp,
            x.soc,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn params() -> EcmParams {
        EcmParams {
            r0: 0.02,
            r1: 0.015,
            r2: 0.02,
            c1: 700.0,
            c2: 5000.0,
            capacity: 9000.0,
            a: 1.0 / 800.0,
            b: 2e-3,
            t_ambient: 25.0,
            ocv_offset: 3.5,
            ocv_slope: 0.5,
            dt: 1.0,
            voltage_output: VoltageOutput::Terminal,
        }
    }

    #[test]
    fn zero_current_decays_temperature_geometrically() {
        let p = params();
        let x = EcmState {
            dtemp: 4.0,
            ..EcmState::at_rest(0.3)
        };
        let next = ecm_step(&p, &x, 0.0);
        assert_relative_eq!(next.dtemp, 4.0 * (1.0 - p.a * p.dt));
        assert_eq!(next.soc, 0.3);
    }

    #[test]
    fn first_link_settles_at_r1_times_current() {
        let p = params();
        let mut x = EcmState::at_rest(0.2);
        for _ in 0..20_000 {
            x = ecm_step(&p, &x, 2.0);
        }
        assert_relative_eq!(x.v1, p.r1 * 2.0, epsilon = 1e-12);
        assert_relative_eq!(x.v2, p.r2 * 2.0, epsilon = 1e-9);
    }

    #[test]
    fn normalized_voltage_equals_current_at_zero_state() {
        let mut p = params();
        p.voltage_output = VoltageOutput::Normalized;
        let zero = EcmState::at_rest(0.0);
        for u in [0.0, 1.5, 7.0] {
            assert_relative_eq!(voltage_output(&p, &zero, u), u);
        }
    }

    #[test]
    fn normalized_voltage_is_terminal_voltage_in_current_units() {
        let mut p = params();
        p.voltage_output = VoltageOutput::Normalized;
        let x = EcmState {
            v1: 0.01,
            v2: 0.03,
            soc: 0.4,
            dtemp: 1.0,
        };
        let scaled = voltage_output(&p, &x, 2.5);
        let v = terminal_voltage(&p, &x, 2.5);
        assert_relative_eq!(scaled, (v - p.ocv_offset) / p.r0, epsilon = 1e-9);
        assert_relative_eq!(p.voltage_bound(v), scaled, epsilon = 1e-9);
    }

    #[test]
    fn temperature_output_is_the_next_temperature() {
        let p = params();
        let x = EcmState {
            v1: 0.02,
            v2: 0.05,
            soc: 0.5,
            dtemp: 2.0,
        };
        let model = EcmModel::new(p).unwrap();
        let y = model.outputs(&x, 3.0).unwrap();
        let next = model.step(&x, 3.0).unwrap();
        assert_eq!(y[2], next.dtemp);
        assert_eq!(y[0], 3.0);
    }

    #[test]
    fn unstable_discretization_is_rejected() {
        let mut p = params();
        p.dt = 20.0; // R1 C1 = 10.5 s
        assert!(EcmModel::new(p).is_err());
        let mut p = params();
        p.r2 = -1.0;
        assert!(EcmModel::new(p).is_err());
    }

    #[test]
    fn overcharge_is_flagged_not_rejected() {
        assert_eq!(EcmState::at_rest(0.5).soc_status(), SocStatus::Normal);
        assert_eq!(EcmState::at_rest(1.2).soc_status(), SocStatus::Overcharged);
        assert_eq!(EcmState::at_rest(1.6).soc_status(), SocStatus::OutOfRange);
    }
}
