//! Scalar linear test plants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::plant::PlantModel;

/// `x_{t+1} = decay * x_t + gain * u_t`, riding output `state_coeff * x + input_coeff * u`.
///
/// With `current_output` set, output 1 is the current itself and the linear
/// output is output 2; otherwise the linear output is the only one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPlant {
    pub decay: f64,
    pub gain: f64,
    pub state_coeff: f64,
    pub input_coeff: f64,
    pub current_output: bool,
}

impl LinearPlant {
    pub fn new(
        decay: f64,
        gain: f64,
        state_coeff: f64,
        input_coeff: f64,
        current_output: bool,
    ) -> Result<Self> {
        if !(input_coeff > 0.0) {
            return Err(Error::config(
                "linear plant output must be strictly increasing in the current",
            ));
        }
        if ![decay, gain, state_coeff].iter().all(|v| v.is_finite()) {
            return Err(Error::config("linear plant coefficients must be finite"));
        }
        Ok(Self {
            decay,
            gain,
            state_coeff,
            input_coeff,
            current_output,
        })
    }

    /// `x_{t+1} = x_t + u_t` with outputs `(u, x + u)`.
    pub fn integrator() -> Self {
        Self {
            decay: 1.0,
            gain: 1.0,
            state_coeff: 1.0,
            input_coeff: 1.0,
            current_output: true,
        }
    }

    pub fn riding_output(&self, x: f64, u: f64) -> f64 {
        self.state_coeff * x + self.input_coeff * u
    }
}

impl PlantModel for LinearPlant {
    type State = f64;

    fn name(&self) -> &str {
        "toy-linear"
    }

    fn state_dim(&self) -> usize {
        1
    }

    fn output_count(&self) -> usize {
        if self.current_output {
            2
        } else {
            1
        }
    }

    fn step(&self, x: &f64, u: f64) -> Result<f64> {
        Ok(self.decay * x + self.gain * u)
    }

    fn outputs_into(&self, x: &f64, u: f64, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        if self.current_output {
            out.push(u);
        }
        out.push(self.riding_output(*x, u));
        Ok(())
    }

    fn output(&self, x: &f64, i: usize, u: f64) -> Result<f64> {
        Ok(if self.current_output && i == 0 {
            u
        } else {
            self.riding_output(*x, u)
        })
    }

    fn output_label(&self, i: usize) -> String {
        if self.current_output && i == 0 { "u" } else { "y" }.to_string()
    }

    fn state_vector(&self, x: &f64) -> Vec<f64> {
        vec![*x]
    }

    fn reward(&self, x: &f64) -> f64 {
        *x
    }

    fn channel_names(&self) -> Vec<String> {
        vec!["x".into()]
    }

    fn channels(&self, x: &f64, _u: f64) -> Result<Vec<f64>> {
        Ok(vec![*x])
    }
}
