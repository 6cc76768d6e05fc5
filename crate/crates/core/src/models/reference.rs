//! Built-in parameter sets used by the shipped scenarios.

use super::ecm::{EcmParams, VoltageOutput};
use super::pack::{PackParams, PairMode};
use super::spmet::{ElectrolyteRegion, SpmetParams, FARADAY};

/// Capacity in A h; twice this is the 56.3739 A current limit.
pub const SPMET_CAPACITY_AH: f64 = 28.18695;

pub fn spmet_params() -> SpmetParams {
    let c_max = 30555.0;
    let (theta1, theta2) = (0.1, 0.9);
    SpmetParams {
        dt: 1.0,
        particle_volume: SpmetParams::particle_volume_for(SPMET_CAPACITY_AH, c_max, theta1, theta2),
        faraday: FARADAY,
        hydraulic_g: 1.0,
        beta: 0.5,
        tau: 100.0,
        negative: ElectrolyteRegion {
            diffusivity: 2.7e-10,
            thickness: 8.8e-5,
            porosity: 0.485,
            n1: 3100.0,
            n2: 0.135,
            n3: 1.0,
            volume: 2.0e-5,
        },
        positive: ElectrolyteRegion {
            diffusivity: 2.7e-10,
            thickness: 8.0e-5,
            porosity: 0.385,
            n1: 2850.0,
            n2: 0.0965,
            n3: 1.0,
            volume: 2.0e-5,
        },
        ce0: 1200.0,
        a: 1.0 / 1000.0,
        b: 1.1e-3,
        t_ambient: 25.0,
        c_max,
        theta1,
        theta2,
        capacity_ah: SPMET_CAPACITY_AH,
    }
}

/// Cell with a 4.2 V limit reached at SOC 0.55 under zero polarization,
/// voltage expressed in current units (`K x + u`).
pub fn ecm_params() -> EcmParams {
    EcmParams {
        r0: 0.003,
        r1: 0.002,
        r2: 0.003,
        c1: 5000.0,
        c2: 30000.0,
        capacity: 36000.0,
        a: 1.0 / 800.0,
        b: 3e-3,
        t_ambient: 25.0,
        ocv_offset: 4.2 - 0.3 * 0.55 - 0.24,
        ocv_slope: 0.3,
        dt: 1.0,
        voltage_output: VoltageOutput::Normalized,
    }
}

pub fn pack_params() -> PackParams {
    PackParams {
        cells: 100,
        base: EcmParams {
            b: 6e-3,
            ..ecm_params()
        },
        rc_variation: 0.5,
        variation_seed: 11,
        k1: 2e-4,
        k2: 2e-4,
        pair_mode: PairMode::MaxMinusMin,
    }
}
