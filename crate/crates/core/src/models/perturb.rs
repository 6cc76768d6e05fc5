//! Seeded multiplicative parameter perturbation.
//!
//! Each draw uses a ChaCha stream selected by `(seed, stream)`, so a draw
//! does not depend on how many others were made before it or on which
//! thread made it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ecm::EcmParams;
use crate::error::{Error, Result};

/// Number of factors drawn per perturbed parameter set.
pub const PERTURBED_FIELDS: usize = 8;

fn check_fraction(fraction: f64) -> Result<()> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::config(format!(
            "perturbation fraction must lie in [0, 1), got {fraction}"
        )));
    }
    Ok(())
}

/// Draws `N` independent factors uniform on `[1 - fraction, 1 + fraction]`.
pub fn uniform_factors<const N: usize>(fraction: f64, seed: u64, stream: u64) -> Result<[f64; N]> {
    check_fraction(fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut out = [1.0; N];
    if fraction > 0.0 {
        for f in &mut out {
            *f = rng.gen_range(1.0 - fraction..=1.0 + fraction);
        }
    }
    Ok(out)
}

/// Multiplies `R0, R1, R2, C1, C2, Q, a, b` by independent factors.
pub fn perturb_params(base: &EcmParams, fraction: f64, seed: u64) -> Result<EcmParams> {
    perturb_params_stream(base, fraction, seed, 0)
}

pub fn perturb_params_stream(
    base: &EcmParams,
    fraction: f64,
    seed: u64,
    stream: u64,
) -> Result<EcmParams> {
    let f: [f64; PERTURBED_FIELDS] = uniform_factors(fraction, seed, stream)?;
    let mut p = base.clone();
    p.r0 *= f[0];
    p.r1 *= f[1];
    p.r2 *= f[2];
    p.c1 *= f[3];
    p.c2 *= f[4];
    p.capacity *= f[5];
    p.a *= f[6];
    p.b *= f[7];
    p.validate()?;
    Ok(p)
}

/// Varies only the RC-link parameters `R1, R2, C1, C2`.
pub fn vary_rc_links(base: &EcmParams, fraction: f64, seed: u64, stream: u64) -> Result<EcmParams> {
    let f: [f64; 4] = uniform_factors(fraction, seed, stream)?;
    let mut p = base.clone();
    p.r1 *= f[0];
    p.r2 *= f[1];
    p.c1 *= f[2];
    p.c2 *= f[3];
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::reference;

    #[test]
    fn zero_fraction_is_identity() {
        let base = reference::ecm_params();
        for seed in 0..5 {
            assert_eq!(perturb_params(&base, 0.0, seed).unwrap(), base);
        }
    }

    #[test]
    fn fraction_bounds_every_factor() {
        let base = reference::ecm_params();
        for seed in 0..200 {
            let p = perturb_params(&base, 0.1, seed).unwrap();
            let pairs = [
                (p.r0, base.r0),
                (p.r1, base.r1),
                (p.r2, base.r2),
                (p.c1, base.c1),
                (p.c2, base.c2),
                (p.capacity, base.capacity),
                (p.a, base.a),
                (p.b, base.b),
            ];
            for (v, b) in pairs {
                assert!((v / b - 1.0).abs() <= 0.1 + 1e-12);
            }
            assert_eq!(p.ocv_offset, base.ocv_offset);
        }
    }

    #[test]
    fn factor_means_are_near_one() {
        let mut sums = [0.0; PERTURBED_FIELDS];
        let n = 10_000;
        for k in 0..n {
            let f: [f64; PERTURBED_FIELDS] = uniform_factors(0.1, 42, k).unwrap();
            for (s, v) in sums.iter_mut().zip(f) {
                *s += v;
            }
        }
        for s in sums {
            assert!((s / n as f64 - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn streams_are_independent_of_draw_order() {
        let base = reference::ecm_params();
        let a = perturb_params_stream(&base, 0.1, 9, 17).unwrap();
        let _ = perturb_params_stream(&base, 0.1, 9, 3).unwrap();
        let b = perturb_params_stream(&base, 0.1, 9, 17).unwrap();
        assert_eq!(a, b);
        let c = perturb_params_stream(&base, 0.1, 9, 18).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn out_of_range_fraction_is_a_config_error() {
        let base = reference::ecm_params();
        assert!(matches!(perturb_params(&base, 1.0, 0), Err(Error::Config(_))));
        assert!(matches!(perturb_params(&base, -0.1, 0), Err(Error::Config(_))));
    }
}
