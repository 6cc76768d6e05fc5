//! Per-step optimal cost of the online problem.
//!
//! With the active index and the history statistics frozen, the PI law maps
//! the gain box affinely onto a current interval. The best achievable
//! one-step cost is the squared active error at the current in that interval
//! closest to the riding current.

use crate::controller::{ConstraintSpec, GainBox, HistoryStats};
use crate::error::Result;
use crate::plant::PlantModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalStep {
    pub j_star: f64,
    pub u_star: f64,
    /// Minimum-norm gains producing `u_star`.
    pub theta_star: [f64; 2],
    /// Both statistics were zero, so every gain gives `u = 0`.
    pub unreachable: bool,
}

/// Image `[u_lo, u_hi]` of the gain box under `theta -> theta . s`.
pub fn current_interval(gain_box: &GainBox, stats: &HistoryStats) -> (f64, f64) {
    let corners = gain_box.corners().map(|c| stats.current(c));
    let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Minimum-norm point of `{theta in box : theta . s = u}`.
pub fn min_norm_gains(gain_box: &GainBox, stats: &HistoryStats, u: f64) -> [f64; 2] {
    let s = stats.law_gradient();
    let norm2 = s[0] * s[0] + s[1] * s[1];
    if norm2 == 0.0 {
        return gain_box.project([0.0, 0.0]);
    }
    let p0 = [u * s[0] / norm2, u * s[1] / norm2];
    let d = [-s[1], s[0]];
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for k in 0..2 {
        if d[k] == 0.0 {
            continue;
        }
        let a = (gain_box.lo[k] - p0[k]) / d[k];
        let b = (gain_box.hi[k] - p0[k]) / d[k];
        lo = lo.max(a.min(b));
        hi = hi.min(a.max(b));
    }
    let tau = if lo <= hi { 0.0f64.clamp(lo, hi) } else { 0.5 * (lo + hi) };
    gain_box.project([p0[0] + tau * d[0], p0[1] + tau * d[1]])
}

/// `J*_t = min over theta in the box of (gamma_i (ybar_i - h_i(x, C(H, theta))))^2`.
#[allow(clippy::too_many_arguments)]
pub fn per_step_optimal_cost<M: PlantModel>(
    model: &M,
    x: &M::State,
    spec: &ConstraintSpec,
    stats: &HistoryStats,
    gain_box: &GainBox,
    i_star: usize,
    tol_u: f64,
) -> Result<OptimalStep> {
    let gamma = spec.weights()[i_star];
    let ybar = spec.bounds()[i_star];
    let cost = |u: f64| -> Result<f64> {
        let e = gamma * (ybar - model.output(x, i_star, u)?);
        Ok(e * e)
    };
    if stats.last_error == 0.0 && stats.error_sum == 0.0 {
        return Ok(OptimalStep {
            j_star: cost(0.0)?,
            u_star: 0.0,
            theta_star: gain_box.project([0.0, 0.0]),
            unreachable: true,
        });
    }
    let (u_lo, u_hi) = current_interval(gain_box, stats);
    let h = |u: f64| model.output(x, i_star, u);
    let mut u_star = if h(u_lo)? >= ybar {
        u_lo
    } else if h(u_hi)? <= ybar {
        u_hi
    } else {
        let (mut lo, mut hi) = (u_lo, u_hi);
        while hi - lo > tol_u {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if h(mid)? <= ybar {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        if cost(lo)? <= cost(hi)? {
            lo
        } else {
            hi
        }
    };
    if u_lo < 0.0 {
        // outputs need not be monotone for discharging currents (Joule heat)
        let (u, j) = search_unimodal(&cost, u_lo, u_hi.min(0.0), tol_u)?;
        if j < cost(u_star)? {
            u_star = u;
        }
    }
    Ok(OptimalStep {
        j_star: cost(u_star)?,
        u_star,
        theta_star: min_norm_gains(gain_box, stats, u_star),
        unreachable: false,
    })
}

/// Grid scan followed by golden-section refinement around the best point.
fn search_unimodal(
    cost: &impl Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    const GRID: usize = 64;
    let step = (hi - lo) / GRID as f64;
    let mut best = (lo, cost(lo)?);
    for k in 1..=GRID {
        let u = lo + step * k as f64;
        let j = cost(u)?;
        if j < best.1 {
            best = (u, j);
        }
    }
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - r * (b - a), a + r * (b - a));
    let (mut jc, mut jd) = (cost(c)?, cost(d)?);
    while b - a > tol.max(1e-12 * b.abs().max(a.abs())) {
        if jc <= jd {
            b = d;
            d = c;
            jd = jc;
            c = b - r * (b - a);
            jc = cost(c)?;
        } else {
            a = c;
            c = d;
            jc = jd;
            d = a + r * (b - a);
            jd = cost(d)?;
        }
    }
    for (u, j) in [(c, jc), (d, jd)] {
        if j < best.1 {
            best = (u, j);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::toy::LinearPlant;

    fn stats(last: f64, sum: f64) -> HistoryStats {
        HistoryStats {
            last_error: last,
            error_sum: sum,
        }
    }

    #[test]
    fn reachable_riding_current_gives_zero_cost() {
        let plant = LinearPlant::integrator();
        let spec = ConstraintSpec::unweighted(vec![10.0, 5.0]).unwrap();
        let b = GainBox::default();
        let opt = per_step_optimal_cost(&plant, &2.0, &spec, &stats(1.0, 3.0), &b, 1, 1e-12).unwrap();
        assert!(opt.j_star < 1e-18);
        assert!((opt.u_star - 3.0).abs() < 1e-9);
        let s = stats(1.0, 3.0);
        assert!((s.current(opt.theta_star) - 3.0).abs() < 1e-9);
        assert!(b.contains(opt.theta_star));
    }

    #[test]
    fn single_point_box_reproduces_realized_cost() {
        let plant = LinearPlant::integrator();
        let spec = ConstraintSpec::unweighted(vec![10.0, 5.0]).unwrap();
        let b = GainBox::new([0.4, 0.2], [0.4, 0.2]).unwrap();
        let s = stats(2.0, 5.0);
        let u = s.current([0.4, 0.2]);
        let e = 5.0 - (1.0 + u);
        let opt = per_step_optimal_cost(&plant, &1.0, &spec, &s, &b, 1, 1e-12).unwrap();
        assert_eq!(opt.j_star, e * e);
    }

    #[test]
    fn empty_history_is_flagged() {
        let plant = LinearPlant::integrator();
        let spec = ConstraintSpec::unweighted(vec![10.0, 5.0]).unwrap();
        let opt = per_step_optimal_cost(&plant, &1.0, &spec, &stats(0.0, 0.0), &GainBox::default(), 1, 1e-12)
            .unwrap();
        assert!(opt.unreachable);
        assert_eq!(opt.j_star, 16.0);
    }

    #[test]
    fn out_of_reach_target_uses_nearest_end() {
        let plant = LinearPlant::integrator();
        let spec = ConstraintSpec::unweighted(vec![10.0, 50.0]).unwrap();
        let b = GainBox::default();
        let s = stats(1.0, 1.0);
        let opt = per_step_optimal_cost(&plant, &0.0, &spec, &s, &b, 1, 1e-12).unwrap();
        assert_eq!(opt.u_star, 11.0);
        assert_eq!(opt.j_star, 39.0 * 39.0);
    }

    /// `h(u) = u^2` with a bound of 4: not monotone for `u < 0`.
    #[derive(Debug)]
    struct Square;

    impl PlantModel for Square {
        type State = f64;
        fn name(&self) -> &str {
            "square"
        }
        fn state_dim(&self) -> usize {
            1
        }
        fn output_count(&self) -> usize {
            1
        }
        fn step(&self, x: &f64, _u: f64) -> Result<f64> {
            Ok(*x)
        }
        fn outputs_into(&self, _x: &f64, u: f64, out: &mut Vec<f64>) -> Result<()> {
            out.clear();
            out.push(u * u);
            Ok(())
        }
        fn state_vector(&self, x: &f64) -> Vec<f64> {
            vec![*x]
        }
        fn reward(&self, _x: &f64) -> f64 {
            0.0
        }
    }

    #[test]
    fn discharging_side_is_searched_without_monotonicity() {
        let spec = ConstraintSpec::unweighted(vec![4.0]).unwrap();
        // interval [-3, 1]: the monotone search alone would stop at u = -3
        let b = GainBox::new([-3.0, 0.0], [1.0, 0.0]).unwrap();
        let opt = per_step_optimal_cost(&Square, &0.0, &spec, &stats(1.0, 0.0), &b, 0, 1e-12).unwrap();
        assert!(opt.j_star < 1e-12, "{opt:?}");
        assert!((opt.u_star + 2.0).abs() < 1e-6);
    }

    #[test]
    fn min_norm_gains_lie_on_the_level_line() {
        let b = GainBox::default();
        let s = stats(2.0, -1.0);
        for u in [-1.0, 0.0, 0.5, 3.0] {
            let th = min_norm_gains(&b, &s, u);
            assert!(b.contains(th));
            assert!((s.current(th) - u).abs() < 1e-12, "u = {u}");
        }
    }
}
