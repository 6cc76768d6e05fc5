//! Model-based ideal bang-ride protocol.
//!
//! For each constraint the riding current `K_i(x)` solves `h_i(x, u) = ybar_i`
//! by bisection on `[0, u_hi]`; the applied current is the smallest of them.

use serde::{Deserialize, Serialize};

use crate::controller::{active_index, constraint_errors_into, ConstraintSpec};
use crate::error::{Error, Result};
use crate::plant::{
    base_meta, check_finite_outputs, check_finite_state, PlantModel, RunOptions, StepRecord,
    Trajectory,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootConfig {
    /// Upper end of the search bracket [A].
    pub u_hi: f64,
    pub tol_u: f64,
    /// Residual tolerance in output units.
    pub tol_y: f64,
    pub max_iterations: usize,
}

impl RootConfig {
    /// Defaults for a current limit: bracket `[0, 2 u_max]`, `tol_u = 1e-9`,
    /// `tol_y = 1e-6`.
    pub fn for_current_limit(u_max: f64) -> Self {
        Self {
            u_hi: 2.0 * u_max,
            tol_u: 1e-9,
            tol_y: 1e-6,
            max_iterations: 200,
        }
    }

    pub fn validate(&self, u_max: f64) -> Result<()> {
        if !(self.tol_u > 0.0 && self.tol_y > 0.0) {
            return Err(Error::config("root tolerances must be positive"));
        }
        if !(self.u_hi >= u_max) {
            return Err(Error::config(format!(
                "root bracket upper end {} is below the current limit {u_max}",
                self.u_hi
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("root search needs at least one iteration"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeedbackKind {
    Root,
    /// `h_i(x, u_hi) < ybar_i`: no riding current in the bracket.
    Unbounded,
    /// `h_i(x, 0) > ybar_i`: violated even at zero current.
    BelowBracket,
}

/// Riding current of one constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackValue {
    /// `f64::INFINITY` when unbounded.
    pub value: f64,
    /// `h_i(x, value) - ybar_i`, `NaN` when unbounded.
    pub residual: f64,
    pub kind: FeedbackKind,
}

impl FeedbackValue {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }
}

/// Solves `h_i(x, u) = ybar` for `u` in `[0, cfg.u_hi]`.
///
/// The returned root is the lower end of the final bracket, so
/// `h_i(x, value) <= ybar` always holds and the residual is within `tol_y`.
pub fn solve_constraint<M: PlantModel>(
    model: &M,
    x: &M::State,
    i: usize,
    ybar: f64,
    cfg: &RootConfig,
) -> Result<FeedbackValue> {
    let h = |u: f64| model.output(x, i, u);
    let mut lo = 0.0;
    let mut hi = cfg.u_hi;
    let mut h_lo = h(lo)?;
    let mut h_hi = h(hi)?;
    if h_hi < ybar {
        return Ok(FeedbackValue {
            value: f64::INFINITY,
            residual: f64::NAN,
            kind: FeedbackKind::Unbounded,
        });
    }
    if h_lo > ybar {
        return Ok(FeedbackValue {
            value: 0.0,
            residual: h_lo - ybar,
            kind: FeedbackKind::BelowBracket,
        });
    }
    for _ in 0..cfg.max_iterations {
        if hi - lo <= cfg.tol_u && ybar - h_lo <= cfg.tol_y {
            return Ok(FeedbackValue {
                value: lo,
                residual: h_lo - ybar,
                kind: FeedbackKind::Root,
            });
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let h_mid = h(mid)?;
        if h_mid <= ybar {
            lo = mid;
            h_lo = h_mid;
        } else {
            hi = mid;
            h_hi = h_mid;
        }
    }
    if ybar - h_lo <= cfg.tol_y {
        return Ok(FeedbackValue {
            value: lo,
            residual: h_lo - ybar,
            kind: FeedbackKind::Root,
        });
    }
    Err(Error::RootNotConverged {
        output: i + 1,
        iterations: cfg.max_iterations,
        lo,
        hi,
        residual_lo: h_lo - ybar,
        residual_hi: h_hi - ybar,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub u: f64,
    /// Constraint attaining the minimum (lowest index on ties).
    pub index: usize,
    pub values: Vec<FeedbackValue>,
}

/// `u* = min_i K_i(x)`.
pub fn selector<M: PlantModel>(
    model: &M,
    x: &M::State,
    spec: &ConstraintSpec,
    cfg: &RootConfig,
) -> Result<Selection> {
    let values = spec
        .bounds()
        .iter()
        .enumerate()
        .map(|(i, &ybar)| solve_constraint(model, x, i, ybar, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut index = 0;
    for (i, v) in values.iter().enumerate() {
        if v.value < values[index].value {
            index = i;
        }
    }
    let u = values[index].value;
    if !u.is_finite() {
        return Err(Error::config(
            "no constraint has a riding current in the bracket; is output 1 the current?",
        ));
    }
    Ok(Selection { u, index, values })
}

/// Runs the ideal protocol for `t_f + 1` steps.
///
/// `i_star` records the constraint whose riding current was applied; the
/// parameter and step-size fields are left empty.
pub fn oracle_trajectory<M: PlantModel>(
    model: &M,
    spec: &ConstraintSpec,
    t_f: usize,
    x0: M::State,
    cfg: &RootConfig,
) -> Result<Trajectory> {
    oracle_trajectory_with(model, spec, t_f, x0, cfg, &RunOptions::default())
}

pub fn oracle_trajectory_with<M: PlantModel>(
    model: &M,
    spec: &ConstraintSpec,
    t_f: usize,
    x0: M::State,
    cfg: &RootConfig,
    opts: &RunOptions,
) -> Result<Trajectory> {
    if model.output_count() != spec.len() {
        return Err(Error::config(format!(
            "model {} has {} outputs but {} constraints are configured",
            model.name(),
            model.output_count(),
            spec.len()
        )));
    }
    cfg.validate(spec.bounds()[0])?;
    let meta = base_meta(model, "oracle");
    let mut x = x0;
    check_finite_state(model, 0, &x)?;
    let mut records = Vec::with_capacity(t_f + 1);
    let mut y = Vec::with_capacity(spec.len());
    for t in 0..=t_f {
        let sel = selector(model, &x, spec, cfg)?;
        let u = sel.u;
        model.outputs_into(&x, u, &mut y)?;
        check_finite_outputs(t, u, &y, opts.divergence_limit)?;
        let channels = model.channels(&x, u)?;
        let mut e = Vec::with_capacity(y.len());
        constraint_errors_into(spec, &y, &mut e)?;
        let i_star = sel.index;
        let next = model.step(&x, u)?;
        check_finite_state(model, t + 1, &next)?;
        records.push(StepRecord {
            t,
            u,
            y: y.clone(),
            j: e[i_star] * e[i_star],
            e,
            i_star,
            theta: None,
            alpha: None,
            j_star: Some(0.0),
            channels,
        });
        x = next;
    }
    Ok(Trajectory { meta, records })
}

/// Largest grid current whose outputs all stay within `bounds + tol_y`.
///
/// Brute-force reference for the selector; returns `None` when even `u = 0`
/// is infeasible.
pub fn grid_feasible_max<M: PlantModel>(
    model: &M,
    x: &M::State,
    spec: &ConstraintSpec,
    u_max: f64,
    points: usize,
    tol_y: f64,
) -> Result<Option<f64>> {
    let mut best = None;
    let mut y = Vec::new();
    for k in 0..points {
        let u = u_max * k as f64 / (points - 1) as f64;
        model.outputs_into(x, u, &mut y)?;
        if y.iter().zip(spec.bounds()).all(|(y, b)| *y <= b + tol_y) {
            best = Some(u);
        } else {
            break;
        }
    }
    Ok(best)
}

/// Index of the minimum weighted error, for comparison with the selector.
pub fn error_argmin<M: PlantModel>(
    model: &M,
    x: &M::State,
    spec: &ConstraintSpec,
    u: f64,
) -> Result<usize> {
    let y = model.outputs(x, u)?;
    let mut e = Vec::new();
    constraint_errors_into(spec, &y, &mut e)?;
    Ok(active_index(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::toy::LinearPlant;

    #[derive(Debug)]
    struct Saturating;

    impl PlantModel for Saturating {
        type State = f64;
        fn name(&self) -> &str {
            "tanh"
        }
        fn state_dim(&self) -> usize {
            1
        }
        fn output_count(&self) -> usize {
            2
        }
        fn step(&self, x: &f64, _u: f64) -> Result<f64> {
            Ok(*x)
        }
        fn outputs_into(&self, x: &f64, u: f64, out: &mut Vec<f64>) -> Result<()> {
            out.clear();
            out.push(u);
            out.push(u.tanh() - x);
            Ok(())
        }
        fn state_vector(&self, x: &f64) -> Vec<f64> {
            vec![*x]
        }
        fn reward(&self, x: &f64) -> f64 {
            *x
        }
    }

    #[test]
    fn current_constraint_rides_at_the_limit() {
        let plant = LinearPlant::integrator();
        let cfg = RootConfig::for_current_limit(56.3739);
        let k = solve_constraint(&plant, &0.0, 0, 56.3739, &cfg).unwrap();
        assert!((k.value - 56.3739).abs() <= 1e-9);
        assert_eq!(k.kind, FeedbackKind::Root);
    }

    #[test]
    fn affine_output_root() {
        let plant = LinearPlant::integrator();
        let cfg = RootConfig::for_current_limit(10.0);
        let k = solve_constraint(&plant, &1.0, 1, 4.2, &cfg).unwrap();
        assert!((k.value - 3.2).abs() <= 1e-9);
        assert!(k.residual <= 0.0 && k.residual >= -1e-6);
    }

    #[test]
    fn unreachable_bound_is_unbounded() {
        let cfg = RootConfig::for_current_limit(5.0);
        let k = solve_constraint(&Saturating, &0.0, 1, 2.0, &cfg).unwrap();
        assert_eq!(k.kind, FeedbackKind::Unbounded);
        assert!(k.value.is_infinite());
    }

    #[test]
    fn violated_at_zero_is_flagged() {
        let cfg = RootConfig::for_current_limit(5.0);
        let k = solve_constraint(&Saturating, &-3.0, 1, 2.0, &cfg).unwrap();
        assert_eq!(k.kind, FeedbackKind::BelowBracket);
        assert_eq!(k.value, 0.0);
    }

    #[test]
    fn selector_takes_the_smallest_riding_current() {
        let spec = ConstraintSpec::unweighted(vec![5.0, 0.5]).unwrap();
        let cfg = RootConfig::for_current_limit(5.0);
        let sel = selector(&Saturating, &0.0, &spec, &cfg).unwrap();
        assert_eq!(sel.index, 1);
        assert!((sel.u - 0.5f64.atanh()).abs() < 1e-8);

        let spec = ConstraintSpec::unweighted(vec![5.0, 3.0]).unwrap();
        let sel = selector(&Saturating, &0.0, &spec, &cfg).unwrap();
        assert_eq!(sel.index, 0);
        assert!((sel.u - 5.0).abs() < 1e-8);
    }

    #[test]
    fn integrator_oracle_matches_closed_form() {
        let plant = LinearPlant::integrator();
        let spec = ConstraintSpec::unweighted(vec![10.0, 5.0]).unwrap();
        let cfg = RootConfig::for_current_limit(10.0);
        let traj = oracle_trajectory(&plant, &spec, 20, 0.0, &cfg).unwrap();
        let mut x = 0.0;
        for r in &traj.records {
            let expected = f64::min(10.0, 5.0 - x);
            assert!((r.u - expected).abs() < 1e-8, "t = {}", r.t);
            x += r.u;
        }
    }

    #[test]
    fn bad_bracket_is_rejected() {
        let plant = LinearPlant::integrator();
        let spec = ConstraintSpec::unweighted(vec![10.0, 5.0]).unwrap();
        let mut cfg = RootConfig::for_current_limit(10.0);
        cfg.u_hi = 5.0;
        assert!(matches!(
            oracle_trajectory(&plant, &spec, 3, 0.0, &cfg),
            Err(Error::Config(_))
        ));
    }
}
