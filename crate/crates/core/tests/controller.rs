use bangride::{
    active_index, constraint_errors, run_closed_loop, step_size, ConstraintSpec, ControllerConfig,
    ControllerState, GainBox, RunOptions,
};
use bangride::models::LinearPlant;
use proptest::prelude::*;

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn gain_box() -> impl Strategy<Value = GainBox> {
    (-5.0..5.0f64, -5.0..5.0f64, 0.0..4.0f64, 0.0..4.0f64)
        .prop_map(|(a, b, w, h)| GainBox::new([a, b], [a + w, b + h]).unwrap())
}

proptest! {
    #[test]
    fn projection_is_non_expansive(b in gain_box(), p in prop::array::uniform2(-50.0..50.0f64),
                                   q in prop::array::uniform2(-50.0..50.0f64)) {
        prop_assert!(dist(b.project(p), b.project(q)) <= dist(p, q) + 1e-12);
    }

    #[test]
    fn projection_lands_in_box_and_fixes_interior(b in gain_box(), p in prop::array::uniform2(-50.0..50.0f64)) {
        let pp = b.project(p);
        prop_assert!(b.contains(pp));
        prop_assert_eq!(b.project(pp), pp);
    }

    #[test]
    fn errors_match_definition(vals in prop::collection::vec((0.1..10.0f64, 0.1..100.0f64, -20.0..20.0f64), 1..6)) {
        let bounds: Vec<f64> = vals.iter().map(|v| v.1).collect();
        let weights: Vec<f64> = vals.iter().map(|v| v.0).collect();
        let y: Vec<f64> = vals.iter().map(|v| v.2).collect();
        let spec = ConstraintSpec::new(bounds.clone(), weights.clone()).unwrap();
        let e = constraint_errors(&spec, &y).unwrap();
        for i in 0..y.len() {
            prop_assert_eq!(e.as_slice()[i], weights[i] * (bounds[i] - y[i]));
        }
    }

    #[test]
    fn active_index_is_scale_invariant(e in prop::collection::vec(-10.0..10.0f64, 1..8), k in 0.01..100.0f64) {
        let scaled: Vec<f64> = e.iter().map(|v| v * k).collect();
        prop_assert_eq!(active_index(&e), active_index(&scaled));
        let i = active_index(&e);
        prop_assert!(e.iter().all(|v| *v >= e[i]));
        prop_assert!(e[..i].iter().all(|v| *v > e[i]));
    }

    #[test]
    fn step_size_decreases(mu1 in 0.01..0.99f64, t in 1usize..100_000) {
        let a = step_size(t, mu1).unwrap();
        let b = step_size(t + 1, mu1).unwrap();
        prop_assert!(b < a && a <= 1.0);
    }

    #[test]
    fn gains_stay_in_box_on_toy_runs(theta0 in prop::array::uniform2(0.0..1.0f64), mu1 in 0.1..0.9f64,
                                     ybar in 0.5..5.0f64) {
        let plant = LinearPlant::new(0.9, 0.1, 1.0, 1.0, false).unwrap();
        let spec = ConstraintSpec::unweighted(vec![ybar]).unwrap();
        let cfg = ControllerConfig { theta0, mu1, ..Default::default() };
        let mut c = ControllerState::new(&cfg).unwrap();
        let traj = run_closed_loop(&plant, &mut c, &spec, 300, 0.0, &RunOptions::default()).unwrap();
        for r in &traj.records {
            prop_assert!(cfg.gain_box.contains(r.theta.unwrap()));
        }
    }
}

#[test]
fn step_size_examples() {
    assert_eq!(step_size(0, 0.7).unwrap(), 1.0);
    assert_eq!(step_size(1, 0.7).unwrap(), 1.0);
    assert_eq!(step_size(4, 0.5).unwrap(), 0.5);
    assert!(step_size(3, 1.0).is_err());
    assert!(step_size(3, 0.0).is_err());
}

#[test]
fn ties_go_to_lowest_index() {
    assert_eq!(active_index(&[1.0, 0.5, 0.5]), 1);
    assert_eq!(active_index(&[0.0, 0.0]), 0);
}
