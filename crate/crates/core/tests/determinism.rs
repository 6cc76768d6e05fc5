use std::path::{Path, PathBuf};

use bangride::experiment;
use bangride::replay_open_loop;
use bangride::scenario::{ModelVisitor, ScenarioConfig};
use bangride::{ConstraintSpec, PlantModel, Trajectory};

fn scenario(name: &str) -> ScenarioConfig {
    let p: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../../scenarios/{name}.toml"));
    ScenarioConfig::load(&p).unwrap()
}

#[test]
fn identical_configs_give_identical_runs() {
    for name in ["ecm", "toy"] {
        let cfg = scenario(name);
        let a = experiment::simulate(&cfg).unwrap().trajectory;
        let b = experiment::simulate(&cfg).unwrap().trajectory;
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn config_hash_is_stable_and_sensitive() {
    let cfg = scenario("ecm");
    assert_eq!(cfg.hash().unwrap(), scenario("ecm").hash().unwrap());
    let mut other = cfg.clone();
    other.scenario.seed += 1;
    assert_ne!(cfg.hash().unwrap(), other.hash().unwrap());
}

struct Replays<'a>(&'a Trajectory);

impl ModelVisitor for Replays<'_> {
    type Output = f64;

    fn visit<M: PlantModel>(self, model: &M, x0: M::State, _spec: &ConstraintSpec) -> f64 {
        let replay = replay_open_loop(model, x0, &self.0.currents(), 1e9).unwrap();
        let mut worst = 0.0f64;
        for (r, y) in self.0.records.iter().zip(&replay.outputs) {
            for (a, b) in r.y.iter().zip(y) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}

#[test]
fn open_loop_replay_reproduces_closed_loop_outputs() {
    for name in ["spmet", "ecm", "toy"] {
        let cfg = scenario(name);
        let traj = experiment::simulate(&cfg).unwrap().trajectory;
        let worst = cfg.build().unwrap().accept(Replays(&traj));
        assert_eq!(worst, 0.0, "{name}");
    }
}
