use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rulepomdp::cdpi::{make_cdpis, parse_ilasp_examples, render_ilasp, rocksample_action_space, trace_cdpis};
use rulepomdp::episode::{run_episode, EpisodeConfig};
use rulepomdp::induction::ModeBias;
use rulepomdp::logic::{atom, FeatureSet, GroundAtom};
use rulepomdp::planner::{PlanError, Planner};
use rulepomdp::pomdp::{GenerativeModel, History, ParticleBelief};
use rulepomdp::rocksample::{RockConfig, RockSample};

const GOLDEN: &str = include_str!("golden/rocksample_check.las");

fn leading_first() -> FeatureSet {
    FeatureSet::parse(
        "{guess(1,50),guess(2,50),dist(1,1),dist(2,2),delta_x(1,0),delta_x(2,1),\
         delta_y(1,1),delta_y(2,1),num_sampled(0)}",
    )
    .unwrap()
}

#[test]
fn rocksample_check_export_matches_golden_file() {
    let cdpis = make_cdpis(&leading_first(), &atom("check", [1]), &rocksample_action_space(2, false));
    let text = render_ilasp(&cdpis, &ModeBias::rocksample("check"));
    if std::env::var_os("BLESS").is_some() {
        std::fs::write(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/rocksample_check.las"), &text).unwrap();
    }
    assert_eq!(text, GOLDEN);
    let pos: Vec<&str> = text.lines().filter(|l| l.starts_with("#pos")).collect();
    assert_eq!(pos.len(), 1);
    assert!(pos[0].starts_with("#pos(p1, {check(1)}, {check(2)}, "));
}

struct Uniform;

impl<M: GenerativeModel> Planner<M> for Uniform {
    fn plan(&mut self, model: &M, _: &ParticleBelief<M::State>, _: &History<M::Observation>, rng: &mut ChaCha8Rng) -> Result<usize, PlanError> {
        Ok(rng.random_range(0..model.num_actions()))
    }
}

#[test]
fn thousand_rocksample_steps_have_one_positive_example_each() {
    let mut steps = 0;
    let mut seed = 0;
    while steps < 1000 {
        let rs = RockSample::new(RockConfig::new(5, 3), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let out = run_episode(&rs, &mut Uniform, &EpisodeConfig::new(64), seed);
        let space = rocksample_action_space(3, true);
        for s in &out.trace.steps {
            let cs = make_cdpis(&s.features, &s.action, &space);
            assert_eq!(cs.iter().filter(|c| !c.inc.is_empty()).count(), 1);
            let mut expected: BTreeSet<GroundAtom> = space.iter().cloned().collect();
            expected.insert(s.action.clone());
            let covered: BTreeSet<GroundAtom> = cs.iter().flat_map(|c| c.inc.iter().chain(&c.exc).cloned()).collect();
            assert_eq!(covered, expected);
            for c in &cs {
                assert!(c.inc.iter().all(|a| !c.exc.contains(a)));
            }
        }
        steps += out.trace.steps.len();
        seed += 1;
    }
}

#[test]
fn export_round_trips_on_episode_examples() {
    let rs = RockSample::new(RockConfig::new(5, 3), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let out = run_episode(&rs, &mut Uniform, &EpisodeConfig::new(64), 9);
    let cdpis = trace_cdpis(&[out.trace], &rocksample_action_space(3, true));
    for head in ["north", "check", "sample", "exit"] {
        let text = render_ilasp(&cdpis, &ModeBias::rocksample(head));
        let back = parse_ilasp_examples(&text).unwrap();
        let expected: Vec<_> = cdpis.iter().filter(|c| c.mentions(head)).cloned().collect();
        assert_eq!(back, expected);
    }
}
