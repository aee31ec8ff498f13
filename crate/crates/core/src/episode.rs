//! The plan, execute, observe and update loop of one episode.

use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::Domain;
use crate::planner::Planner;
use crate::pomdp::{belief_update, BeliefConfig, History, ParticleBelief};
use crate::trace::{EpisodeTrace, TraceStep};

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeConfig {
    pub particles: usize,
    pub max_steps: usize,
    pub attempt_factor: usize,
    /// Written to the trace header to identify the configuration.
    pub digest: String,
}

impl EpisodeConfig {
    pub fn new(particles: usize) -> Self {
        EpisodeConfig { particles, max_steps: 200, attempt_factor: 20, digest: "-".into() }
    }
}

#[derive(Clone, Debug)]
pub struct EpisodeOutcome {
    pub trace: EpisodeTrace,
    /// Wall-clock time spent inside the planner.
    pub planning: Duration,
}

impl EpisodeOutcome {
    pub fn time_per_step(&self) -> f64 {
        match self.trace.steps.len() {
            0 => 0.0,
            n => self.planning.as_secs_f64() / n as f64,
        }
    }
}

/// Separate streams for the environment, the belief filter and the planner
/// so that changing one consumer does not shift the others.
fn streams(seed: u64) -> [ChaCha8Rng; 3] {
    std::array::from_fn(|i| {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        r.set_stream(i as u64 + 1);
        r
    })
}

pub fn run_episode<M, P>(model: &M, planner: &mut P, config: &EpisodeConfig, seed: u64) -> EpisodeOutcome
where
    M: Domain,
    P: Planner<M>,
{
    let [mut env, mut filter, mut plan_rng] = streams(seed);
    let mut trace = EpisodeTrace::new(model.name(), seed, config.digest.clone(), model.discount());
    let mut truth = model.sample_initial_state(&mut env);
    let mut belief = ParticleBelief::from_prior(model, &truth, config.particles.max(1), &mut filter);
    let belief_cfg = BeliefConfig { budget: config.particles.max(1), attempt_factor: config.attempt_factor };
    let mut history = History::new();
    let mut planning = Duration::ZERO;

    for t in 0..config.max_steps {
        let features = model.belief_features(belief.particles());
        let started = Instant::now();
        let planned = planner.plan(model, &belief, &history, &mut plan_rng);
        planning += started.elapsed();
        let a = match planned {
            Ok(a) => a,
            Err(e) => {
                trace.failure = Some(e.to_string());
                break;
            }
        };
        let action = model.executed_atom(&truth, a);
        let out = model.step(&mut truth, a, &mut env);
        trace.steps.push(TraceStep { t, action, reward: out.reward, features });
        if out.terminal {
            break;
        }
        match belief_update(&belief, a, &out.observation, model, &belief_cfg, &mut filter) {
            Ok(b) => belief = b,
            Err(e) => {
                trace.failure = Some(e.to_string());
                break;
            }
        }
        history.push(a, out.observation);
    }
    EpisodeOutcome { trace, planning }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_rules;
    use crate::pomcp::{HeuristicMode, Pomcp, PomcpConfig};
    use crate::rocksample::{RockConfig, RockSample};

    fn leading() -> RockSample {
        RockSample::new(RockConfig::leading_example(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    fn planner(rs: &RockSample) -> Pomcp {
        let rules = parse_rules(include_str!("../fixtures/rules/rocksample_good.lp")).unwrap();
        let cfg = PomcpConfig { mode: HeuristicMode::Full, ..PomcpConfig::new(256, 20.0) };
        Pomcp::new(cfg, Some(&rules), rs).unwrap()
    }

    #[test]
    fn leading_example_ends_in_sample_or_exit() {
        let rs = leading();
        let cfg = PomcpConfig { mode: HeuristicMode::Preferred, ..PomcpConfig::new(256, 20.0) };
        let mut p = Pomcp::new(cfg, None, &rs).unwrap();
        let out = run_episode(&rs, &mut p, &EpisodeConfig::new(256), 11);
        let steps = &out.trace.steps;
        assert!(steps.len() >= 3, "{}", out.trace);
        let last = steps.last().unwrap().action.pred.as_str().to_string();
        assert!(last == "sample" || last == "exit", "{}", out.trace);
        assert!(out.trace.failure.is_none());
    }

    #[test]
    fn zero_step_cap_gives_empty_trace() {
        let rs = leading();
        let cfg = EpisodeConfig { max_steps: 0, ..EpisodeConfig::new(16) };
        let out = run_episode(&rs, &mut planner(&rs), &cfg, 1);
        assert!(out.trace.steps.is_empty());
        assert_eq!(out.trace.discounted_return(), 0.0);
    }

    #[test]
    fn same_seed_same_trace() {
        let rs = RockSample::new(RockConfig::new(5, 3), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let cfg = EpisodeConfig::new(128);
        let a = run_episode(&rs, &mut planner(&rs), &cfg, 5).trace.to_string();
        let b = run_episode(&rs, &mut planner(&rs), &cfg, 5).trace.to_string();
        assert_eq!(a, b);
    }
}
