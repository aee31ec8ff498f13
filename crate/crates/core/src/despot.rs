//! DESPOT: anytime search over K determinised scenarios guided by lower and
//! upper value bounds.

use std::time::{Duration, Instant};

use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::features::Domain;
use crate::logic::guidance::pick;
use crate::logic::{Guidance, RolloutMode, RuleError, RuleSet};
use crate::planner::{compile_for, AdviceCache, PlanError, Planner};
use crate::pomdp::{GenerativeModel, History, ParticleBelief};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LowerBound {
    /// Always the domain's fixed default action.
    Trivial,
    /// Samples from the strict rule weights at every step.
    Asp,
    /// Uniform over the hand-coded preferred actions.
    Preferred,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UpperBound {
    Trivial,
    Hindsight,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Budget {
    Time(Duration),
    Trials(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DespotConfig {
    pub scenarios: usize,
    pub xi: f64,
    pub target_gap: f64,
    pub lambda: f64,
    pub budget: Budget,
    pub max_depth: usize,
    pub lower: LowerBound,
    pub upper: UpperBound,
}

impl Default for DespotConfig {
    fn default() -> Self {
        DespotConfig {
            scenarios: 500,
            xi: 0.95,
            target_gap: 0.01,
            lambda: 0.01,
            budget: Budget::Time(Duration::from_secs(1)),
            max_depth: 90,
            lower: LowerBound::Trivial,
            upper: UpperBound::Trivial,
        }
    }
}

/// `R_max / (1 − γ)`, rounded to 9 decimals so that decimal discounts such
/// as 0.95 give the exact quotient.
pub fn upper_bound_trivial<M: GenerativeModel>(model: &M) -> f64 {
    let g = model.discount();
    assert!(g < 1.0, "discount must be below 1");
    let v = model.max_reward() / (1.0 - g);
    (v * 1e9).round() / 1e9
}

/// Counters accumulated over every planning call of one planner.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DespotStats {
    pub calls: u64,
    pub trials: u64,
    pub nodes: u64,
    /// Times a node's upper bound fell below its lower bound and was raised.
    pub clamps: u64,
    /// Nodes left with `l > u` after a backup.
    pub violations: u64,
    /// Trials after which the root gap grew.
    pub gap_increases: u64,
}

/// Randomness for scenario `seed` at `depth`; the same pair always yields
/// the same stream.
fn stream(seed: u64, depth: usize) -> SmallRng {
    SmallRng::seed_from_u64(seed ^ (depth as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

struct QNode<O> {
    reward: f64,
    lower: f64,
    upper: f64,
    children: Vec<(O, usize)>,
}

struct DNode<S, O> {
    scenarios: Vec<(usize, S)>,
    depth: usize,
    lower: f64,
    upper: f64,
    parent: Option<usize>,
    actions: Vec<QNode<O>>,
}

pub struct Despot {
    pub config: DespotConfig,
    guidance: Option<Guidance>,
    stats: DespotStats,
}

impl Despot {
    /// `rules` are needed for the `Asp` lower bound; without them it plays
    /// uniformly at random.
    pub fn new<M: Domain>(config: DespotConfig, rules: Option<&RuleSet>, model: &M) -> Result<Self, RuleError> {
        let guidance = match (config.lower, rules) {
            (LowerBound::Asp, Some(r)) => Some(compile_for(model, r, RolloutMode::Strict)?),
            _ => None,
        };
        Ok(Despot { config, guidance, stats: DespotStats::default() })
    }

    pub fn stats(&self) -> &DespotStats {
        &self.stats
    }

    pub fn search<M: Domain>(
        &mut self,
        model: &M,
        belief: &ParticleBelief<M::State>,
        rng: &mut ChaCha8Rng,
    ) -> Result<usize, PlanError> {
        if belief.is_empty() {
            return Err(PlanError::EmptyBelief);
        }
        self.stats.calls += 1;
        let k = self.config.scenarios.max(1);
        let scenarios: Vec<(usize, M::State)> = (0..k).map(|i| (i, belief.sample(rng).clone())).collect();
        let seeds: Vec<u64> = (0..k).map(|_| rng.random()).collect();
        let cache = self.guidance.as_ref().map(|g| AdviceCache::new(model, g, belief.particles()));
        let mut t = Tree { model, config: &self.config, cache, seeds, nodes: Vec::new(), stats: &mut self.stats };
        t.add_node(scenarios, 0, None)?;

        let start = Instant::now();
        let mut trials = 0usize;
        loop {
            let gap = t.nodes[0].upper - t.nodes[0].lower;
            if gap <= self.config.target_gap {
                break;
            }
            match self.config.budget {
                Budget::Trials(n) if trials >= n => break,
                Budget::Time(d) if start.elapsed() >= d => break,
                _ => {}
            }
            t.trial()?;
            trials += 1;
            t.stats.trials += 1;
            if t.nodes[0].upper - t.nodes[0].lower > gap + 1e-9 {
                t.stats.gap_increases += 1;
            }
        }

        let root = &t.nodes[0];
        if root.actions.is_empty() {
            return Ok(t.default_action(&belief.particles()[0])?);
        }
        let mut best = 0;
        for (a, q) in root.actions.iter().enumerate() {
            if q.lower > root.actions[best].lower {
                best = a;
            }
        }
        Ok(best)
    }
}

impl<M: Domain> Planner<M> for Despot {
    fn plan(
        &mut self,
        model: &M,
        belief: &ParticleBelief<M::State>,
        _history: &History<M::Observation>,
        rng: &mut ChaCha8Rng,
    ) -> Result<usize, PlanError> {
        self.search(model, belief, rng)
    }
}

struct Tree<'a, M: Domain> {
    model: &'a M,
    config: &'a DespotConfig,
    cache: Option<AdviceCache<'a, M>>,
    seeds: Vec<u64>,
    nodes: Vec<DNode<M::State, M::Observation>>,
    stats: &'a mut DespotStats,
}

impl<M: Domain> Tree<'_, M> {
    fn weight(&self, depth: usize) -> f64 {
        self.model.discount().powi(depth as i32) / self.seeds.len() as f64
    }

    fn policy_action(&mut self, state: &M::State, rng: &mut SmallRng) -> Result<usize, RuleError> {
        Ok(match self.config.lower {
            LowerBound::Trivial => self.model.default_action(),
            LowerBound::Asp => match self.cache.as_mut() {
                Some(c) => pick(&c.get(state)?.weights, rng),
                None => rng.random_range(0..self.model.num_actions()),
            },
            LowerBound::Preferred => {
                let p = self.model.preferred_actions(state);
                p[rng.random_range(0..p.len())]
            }
        })
    }

    /// The action the default policy would take first from `state`.
    fn default_action(&mut self, state: &M::State) -> Result<usize, RuleError> {
        Ok(match self.config.lower {
            LowerBound::Trivial => self.model.default_action(),
            LowerBound::Asp => match self.cache.as_mut() {
                Some(c) => {
                    let w = &c.get(state)?.weights;
                    (0..w.len()).fold(0, |b, a| if w[a] > w[b] { a } else { b })
                }
                None => self.model.default_action(),
            },
            LowerBound::Preferred => self.model.preferred_actions(state)[0],
        })
    }

    /// Undiscounted-from-`depth` return of the default policy in one scenario.
    fn default_value(&mut self, scenario: usize, state: &M::State, depth: usize) -> Result<f64, RuleError> {
        let mut s = state.clone();
        let g = self.model.discount();
        let (mut total, mut disc) = (0.0, 1.0);
        for d in depth..self.config.max_depth {
            let mut rng = stream(self.seeds[scenario], d);
            let a = self.policy_action(&s, &mut rng)?;
            let out = self.model.step(&mut s, a, &mut rng);
            total += disc * out.reward;
            disc *= g;
            if out.terminal {
                break;
            }
        }
        Ok(total)
    }

    fn add_node(&mut self, scenarios: Vec<(usize, M::State)>, depth: usize, parent: Option<usize>) -> Result<usize, RuleError> {
        let (mut lower, mut upper) = (0.0, 0.0);
        if depth < self.config.max_depth {
            let w = self.weight(depth);
            let trivial = upper_bound_trivial(self.model);
            for (i, s) in &scenarios {
                lower += w * self.default_value(*i, s, depth)?;
                upper += w * match self.config.upper {
                    UpperBound::Trivial => trivial,
                    UpperBound::Hindsight => self.model.hindsight_bound(s),
                };
            }
        }
        if upper < lower {
            upper = lower;
            self.stats.clamps += 1;
        }
        self.nodes.push(DNode { scenarios, depth, lower, upper, parent, actions: Vec::new() });
        self.stats.nodes += 1;
        Ok(self.nodes.len() - 1)
    }

    fn expand(&mut self, node: usize) -> Result<(), RuleError> {
        let depth = self.nodes[node].depth;
        let scen = std::mem::take(&mut self.nodes[node].scenarios);
        let w = self.weight(depth);
        let mut actions = Vec::with_capacity(self.model.num_actions());
        for a in 0..self.model.num_actions() {
            let mut reward = 0.0;
            let mut groups: Vec<(M::Observation, Vec<(usize, M::State)>)> = Vec::new();
            for (i, s) in &scen {
                let mut s = s.clone();
                let out = self.model.step(&mut s, a, &mut stream(self.seeds[*i], depth));
                reward += out.reward;
                if out.terminal {
                    continue;
                }
                match groups.iter_mut().find(|(o, _)| *o == out.observation) {
                    Some((_, g)) => g.push((*i, s)),
                    None => groups.push((out.observation, vec![(*i, s)])),
                }
            }
            let reward = w * reward - self.config.lambda;
            let mut q = QNode { reward, lower: reward, upper: reward, children: Vec::with_capacity(groups.len()) };
            for (o, g) in groups {
                let c = self.add_node(g, depth + 1, Some(node))?;
                q.lower += self.nodes[c].lower;
                q.upper += self.nodes[c].upper;
                q.children.push((o, c));
            }
            actions.push(q);
        }
        let n = &mut self.nodes[node];
        n.scenarios = scen;
        n.actions = actions;
        Ok(())
    }

    fn best_upper_action(&self, node: usize) -> usize {
        let acts = &self.nodes[node].actions;
        (0..acts.len()).fold(0, |b, a| if acts[a].upper > acts[b].upper { a } else { b })
    }

    fn excess(&self, node: usize) -> f64 {
        let n = &self.nodes[node];
        let root_gap = self.nodes[0].upper - self.nodes[0].lower;
        let share = n.scenarios.len() as f64 / self.seeds.len() as f64;
        (n.upper - n.lower) - self.config.xi * share * root_gap
    }

    fn trial(&mut self) -> Result<(), RuleError> {
        let mut cur = 0;
        loop {
            if self.nodes[cur].depth >= self.config.max_depth {
                break;
            }
            if self.nodes[cur].actions.is_empty() {
                self.expand(cur)?;
            }
            let a = self.best_upper_action(cur);
            let mut next = None;
            for &(_, c) in &self.nodes[cur].actions[a].children {
                let e = self.excess(c);
                if next.is_none_or(|(_, best)| e > best) {
                    next = Some((c, e));
                }
            }
            match next {
                Some((c, e)) if e > 0.0 => cur = c,
                _ => break,
            }
        }
        let mut at = Some(cur);
        while let Some(n) = at {
            self.backup(n);
            at = self.nodes[n].parent;
        }
        Ok(())
    }

    fn backup(&mut self, node: usize) {
        if self.nodes[node].actions.is_empty() {
            return;
        }
        let (mut best_l, mut best_u) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for a in 0..self.nodes[node].actions.len() {
            let q = &self.nodes[node].actions[a];
            let (mut l, mut u) = (q.reward, q.reward);
            for &(_, c) in &q.children {
                l += self.nodes[c].lower;
                u += self.nodes[c].upper;
            }
            let q = &mut self.nodes[node].actions[a];
            q.lower = l;
            q.upper = u;
            best_l = best_l.max(l);
            best_u = best_u.max(u);
        }
        let n = &mut self.nodes[node];
        n.lower = n.lower.max(best_l);
        n.upper = n.upper.min(best_u);
        if n.upper < n.lower {
            n.upper = n.lower;
            self.stats.clamps += 1;
        }
        if n.lower > n.upper {
            self.stats.violations += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pocman::{Pocman, PocConfig, Maze};
    use crate::rocksample::{RockConfig, RockSample, EAST};

    fn rocks(n: usize, m: usize, seed: u64) -> RockSample {
        RockSample::new(RockConfig::new(n, m), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn trivial_upper_examples() {
        let rs = rocks(7, 3, 0);
        assert_eq!(upper_bound_trivial(&rs), 200.0);
        let pm = Pocman::new(PocConfig::new(Maze::micro(), 2)).unwrap();
        assert_eq!(upper_bound_trivial(&pm), 20000.0);
    }

    #[test]
    fn stream_is_reproducible() {
        let a: Vec<u32> = (0..4).map(|_| stream(7, 3).random()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(stream(7, 3).random::<u64>(), stream(7, 4).random::<u64>());
    }

    #[test]
    fn trivial_default_at_east_edge_is_exit_reward() {
        let rs = rocks(5, 2, 0);
        let mut s = rs.state_with_values(0);
        s.x = 4;
        let cfg = DespotConfig { scenarios: 1, ..Default::default() };
        let mut stats = DespotStats::default();
        let mut t = Tree { model: &rs, config: &cfg, cache: None, seeds: vec![1], nodes: Vec::new(), stats: &mut stats };
        assert_eq!(t.default_value(0, &s, 0).unwrap(), 10.0);
    }

    #[test]
    fn zero_budget_returns_default_action() {
        let rs = rocks(7, 3, 1);
        let (_, belief) = rs.init(50, &mut ChaCha8Rng::seed_from_u64(0));
        let cfg = DespotConfig { budget: Budget::Time(Duration::ZERO), scenarios: 20, ..Default::default() };
        let mut d = Despot::new(cfg, None, &rs).unwrap();
        assert_eq!(d.search(&rs, &belief, &mut ChaCha8Rng::seed_from_u64(0)).unwrap(), EAST);
        assert_eq!(d.stats().trials, 0);
    }

    fn bounds_snapshot(t: &Tree<'_, RockSample>) -> Vec<(f64, f64)> {
        t.nodes.iter().map(|n| (n.lower, n.upper)).collect()
    }

    #[test]
    fn bounds_hold_and_root_gap_shrinks() {
        for (lower, upper) in [(LowerBound::Trivial, UpperBound::Trivial), (LowerBound::Preferred, UpperBound::Hindsight)] {
            let rs = rocks(7, 4, 2);
            let (_, belief) = rs.init(200, &mut ChaCha8Rng::seed_from_u64(3));
            let cfg = DespotConfig { budget: Budget::Trials(200), scenarios: 50, lower, upper, ..Default::default() };
            let mut d = Despot::new(cfg, None, &rs).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            for _ in 0..3 {
                d.search(&rs, &belief, &mut rng).unwrap();
            }
            assert_eq!(d.stats().violations, 0);
            assert_eq!(d.stats().gap_increases, 0);
            assert!(d.stats().trials > 0);
        }
    }

    #[test]
    fn scenario_replay_is_deterministic() {
        let rs = rocks(7, 3, 5);
        let (_, belief) = rs.init(100, &mut ChaCha8Rng::seed_from_u64(6));
        let cfg = DespotConfig { scenarios: 30, ..Default::default() };
        let run = || {
            let mut stats = DespotStats::default();
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            let scen: Vec<_> = (0..30).map(|i| (i, belief.sample(&mut rng).clone())).collect();
            let seeds: Vec<u64> = (0..30).map(|_| rng.random()).collect();
            let mut t = Tree { model: &rs, config: &cfg, cache: None, seeds, nodes: Vec::new(), stats: &mut stats };
            t.add_node(scen, 0, None).unwrap();
            for _ in 0..20 {
                t.trial().unwrap();
            }
            bounds_snapshot(&t)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn children_partition_parent_scenarios() {
        let rs = rocks(7, 3, 7);
        let (_, belief) = rs.init(100, &mut ChaCha8Rng::seed_from_u64(8));
        let cfg = DespotConfig { scenarios: 40, ..Default::default() };
        let mut stats = DespotStats::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let scen: Vec<_> = (0..40).map(|i| (i, belief.sample(&mut rng).clone())).collect();
        let seeds: Vec<u64> = (0..40).map(|_| rng.random()).collect();
        let mut t = Tree { model: &rs, config: &cfg, cache: None, seeds, nodes: Vec::new(), stats: &mut stats };
        t.add_node(scen, 0, None).unwrap();
        t.expand(0).unwrap();
        for a in 0..rs.num_actions() {
            let mut ids: Vec<usize> = t.nodes[0].actions[a]
                .children
                .iter()
                .flat_map(|(_, c)| t.nodes[*c].scenarios.iter().map(|(i, _)| *i))
                .collect();
            ids.sort();
            // A scenario leaves only by terminating (exiting east).
            let n = ids.len();
            ids.dedup();
            assert_eq!(ids.len(), n);
            if a != EAST {
                assert_eq!(n, 40);
            }
        }
    }
}
