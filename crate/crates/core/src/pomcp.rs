//! POMCP: UCT search over action-observation histories from a particle
//! belief, with optional rule-based priors and rollout guidance.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::features::Domain;
use crate::logic::guidance::pick;
use crate::logic::{Guidance, RolloutMode, RuleError, RuleSet};
use crate::planner::{compile_for, AdviceCache, PlanError, Planner};
use crate::pomdp::{History, ParticleBelief};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeuristicMode {
    /// Plain POMCP: no priors, uniform rollouts.
    Off,
    /// Rule priors in the tree, uniform rollouts.
    UctOnly,
    /// Rule priors in the tree and rule-weighted rollouts.
    Full,
    /// Hand-coded preferred actions as priors and rollout policy.
    Preferred,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PomcpConfig {
    pub simulations: usize,
    /// UCT exploration constant; also the prior value of suggested actions.
    pub exploration: f64,
    /// Simulation depth cap measured from the root.
    pub max_depth: usize,
    pub prior_count: u32,
    pub mode: HeuristicMode,
    pub rollout: RolloutMode,
}

impl PomcpConfig {
    pub fn new(simulations: usize, exploration: f64) -> Self {
        PomcpConfig {
            simulations,
            exploration,
            max_depth: 90,
            prior_count: 10,
            mode: HeuristicMode::Off,
            rollout: RolloutMode::Soft,
        }
    }
}

/// `V + c·sqrt(ln N(h) / N(ha))`; unvisited actions score `+∞`.
pub fn uct_score(value: f64, n_h: f64, n_ha: f64, c: f64) -> f64 {
    if n_ha <= 0.0 {
        return f64::INFINITY;
    }
    value + c * (n_h.max(1.0).ln() / n_ha).sqrt()
}

#[derive(Clone, Debug)]
struct QEntry<O> {
    value: f64,
    count: u32,
    children: Vec<(O, usize)>,
}

#[derive(Clone, Debug)]
struct VNode<O> {
    visits: u32,
    actions: Vec<QEntry<O>>,
}

/// Root statistics of the last search, for inspection.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RootStats {
    pub values: Vec<f64>,
    pub counts: Vec<u32>,
    /// Sum of the returns backed up through each root action.
    pub return_sums: Vec<f64>,
    pub tree_size: usize,
}

pub struct Pomcp {
    pub config: PomcpConfig,
    guidance: Option<Guidance>,
    last: RootStats,
}

impl Pomcp {
    /// `rules` are required for the `UctOnly` and `Full` modes; without them
    /// those modes behave like `Off`.
    pub fn new<M: Domain>(config: PomcpConfig, rules: Option<&RuleSet>, model: &M) -> Result<Self, RuleError> {
        let guidance = match (config.mode, rules) {
            (HeuristicMode::UctOnly | HeuristicMode::Full, Some(r)) => Some(compile_for(model, r, config.rollout)?),
            _ => None,
        };
        Ok(Pomcp { config, guidance, last: RootStats::default() })
    }

    pub fn last_search(&self) -> &RootStats {
        &self.last
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
        let cache = self.guidance.as_ref().map(|g| AdviceCache::new(model, g, belief.particles()));
        let root_sums = vec![0.0; model.num_actions()];
        let mut s = Search { model, config: &self.config, cache, nodes: Vec::new(), root_sums, rng };
        let root_state = belief.particles()[0].clone();
        let root = s.new_node(&root_state)?;
        for _ in 0..self.config.simulations {
            let mut state = belief.sample(s.rng).clone();
            s.simulate(&mut state, root, 0)?;
        }
        let node = &s.nodes[root];
        let mut best = None;
        for (a, q) in node.actions.iter().enumerate() {
            if q.count > 0 && best.is_none_or(|(_, v)| q.value > v) {
                best = Some((a, q.value));
            }
        }
        self.last = RootStats {
            values: node.actions.iter().map(|q| q.value).collect(),
            counts: node.actions.iter().map(|q| q.count).collect(),
            return_sums: s.root_sums.clone(),
            tree_size: s.nodes.len(),
        };
        Ok(best.map_or(0, |(a, _)| a))
    }
}

impl<M: Domain> Planner<M> for Pomcp {
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

struct Search<'a, M: Domain> {
    model: &'a M,
    config: &'a PomcpConfig,
    cache: Option<AdviceCache<'a, M>>,
    nodes: Vec<VNode<M::Observation>>,
    root_sums: Vec<f64>,
    rng: &'a mut ChaCha8Rng,
}

impl<M: Domain> Search<'_, M> {
    /// Adds a node whose suggested actions start with value `c` and
    /// `prior_count` visits.
    fn new_node(&mut self, state: &M::State) -> Result<usize, RuleError> {
        let n = self.model.num_actions();
        let mut actions: Vec<QEntry<M::Observation>> =
            (0..n).map(|_| QEntry { value: 0.0, count: 0, children: Vec::new() }).collect();
        let prior = self.config.prior_count;
        let mut visits = 0;
        let mut boost = |a: usize| {
            actions[a].value = self.config.exploration;
            actions[a].count = prior;
            visits += prior;
        };
        match self.config.mode {
            HeuristicMode::UctOnly | HeuristicMode::Full if prior > 0 => {
                if let Some(cache) = self.cache.as_mut() {
                    let advice = cache.get(state)?;
                    for (a, e) in advice.entailed.iter().enumerate() {
                        if *e {
                            boost(a);
                        }
                    }
                }
            }
            HeuristicMode::Preferred if prior > 0 => {
                for a in self.model.preferred_actions(state) {
                    boost(a);
                }
            }
            _ => {}
        }
        self.nodes.push(VNode { visits, actions });
        Ok(self.nodes.len() - 1)
    }

    fn select(&self, node: usize) -> usize {
        let v = &self.nodes[node];
        let n_h = v.visits as f64;
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for (a, q) in v.actions.iter().enumerate() {
            let s = uct_score(q.value, n_h, q.count as f64, self.config.exploration);
            if s > best_score {
                best = a;
                best_score = s;
                if s == f64::INFINITY {
                    break;
                }
            }
        }
        best
    }

    fn simulate(&mut self, state: &mut M::State, node: usize, depth: usize) -> Result<f64, RuleError> {
        if depth >= self.config.max_depth {
            return Ok(0.0);
        }
        let a = self.select(node);
        let out = self.model.step(state, a, self.rng);
        let mut ret = out.reward;
        if !out.terminal {
            let child = self.nodes[node].actions[a].children.iter().find(|(o, _)| *o == out.observation).map(|c| c.1);
            let future = match child {
                Some(c) => self.simulate(state, c, depth + 1)?,
                None => {
                    let c = self.new_node(state)?;
                    self.nodes[node].actions[a].children.push((out.observation, c));
                    self.rollout(state, depth + 1)?
                }
            };
            ret += self.model.discount() * future;
        }
        if node == 0 {
            self.root_sums[a] += ret;
        }
        let v = &mut self.nodes[node];
        v.visits += 1;
        let q = &mut v.actions[a];
        q.count += 1;
        q.value += (ret - q.value) / q.count as f64;
        Ok(ret)
    }

    fn rollout(&mut self, state: &mut M::State, mut depth: usize) -> Result<f64, RuleError> {
        let gamma = self.model.discount();
        let n = self.model.num_actions();
        let mut total = 0.0;
        let mut disc = 1.0;
        while depth < self.config.max_depth {
            let a = match (self.config.mode, self.cache.as_mut()) {
                (HeuristicMode::Full, Some(cache)) => pick(&cache.get(state)?.weights, self.rng),
                (HeuristicMode::Preferred, _) => {
                    let p = self.model.preferred_actions(state);
                    p[self.rng.random_range(0..p.len())]
                }
                _ => self.rng.random_range(0..n),
            };
            let out = self.model.step(state, a, self.rng);
            total += disc * out.reward;
            disc *= gamma;
            depth += 1;
            if out.terminal {
                break;
            }
        }
        Ok(total)
    }
}
