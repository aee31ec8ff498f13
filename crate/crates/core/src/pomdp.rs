//! Generative-model contract, particle beliefs and discounted returns.

use std::fmt::Debug;
use std::hash::Hash;

use rand::Rng;

use crate::logic::GroundAtom;

/// Result of one call to the generative sampler.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome<O> {
    pub observation: O,
    pub reward: f64,
    pub terminal: bool,
}

/// A POMDP given through a simulator. Actions are indices into
/// [`GenerativeModel::action_atoms`].
pub trait GenerativeModel {
    type State: Clone + Debug + Send + Sync;
    type Observation: Clone + Eq + Hash + Debug + Send + Sync;

    fn num_actions(&self) -> usize;

    /// One atom per action index, as seen by rules and rollout weights.
    fn action_atoms(&self) -> &[GroundAtom];

    /// The ground action recorded in traces when `action` runs in `state`.
    fn executed_atom(&self, state: &Self::State, action: usize) -> GroundAtom {
        let _ = state;
        self.action_atoms()[action].clone()
    }

    fn discount(&self) -> f64;

    /// Largest single-step reward, R_max.
    fn max_reward(&self) -> f64;

    fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    /// A belief particle consistent with everything the agent knows about
    /// `truth` at the start of an episode.
    fn sample_belief_particle<R: Rng + ?Sized>(&self, truth: &Self::State, rng: &mut R) -> Self::State;

    /// Advances `state` in place.
    fn step<R: Rng + ?Sized>(
        &self,
        state: &mut Self::State,
        action: usize,
        rng: &mut R,
    ) -> StepOutcome<Self::Observation>;

    /// Whether `obs` has non-zero probability after `action` led to
    /// `state`. Used to accept reinvigorated particles.
    fn observation_possible(&self, state: &Self::State, action: usize, obs: &Self::Observation) -> bool;

    /// Small random change to a particle, used to refill a depleted belief.
    fn perturb<R: Rng + ?Sized>(&self, state: &mut Self::State, rng: &mut R);
}

/// Σ γ^t · r_t.
pub fn discounted_return(rewards: &[f64], gamma: f64) -> f64 {
    assert!((0.0..1.0).contains(&gamma), "discount {gamma} outside [0, 1)");
    let mut total = 0.0;
    let mut g = 1.0;
    for r in rewards {
        total += g * r;
        g *= gamma;
    }
    total
}

/// Uniformly weighted particle set.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleBelief<S> {
    particles: Vec<S>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BeliefError {
    #[error("no particle matched the observation after {attempts} attempts")]
    Depleted { attempts: usize },
    #[error("a belief needs at least one particle")]
    Empty,
}

impl<S: Clone> ParticleBelief<S> {
    pub fn new(particles: Vec<S>) -> Result<Self, BeliefError> {
        if particles.is_empty() {
            return Err(BeliefError::Empty);
        }
        Ok(ParticleBelief { particles })
    }

    /// `count` particles drawn from the model's prior given the true start
    /// state.
    pub fn from_prior<M, R>(model: &M, truth: &S, count: usize, rng: &mut R) -> Self
    where
        M: GenerativeModel<State = S>,
        R: Rng + ?Sized,
    {
        assert!(count > 0);
        ParticleBelief { particles: (0..count).map(|_| model.sample_belief_particle(truth, rng)).collect() }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[S] {
        &self.particles
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &S {
        &self.particles[rng.random_range(0..self.particles.len())]
    }

    /// Fraction of particles satisfying `pred`.
    pub fn fraction(&self, pred: impl Fn(&S) -> bool) -> f64 {
        self.particles.iter().filter(|p| pred(p)).count() as f64 / self.particles.len() as f64
    }
}

/// Particle filter settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeliefConfig {
    /// Particle count kept after every update.
    pub budget: usize,
    /// Rejection and reinvigoration each try at most `budget * attempt_factor`
    /// simulations.
    pub attempt_factor: usize,
}

impl Default for BeliefConfig {
    fn default() -> Self {
        BeliefConfig { budget: 1024, attempt_factor: 20 }
    }
}

/// Mutations tried per propagated particle when rejection finds nothing.
const MUTATIONS: usize = 8;

/// Rejection-sampling update followed by reinvigoration up to the budget.
pub fn belief_update<M, R>(
    belief: &ParticleBelief<M::State>,
    action: usize,
    observation: &M::Observation,
    model: &M,
    config: &BeliefConfig,
    rng: &mut R,
) -> Result<ParticleBelief<M::State>, BeliefError>
where
    M: GenerativeModel,
    R: Rng + ?Sized,
{
    let budget = config.budget.max(1);
    let max_attempts = budget * config.attempt_factor.max(1);
    let mut survivors = Vec::with_capacity(budget);
    let mut attempts = 0;
    while survivors.len() < budget && attempts < max_attempts {
        attempts += 1;
        let mut s = belief.sample(rng).clone();
        let out = model.step(&mut s, action, rng);
        if !out.terminal && out.observation == *observation {
            survivors.push(s);
        }
    }
    if survivors.is_empty() {
        // Nothing matched: mutate propagated particles until some agree.
        let mut tries = 0;
        while survivors.len() < budget && tries < max_attempts {
            tries += 1;
            let mut s = belief.sample(rng).clone();
            if model.step(&mut s, action, rng).terminal {
                continue;
            }
            for _ in 0..MUTATIONS {
                if model.observation_possible(&s, action, observation) {
                    survivors.push(s);
                    break;
                }
                model.perturb(&mut s, rng);
            }
        }
        attempts += tries;
    }
    if survivors.is_empty() {
        return Err(BeliefError::Depleted { attempts });
    }
    let found = survivors.len();
    let mut tries = 0;
    while survivors.len() < budget {
        let mut s = survivors[rng.random_range(0..found)].clone();
        if tries < max_attempts {
            tries += 1;
            model.perturb(&mut s, rng);
            if !model.observation_possible(&s, action, observation) {
                continue;
            }
        }
        survivors.push(s);
    }
    Ok(ParticleBelief { particles: survivors })
}

/// Action-observation pairs since the start of the episode.
#[derive(Clone, Debug, PartialEq)]
pub struct History<O> {
    entries: Vec<(usize, O)>,
}

impl<O> Default for History<O> {
    fn default() -> Self {
        History { entries: Vec::new() }
    }
}

impl<O> History<O> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, action: usize, observation: O) {
        self.entries.push((action, observation));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, O)] {
        &self.entries
    }

    pub fn last(&self) -> Option<&(usize, O)> {
        self.entries.last()
    }
}
