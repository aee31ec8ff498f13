//! Planner interface and the per-plan feature/advice cache shared by the
//! solvers.

use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use rand_chacha::ChaCha8Rng;

use crate::features::{Domain, FeatureLift};
use crate::logic::guidance::Advice;
use crate::logic::{Guidance, Program, RolloutMode, RuleError, RuleSet};
use crate::pomdp::{GenerativeModel, History, ParticleBelief};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("rule evaluation failed: {0}")]
    Rules(#[from] RuleError),
    #[error("cannot plan from an empty belief")]
    EmptyBelief,
}

/// Chooses one action per call from the current belief.
pub trait Planner<M: GenerativeModel> {
    fn plan(
        &mut self,
        model: &M,
        belief: &ParticleBelief<M::State>,
        history: &History<M::Observation>,
        rng: &mut ChaCha8Rng,
    ) -> Result<usize, PlanError>;
}

/// Compiles `rules` for `model`: named bounds come from the domain and body
/// predicates must be the domain's features or derived.
pub fn compile_for<M: Domain>(model: &M, rules: &RuleSet, mode: RolloutMode) -> Result<Guidance, RuleError> {
    let consts: BTreeMap<String, i64> = model.rule_constants();
    let program = Program::compile(rules, &consts, Some(model.feature_predicates()))?;
    Ok(Guidance::new(program, model.action_atoms().to_vec(), mode))
}

/// Advice per observable key, valid for one frozen belief summary.
pub(crate) struct AdviceCache<'a, M: FeatureLift> {
    model: &'a M,
    guidance: &'a Guidance,
    frozen: M::Frozen,
    entries: HashMap<u64, Rc<Advice>>,
}

impl<'a, M: FeatureLift> AdviceCache<'a, M> {
    pub fn new(model: &'a M, guidance: &'a Guidance, particles: &[M::State]) -> Self {
        AdviceCache { model, guidance, frozen: model.freeze(particles), entries: HashMap::new() }
    }

    pub fn get(&mut self, state: &M::State) -> Result<Rc<Advice>, RuleError> {
        let key = self.model.observable_key(state);
        if let Some(a) = self.entries.get(&key) {
            return Ok(a.clone());
        }
        let fs = self.model.lift(&self.frozen, state);
        let a = Rc::new(self.guidance.advise(&fs)?);
        self.entries.insert(key, a.clone());
        Ok(a)
    }
}
