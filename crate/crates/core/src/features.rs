//! Lifting beliefs to ground feature atoms, and the domain interface used
//! by the planners.

use smallvec::SmallVec;

use crate::logic::FeatureSet;
use crate::pomdp::GenerativeModel;

/// `round(100·p / bucket)·bucket`, rounding halves up, clamped to [0, 100].
pub fn discretize_prob(p: f64, bucket: u32) -> i64 {
    let b = bucket.max(1) as f64;
    let v = ((100.0 * p / b) + 0.5).floor() * b;
    v.clamp(0.0, 100.0) as i64
}

/// Exact integer form of [`discretize_prob`] for `p = hits / total`.
pub fn discretize_count(hits: usize, total: usize, bucket: u32) -> i64 {
    assert!(total > 0 && hits <= total);
    let b = bucket.max(1) as u64;
    let (k, n) = (hits as u64, total as u64);
    let steps = (200 * k + b * n) / (2 * b * n);
    ((steps * b) as i64).min(100)
}

/// Feature map split into a part computed once per belief (unobservable,
/// frozen during search) and a part recomputed from each simulated state.
pub trait FeatureLift: GenerativeModel {
    type Frozen: Clone + Send + Sync;

    fn freeze(&self, particles: &[Self::State]) -> Self::Frozen;

    /// Features of `state` given the frozen belief summary.
    fn lift(&self, frozen: &Self::Frozen, state: &Self::State) -> FeatureSet;

    /// Key of everything `lift` reads from `state`. Equal keys give equal
    /// feature sets for the same frozen summary.
    fn observable_key(&self, state: &Self::State) -> u64;

    /// Feature predicates this map can emit.
    fn feature_predicates(&self) -> &'static [&'static str];

    /// The feature set of a whole belief.
    fn belief_features(&self, particles: &[Self::State]) -> FeatureSet {
        self.lift(&self.freeze(particles), &particles[0])
    }
}

/// Domain knowledge used by baselines and bounds.
pub trait Domain: FeatureLift {
    /// Short identifier used in trace headers, e.g. `rocksample(12,4)`.
    fn name(&self) -> String;

    /// Hand-coded preferred actions for `state`; never empty.
    fn preferred_actions(&self, state: &Self::State) -> SmallVec<[usize; 8]>;

    /// Fixed action of the trivial default policy.
    fn default_action(&self) -> usize;

    /// Optimistic per-state value from the determinised problem.
    fn hindsight_bound(&self, state: &Self::State) -> f64;

    /// Values bound to named aggregate limits in rule files.
    fn rule_constants(&self) -> std::collections::BTreeMap<String, i64> {
        Default::default()
    }
}
