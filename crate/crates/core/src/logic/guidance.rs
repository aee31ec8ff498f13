//! Rollout weights from entailed actions and coverage values.

use std::collections::BTreeMap;

use rand::Rng;

use super::atom::{FeatureSet, GroundAtom, Symbol};
use super::eval::{Derivation, Program};
use super::RuleError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RolloutMode {
    /// Actions that are not entailed keep the minimum coverage weight.
    Soft,
    /// Actions that are not entailed get zero weight.
    Strict,
}

/// Whether the derived atom `d` suggests the action slot `slot`.
///
/// A slot matches itself, a constant slot matches any atom of its predicate
/// (`sample` is suggested by `sample(3)`), and `east` is suggested by `exit`.
pub fn suggests(d: &GroundAtom, slot: &GroundAtom) -> bool {
    if d == slot {
        return true;
    }
    if slot.args.is_empty() && d.pred == slot.pred {
        return true;
    }
    slot.args.is_empty() && slot.pred.as_str() == "east" && d.pred.as_str() == "exit" && d.args.is_empty()
}

fn coverage_of(cov: &BTreeMap<String, f64>, fallback: f64, pred: &Symbol) -> f64 {
    cov.get(pred.as_str()).copied().unwrap_or(fallback)
}

/// Per-slot weights before normalisation, plus which slots are entailed.
pub fn raw_weights(
    derived: &[GroundAtom],
    coverage: &BTreeMap<String, f64>,
    slots: &[GroundAtom],
    mode: RolloutMode,
) -> (Vec<f64>, Vec<bool>) {
    assert!(!slots.is_empty(), "empty action space");
    let fallback = coverage.values().copied().fold(f64::INFINITY, f64::min);
    let fallback = if fallback.is_finite() { fallback } else { 100.0 };
    let floor = slots
        .iter()
        .map(|s| coverage_of(coverage, fallback, &s.pred))
        .fold(f64::INFINITY, f64::min)
        .max(1.0);
    let mut weights = Vec::with_capacity(slots.len());
    let mut entailed = Vec::with_capacity(slots.len());
    for slot in slots {
        let best = derived
            .iter()
            .filter(|d| suggests(d, slot))
            .map(|d| coverage_of(coverage, fallback, &d.pred))
            .fold(None, |acc: Option<f64>, c| Some(acc.map_or(c, |a| a.max(c))));
        entailed.push(best.is_some());
        weights.push(match (best, mode) {
            (Some(c), _) => c,
            (None, RolloutMode::Soft) => floor,
            (None, RolloutMode::Strict) => 0.0,
        });
    }
    (weights, entailed)
}

fn normalise(mut w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        let u = 1.0 / w.len() as f64;
        w.iter_mut().for_each(|x| *x = u);
    } else {
        w.iter_mut().for_each(|x| *x /= total);
    }
    w
}

/// Normalised rollout distribution over `slots`. Strict mode with nothing
/// entailed falls back to uniform.
pub fn rollout_weights(
    program: &Program,
    features: &FeatureSet,
    slots: &[GroundAtom],
    mode: RolloutMode,
) -> Result<Vec<f64>, RuleError> {
    let d = program.evaluate(features)?;
    Ok(normalise(raw_weights(&d.actions, &program.rules().coverage, slots, mode).0))
}

/// Draws an index with probability proportional to `weights`. Equal weights
/// draw through a plain uniform range, so an uninformative distribution uses
/// the random stream exactly like unguided rollouts.
pub fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let n = weights.len();
    if weights.iter().all(|w| *w == weights[0]) {
        return rng.random_range(0..n);
    }
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(n - 1)
}

/// Advice for one feature set: slot probabilities and entailed slots.
#[derive(Clone, Debug, PartialEq)]
pub struct Advice {
    pub weights: Vec<f64>,
    pub entailed: Vec<bool>,
}

/// A compiled program bound to an action space and rollout mode.
#[derive(Clone, Debug)]
pub struct Guidance {
    pub program: Program,
    pub slots: Vec<GroundAtom>,
    pub mode: RolloutMode,
}

impl Guidance {
    pub fn new(program: Program, slots: Vec<GroundAtom>, mode: RolloutMode) -> Self {
        Guidance { program, slots, mode }
    }

    pub fn advise(&self, features: &FeatureSet) -> Result<Advice, RuleError> {
        let d: Derivation = self.program.evaluate(features)?;
        let (w, entailed) = raw_weights(&d.actions, &self.program.rules().coverage, &self.slots, self.mode);
        Ok(Advice { weights: normalise(w), entailed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::atom::atom;
    use crate::logic::parser::parse_rules;
    use rand::{Rng, SeedableRng};
    use proptest::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn leading_slots() -> Vec<GroundAtom> {
        ["east", "north", "south", "west", "check(1)", "check(2)", "sample"]
            .iter()
            .map(|s| GroundAtom::parse(s).unwrap())
            .collect()
    }

    fn cov() -> BTreeMap<String, f64> {
        BTreeMap::from([("check".into(), 66.0), ("sample".into(), 100.0), ("north".into(), 100.0)])
    }

    #[test]
    fn soft_weights_on_leading_second() {
        let derived = [atom::<i64>("north", []), atom("check", [2])];
        let (w, e) = raw_weights(&derived, &cov(), &leading_slots(), RolloutMode::Soft);
        let p = normalise(w);
        assert!((p[1] - 100.0 / 496.0).abs() < 1e-12);
        for i in [0, 2, 3, 4, 5, 6] {
            assert!((p[i] - 66.0 / 496.0).abs() < 1e-12);
        }
        assert_eq!(e, [false, true, false, false, false, true, false]);
    }

    #[test]
    fn strict_weights_split_sample_and_check() {
        let derived = [atom("sample", [1]), atom("check", [2])];
        let p = normalise(raw_weights(&derived, &cov(), &leading_slots(), RolloutMode::Strict).0);
        assert!((p[6] - 100.0 / 166.0).abs() < 1e-12);
        assert!((p[5] - 66.0 / 166.0).abs() < 1e-12);
        assert_eq!(p.iter().filter(|x| **x == 0.0).count(), 5);
    }

    #[test]
    fn no_rules_is_uniform() {
        let program = Program::compile(&parse_rules("").unwrap(), &BTreeMap::new(), None).unwrap();
        let slots: Vec<GroundAtom> = ["north", "south", "east", "west"].iter().map(|s| GroundAtom::constant(s)).collect();
        for mode in [RolloutMode::Soft, RolloutMode::Strict] {
            let p = rollout_weights(&program, &FeatureSet::new(), &slots, mode).unwrap();
            assert_eq!(p, vec![0.25; 4]);
        }
    }

    #[test]
    fn exit_raises_east_with_exit_coverage() {
        let cov = BTreeMap::from([("east".into(), 57.0), ("exit".into(), 84.0)]);
        let slots = vec![GroundAtom::constant("east"), GroundAtom::constant("west")];
        let (w, e) = raw_weights(&[GroundAtom::constant("exit")], &cov, &slots, RolloutMode::Soft);
        assert_eq!(w, vec![84.0, 57.0]);
        assert_eq!(e, vec![true, false]);
    }

    #[test]
    fn uniform_pick_matches_plain_range() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(pick(&[0.2; 5], &mut a), b.random_range(0..5));
        }
    }

    #[test]
    fn pick_never_returns_zero_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            let i = pick(&[0.0, 0.5, 0.0, 0.5], &mut rng);
            assert!(i == 1 || i == 3);
        }
    }

    fn slot_strategy() -> impl Strategy<Value = Vec<GroundAtom>> {
        Just(leading_slots())
    }

    proptest! {
        #[test]
        fn weights_form_a_distribution(
            slots in slot_strategy(),
            derived in prop::collection::vec(prop::sample::select(vec!["north", "exit", "check(1)", "check(2)", "sample(1)", "west"]), 0..4),
            covs in prop::collection::vec(0.0f64..100.0, 4),
        ) {
            let derived: Vec<GroundAtom> = derived.iter().map(|s| GroundAtom::parse(s).unwrap()).collect();
            let cov = BTreeMap::from([
                ("north".to_string(), covs[0]), ("exit".to_string(), covs[1]),
                ("check".to_string(), covs[2]), ("sample".to_string(), covs[3]),
            ]);
            for mode in [RolloutMode::Soft, RolloutMode::Strict] {
                let (w, e) = raw_weights(&derived, &cov, &slots, mode);
                let p = normalise(w);
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(p.iter().all(|x| *x >= 0.0));
                if mode == RolloutMode::Soft {
                    prop_assert!(p.iter().all(|x| *x > 0.0));
                }
                if derived.contains(&GroundAtom::constant("exit")) {
                    prop_assert!(e[0]);
                }
            }
        }
    }
}
