//! A naive evaluator used as an oracle for the rule engine: grounds bodies
//! by trying every assignment of values, and picks the aggregate choice by
//! scoring every subset of candidates.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::Rng;
use rulepomdp::logic::{atom, Atom, CmpOp, FeatureSet, GroundAtom, Literal, Rule, RuleSet, Symbol, Term, Value};

type Binding = BTreeMap<String, Value>;

fn term_value(t: &Term, b: &Binding) -> Value {
    match t {
        Term::Var(v) => b[v.as_str()].clone(),
        Term::Const(c) => c.clone(),
    }
}

fn ground(a: &Atom, b: &Binding) -> GroundAtom {
    GroundAtom::new(a.pred.clone(), a.args.iter().map(|t| term_value(t, b)))
}

fn cmp(op: CmpOp, l: &Value, r: &Value) -> bool {
    use std::cmp::Ordering::*;
    let o = l.cmp(r);
    match op {
        CmpOp::Lt => o == Less,
        CmpOp::Le => o != Greater,
        CmpOp::Gt => o == Greater,
        CmpOp::Ge => o != Less,
        CmpOp::Eq => o == Equal,
        CmpOp::Ne => o != Equal,
    }
}

fn holds(body: &[Literal], b: &Binding, facts: &BTreeSet<GroundAtom>) -> bool {
    body.iter().all(|l| match l {
        Literal::Pos(a) => facts.contains(&ground(a, b)),
        Literal::Neg(a) => !facts.contains(&ground(a, b)),
        Literal::Cmp(c) => c
            .ops
            .iter()
            .enumerate()
            .all(|(i, op)| cmp(*op, &term_value(&c.terms[i], b), &term_value(&c.terms[i + 1], b))),
    })
}

fn body_vars(body: &[Literal], head: Option<&Atom>) -> Vec<String> {
    let mut out = BTreeSet::new();
    let mut add = |t: &Term| {
        if let Term::Var(v) = t {
            out.insert(v.as_str().to_string());
        }
    };
    for l in body {
        match l {
            Literal::Pos(a) | Literal::Neg(a) => a.args.iter().for_each(&mut add),
            Literal::Cmp(c) => c.terms.iter().for_each(&mut add),
        }
    }
    if let Some(h) = head {
        h.args.iter().for_each(&mut add);
    }
    out.into_iter().collect()
}

/// Every binding of `vars` over `domain` that satisfies `body`.
fn bindings(vars: &[String], domain: &[Value], body: &[Literal], facts: &BTreeSet<GroundAtom>) -> Vec<Binding> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; vars.len()];
    if domain.is_empty() && !vars.is_empty() {
        return out;
    }
    loop {
        let b: Binding = vars.iter().cloned().zip(idx.iter().map(|&i| domain[i].clone())).collect();
        if holds(body, &b, facts) {
            out.push(b);
        }
        let mut k = 0;
        loop {
            if k == vars.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < domain.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn preds(body: &[Literal]) -> impl Iterator<Item = &Symbol> {
    body.iter().filter_map(|l| match l {
        Literal::Pos(a) | Literal::Neg(a) => Some(&a.pred),
        Literal::Cmp(_) => None,
    })
}

/// Applies `rules` stratum by stratum: a rule runs once every rule whose
/// head it uses has run.
fn apply(rules: &[Rule], domain: &[Value], facts: &mut BTreeSet<GroundAtom>) {
    let mut pending: Vec<&Rule> = rules.iter().collect();
    while !pending.is_empty() {
        let heads: HashSet<&Symbol> = pending.iter().map(|r| &r.head.pred).collect();
        let (ready, rest): (Vec<&Rule>, Vec<&Rule>) = pending
            .iter()
            .partition(|r| preds(&r.body).all(|p| !heads.contains(p)));
        assert!(!ready.is_empty(), "recursive rules");
        for r in ready {
            let vars = body_vars(&r.body, Some(&r.head));
            for b in bindings(&vars, domain, &r.body, facts) {
                facts.insert(ground(&r.head, &b));
            }
        }
        pending = rest;
    }
}

fn cost_key(costs: &BTreeMap<i64, i64>) -> Vec<i64> {
    // Highest level first; compare sums level by level.
    let top = costs.keys().copied().max().unwrap_or(0);
    let bottom = costs.keys().copied().min().unwrap_or(0);
    (bottom..=top).rev().map(|l| costs.get(&l).copied().unwrap_or(0)).collect()
}

/// Entailed actions, with `exit` reported as `east`.
pub fn entailed(rules: &RuleSet, consts: &BTreeMap<String, i64>, features: &FeatureSet) -> BTreeSet<GroundAtom> {
    let domain: Vec<Value> =
        features.iter().flat_map(|a| a.args.iter().cloned()).collect::<BTreeSet<_>>().into_iter().collect();
    let choice: HashSet<Symbol> =
        rules.aggregates.iter().flat_map(|a| a.elements.iter().map(|e| e.head.pred.clone())).collect();
    let mut late: HashSet<Symbol> = choice.clone();
    loop {
        let n = late.len();
        for r in &rules.rules {
            if preds(&r.body).any(|p| late.contains(p)) {
                late.insert(r.head.pred.clone());
            }
        }
        if late.len() == n {
            break;
        }
    }
    let (late_rules, early_rules): (Vec<Rule>, Vec<Rule>) =
        rules.rules.iter().cloned().partition(|r| late.contains(&r.head.pred));
    let mut facts: BTreeSet<GroundAtom> = features.iter().cloned().collect();
    apply(&early_rules, &domain, &mut facts);

    if !rules.aggregates.is_empty() {
        let mut all: BTreeSet<GroundAtom> = BTreeSet::new();
        let mut per: Vec<BTreeSet<GroundAtom>> = Vec::new();
        for agg in &rules.aggregates {
            let mut c = BTreeSet::new();
            for e in &agg.elements {
                let vars = body_vars(&e.condition, Some(&e.head));
                for b in bindings(&vars, &domain, &e.condition, &facts) {
                    c.insert(ground(&e.head, &b));
                }
            }
            all.extend(c.iter().cloned());
            per.push(c);
        }
        let cands: Vec<GroundAtom> = all.into_iter().collect();
        let bound = |b: &rulepomdp::logic::Bound| match b {
            rulepomdp::logic::Bound::Int(i) => Some(*i),
            rulepomdp::logic::Bound::Named(s) => consts.get(s.as_str()).copied(),
        };
        let mut best: Option<(Vec<i64>, usize, Vec<GroundAtom>)> = None;
        for mask in 0u64..(1 << cands.len()) {
            let chosen: Vec<GroundAtom> =
                (0..cands.len()).filter(|i| mask >> i & 1 == 1).map(|i| cands[i].clone()).collect();
            let ok = rules.aggregates.iter().zip(&per).all(|(agg, c)| {
                let k = chosen.iter().filter(|a| c.contains(a)).count() as i64;
                let lo = bound(&agg.lower).unwrap_or(0);
                let lo = if c.is_empty() { lo } else { lo.max(1) };
                let hi = bound(&agg.upper).unwrap_or(i64::MAX);
                lo <= k && k <= hi
            });
            if !ok {
                continue;
            }
            let mut world = facts.clone();
            world.extend(chosen.iter().cloned());
            let mut tuples: BTreeSet<(i64, i64, Vec<Value>)> = BTreeSet::new();
            for w in &rules.weak {
                let vars = body_vars(&w.body, None);
                for b in bindings(&vars, &domain, &w.body, &world) {
                    let v = term_value(&w.weight.term, &b).as_int().unwrap();
                    let v = if w.weight.negated { -v } else { v };
                    tuples.insert((v, w.level, w.terms.iter().map(|t| term_value(t, &b)).collect()));
                }
            }
            let mut costs: BTreeMap<i64, i64> = BTreeMap::new();
            for (v, l, _) in &tuples {
                *costs.entry(*l).or_insert(0) += v;
            }
            let levels: BTreeSet<i64> = rules.weak.iter().map(|w| w.level).collect();
            for l in levels {
                costs.entry(l).or_insert(0);
            }
            let key = (cost_key(&costs), chosen.len(), chosen.clone());
            if best.as_ref().is_none_or(|b| key < *b) {
                best = Some(key);
            }
        }
        match best {
            Some((_, _, chosen)) => facts.extend(chosen),
            None => return BTreeSet::new(),
        }
    }
    apply(&late_rules, &domain, &mut facts);

    let consumed: HashSet<&Symbol> = rules
        .rules
        .iter()
        .flat_map(|r| preds(&r.body))
        .chain(rules.aggregates.iter().flat_map(|a| a.elements.iter().flat_map(|e| preds(&e.condition))))
        .collect();
    let derived: HashSet<&Symbol> = rules.rules.iter().map(|r| &r.head.pred).chain(choice.iter()).collect();
    facts
        .into_iter()
        .filter(|a| derived.contains(&a.pred) && !consumed.contains(&a.pred))
        .map(|a| if a.pred.as_str() == "exit" && a.args.is_empty() { GroundAtom::constant("east") } else { a })
        .collect()
}

/// A random rocksample feature set with `rocks` rocks.
pub fn random_rock_features<R: Rng>(rng: &mut R, rocks: i64) -> FeatureSet {
    let mut fs = FeatureSet::new();
    for r in 1..=rocks {
        fs.insert(atom("guess", [r, rng.random_range(0..=10) * 10]));
        fs.insert(atom("dist", [r, rng.random_range(0..=8)]));
        fs.insert(atom("delta_x", [r, rng.random_range(-4..=4)]));
        fs.insert(atom("delta_y", [r, rng.random_range(-4..=4)]));
        if rng.random_bool(0.25) {
            fs.insert(atom("sampled", [r]));
        }
    }
    fs.insert(atom("num_sampled", [rng.random_range(0..=10) * 10]));
    fs
}
