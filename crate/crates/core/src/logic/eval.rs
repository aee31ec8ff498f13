//! Stratified evaluation of a rule set against a feature set.
//!
//! Evaluation runs in three phases:
//! 1. normal rules that do not depend on any aggregate head,
//! 2. the joint choice of aggregate atoms, optimised under the weak
//!    constraints,
//! 3. the remaining normal rules, given the chosen atoms.
//!
//! When candidate atoms exist, a choice must select at least one of them
//! (`max(l, 1)`); ties between optimal choices go to the smaller set, then to
//! the lexicographically smallest sorted atom list.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use smallvec::SmallVec;

use super::ast::{Atom, Bound, Comparison, Literal, Rule, RuleSet, Term, WeakConstraint};
use super::atom::{FeatureSet, GroundAtom, Symbol, Value};
use super::RuleError;

/// Largest candidate set for which a non-decomposable choice is solved by
/// enumeration.
pub const MAX_BRUTE_FORCE_CANDIDATES: usize = 20;

type Env = SmallVec<[(Symbol, Value); 8]>;

#[derive(Clone, Debug)]
enum Step {
    Match(Atom),
    Neg(Atom),
    Cmp(Comparison),
}

/// A body reordered so negations and comparisons run once their variables
/// are bound.
#[derive(Clone, Debug)]
struct Body {
    steps: Vec<Step>,
}

impl Body {
    fn compile(lits: &[Literal]) -> Body {
        let mut bound: HashSet<Symbol> = HashSet::new();
        let mut pending: Vec<&Literal> =
            lits.iter().filter(|l| !matches!(l, Literal::Pos(_))).collect();
        let mut steps = Vec::with_capacity(lits.len());
        let flush = |bound: &HashSet<Symbol>, pending: &mut Vec<&Literal>, steps: &mut Vec<Step>| {
            pending.retain(|l| {
                let ready = match l {
                    Literal::Neg(a) => a.vars().all(|v| bound.contains(v)),
                    Literal::Cmp(c) => c.vars().all(|v| bound.contains(v)),
                    Literal::Pos(_) => unreachable!(),
                };
                if ready {
                    steps.push(match l {
                        Literal::Neg(a) => Step::Neg(a.clone()),
                        Literal::Cmp(c) => Step::Cmp(c.clone()),
                        Literal::Pos(_) => unreachable!(),
                    });
                }
                !ready
            });
        };
        flush(&bound, &mut pending, &mut steps);
        for l in lits {
            if let Literal::Pos(a) = l {
                steps.push(Step::Match(a.clone()));
                bound.extend(a.vars().cloned());
                flush(&bound, &mut pending, &mut steps);
            }
        }
        debug_assert!(pending.is_empty(), "safety is checked by the parser");
        Body { steps }
    }
}

fn lookup<'a>(env: &'a Env, v: &Symbol) -> Option<&'a Value> {
    env.iter().find(|(k, _)| k == v).map(|(_, val)| val)
}

fn resolve(env: &Env, t: &Term) -> Value {
    match t {
        Term::Const(c) => c.clone(),
        Term::Var(v) => lookup(env, v).cloned().expect("bound variable"),
    }
}

fn ground(env: &Env, a: &Atom) -> GroundAtom {
    GroundAtom { pred: a.pred.clone(), args: a.args.iter().map(|t| resolve(env, t)).collect() }
}

fn holds(env: &Env, c: &Comparison) -> bool {
    c.ops.iter().enumerate().all(|(i, op)| {
        op.holds(&resolve(env, &c.terms[i]), &resolve(env, &c.terms[i + 1]))
    })
}

/// Extends `env` by unifying `pattern` with `fact`; returns how many
/// bindings were pushed, or `None` on mismatch (with `env` restored).
fn unify(env: &mut Env, pattern: &Atom, fact: &GroundAtom) -> Option<usize> {
    if pattern.args.len() != fact.args.len() {
        return None;
    }
    let start = env.len();
    for (t, v) in pattern.args.iter().zip(fact.args.iter()) {
        let ok = match t {
            Term::Const(c) => c == v,
            Term::Var(name) => match lookup(env, name) {
                Some(existing) => existing == v,
                None => {
                    env.push((name.clone(), v.clone()));
                    true
                }
            },
        };
        if !ok {
            env.truncate(start);
            return None;
        }
    }
    Some(env.len() - start)
}

/// Facts visible to a body: the feature set plus derived atoms.
struct Facts<'a> {
    base: &'a FeatureSet,
    derived: &'a FeatureSet,
}

impl Facts<'_> {
    fn with_pred(&self, pred: &Symbol) -> impl Iterator<Item = &GroundAtom> {
        self.base.with_pred(pred).iter().chain(self.derived.with_pred(pred))
    }

    fn contains(&self, a: &GroundAtom) -> bool {
        self.base.contains(a) || self.derived.contains(a)
    }
}

#[derive(Default, Clone)]
struct Marks {
    required: SmallVec<[usize; 2]>,
    forbidden: SmallVec<[usize; 2]>,
}

fn solve(
    steps: &[Step],
    env: &mut Env,
    facts: &Facts<'_>,
    visit: &mut dyn FnMut(&Env),
) {
    let Some((first, rest)) = steps.split_first() else {
        visit(env);
        return;
    };
    match first {
        Step::Match(a) => {
            for fact in facts.with_pred(&a.pred) {
                if let Some(n) = unify(env, a, fact) {
                    solve(rest, env, facts, visit);
                    env.truncate(env.len() - n);
                }
            }
        }
        Step::Neg(a) => {
            if !facts.contains(&ground(env, a)) {
                solve(rest, env, facts, visit);
            }
        }
        Step::Cmp(c) => {
            if holds(env, c) {
                solve(rest, env, facts, visit);
            }
        }
    }
}

/// Like `solve`, but positive and negated literals over the choice
/// predicates are matched against the candidate list and recorded as
/// required / forbidden candidate indices.
fn solve_marked(
    steps: &[Step],
    env: &mut Env,
    facts: &Facts<'_>,
    choice_preds: &HashSet<Symbol>,
    candidates: &[GroundAtom],
    marks: &mut Marks,
    visit: &mut dyn FnMut(&Env, &Marks),
) {
    let Some((first, rest)) = steps.split_first() else {
        visit(env, marks);
        return;
    };
    match first {
        Step::Match(a) if choice_preds.contains(&a.pred) => {
            for (i, cand) in candidates.iter().enumerate() {
                if cand.pred != a.pred {
                    continue;
                }
                if let Some(n) = unify(env, a, cand) {
                    let fresh = !marks.required.contains(&i);
                    if fresh {
                        marks.required.push(i);
                    }
                    solve_marked(rest, env, facts, choice_preds, candidates, marks, visit);
                    if fresh {
                        marks.required.pop();
                    }
                    env.truncate(env.len() - n);
                }
            }
        }
        Step::Neg(a) if choice_preds.contains(&a.pred) => {
            let g = ground(env, a);
            match candidates.binary_search(&g) {
                Ok(i) => {
                    if marks.required.contains(&i) {
                        return;
                    }
                    marks.forbidden.push(i);
                    solve_marked(rest, env, facts, choice_preds, candidates, marks, visit);
                    marks.forbidden.pop();
                }
                Err(_) => solve_marked(rest, env, facts, choice_preds, candidates, marks, visit),
            }
        }
        Step::Match(a) => {
            for fact in facts.with_pred(&a.pred) {
                if let Some(n) = unify(env, a, fact) {
                    solve_marked(rest, env, facts, choice_preds, candidates, marks, visit);
                    env.truncate(env.len() - n);
                }
            }
        }
        Step::Neg(a) => {
            if !facts.contains(&ground(env, a)) {
                solve_marked(rest, env, facts, choice_preds, candidates, marks, visit);
            }
        }
        Step::Cmp(c) => {
            if holds(env, c) {
                solve_marked(rest, env, facts, choice_preds, candidates, marks, visit);
            }
        }
    }
}

#[derive(Clone, Debug)]
struct CompiledRule {
    head: Atom,
    body: Body,
}

#[derive(Clone, Debug)]
struct CompiledAggregate {
    lower: Option<i64>,
    upper: Option<i64>,
    elements: Vec<CompiledRule>,
}

#[derive(Clone, Debug)]
struct CompiledWeak {
    source: WeakConstraint,
    body: Body,
}

/// Identity of a weak-constraint violation: `(weight, level, terms)`.
/// Equal tuples are paid once.
type CostTuple = (i64, i64, Vec<Value>);

/// Per-level cost sums, compared from the highest level down.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cost(BTreeMap<i64, i64>);

impl Cost {
    fn add(&mut self, level: i64, w: i64) {
        *self.0.entry(level).or_insert(0) += w;
    }

    fn merged(&self, other: &Cost) -> Cost {
        let mut out = self.clone();
        for (l, w) in &other.0 {
            out.add(*l, *w);
        }
        out
    }

    /// Sign of the first non-zero level from the top.
    fn sign(&self) -> std::cmp::Ordering {
        for w in self.0.values().rev() {
            if *w != 0 {
                return w.cmp(&0);
            }
        }
        std::cmp::Ordering::Equal
    }
}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let levels: BTreeSet<i64> = self.0.keys().chain(other.0.keys()).copied().collect();
        for l in levels.into_iter().rev() {
            let a = self.0.get(&l).copied().unwrap_or(0);
            let b = other.0.get(&l).copied().unwrap_or(0);
            match a.cmp(&b) {
                std::cmp::Ordering::Equal => continue,
                o => return o,
            }
        }
        std::cmp::Ordering::Equal
    }
}

/// Result of evaluating a program on one feature set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Derivation {
    /// Every derived atom, including chosen aggregate atoms.
    pub derived: FeatureSet,
    /// Atoms of action predicates, with `exit` as written in the rules.
    pub actions: Vec<GroundAtom>,
    /// Chosen aggregate atoms.
    pub chosen: Vec<GroundAtom>,
    /// Cost of the chosen set under the weak constraints.
    pub cost: Cost,
    /// The aggregate bounds could not be met by any choice.
    pub unsatisfiable: bool,
}

impl Derivation {
    /// Entailed actions with `exit` reported as `east`.
    pub fn entailed(&self) -> BTreeSet<GroundAtom> {
        let exit = Symbol::new("exit");
        self.actions
            .iter()
            .map(|a| if a.pred == exit && a.args.is_empty() { GroundAtom::constant("east") } else { a.clone() })
            .collect()
    }
}

/// A rule set compiled for repeated evaluation.
#[derive(Clone, Debug)]
pub struct Program {
    phase_a: Vec<CompiledRule>,
    phase_c: Vec<CompiledRule>,
    aggregates: Vec<CompiledAggregate>,
    weak: Vec<CompiledWeak>,
    choice_preds: HashSet<Symbol>,
    action_preds: BTreeSet<Symbol>,
    declared: Option<HashSet<Symbol>>,
    source: RuleSet,
}

fn body_preds(body: &[Literal]) -> impl Iterator<Item = &Symbol> {
    body.iter().filter_map(|l| match l {
        Literal::Pos(a) | Literal::Neg(a) => Some(&a.pred),
        Literal::Cmp(_) => None,
    })
}

/// Orders rules so each head is computed before any body that uses it.
fn topo_order(rules: &[Rule]) -> Result<Vec<usize>, RuleError> {
    let heads: HashSet<&Symbol> = rules.iter().map(|r| &r.head.pred).collect();
    let mut deps: HashMap<&Symbol, BTreeSet<&Symbol>> = HashMap::new();
    for r in rules {
        let entry = deps.entry(&r.head.pred).or_default();
        for p in body_preds(&r.body) {
            if heads.contains(p) {
                entry.insert(p);
            }
        }
    }
    let mut done: Vec<&Symbol> = Vec::new();
    let mut state: HashMap<&Symbol, u8> = HashMap::new();
    fn visit<'a>(
        p: &'a Symbol,
        deps: &HashMap<&'a Symbol, BTreeSet<&'a Symbol>>,
        state: &mut HashMap<&'a Symbol, u8>,
        done: &mut Vec<&'a Symbol>,
    ) -> Result<(), RuleError> {
        match state.get(p) {
            Some(2) => return Ok(()),
            Some(1) => return Err(RuleError::Cycle(p.to_string())),
            _ => {}
        }
        state.insert(p, 1);
        for d in &deps[p] {
            visit(d, deps, state, done)?;
        }
        state.insert(p, 2);
        done.push(p);
        Ok(())
    }
    let mut firsts: Vec<&Symbol> = Vec::new();
    for r in rules {
        if !firsts.contains(&&r.head.pred) {
            firsts.push(&r.head.pred);
        }
    }
    for p in firsts {
        visit(p, &deps, &mut state, &mut done)?;
    }
    let mut order = Vec::with_capacity(rules.len());
    for p in done {
        order.extend((0..rules.len()).filter(|&i| &rules[i].head.pred == p));
    }
    Ok(order)
}

impl Program {
    /// Compiles `rules`. Named aggregate bounds resolve through `constants`;
    /// an unresolved upper bound is unlimited and an unresolved lower bound
    /// is zero. With `features` given, every body predicate must be derived
    /// or declared there.
    pub fn compile(
        rules: &RuleSet,
        constants: &BTreeMap<String, i64>,
        features: Option<&[&str]>,
    ) -> Result<Program, RuleError> {
        let choice_preds: HashSet<Symbol> = rules
            .aggregates
            .iter()
            .flat_map(|a| a.elements.iter().map(|e| e.head.pred.clone()))
            .collect();
        let derived: HashSet<Symbol> =
            rules.rules.iter().map(|r| r.head.pred.clone()).chain(choice_preds.iter().cloned()).collect();

        let mut consumed: HashSet<Symbol> = HashSet::new();
        for r in &rules.rules {
            consumed.extend(body_preds(&r.body).cloned());
        }
        for a in &rules.aggregates {
            for e in &a.elements {
                consumed.extend(body_preds(&e.condition).cloned());
            }
        }
        let action_preds: BTreeSet<Symbol> =
            derived.iter().filter(|p| !consumed.contains(*p)).cloned().collect();

        let declared: Option<HashSet<Symbol>> =
            features.map(|fs| fs.iter().map(|s| Symbol::new(s)).collect());
        if let Some(decl) = &declared {
            let all_bodies = rules
                .rules
                .iter()
                .map(|r| &r.body)
                .chain(rules.aggregates.iter().flat_map(|a| a.elements.iter().map(|e| &e.condition)))
                .chain(rules.weak.iter().map(|w| &w.body));
            for body in all_bodies {
                for p in body_preds(body) {
                    if !derived.contains(p) && !decl.contains(p) {
                        return Err(RuleError::UndeclaredPredicate(p.to_string()));
                    }
                }
            }
        }

        // Predicates that depend, directly or not, on a choice.
        let mut late: HashSet<Symbol> = choice_preds.clone();
        loop {
            let before = late.len();
            for r in &rules.rules {
                if body_preds(&r.body).any(|p| late.contains(p)) {
                    late.insert(r.head.pred.clone());
                }
            }
            if late.len() == before {
                break;
            }
        }
        for p in &choice_preds {
            for a in &rules.aggregates {
                for e in &a.elements {
                    if body_preds(&e.condition).any(|q| late.contains(q)) {
                        return Err(RuleError::Cycle(p.to_string()));
                    }
                }
            }
        }
        let mut early_rules = Vec::new();
        let mut late_rules = Vec::new();
        for r in &rules.rules {
            if late.contains(&r.head.pred) {
                late_rules.push(r.clone());
            } else {
                early_rules.push(r.clone());
            }
        }
        let compile_rules = |rs: &[Rule]| -> Result<Vec<CompiledRule>, RuleError> {
            Ok(topo_order(rs)?
                .into_iter()
                .map(|i| CompiledRule { head: rs[i].head.clone(), body: Body::compile(&rs[i].body) })
                .collect())
        };
        let phase_a = compile_rules(&early_rules)?;
        let phase_c = compile_rules(&late_rules)?;

        let resolve_bound = |b: &crate::logic::ast::Bound| match b {
            Bound::Int(i) => Some(*i),
            Bound::Named(s) => constants.get(s.as_str()).copied(),
        };
        let aggregates = rules
            .aggregates
            .iter()
            .map(|a| CompiledAggregate {
                lower: resolve_bound(&a.lower),
                upper: resolve_bound(&a.upper),
                elements: a
                    .elements
                    .iter()
                    .map(|e| CompiledRule { head: e.head.clone(), body: Body::compile(&e.condition) })
                    .collect(),
            })
            .collect();

        let mut weak = Vec::new();
        for w in &rules.weak {
            if body_preds(&w.body).any(|p| late.contains(p) && !choice_preds.contains(p)) {
                return Err(RuleError::WeakConstraintScope(w.to_string()));
            }
            if let Term::Const(c) = &w.weight.term {
                if c.as_int().is_none() {
                    return Err(RuleError::NonIntegerWeight(w.weight.to_string()));
                }
            }
            weak.push(CompiledWeak { source: w.clone(), body: Body::compile(&w.body) });
        }

        Ok(Program {
            phase_a,
            phase_c,
            aggregates,
            weak,
            choice_preds,
            action_preds,
            declared,
            source: rules.clone(),
        })
    }

    pub fn rules(&self) -> &RuleSet {
        &self.source
    }

    /// Predicates whose atoms are reported as actions: derived and never
    /// used in a rule or aggregate body.
    pub fn action_predicates(&self) -> &BTreeSet<Symbol> {
        &self.action_preds
    }

    fn fire(rules: &[CompiledRule], base: &FeatureSet, derived: &mut FeatureSet) {
        for r in rules {
            let mut out = Vec::new();
            {
                let facts = Facts { base, derived };
                let mut env = Env::new();
                solve(&r.body.steps, &mut env, &facts, &mut |env| out.push(ground(env, &r.head)));
            }
            derived.extend(out);
        }
    }

    /// Evaluates the program on `features`.
    pub fn evaluate(&self, features: &FeatureSet) -> Result<Derivation, RuleError> {
        if let Some(decl) = &self.declared {
            if let Some(bad) = features.iter().find(|a| !decl.contains(&a.pred)) {
                return Err(RuleError::UndeclaredPredicate(bad.pred.to_string()));
            }
        }
        let mut derived = FeatureSet::new();
        Self::fire(&self.phase_a, features, &mut derived);

        let mut out = Derivation::default();
        if !self.aggregates.is_empty() {
            match self.choose(features, &derived)? {
                Some((chosen, cost)) => {
                    derived.extend(chosen.iter().cloned());
                    out.chosen = chosen;
                    out.cost = cost;
                }
                None => {
                    out.unsatisfiable = true;
                    return Ok(out);
                }
            }
        }
        Self::fire(&self.phase_c, features, &mut derived);
        out.actions = derived.iter().filter(|a| self.action_preds.contains(&a.pred)).cloned().collect();
        out.derived = derived;
        Ok(out)
    }

    /// Grounds every aggregate and picks the weak-constraint-optimal choice.
    fn choose(
        &self,
        features: &FeatureSet,
        early: &FeatureSet,
    ) -> Result<Option<(Vec<GroundAtom>, Cost)>, RuleError> {
        let facts = Facts { base: features, derived: early };
        let mut per_agg: Vec<BTreeSet<GroundAtom>> = Vec::with_capacity(self.aggregates.len());
        for agg in &self.aggregates {
            let mut cands = BTreeSet::new();
            for e in &agg.elements {
                let mut env = Env::new();
                solve(&e.body.steps, &mut env, &facts, &mut |env| {
                    cands.insert(ground(env, &e.head));
                });
            }
            per_agg.push(cands);
        }
        let candidates: Vec<GroundAtom> =
            per_agg.iter().flatten().cloned().collect::<BTreeSet<_>>().into_iter().collect();
        let bounds: Vec<(usize, usize, Vec<usize>)> = self
            .aggregates
            .iter()
            .zip(&per_agg)
            .map(|(agg, cands)| {
                let n = cands.len();
                let lower = agg.lower.unwrap_or(0).max(0) as usize;
                let lower = if n > 0 { lower.max(1) } else { lower };
                let upper = agg.upper.map_or(n, |u| (u.max(0) as usize).min(n));
                let members =
                    cands.iter().map(|c| candidates.binary_search(c).expect("candidate")).collect();
                (lower, upper, members)
            })
            .collect();
        if bounds.iter().any(|(l, u, _)| l > u) {
            return Ok(None);
        }

        // Ground weak constraint instances against every candidate.
        let mut instances: Vec<(CostTuple, Marks)> = Vec::new();
        let mut bad_weight = None;
        for w in &self.weak {
            let mut env = Env::new();
            let mut marks = Marks::default();
            solve_marked(
                &w.body.steps,
                &mut env,
                &facts,
                &self.choice_preds,
                &candidates,
                &mut marks,
                &mut |env, marks| {
                    let value = resolve(env, &w.source.weight.term);
                    let Some(raw) = value.as_int() else {
                        bad_weight = Some(value.to_string());
                        return;
                    };
                    let weight = if w.source.weight.negated { -raw } else { raw };
                    let terms = w.source.terms.iter().map(|t| resolve(env, t)).collect();
                    instances.push(((weight, w.source.level, terms), marks.clone()));
                },
            );
        }
        if let Some(bad) = bad_weight {
            return Err(RuleError::NonIntegerWeight(bad));
        }

        if bounds.len() == 1 {
            if let Some(res) = greedy_choice(&candidates, &instances, bounds[0].0, bounds[0].1) {
                return Ok(Some(res));
            }
        }
        if candidates.len() > MAX_BRUTE_FORCE_CANDIDATES {
            return Err(RuleError::ChoiceTooLarge {
                candidates: candidates.len(),
                limit: MAX_BRUTE_FORCE_CANDIDATES,
            });
        }
        Ok(brute_force_choice(&candidates, &instances, &bounds))
    }
}

/// Closed-form choice when each weak instance needs exactly one candidate,
/// forbids none, and no cost tuple is shared between candidates. Then every
/// candidate carries an independent cost and the optimum takes the cheapest
/// ones.
fn greedy_choice(
    candidates: &[GroundAtom],
    instances: &[(CostTuple, Marks)],
    lower: usize,
    upper: usize,
) -> Option<(Vec<GroundAtom>, Cost)> {
    let mut owner: HashMap<&CostTuple, usize> = HashMap::new();
    let mut per_cand: Vec<BTreeSet<&CostTuple>> = vec![BTreeSet::new(); candidates.len()];
    for (tuple, marks) in instances {
        if marks.required.len() != 1 || !marks.forbidden.is_empty() {
            return None;
        }
        let c = marks.required[0];
        if *owner.entry(tuple).or_insert(c) != c {
            return None;
        }
        per_cand[c].insert(tuple);
    }
    let mut costs: Vec<(Cost, usize)> = per_cand
        .iter()
        .enumerate()
        .map(|(i, tuples)| {
            let mut cost = Cost::default();
            for (w, l, _) in tuples {
                cost.add(*l, *w);
            }
            (cost, i)
        })
        .collect();
    costs.sort();
    let negative = costs.iter().filter(|(c, _)| c.sign() == std::cmp::Ordering::Less).count();
    let k = negative.clamp(lower, upper);
    let mut chosen: Vec<usize> = costs[..k].iter().map(|(_, i)| *i).collect();
    chosen.sort();
    let total = costs[..k].iter().fold(Cost::default(), |acc, (c, _)| acc.merged(c));
    Some((chosen.into_iter().map(|i| candidates[i].clone()).collect(), total))
}

fn subset_cost(mask: u64, instances: &[(CostTuple, Marks)]) -> Cost {
    let mut paid: HashSet<&CostTuple> = HashSet::new();
    let mut cost = Cost::default();
    for (tuple, marks) in instances {
        let active = marks.required.iter().all(|&i| mask >> i & 1 == 1)
            && marks.forbidden.iter().all(|&i| mask >> i & 1 == 0);
        if active && paid.insert(tuple) {
            cost.add(tuple.1, tuple.0);
        }
    }
    cost
}

fn brute_force_choice(
    candidates: &[GroundAtom],
    instances: &[(CostTuple, Marks)],
    bounds: &[(usize, usize, Vec<usize>)],
) -> Option<(Vec<GroundAtom>, Cost)> {
    let n = candidates.len();
    let mut best: Option<(Cost, u32, Vec<usize>, u64)> = None;
    for mask in 0u64..(1u64 << n) {
        let feasible = bounds.iter().all(|(l, u, members)| {
            let k = members.iter().filter(|&&i| mask >> i & 1 == 1).count();
            *l <= k && k <= *u
        });
        if !feasible {
            continue;
        }
        let cost = subset_cost(mask, instances);
        let size = mask.count_ones();
        let idx: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        let better = match &best {
            None => true,
            Some((bc, bs, bi, _)) => (&cost, size, &idx) < (bc, *bs, bi),
        };
        if better {
            best = Some((cost, size, idx, mask));
        }
    }
    best.map(|(cost, _, idx, _)| (idx.into_iter().map(|i| candidates[i].clone()).collect(), cost))
}

/// Ground actions entailed by `rules` on `features`, with `exit` reported
/// as `east`. Named bounds stay unresolved (unlimited).
pub fn entailed_actions(rules: &RuleSet, features: &FeatureSet) -> Result<BTreeSet<GroundAtom>, RuleError> {
    let program = Program::compile(rules, &BTreeMap::new(), None)?;
    Ok(program.evaluate(features)?.entailed())
}
