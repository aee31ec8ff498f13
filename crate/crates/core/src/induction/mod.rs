//! Rule learning from CDPIs over a bounded hypothesis space: exhaustive
//! candidate scoring with bitsets and a greedy cover, plus a small search
//! for weak constraints.

mod bias;
mod distance;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use smallvec::SmallVec;

pub use bias::{ArgType, BiasError, ModeBias, ModeDecl};
pub use distance::{literal_set, rule_distance, ruleset_distance, definition_distance};

use crate::cdpi::Cdpi;
use crate::logic::ast::Weight;
use crate::logic::{
    Atom, CmpOp, Comparison, FeatureSet, GroundAtom, Literal, Rule, RuleSet, Term, Value, WeakConstraint,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Threshold {
    Le(i64),
    Ge(i64),
}

impl Threshold {
    fn holds(self, x: i64) -> bool {
        match self {
            Threshold::Le(k) => x <= k,
            Threshold::Ge(k) => x >= k,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BodyItem {
    Obj { decl: usize, negated: bool },
    /// An atom whose integer arguments each carry one threshold.
    Int { decl: usize, tests: SmallVec<[Threshold; 2]> },
}

impl BodyItem {
    fn decl(&self) -> usize {
        match self {
            BodyItem::Obj { decl, .. } | BodyItem::Int { decl, .. } => *decl,
        }
    }

    fn literals(&self) -> usize {
        match self {
            BodyItem::Obj { .. } => 1,
            BodyItem::Int { tests, .. } => 1 + tests.len(),
        }
    }
}

/// A candidate rule body for the bias head, items ordered by declaration.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Candidate {
    pub items: Vec<BodyItem>,
}

impl Candidate {
    pub fn atoms(&self) -> usize {
        self.items.len()
    }

    pub fn literals(&self) -> usize {
        self.items.iter().map(BodyItem::literals).sum()
    }

    pub fn to_rule(&self, bias: &ModeBias) -> Rule {
        let mut names = VarNames::default();
        let head = decl_atom(&bias.head, &mut names);
        let mut body = Vec::new();
        for item in &self.items {
            let d = &bias.body[item.decl()];
            let atom = decl_atom(d, &mut names);
            match item {
                BodyItem::Obj { negated: true, .. } => body.push(Literal::Neg(atom)),
                BodyItem::Obj { .. } => body.push(Literal::Pos(atom)),
                BodyItem::Int { tests, .. } => {
                    let int_vars: Vec<Term> = d
                        .args
                        .iter()
                        .zip(&atom.args)
                        .filter(|(a, _)| matches!(a, ArgType::Int(_)))
                        .map(|(_, t)| t.clone())
                        .collect();
                    body.push(Literal::Pos(atom));
                    for (v, t) in int_vars.into_iter().zip(tests) {
                        let (op, k) = match *t {
                            Threshold::Le(k) => (CmpOp::Le, k),
                            Threshold::Ge(k) => (CmpOp::Ge, k),
                        };
                        body.push(Literal::Cmp(Comparison::binary(v, op, Term::int(k))));
                    }
                }
            }
        }
        Rule { head, body }
    }
}

/// Variable naming: one object variable, fresh integer variables per atom.
#[derive(Default)]
struct VarNames {
    used: BTreeMap<String, usize>,
}

impl VarNames {
    fn letter(ty: &str) -> String {
        match ty {
            "rock" => "R".into(),
            "dir" => "C".into(),
            "perc" => "V".into(),
            "steps" => "D".into(),
            t => t.chars().next().map_or("X".into(), |c| c.to_ascii_uppercase().to_string()),
        }
    }

    fn object(&self, ty: &str) -> Term {
        Term::var(&Self::letter(ty))
    }

    fn fresh(&mut self, ty: &str) -> Term {
        let base = Self::letter(ty);
        let n = self.used.entry(base.clone()).or_insert(0);
        *n += 1;
        if *n == 1 {
            Term::var(&base)
        } else {
            Term::var(&format!("{base}{}", *n - 1))
        }
    }
}

fn decl_atom(d: &ModeDecl, names: &mut VarNames) -> Atom {
    let args = d
        .args
        .iter()
        .map(|a| match a {
            ArgType::Object(t) => names.object(t),
            ArgType::Int(t) => names.fresh(t),
        })
        .collect();
    Atom::new(&d.pred, args)
}

fn int_options(bias: &ModeBias, d: &ModeDecl) -> Vec<SmallVec<[Threshold; 2]>> {
    let mut out: Vec<SmallVec<[Threshold; 2]>> = vec![SmallVec::new()];
    for a in &d.args {
        if let ArgType::Int(t) = a {
            let mut next = Vec::new();
            for prefix in &out {
                for mk in [Threshold::Le as fn(i64) -> Threshold, Threshold::Ge] {
                    for &k in bias.grid(t) {
                        let mut p = prefix.clone();
                        p.push(mk(k));
                        next.push(p);
                    }
                }
            }
            out = next;
        }
    }
    out
}

/// Every safe candidate body within the bias limits, in a fixed order.
/// Integer arguments always carry a threshold.
pub fn enumerate_space(bias: &ModeBias) -> Vec<Candidate> {
    let obj_decls: Vec<usize> = (0..bias.body.len()).filter(|&i| bias.body[i].int_args() == 0).collect();
    let int_decls: Vec<usize> = (0..bias.body.len()).filter(|&i| bias.body[i].int_args() > 0).collect();
    let options: Vec<Vec<SmallVec<[Threshold; 2]>>> =
        int_decls.iter().map(|&i| int_options(bias, &bias.body[i])).collect();
    let head_needs_object = bias.head.has_object();
    let mut out = Vec::new();

    let n_obj = obj_decls.len();
    for code in 0..3usize.pow(n_obj as u32) {
        let mut obj_items = Vec::new();
        let mut c = code;
        for &d in &obj_decls {
            match c % 3 {
                1 => obj_items.push(BodyItem::Obj { decl: d, negated: false }),
                2 => obj_items.push(BodyItem::Obj { decl: d, negated: true }),
                _ => {}
            }
            c /= 3;
        }
        if obj_items.len() > bias.max_atoms {
            continue;
        }
        let obj_pos = obj_items.iter().any(|i| matches!(i, BodyItem::Obj { negated: false, decl } if bias.body[*decl].has_object()));
        let obj_neg = obj_items.iter().any(|i| matches!(i, BodyItem::Obj { negated: true, .. }));
        let max_k = bias.max_int_atoms.min(bias.max_atoms - obj_items.len()).min(int_decls.len());
        for k in 0..=max_k {
            for combo in combinations(int_decls.len(), k) {
                let int_obj = combo.iter().any(|&j| bias.body[int_decls[j]].has_object());
                let positive_object = obj_pos || int_obj;
                if (head_needs_object || obj_neg) && !positive_object {
                    continue;
                }
                if obj_items.is_empty() && combo.is_empty() {
                    continue;
                }
                let mut idx = vec![0usize; k];
                'product: loop {
                    let mut items = obj_items.clone();
                    for (slot, &j) in combo.iter().enumerate() {
                        items.push(BodyItem::Int { decl: int_decls[j], tests: options[j][idx[slot]].clone() });
                    }
                    items.sort_by_key(BodyItem::decl);
                    let cand = Candidate { items };
                    if cand.literals() <= bias.max_body_len {
                        out.push(cand);
                    }
                    // Odometer over the option lists of the chosen atoms.
                    let mut s = k;
                    loop {
                        if s == 0 {
                            break 'product;
                        }
                        s -= 1;
                        idx[s] += 1;
                        if idx[s] < options[combo[s]].len() {
                            break;
                        }
                        idx[s] = 0;
                    }
                }
            }
        }
    }
    out
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InductionError {
    #[error("bias for `{0}` yields no candidate rules")]
    EmptySpace(String),
    #[error("no examples mention `{0}`")]
    NoExamples(String),
    #[error("{0} distinct objects exceed the 64 supported per task")]
    TooManyObjects(usize),
    #[error("invalid bias: {0}")]
    Bias(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InductionResult {
    pub rules: RuleSet,
    /// Percentage of the head's examples satisfied by `rules`.
    pub coverage: f64,
    /// Examples with a non-empty inclusion set left uncovered.
    pub uncovered: usize,
    pub total: usize,
}

/// Examples of one head predicate lowered to object bitmasks.
struct Task {
    /// inc and exc masks per example; bit 0 stands for a 0-ary head.
    inc: Vec<u64>,
    exc: Vec<u64>,
    obj_masks: Vec<Vec<u64>>,
    /// Per body declaration: facts as (object bit or all ones, integer args).
    facts: Vec<Vec<Vec<(u64, SmallVec<[i64; 2]>)>>>,
    arity0: bool,
}

fn object_positions(d: &ModeDecl) -> Option<usize> {
    d.args.iter().position(|a| matches!(a, ArgType::Object(_)))
}

impl Task {
    fn build(bias: &ModeBias, examples: &[&Cdpi]) -> Result<Task, InductionError> {
        let head = bias.head.pred.as_str();
        let mut objects: BTreeSet<Value> = BTreeSet::new();
        for e in examples {
            for a in e.inc.iter().chain(&e.exc) {
                if a.pred.as_str() == head {
                    objects.extend(a.args.iter().cloned());
                }
            }
            for d in &bias.body {
                if let Some(p) = object_positions(d) {
                    for a in e.context.with_pred(&d.pred.as_str().into()) {
                        if let Some(v) = a.args.get(p) {
                            objects.insert(v.clone());
                        }
                    }
                }
            }
        }
        if objects.len() > 64 {
            return Err(InductionError::TooManyObjects(objects.len()));
        }
        let index: HashMap<Value, u64> = objects.into_iter().enumerate().map(|(i, v)| (v, 1u64 << i)).collect();
        let arity0 = !bias.head.has_object();
        let head_bits = |atoms: &[GroundAtom]| -> u64 {
            atoms
                .iter()
                .filter(|a| a.pred.as_str() == head)
                .map(|a| if arity0 { 1 } else { a.args.first().map_or(0, |v| index[v]) })
                .fold(0, |m, b| m | b)
        };
        let mut task = Task {
            inc: examples.iter().map(|e| head_bits(&e.inc)).collect(),
            exc: examples.iter().map(|e| head_bits(&e.exc)).collect(),
            obj_masks: Vec::new(),
            facts: Vec::new(),
            arity0,
        };
        for d in &bias.body {
            let p = object_positions(d);
            let per_example: Vec<Vec<(u64, SmallVec<[i64; 2]>)>> = examples
                .iter()
                .map(|e| facts_of(&e.context, d, p, &index))
                .collect();
            task.obj_masks.push(per_example.iter().map(|fs| fs.iter().fold(0, |m, f| m | f.0)).collect());
            task.facts.push(per_example);
        }
        Ok(task)
    }

    fn int_mask(&self, decl: usize, tests: &[Threshold]) -> Vec<u64> {
        self.facts[decl]
            .iter()
            .map(|fs| {
                fs.iter()
                    .filter(|(_, ints)| ints.iter().zip(tests).all(|(x, t)| t.holds(*x)))
                    .fold(0, |m, f| m | f.0)
            })
            .collect()
    }
}

fn facts_of(ctx: &FeatureSet, d: &ModeDecl, p: Option<usize>, index: &HashMap<Value, u64>) -> Vec<(u64, SmallVec<[i64; 2]>)> {
    ctx.with_pred(&d.pred.as_str().into())
        .iter()
        .filter(|a| a.args.len() == d.args.len())
        .filter_map(|a| {
            let bit = match p {
                Some(p) => *index.get(&a.args[p])?,
                None => u64::MAX,
            };
            let ints: Option<SmallVec<[i64; 2]>> = d
                .args
                .iter()
                .zip(&a.args)
                .filter(|(t, _)| matches!(t, ArgType::Int(_)))
                .map(|(_, v)| v.as_int())
                .collect();
            Some((bit, ints?))
        })
        .collect()
}

/// Bitset of covered positive examples, or `None` if the candidate entails
/// an excluded atom somewhere.
fn score(task: &Task, masks: &[&[u64]], positives: &[usize]) -> Option<Vec<u64>> {
    let n = task.inc.len();
    let mut cov = vec![0u64; positives.len().div_ceil(64)];
    let mut next_pos = 0;
    for i in 0..n {
        let mut m = u64::MAX;
        for lm in masks {
            m &= lm[i];
            if m == 0 {
                break;
            }
        }
        let entailed = if task.arity0 { (m != 0) as u64 } else { m };
        if entailed & task.exc[i] != 0 {
            return None;
        }
        while next_pos < positives.len() && positives[next_pos] < i {
            next_pos += 1;
        }
        if next_pos < positives.len() && positives[next_pos] == i && task.inc[i] & !entailed == 0 {
            cov[next_pos / 64] |= 1 << (next_pos % 64);
        }
    }
    Some(cov)
}

/// Examples whose inclusion or exclusion sets mention the bias head.
pub fn examples_for<'a>(cdpis: &'a [Cdpi], head: &str) -> Vec<&'a Cdpi> {
    cdpis
        .iter()
        .filter(|c| c.rank.is_none() && c.inc.iter().chain(&c.exc).any(|a| a.pred.as_str() == head))
        .collect()
}

/// Greedy cover: repeatedly adds the consistent candidate covering the most
/// uncovered positive examples (ties: fewer atoms, then enumeration order).
pub fn induce_rules(cdpis: &[Cdpi], bias: &ModeBias) -> Result<InductionResult, InductionError> {
    bias.validate().map_err(InductionError::Bias)?;
    let head = bias.head.pred.clone();
    let examples = examples_for(cdpis, &head);
    if examples.is_empty() {
        return Err(InductionError::NoExamples(head));
    }
    let space = enumerate_space(bias);
    if space.is_empty() {
        return Err(InductionError::EmptySpace(head));
    }
    let task = Task::build(bias, &examples)?;
    let positives: Vec<usize> = (0..examples.len()).filter(|&i| task.inc[i] != 0).collect();

    let mut int_cache: HashMap<(usize, SmallVec<[Threshold; 2]>), Vec<u64>> = HashMap::new();
    let neg_masks: Vec<Vec<u64>> = task.obj_masks.iter().map(|v| v.iter().map(|m| !m).collect()).collect();
    let mut scored: Vec<(usize, Vec<u64>)> = Vec::new();
    for (ci, cand) in space.iter().enumerate() {
        for item in &cand.items {
            if let BodyItem::Int { decl, tests } = item {
                int_cache.entry((*decl, tests.clone())).or_insert_with(|| task.int_mask(*decl, tests));
            }
        }
        let masks: Vec<&[u64]> = cand
            .items
            .iter()
            .map(|item| match item {
                BodyItem::Obj { decl, negated: false } => task.obj_masks[*decl].as_slice(),
                BodyItem::Obj { decl, negated: true } => neg_masks[*decl].as_slice(),
                BodyItem::Int { decl, tests } => int_cache[&(*decl, tests.clone())].as_slice(),
            })
            .collect();
        if let Some(cov) = score(&task, &masks, &positives) {
            if cov.iter().any(|w| *w != 0) {
                scored.push((ci, cov));
            }
        }
    }

    let mut covered = vec![0u64; positives.len().div_ceil(64)];
    let mut chosen = Vec::new();
    loop {
        let mut best: Option<(usize, usize, usize)> = None;
        for (si, (ci, cov)) in scored.iter().enumerate() {
            let gain: usize = cov.iter().zip(&covered).map(|(c, d)| (c & !d).count_ones() as usize).sum();
            if gain == 0 {
                continue;
            }
            let atoms = space[*ci].atoms();
            let better = match best {
                None => true,
                Some((g, a, _)) => gain > g || (gain == g && atoms < a),
            };
            if better {
                best = Some((gain, atoms, si));
            }
        }
        let Some((_, _, si)) = best else { break };
        for (d, c) in covered.iter_mut().zip(&scored[si].1) {
            *d |= c;
        }
        chosen.push(space[scored[si].0].to_rule(bias));
    }

    let hit: usize = covered.iter().map(|w| w.count_ones() as usize).sum();
    let total = examples.len();
    let satisfied = total - positives.len() + hit;
    let coverage = 100.0 * satisfied as f64 / total as f64;
    let mut rules = RuleSet { rules: chosen, ..Default::default() };
    rules.coverage.insert(head, coverage);
    Ok(InductionResult { rules, coverage, uncovered: positives.len() - hit, total })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakResult {
    pub constraints: Vec<WeakConstraint>,
    /// Steps whose executed action is strictly preferred by `constraints`.
    pub ordered: usize,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq)]
struct WeakCandidate {
    decl: usize,
    /// Which integer argument carries the weight.
    arg: usize,
    negated: bool,
    level: i64,
}

impl WeakCandidate {
    fn to_constraint(&self, bias: &ModeBias) -> WeakConstraint {
        let mut names = VarNames::default();
        let head = decl_atom(&bias.head, &mut names);
        let d = &bias.body[self.decl];
        let atom = decl_atom(d, &mut names);
        let weight_var = atom.args[self.arg].clone();
        let mut terms: Vec<Term> = head.args.clone();
        terms.extend(atom.args.iter().filter(|t| !head.args.contains(t)).cloned());
        WeakConstraint {
            body: vec![Literal::Pos(head), Literal::Pos(atom)],
            weight: Weight { negated: self.negated, term: weight_var },
            level: self.level,
            terms,
        }
    }
}

/// One step of ordered examples: each alternative's object with its rank.
struct OrderStep<'a> {
    context: &'a FeatureSet,
    alts: Vec<(Value, u32)>,
}

fn group_steps<'a>(ordered: &'a [Cdpi], head: &str) -> Vec<OrderStep<'a>> {
    let mut steps: Vec<OrderStep<'a>> = Vec::new();
    for c in ordered {
        let (Some(rank), Some(a)) = (c.rank, c.inc.first()) else { continue };
        if a.pred.as_str() != head {
            continue;
        }
        let obj = a.args.first().cloned().unwrap_or(Value::Int(0));
        match steps.last_mut() {
            Some(s) if std::ptr::eq(s.context, &c.context) || *s.context == c.context => s.alts.push((obj, rank)),
            _ => steps.push(OrderStep { context: &c.context, alts: vec![(obj, rank)] }),
        }
    }
    steps
}

/// Searches single weak constraints and pairs of them; prefers the smallest
/// set reaching the best count of correctly ordered steps.
pub fn induce_weak_constraints(ordered: &[Cdpi], bias: &ModeBias) -> WeakResult {
    let head = bias.head.pred.as_str();
    let steps = group_steps(ordered, head);
    let ranks: BTreeSet<u32> = steps.iter().flat_map(|s| s.alts.iter().map(|a| a.1)).collect();
    let n = steps.len();
    if ranks.len() < 2 {
        return WeakResult { constraints: Vec::new(), ordered: 0, steps: n };
    }
    let mut cands = Vec::new();
    for (di, d) in bias.body.iter().enumerate() {
        let Some(_) = object_positions(d) else { continue };
        if 2 > bias.max_weak_body_len {
            continue;
        }
        for (ai, a) in d.args.iter().enumerate() {
            if !matches!(a, ArgType::Int(_)) {
                continue;
            }
            for level in 1..=2 {
                for negated in [false, true] {
                    cands.push(WeakCandidate { decl: di, arg: ai, negated, level });
                }
            }
        }
    }
    // cost[c][step][alt]: contribution of candidate c.
    let obj_pos: Vec<Option<usize>> = bias.body.iter().map(object_positions).collect();
    let contrib: Vec<Vec<Vec<i64>>> = cands
        .iter()
        .map(|c| {
            let d = &bias.body[c.decl];
            let p = obj_pos[c.decl].unwrap();
            steps
                .iter()
                .map(|s| {
                    s.alts
                        .iter()
                        .map(|(obj, _)| {
                            let vals: BTreeSet<&[Value]> = s
                                .context
                                .with_pred(&d.pred.as_str().into())
                                .iter()
                                .filter(|a| a.args.len() == d.args.len() && a.args[p] == *obj)
                                .map(|a| a.args.as_slice())
                                .collect();
                            let sum: i64 = vals.iter().filter_map(|args| args[c.arg].as_int()).sum();
                            if c.negated { -sum } else { sum }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let count = |set: &[usize]| -> usize {
        (0..n)
            .filter(|&si| {
                let alts = &steps[si].alts;
                let cost = |ai: usize| -> [i64; 2] {
                    let mut v = [0i64; 2];
                    for &c in set {
                        v[(2 - cands[c].level) as usize] += contrib[c][si][ai];
                    }
                    v
                };
                alts.iter().enumerate().filter(|(_, a)| a.1 == 2).all(|(ei, _)| {
                    let ec = cost(ei);
                    alts.iter().enumerate().all(|(ai, a)| a.1 == 2 || ec < cost(ai))
                })
            })
            .count()
    };
    let mut best: (usize, Vec<usize>) = (count(&[]), Vec::new());
    let mut best_single = best.clone();
    for c in 0..cands.len() {
        let k = count(&[c]);
        if k > best_single.0 {
            best_single = (k, vec![c]);
        }
    }
    if best_single.0 > best.0 {
        best = best_single;
    }
    if best.0 < n {
        let mut best_pair = best.clone();
        for a in 0..cands.len() {
            for b in a + 1..cands.len() {
                if cands[a].decl == cands[b].decl && cands[a].arg == cands[b].arg {
                    continue;
                }
                let k = count(&[a, b]);
                if k > best_pair.0 {
                    best_pair = (k, vec![a, b]);
                }
            }
        }
        if best_pair.0 > best.0 {
            best = best_pair;
        }
    }
    WeakResult {
        constraints: best.1.iter().map(|&c| cands[c].to_constraint(bias)).collect(),
        ordered: best.0,
        steps: n,
    }
}

/// Percentage of `examples` satisfied by `rules`: every included atom is
/// entailed and no excluded atom is.
pub fn coverage_of(rules: &RuleSet, examples: &[&Cdpi], consts: &BTreeMap<String, i64>) -> Result<f64, crate::logic::RuleError> {
    if examples.is_empty() {
        return Ok(100.0);
    }
    let program = crate::logic::Program::compile(rules, consts, None)?;
    let mut ok = 0;
    for e in examples {
        let d = program.evaluate(&e.context)?;
        let entailed: BTreeSet<&GroundAtom> = d.actions.iter().chain(d.derived.iter()).collect();
        if e.inc.iter().all(|a| entailed.contains(a)) && !e.exc.iter().any(|a| entailed.contains(a)) {
            ok += 1;
        }
    }
    Ok(100.0 * ok as f64 / examples.len() as f64)
}
