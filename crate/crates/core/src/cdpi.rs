//! Learning examples from episode traces: trace selection, target
//! annotation, CDPI generation and ILASP-syntax export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::induction::{ArgType, ModeBias};
use crate::logic::{atom, FeatureSet, GroundAtom, Program, RuleError, RuleSet, Symbol};
use crate::trace::EpisodeTrace;

/// A context-dependent partial interpretation: atoms that must and must not
/// be entailed in a context, with an optional preference rank.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cdpi {
    /// Sorted.
    pub inc: Vec<GroundAtom>,
    /// Sorted.
    pub exc: Vec<GroundAtom>,
    pub context: FeatureSet,
    pub rank: Option<u32>,
}

impl Cdpi {
    pub fn new(inc: impl IntoIterator<Item = GroundAtom>, exc: impl IntoIterator<Item = GroundAtom>, context: FeatureSet) -> Self {
        let sorted = |it: Vec<GroundAtom>| FeatureSet::from_atoms(it).as_slice().to_vec();
        Cdpi { inc: sorted(inc.into_iter().collect()), exc: sorted(exc.into_iter().collect()), context, rank: None }
    }

    /// Whether the example says anything about atoms of `pred`.
    pub fn mentions(&self, pred: &str) -> bool {
        self.inc.iter().chain(&self.exc).any(|a| a.pred.as_str() == pred)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Filtered {
    pub traces: Vec<EpisodeTrace>,
    /// No trace beat the mean, so every trace was kept.
    pub warning: bool,
}

/// Keeps the traces whose discounted return is strictly above the mean.
pub fn filter_traces(traces: Vec<EpisodeTrace>) -> Filtered {
    if traces.is_empty() {
        return Filtered { traces, warning: false };
    }
    let returns: Vec<f64> = traces.iter().map(EpisodeTrace::discounted_return).collect();
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    if !returns.iter().any(|r| *r > mean) {
        return Filtered { traces, warning: true };
    }
    let kept = traces.into_iter().zip(returns).filter(|(_, r)| *r > mean).map(|(t, _)| t).collect();
    Filtered { traces: kept, warning: false }
}

/// Adds `target(R)` to every step of each sub-trace that ends in
/// `sample(R)`. Steps after the last such sample get nothing.
pub fn annotate_targets(trace: &EpisodeTrace) -> EpisodeTrace {
    let mut out = trace.clone();
    let mut start = 0;
    for i in 0..out.steps.len() {
        let a = &out.steps[i].action;
        if a.pred.as_str() == "sample" && a.args.len() == 1 {
            let target = atom("target", [a.args[0].clone()]);
            for s in &mut out.steps[start..=i] {
                s.features.insert(target.clone());
            }
            start = i + 1;
        }
    }
    out
}

/// Ground action atoms of rocksample in the logical action space: moves,
/// then check and sample per rock.
pub fn rocksample_action_space(rocks: usize, with_exit: bool) -> Vec<GroundAtom> {
    let mut out: Vec<GroundAtom> = ["east", "north", "south", "west"].iter().map(|s| GroundAtom::constant(s)).collect();
    if with_exit {
        out.push(GroundAtom::constant("exit"));
    }
    out.extend((1..=rocks as i64).map(|i| atom("check", [i])));
    out.extend((1..=rocks as i64).map(|i| atom("sample", [i])));
    out
}

fn predicates(space: &[GroundAtom]) -> Vec<Symbol> {
    let mut out: Vec<Symbol> = Vec::new();
    for a in space {
        if !out.contains(&a.pred) {
            out.push(a.pred.clone());
        }
    }
    out
}

/// CDPIs of one step: a positive example for the executed atom, excluding
/// the other groundings of its predicate, then one example per remaining
/// action predicate excluding all of its groundings. An executed atom that
/// is missing from `space` is added to it.
pub fn make_cdpis(features: &FeatureSet, executed: &GroundAtom, space: &[GroundAtom]) -> Vec<Cdpi> {
    let mut space = space.to_vec();
    if !space.contains(executed) {
        space.push(executed.clone());
    }
    let of = |p: &Symbol| -> Vec<GroundAtom> { space.iter().filter(|a| a.pred == *p).cloned().collect() };
    let mut out = vec![Cdpi::new([executed.clone()], of(&executed.pred).into_iter().filter(|a| a != executed), features.clone())];
    for p in predicates(&space) {
        if p != executed.pred {
            out.push(Cdpi::new([], of(&p), features.clone()));
        }
    }
    out
}

/// CDPIs of every step of every trace, in step order.
pub fn trace_cdpis(traces: &[EpisodeTrace], space: &[GroundAtom]) -> Vec<Cdpi> {
    traces
        .iter()
        .flat_map(|t| t.steps.iter().flat_map(|s| make_cdpis(&s.features, &s.action, space)))
        .collect()
}

/// Ranked examples for learning preferences among the groundings of `pred`:
/// at each step where an atom of `pred` was executed, every atom of `pred`
/// entailed by `rules` becomes an example with rank 2 if it was the
/// executed one and 1 otherwise.
pub fn make_ordered_cdpis(
    rules: &RuleSet,
    constants: &BTreeMap<String, i64>,
    pred: &str,
    traces: &[EpisodeTrace],
) -> Result<Vec<Cdpi>, RuleError> {
    let program = Program::compile(rules, constants, None)?;
    let mut out = Vec::new();
    for t in traces {
        for s in &t.steps {
            if s.action.pred.as_str() != pred {
                continue;
            }
            let d = program.evaluate(&s.features)?;
            let entailed: BTreeSet<&GroundAtom> = d.actions.iter().filter(|a| a.pred.as_str() == pred).collect();
            for a in entailed {
                let mut c = Cdpi::new([a.clone()], [], s.features.clone());
                c.rank = Some(if *a == s.action { 2 } else { 1 });
                out.push(c);
            }
        }
    }
    Ok(out)
}

fn atom_list(atoms: &[GroundAtom]) -> String {
    let parts: Vec<String> = atoms.iter().map(ToString::to_string).collect();
    parts.join(", ")
}

/// Type facts for every declared type: observed objects, and the grid
/// range of integer types.
fn background(cdpis: &[&Cdpi], bias: &ModeBias) -> String {
    let mut objects: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for d in bias.body.iter().chain([&bias.head]) {
        for (i, a) in d.args.iter().enumerate() {
            let ArgType::Object(ty) = a else { continue };
            let set = objects.entry(ty.as_str()).or_default();
            for c in cdpis {
                let atoms = c.context.with_pred(&Symbol::new(&d.pred)).iter().chain(c.inc.iter()).chain(c.exc.iter());
                for g in atoms.filter(|g| g.pred.as_str() == d.pred && g.args.len() == d.args.len()) {
                    set.insert(g.args[i].to_string());
                }
            }
        }
    }
    let mut out = String::new();
    for (ty, values) in objects {
        for v in values {
            writeln!(out, "{ty}({v}).").unwrap();
        }
    }
    for (ty, grid) in &bias.grids {
        if let (Some(lo), Some(hi)) = (grid.iter().min(), grid.iter().max()) {
            writeln!(out, "{ty}({lo}..{hi}).").unwrap();
        }
    }
    out
}

/// One ILASP task for the bias head: background, mode bias, then the
/// examples that mention the head in input order. Ordered examples are
/// followed by `#brave_ordering` facts preferring rank 2 over rank 1
/// within a context.
pub fn render_ilasp(cdpis: &[Cdpi], bias: &ModeBias) -> String {
    let head = bias.head.pred.as_str();
    let relevant: Vec<&Cdpi> = cdpis.iter().filter(|c| c.mentions(head)).collect();
    let mut out = format!("% task: {head}\n");
    out.push_str(&background(&relevant, bias));
    out.push_str(&bias.to_ilasp());
    let mut orderings = Vec::new();
    let mut group: Vec<(String, u32, &FeatureSet)> = Vec::new();
    let flush = |group: &mut Vec<(String, u32, &FeatureSet)>, orderings: &mut Vec<String>| {
        for (better, rb, _) in group.iter() {
            for (worse, rw, _) in group.iter() {
                if rb > rw {
                    orderings.push(format!("#brave_ordering({better}, {worse})."));
                }
            }
        }
        group.clear();
    };
    let (mut pos, mut ord) = (0, 0);
    for c in relevant {
        let ctx: Vec<String> = c.context.iter().map(|a| format!("{a}.")).collect();
        let id = match c.rank {
            None => {
                pos += 1;
                format!("p{pos}")
            }
            Some(r) => {
                ord += 1;
                if group.last().is_some_and(|g| g.2 != &c.context) {
                    flush(&mut group, &mut orderings);
                }
                group.push((format!("o{ord}"), r, &c.context));
                format!("o{ord}@{r}")
            }
        };
        writeln!(out, "#pos({id}, {{{}}}, {{{}}}, {{{}}}).", atom_list(&c.inc), atom_list(&c.exc), ctx.join(" ")).unwrap();
    }
    flush(&mut group, &mut orderings);
    for o in orderings {
        writeln!(out, "{o}").unwrap();
    }
    out
}

#[derive(Debug, thiserror::Error)]
#[error("{path}: {source}")]
pub struct ExportError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

/// Writes one `<head>.las` task per bias into `dir`.
pub fn export_ilasp(cdpis: &[Cdpi], biases: &[ModeBias], dir: &Path) -> Result<Vec<PathBuf>, ExportError> {
    std::fs::create_dir_all(dir).map_err(|source| ExportError { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    for b in biases {
        let path = dir.join(format!("{}.las", b.head.pred));
        std::fs::write(&path, render_ilasp(cdpis, b)).map_err(|source| ExportError { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("example line {line}: {message}")]
pub struct ExampleParseError {
    pub line: usize,
    pub message: String,
}

fn brace_groups(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut open = None;
    for (i, c) in text.char_indices() {
        match c {
            '{' => open = Some(i + 1),
            '}' => {
                if let Some(s) = open.take() {
                    out.push(&text[s..i]);
                }
            }
            _ => {}
        }
    }
    out
}

/// Reads back the `#pos` lines written by [`render_ilasp`].
pub fn parse_ilasp_examples(text: &str) -> Result<Vec<Cdpi>, ExampleParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let Some(rest) = raw.trim().strip_prefix("#pos(") else { continue };
        let err = |m: &str| ExampleParseError { line: i + 1, message: m.to_string() };
        let (id, body) = rest.split_once(',').ok_or_else(|| err("missing example id"))?;
        let rank = match id.split_once('@') {
            Some((_, r)) => Some(r.trim().parse().map_err(|_| err("bad rank"))?),
            None => None,
        };
        let groups = brace_groups(body);
        let [inc, exc, ctx] = groups.as_slice() else { return Err(err("expected three sets")) };
        let list = |s: &str| FeatureSet::parse(&format!("{{{s}}}")).map_err(|e| err(&e.to_string()));
        let facts: Vec<&str> = ctx.split('.').map(str::trim).filter(|s| !s.is_empty()).collect();
        let mut c = Cdpi::new(list(inc)?.iter().cloned(), list(exc)?.iter().cloned(), list(&facts.join(","))?);
        c.rank = rank;
        out.push(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_rules;
    use crate::trace::TraceStep;

    fn leading_first() -> FeatureSet {
        FeatureSet::parse(
            "{guess(1,50),guess(2,50),dist(1,1),dist(2,2),delta_x(1,0),delta_x(2,1),\
             delta_y(1,1),delta_y(2,1),num_sampled(0)}",
        )
        .unwrap()
    }

    fn trace(actions: &[&str], returns: &[f64]) -> EpisodeTrace {
        let mut t = EpisodeTrace::new("rocksample(2,2)".into(), 0, "-".into(), 0.95);
        for (i, a) in actions.iter().enumerate() {
            t.steps.push(TraceStep {
                t: i,
                action: GroundAtom::parse(a).unwrap(),
                reward: returns.get(i).copied().unwrap_or(0.0),
                features: FeatureSet::new(),
            });
        }
        t
    }

    fn targets(t: &EpisodeTrace) -> Vec<String> {
        t.steps.iter().map(|s| s.features.with_pred(&Symbol::new("target")).iter().map(|a| a.to_string()).collect()).collect()
    }

    #[test]
    fn filter_keeps_strictly_above_mean() {
        let ts: Vec<EpisodeTrace> = [1.0, 2.0, 3.0].iter().map(|r| trace(&["north"], &[*r])).collect();
        let f = filter_traces(ts);
        assert!(!f.warning);
        assert_eq!(f.traces.len(), 1);
        assert_eq!(f.traces[0].discounted_return(), 3.0);
    }

    #[test]
    fn filter_falls_back_when_all_equal() {
        let f = filter_traces(vec![trace(&["north"], &[1.0]), trace(&["north"], &[1.0])]);
        assert!(f.warning);
        assert_eq!(f.traces.len(), 2);
    }

    #[test]
    fn targets_cover_sub_traces() {
        let t = annotate_targets(&trace(&["north", "north", "sample(2)", "exit"], &[]));
        assert_eq!(targets(&t), ["target(2)", "target(2)", "target(2)", ""]);
        let t = annotate_targets(&trace(&["check(1)", "sample(1)", "check(2)", "sample(2)"], &[]));
        assert_eq!(targets(&t), ["target(1)", "target(1)", "target(2)", "target(2)"]);
        let t = annotate_targets(&trace(&["north", "exit"], &[]));
        assert_eq!(targets(&t), ["", ""]);
    }

    #[test]
    fn leading_first_cdpis() {
        let space = rocksample_action_space(2, false);
        let cs = make_cdpis(&leading_first(), &atom("check", [1]), &space);
        assert_eq!(cs[0].inc, vec![atom("check", [1])]);
        assert_eq!(cs[0].exc, vec![atom("check", [2])]);
        let empty: Vec<String> = cs[1..].iter().map(|c| c.exc[0].pred.to_string()).collect();
        assert_eq!(empty, ["east", "north", "south", "west", "sample"]);
        assert!(cs.iter().all(|c| c.context == leading_first()));
    }

    #[test]
    fn single_action_space_gives_one_example() {
        let north = GroundAtom::constant("north");
        let cs = make_cdpis(&FeatureSet::new(), &north, std::slice::from_ref(&north));
        assert_eq!(cs.len(), 1);
        assert!(cs[0].exc.is_empty());
    }

    #[test]
    fn pocman_move_excludes_other_directions() {
        let space: Vec<GroundAtom> = ["north", "east", "south", "west"].iter().map(|d| atom("move", [*d])).collect();
        let cs = make_cdpis(&FeatureSet::new(), &space[0], &space);
        assert_eq!(cs.len(), 1);
        let exc: Vec<String> = cs[0].exc.iter().map(ToString::to_string).collect();
        assert_eq!(exc, ["move(east)", "move(south)", "move(west)"]);
    }

    #[test]
    fn ordered_examples_rank_the_executed_check() {
        let rules = parse_rules(include_str!("../fixtures/rules/normal_check.lp")).unwrap();
        let mut t = trace(&["check(1)", "north"], &[]);
        t.steps[0].features = leading_first();
        t.steps[1].features = leading_first();
        let cs = make_ordered_cdpis(&rules, &BTreeMap::new(), "check", &[t.clone()]).unwrap();
        let got: Vec<(String, u32)> = cs.iter().map(|c| (c.inc[0].to_string(), c.rank.unwrap())).collect();
        assert_eq!(got, [("check(1)".to_string(), 2), ("check(2)".to_string(), 1)]);

        t.steps[0].features = FeatureSet::parse("{guess(1,90),guess(2,90)}").unwrap();
        assert!(make_ordered_cdpis(&rules, &BTreeMap::new(), "check", &[t]).unwrap().is_empty());
    }

    #[test]
    fn empty_export_has_background_and_bias_only() {
        let bias = ModeBias::rocksample("check");
        let text = render_ilasp(&[], &bias);
        assert!(!text.contains("#pos"));
        assert!(text.contains("#modeh(check(var(rock)))."));
        assert!(text.contains("perc(0..100)."));
    }

    #[test]
    fn ordered_export_round_trips() {
        let rules = parse_rules(include_str!("../fixtures/rules/normal_check.lp")).unwrap();
        let mut t = trace(&["check(1)"], &[]);
        t.steps[0].features = leading_first();
        let cs = make_ordered_cdpis(&rules, &BTreeMap::new(), "check", &[t]).unwrap();
        let text = render_ilasp(&cs, &ModeBias::rocksample("check"));
        assert!(text.contains("#brave_ordering(o1, o2)."));
        assert_eq!(parse_ilasp_examples(&text).unwrap(), cs);
    }
}
