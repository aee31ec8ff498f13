//! Trace files to CDPIs, learned rules and ILASP tasks.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rulepomdp::cdpi::{annotate_targets, filter_traces, make_ordered_cdpis, rocksample_action_space, trace_cdpis, Cdpi};
use rulepomdp::induction::{induce_rules, induce_weak_constraints, InductionError, ModeBias};
use rulepomdp::logic::{atom, GroundAtom, RuleSet};
use rulepomdp::pocman::DIRECTIONS;
use rulepomdp::trace::{parse_traces, EpisodeTrace};

const ROCK_HEADS: [&str; 7] = ["check", "sample", "north", "south", "east", "west", "exit"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Rocksample { rocks: usize },
    Pocman,
}

/// Domain of a trace from its header name, e.g. `rocksample(12,4)`.
pub fn kind_of(trace: &EpisodeTrace) -> Result<Kind> {
    let d = trace.domain.as_str();
    if let Some(args) = d.strip_prefix("rocksample(").and_then(|r| r.strip_suffix(')')) {
        let rocks = args.split(',').nth(1).and_then(|m| m.trim().parse().ok());
        return rocks.map(|rocks| Kind::Rocksample { rocks }).with_context(|| format!("bad domain `{d}`"));
    }
    if d.starts_with("pocman") {
        return Ok(Kind::Pocman);
    }
    bail!("unknown domain `{d}`")
}

/// Built-in biases by name (`rocksample`, `rocksample:check,sample`,
/// `pocman`) or a bias file in the exported mode syntax.
pub fn load_biases(spec: &str) -> Result<Vec<ModeBias>> {
    let path = Path::new(spec);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        return Ok(vec![ModeBias::parse(&text).with_context(|| format!("in {}", path.display()))?]);
    }
    match spec.split_once(':') {
        _ if spec == "pocman" => Ok(vec![ModeBias::pocman()]),
        _ if spec == "rocksample" => Ok(ROCK_HEADS.iter().map(|h| ModeBias::rocksample(h)).collect()),
        Some(("rocksample", heads)) => Ok(heads.split(',').map(|h| ModeBias::rocksample(h.trim())).collect()),
        _ => bail!("`{spec}` is neither a bias file nor a built-in bias"),
    }
}

pub fn default_biases(kind: Kind) -> Vec<ModeBias> {
    match kind {
        Kind::Rocksample { .. } => ROCK_HEADS.iter().map(|h| ModeBias::rocksample(h)).collect(),
        Kind::Pocman => vec![ModeBias::pocman()],
    }
}

pub struct Examples {
    pub kind: Kind,
    /// Traces kept by the return filter, with rocksample targets added.
    pub traces: Vec<EpisodeTrace>,
    pub cdpis: Vec<Cdpi>,
    /// Set when no trace beat the mean return and all were kept.
    pub unfiltered: bool,
}

pub fn read_traces(path: &Path) -> Result<Vec<EpisodeTrace>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let traces = parse_traces(&text).with_context(|| format!("in {}", path.display()))?;
    if traces.is_empty() {
        bail!("{} holds no traces", path.display());
    }
    Ok(traces)
}

pub fn examples(traces: Vec<EpisodeTrace>) -> Result<Examples> {
    let kind = kind_of(&traces[0])?;
    for t in &traces[1..] {
        if kind_of(t)? != kind {
            bail!("traces mix domains `{}` and `{}`", traces[0].domain, t.domain);
        }
    }
    let filtered = filter_traces(traces);
    let (traces, space): (Vec<EpisodeTrace>, Vec<GroundAtom>) = match kind {
        Kind::Rocksample { rocks } => {
            (filtered.traces.iter().map(annotate_targets).collect(), rocksample_action_space(rocks, true))
        }
        Kind::Pocman => (filtered.traces, DIRECTIONS.iter().map(|d| atom("move", [*d])).collect()),
    };
    let cdpis = trace_cdpis(&traces, &space);
    Ok(Examples { kind, traces, cdpis, unfiltered: filtered.warning })
}

/// Learns one definition per bias. Heads with a rock argument also get
/// weak constraints learned from the steps where they were executed.
/// Heads without examples are skipped and reported.
pub fn induce(ex: &Examples, biases: &[ModeBias]) -> Result<(RuleSet, Vec<String>)> {
    let mut out = RuleSet::default();
    let mut notes = Vec::new();
    for bias in biases {
        let head = bias.head.pred.clone();
        let learned = match induce_rules(&ex.cdpis, bias) {
            Ok(r) => r,
            Err(InductionError::NoExamples(h)) => {
                notes.push(format!("no examples for `{h}`"));
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        notes.push(format!("{head}: coverage {:.2}% ({} of {} uncovered)", learned.coverage, learned.uncovered, learned.total));
        if bias.head.has_object() && !learned.rules.rules.is_empty() {
            let ordered = make_ordered_cdpis(&learned.rules, &BTreeMap::new(), &head, &ex.traces)?;
            let weak = induce_weak_constraints(&ordered, bias);
            notes.push(format!("{head}: {} weak constraints order {} of {} steps", weak.constraints.len(), weak.ordered, weak.steps));
            out.weak.extend(weak.constraints);
        }
        out.rules.extend(learned.rules.rules);
        out.aggregates.extend(learned.rules.aggregates);
        out.coverage.extend(learned.rules.coverage);
    }
    Ok((out, notes))
}
