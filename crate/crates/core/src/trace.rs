//! Episode traces and their line-oriented text form.

use std::fmt;

use crate::logic::{FeatureSet, GroundAtom};
use crate::pomdp::discounted_return;

#[derive(Clone, Debug, PartialEq)]
pub struct TraceStep {
    pub t: usize,
    pub action: GroundAtom,
    pub reward: f64,
    pub features: FeatureSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub domain: String,
    pub seed: u64,
    pub config: String,
    pub gamma: f64,
    pub steps: Vec<TraceStep>,
    /// Why the episode stopped early, if it did.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("trace line {line}: {message}")]
pub struct TraceParseError {
    pub line: usize,
    pub message: String,
}

impl EpisodeTrace {
    pub fn new(domain: String, seed: u64, config: String, gamma: f64) -> Self {
        EpisodeTrace { domain, seed, config, gamma, steps: Vec::new(), failure: None }
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }

    pub fn discounted_return(&self) -> f64 {
        discounted_return(&self.rewards(), self.gamma)
    }
}

impl fmt::Display for EpisodeTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "domain={} seed={} config={} gamma={}", self.domain, self.seed, self.config, self.gamma)?;
        for s in &self.steps {
            writeln!(f, "t={} action={} reward={} features={}", s.t, s.action, s.reward, s.features)?;
        }
        if let Some(msg) = &self.failure {
            writeln!(f, "failure={msg}")?;
        }
        writeln!(f, "return={}", self.discounted_return())
    }
}

fn fields(line: &str) -> impl Iterator<Item = (&str, &str)> {
    line.split(' ').filter(|p| !p.is_empty()).map(|p| p.split_once('=').unwrap_or((p, "")))
}

/// Parses one or more traces written back to back.
pub fn parse_traces(text: &str) -> Result<Vec<EpisodeTrace>, TraceParseError> {
    let mut out = Vec::new();
    let mut cur: Option<EpisodeTrace> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let n = i + 1;
        let err = |m: String| TraceParseError { line: n, message: m };
        if line.is_empty() {
            continue;
        }
        if line.starts_with("domain=") {
            if cur.is_some() {
                return Err(err("header inside an unfinished trace".into()));
            }
            let mut t = EpisodeTrace::new(String::new(), 0, String::new(), 0.95);
            for (k, v) in fields(line) {
                match k {
                    "domain" => t.domain = v.to_string(),
                    "seed" => t.seed = v.parse().map_err(|_| err(format!("bad seed `{v}`")))?,
                    "config" => t.config = v.to_string(),
                    "gamma" => t.gamma = v.parse().map_err(|_| err(format!("bad gamma `{v}`")))?,
                    _ => return Err(err(format!("unknown header field `{k}`"))),
                }
            }
            cur = Some(t);
            continue;
        }
        let t = cur.as_mut().ok_or_else(|| err("missing header".into()))?;
        if let Some(msg) = line.strip_prefix("failure=") {
            t.failure = Some(msg.to_string());
        } else if let Some(v) = line.strip_prefix("return=") {
            let r: f64 = v.parse().map_err(|_| err(format!("bad return `{v}`")))?;
            let t = cur.take().unwrap();
            let expect = t.discounted_return();
            if (r - expect).abs() > 1e-9 * expect.abs().max(1.0) {
                return Err(err(format!("return {r} does not match the step rewards ({expect})")));
            }
            out.push(t);
        } else {
            let (head, feats) = line.split_once(" features=").ok_or_else(|| err("missing features".into()))?;
            let mut step = TraceStep {
                t: 0,
                action: GroundAtom::constant("none"),
                reward: 0.0,
                features: FeatureSet::parse(feats).map_err(|e| err(e.to_string()))?,
            };
            for (k, v) in fields(head) {
                match k {
                    "t" => step.t = v.parse().map_err(|_| err(format!("bad step `{v}`")))?,
                    "action" => step.action = GroundAtom::parse(v).map_err(|e| err(e.to_string()))?,
                    "reward" => step.reward = v.parse().map_err(|_| err(format!("bad reward `{v}`")))?,
                    _ => return Err(err(format!("unknown step field `{k}`"))),
                }
            }
            t.steps.push(step);
        }
    }
    if cur.is_some() {
        return Err(TraceParseError { line: text.lines().count(), message: "trace without return line".into() });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::atom::atom;

    fn sample_trace() -> EpisodeTrace {
        let mut t = EpisodeTrace::new("rocksample(2,2)".into(), 7, "00ff".into(), 0.95);
        let fs = FeatureSet::from_atoms([atom("guess", [1, 50]), atom("dist", [1, -1])]);
        t.steps.push(TraceStep { t: 0, action: atom("check", [1]), reward: 0.0, features: fs.clone() });
        t.steps.push(TraceStep { t: 1, action: GroundAtom::constant("north"), reward: -0.5, features: fs });
        t.steps.push(TraceStep { t: 2, action: GroundAtom::constant("sample"), reward: 10.0, features: FeatureSet::new() });
        t
    }

    #[test]
    fn round_trip() {
        let t = sample_trace();
        let text = t.to_string();
        assert!(text.starts_with("domain=rocksample(2,2) seed=7 config=00ff gamma=0.95\nt=0 action=check(1) reward=0 features={dist(1,-1),guess(1,50)}\n"));
        assert!(text.ends_with("return=8.55\n"));
        let two = format!("{text}\n{text}");
        assert_eq!(parse_traces(&two).unwrap(), vec![t.clone(), t]);
    }

    #[test]
    fn failure_line_round_trips() {
        let mut t = sample_trace();
        t.failure = Some("belief depleted after 20 attempts".into());
        assert_eq!(parse_traces(&t.to_string()).unwrap(), vec![t]);
    }

    #[test]
    fn tampered_return_is_rejected() {
        let text = sample_trace().to_string().replace("return=8.55", "return=9");
        assert_eq!(parse_traces(&text).unwrap_err().line, 5);
    }

    #[test]
    fn empty_trace_returns_zero() {
        let t = EpisodeTrace::new("x".into(), 0, "c".into(), 0.95);
        assert_eq!(t.to_string(), "domain=x seed=0 config=c gamma=0.95\nreturn=0\n");
    }
}
