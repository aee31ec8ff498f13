//! Experiment configuration files.
//!
//! A config is TOML: top-level run settings, a `[domain]` table, an optional
//! `[sweep]` table and one `[[arm]]` table per planner variant.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub episodes: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub domain: DomainConfig,
    #[serde(default)]
    pub sweep: Option<Sweep>,
    #[serde(rename = "arm")]
    pub arms: Vec<Arm>,
    /// Directory that relative rule paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
    /// Short hash of the config text, written into every trace header.
    #[serde(skip)]
    pub digest: String,
}

fn default_max_steps() -> usize {
    200
}

fn default_workers() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DomainConfig {
    Rocksample {
        size: usize,
        rocks: usize,
    },
    Pocman {
        /// `micro`, `full` or a path to a maze file.
        #[serde(default = "default_maze")]
        maze: String,
        ghosts: usize,
        food_prob: Option<f64>,
        chase_prob: Option<f64>,
        chase_distance: Option<u32>,
    },
}

fn default_maze() -> String {
    "micro".into()
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    /// POMCP simulations; also the particle count unless the arm sets one.
    Simulations,
    /// DESPOT trial budget per step.
    Trials,
    /// Rocksample grid as `NxM` (size x rocks).
    Grid,
    /// Rule file used by arms whose `rules` is `"sweep"`.
    Rules,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<toml::Value>,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    #[default]
    Pomcp,
    Despot,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Off,
    UctOnly,
    Full,
    Preferred,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Rollout {
    #[default]
    Soft,
    Strict,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Lower {
    #[default]
    Trivial,
    Asp,
    Preferred,
}

#[derive(Clone, Copy, Debug, Default, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Upper {
    #[default]
    Trivial,
    Hindsight,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Arm {
    pub name: String,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub rollout: Rollout,
    #[serde(default = "default_exploration")]
    pub exploration: f64,
    pub simulations: Option<usize>,
    pub particles: Option<usize>,
    /// Rule file relative to the config, or `"sweep"`.
    pub rules: Option<String>,
    #[serde(default)]
    pub lower: Lower,
    #[serde(default)]
    pub upper: Upper,
    pub trials: Option<usize>,
    pub time_ms: Option<u64>,
    pub scenarios: Option<usize>,
    pub max_depth: Option<usize>,
}

fn default_exploration() -> f64 {
    20.0
}

/// One sweep value, normalised.
#[derive(Clone, Debug, PartialEq)]
pub enum Point {
    None,
    Count(usize),
    Grid { size: usize, rocks: usize },
    Rules(String),
}

impl Point {
    /// Label written to the `sweep` column.
    pub fn label(&self) -> String {
        match self {
            Point::None => "-".into(),
            Point::Count(n) => n.to_string(),
            Point::Grid { size, rocks } => format!("{size}x{rocks}"),
            Point::Rules(p) => p.clone(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.base_dir = base_dir.to_path_buf();
        let hash = Sha256::digest(text.as_bytes());
        cfg.digest = hash[..6].iter().map(|b| format!("{b:02x}")).collect();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, dir).with_context(|| format!("in {}", path.display()))
    }

    fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            bail!("episodes must be at least 1");
        }
        if self.arms.is_empty() {
            bail!("no [[arm]] tables");
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                bail!("sweep values are empty");
            }
            if s.param == SweepParam::Grid && !matches!(self.domain, DomainConfig::Rocksample { .. }) {
                bail!("grid sweeps need a rocksample domain");
            }
        }
        self.points()?;
        for a in &self.arms {
            if a.rules.as_deref() == Some("sweep") && self.sweep.as_ref().map(|s| s.param) != Some(SweepParam::Rules) {
                bail!("arm `{}` takes its rules from the sweep but the sweep is not over rules", a.name);
            }
            let needs_rules = a.mode == Mode::UctOnly || a.mode == Mode::Full || a.lower == Lower::Asp;
            if needs_rules && a.rules.is_none() {
                bail!("arm `{}` needs a rules file", a.name);
            }
        }
        Ok(())
    }

    pub fn points(&self) -> Result<Vec<Point>> {
        let Some(s) = &self.sweep else {
            return Ok(vec![Point::None]);
        };
        s.values
            .iter()
            .map(|v| match s.param {
                SweepParam::Simulations | SweepParam::Trials => match v.as_integer() {
                    Some(n) if n > 0 => Ok(Point::Count(n as usize)),
                    _ => bail!("sweep value {v} is not a positive integer"),
                },
                SweepParam::Grid => {
                    let text = v.as_str().unwrap_or_default();
                    let (n, m) = text.split_once('x').context(format!("grid value {v} is not NxM"))?;
                    Ok(Point::Grid { size: n.trim().parse()?, rocks: m.trim().parse()? })
                }
                SweepParam::Rules => match v.as_str() {
                    Some(p) => Ok(Point::Rules(p.to_string())),
                    None => bail!("rules sweep value {v} is not a path"),
                },
            })
            .collect()
    }

    pub fn resolve(&self, rel: &str) -> PathBuf {
        self.base_dir.join(rel)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
episodes = 2
[domain]
kind = "rocksample"
size = 5
rocks = 2
[[arm]]
name = "off"
"#;

    #[test]
    fn minimal_config_has_one_point() {
        let c = ExperimentConfig::parse(MINIMAL, Path::new(".")).unwrap();
        assert_eq!(c.points().unwrap(), vec![Point::None]);
        assert_eq!(c.arms[0].solver, Solver::Pomcp);
        assert_eq!(c.digest.len(), 12);
    }

    #[test]
    fn zero_episodes_and_empty_sweeps_are_rejected() {
        let zero = MINIMAL.replace("episodes = 2", "episodes = 0");
        assert!(ExperimentConfig::parse(&zero, Path::new(".")).is_err());
        let empty = format!("{MINIMAL}\n[sweep]\nparam = \"simulations\"\nvalues = []\n");
        assert!(ExperimentConfig::parse(&empty, Path::new(".")).is_err());
    }

    #[test]
    fn full_mode_without_rules_is_rejected() {
        let full = MINIMAL.replace("name = \"off\"", "name = \"full\"\nmode = \"full\"");
        let err = ExperimentConfig::parse(&full, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("rules"));
    }

    #[test]
    fn grid_values_parse() {
        let text = MINIMAL.replacen("[[arm]]", "[sweep]\nparam = \"grid\"\nvalues = [\"12x4\", \"16x8\"]\n[[arm]]", 1);
        let c = ExperimentConfig::parse(&text, Path::new(".")).unwrap();
        assert_eq!(c.points().unwrap()[1], Point::Grid { size: 16, rocks: 8 });
        assert_eq!(c.points().unwrap()[0].label(), "12x4");
    }
}
