//! Runs every (sweep point, arm, episode) of a config and writes the rows.

use std::collections::BTreeMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rulepomdp::despot::{Budget, Despot, DespotConfig, LowerBound, UpperBound};
use rulepomdp::episode::{run_episode, EpisodeConfig};
use rulepomdp::features::Domain;
use rulepomdp::logic::{parse_rules, RolloutMode, RuleSet};
use rulepomdp::pocman::{Maze, PocConfig, Pocman};
use rulepomdp::pomcp::{HeuristicMode, Pomcp, PomcpConfig};
use rulepomdp::rocksample::{RockConfig, RockSample};
use rulepomdp::trace::EpisodeTrace;

use crate::config::{Arm, DomainConfig, ExperimentConfig, Lower, Mode, Point, Rollout, Solver, SweepParam, Upper};

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub arm: String,
    pub sweep: String,
    pub seed: u64,
    pub ret: f64,
    pub steps: usize,
    /// Empty unless the episode stopped on an error.
    pub failure: String,
    pub violations: u64,
    pub gap_increases: u64,
    pub time_per_step: f64,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub workers: Option<usize>,
    pub episodes: Option<usize>,
    /// Keep only the first K sweep points.
    pub sweep_limit: Option<usize>,
    pub max_steps: Option<usize>,
}

struct Job<'a> {
    arm: &'a Arm,
    point: &'a Point,
    seed: u64,
}

/// Rule files parsed up front, keyed by their config-relative path.
fn load_rules(cfg: &ExperimentConfig, points: &[Point]) -> Result<BTreeMap<String, RuleSet>> {
    let mut out = BTreeMap::new();
    let mut paths: Vec<String> = cfg.arms.iter().filter_map(|a| a.rules.clone()).filter(|p| p != "sweep").collect();
    paths.extend(points.iter().filter_map(|p| match p {
        Point::Rules(r) => Some(r.clone()),
        _ => None,
    }));
    for p in paths {
        let full = cfg.resolve(&p);
        let text = std::fs::read_to_string(&full).with_context(|| format!("reading rules {}", full.display()))?;
        let rules = parse_rules(&text).with_context(|| format!("parsing {}", full.display()))?;
        out.insert(p, rules);
    }
    Ok(out)
}

fn arm_rules<'r>(arm: &Arm, point: &Point, rules: &'r BTreeMap<String, RuleSet>) -> Option<&'r RuleSet> {
    match (arm.rules.as_deref(), point) {
        (Some("sweep"), Point::Rules(p)) => rules.get(p),
        (Some(p), _) => rules.get(p),
        (None, _) => None,
    }
}

/// Simulations and particles of an arm at a sweep point.
fn budgets(cfg: &ExperimentConfig, arm: &Arm, point: &Point) -> (usize, usize, Option<usize>) {
    let param = cfg.sweep.as_ref().map(|s| s.param);
    let mut sims = arm.simulations.unwrap_or(1024);
    let mut particles = arm.particles;
    let mut trials = arm.trials;
    if let Point::Count(n) = point {
        match param {
            Some(SweepParam::Simulations) => {
                sims = *n;
                particles = particles.or(Some(*n));
            }
            Some(SweepParam::Trials) => trials = Some(*n),
            _ => {}
        }
    }
    (sims, particles.unwrap_or(sims), trials)
}

fn plan_and_run<M: Domain>(
    model: &M,
    cfg: &ExperimentConfig,
    job: &Job,
    rules: Option<&RuleSet>,
    episode: &EpisodeConfig,
) -> Result<(EpisodeTrace, f64, u64, u64)> {
    let arm = job.arm;
    let (sims, _, trials) = budgets(cfg, arm, job.point);
    match arm.solver {
        Solver::Pomcp => {
            let pc = PomcpConfig {
                mode: match arm.mode {
                    Mode::Off => HeuristicMode::Off,
                    Mode::UctOnly => HeuristicMode::UctOnly,
                    Mode::Full => HeuristicMode::Full,
                    Mode::Preferred => HeuristicMode::Preferred,
                },
                rollout: match arm.rollout {
                    Rollout::Soft => RolloutMode::Soft,
                    Rollout::Strict => RolloutMode::Strict,
                },
                max_depth: arm.max_depth.unwrap_or(90),
                ..PomcpConfig::new(sims, arm.exploration)
            };
            let mut planner = Pomcp::new(pc, rules, model)?;
            let out = run_episode(model, &mut planner, episode, job.seed);
            let tps = out.time_per_step();
            Ok((out.trace, tps, 0, 0))
        }
        Solver::Despot => {
            let defaults = DespotConfig::default();
            let budget = match (trials, arm.time_ms) {
                (Some(t), _) => Budget::Trials(t),
                (None, Some(ms)) => Budget::Time(Duration::from_millis(ms)),
                (None, None) => defaults.budget,
            };
            let dc = DespotConfig {
                scenarios: arm.scenarios.unwrap_or(defaults.scenarios),
                budget,
                max_depth: arm.max_depth.unwrap_or(defaults.max_depth),
                lower: match arm.lower {
                    Lower::Trivial => LowerBound::Trivial,
                    Lower::Asp => LowerBound::Asp,
                    Lower::Preferred => LowerBound::Preferred,
                },
                upper: match arm.upper {
                    Upper::Trivial => UpperBound::Trivial,
                    Upper::Hindsight => UpperBound::Hindsight,
                },
                ..defaults
            };
            let mut planner = Despot::new(dc, rules, model)?;
            let out = run_episode(model, &mut planner, episode, job.seed);
            let tps = out.time_per_step();
            let s = planner.stats();
            Ok((out.trace, tps, s.violations, s.gap_increases))
        }
    }
}

fn load_maze(cfg: &ExperimentConfig, maze: &str) -> Result<Maze> {
    match maze {
        "micro" => Ok(Maze::micro()),
        "full" => Ok(Maze::full()),
        path => {
            let full = cfg.resolve(path);
            let text = std::fs::read_to_string(&full).with_context(|| format!("reading maze {}", full.display()))?;
            Ok(Maze::parse(&text)?)
        }
    }
}

/// Runs one episode and returns its trace and row. Errors building the
/// model or planner become a failure row.
fn run_job(cfg: &ExperimentConfig, job: &Job, rules: &BTreeMap<String, RuleSet>, max_steps: usize) -> (Option<EpisodeTrace>, Row) {
    let (_, particles, _) = budgets(cfg, job.arm, job.point);
    let episode = EpisodeConfig { max_steps, digest: cfg.digest.clone(), ..EpisodeConfig::new(particles) };
    let arm_rules = arm_rules(job.arm, job.point, rules);
    let attempt = || -> Result<(EpisodeTrace, f64, u64, u64)> {
        match &cfg.domain {
            DomainConfig::Rocksample { size, rocks } => {
                let (size, rocks) = match job.point {
                    Point::Grid { size, rocks } => (*size, *rocks),
                    _ => (*size, *rocks),
                };
                let mut layout = ChaCha8Rng::seed_from_u64(job.seed);
                let model = RockSample::new(RockConfig::new(size, rocks), &mut layout)?;
                plan_and_run(&model, cfg, job, arm_rules, &episode)
            }
            DomainConfig::Pocman { maze, ghosts, food_prob, chase_prob, chase_distance } => {
                let base = PocConfig::new(load_maze(cfg, maze)?, *ghosts);
                let pc = PocConfig {
                    food_prob: food_prob.unwrap_or(base.food_prob),
                    chase_prob: chase_prob.unwrap_or(base.chase_prob),
                    chase_distance: chase_distance.unwrap_or(base.chase_distance),
                    ..base
                };
                let model = Pocman::new(pc)?;
                plan_and_run(&model, cfg, job, arm_rules, &episode)
            }
        }
    };
    let result = catch_unwind(AssertUnwindSafe(attempt)).unwrap_or_else(|p| {
        let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
        Err(anyhow!("panic: {}", msg.unwrap_or_default()))
    });
    let mut row = Row {
        arm: job.arm.name.clone(),
        sweep: job.point.label(),
        seed: job.seed,
        ret: 0.0,
        steps: 0,
        failure: String::new(),
        violations: 0,
        gap_increases: 0,
        time_per_step: 0.0,
    };
    match result {
        Ok((trace, tps, violations, gaps)) => {
            row.ret = trace.discounted_return();
            row.steps = trace.steps.len();
            row.failure = trace.failure.clone().unwrap_or_default();
            row.violations = violations;
            row.gap_increases = gaps;
            row.time_per_step = tps;
            (Some(trace), row)
        }
        Err(e) => {
            row.failure = format!("{e:#}");
            (None, row)
        }
    }
}

pub struct RunOutput {
    pub rows: Vec<Row>,
    pub traces: Vec<EpisodeTrace>,
}

/// Runs all jobs in (sweep point, arm, seed) order. Jobs execute on up to
/// `workers` threads; output order does not depend on completion order.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunOutput> {
    let mut points = cfg.points()?;
    if let Some(k) = opts.sweep_limit {
        points.truncate(k.max(1));
    }
    let rules = load_rules(cfg, &points)?;
    let episodes = opts.episodes.unwrap_or(cfg.episodes);
    let max_steps = opts.max_steps.unwrap_or(cfg.max_steps);
    let mut jobs = Vec::new();
    for point in &points {
        for arm in &cfg.arms {
            for i in 0..episodes {
                jobs.push(Job { arm, point, seed: cfg.seed + i as u64 });
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.workers.unwrap_or(cfg.workers).max(1)).build()?;
    let results: Vec<(Option<EpisodeTrace>, Row)> =
        pool.install(|| jobs.par_iter().map(|j| run_job(cfg, j, &rules, max_steps)).collect());
    let (traces, rows): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(RunOutput { rows, traces: traces.into_iter().flatten().collect() })
}

const COLUMNS: [&str; 8] = ["arm", "sweep", "seed", "return", "steps", "failure", "violations", "gap_increases"];

/// Writes the rows as CSV. Wall-clock timings are only written when
/// `timed` is set, so the untimed file is reproducible byte for byte.
pub fn write_csv<W: Write>(rows: &[Row], out: W, timed: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if timed {
        header.push("time_per_step_s");
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![
            r.arm.clone(),
            r.sweep.clone(),
            r.seed.to_string(),
            r.ret.to_string(),
            r.steps.to_string(),
            r.failure.clone(),
            r.violations.to_string(),
            r.gap_increases.to_string(),
        ];
        if timed {
            rec.push(r.time_per_step.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.csv` and `results_timed.csv` into `dir`.
pub fn write_outputs(rows: &[Row], dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, timed) in [("results.csv", false), ("results_timed.csv", true)] {
        let path = dir.join(name);
        let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_csv(rows, std::io::BufWriter::new(file), timed)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(extra: &str) -> ExperimentConfig {
        let text = format!(
            "name = \"t\"\nepisodes = 2\nseed = 5\nmax_steps = 15\n[domain]\nkind = \"rocksample\"\nsize = 5\nrocks = 2\n{extra}"
        );
        ExperimentConfig::parse(&text, Path::new(".")).unwrap()
    }

    #[test]
    fn one_point_two_episodes_gives_two_rows() {
        let cfg = tiny("[[arm]]\nname = \"off\"\nsimulations = 64\n");
        let out = run_experiment(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(out.rows.len(), 2);
        assert_eq!(out.rows.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![5, 6]);
        assert!(out.rows.iter().all(|r| r.failure.is_empty() && r.steps > 0));
    }

    #[test]
    fn reruns_write_identical_csv() {
        let cfg = tiny(
            "[sweep]\nparam = \"simulations\"\nvalues = [32, 64]\n\
             [[arm]]\nname = \"off\"\n\
             [[arm]]\nname = \"despot\"\nsolver = \"despot\"\nscenarios = 20\ntrials = 20\n",
        );
        let csv = |workers| {
            let out = run_experiment(&cfg, &RunOptions { workers: Some(workers), ..Default::default() }).unwrap();
            let mut buf = Vec::new();
            write_csv(&out.rows, &mut buf, false).unwrap();
            buf
        };
        let a = csv(1);
        assert_eq!(a, csv(1));
        assert_eq!(a, csv(3));
        assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 2 * 2 * 2);
    }

    #[test]
    fn unusable_rules_become_failure_rows() {
        let dir = std::env::temp_dir().join(format!("bench-run-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("bad.lp"), "move(C) :- ghost(C,D,V), D <= 2.\n").unwrap();
        let text = "name = \"t\"\nepisodes = 1\n[domain]\nkind = \"rocksample\"\nsize = 5\nrocks = 2\n\
                    [[arm]]\nname = \"full\"\nmode = \"full\"\nrules = \"bad.lp\"\nsimulations = 16\n";
        let cfg = ExperimentConfig::parse(text, &dir).unwrap();
        let out = run_experiment(&cfg, &RunOptions::default()).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert!(!out.rows[0].failure.is_empty());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
