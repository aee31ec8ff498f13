//! Per (arm, sweep point) statistics of a results CSV.

use std::io::{Read, Write};

use anyhow::{Context, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub stderr: f64,
}

impl Stats {
    pub fn of(xs: &[f64]) -> Stats {
        let n = xs.len() as f64;
        if xs.is_empty() {
            return Stats { mean: f64::NAN, std: f64::NAN, stderr: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() < 2 { 0.0 } else { (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() };
        Stats { mean, std, stderr: std / n.sqrt() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Group {
    pub arm: String,
    pub sweep: String,
    pub n: usize,
    pub failures: usize,
    pub ret: Stats,
    /// Present when the input has a timing column.
    pub time: Option<Stats>,
}

/// Groups rows by (arm, sweep) in order of first appearance.
pub fn summarize<R: Read>(input: R) -> Result<Vec<Group>> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).with_context(|| format!("missing column `{name}`"));
    let (arm, sweep, ret) = (need("arm")?, need("sweep")?, need("return")?);
    let failure = col("failure");
    let time = col("time_per_step_s");
    let mut groups: Vec<(String, String, Vec<f64>, Vec<f64>, usize)> = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let key = (&rec[arm], &rec[sweep]);
        let pos = match groups.iter().position(|g| (g.0.as_str(), g.1.as_str()) == key) {
            Some(p) => p,
            None => {
                groups.push((key.0.to_string(), key.1.to_string(), Vec::new(), Vec::new(), 0));
                groups.len() - 1
            }
        };
        let g = &mut groups[pos];
        g.2.push(rec[ret].parse().with_context(|| format!("row {}: bad return", i + 1))?);
        if let Some(t) = time {
            g.3.push(rec[t].parse().with_context(|| format!("row {}: bad time", i + 1))?);
        }
        if failure.is_some_and(|f| !rec[f].is_empty()) {
            g.4 += 1;
        }
    }
    Ok(groups
        .into_iter()
        .map(|(arm, sweep, rets, times, failures)| Group {
            arm,
            sweep,
            n: rets.len(),
            failures,
            ret: Stats::of(&rets),
            time: time.map(|_| Stats::of(&times)),
        })
        .collect())
}

pub fn write_summary<W: Write>(groups: &[Group], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "arm",
        "sweep",
        "n",
        "failures",
        "return_mean",
        "return_std",
        "return_stderr",
        "time_mean_s",
        "time_std_s",
        "time_stderr_s",
        "return",
    ])?;
    for g in groups {
        let t = |f: fn(&Stats) -> f64| g.time.as_ref().map(|s| format!("{:.6}", f(s))).unwrap_or_default();
        w.write_record([
            g.arm.clone(),
            g.sweep.clone(),
            g.n.to_string(),
            g.failures.to_string(),
            format!("{:.4}", g.ret.mean),
            format!("{:.4}", g.ret.std),
            format!("{:.4}", g.ret.stderr),
            t(|s| s.mean),
            t(|s| s.std),
            t(|s| s.stderr),
            format!("{:.2} ± {:.2}", g.ret.mean, g.ret.std),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_has_zero_std() {
        assert_eq!(Stats::of(&[3.5]), Stats { mean: 3.5, std: 0.0, stderr: 0.0 });
    }

    #[test]
    fn two_rows_hand_computed() {
        // mean 12; squared deviations 4 + 4 over n-1 = 1 gives variance 8.
        let s = Stats::of(&[10.0, 14.0]);
        assert_eq!(s.mean, 12.0);
        assert!((s.std - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((s.stderr - 2.0).abs() < 1e-12);
    }

    #[test]
    fn groups_keep_first_appearance_order() {
        let csv = "arm,sweep,seed,return,steps,failure,violations,gap_increases,time_per_step_s\n\
                   b,256,0,10,3,,0,0,0.5\n\
                   a,256,0,1,3,oops,0,0,0.1\n\
                   b,256,1,14,3,,0,0,1.5\n";
        let g = summarize(csv.as_bytes()).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!((g[0].arm.as_str(), g[0].n, g[0].ret.mean), ("b", 2, 12.0));
        assert_eq!(g[1].failures, 1);
        assert_eq!(g[0].time.as_ref().unwrap().mean, 1.0);
        let mut out = Vec::new();
        write_summary(&g, &mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().contains("12.00 ± 2.83"));
    }

    #[test]
    fn untimed_input_has_no_time_stats() {
        let g = summarize("arm,sweep,return\nx,-,2\n".as_bytes()).unwrap();
        assert_eq!(g[0].time, None);
    }
}
