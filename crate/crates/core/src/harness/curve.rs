use std::collections::BTreeMap;
use std::io::{self, Write};

use super::HarnessError;

pub const CSV_HEADER: &str = "seed,episode,return,steps,interventions";

/// One (seed, episode) point of a learning curve.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub seed: u64,
    /// Zero-based episode index.
    pub episode: usize,
    /// Undiscounted environment return (human rewards excluded).
    pub ret: f64,
    /// Primitive time-steps.
    pub steps: usize,
    /// Interventions so far in this seed's run.
    pub interventions: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LearningCurve {
    pub rows: Vec<CurveRow>,
}

impl LearningCurve {
    pub fn seeds(&self) -> Vec<u64> {
        let mut seeds: Vec<u64> = self.rows.iter().map(|r| r.seed).collect();
        seeds.dedup();
        seeds.sort_unstable();
        seeds.dedup();
        seeds
    }

    /// Rows of one seed, in episode order.
    pub fn seed_rows(&self, seed: u64) -> Vec<&CurveRow> {
        let mut rows: Vec<&CurveRow> = self.rows.iter().filter(|r| r.seed == seed).collect();
        rows.sort_by_key(|r| r.episode);
        rows
    }

    /// Mean return over all seeds for episodes in `from..to`.
    pub fn mean_return(&self, from: usize, to: usize) -> f64 {
        let picked: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| (from..to).contains(&r.episode))
            .map(|r| r.ret)
            .collect();
        picked.iter().sum::<f64>() / picked.len() as f64
    }

    pub fn episodes(&self) -> usize {
        self.rows.iter().map(|r| r.episode + 1).max().unwrap_or(0)
    }

    /// Mean return over the last `n` episodes, or all if fewer.
    pub fn final_mean(&self, n: usize) -> f64 {
        let end = self.episodes();
        self.mean_return(end.saturating_sub(n), end)
    }

    /// Largest intervention count seen in any row.
    pub fn max_interventions(&self) -> u64 {
        self.rows.iter().map(|r| r.interventions).max().unwrap_or(0)
    }
}

/// `%.6g`: six significant digits, trailing zeros trimmed, exponent form
/// outside `1e-4 <= |x| < 1e6`.
pub fn fmt_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_csv<W: Write>(curve: &LearningCurve, w: &mut W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in &curve.rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.seed,
            r.episode,
            fmt_g6(r.ret),
            r.steps,
            r.interventions
        )?;
    }
    Ok(())
}

pub fn read_csv(text: &str) -> Result<LearningCurve, HarnessError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(HarnessError::Csv {
                line: 1,
                message: format!("expected header {CSV_HEADER:?}"),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| HarnessError::Csv { line: i + 1, message };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(err(format!("expected 5 fields, got {}", f.len())));
        }
        let bad = |name: &str| err(format!("bad {name} {line:?}"));
        rows.push(CurveRow {
            seed: f[0].parse().map_err(|_| bad("seed"))?,
            episode: f[1].parse().map_err(|_| bad("episode"))?,
            ret: f[2].parse().map_err(|_| bad("return"))?,
            steps: f[3].parse().map_err(|_| bad("steps"))?,
            interventions: f[4].parse().map_err(|_| bad("interventions"))?,
        });
    }
    Ok(LearningCurve { rows })
}

/// Return statistics of one episode window across seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    /// First episode of the window.
    pub start: usize,
    /// One past the last episode.
    pub end: usize,
    pub mean: f64,
    /// Population standard deviation of the per-seed window means.
    pub std: f64,
    pub seeds: usize,
}

/// Per window: each seed's mean return, then the mean and population
/// standard deviation of those across seeds.
pub fn summarize(curve: &LearningCurve, window: usize) -> Result<Vec<SummaryRow>, HarnessError> {
    if window == 0 {
        return Err(HarnessError::Config("window must be at least 1".into()));
    }
    // window index -> seed -> (sum, count)
    let mut acc: BTreeMap<usize, BTreeMap<u64, (f64, usize)>> = BTreeMap::new();
    for r in &curve.rows {
        let e = acc.entry(r.episode / window).or_default().entry(r.seed).or_default();
        e.0 += r.ret;
        e.1 += 1;
    }
    Ok(acc
        .into_iter()
        .map(|(w, per_seed)| {
            let means: Vec<f64> = per_seed.values().map(|(s, n)| s / *n as f64).collect();
            let n = means.len() as f64;
            let mean = means.iter().sum::<f64>() / n;
            let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n;
            SummaryRow {
                start: w * window,
                end: (w + 1) * window,
                mean,
                std: var.sqrt(),
                seeds: means.len(),
            }
        })
        .collect())
}
