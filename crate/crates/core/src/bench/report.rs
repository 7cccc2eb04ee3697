use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{run_seeds, RunConfig, TrialRecord};
use crate::environments::TestFunction;
use crate::error::{Error, Result};
use crate::policies::PolicyKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub cum_regret: f64,
    pub wall_ms: f64,
    pub nonconverged_fits: usize,
    pub mask_fallbacks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_seeds: usize,
    pub horizon: usize,
    pub mean_cum_regret: f64,
    /// Sample standard deviation over `√n_seeds`; 0 for a single seed.
    pub std_err: f64,
    pub single_seed: bool,
    pub per_seed: Vec<SeedResult>,
    /// Mean cumulative regret after each step.
    pub mean_curve: Vec<f64>,
}

/// Mean, standard error and the single-sample flag.
pub fn mean_and_se(values: &[f64]) -> (f64, f64, bool) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, 0.0, false);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0, true);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt(), false)
}

pub fn aggregate(records: &[TrialRecord]) -> Result<Summary> {
    let first = records
        .first()
        .ok_or_else(|| Error::Config("nothing to aggregate".into()))?;
    let horizon = first.horizon();
    if let Some(r) = records.iter().find(|r| r.horizon() != horizon) {
        return Err(Error::Dimension {
            expected: horizon,
            got: r.horizon(),
        });
    }
    let mut sorted: Vec<&TrialRecord> = records.iter().collect();
    sorted.sort_by_key(|r| r.seed);
    let finals: Vec<f64> = sorted.iter().map(|r| r.cum_regret).collect();
    let (mean, se, single) = mean_and_se(&finals);
    let n = sorted.len() as f64;
    let mean_curve = (0..horizon)
        .map(|k| sorted.iter().map(|r| r.rows[k].cum_regret).sum::<f64>() / n)
        .collect();
    Ok(Summary {
        n_seeds: sorted.len(),
        horizon,
        mean_cum_regret: mean,
        std_err: se,
        single_seed: single,
        per_seed: sorted
            .iter()
            .map(|r| SeedResult {
                seed: r.seed,
                cum_regret: r.cum_regret,
                wall_ms: r.wall_ms,
                nonconverged_fits: r.nonconverged_fits,
                mask_fallbacks: r.mask_fallbacks,
            })
            .collect(),
        mean_curve,
    })
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    config: &'a RunConfig,
    #[serde(flatten)]
    summary: &'a Summary,
}

pub const TRACE_HEADER: &str = "seed,t,first,second,outcome,step_regret,cum_regret";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes `trace.csv` and `summary.json` into `out_dir`.
pub fn emit(
    records: &[TrialRecord],
    summary: &Summary,
    config: &RunConfig,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    create_dir(out_dir)?;
    let trace = out_dir.join("trace.csv");
    write_trace(records, &trace)?;
    let json = out_dir.join("summary.json");
    let text = serde_json::to_string_pretty(&SummaryFile { config, summary })?;
    fs::write(&json, text + "\n").map_err(|e| Error::io(&json, e))?;
    Ok(vec![trace, json])
}

fn write_trace(records: &[TrialRecord], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in records {
            for row in &r.rows {
                let second = row.second.map(|j| j.to_string()).unwrap_or_default();
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    r.seed,
                    row.t,
                    row.first,
                    second,
                    u8::from(row.outcome),
                    row.step_regret,
                    row.cum_regret
                )?;
            }
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// One aggregated cell of a comparison grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub env: TestFunction,
    pub policy: PolicyKind,
    pub summary: Summary,
}

/// Renders `mean ± se` cells, one row per environment and one column per policy.
pub fn format_table(envs: &[TestFunction], policies: &[PolicyKind], cells: &[Cell]) -> String {
    let mut header = vec!["f".to_string()];
    header.extend(policies.iter().map(|p| p.title().to_string()));
    let mut body = Vec::new();
    for &env in envs {
        let mut line = vec![env.title().to_string()];
        for &policy in policies {
            let text = cells
                .iter()
                .find(|c| c.env == env && c.policy == policy)
                .map(|c| format!("{:.2} ± {:.2}", c.summary.mean_cum_regret, c.summary.std_err))
                .unwrap_or_else(|| "-".into());
            line.push(text);
        }
        body.push(line);
    }
    let widths: Vec<usize> = (0..header.len())
        .map(|k| {
            std::iter::once(&header)
                .chain(&body)
                .map(|row| row[k].chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let render = |row: &[String]| -> String {
        let cols: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect();
        cols.join(" | ").trim_end().to_string()
    };
    let mut out = String::new();
    let _ = writeln!(out, "{}", render(&header));
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    let _ = writeln!(out, "{}", rule.join("-|-"));
    for row in &body {
        let _ = writeln!(out, "{}", render(row));
    }
    out
}

/// Runs every `env × policy` cell with the shared settings of `base`.
///
/// Each cell is written to `<out_dir>/<env>/<policy>/`; the table goes to
/// `<out_dir>/table.txt`.
pub fn run_compare(
    base: &RunConfig,
    envs: &[TestFunction],
    policies: &[PolicyKind],
) -> Result<(Vec<Cell>, String)> {
    if envs.is_empty() || policies.is_empty() {
        return Err(Error::Config("compare needs at least one env and one policy".into()));
    }
    let mut cells = Vec::new();
    for &env in envs {
        for &policy in policies {
            let mut config = base.clone();
            config.env = env;
            config.policy = policy;
            config.out_dir = base.out_dir.join(env.name()).join(policy.name());
            let records = run_seeds(&config)?;
            let summary = aggregate(&records)?;
            emit(&records, &summary, &config, &config.out_dir)?;
            cells.push(Cell {
                env,
                policy,
                summary,
            });
        }
    }
    let table = format_table(envs, policies, &cells);
    create_dir(&base.out_dir)?;
    let path = base.out_dir.join("table.txt");
    fs::write(&path, &table).map_err(|e| Error::io(&path, e))?;
    Ok((cells, table))
}
