use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Window of the moving-average columns.
pub const MOVING_AVERAGE_WINDOW: usize = 100;

/// Fraction of the final value within which a run counts as settled.
pub const SETTLED_FRACTION: f64 = 0.05;

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub step: usize,
    /// Per-agent mean delay of this step, seconds.
    pub costs: Vec<f64>,
    pub moving_averages: Vec<f64>,
    /// `(baseline - cost) / baseline` against the step-0 equal split.
    pub reductions: Vec<f64>,
    pub system_cost: f64,
    pub system_moving_average: f64,
    pub system_reduction: f64,
    pub wall_clock: Option<f64>,
}

/// Trailing mean over the last [`MOVING_AVERAGE_WINDOW`] values.
#[derive(Debug, Clone, Default)]
pub struct MovingAverage {
    window: VecDeque<f64>,
}

impl MovingAverage {
    pub fn push(&mut self, v: f64) -> f64 {
        if self.window.len() == MOVING_AVERAGE_WINDOW {
            self.window.pop_front();
        }
        self.window.push_back(v);
        self.window.iter().sum::<f64>() / self.window.len() as f64
    }
}

pub fn reduction(baseline: f64, cost: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        (baseline - cost) / baseline
    }
}

/// Rows of a finished run plus the agent column labels.
#[derive(Debug, Clone)]
pub struct RunResult {
    /// `<kind>_<index>` per agent.
    pub labels: Vec<String>,
    /// Step-0 equal-split cost per agent, then the system value.
    pub baselines: Vec<f64>,
    pub system_baseline: f64,
    pub rows: Vec<MetricsRow>,
}

impl RunResult {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["step".to_string()];
        for suffix in ["cost", "ma", "reduction"] {
            h.extend(self.labels.iter().map(|l| format!("{l}_{suffix}")));
        }
        h.extend(["system_cost", "system_ma", "system_reduction"].map(String::from));
        if self.rows.first().is_some_and(|r| r.wall_clock.is_some()) {
            h.push("wall_clock_s".into());
        }
        h
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header())?;
        for r in &self.rows {
            let mut rec = vec![r.step.to_string()];
            for col in [&r.costs, &r.moving_averages, &r.reductions] {
                rec.extend(col.iter().map(f64::to_string));
            }
            rec.extend([r.system_cost, r.system_moving_average, r.system_reduction].map(|v| v.to_string()));
            if let Some(t) = r.wall_clock {
                rec.push(t.to_string());
            }
            w.write_record(rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    pub fn column(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Moving average of agent `a` at the last step.
    pub fn final_moving_average(&self, a: usize) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.moving_averages[a])
    }
}

/// Headline numbers of one agent column of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub label: String,
    pub final_moving_average: f64,
    /// Percent delay reduction over the final averaging window.
    pub reduction_percent: f64,
    /// First step after which the moving average stays within 5% of its final value.
    pub steps_to_settle: usize,
}

/// Mean and population standard deviation over runs of one agent kind.
#[derive(Debug, Clone, PartialEq)]
pub struct KindSummary {
    pub kind: String,
    pub samples: usize,
    pub final_moving_average: (f64, f64),
    pub reduction_percent: (f64, f64),
    pub steps_to_settle: (f64, f64),
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    // Offsetting by the first value keeps identical inputs exact.
    let first = values[0];
    let n = values.len() as f64;
    let mean = first + values.iter().map(|v| v - first).sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn kind_of(label: &str) -> &str {
    match label.rsplit_once('_') {
        Some((kind, idx)) if idx.chars().all(|c| c.is_ascii_digit()) => kind,
        _ => label,
    }
}

/// Reads one run CSV and summarizes each agent column.
pub fn summarize_csv(text: &str, origin: &Path) -> Result<Vec<RunSummary>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let labels: Vec<String> = header
        .iter()
        .filter_map(|h| h.strip_suffix("_cost"))
        .filter(|l| *l != "system")
        .map(String::from)
        .collect();
    if labels.is_empty() {
        return Err(Error::parse(origin, 1, "no `<agent>_cost` columns"));
    }
    let mut cols = Vec::new();
    for l in &labels {
        let ma = col(&format!("{l}_ma")).ok_or_else(|| Error::parse(origin, 1, format!("missing {l}_ma")))?;
        let red = col(&format!("{l}_reduction"))
            .ok_or_else(|| Error::parse(origin, 1, format!("missing {l}_reduction")))?;
        cols.push((ma, red));
    }
    let mut ma: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
    let mut red: Vec<Vec<f64>> = vec![Vec::new(); labels.len()];
    let step_col = col("step");
    let mut steps = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| -> Result<f64> {
            rec.get(c)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::parse(origin, i + 2, format!("bad value in column {}", c + 1)))
        };
        steps.push(match step_col {
            Some(c) => field(c)? as usize,
            None => i,
        });
        for (a, &(m, r)) in cols.iter().enumerate() {
            ma[a].push(field(m)?);
            red[a].push(field(r)?);
        }
    }
    if steps.is_empty() {
        return Err(Error::parse(origin, 2, "no data rows"));
    }
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(a, label)| {
            let fin = *ma[a].last().unwrap();
            let tail = &red[a][red[a].len().saturating_sub(MOVING_AVERAGE_WINDOW)..];
            let settled = ma[a]
                .iter()
                .rposition(|v| (v - fin).abs() > SETTLED_FRACTION * fin.abs())
                .map_or(0, |i| i + 1);
            RunSummary {
                label,
                final_moving_average: fin,
                reduction_percent: 100.0 * tail.iter().sum::<f64>() / tail.len() as f64,
                steps_to_settle: steps.get(settled).copied().unwrap_or(steps[steps.len() - 1]),
            }
        })
        .collect())
}

/// Aggregates the agent columns of several run CSVs by agent kind.
pub fn summarize<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<KindSummary>> {
    let mut runs = Vec::new();
    for p in paths {
        let p = p.as_ref();
        runs.extend(summarize_csv(&std::fs::read_to_string(p)?, p)?);
    }
    Ok(aggregate(&runs))
}

pub fn aggregate(runs: &[RunSummary]) -> Vec<KindSummary> {
    let mut by_kind: BTreeMap<&str, Vec<&RunSummary>> = BTreeMap::new();
    for r in runs {
        by_kind.entry(kind_of(&r.label)).or_default().push(r);
    }
    by_kind
        .into_iter()
        .map(|(kind, rs)| {
            let stat = |f: fn(&RunSummary) -> f64| mean_std(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            KindSummary {
                kind: kind.to_string(),
                samples: rs.len(),
                final_moving_average: stat(|r| r.final_moving_average),
                reduction_percent: stat(|r| r.reduction_percent),
                steps_to_settle: stat(|r| r.steps_to_settle as f64),
            }
        })
        .collect()
}

/// Plain-text table of [`aggregate`] output.
pub fn format_summary(rows: &[KindSummary]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<12} {:>4} {:>24} {:>20} {:>18}",
        "agent", "runs", "final MA cost (s)", "reduction (%)", "steps to 5%"
    )
    .unwrap();
    for r in rows {
        writeln!(
            out,
            "{:<12} {:>4} {:>12.6} ± {:<9.6} {:>9.2} ± {:<8.2} {:>7.1} ± {:<8.1}",
            r.kind,
            r.samples,
            r.final_moving_average.0,
            r.final_moving_average.1,
            r.reduction_percent.0,
            r.reduction_percent.1,
            r.steps_to_settle.0,
            r.steps_to_settle.1
        )
        .unwrap();
    }
    out
}
