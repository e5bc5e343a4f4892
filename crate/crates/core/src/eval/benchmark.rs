use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::evaluate_model;
use crate::error::{Error, Result};
use crate::model::{grid_search, train_model, ModelDims, SequenceExample, TrainConfig, TrainedModel, Variant};

/// Production-scale values reported for the three headline methods
/// (Recall-r, Recall-t). Shown for layout comparison only.
pub const REFERENCE_RESULTS: [(Variant, f64, f64); 3] = [
    (Variant::Frequency, 0.627, 0.631),
    (Variant::Linear, 0.646, 0.652),
    (Variant::Lstm, 0.689, 0.690),
];

#[derive(Clone, Debug)]
pub struct BenchmarkData {
    pub train: Vec<SequenceExample>,
    pub validation: Vec<SequenceExample>,
    pub test: Vec<SequenceExample>,
    /// Shapes; `hidden` is taken from the training template.
    pub dims: ModelDims,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunOutcome {
    Ok {
        seed: u64,
        lambda: f64,
        best_epoch: usize,
        recall_r: f64,
        recall_t: f64,
    },
    Failed {
        seed: u64,
        error: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Variant,
    /// λ selected on the first seed; `None` when no λ applies or the search failed.
    pub lambda: Option<f64>,
    /// Validation Recall-r for each grid value, first seed only.
    pub grid: Vec<(f64, f64)>,
    pub runs: Vec<RunOutcome>,
    /// (mean, standard error) over successful runs.
    pub recall_r: Option<(f64, f64)>,
    pub recall_t: Option<(f64, f64)>,
    pub best_recall_r: bool,
    pub best_recall_t: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodReport>,
}

impl BenchmarkReport {
    pub fn method(&self, variant: Variant) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == variant)
    }
}

/// Sample mean and standard error (n − 1 standard deviation over √n); a
/// single value has standard error 0.
pub fn mean_and_standard_error(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, 0.0));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, (var / n).sqrt()))
}

fn test_outcome(data: &BenchmarkData, trained: &TrainedModel, seed: u64) -> Result<RunOutcome> {
    let eval = evaluate_model(&trained.model, &data.test)?;
    Ok(RunOutcome::Ok {
        seed,
        lambda: trained.lambda,
        best_epoch: trained.best_epoch,
        recall_r: eval.recall_r,
        recall_t: eval.recall_t,
    })
}

fn failed(seed: u64, error: &Error) -> RunOutcome {
    RunOutcome::Failed {
        seed,
        error: error.to_string(),
    }
}

/// Trains and tests every method once per seed (`seed`, `seed + 1`, …).
/// λ is grid-searched on the first seed and reused for the remaining runs.
/// Failures are recorded per run; the report is always produced.
pub fn run_benchmark(
    data: &BenchmarkData,
    methods: &[Variant],
    runs: usize,
    seed: u64,
    template: &TrainConfig,
    mut observe: impl FnMut(Variant, &RunOutcome),
) -> Result<BenchmarkReport> {
    if runs == 0 {
        return Err(Error::InvalidArgument("runs must be positive".into()));
    }
    if methods.is_empty() {
        return Err(Error::InvalidArgument("no methods to benchmark".into()));
    }
    let seeds: Vec<u64> = (0..runs as u64).map(|i| seed.wrapping_add(i)).collect();
    let dims = ModelDims {
        hidden: template.hidden,
        ..data.dims
    };
    let mut reports = Vec::new();
    for &method in methods {
        let config = TrainConfig {
            variant: method,
            seed: seeds[0],
            ..template.clone()
        };
        let mut outcomes = Vec::new();
        let (lambda, grid) = match grid_search(&data.train, &data.validation, dims, &config) {
            Ok(search) => {
                let outcome = test_outcome(data, &search.best, seeds[0]).unwrap_or_else(|e| failed(seeds[0], &e));
                observe(method, &outcome);
                outcomes.push(outcome);
                (Some(search.best.lambda), search.scores)
            }
            Err(e) => {
                let outcome = failed(seeds[0], &e);
                observe(method, &outcome);
                outcomes.push(outcome);
                (None, Vec::new())
            }
        };
        for &s in &seeds[1..] {
            let outcome = match lambda {
                None => failed(s, &Error::InvalidArgument("grid search failed on the first seed".into())),
                Some(lambda) => {
                    let config = TrainConfig {
                        variant: method,
                        seed: s,
                        lambda,
                        ..template.clone()
                    };
                    train_model(&data.train, &data.validation, dims, &config)
                        .and_then(|trained| test_outcome(data, &trained, s))
                        .unwrap_or_else(|e| failed(s, &e))
                }
            };
            observe(method, &outcome);
            outcomes.push(outcome);
        }
        let (r, t): (Vec<f64>, Vec<f64>) = outcomes
            .iter()
            .filter_map(|o| match o {
                RunOutcome::Ok { recall_r, recall_t, .. } => Some((*recall_r, *recall_t)),
                RunOutcome::Failed { .. } => None,
            })
            .unzip();
        reports.push(MethodReport {
            method,
            lambda: lambda.filter(|_| method.is_stochastic()),
            grid,
            runs: outcomes,
            recall_r: mean_and_standard_error(&r),
            recall_t: mean_and_standard_error(&t),
            best_recall_r: false,
            best_recall_t: false,
        });
    }
    flag_best(&mut reports);
    Ok(BenchmarkReport { seeds, methods: reports })
}

fn flag_best(reports: &mut [MethodReport]) {
    let best = |get: fn(&MethodReport) -> Option<(f64, f64)>, reports: &[MethodReport]| {
        reports
            .iter()
            .filter_map(get)
            .map(|(m, _)| m)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let best_r = best(|m| m.recall_r, reports);
    let best_t = best(|m| m.recall_t, reports);
    for m in reports {
        m.best_recall_r = m.recall_r.is_some_and(|(v, _)| v == best_r);
        m.best_recall_t = m.recall_t.is_some_and(|(v, _)| v == best_t);
    }
}

fn cell(value: Option<(f64, f64)>, best: bool) -> String {
    match value {
        Some((mean, se)) => format!("{mean:.3} ({se:.3}){}", if best { " *" } else { "" }),
        None => "failed".to_string(),
    }
}

/// Aligned text table: one row per method, mean (standard error) per
/// metric, best cells marked with `*`.
pub fn format_table(report: &BenchmarkReport, with_reference: bool) -> String {
    let mut rows: Vec<Vec<String>> = vec![vec!["Method".into(), "Recall-r".into(), "Recall-t".into()]];
    if with_reference {
        rows[0].extend(["Reference r".to_string(), "Reference t".to_string()]);
    }
    for m in &report.methods {
        let mut row = vec![
            m.method.label().to_string(),
            cell(m.recall_r, m.best_recall_r),
            cell(m.recall_t, m.best_recall_t),
        ];
        if with_reference {
            match REFERENCE_RESULTS.iter().find(|(v, _, _)| *v == m.method) {
                Some((_, r, t)) => row.extend([format!("{r:.3}"), format!("{t:.3}")]),
                None => row.extend(["-".to_string(), "-".to_string()]),
            }
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, w))| if c == 0 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        out.push_str(line.join("   ").trim_end());
        out.push('\n');
        if i == 0 {
            out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 3 * (widths.len() - 1)));
            out.push('\n');
        }
    }
    let _ = writeln!(
        out,
        "\nMean (standard error) over {} run{}; * marks the best method per column.",
        report.seeds.len(),
        if report.seeds.len() == 1 { "" } else { "s" }
    );
    if report.seeds.len() == 1 {
        out.push_str("Single run: standard errors are reported as 0.\n");
    }
    let failures: usize = report
        .methods
        .iter()
        .flat_map(|m| &m.runs)
        .filter(|o| matches!(o, RunOutcome::Failed { .. }))
        .count();
    if failures > 0 {
        let _ = writeln!(out, "{failures} run(s) failed; see the structured report.");
    }
    out
}
