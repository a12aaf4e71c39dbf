//! Repeated train/evaluate runs comparing aggregation strategies.
//!
//! Each repeat trains one forest with seed `seed_base + r`, collects the
//! tree votes on the test set once, and scores every strategy from those
//! same votes. Strategies never retrain.

use std::fmt::Write as _;

use serde::Serialize;

use crate::aggregation::{Aggregator, Strategy, VoteMatrix};
use crate::data::{ClassId, Dataset};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::forest::{train_forest, ForestParams};
use crate::metrics::{confusion_from_predictions, evaluate, EvalReport};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub repeats: usize,
    /// `seed` is the base; repeat `r` uses `seed + r`.
    pub forest: ForestParams,
    pub strategies: Vec<Strategy>,
    pub negative_class: ClassId,
    /// Parallelism inside a repeat (tree training, prediction).
    pub exec: Execution,
    /// Run the repeats themselves concurrently.
    pub parallel_repeats: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample (n - 1) standard deviation; the deviation of a single value is 0.
pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    MeanStd { mean, std }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepeatResult {
    pub seed: u64,
    /// One report per configured strategy, same order.
    pub reports: Vec<EvalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub precision: MeanStd,
    pub recall: MeanStd,
    pub fscore: MeanStd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub runs: Vec<RepeatResult>,
    pub summaries: Vec<StrategySummary>,
}

fn run_repeat(train: &Dataset, test: &Dataset, cfg: &BenchConfig, r: usize) -> Result<RepeatResult> {
    let seed = cfg.forest.seed.wrapping_add(r as u64);
    let params = ForestParams { seed, ..cfg.forest };
    let model = train_forest(train, &params, cfg.exec)?;
    let votes = VoteMatrix::collect(&model, test.samples(), cfg.exec);
    let reports = cfg
        .strategies
        .iter()
        .map(|&s| {
            let agg = Aggregator::new(&model, s)?;
            let predicted = votes.decide_all(&agg, cfg.exec);
            let m = confusion_from_predictions(test.labels(), &predicted, model.num_classes())?;
            evaluate(&m, cfg.negative_class)
        })
        .collect::<Result<_>>()?;
    log::info!("repeat {r} (seed {seed}) done");
    Ok(RepeatResult { seed, reports })
}

/// Runs the full protocol. `test` must already use `train`'s label dictionary.
pub fn run_bench(train: &Dataset, test: &Dataset, cfg: &BenchConfig) -> Result<BenchTable> {
    if cfg.repeats == 0 {
        return Err(Error::InvalidArgument("need at least one repeat".to_string()));
    }
    if cfg.strategies.is_empty() {
        return Err(Error::InvalidArgument("no strategies to compare".to_string()));
    }
    if train.label_dict() != test.label_dict() {
        return Err(Error::Config(
            "test set is not expressed in the training label dictionary".to_string(),
        ));
    }
    let outer = if cfg.parallel_repeats {
        Execution::Parallel
    } else {
        Execution::Sequential
    };
    let runs = outer
        .map_indices(cfg.repeats, |r| run_repeat(train, test, cfg, r))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let summaries = cfg
        .strategies
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let pick = |f: fn(&EvalReport) -> f64| -> MeanStd {
                mean_std(&runs.iter().map(|r| f(&r.reports[i])).collect::<Vec<_>>())
            };
            StrategySummary {
                strategy: s.label(),
                precision: pick(|e| e.macro_avg.precision),
                recall: pick(|e| e.macro_avg.recall),
                fscore: pick(|e| e.macro_avg.fscore),
            }
        })
        .collect();
    Ok(BenchTable { runs, summaries })
}

impl BenchTable {
    pub fn summary(&self, strategy: &str) -> Option<&StrategySummary> {
        self.summaries.iter().find(|s| s.strategy == strategy)
    }

    /// Aligned table of macro precision, recall and F-score (mean ± std).
    pub fn to_text(&self) -> String {
        let width = self
            .summaries
            .iter()
            .map(|s| s.strategy.len())
            .max()
            .unwrap_or(0)
            .max("strategy".len());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>15}  {:>15}  {:>15}",
            "strategy", "precision", "recall", "fscore"
        );
        let cell = |m: &MeanStd| format!("{:.3} ± {:.3}", m.mean, m.std);
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{:<width$}  {:>15}  {:>15}  {:>15}",
                s.strategy,
                cell(&s.precision),
                cell(&s.recall),
                cell(&s.fscore)
            );
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let runs: Vec<_> = self
            .runs
            .iter()
            .map(|r| {
                let macros: Vec<_> = self
                    .summaries
                    .iter()
                    .zip(&r.reports)
                    .map(|(s, rep)| serde_json::json!({"strategy": s.strategy, "macro": rep.macro_avg}))
                    .collect();
                serde_json::json!({"seed": r.seed, "results": macros})
            })
            .collect();
        serde_json::json!({
            "repeats": self.runs.len(),
            "summary": self.summaries,
            "runs": runs,
        })
    }
}
