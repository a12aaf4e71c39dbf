//! Turning per-tree votes into a forest decision.
//!
//! Two rules are provided:
//!
//! * majority voting: the class with the most votes;
//! * Bayesian tree aggregation (BTA): for every class `y`,
//!   `ln P(y) + sum_t ln P(vote_t | y)`, where `P(vote_t | y)` comes from
//!   tree `t`'s out-of-bag confusion matrix, smoothed so no estimate is zero.
//!
//! Scores are sums of logarithms and never leave the log domain. The sum is
//! accumulated in 64.64 fixed point, which is exact, so reordering the trees
//! cannot change a score or flip a tie. Ties go to the lowest class id.

use crate::data::{ClassId, ClassPriors, SampleVector};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::forest::{conditional_row, ConfusionMatrix, ForestModel};

/// How zero conditional estimates are avoided.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    /// `max(c / N, epsilon)`.
    EpsilonFloor(f64),
    /// `((c + 1/K) / (N + 1))^B`.
    Kuncheva(f64),
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::EpsilonFloor(1e-5)
    }
}

impl Smoothing {
    pub fn validate(&self) -> Result<()> {
        let (name, v) = match *self {
            Smoothing::EpsilonFloor(e) => ("epsilon", e),
            Smoothing::Kuncheva(b) => ("B", b),
        };
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    MajorityVote,
    Bta(Smoothing),
}

impl Strategy {
    /// Short stable name used in reports: `mv`, `bta-eps=1e-5`, `bta-b=0.5`.
    pub fn label(&self) -> String {
        match self {
            Strategy::MajorityVote => "mv".to_string(),
            Strategy::Bta(Smoothing::EpsilonFloor(e)) => format!("bta-eps={e:e}"),
            Strategy::Bta(Smoothing::Kuncheva(b)) => format!("bta-b={b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionScores {
    pub log_scores: Vec<f64>,
    pub decision: ClassId,
}

/// First index of the maximum, i.e. the lowest class id among ties.
fn first_argmax<T: PartialOrd + Copy>(values: &[T]) -> ClassId {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Plurality vote; ties go to the lowest class id.
pub fn majority_vote(votes: &[ClassId], k: usize) -> ClassId {
    let mut counts = vec![0usize; k];
    for &v in votes {
        counts[v] += 1;
    }
    first_argmax(&counts)
}

/// Smoothed estimate of `P(tree predicts predicted | true class y)`.
pub fn smoothed_conditional(m: &ConfusionMatrix, y: ClassId, predicted: ClassId, cfg: Smoothing) -> f64 {
    match cfg {
        Smoothing::EpsilonFloor(eps) => conditional_row(m, y)[predicted].max(eps),
        Smoothing::Kuncheva(b) => {
            let k = m.num_classes() as f64;
            let c = m.get(y, predicted) as f64;
            let n = m.row_total(y) as f64;
            ((c + 1.0 / k) / (n + 1.0)).powf(b)
        }
    }
}

/// Natural log of [`smoothed_conditional`], computed without leaving the log domain.
pub fn log_smoothed_conditional(m: &ConfusionMatrix, y: ClassId, predicted: ClassId, cfg: Smoothing) -> f64 {
    match cfg {
        Smoothing::EpsilonFloor(eps) => {
            let n = m.row_total(y);
            let p = if n == 0 {
                1.0 / m.num_classes() as f64
            } else {
                m.get(y, predicted) as f64 / n as f64
            };
            p.max(eps).ln()
        }
        Smoothing::Kuncheva(b) => {
            let k = m.num_classes() as f64;
            let c = m.get(y, predicted) as f64;
            let n = m.row_total(y) as f64;
            b * ((c + 1.0 / k).ln() - (n + 1.0).ln())
        }
    }
}

/// Exact accumulator for log terms, 64 fractional bits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord)]
struct FixedLog(i128);

const FIXED_SCALE: f64 = 18_446_744_073_709_551_616.0; // 2^64

impl FixedLog {
    fn from_f64(x: f64) -> Self {
        debug_assert!(x.is_finite());
        FixedLog((x * FIXED_SCALE).round() as i128)
    }

    fn to_f64(self) -> f64 {
        self.0 as f64 / FIXED_SCALE
    }
}

fn finish(sums: &[FixedLog]) -> DecisionScores {
    let log_scores: Vec<f64> = sums.iter().map(|s| s.to_f64()).collect();
    let decision = first_argmax(&log_scores);
    DecisionScores {
        log_scores,
        decision,
    }
}

/// BTA decision from votes, the voters' OOB matrices and the class priors.
pub fn bta_decide<'a, I>(votes: &[ClassId], matrices: I, priors: &ClassPriors, cfg: Smoothing) -> DecisionScores
where
    I: IntoIterator<Item = &'a ConfusionMatrix>,
{
    let mut sums: Vec<FixedLog> = priors
        .probs()
        .iter()
        .map(|p| FixedLog::from_f64(p.ln()))
        .collect();
    let mut used = 0;
    for (&vote, m) in votes.iter().zip(matrices) {
        for (y, sum) in sums.iter_mut().enumerate() {
            sum.0 += FixedLog::from_f64(log_smoothed_conditional(m, y, vote, cfg)).0;
        }
        used += 1;
    }
    debug_assert_eq!(used, votes.len(), "one matrix per vote");
    finish(&sums)
}

/// Precomputed BTA evidence tables for one model and smoothing choice.
///
/// `table[t][v * K + y]` holds `ln P(tree t votes v | y)` in fixed point.
#[derive(Debug, Clone)]
pub struct BtaScorer {
    k: usize,
    prior_terms: Vec<FixedLog>,
    tables: Vec<Vec<FixedLog>>,
}

impl BtaScorer {
    pub fn new(matrices: &[ConfusionMatrix], priors: &ClassPriors, cfg: Smoothing) -> Self {
        let k = priors.len();
        let tables = matrices
            .iter()
            .map(|m| {
                let mut table = vec![FixedLog::default(); k * k];
                for v in 0..k {
                    for y in 0..k {
                        table[v * k + y] = FixedLog::from_f64(log_smoothed_conditional(m, y, v, cfg));
                    }
                }
                table
            })
            .collect();
        BtaScorer {
            k,
            prior_terms: priors.probs().iter().map(|p| FixedLog::from_f64(p.ln())).collect(),
            tables,
        }
    }

    pub fn decide(&self, votes: &[ClassId]) -> DecisionScores {
        let mut sums = self.prior_terms.clone();
        for (table, &v) in self.tables.iter().zip(votes) {
            let column = &table[v * self.k..(v + 1) * self.k];
            for (sum, term) in sums.iter_mut().zip(column) {
                sum.0 += term.0;
            }
        }
        finish(&sums)
    }
}

/// A strategy bound to a model, ready to decide vote vectors.
#[derive(Debug, Clone)]
pub enum Aggregator {
    Majority { k: usize },
    Bta(BtaScorer),
}

impl Aggregator {
    pub fn new(model: &ForestModel, strategy: Strategy) -> Result<Self> {
        Ok(match strategy {
            Strategy::MajorityVote => Aggregator::Majority {
                k: model.num_classes(),
            },
            Strategy::Bta(cfg) => {
                cfg.validate()?;
                Aggregator::Bta(BtaScorer::new(model.oob_matrices(), model.priors(), cfg))
            }
        })
    }

    pub fn decide(&self, votes: &[ClassId]) -> (ClassId, Option<DecisionScores>) {
        match self {
            Aggregator::Majority { k } => (majority_vote(votes, *k), None),
            Aggregator::Bta(scorer) => {
                let scores = scorer.decide(votes);
                (scores.decision, Some(scores))
            }
        }
    }

    /// Per-class scores for output: vote shares for majority voting, log scores for BTA.
    pub fn scores(&self, votes: &[ClassId]) -> (ClassId, Vec<f64>) {
        match self {
            Aggregator::Majority { k } => {
                let mut share = vec![0.0; *k];
                for &v in votes {
                    share[v] += 1.0;
                }
                share.iter_mut().for_each(|s| *s /= votes.len() as f64);
                (majority_vote(votes, *k), share)
            }
            Aggregator::Bta(scorer) => {
                let s = scorer.decide(votes);
                (s.decision, s.log_scores)
            }
        }
    }
}

/// Votes of every tree for a sample.
pub fn tree_votes(model: &ForestModel, x: &SampleVector) -> Vec<ClassId> {
    let mut dense = vec![0.0; model.num_features() + 1];
    x.scatter_into(&mut dense);
    model.trees().iter().map(|t| t.predict_dense(&dense)).collect()
}

/// Forest prediction for one sample.
pub fn predict_forest(model: &ForestModel, x: &SampleVector, strategy: Strategy) -> Result<(ClassId, Option<DecisionScores>)> {
    let votes = tree_votes(model, x);
    Ok(match strategy {
        Strategy::MajorityVote => (majority_vote(&votes, model.num_classes()), None),
        Strategy::Bta(cfg) => {
            cfg.validate()?;
            let s = bta_decide(&votes, model.oob_matrices(), model.priors(), cfg);
            (s.decision, Some(s))
        }
    })
}

/// Tree votes for many samples, row-major `samples x trees`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteMatrix {
    num_trees: usize,
    votes: Vec<ClassId>,
}

impl VoteMatrix {
    pub fn collect(model: &ForestModel, samples: &[SampleVector], exec: Execution) -> Self {
        let m = model.num_features();
        let rows = exec.map_chunked(
            samples.len(),
            64,
            || vec![0.0; m + 1],
            |dense, i| {
                samples[i].scatter_into(dense);
                model
                    .trees()
                    .iter()
                    .map(|t| t.predict_dense(dense))
                    .collect::<Vec<_>>()
            },
        );
        VoteMatrix {
            num_trees: model.trees().len(),
            votes: rows.concat(),
        }
    }

    pub fn len(&self) -> usize {
        self.votes.len() / self.num_trees.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty()
    }

    pub fn row(&self, i: usize) -> &[ClassId] {
        &self.votes[i * self.num_trees..(i + 1) * self.num_trees]
    }

    /// Decides every row with `agg`.
    pub fn decide_all(&self, agg: &Aggregator, exec: Execution) -> Vec<ClassId> {
        exec.map_chunked(self.len(), 256, || (), |_, i| agg.decide(self.row(i)).0)
    }
}

/// Predicted classes for `samples`.
pub fn predict_batch(
    model: &ForestModel,
    samples: &[SampleVector],
    strategy: Strategy,
    exec: Execution,
) -> Result<Vec<ClassId>> {
    let agg = Aggregator::new(model, strategy)?;
    Ok(VoteMatrix::collect(model, samples, exec).decide_all(&agg, exec))
}
