//! Random forests whose ensemble decision can be either majority voting or
//! Bayesian tree aggregation (BTA).
//!
//! BTA treats every tree's vote as evidence about the true class. The
//! likelihood `P(vote | class)` of each tree is estimated from that tree's
//! out-of-bag confusion matrix, combined with the training class prior, and
//! maximized in the log domain. This favours minority classes that trees
//! recognise reliably, which is where majority voting tends to lose recall
//! on imbalanced data.
//!
//! ```no_run
//! use bta_forest::{
//!     libsvm::{read_libsvm_file, ParseOptions},
//!     predict_batch, train_forest, Execution, ForestParams, Smoothing, Strategy,
//! };
//!
//! let (train, _) = read_libsvm_file("letter.scale".as_ref(), ParseOptions::default())?;
//! let train = train.merge_bottom_classes(7)?;
//! let model = train_forest(&train, &ForestParams::default(), Execution::default())?;
//! let predicted = predict_batch(
//!     &model,
//!     train.samples(),
//!     Strategy::Bta(Smoothing::EpsilonFloor(1e-5)),
//!     Execution::default(),
//! )?;
//! # Ok::<(), bta_forest::Error>(())
//! ```

pub mod aggregation;
pub mod bench;
pub mod data;
pub mod error;
pub mod exec;
pub mod forest;
pub mod libsvm;
pub mod metrics;
pub mod store;
pub mod synth;
pub mod tree;

pub use aggregation::{
    bta_decide, majority_vote, predict_batch, predict_forest, smoothed_conditional, Aggregator,
    DecisionScores, Smoothing, Strategy, VoteMatrix,
};
pub use data::{class_priors, ClassId, ClassPriors, Dataset, LabelDict, SampleVector};
pub use error::{Error, Result};
pub use exec::{with_threads, Execution};
pub use forest::{
    bootstrap_sample, conditional_row, train_forest, ConfusionMatrix, ForestModel, ForestParams,
};
pub use metrics::{confusion_from_predictions, evaluate, EvalReport, Scores};
pub use store::{load_model, save_model};
pub use tree::{train_tree, DecisionTree, FeatureSubset, TreeParams};
