//! Bagged forests with per-tree out-of-bag confusion matrices.
//!
//! Each tree keeps the raw counts of its OOB predictions. These are what
//! Bayesian aggregation normalizes (and smooths) at prediction time, so a
//! single trained model serves every smoothing variant.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{class_priors, ClassId, ClassPriors, Dataset, LabelDict};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::tree::{train_tree, DecisionTree, FeatureMatrix, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub num_trees: usize,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            num_trees: 100,
            tree: TreeParams::default(),
            seed: 0,
        }
    }
}

/// `K x K` counts, row = true class, column = predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix {
            k,
            counts: vec![0; k * k],
        }
    }

    /// Builds from row-major counts.
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidArgument(
                "confusion matrix must be square".to_string(),
            ));
        }
        Ok(ConfusionMatrix {
            k,
            counts: rows.concat(),
        })
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, truth: ClassId, predicted: ClassId) -> u64 {
        self.counts[truth * self.k + predicted]
    }

    #[inline]
    pub fn add(&mut self, truth: ClassId, predicted: ClassId) {
        self.counts[truth * self.k + predicted] += 1;
    }

    pub fn row(&self, truth: ClassId) -> &[u64] {
        &self.counts[truth * self.k..(truth + 1) * self.k]
    }

    /// `N_y`, the number of counted samples whose true class is `truth`.
    pub fn row_total(&self, truth: ClassId) -> u64 {
        self.row(truth).iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn column_total(&self, predicted: ClassId) -> u64 {
        (0..self.k).map(|t| self.get(t, predicted)).sum()
    }
}

/// Row `truth` normalized by its total; uniform when the row is empty.
pub fn conditional_row(m: &ConfusionMatrix, truth: ClassId) -> Vec<f64> {
    let k = m.num_classes();
    let n = m.row_total(truth);
    if n == 0 {
        return vec![1.0 / k as f64; k];
    }
    m.row(truth).iter().map(|&c| c as f64 / n as f64).collect()
}

/// `n` draws with replacement from `0..n`, and the indices never drawn.
pub fn bootstrap_sample<R: Rng>(n: usize, rng: &mut R) -> (Vec<u32>, Vec<u32>) {
    let mut drawn = vec![false; n];
    let bag: Vec<u32> = (0..n)
        .map(|_| {
            let i = rng.gen_range(0..n);
            drawn[i] = true;
            i as u32
        })
        .collect();
    let oob = (0..n as u32).filter(|&i| !drawn[i as usize]).collect();
    (bag, oob)
}

/// Independent stream for tree `index`: same seed, distinct ChaCha stream.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub(crate) trees: Vec<DecisionTree>,
    pub(crate) oob: Vec<ConfusionMatrix>,
    pub(crate) priors: ClassPriors,
    pub(crate) label_dict: LabelDict,
    pub(crate) num_features: usize,
    pub(crate) params: ForestParams,
}

impl ForestModel {
    /// Assembles a model from parts, checking shapes.
    pub fn from_parts(
        trees: Vec<DecisionTree>,
        oob: Vec<ConfusionMatrix>,
        priors: ClassPriors,
        label_dict: LabelDict,
        num_features: usize,
        params: ForestParams,
    ) -> Result<Self> {
        let k = label_dict.len();
        if trees.is_empty() {
            return Err(Error::Invariant("forest has no trees".to_string()));
        }
        if trees.len() != oob.len() || trees.len() != params.num_trees {
            return Err(Error::Invariant(format!(
                "{} trees, {} OOB matrices, {} declared",
                trees.len(),
                oob.len(),
                params.num_trees
            )));
        }
        if let Some(t) = oob.iter().position(|m| m.num_classes() != k) {
            return Err(Error::Invariant(format!(
                "OOB matrix {t} is not {k}x{k}"
            )));
        }
        if priors.len() != k {
            return Err(Error::Invariant(format!(
                "{} priors for {k} classes",
                priors.len()
            )));
        }
        Ok(ForestModel {
            trees,
            oob,
            priors,
            label_dict,
            num_features,
            params,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn oob_matrices(&self) -> &[ConfusionMatrix] {
        &self.oob
    }

    pub fn priors(&self) -> &ClassPriors {
        &self.priors
    }

    pub fn label_dict(&self) -> &LabelDict {
        &self.label_dict
    }

    pub fn num_classes(&self) -> usize {
        self.label_dict.len()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }
}

fn train_member(data: &FeatureMatrix, params: &ForestParams, index: usize) -> Result<(DecisionTree, ConfusionMatrix)> {
    let mut rng = tree_rng(params.seed, index);
    let (bag, oob) = bootstrap_sample(data.n_rows(), &mut rng);
    let tree = train_tree(data, &bag, &params.tree, &mut rng)?;
    let mut matrix = ConfusionMatrix::new(data.n_classes());
    for &row in &oob {
        let row = row as usize;
        let predicted = tree.predict_by(|f| data.value(row, f));
        matrix.add(data.labels()[row], predicted);
    }
    if oob.is_empty() {
        log::warn!("tree {index} has an empty out-of-bag set; its evidence is uniform");
    }
    Ok((tree, matrix))
}

/// Trains `params.num_trees` bagged trees and their OOB confusion matrices.
///
/// Tree `t` draws from its own stream [`tree_rng`]`(seed, t)`, so the
/// model is identical for every execution mode and thread count.
pub fn train_forest(ds: &Dataset, params: &ForestParams, exec: Execution) -> Result<ForestModel> {
    if params.num_trees == 0 {
        return Err(Error::InvalidArgument("need at least one tree".to_string()));
    }
    if ds.num_classes() < 2 {
        return Err(Error::InvalidArgument(
            "training needs at least two classes".to_string(),
        ));
    }
    let priors = class_priors(ds)?;
    params.tree.validate(ds.num_features())?;
    let data = FeatureMatrix::from_dataset(ds);
    let members = exec.map_indices(params.num_trees, |t| train_member(&data, params, t));
    let (trees, oob): (Vec<_>, Vec<_>) = members.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    ForestModel::from_parts(
        trees,
        oob,
        priors,
        ds.label_dict().clone(),
        ds.num_features(),
        *params,
    )
}
