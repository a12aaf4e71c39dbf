//! Unpruned CART classification trees.
//!
//! Splits are axis-aligned thresholds chosen by weighted Gini impurity over a
//! random subset of features drawn afresh at every node. A sample goes left
//! when its value is `<= threshold`; absent sparse values read as `0.0`.

use rand::Rng;

use crate::data::{ClassId, Dataset, SampleVector};
use crate::error::{Error, Result};

/// Number of features examined at each node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSubset {
    /// `floor(sqrt(M))`, at least one.
    Sqrt,
    Count(usize),
}

impl FeatureSubset {
    pub fn resolve(self, num_features: usize) -> usize {
        let n = match self {
            FeatureSubset::Sqrt => (num_features as f64).sqrt().floor() as usize,
            FeatureSubset::Count(n) => n,
        };
        n.clamp(1, num_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    pub min_samples_split: usize,
    pub features_per_node: FeatureSubset,
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_samples_split: 2,
            features_per_node: FeatureSubset::Sqrt,
            max_depth: None,
        }
    }
}

impl TreeParams {
    pub fn validate(&self, num_features: usize) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::InvalidArgument(
                "min_samples_split must be at least 2".to_string(),
            ));
        }
        if let FeatureSubset::Count(n) = self.features_per_node {
            if n == 0 || n > num_features {
                return Err(Error::InvalidArgument(format!(
                    "features per node {n} outside [1, {num_features}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    /// Left child is the next node in preorder; `right` is an absolute index.
    Split {
        feature: u32,
        threshold: f64,
        right: u32,
    },
    Leaf { class: ClassId },
}

/// A tree stored as a preorder node list.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn leaf(class: ClassId) -> Self {
        DecisionTree {
            nodes: vec![Node::Leaf { class }],
        }
    }

    /// Validates a preorder node list: every split's right child starts
    /// exactly where its left subtree ends and every node is reachable.
    pub fn from_nodes(nodes: Vec<Node>, num_features: usize, num_classes: usize) -> Result<Self> {
        let mut pending: Vec<usize> = Vec::new();
        let mut pos = 0usize;
        loop {
            let node = nodes
                .get(pos)
                .ok_or_else(|| Error::Invariant(format!("tree truncated at node {pos}")))?;
            pos += 1;
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    right,
                } => {
                    if feature == 0 || feature as usize > num_features {
                        return Err(Error::Invariant(format!(
                            "split feature {feature} outside [1, {num_features}]"
                        )));
                    }
                    if threshold.is_nan() {
                        return Err(Error::Invariant("NaN split threshold".to_string()));
                    }
                    if (right as usize) <= pos {
                        return Err(Error::Invariant(format!(
                            "node {} points right to {right}",
                            pos - 1
                        )));
                    }
                    pending.push(right as usize);
                }
                Node::Leaf { class } => {
                    if class >= num_classes {
                        return Err(Error::Invariant(format!(
                            "leaf class {class} outside {num_classes} classes"
                        )));
                    }
                    match pending.pop() {
                        None => break,
                        Some(right) if right == pos => {}
                        Some(right) => {
                            return Err(Error::Invariant(format!(
                                "right child {right} does not follow left subtree ending at {pos}"
                            )))
                        }
                    }
                }
            }
        }
        if pos != nodes.len() {
            return Err(Error::Invariant(format!(
                "{} unreachable trailing nodes",
                nodes.len() - pos
            )));
        }
        Ok(DecisionTree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match self.nodes[i] {
                Node::Split { right, .. } => {
                    stack.push((i + 1, d + 1));
                    stack.push((right as usize, d + 1));
                }
                Node::Leaf { .. } => max = max.max(d),
            }
        }
        max
    }

    /// Routes through the tree reading feature values from `value(feature)`.
    #[inline]
    pub fn predict_by<F: Fn(u32) -> f64>(&self, value: F) -> ClassId {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    right,
                } => {
                    i = if value(feature) <= threshold {
                        i + 1
                    } else {
                        right as usize
                    };
                }
                Node::Leaf { class } => return class,
            }
        }
    }

    pub fn predict(&self, x: &SampleVector) -> ClassId {
        self.predict_by(|f| x.get(f))
    }

    /// `dense[f]` holds feature `f`; features beyond the slice read as zero.
    pub fn predict_dense(&self, dense: &[f64]) -> ClassId {
        self.predict_by(|f| dense.get(f as usize).copied().unwrap_or(0.0))
    }
}

/// Column-major dense copy of a dataset's features, built once per forest.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_features: usize,
    values: Vec<f64>,
    labels: Vec<ClassId>,
    n_classes: usize,
}

impl FeatureMatrix {
    pub fn from_dataset(ds: &Dataset) -> Self {
        let n_rows = ds.len();
        let n_features = ds.num_features();
        let mut values = vec![0.0; n_rows * n_features];
        for (row, sample) in ds.samples().iter().enumerate() {
            for &(idx, v) in sample.entries() {
                values[(idx as usize - 1) * n_rows + row] = v;
            }
        }
        FeatureMatrix {
            n_rows,
            n_features,
            values,
            labels: ds.labels().to_vec(),
            n_classes: ds.num_classes(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    /// Values of 1-based `feature` for every row.
    #[inline]
    pub fn column(&self, feature: u32) -> &[f64] {
        let start = (feature as usize - 1) * self.n_rows;
        &self.values[start..start + self.n_rows]
    }

    #[inline]
    pub fn value(&self, row: usize, feature: u32) -> f64 {
        self.values[(feature as usize - 1) * self.n_rows + row]
    }
}

/// Gini impurity `1 - sum p^2` of a class histogram.
pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn plurality(counts: &[usize]) -> ClassId {
    // first maximum, i.e. lowest class id on ties
    let mut best = 0;
    for (class, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = class;
        }
    }
    best
}

fn sum_sq(counts: &[usize]) -> f64 {
    counts.iter().map(|&c| (c * c) as f64).sum()
}

struct Candidate {
    feature: u32,
    threshold: f64,
    /// `sum_l c^2 / n_l + sum_r c^2 / n_r`; larger means lower weighted Gini.
    purity: f64,
}

struct Task {
    lo: usize,
    hi: usize,
    depth: usize,
    /// Split node whose `right` must point at this task's node.
    patch: Option<usize>,
}

/// Scratch buffers reused across nodes of one tree.
struct Grower<'a, R> {
    data: &'a FeatureMatrix,
    params: TreeParams,
    mtry: usize,
    rng: &'a mut R,
    rows: Vec<u32>,
    features: Vec<u32>,
    pairs: Vec<(f64, u32)>,
    left: Vec<usize>,
    right: Vec<usize>,
}

impl<R: Rng> Grower<'_, R> {
    fn counts(&self, lo: usize, hi: usize) -> Vec<usize> {
        let mut counts = vec![0usize; self.data.n_classes()];
        for &r in &self.rows[lo..hi] {
            counts[self.data.labels()[r as usize]] += 1;
        }
        counts
    }

    /// Best threshold on `feature` for rows `lo..hi`, or `None` if the feature is constant there.
    fn scan_feature(&mut self, feature: u32, lo: usize, hi: usize, node: &[usize]) -> Option<Candidate> {
        let column = self.data.column(feature);
        let labels = self.data.labels();
        self.pairs.clear();
        self.pairs.extend(
            self.rows[lo..hi]
                .iter()
                .map(|&r| (column[r as usize], labels[r as usize] as u32)),
        );
        self.pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let n = self.pairs.len();
        if self.pairs[0].0 == self.pairs[n - 1].0 {
            return None;
        }
        self.left.iter_mut().for_each(|c| *c = 0);
        self.right.copy_from_slice(node);
        let mut left_sq = 0.0f64;
        let mut right_sq = sum_sq(node);
        let mut best: Option<Candidate> = None;
        for i in 0..n - 1 {
            let (v, y) = self.pairs[i];
            let y = y as usize;
            left_sq += (2 * self.left[y] + 1) as f64;
            right_sq -= (2 * self.right[y] - 1) as f64;
            self.left[y] += 1;
            self.right[y] -= 1;
            let next = self.pairs[i + 1].0;
            if v == next {
                continue;
            }
            let n_left = (i + 1) as f64;
            let purity = left_sq / n_left + right_sq / (n as f64 - n_left);
            if best.as_ref().is_none_or(|b| purity > b.purity) {
                let mut threshold = v + (next - v) / 2.0;
                if !(threshold >= v && threshold < next) {
                    threshold = v;
                }
                best = Some(Candidate {
                    feature,
                    threshold,
                    purity,
                });
            }
        }
        best
    }

    fn best_split(&mut self, lo: usize, hi: usize, node: &[usize]) -> Option<Candidate> {
        // Draw features without replacement (lazy Fisher-Yates) until `mtry`
        // non-constant ones have been scanned or every feature has been tried.
        let m = self.features.len();
        let mut scanned = 0;
        let mut best: Option<Candidate> = None;
        for i in 0..m {
            if scanned == self.mtry {
                break;
            }
            let j = self.rng.gen_range(i..m);
            self.features.swap(i, j);
            let feature = self.features[i];
            if let Some(c) = self.scan_feature(feature, lo, hi, node) {
                scanned += 1;
                if best.as_ref().is_none_or(|b| c.purity > b.purity) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn grow(mut self) -> DecisionTree {
        let mut nodes: Vec<Node> = Vec::new();
        let mut stack = vec![Task {
            lo: 0,
            hi: self.rows.len(),
            depth: 0,
            patch: None,
        }];
        while let Some(task) = stack.pop() {
            let here = nodes.len();
            if let Some(parent) = task.patch {
                if let Node::Split { right, .. } = &mut nodes[parent] {
                    *right = here as u32;
                }
            }
            let counts = self.counts(task.lo, task.hi);
            let n = task.hi - task.lo;
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_capped = self.params.max_depth.is_some_and(|d| task.depth >= d);
            let split = if pure || n < self.params.min_samples_split || depth_capped {
                None
            } else {
                self.best_split(task.lo, task.hi, &counts)
            };
            let Some(split) = split else {
                nodes.push(Node::Leaf {
                    class: plurality(&counts),
                });
                continue;
            };
            let column = self.data.column(split.feature);
            let mid = partition(&mut self.rows[task.lo..task.hi], |r| {
                column[r as usize] <= split.threshold
            }) + task.lo;
            debug_assert!(mid > task.lo && mid < task.hi);
            nodes.push(Node::Split {
                feature: split.feature,
                threshold: split.threshold,
                right: 0,
            });
            stack.push(Task {
                lo: mid,
                hi: task.hi,
                depth: task.depth + 1,
                patch: Some(here),
            });
            stack.push(Task {
                lo: task.lo,
                hi: mid,
                depth: task.depth + 1,
                patch: None,
            });
        }
        DecisionTree { nodes }
    }
}

/// Stable-enough in-place partition; returns the count of elements satisfying `pred`.
fn partition(rows: &mut [u32], pred: impl Fn(u32) -> bool) -> usize {
    let mut first_false = 0;
    for i in 0..rows.len() {
        if pred(rows[i]) {
            rows.swap(first_false, i);
            first_false += 1;
        }
    }
    first_false
}

/// Grows a tree on `rows` of `data` (duplicates allowed, as in a bootstrap bag).
pub fn train_tree<R: Rng>(
    data: &FeatureMatrix,
    rows: &[u32],
    params: &TreeParams,
    rng: &mut R,
) -> Result<DecisionTree> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no rows to train on".to_string()));
    }
    params.validate(data.n_features())?;
    if let Some(&r) = rows.iter().find(|&&r| r as usize >= data.n_rows()) {
        return Err(Error::InvalidArgument(format!("row {r} out of range")));
    }
    let k = data.n_classes();
    let grower = Grower {
        data,
        params: *params,
        mtry: params.features_per_node.resolve(data.n_features()),
        rng,
        rows: rows.to_vec(),
        features: (1..=data.n_features() as u32).collect(),
        pairs: Vec::with_capacity(rows.len()),
        left: vec![0; k],
        right: vec![0; k],
    };
    Ok(grower.grow())
}
