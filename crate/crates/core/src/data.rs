//! Datasets, label dictionaries and class priors.
//!
//! Samples are stored sparsely with 1-based feature indices, as they come
//! out of LibSVM files. An absent index means the value `0.0`.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};

/// Index into a [`LabelDict`], `0..K`.
pub type ClassId = usize;

/// Sparse feature vector with strictly ascending 1-based indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleVector {
    entries: Vec<(u32, f64)>,
}

impl SampleVector {
    pub fn new(entries: Vec<(u32, f64)>) -> Result<Self> {
        for (pos, &(idx, _)) in entries.iter().enumerate() {
            if idx == 0 {
                return Err(Error::InvalidArgument(
                    "feature indices are 1-based".to_string(),
                ));
            }
            if pos > 0 && entries[pos - 1].0 >= idx {
                return Err(Error::InvalidArgument(format!(
                    "feature index {idx} is not strictly ascending"
                )));
            }
        }
        Ok(SampleVector { entries })
    }

    /// Builds a sample from dense values; `values[0]` is feature 1. Zeros are dropped.
    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, &v)| (i as u32 + 1, v))
            .collect();
        SampleVector { entries }
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn max_index(&self) -> u32 {
        self.entries.last().map_or(0, |e| e.0)
    }

    /// Value of 1-based feature `index`, zero when absent.
    pub fn get(&self, index: u32) -> f64 {
        match self.entries.binary_search_by_key(&index, |e| e.0) {
            Ok(pos) => self.entries[pos].1,
            Err(_) => 0.0,
        }
    }

    /// Writes the sample into `dense` (slot `i` holds feature `i`, slot 0 unused).
    /// Indices beyond the buffer are ignored.
    pub fn scatter_into(&self, dense: &mut [f64]) {
        dense.fill(0.0);
        for &(idx, v) in &self.entries {
            if let Some(slot) = dense.get_mut(idx as usize) {
                *slot = v;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ClassEntry {
    name: String,
    originals: Vec<String>,
}

/// Maps original label strings onto dense class ids.
///
/// Every class has a display name and the list of original labels folded
/// into it. Before any merge each class holds exactly one original label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelDict {
    classes: Vec<ClassEntry>,
    lookup: BTreeMap<String, ClassId>,
}

fn numeric_label(token: &str) -> Result<f64> {
    match token.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::NonNumericLabel(token.to_string())),
    }
}

fn cmp_numeric(a: &(f64, &str), b: &(f64, &str)) -> Ordering {
    a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1))
}

impl LabelDict {
    /// Assigns class ids in ascending numeric order of the distinct labels.
    pub fn from_labels<S: AsRef<str>>(raw: &[S]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidArgument("no labels".to_string()));
        }
        let mut distinct: BTreeMap<&str, f64> = BTreeMap::new();
        for token in raw {
            let token = token.as_ref();
            if !distinct.contains_key(token) {
                distinct.insert(token, numeric_label(token)?);
            }
        }
        let mut ordered: Vec<(f64, &str)> = distinct.into_iter().map(|(s, v)| (v, s)).collect();
        ordered.sort_by(cmp_numeric);
        Ok(Self::from_classes(
            ordered
                .into_iter()
                .map(|(_, s)| ClassEntry {
                    name: s.to_string(),
                    originals: vec![s.to_string()],
                })
                .collect(),
        ))
    }

    fn from_classes(classes: Vec<ClassEntry>) -> Self {
        let mut lookup = BTreeMap::new();
        for (id, class) in classes.iter().enumerate() {
            for orig in &class.originals {
                lookup.insert(orig.clone(), id);
            }
        }
        LabelDict { classes, lookup }
    }

    /// Rebuilds a dictionary from `(name, originals)` pairs, e.g. when loading a model.
    pub fn from_parts(parts: Vec<(String, Vec<String>)>) -> Result<Self> {
        let classes: Vec<ClassEntry> = parts
            .into_iter()
            .map(|(name, originals)| ClassEntry { name, originals })
            .collect();
        let total: usize = classes.iter().map(|c| c.originals.len()).sum();
        if classes.iter().any(|c| c.originals.is_empty()) {
            return Err(Error::InvalidArgument(
                "class without original labels".to_string(),
            ));
        }
        let dict = Self::from_classes(classes);
        if dict.lookup.len() != total {
            return Err(Error::InvalidArgument(
                "original label assigned to more than one class".to_string(),
            ));
        }
        Ok(dict)
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_of(&self, original: &str) -> Option<ClassId> {
        self.lookup.get(original).copied()
    }

    pub fn name(&self, class: ClassId) -> &str {
        &self.classes[class].name
    }

    pub fn originals(&self, class: ClassId) -> &[String] {
        &self.classes[class].originals
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.classes.iter().map(|c| c.name.as_str())
    }

    /// Folds the `K - final_count + 1` lowest classes into class 0.
    ///
    /// Returns the merged dictionary and the old-id to new-id mapping.
    pub fn merge_bottom(&self, final_count: usize) -> Result<(LabelDict, Vec<ClassId>)> {
        let k = self.len();
        if final_count < 2 || final_count > k {
            return Err(Error::InvalidArgument(format!(
                "final class count {final_count} must lie in [2, {k}]"
            )));
        }
        let merged = k - final_count + 1;
        let mut classes = Vec::with_capacity(final_count);
        let bottom = &self.classes[..merged];
        classes.push(if merged == 1 {
            bottom[0].clone()
        } else {
            ClassEntry {
                name: bottom
                    .iter()
                    .map(|c| c.name.as_str())
                    .collect::<Vec<_>>()
                    .join("+"),
                originals: bottom.iter().flat_map(|c| c.originals.clone()).collect(),
            }
        });
        classes.extend(self.classes[merged..].iter().cloned());
        let mapping = (0..k).map(|old| old.saturating_sub(merged - 1)).collect();
        Ok((Self::from_classes(classes), mapping))
    }
}

/// Samples, labels and the dictionary that names them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<SampleVector>,
    labels: Vec<ClassId>,
    num_features: usize,
    dict: LabelDict,
}

impl Dataset {
    pub fn new(
        samples: Vec<SampleVector>,
        labels: Vec<ClassId>,
        num_features: usize,
        dict: LabelDict,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("dataset has no samples".to_string()));
        }
        if samples.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        if num_features == 0 {
            return Err(Error::InvalidArgument(
                "dataset must have at least one feature".to_string(),
            ));
        }
        if let Some(s) = samples.iter().find(|s| s.max_index() as usize > num_features) {
            return Err(Error::InvalidArgument(format!(
                "feature index {} exceeds feature count {num_features}",
                s.max_index()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= dict.len()) {
            return Err(Error::InvalidArgument(format!(
                "class id {bad} outside dictionary of {} classes",
                dict.len()
            )));
        }
        Ok(Dataset {
            samples,
            labels,
            num_features,
            dict,
        })
    }

    /// Builds the dictionary from raw label strings, then the dataset.
    pub fn from_raw_labels<S: AsRef<str>>(
        samples: Vec<SampleVector>,
        raw_labels: &[S],
        num_features: usize,
    ) -> Result<Self> {
        let dict = LabelDict::from_labels(raw_labels)?;
        let labels = raw_labels
            .iter()
            .map(|l| dict.class_of(l.as_ref()).expect("label was just inserted"))
            .collect();
        Dataset::new(samples, labels, num_features, dict)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[SampleVector] {
        &self.samples
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn num_classes(&self) -> usize {
        self.dict.len()
    }

    pub fn label_dict(&self) -> &LabelDict {
        &self.dict
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Merges the bottom classes so that `final_count` classes remain.
    /// The merged majority class becomes class 0.
    pub fn merge_bottom_classes(&self, final_count: usize) -> Result<Dataset> {
        let (dict, mapping) = self.dict.merge_bottom(final_count)?;
        Ok(Dataset {
            samples: self.samples.clone(),
            labels: self.labels.iter().map(|&l| mapping[l]).collect(),
            num_features: self.num_features,
            dict,
        })
    }

    /// Re-expresses the labels in `target`'s class ids (e.g. a test split
    /// against the training dictionary). Every original label must be known
    /// to `target`.
    pub fn align_to(&self, target: &LabelDict) -> Result<Dataset> {
        let mut mapping = Vec::with_capacity(self.num_classes());
        for class in 0..self.num_classes() {
            let mut ids = self.dict.originals(class).iter().map(|orig| {
                target.class_of(orig).ok_or_else(|| {
                    Error::Config(format!("label {orig:?} is unknown to the model"))
                })
            });
            let first = ids.next().expect("class has originals")?;
            for id in ids {
                if id? != first {
                    return Err(Error::Config(format!(
                        "class {:?} spans several target classes",
                        self.dict.name(class)
                    )));
                }
            }
            mapping.push(first);
        }
        Ok(Dataset {
            samples: self.samples.clone(),
            labels: self.labels.iter().map(|&l| mapping[l]).collect(),
            num_features: self.num_features,
            dict: target.clone(),
        })
    }
}

/// Training-set class prevalences.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPriors(Vec<f64>);

impl ClassPriors {
    /// Wraps probabilities that are each in `(0, 1]` and sum to one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::Invariant(
                "priors must lie in (0, 1]".to_string(),
            ));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Invariant(format!("priors sum to {sum}, not 1")));
        }
        Ok(ClassPriors(probs))
    }

    pub fn uniform(k: usize) -> Self {
        ClassPriors(vec![1.0 / k as f64; k])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    /// The most prevalent class (lowest id on ties); the negative class in evaluation.
    pub fn majority(&self) -> ClassId {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Class prevalences of `ds`. Fails when a dictionary class has no samples.
pub fn class_priors(ds: &Dataset) -> Result<ClassPriors> {
    let counts = ds.class_counts();
    if let Some(class) = counts.iter().position(|&c| c == 0) {
        return Err(Error::DegenerateClass {
            class,
            label: ds.label_dict().name(class).to_string(),
        });
    }
    let n = ds.len() as f64;
    Ok(ClassPriors(counts.iter().map(|&c| c as f64 / n).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dict_ids(dict: &LabelDict) -> Vec<(String, ClassId)> {
        dict.lookup.iter().map(|(k, v)| (k.clone(), *v)).collect()
    }

    fn toy(labels: &[&str]) -> Dataset {
        let samples = labels
            .iter()
            .enumerate()
            .map(|(i, _)| SampleVector::from_dense(&[i as f64, 1.0]))
            .collect();
        Dataset::from_raw_labels(samples, labels, 2).unwrap()
    }

    #[test]
    fn label_dict_orders_numerically() {
        let d = LabelDict::from_labels(&["2", "1", "2", "3"]).unwrap();
        assert_eq!(
            dict_ids(&d),
            vec![("1".into(), 0), ("2".into(), 1), ("3".into(), 2)]
        );
        let d = LabelDict::from_labels(&["-1", "1"]).unwrap();
        assert_eq!(d.class_of("-1"), Some(0));
        assert_eq!(d.class_of("1"), Some(1));
        let d = LabelDict::from_labels(&["7"]).unwrap();
        assert_eq!(dict_ids(&d), vec![("7".into(), 0)]);
        // numeric, not lexical
        let d = LabelDict::from_labels(&["10", "9"]).unwrap();
        assert_eq!(d.class_of("9"), Some(0));
    }

    #[test]
    fn label_dict_rejects_non_numeric() {
        match LabelDict::from_labels(&["1", "cat"]) {
            Err(Error::NonNumericLabel(tok)) => assert_eq!(tok, "cat"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(LabelDict::from_labels::<&str>(&[]).is_err());
    }

    #[test]
    fn priors_count_prevalence() {
        let ds = toy(&["0", "0", "0", "1"]);
        assert_eq!(class_priors(&ds).unwrap().probs(), &[0.75, 0.25]);
        assert_eq!(class_priors(&ds).unwrap().majority(), 0);
        let ds = toy(&["0", "1", "1"]);
        assert_eq!(class_priors(&ds).unwrap().majority(), 1);
        let ds = toy(&["0", "1"]);
        assert_eq!(class_priors(&ds).unwrap().probs(), &[0.5, 0.5]);
    }

    #[test]
    fn priors_reject_unobserved_class() {
        let dict = LabelDict::from_labels(&["1", "2"]).unwrap();
        let ds = Dataset::new(vec![SampleVector::default()], vec![0], 1, dict).unwrap();
        assert!(matches!(
            class_priors(&ds),
            Err(Error::DegenerateClass { class: 1, .. })
        ));
    }

    #[test]
    fn merge_bottom_two_of_four() {
        let ds = toy(&["4", "1", "3", "2", "1"]);
        let merged = ds.merge_bottom_classes(3).unwrap();
        let dict = merged.label_dict();
        assert_eq!(dict.len(), 3);
        assert_eq!(dict.class_of("1"), Some(0));
        assert_eq!(dict.class_of("2"), Some(0));
        assert_eq!(dict.class_of("3"), Some(1));
        assert_eq!(dict.class_of("4"), Some(2));
        assert_eq!(dict.name(0), "1+2");
        assert_eq!(merged.labels(), &[2, 0, 1, 0, 0]);
        assert_eq!(merged.samples(), ds.samples());
    }

    #[test]
    fn merge_is_identity_at_full_count() {
        let ds = toy(&["1", "2", "3"]);
        assert_eq!(ds.merge_bottom_classes(3).unwrap(), ds);
    }

    #[test]
    fn merge_rejects_bad_counts() {
        let ds = toy(&["1", "2", "3"]);
        assert!(matches!(ds.merge_bottom_classes(4), Err(Error::InvalidArgument(_))));
        assert!(ds.merge_bottom_classes(1).is_err());
    }

    #[test]
    fn align_test_split_to_merged_train_dict() {
        let train = toy(&["1", "2", "3", "4"]).merge_bottom_classes(3).unwrap();
        let test = toy(&["2", "4"]);
        let aligned = test.align_to(train.label_dict()).unwrap();
        assert_eq!(aligned.labels(), &[0, 2]);
        let unknown = toy(&["5"]);
        assert!(matches!(
            unknown.align_to(train.label_dict()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn sample_vector_validation_and_lookup() {
        assert!(SampleVector::new(vec![(2, 1.0), (2, 3.0)]).is_err());
        assert!(SampleVector::new(vec![(0, 1.0)]).is_err());
        let s = SampleVector::new(vec![(1, 0.5), (3, 2.0)]).unwrap();
        assert_eq!(s.get(1), 0.5);
        assert_eq!(s.get(2), 0.0);
        assert_eq!(s.max_index(), 3);
        let mut dense = vec![9.0; 3];
        s.scatter_into(&mut dense);
        assert_eq!(dense, vec![0.0, 0.5, 0.0]);
    }

    #[test]
    fn dataset_checks_feature_bound() {
        let dict = LabelDict::from_labels(&["1"]).unwrap();
        let s = SampleVector::new(vec![(5, 1.0)]).unwrap();
        assert!(Dataset::new(vec![s], vec![0], 4, dict).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn dict_is_order_independent(mut labels in prop::collection::vec(-20i32..20, 1..40), seed in any::<u64>()) {
                let a: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
                // deterministic shuffle
                let n = labels.len();
                let mut s = seed;
                for i in (1..n).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    labels.swap(i, (s >> 33) as usize % (i + 1));
                }
                let b: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
                prop_assert_eq!(LabelDict::from_labels(&a).unwrap(), LabelDict::from_labels(&b).unwrap());
            }

            #[test]
            fn priors_sum_to_one(labels in prop::collection::vec(0u8..6, 1..200)) {
                let raw: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
                let samples = vec![SampleVector::default(); raw.len()];
                let ds = Dataset::from_raw_labels(samples, &raw, 1).unwrap();
                let p = class_priors(&ds).unwrap();
                prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }

            #[test]
            fn merge_preserves_samples(labels in prop::collection::vec(1u8..8, 2..60), keep in 2usize..8) {
                let raw: Vec<String> = labels.iter().map(|l| l.to_string()).collect();
                let samples: Vec<SampleVector> = (0..raw.len()).map(|i| SampleVector::from_dense(&[i as f64])).collect();
                let ds = Dataset::from_raw_labels(samples, &raw, 1).unwrap();
                prop_assume!(keep <= ds.num_classes());
                let merged = ds.merge_bottom_classes(keep).unwrap();
                prop_assert_eq!(merged.len(), ds.len());
                prop_assert_eq!(merged.samples(), ds.samples());
                prop_assert_eq!(merged.num_classes(), keep);
                prop_assert_eq!(merged.merge_bottom_classes(keep).unwrap(), merged.clone());
            }
        }
    }
}
