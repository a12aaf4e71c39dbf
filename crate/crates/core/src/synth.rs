//! Seeded synthetic datasets: Gaussian blobs with chosen class sizes.
//!
//! Used by tests and benchmarks where the public LibSVM datasets are not
//! at hand.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::{Dataset, SampleVector};

#[derive(Debug, Clone)]
pub struct BlobSpec {
    /// Samples per class; class `i` gets the label `i + 1`.
    pub class_sizes: Vec<usize>,
    pub num_features: usize,
    /// Scale of the class centroids relative to unit within-class noise.
    pub separation: f64,
}

/// Draws one isotropic Gaussian blob per class around a random centroid.
/// Samples are interleaved by a seeded shuffle.
pub fn blobs(spec: &BlobSpec, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centroids: Vec<Vec<f64>> = spec
        .class_sizes
        .iter()
        .map(|_| {
            (0..spec.num_features)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * spec.separation
                })
                .collect()
        })
        .collect();
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (class, &size) in spec.class_sizes.iter().enumerate() {
        for _ in 0..size {
            let x = centroids[class]
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + z
                })
                .collect();
            rows.push((class, x));
        }
    }
    use rand::seq::SliceRandom;
    rows.shuffle(&mut rng);
    let labels: Vec<String> = rows.iter().map(|r| (r.0 + 1).to_string()).collect();
    let samples = rows.iter().map(|r| SampleVector::from_dense(&r.1)).collect();
    Dataset::from_raw_labels(samples, &labels, spec.num_features)
        .expect("blob spec yields a valid dataset")
}

/// Train and test sets from the same blobs: `test_sizes[i]` samples of class
/// `i` are held out, the rest of `spec.class_sizes[i]` is for training.
pub fn blobs_split(spec: &BlobSpec, test_sizes: &[usize], seed: u64) -> (Dataset, Dataset) {
    assert_eq!(spec.class_sizes.len(), test_sizes.len());
    let whole = BlobSpec {
        class_sizes: spec.class_sizes.iter().zip(test_sizes).map(|(a, b)| a + b).collect(),
        ..spec.clone()
    };
    let all = blobs(&whole, seed);
    let mut held = test_sizes.to_vec();
    let (mut train, mut test) = ((Vec::new(), Vec::new()), (Vec::new(), Vec::new()));
    for (x, &y) in all.samples().iter().zip(all.labels()) {
        let side = if held[y] > 0 {
            held[y] -= 1;
            &mut test
        } else {
            &mut train
        };
        side.0.push(x.clone());
        side.1.push(y);
    }
    let make = |(samples, labels): (Vec<SampleVector>, Vec<usize>)| {
        Dataset::new(samples, labels, spec.num_features, all.label_dict().clone())
            .expect("non-empty split")
    };
    (make(train), make(test))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_and_determinism() {
        let spec = BlobSpec {
            class_sizes: vec![10, 5, 2],
            num_features: 3,
            separation: 1.0,
        };
        let a = blobs(&spec, 1);
        assert_eq!(a.class_counts(), vec![10, 5, 2]);
        assert_eq!(a.num_features(), 3);
        assert_eq!(a, blobs(&spec, 1));
        assert_ne!(a, blobs(&spec, 2));
    }

    #[test]
    fn split_sizes() {
        let spec = BlobSpec {
            class_sizes: vec![10, 5, 2],
            num_features: 2,
            separation: 1.0,
        };
        let (train, test) = blobs_split(&spec, &[4, 2, 1], 3);
        assert_eq!(train.class_counts(), vec![10, 5, 2]);
        assert_eq!(test.class_counts(), vec![4, 2, 1]);
        assert_eq!(train.label_dict(), test.label_dict());
    }
}
