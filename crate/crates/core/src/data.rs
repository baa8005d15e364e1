//! Datasets: normalization, seeded splitting, and a synthetic generator with
//! a Madelon-style feature-importance structure.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureRole {
    Informative,
    Redundant,
    Noise,
}

impl FeatureRole {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Informative => "informative",
            Self::Redundant => "redundant",
            Self::Noise => "noise",
        }
    }

    /// Whether the feature carries information about the label.
    pub fn is_relevant(self) -> bool {
        !matches!(self, Self::Noise)
    }
}

/// Ground truth for generated data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMetadata {
    /// Role of each output column.
    pub roles: Vec<FeatureRole>,
    /// Generator-order index of each output column: informative features
    /// first, then redundant, then noise.
    pub permutation: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    ZScore,
    MinMax,
    None,
}

impl core::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zscore" => Ok(Self::ZScore),
            "minmax" => Ok(Self::MinMax),
            "none" => Ok(Self::None),
            _ => Err(Error::InvalidConfig(format!(
                "unknown normalization {s:?}; expected zscore, minmax or none"
            ))),
        }
    }
}

/// Row-major feature matrix with one class label per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<usize>,
    n_classes: usize,
    metadata: Option<FeatureMetadata>,
}

impl Dataset {
    /// `n_classes` is inferred as `max(label) + 1`.
    pub fn new(features: Vec<f64>, n_features: usize, labels: Vec<usize>) -> Result<Self> {
        let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
        Self::with_classes(features, n_features, labels, n_classes)
    }

    pub fn with_classes(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::InvalidDataset("no feature columns".into()));
        }
        if features.len() != labels.len() * n_features {
            return Err(Error::DimensionMismatch {
                what: "feature matrix",
                expected: labels.len() * n_features,
                found: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= n_classes) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(Self {
            features,
            n_features,
            labels,
            n_classes,
            metadata: None,
        })
    }

    pub fn with_metadata(mut self, metadata: FeatureMetadata) -> Result<Self> {
        if metadata.roles.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                what: "feature roles",
                expected: self.n_features,
                found: metadata.roles.len(),
            });
        }
        self.metadata = Some(metadata);
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn metadata(&self) -> Option<&FeatureMetadata> {
        self.metadata.as_ref()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn samples(&self) -> Vec<&[f64]> {
        self.features.chunks_exact(self.n_features).collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_samples()).map(|i| self.features[i * self.n_features + j]).collect()
    }

    /// Normalizes every column in place with statistics of this dataset.
    /// Constant columns become 0 under both z-score and min-max.
    pub fn normalize(&mut self, scheme: Normalization) -> Result<()> {
        let n = self.n_samples();
        if n == 0 || scheme == Normalization::None {
            return self.check_finite();
        }
        let d = self.n_features;
        for j in 0..d {
            let col = self.column(j);
            let (shift, scale) = match scheme {
                Normalization::ZScore => {
                    let mean = col.iter().sum::<f64>() / n as f64;
                    let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
                    (mean, libm::sqrt(var))
                }
                Normalization::MinMax => {
                    let min = col.iter().copied().fold(f64::INFINITY, f64::min);
                    let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (min, max - min)
                }
                Normalization::None => unreachable!(),
            };
            for i in 0..n {
                let x = &mut self.features[i * d + j];
                *x = if scale > 0.0 { (*x - shift) / scale } else { 0.0 };
            }
        }
        self.check_finite()
    }

    fn check_finite(&self) -> Result<()> {
        if let Some(pos) = self.features.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value at row {}, column {}",
                pos / self.n_features,
                pos % self.n_features
            )));
        }
        Ok(())
    }

    /// Subset of rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        for &r in rows {
            features.extend_from_slice(self.sample(r));
        }
        Dataset {
            features,
            n_features: self.n_features,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            n_classes: self.n_classes,
            metadata: self.metadata.clone(),
        }
    }

    /// Copy with the given columns replaced by `value`.
    pub fn with_columns_set(&self, columns: &[usize], value: f64) -> Dataset {
        let mut out = self.clone();
        for i in 0..out.n_samples() {
            let row = &mut out.features[i * self.n_features..(i + 1) * self.n_features];
            for &j in columns {
                row[j] = value;
            }
        }
        out
    }

    /// Seeded random split with exactly `n_test` test samples.
    pub fn split_counts(&self, n_test: usize, seed: u64) -> Result<(Dataset, Dataset)> {
        let n = self.n_samples();
        if n_test == 0 || n_test >= n {
            return Err(Error::InvalidSplit(format!(
                "{n_test} test samples out of {n} leaves an empty split"
            )));
        }
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (test, train) = idx.split_at(n_test);
        let mut train = train.to_vec();
        let mut test = test.to_vec();
        train.sort_unstable();
        test.sort_unstable();
        Ok((self.select(&train), self.select(&test)))
    }

    /// Seeded random split; the test set gets `round(n · test_fraction)`
    /// samples.
    pub fn split(&self, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::InvalidSplit(format!(
                "test fraction must lie in (0, 1), got {test_fraction}"
            )));
        }
        let n_test = libm::round(self.n_samples() as f64 * test_fraction) as usize;
        self.split_counts(n_test, seed)
    }

    /// Fraction of samples per class.
    pub fn class_priors(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        let n = self.n_samples().max(1) as f64;
        counts.into_iter().map(|c| c as f64 / n).collect()
    }
}

pub const MADELON_INFORMATIVE: usize = 5;
pub const MADELON_REDUNDANT: usize = 15;
pub const MADELON_NOISE: usize = 480;
pub const MADELON_FEATURES: usize = MADELON_INFORMATIVE + MADELON_REDUNDANT + MADELON_NOISE;
/// Default sample count of the generated preset (2000 train + 600 test).
pub const MADELON_SAMPLES: usize = 2600;
pub const MADELON_TEST_SAMPLES: usize = 600;

// Cluster centres sit at (±CLUSTER_SEPARATION, ...) in the informative space.
const CLUSTER_SEPARATION: f64 = 2.0;
// Vertex label pairs exchanged across a random hyperplane split.
const LABEL_SWAPS: usize = 4;
// Relative scale of the perturbation added to redundant features.
const REDUNDANT_JITTER: f64 = 0.01;

/// Generates a two-class, 500-feature dataset shaped like Madelon.
///
/// The five informative features come from 32 Gaussian clusters, one per
/// vertex of a 5-cube, each with its own random linear covariance
/// transform. Vertices are labelled by a random hyperplane with a few label
/// pairs swapped across it, so the classes need a nonlinear boundary. Fifteen
/// redundant features are random linear combinations of the informative ones
/// (coefficients uniform in `[-1, 1]`) plus a 1% relative Gaussian jitter;
/// the remaining 480 are independent standard normals. Rows and columns are
/// shuffled, and the metadata records each column's role and origin.
pub fn gen_madelon_like(n_samples: usize, seed: u64) -> Result<Dataset> {
    if n_samples < 100 {
        return Err(Error::InvalidArgument(format!(
            "madelon-like generation needs at least 100 samples, got {n_samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = MADELON_INFORMATIVE;
    let n_clusters = 1usize << dims;

    let vertices: Vec<[f64; MADELON_INFORMATIVE]> = (0..n_clusters)
        .map(|v| core::array::from_fn(|b| if (v >> b) & 1 == 1 { 1.0 } else { -1.0 }))
        .collect();

    // hyperplane labelling, half the vertices per class
    let direction: Vec<f64> = (0..dims).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut order: Vec<usize> = (0..n_clusters).collect();
    let proj: Vec<f64> = vertices
        .iter()
        .map(|v| v.iter().zip(&direction).map(|(a, b)| a * b).sum())
        .collect();
    order.sort_by(|&a, &b| proj[a].total_cmp(&proj[b]).then(a.cmp(&b)));
    let mut cluster_label = vec![0usize; n_clusters];
    for &v in &order[n_clusters / 2..] {
        cluster_label[v] = 1;
    }
    let mut low = order[..n_clusters / 2].to_vec();
    let mut high = order[n_clusters / 2..].to_vec();
    low.shuffle(&mut rng);
    high.shuffle(&mut rng);
    for s in 0..LABEL_SWAPS {
        cluster_label[low[s]] = 1;
        cluster_label[high[s]] = 0;
    }

    let transforms: Vec<Vec<f64>> = (0..n_clusters)
        .map(|_| (0..dims * dims).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();

    let mut informative = vec![0.0; n_samples * dims];
    let mut labels = vec![0usize; n_samples];
    for i in 0..n_samples {
        let c = i % n_clusters;
        let z: Vec<f64> = (0..dims).map(|_| StandardNormal.sample(&mut rng)).collect();
        let a = &transforms[c];
        for d in 0..dims {
            let mixed: f64 = (0..dims).map(|e| z[e] * a[e * dims + d]).sum();
            informative[i * dims + d] = mixed + CLUSTER_SEPARATION * vertices[c][d];
        }
        labels[i] = cluster_label[c];
    }

    let coeffs: Vec<f64> = (0..dims * MADELON_REDUNDANT)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let mut redundant = vec![0.0; n_samples * MADELON_REDUNDANT];
    for i in 0..n_samples {
        for r in 0..MADELON_REDUNDANT {
            redundant[i * MADELON_REDUNDANT + r] = (0..dims)
                .map(|d| informative[i * dims + d] * coeffs[d * MADELON_REDUNDANT + r])
                .sum();
        }
    }
    for r in 0..MADELON_REDUNDANT {
        let col: Vec<f64> = (0..n_samples)
            .map(|i| redundant[i * MADELON_REDUNDANT + r])
            .collect();
        let mean = col.iter().sum::<f64>() / n_samples as f64;
        let sd = libm::sqrt(col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n_samples as f64);
        for i in 0..n_samples {
            let jitter: f64 = StandardNormal.sample(&mut rng);
            redundant[i * MADELON_REDUNDANT + r] += REDUNDANT_JITTER * sd * jitter;
        }
    }

    // generator order: informative, redundant, noise
    let mut permutation: Vec<usize> = (0..MADELON_FEATURES).collect();
    permutation.shuffle(&mut rng);
    let mut rows: Vec<usize> = (0..n_samples).collect();
    rows.shuffle(&mut rng);

    let mut features = vec![0.0; n_samples * MADELON_FEATURES];
    let mut noise_row = vec![0.0; MADELON_NOISE];
    for (out_row, &src) in rows.iter().enumerate() {
        noise_row
            .iter_mut()
            .for_each(|x| *x = StandardNormal.sample(&mut rng));
        let dst = &mut features[out_row * MADELON_FEATURES..(out_row + 1) * MADELON_FEATURES];
        for (col, &g) in permutation.iter().enumerate() {
            dst[col] = if g < dims {
                informative[src * dims + g]
            } else if g < dims + MADELON_REDUNDANT {
                redundant[src * MADELON_REDUNDANT + g - dims]
            } else {
                noise_row[g - dims - MADELON_REDUNDANT]
            };
        }
    }
    let labels: Vec<usize> = rows.iter().map(|&r| labels[r]).collect();
    let roles = permutation
        .iter()
        .map(|&g| {
            if g < dims {
                FeatureRole::Informative
            } else if g < dims + MADELON_REDUNDANT {
                FeatureRole::Redundant
            } else {
                FeatureRole::Noise
            }
        })
        .collect();
    Dataset::with_classes(features, MADELON_FEATURES, labels, 2)?.with_metadata(FeatureMetadata {
        roles,
        permutation,
    })
}
