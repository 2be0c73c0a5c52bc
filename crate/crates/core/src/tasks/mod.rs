//! Sequence datasets and the transforms that turn them into training samples:
//! generation, CSV ingestion, cleaning, normalization, windowing, noise and
//! multi-step rollout evaluation.

pub mod csv_io;
pub mod generators;
pub mod noise;
pub mod preprocess;
pub mod rollout;
pub mod window;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{load_csv_sequences, save_csv_sequences, CsvSchema};
pub use generators::{gen_damped_sine, gen_synthetic_icu, icu_clamp_bounds, icu_equilibrium, DampedSineParams, IcuParams};
pub use noise::{add_gaussian_noise, add_gaussian_noise_scaled, NoiseScale};
pub use preprocess::{minmax_apply, minmax_fit, minmax_invert, preprocess, NormStats};
pub use rollout::{rollout_eval, RolloutReport};
pub use window::window_dataset;

/// `window` holds `w` consecutive feature vectors; `target` holds the next
/// step's endogenous features.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    pub window: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

/// Anything that maps an input window to a next-step prediction.
pub trait Predictor {
    fn predict(&self, window: &[Vec<f64>]) -> Result<Vec<f64>>;
}

/// `N` sequences of `T` steps with `F` features each. Missing values are NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceDataset {
    pub ids: Vec<String>,
    /// `sequences[n][t][f]`
    pub sequences: Vec<Vec<Vec<f64>>>,
    pub feature_names: Vec<String>,
    /// `true` marks an exogenous input that is never predicted.
    pub exo_mask: Vec<bool>,
    pub dt: f64,
}

impl SequenceDataset {
    pub fn new(
        ids: Vec<String>,
        sequences: Vec<Vec<Vec<f64>>>,
        feature_names: Vec<String>,
        exo_mask: Vec<bool>,
        dt: f64,
    ) -> Result<Self> {
        let ds = Self {
            ids,
            sequences,
            feature_names,
            exo_mask,
            dt,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.feature_names.len();
        if self.exo_mask.len() != f {
            return Err(Error::Data(format!(
                "{} feature names but {} exogenous flags",
                f,
                self.exo_mask.len()
            )));
        }
        if self.ids.len() != self.sequences.len() {
            return Err(Error::Data(format!(
                "{} sequence ids for {} sequences",
                self.ids.len(),
                self.sequences.len()
            )));
        }
        let t = self.steps();
        for (id, seq) in self.ids.iter().zip(&self.sequences) {
            if seq.len() != t {
                return Err(Error::Data(format!(
                    "sequence '{id}' has {} steps, expected {t} (ragged sequences are not supported)",
                    seq.len()
                )));
            }
            if let Some(row) = seq.iter().find(|r| r.len() != f) {
                return Err(Error::Data(format!(
                    "sequence '{id}' has a row with {} features, expected {f}",
                    row.len()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Steps per sequence.
    pub fn steps(&self) -> usize {
        self.sequences.first().map_or(0, Vec::len)
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Indices of predicted (non-exogenous) features.
    pub fn target_indices(&self) -> Vec<usize> {
        (0..self.n_features()).filter(|&j| !self.exo_mask[j]).collect()
    }

    pub fn n_targets(&self) -> usize {
        self.exo_mask.iter().filter(|&&e| !e).count()
    }

    /// Values of feature `j` across all sequences and steps.
    pub fn feature_values(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.sequences.iter().flat_map(move |s| s.iter().map(move |r| r[j]))
    }

    pub fn subset(&self, indices: &[usize]) -> SequenceDataset {
        SequenceDataset {
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            exo_mask: self.exo_mask.clone(),
            dt: self.dt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: SequenceDataset,
    pub val: SequenceDataset,
    pub test: SequenceDataset,
}

/// FNV-1a over the id bytes.
fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Whole-sequence split: sequences are ordered by a seeded hash of their id
/// and cut into train / validation / test by the given fractions.
pub fn split_by_id(ds: &SequenceDataset, seed: u64, fractions: (f64, f64, f64)) -> Result<Splits> {
    let (a, b, c) = fractions;
    if a < 0.0 || b < 0.0 || c < 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions must be non-negative and sum to 1, got ({a}, {b}, {c})"
        )));
    }
    let n = ds.len();
    let n_train = (a * n as f64).round() as usize;
    let n_val = ((b * n as f64).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);
    let n_test = n - n_train - n_val;
    if n_train == 0 || n_test == 0 {
        return Err(Error::Data(format!(
            "{n} sequences give {n_train} train and {n_test} test sequences; both need at least one"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let salt = crate::numerics::rng::mix64(seed ^ crate::numerics::rng::streams::SPLIT);
    order.sort_by_key(|&i| (crate::numerics::rng::mix64(fnv1a(&ds.ids[i]) ^ salt), i));
    let (train, rest) = order.split_at(n_train);
    let (val, test) = rest.split_at(n_val);
    Ok(Splits {
        train: ds.subset(train),
        val: ds.subset(val),
        test: ds.subset(test),
    })
}
