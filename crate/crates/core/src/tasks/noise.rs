//! Additive zero-mean Gaussian noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Rng;

use super::SequenceDataset;

/// What `sigma` is relative to, per feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScale {
    /// Largest absolute value.
    Amplitude,
    /// `max - min`.
    Range,
}

impl std::str::FromStr for NoiseScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "amplitude" => Ok(Self::Amplitude),
            "range" | "normalized_range" => Ok(Self::Range),
            other => Err(Error::InvalidArgument(format!(
                "unknown noise scale '{other}' (expected amplitude or range)"
            ))),
        }
    }
}

impl std::fmt::Display for NoiseScale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Amplitude => "amplitude",
            Self::Range => "range",
        })
    }
}

fn feature_scale(ds: &SequenceDataset, j: usize, mode: NoiseScale) -> f64 {
    let vals = ds.feature_values(j).filter(|v| !v.is_nan());
    match mode {
        NoiseScale::Amplitude => vals.fold(0.0, |m: f64, v| m.max(v.abs())),
        NoiseScale::Range => {
            let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            if lo <= hi {
                hi - lo
            } else {
                0.0
            }
        }
    }
}

/// Adds `N(0, (sigma * scale_j)^2)` to every element of feature `j`, with
/// `scale_j` measured on `ds` itself. Exogenous features are left alone
/// unless `perturb_exo`.
pub fn add_gaussian_noise(
    rng: &mut Rng,
    ds: &SequenceDataset,
    sigma: f64,
    mode: NoiseScale,
    perturb_exo: bool,
) -> Result<SequenceDataset> {
    let scales: Vec<f64> = (0..ds.n_features()).map(|j| feature_scale(ds, j, mode)).collect();
    add_gaussian_noise_scaled(rng, ds, sigma, &scales, perturb_exo)
}

/// As [`add_gaussian_noise`] with explicit per-feature scales.
pub fn add_gaussian_noise_scaled(
    rng: &mut Rng,
    ds: &SequenceDataset,
    sigma: f64,
    scales: &[f64],
    perturb_exo: bool,
) -> Result<SequenceDataset> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {sigma}")));
    }
    if scales.len() != ds.n_features() {
        return Err(Error::shape("noise scales", ds.n_features(), scales.len()));
    }
    let mut out = ds.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let active: Vec<bool> = ds.exo_mask.iter().map(|&e| perturb_exo || !e).collect();
    for row in out.sequences.iter_mut().flatten() {
        for (j, v) in row.iter_mut().enumerate() {
            if active[j] {
                *v += sigma * scales[j] * rng.standard_normal();
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset(n: usize, t: usize, rng: &mut Rng) -> SequenceDataset {
        SequenceDataset::new(
            (0..n).map(|i| i.to_string()).collect(),
            (0..n)
                .map(|_| (0..t).map(|_| vec![rng.uniform_range(-2.0, 2.0), rng.uniform_range(0.0, 1.0)]).collect())
                .collect(),
            vec!["x".into(), "u".into()],
            vec![false, true],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_sigma_is_bitwise_identity() {
        let mut rng = Rng::new(1, 5);
        let ds = dataset(3, 20, &mut rng);
        for mode in [NoiseScale::Amplitude, NoiseScale::Range] {
            let out = add_gaussian_noise(&mut rng, &ds, 0.0, mode, true).unwrap();
            for (a, b) in out.sequences.iter().flatten().flatten().zip(ds.sequences.iter().flatten().flatten()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn empirical_std_matches_target() {
        let mut rng = Rng::new(2, 5);
        let clean = SequenceDataset::new(
            (0..1000).map(|i| i.to_string()).collect(),
            (0..1000).map(|_| (0..1000).map(|t| vec![if t == 0 { 4.0 } else { 1.0 }]).collect()).collect(),
            vec!["x".into()],
            vec![false],
            1.0,
        )
        .unwrap();
        let noisy = add_gaussian_noise(&mut rng, &clean, 0.05, NoiseScale::Range, false).unwrap();
        let diffs: Vec<f64> = noisy
            .feature_values(0)
            .zip(clean.feature_values(0))
            .map(|(a, b)| a - b)
            .collect();
        assert_eq!(diffs.len(), 1_000_000);
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (diffs.len() - 1) as f64;
        let target = 0.05 * 3.0;
        assert!((var.sqrt() / target - 1.0).abs() < 0.02, "std {}", var.sqrt());
        assert!(mean.abs() < 5.0 * target / 1000.0);
    }

    #[test]
    fn exogenous_untouched_by_default() {
        let mut rng = Rng::new(3, 5);
        let ds = dataset(2, 10, &mut rng);
        let out = add_gaussian_noise(&mut rng, &ds, 0.1, NoiseScale::Amplitude, false).unwrap();
        assert!(out.feature_values(1).zip(ds.feature_values(1)).all(|(a, b)| a == b));
        assert!(out.feature_values(0).zip(ds.feature_values(0)).any(|(a, b)| a != b));
        let out = add_gaussian_noise(&mut rng, &ds, 0.1, NoiseScale::Amplitude, true).unwrap();
        assert!(out.feature_values(1).zip(ds.feature_values(1)).any(|(a, b)| a != b));
    }

    #[test]
    fn amplitude_of_sine_is_peak() {
        let ds = SequenceDataset::new(
            vec!["a".into()],
            vec![vec![vec![0.5], vec![-1.5], vec![1.0]]],
            vec!["y".into()],
            vec![false],
            1.0,
        )
        .unwrap();
        assert_eq!(feature_scale(&ds, 0, NoiseScale::Amplitude), 1.5);
        assert_eq!(feature_scale(&ds, 0, NoiseScale::Range), 2.5);
    }

    #[test]
    fn negative_sigma_rejected() {
        let mut rng = Rng::new(0, 5);
        let ds = dataset(1, 3, &mut rng);
        assert!(add_gaussian_noise(&mut rng, &ds, -0.1, NoiseScale::Range, false).is_err());
        assert!("bogus".parse::<NoiseScale>().is_err());
    }
}
