//! Missing-value filling, clamping and min-max normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::SequenceDataset;

fn median(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Forward-fills NaN per feature within each sequence, then clamps.
///
/// Leading gaps take 0 for exogenous features and the dataset-wide median for
/// the rest. An exogenous feature that is never observed in a sequence is
/// zero-filled; any other feature that is never observed is an error.
/// `bounds` is either empty or has one entry per feature.
pub fn preprocess(ds: &SequenceDataset, bounds: &[Option<(f64, f64)>]) -> Result<SequenceDataset> {
    let f = ds.n_features();
    if !bounds.is_empty() && bounds.len() != f {
        return Err(Error::shape("preprocess bounds", f, bounds.len()));
    }
    for (j, b) in bounds.iter().enumerate() {
        if let Some((lo, hi)) = b {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidArgument(format!(
                    "bad clamp bounds [{lo}, {hi}] for feature '{}'",
                    ds.feature_names[j]
                )));
            }
        }
    }
    let medians: Vec<Option<f64>> = (0..f)
        .map(|j| median(ds.feature_values(j).filter(|v| !v.is_nan()).collect()))
        .collect();

    let mut out = ds.clone();
    for (id, seq) in out.ids.iter().zip(out.sequences.iter_mut()) {
        for j in 0..f {
            let observed = seq.iter().any(|r| !r[j].is_nan());
            if !observed && !ds.exo_mask[j] {
                return Err(Error::Data(format!(
                    "feature '{}' is entirely missing in sequence '{id}'",
                    ds.feature_names[j]
                )));
            }
            let lead = if ds.exo_mask[j] {
                0.0
            } else {
                medians[j].expect("observed somewhere")
            };
            let mut last = lead;
            for row in seq.iter_mut() {
                if row[j].is_nan() {
                    row[j] = last;
                } else {
                    last = row[j];
                }
                if let Some(Some((lo, hi))) = bounds.get(j) {
                    row[j] = row[j].clamp(*lo, *hi);
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Features with `max == min`; they normalize to 0.
    pub constant: Vec<bool>,
}

pub fn minmax_fit(ds: &SequenceDataset) -> NormStats {
    let f = ds.n_features();
    let mut min = vec![0.0; f];
    let mut max = vec![0.0; f];
    for j in 0..f {
        let (lo, hi) = ds
            .feature_values(j)
            .filter(|v| !v.is_nan())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if lo <= hi {
            min[j] = lo;
            max[j] = hi;
        }
    }
    let constant = min.iter().zip(&max).map(|(a, b)| a == b).collect();
    NormStats { min, max, constant }
}

fn check_stats(ds: &SequenceDataset, stats: &NormStats) -> Result<()> {
    if stats.min.len() != ds.n_features() {
        return Err(Error::shape("norm stats", ds.n_features(), stats.min.len()));
    }
    Ok(())
}

/// `x -> (x - min) / (max - min)`; constant features map to 0.
pub fn minmax_apply(ds: &SequenceDataset, stats: &NormStats) -> Result<SequenceDataset> {
    check_stats(ds, stats)?;
    let mut out = ds.clone();
    for row in out.sequences.iter_mut().flatten() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if stats.constant[j] {
                0.0
            } else {
                (*v - stats.min[j]) / (stats.max[j] - stats.min[j])
            };
        }
    }
    Ok(out)
}

/// Inverse of [`minmax_apply`]; constant features come back as their single value.
pub fn minmax_invert(ds: &SequenceDataset, stats: &NormStats) -> Result<SequenceDataset> {
    check_stats(ds, stats)?;
    let mut out = ds.clone();
    for row in out.sequences.iter_mut().flatten() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = stats.min[j] + *v * (stats.max[j] - stats.min[j]);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::{prop_assert, proptest};

    fn single(values: Vec<Vec<f64>>, exo: bool) -> SequenceDataset {
        let n = values.len();
        SequenceDataset::new(
            (0..n).map(|i| format!("s{i}")).collect(),
            values.into_iter().map(|s| s.into_iter().map(|v| vec![v]).collect()).collect(),
            vec!["f".into()],
            vec![exo],
            1.0,
        )
        .unwrap()
    }

    fn col(ds: &SequenceDataset, n: usize) -> Vec<f64> {
        ds.sequences[n].iter().map(|r| r[0]).collect()
    }

    #[test]
    fn identity_without_gaps_or_bounds() {
        let ds = single(vec![vec![1.0, 2.0, -3.0]], false);
        assert_eq!(preprocess(&ds, &[]).unwrap(), ds);
    }

    #[test]
    fn forward_fill() {
        let nan = f64::NAN;
        let ds = single(vec![vec![1.0, nan, nan, 4.0]], false);
        assert_eq!(col(&preprocess(&ds, &[]).unwrap(), 0), vec![1.0, 1.0, 1.0, 4.0]);
    }

    #[test]
    fn leading_gaps() {
        let nan = f64::NAN;
        let ds = single(vec![vec![nan, 2.0, 6.0], vec![nan, 10.0, nan]], false);
        // median of {2, 6, 10}
        assert_eq!(col(&preprocess(&ds, &[]).unwrap(), 1), vec![6.0, 10.0, 10.0]);
        let exo = single(vec![vec![nan, 1.0], vec![nan, nan]], true);
        let out = preprocess(&exo, &[]).unwrap();
        assert_eq!(col(&out, 0), vec![0.0, 1.0]);
        assert_eq!(col(&out, 1), vec![0.0, 0.0]);
    }

    #[test]
    fn clamp() {
        let ds = single(vec![vec![900.0, -5.0, 12.0]], false);
        let out = preprocess(&ds, &[Some((0.0, 300.0))]).unwrap();
        assert_eq!(col(&out, 0), vec![300.0, 0.0, 12.0]);
    }

    #[test]
    fn entirely_missing_feature_is_error() {
        let nan = f64::NAN;
        let ds = single(vec![vec![1.0, 2.0], vec![nan, nan]], false);
        assert!(preprocess(&ds, &[]).is_err());
    }

    #[test]
    fn minmax_maps_train_range_to_unit_interval() {
        let ds = single(vec![vec![2.0, 4.0, 10.0]], false);
        let stats = minmax_fit(&ds);
        assert_eq!(col(&minmax_apply(&ds, &stats).unwrap(), 0), vec![0.0, 0.25, 1.0]);
        let other = single(vec![vec![12.0]], false);
        assert_eq!(col(&minmax_apply(&other, &stats).unwrap(), 0), vec![1.25]);
        assert_eq!(minmax_fit(&ds), stats);
    }

    #[test]
    fn constant_feature_flagged() {
        let ds = single(vec![vec![3.0, 3.0]], false);
        let stats = minmax_fit(&ds);
        assert_eq!(stats.constant, vec![true]);
        let n = minmax_apply(&ds, &stats).unwrap();
        assert_eq!(col(&n, 0), vec![0.0, 0.0]);
        assert_eq!(col(&minmax_invert(&n, &stats).unwrap(), 0), vec![3.0, 3.0]);
    }

    #[test]
    fn round_trip_random() {
        let mut rng = Rng::new(8, 0);
        let vals: Vec<Vec<f64>> = (0..5).map(|_| (0..50).map(|_| rng.uniform_range(-1e3, 1e3)).collect()).collect();
        let ds = single(vals, false);
        let stats = minmax_fit(&ds);
        let back = minmax_invert(&minmax_apply(&ds, &stats).unwrap(), &stats).unwrap();
        for (a, b) in back.sequences.iter().flatten().zip(ds.sequences.iter().flatten()) {
            assert!((a[0] - b[0]).abs() <= 1e-12 * b[0].abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn normalized_train_values_in_unit_interval(v in proptest::collection::vec(-1e6f64..1e6, 2..50)) {
            let ds = single(vec![v], false);
            let stats = minmax_fit(&ds);
            let n = minmax_apply(&ds, &stats).unwrap();
            for r in n.sequences.iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&r[0]));
            }
        }
    }
}
