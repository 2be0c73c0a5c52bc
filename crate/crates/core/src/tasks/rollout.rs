//! Recursive multi-step rollouts.
//!
//! From each start the predictor sees a window of inputs, predicts the next
//! endogenous features, and that prediction replaces the endogenous part of
//! the next input row. Exogenous features always come from the clean data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Tensor2;
use crate::training::{mae, mse_loss};

use super::{Predictor, SequenceDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    /// `(k, mae, rmse)` for `k = 1..=K`.
    pub per_k: Vec<(usize, f64, f64)>,
    /// Number of rollout starts evaluated.
    pub starts: usize,
    /// Single-step windows that had fewer than `K` steps left.
    pub skipped: usize,
}

/// Rolls out `horizon` steps from every start `s` with `s + w + horizon <= T`.
///
/// Windows are read from `inputs` (possibly noisy); targets and exogenous
/// features come from `clean`. With `horizon = 1` the metrics equal
/// single-step evaluation on `window_dataset(inputs, w)` against clean targets.
pub fn rollout_eval<P: Predictor + ?Sized>(
    predictor: &P,
    inputs: &SequenceDataset,
    clean: &SequenceDataset,
    w: usize,
    horizon: usize,
) -> Result<RolloutReport> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("rollout horizon must be >= 1".into()));
    }
    if w == 0 {
        return Err(Error::InvalidArgument("window length must be at least 1".into()));
    }
    if inputs.len() != clean.len() || inputs.steps() != clean.steps() || inputs.exo_mask != clean.exo_mask {
        return Err(Error::Data("rollout inputs and clean data differ in shape".into()));
    }
    let t = clean.steps();
    let targets = clean.target_indices();
    let o = targets.len();
    let per_seq = (t + 1).saturating_sub(w + horizon);
    let starts = per_seq * clean.len();
    let skipped = clean.len() * t.saturating_sub(w) - starts;
    if starts == 0 {
        return Err(Error::Data(format!(
            "no rollout starts: sequences of {t} steps cannot fit window {w} plus horizon {horizon}"
        )));
    }

    let mut preds = vec![Vec::with_capacity(starts * o); horizon];
    let mut truth = vec![Vec::with_capacity(starts * o); horizon];
    for (noisy, seq) in inputs.sequences.iter().zip(&clean.sequences) {
        for s in 0..per_seq {
            let mut window: Vec<Vec<f64>> = noisy[s..s + w].to_vec();
            for k in 0..horizon {
                let step = s + w + k;
                let y = predictor.predict(&window)?;
                if y.len() != o {
                    return Err(Error::shape("rollout prediction", o, y.len()));
                }
                truth[k].extend(targets.iter().map(|&j| seq[step][j]));
                preds[k].extend_from_slice(&y);
                if k + 1 < horizon {
                    let mut next = seq[step].clone();
                    for (&j, v) in targets.iter().zip(&y) {
                        next[j] = *v;
                    }
                    window.remove(0);
                    window.push(next);
                }
            }
        }
    }
    let mut per_k = Vec::with_capacity(horizon);
    for (k, (p, y)) in preds.into_iter().zip(truth).enumerate() {
        let p = Tensor2::new(starts, o, p)?;
        let y = Tensor2::new(starts, o, y)?;
        per_k.push((k + 1, mae(&p, &y)?, mse_loss(&p, &y)?.sqrt()));
    }
    Ok(RolloutReport {
        per_k,
        starts,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;

    use crate::cells::Family;
    use crate::model::{ModelSpec, SequenceModel};
    use crate::numerics::Rng;
    use crate::tasks::{gen_synthetic_icu, minmax_apply, minmax_fit, preprocess, window_dataset, IcuParams};
    use crate::training::compute_metrics;

    /// Knows the generating rule `x[t+1] = x[t] + 1`.
    struct Counter;

    impl Predictor for Counter {
        fn predict(&self, window: &[Vec<f64>]) -> Result<Vec<f64>> {
            Ok(vec![window.last().unwrap()[0] + 1.0])
        }
    }

    fn counting(n: usize, t: usize) -> SequenceDataset {
        SequenceDataset::new(
            (0..n).map(|i| i.to_string()).collect(),
            (0..n)
                .map(|i| (0..t).map(|s| vec![(i + s) as f64, (s % 2) as f64]).collect())
                .collect(),
            vec!["x".into(), "u".into()],
            vec![false, true],
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn perfect_model_has_zero_error() {
        let ds = counting(3, 12);
        let r = rollout_eval(&Counter, &ds, &ds, 4, 5).unwrap();
        assert_eq!(r.starts, 3 * 4);
        assert_eq!(r.skipped, 3 * 8 - 12);
        assert_eq!(r.per_k.len(), 5);
        assert!(r.per_k.iter().enumerate().all(|(i, &(k, a, b))| k == i + 1 && a == 0.0 && b == 0.0));
    }

    #[test]
    fn insufficient_steps_rejected() {
        let ds = counting(1, 5);
        assert!(rollout_eval(&Counter, &ds, &ds, 4, 2).is_err());
        assert!(rollout_eval(&Counter, &ds, &ds, 4, 0).is_err());
    }

    fn icu(seed: u64) -> SequenceDataset {
        let mut rng = Rng::new(seed, 1);
        let p = IcuParams {
            n_patients: 12,
            steps: 30,
            ..IcuParams::default()
        };
        let ds = preprocess(&gen_synthetic_icu(&mut rng, &p).unwrap(), &[]).unwrap();
        minmax_apply(&ds, &minmax_fit(&ds)).unwrap()
    }

    #[test]
    fn single_step_matches_windowed_metrics() {
        let ds = icu(4);
        let model = SequenceModel::new(ModelSpec::new(Family::Gru, ds.n_features(), 6, ds.n_targets()), 9)
            .unwrap()
            .freeze()
            .unwrap();
        let r = rollout_eval(&model, &ds, &ds, 10, 1).unwrap();
        let samples = window_dataset(&ds, 10).unwrap();
        let o = ds.n_targets();
        let mut p = Vec::new();
        let mut y = Vec::new();
        for s in &samples {
            p.extend(model.predict(&s.window).unwrap());
            y.extend_from_slice(&s.target);
        }
        let m = compute_metrics(
            &Tensor2::new(samples.len(), o, p).unwrap(),
            &Tensor2::new(samples.len(), o, y).unwrap(),
        )
        .unwrap();
        assert_eq!(r.starts, samples.len());
        assert_eq!(r.skipped, 0);
        assert_eq!(r.per_k[0].1, m.mae);
        assert_eq!(r.per_k[0].2, m.rmse);
    }

    /// Persistence plus a random Gaussian step per prediction.
    struct RandomWalk {
        rng: RefCell<Rng>,
        targets: Vec<usize>,
    }

    impl Predictor for RandomWalk {
        fn predict(&self, window: &[Vec<f64>]) -> Result<Vec<f64>> {
            let last = window.last().unwrap();
            let mut rng = self.rng.borrow_mut();
            Ok(self.targets.iter().map(|&j| last[j] + rng.normal(0.0, 0.05)).collect())
        }
    }

    #[test]
    fn random_model_error_grows_with_horizon() {
        let mut total = [0.0; 5];
        for seed in 0..5u64 {
            let ds = icu(seed);
            let model = RandomWalk {
                rng: RefCell::new(Rng::new(seed, 5)),
                targets: ds.target_indices(),
            };
            let r = rollout_eval(&model, &ds, &ds, 10, 5).unwrap();
            assert!(r.starts >= 30);
            for (acc, &(_, _, rmse)) in total.iter_mut().zip(&r.per_k) {
                *acc += rmse;
            }
        }
        for k in 1..5 {
            assert!(total[k] >= total[k - 1], "{total:?}");
        }
    }
}
