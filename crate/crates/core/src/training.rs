//! MSE loss, Adam, full-sequence BPTT training and regression metrics.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graddiff::{GradVector, Objective, ParamVector};
use crate::numerics::rng::streams;
use crate::numerics::{Rng, Tensor2};
use crate::tasks::WindowedSample;

fn check_same_shape(op: &'static str, a: &Tensor2, b: &Tensor2) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(
            op,
            format!("{}x{}", b.rows, b.cols),
            format!("{}x{}", a.rows, a.cols),
        ));
    }
    Ok(())
}

/// Mean of squared elementwise errors.
pub fn mse_loss(pred: &Tensor2, target: &Tensor2) -> Result<f64> {
    check_same_shape("mse_loss", pred, target)?;
    if pred.data.is_empty() {
        return Err(Error::InvalidArgument("mse of an empty array".into()));
    }
    let sse: f64 = pred.data.iter().zip(&target.data).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sse / pred.data.len() as f64)
}

pub fn mae(pred: &Tensor2, target: &Tensor2) -> Result<f64> {
    check_same_shape("mae", pred, target)?;
    if pred.data.is_empty() {
        return Err(Error::InvalidArgument("mae of an empty array".into()));
    }
    let sae: f64 = pred.data.iter().zip(&target.data).map(|(p, t)| (p - t).abs()).sum();
    Ok(sae / pred.data.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    /// Mean R² over features with non-zero target variance; `None` if there are none.
    pub r2: Option<f64>,
    /// Feature columns left out of the R² average because their target is constant.
    pub r2_excluded: Vec<usize>,
}

/// MAE and RMSE over all elements, R² per column (rows are samples) then averaged.
pub fn compute_metrics(pred: &Tensor2, target: &Tensor2) -> Result<Metrics> {
    check_same_shape("compute_metrics", pred, target)?;
    if target.rows < 2 {
        return Err(Error::InvalidArgument(format!(
            "metrics need at least 2 rows, got {}",
            target.rows
        )));
    }
    let mse = mse_loss(pred, target)?;
    let mae = mae(pred, target)?;
    let mut r2_sum = 0.0;
    let mut counted = 0usize;
    let mut excluded = Vec::new();
    for j in 0..target.cols {
        let mean = (0..target.rows).map(|i| target.get(i, j)).sum::<f64>() / target.rows as f64;
        let sst: f64 = (0..target.rows).map(|i| (target.get(i, j) - mean).powi(2)).sum();
        if sst == 0.0 {
            excluded.push(j);
            continue;
        }
        let sse: f64 = (0..target.rows).map(|i| (pred.get(i, j) - target.get(i, j)).powi(2)).sum();
        r2_sum += 1.0 - sse / sst;
        counted += 1;
    }
    Ok(Metrics {
        mae,
        rmse: mse.sqrt(),
        r2: (counted > 0).then(|| r2_sum / counted as f64),
        r2_excluded: excluded,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: GradVector,
    pub v: GradVector,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &ParamVector, lr: f64) -> Self {
        Self {
            m: params.zero_grad(),
            v: params.zero_grad(),
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam step, in place.
pub fn adam_update(state: &mut AdamState, params: &mut ParamVector, grads: &GradVector) -> Result<()> {
    if grads.layout() != params.layout() || state.m.layout() != params.layout() {
        return Err(Error::shape("adam_update", params.len(), grads.values.len()));
    }
    if grads.values.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for i in 0..params.values.len() {
        let g = grads.values[i];
        let m = b1 * state.m.values[i] + (1.0 - b1) * g;
        let v = b2 * state.v.values[i] + (1.0 - b2) * g * g;
        state.m.values[i] = m;
        state.v.values[i] = v;
        let m_hat = m / c1;
        let v_hat = v / c2;
        params.values[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub shuffle: bool,
    /// Rescale gradients whose L2 norm exceeds this value.
    pub clip_norm: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
            shuffle: true,
            clip_norm: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be >= 1".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("lr must be >= 0, got {}", self.lr)));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::InvalidArgument(format!("clip_norm must be > 0, got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    pub final_params: Vec<f64>,
}

impl TrainHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    pub fn median_epoch_seconds(&self) -> f64 {
        let mut s: Vec<f64> = self.epochs.iter().map(|e| e.seconds).collect();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        if n == 0 {
            0.0
        } else if n % 2 == 1 {
            s[n / 2]
        } else {
            0.5 * (s[n / 2 - 1] + s[n / 2])
        }
    }
}

/// Minibatch Adam over `data` for `cfg.epochs` epochs.
///
/// Each epoch loss is the batch-size-weighted mean of the batch losses seen
/// during that epoch, before each batch's update.
pub fn train_bptt<M: Objective + ?Sized>(
    model: &mut M,
    data: &[WindowedSample],
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Data("no training samples".into()));
    }
    let mut adam = AdamState::new(model.params(), cfg.lr);
    let mut rng = Rng::new(cfg.seed, streams::SHUFFLE);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut batch = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        if cfg.shuffle {
            rng.shuffle(&mut order);
        }
        let mut weighted = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i].clone()));
            let (loss, mut grad) = match model.loss_and_grad(&batch) {
                Ok(r) => r,
                Err(Error::NonFinite(_)) => return Err(Error::Divergence { epoch, loss: f64::NAN }),
                Err(e) => return Err(e),
            };
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, loss });
            }
            if let Some(max) = cfg.clip_norm {
                let norm = grad.norm();
                if norm > max {
                    grad.scale(max / norm);
                }
            }
            adam_update(&mut adam, model.params_mut(), &grad)?;
            model.after_update();
            weighted += loss * chunk.len() as f64;
        }
        let loss = weighted / data.len() as f64;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        epochs.push(EpochRecord {
            epoch,
            loss,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(TrainHistory {
        epochs,
        final_params: model.params().values.clone(),
    })
}

/// Least-squares slope of `ys` against `0, 1, 2, ...`.
pub fn trend_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mean_x;
        sxy += dx * (y - mean_y);
        sxx += dx * dx;
    }
    sxy / sxx
}
