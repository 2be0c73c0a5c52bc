//! Loss gradients for sequence models and their finite-difference validation.
//!
//! Models expose an [`Objective`]: a plain loss evaluated at arbitrary
//! parameter values, plus an analytic `loss_and_grad`. The finite-difference
//! oracle only ever calls the plain loss, so it checks the analytic path
//! end to end.

pub mod params;
pub mod tape;

pub use params::{GradVector, Layout, ParamVector, Segment};
pub use tape::{Gradients, Tape, Var};

use crate::error::Result;
use crate::tasks::WindowedSample;

pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Anything trainable by minimizing a batch loss over a flat parameter vector.
pub trait Objective {
    fn params(&self) -> &ParamVector;

    fn params_mut(&mut self) -> &mut ParamVector;

    /// Batch loss with the model's parameters replaced by `values`.
    fn loss_at(&self, values: &[f64], batch: &[WindowedSample]) -> Result<f64>;

    /// Batch loss and its exact gradient at the current parameters.
    fn loss_and_grad(&self, batch: &[WindowedSample]) -> Result<(f64, GradVector)>;

    fn loss(&self, batch: &[WindowedSample]) -> Result<f64> {
        self.loss_at(&self.params().values, batch)
    }

    /// Hook run after every optimizer update (e.g. re-applying wiring masks).
    fn after_update(&mut self) {}
}

pub fn loss_and_grad<M: Objective + ?Sized>(
    model: &M,
    batch: &[WindowedSample],
) -> Result<(f64, GradVector)> {
    model.loss_and_grad(batch)
}

/// Central differences `(L(θ + h e_i) - L(θ - h e_i)) / 2h` for every parameter.
pub fn finite_diff_grad<M: Objective + ?Sized>(
    model: &M,
    batch: &[WindowedSample],
    h: f64,
) -> Result<GradVector> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let base = model.params();
    let mut probe = base.values.clone();
    let mut grad = base.zero_grad();
    for i in 0..probe.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let plus = model.loss_at(&probe, batch)?;
        probe[i] = orig - h;
        let minus = model.loss_at(&probe, batch)?;
        probe[i] = orig;
        grad.values[i] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Relative error between two gradients, `|a - b| / max(1e-8, |a| + |b|)`, maximized.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / (a.abs() + n.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

/// Max relative error between the analytic gradient and finite differences.
pub fn grad_check<M: Objective + ?Sized>(model: &M, batch: &[WindowedSample]) -> Result<f64> {
    let (_, analytic) = model.loss_and_grad(batch)?;
    let numeric = finite_diff_grad(model, batch, DEFAULT_FD_STEP)?;
    Ok(max_relative_error(&analytic.values, &numeric.values))
}
