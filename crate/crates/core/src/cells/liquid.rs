//! Continuous-time cells: liquid time-constant (LTC) dynamics, the
//! closed-form CfC update, and an input-modulated dense state-space cell.
//!
//! LTC state equation, with a single sigmoid gate layer shared by the decay
//! and drive terms:
//!
//! ```text
//! g  = sigmoid(W_gx x + W_gi I + b_g)
//! dx = -(1/tau + g) * x + g * A
//! ```
//!
//! `tau = softplus(tau_raw) + 0.05` keeps every time constant strictly positive.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{affine, matvec, sigmoid, sigmoid_scalar, softplus, tanh_ew, Tensor1, Tensor2};

pub const TAU_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LtcParams {
    pub w_gx: Tensor2,
    pub w_gi: Tensor2,
    pub b_g: Tensor1,
    pub tau_raw: Tensor1,
    pub a: Tensor1,
    pub w_out: Tensor2,
    pub b_out: Tensor1,
}

impl LtcParams {
    pub fn hidden(&self) -> usize {
        self.w_gx.rows
    }

    pub fn input(&self) -> usize {
        self.w_gi.cols
    }

    pub fn effective_tau(&self) -> Tensor1 {
        softplus(&self.tau_raw).map(|t| t + TAU_FLOOR)
    }

    /// Gate `sigmoid(W_gx x + W_gi I + b_g)`.
    pub fn gate(&self, x: &Tensor1, input: &Tensor1) -> Result<Tensor1> {
        self.check(x, input)?;
        let pre = matvec(&self.w_gx, x)?
            .add(&matvec(&self.w_gi, input)?)?
            .add(&self.b_g)?;
        Ok(sigmoid(&pre))
    }

    pub fn readout(&self, x: &Tensor1) -> Result<Tensor1> {
        affine(&self.w_out, x, &self.b_out)
    }

    fn check(&self, x: &Tensor1, input: &Tensor1) -> Result<()> {
        if x.len() != self.hidden() {
            return Err(Error::shape("ltc state", self.hidden(), x.len()));
        }
        if input.len() != self.input() {
            return Err(Error::shape("ltc input", self.input(), input.len()));
        }
        Ok(())
    }
}

/// `-(1/tau + g) * x + g * A`
pub fn ltc_rhs(p: &LtcParams, x: &Tensor1, input: &Tensor1) -> Result<Tensor1> {
    let g = p.gate(x, input)?;
    let tau = p.effective_tau();
    Ok(Tensor1::new(
        (0..x.len())
            .map(|k| -(1.0 / tau.data[k] + g.data[k]) * x.data[k] + g.data[k] * p.a.data[k])
            .collect(),
    ))
}

/// Semi-implicit step, implicit in the decay and explicit in the gate:
/// `x' = (x + dt g A) / (1 + dt (1/tau + g))`.
pub fn ltc_step_fused(p: &LtcParams, x: &Tensor1, input: &Tensor1, dt: f64) -> Result<Tensor1> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("fused step needs dt > 0, got {dt}")));
    }
    let g = p.gate(x, input)?;
    let tau = p.effective_tau();
    Ok(Tensor1::new(
        (0..x.len())
            .map(|k| {
                let num = x.data[k] + dt * g.data[k] * p.a.data[k];
                let den = 1.0 + dt * (1.0 / tau.data[k] + g.data[k]);
                num / den
            })
            .collect(),
    ))
}

/// Three single-layer heads over `[x, I]`: a softplus time-decay head `f`
/// and two tanh heads `g`, `h` mixed by `sigmoid(-f t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfcParams {
    pub w_f: Tensor2,
    pub b_f: Tensor1,
    pub w_g: Tensor2,
    pub b_g: Tensor1,
    pub w_h: Tensor2,
    pub b_h: Tensor1,
    pub w_out: Tensor2,
    pub b_out: Tensor1,
}

/// Head activations for one CfC evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CfcHeads {
    pub f: Tensor1,
    pub g: Tensor1,
    pub h: Tensor1,
}

impl CfcParams {
    pub fn hidden(&self) -> usize {
        self.w_f.rows
    }

    pub fn input(&self) -> usize {
        self.w_f.cols - self.w_f.rows
    }

    pub fn heads(&self, x: &Tensor1, input: &Tensor1) -> Result<CfcHeads> {
        if x.len() != self.hidden() {
            return Err(Error::shape("cfc state", self.hidden(), x.len()));
        }
        if input.len() != self.input() {
            return Err(Error::shape("cfc input", self.input(), input.len()));
        }
        let xi = x.concat(input);
        Ok(CfcHeads {
            f: softplus(&affine(&self.w_f, &xi, &self.b_f)?),
            g: tanh_ew(&affine(&self.w_g, &xi, &self.b_g)?),
            h: tanh_ew(&affine(&self.w_h, &xi, &self.b_h)?),
        })
    }

    pub fn readout(&self, x: &Tensor1) -> Result<Tensor1> {
        affine(&self.w_out, x, &self.b_out)
    }
}

/// `x' = sigmoid(-f t) * g + (1 - sigmoid(-f t)) * h`
pub fn cfc_step(p: &CfcParams, x: &Tensor1, input: &Tensor1, t_gap: f64) -> Result<Tensor1> {
    if !(t_gap >= 0.0) {
        return Err(Error::InvalidArgument(format!("CfC time gap must be >= 0, got {t_gap}")));
    }
    let CfcHeads { f, g, h } = p.heads(x, input)?;
    Ok(Tensor1::new(
        (0..f.len())
            .map(|k| {
                let mix = sigmoid_scalar(-f.data[k] * t_gap);
                mix * g.data[k] + (1.0 - mix) * h.data[k]
            })
            .collect(),
    ))
}

/// Dense liquid state-space cell driven by a scalar input `u`:
/// `dx = (A + u diag(B)) x + B u`, `y = C x`.
///
/// Vector inputs are reduced to `u` by the learned projection `w_u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsmParams {
    pub a: Tensor2,
    pub b: Tensor1,
    pub c: Tensor2,
    pub w_u: Tensor1,
}

impl SsmParams {
    pub fn hidden(&self) -> usize {
        self.a.rows
    }

    /// Scalar drive `u = w_u · input`.
    pub fn project_input(&self, input: &Tensor1) -> Result<f64> {
        if input.len() != self.w_u.len() {
            return Err(Error::shape("ssm input", self.w_u.len(), input.len()));
        }
        Ok(self.w_u.iter().zip(input.iter()).map(|(w, x)| w * x).sum())
    }

    pub fn rhs(&self, x: &Tensor1, u: f64) -> Result<Tensor1> {
        let ax = matvec(&self.a, x)?;
        Ok(Tensor1::new(
            (0..x.len())
                .map(|k| ax.data[k] + u * self.b.data[k] * x.data[k] + self.b.data[k] * u)
                .collect(),
        ))
    }
}

/// Explicit Euler step of the liquid SSM, returning `(x', C x')`.
pub fn ssm_step(p: &SsmParams, x: &Tensor1, u: f64, dt: f64) -> Result<(Tensor1, Tensor1)> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("ssm step needs dt > 0, got {dt}")));
    }
    let next = x.axpy(dt, &p.rhs(x, u)?)?;
    let y = matvec(&p.c, &next)?;
    Ok((next, y))
}
