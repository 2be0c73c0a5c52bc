//! Standard RNN, LSTM and GRU step functions.
//!
//! Gate inputs are the concatenation `[h_prev, x]` in that order. The output
//! projection is affine with identity activation; stacked lower layers carry a
//! `0 x n` projection and produce an empty output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{affine, matvec, sigmoid, tanh_ew, Tensor1, Tensor2};

fn check_len(op: &'static str, v: &Tensor1, expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::shape(op, expected, v.len()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnParams {
    pub w_xh: Tensor2,
    pub w_hh: Tensor2,
    pub b_h: Tensor1,
    pub w_hy: Tensor2,
    pub b_y: Tensor1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub w_f: Tensor2,
    pub w_i: Tensor2,
    pub w_c: Tensor2,
    pub w_o: Tensor2,
    pub b_f: Tensor1,
    pub b_i: Tensor1,
    pub b_c: Tensor1,
    pub b_o: Tensor1,
    pub w_hy: Tensor2,
    pub b_y: Tensor1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruParams {
    pub w_r: Tensor2,
    pub w_z: Tensor2,
    pub w_h: Tensor2,
    pub b_r: Tensor1,
    pub b_z: Tensor1,
    pub b_h: Tensor1,
    pub w_hy: Tensor2,
    pub b_y: Tensor1,
}

/// Recurrent state. `c` is only present for LSTM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    pub h: Tensor1,
    pub c: Option<Tensor1>,
}

impl CellState {
    pub fn zeros(hidden: usize, with_cell: bool) -> Self {
        Self {
            h: Tensor1::zeros(hidden),
            c: with_cell.then(|| Tensor1::zeros(hidden)),
        }
    }
}

impl RnnParams {
    pub fn hidden(&self) -> usize {
        self.w_hh.rows
    }

    pub fn input(&self) -> usize {
        self.w_xh.cols
    }
}

impl LstmParams {
    pub fn hidden(&self) -> usize {
        self.w_f.rows
    }

    pub fn input(&self) -> usize {
        self.w_f.cols - self.w_f.rows
    }
}

impl GruParams {
    pub fn hidden(&self) -> usize {
        self.w_r.rows
    }

    pub fn input(&self) -> usize {
        self.w_r.cols - self.w_r.rows
    }
}

/// `h = tanh(W_hh h_prev + W_xh x + b_h)`, `y = W_hy h + b_y`.
pub fn rnn_step(p: &RnnParams, h_prev: &Tensor1, x: &Tensor1) -> Result<(Tensor1, Tensor1)> {
    check_len("rnn_step h_prev", h_prev, p.hidden())?;
    check_len("rnn_step x", x, p.input())?;
    let pre = matvec(&p.w_hh, h_prev)?
        .add(&matvec(&p.w_xh, x)?)?
        .add(&p.b_h)?;
    let h = tanh_ew(&pre);
    let y = affine(&p.w_hy, &h, &p.b_y)?;
    Ok((h, y))
}

pub fn lstm_step(p: &LstmParams, s: &CellState, x: &Tensor1) -> Result<(CellState, Tensor1)> {
    let n = p.hidden();
    check_len("lstm_step h", &s.h, n)?;
    check_len("lstm_step x", x, p.input())?;
    let c_prev = s
        .c
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("LSTM state without cell vector".into()))?;
    check_len("lstm_step c", c_prev, n)?;

    let hx = s.h.concat(x);
    let f = sigmoid(&affine(&p.w_f, &hx, &p.b_f)?);
    let i = sigmoid(&affine(&p.w_i, &hx, &p.b_i)?);
    let c_tilde = tanh_ew(&affine(&p.w_c, &hx, &p.b_c)?);
    let o = sigmoid(&affine(&p.w_o, &hx, &p.b_o)?);
    let c = f.mul(c_prev)?.add(&i.mul(&c_tilde)?)?;
    let h = o.mul(&tanh_ew(&c))?;
    let y = affine(&p.w_hy, &h, &p.b_y)?;
    Ok((CellState { h, c: Some(c) }, y))
}

pub fn gru_step(p: &GruParams, h_prev: &Tensor1, x: &Tensor1) -> Result<(Tensor1, Tensor1)> {
    check_len("gru_step h_prev", h_prev, p.hidden())?;
    check_len("gru_step x", x, p.input())?;
    let hx = h_prev.concat(x);
    let r = sigmoid(&affine(&p.w_r, &hx, &p.b_r)?);
    let z = sigmoid(&affine(&p.w_z, &hx, &p.b_z)?);
    let rhx = r.mul(h_prev)?.concat(x);
    let h_tilde = tanh_ew(&affine(&p.w_h, &rhx, &p.b_h)?);
    let keep = z.map(|v| 1.0 - v);
    let h = keep.mul(h_prev)?.add(&z.mul(&h_tilde)?)?;
    let y = affine(&p.w_hy, &h, &p.b_y)?;
    Ok((h, y))
}
