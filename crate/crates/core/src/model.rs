//! Sequence models: one or two stacked recurrent layers plus a linear readout,
//! stored as a single flat [`ParamVector`].
//!
//! A model maps a window of `w` feature vectors to a prediction of the next
//! step's endogenous features. Continuous-time layers hold each input sample
//! constant over one interval of length `solver.dt`.

use serde::{Deserialize, Serialize};

use crate::cells::wiring::state_input_mask;
use crate::cells::{
    build_ncp_wiring, cfc_step, gru_step, lstm_step, ltc_rhs, ltc_step_fused, rnn_step, ssm_step, CellState,
    CfcParams, Family, GruParams, LstmParams, LtcParams, NcpFanouts, NcpSizes, NcpWiring, RnnParams, SsmParams,
    TAU_FLOOR,
};
use crate::error::{Error, Result};
use crate::graddiff::{GradVector, Layout, Objective, ParamVector, Tape, Var};
use crate::numerics::rng::streams;
use crate::numerics::{glorot_init, matvec, Rng, Tensor1, Tensor2};
use crate::solvers::{integrate_interval_in, Plain, SolverConfig, SolverKind};
use crate::tasks::{Predictor, WindowedSample};

/// Layer sizes and fanouts of an NCP-wired liquid layer; the sensory layer is the model input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WiringSpec {
    pub inter: usize,
    pub command: usize,
    pub motor: usize,
    pub fanouts: NcpFanouts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub input: usize,
    pub hidden: usize,
    pub output: usize,
    pub layers: usize,
    pub solver: SolverConfig,
    pub wiring: Option<WiringSpec>,
    /// CfC elapsed time between samples.
    pub time_gap: f64,
}

impl ModelSpec {
    pub fn new(family: Family, input: usize, hidden: usize, output: usize) -> Self {
        let kind = match family {
            Family::Ltc => SolverKind::Fused,
            _ => SolverKind::Euler,
        };
        Self {
            family,
            input,
            hidden,
            output,
            layers: 1,
            solver: SolverConfig::new(kind),
            wiring: None,
            time_gap: 1.0,
        }
    }

    pub fn with_solver(mut self, solver: SolverConfig) -> Self {
        self.solver = solver;
        self
    }

    pub fn with_layers(mut self, layers: usize) -> Self {
        self.layers = layers;
        self
    }

    pub fn with_wiring(mut self, wiring: WiringSpec) -> Self {
        self.wiring = Some(wiring);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.input == 0 || self.hidden == 0 || self.output == 0 {
            return bad(format!(
                "model dims must be >= 1 (input {}, hidden {}, output {})",
                self.input, self.hidden, self.output
            ));
        }
        if !(1..=2).contains(&self.layers) {
            return bad(format!("layers must be 1 or 2, got {}", self.layers));
        }
        if !(self.time_gap >= 0.0 && self.time_gap.is_finite()) {
            return bad(format!("time gap must be >= 0, got {}", self.time_gap));
        }
        self.solver.validate()?;
        if self.family == Family::Ssm && self.solver.kind == SolverKind::Fused {
            return bad("the fused solver applies to ltc only".into());
        }
        if let Some(w) = &self.wiring {
            if !self.family.supports_wiring() {
                return bad(format!("wiring is only available for ltc and cfc, not {}", self.family));
            }
            if self.layers != 1 {
                return bad("wired models must have a single layer".into());
            }
            let total = w.inter + w.command + w.motor;
            if total != self.hidden {
                return bad(format!(
                    "wiring layers sum to {total} neurons but hidden = {}",
                    self.hidden
                ));
            }
        }
        Ok(())
    }

    fn layer_input(&self, l: usize) -> usize {
        if l == 0 {
            self.input
        } else {
            self.hidden
        }
    }
}

/// Exact count of trainable scalars, readout included.
pub fn param_count(spec: &ModelSpec) -> usize {
    (0..spec.layers)
        .map(|l| spec.family.block_param_count(spec.hidden, spec.layer_input(l)))
        .sum::<usize>()
        + spec.family.head_param_count(spec.hidden, spec.output)
}

fn block_segments(family: Family, n: usize, m: usize) -> Vec<(&'static str, usize, usize)> {
    match family {
        Family::Rnn => vec![("W_xh", n, m), ("W_hh", n, n), ("b_h", n, 1)],
        Family::Lstm => vec![
            ("W_f", n, n + m),
            ("W_i", n, n + m),
            ("W_c", n, n + m),
            ("W_o", n, n + m),
            ("b_f", n, 1),
            ("b_i", n, 1),
            ("b_c", n, 1),
            ("b_o", n, 1),
        ],
        Family::Gru => vec![
            ("W_r", n, n + m),
            ("W_z", n, n + m),
            ("W_h", n, n + m),
            ("b_r", n, 1),
            ("b_z", n, 1),
            ("b_h", n, 1),
        ],
        Family::Ltc => vec![
            ("W_gx", n, n),
            ("W_gi", n, m),
            ("b_g", n, 1),
            ("tau_raw", n, 1),
            ("A", n, 1),
        ],
        Family::Cfc => vec![
            ("W_f", n, n + m),
            ("b_f", n, 1),
            ("W_g", n, n + m),
            ("b_g", n, 1),
            ("W_h", n, n + m),
            ("b_h", n, 1),
        ],
        Family::Ssm => vec![("A", n, n), ("B", n, 1), ("w_u", 1, m)],
    }
}

fn head_segments(family: Family, n: usize, o: usize) -> Vec<(&'static str, usize, usize)> {
    match family {
        Family::Rnn | Family::Lstm | Family::Gru => vec![("W_hy", o, n), ("b_y", o, 1)],
        Family::Ltc | Family::Cfc => vec![("W_out", o, n), ("b_out", o, 1)],
        Family::Ssm => vec![("C", o, n)],
    }
}

fn layer_name(l: usize, name: &str) -> String {
    format!("l{l}.{name}")
}

pub fn build_layout(spec: &ModelSpec) -> Result<Layout> {
    let mut layout = Layout::new();
    for l in 0..spec.layers {
        for (name, r, c) in block_segments(spec.family, spec.hidden, spec.layer_input(l)) {
            layout.push(layer_name(l, name), r, c)?;
        }
    }
    for (name, r, c) in head_segments(spec.family, spec.hidden, spec.output) {
        layout.push(name, r, c)?;
    }
    Ok(layout)
}

fn init_segment(rng: &mut Rng, family: Family, short: &str, rows: usize, cols: usize) -> Vec<f64> {
    match (family, short) {
        (_, "tau_raw") => vec![0.0; rows * cols],
        (Family::Ltc, "A") => (0..rows).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
        (Family::Ssm, "A") => {
            let mut a = glorot_init(rng, rows, cols);
            for (k, v) in a.data.iter_mut().enumerate() {
                *v *= 0.5;
                if k / cols == k % cols {
                    *v -= 1.0;
                }
            }
            a.data
        }
        (_, s) if s.starts_with("b_") => vec![0.0; rows * cols],
        _ => glorot_init(rng, rows, cols).data,
    }
}

fn mask_for(spec: &ModelSpec, layout: &Layout, wiring: &NcpWiring) -> Vec<f64> {
    let masks = wiring.masks(spec.output);
    let mut mask = vec![1.0; layout.len()];
    let mut put = |name: &str, m: &Tensor2| {
        let (_, seg) = layout.find(name).expect("wired segment exists");
        mask[seg.range()].copy_from_slice(&m.data);
    };
    match spec.family {
        Family::Ltc => {
            put("l0.W_gx", &masks.recurrent);
            put("l0.W_gi", &masks.input);
        }
        _ => {
            let joint = state_input_mask(&masks);
            put("l0.W_f", &joint);
            put("l0.W_g", &joint);
            put("l0.W_h", &joint);
        }
    }
    if let Some(out) = &masks.output {
        put("W_out", out);
    }
    mask
}

#[derive(Debug, Clone)]
pub struct SequenceModel {
    spec: ModelSpec,
    params: ParamVector,
    mask: Option<Vec<f64>>,
    wiring: Option<NcpWiring>,
}

impl SequenceModel {
    /// Fresh model with parameters drawn from the init stream of `seed`.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let layout = build_layout(&spec)?;
        let mut rng = Rng::new(seed, streams::INIT);
        let mut values = Vec::with_capacity(layout.len());
        for seg in layout.segments() {
            let short = seg.name.rsplit('.').next().unwrap_or(&seg.name);
            values.extend(init_segment(&mut rng, spec.family, short, seg.rows, seg.cols));
        }
        let params = ParamVector::from_values(layout, values)?;
        let mut model = Self {
            spec,
            params,
            mask: None,
            wiring: None,
        };
        if let Some(w) = model.spec.wiring {
            let sizes = NcpSizes {
                sensory: model.spec.input,
                inter: w.inter,
                command: w.command,
                motor: w.motor,
            };
            let wiring = build_ncp_wiring(&mut Rng::new(seed, streams::WIRING), sizes, w.fanouts)?;
            model.mask = Some(mask_for(&model.spec, model.params.layout(), &wiring));
            model.wiring = Some(wiring);
            model.apply_mask();
        }
        Ok(model)
    }

    pub fn from_params(spec: ModelSpec, values: Vec<f64>, seed: u64) -> Result<Self> {
        let mut model = Self::new(spec, seed)?;
        if values.len() != model.params.len() {
            return Err(Error::shape("model parameters", model.params.len(), values.len()));
        }
        model.params.values = values;
        model.apply_mask();
        Ok(model)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn wiring(&self) -> Option<&NcpWiring> {
        self.wiring.as_ref()
    }

    pub fn mask(&self) -> Option<&[f64]> {
        self.mask.as_deref()
    }

    fn apply_mask(&mut self) {
        if let Some(mask) = &self.mask {
            for (v, m) in self.params.values.iter_mut().zip(mask) {
                *v *= m;
            }
        }
    }

    /// Plain-arithmetic copy of the model at `values`.
    pub fn freeze_at(&self, values: &[f64]) -> Result<FrozenModel> {
        if values.len() != self.params.len() {
            return Err(Error::shape("model parameters", self.params.len(), values.len()));
        }
        let masked: Vec<f64> = match &self.mask {
            Some(mask) => values.iter().zip(mask).map(|(v, m)| v * m).collect(),
            None => values.to_vec(),
        };
        let pv = ParamVector::from_values(self.params.layout().clone(), masked)?;
        FrozenModel::build(&self.spec, &pv)
    }

    pub fn freeze(&self) -> Result<FrozenModel> {
        self.freeze_at(&self.params.values)
    }

    pub fn predict(&self, window: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.freeze()?.predict(window)
    }
}

#[derive(Debug, Clone)]
enum Layer {
    Rnn(RnnParams),
    Lstm(LstmParams),
    Gru(GruParams),
    Ltc(LtcParams),
    Cfc(CfcParams),
    Ssm(SsmParams),
}

/// Model with its parameters unpacked into per-layer cell structs.
#[derive(Debug, Clone)]
pub struct FrozenModel {
    spec: ModelSpec,
    layers: Vec<Layer>,
}

fn mat(pv: &ParamVector, name: &str) -> Tensor2 {
    pv.matrix(name).expect("segment exists in layout")
}

fn vec1(pv: &ParamVector, name: &str) -> Tensor1 {
    pv.vector(name).expect("segment exists in layout")
}

impl FrozenModel {
    fn build(spec: &ModelSpec, pv: &ParamVector) -> Result<Self> {
        let mut layers = Vec::with_capacity(spec.layers);
        let n = spec.hidden;
        for l in 0..spec.layers {
            let top = l + 1 == spec.layers;
            let g = |name: &str| mat(pv, &layer_name(l, name));
            let v = |name: &str| vec1(pv, &layer_name(l, name));
            let head = |w: &str, b: Option<&str>| -> (Tensor2, Tensor1) {
                if top {
                    (mat(pv, w), b.map(|b| vec1(pv, b)).unwrap_or_else(|| Tensor1::zeros(0)))
                } else {
                    (Tensor2::zeros(0, n), Tensor1::zeros(0))
                }
            };
            let layer = match spec.family {
                Family::Rnn => {
                    let (w_hy, b_y) = head("W_hy", Some("b_y"));
                    Layer::Rnn(RnnParams {
                        w_xh: g("W_xh"),
                        w_hh: g("W_hh"),
                        b_h: v("b_h"),
                        w_hy,
                        b_y,
                    })
                }
                Family::Lstm => {
                    let (w_hy, b_y) = head("W_hy", Some("b_y"));
                    Layer::Lstm(LstmParams {
                        w_f: g("W_f"),
                        w_i: g("W_i"),
                        w_c: g("W_c"),
                        w_o: g("W_o"),
                        b_f: v("b_f"),
                        b_i: v("b_i"),
                        b_c: v("b_c"),
                        b_o: v("b_o"),
                        w_hy,
                        b_y,
                    })
                }
                Family::Gru => {
                    let (w_hy, b_y) = head("W_hy", Some("b_y"));
                    Layer::Gru(GruParams {
                        w_r: g("W_r"),
                        w_z: g("W_z"),
                        w_h: g("W_h"),
                        b_r: v("b_r"),
                        b_z: v("b_z"),
                        b_h: v("b_h"),
                        w_hy,
                        b_y,
                    })
                }
                Family::Ltc => {
                    let (w_out, b_out) = head("W_out", Some("b_out"));
                    Layer::Ltc(LtcParams {
                        w_gx: g("W_gx"),
                        w_gi: g("W_gi"),
                        b_g: v("b_g"),
                        tau_raw: v("tau_raw"),
                        a: v("A"),
                        w_out,
                        b_out,
                    })
                }
                Family::Cfc => {
                    let (w_out, b_out) = head("W_out", Some("b_out"));
                    Layer::Cfc(CfcParams {
                        w_f: g("W_f"),
                        b_f: v("b_f"),
                        w_g: g("W_g"),
                        b_g: v("b_g"),
                        w_h: g("W_h"),
                        b_h: v("b_h"),
                        w_out,
                        b_out,
                    })
                }
                Family::Ssm => {
                    let (c, _) = head("C", None);
                    Layer::Ssm(SsmParams {
                        a: g("A"),
                        b: v("B"),
                        c,
                        w_u: v("w_u"),
                    })
                }
            };
            layers.push(layer);
        }
        Ok(Self {
            spec: spec.clone(),
            layers,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn advance(&self, layer: &Layer, state: &mut CellState, input: &Tensor1) -> Result<Tensor1> {
        let cfg = &self.spec.solver;
        match layer {
            Layer::Rnn(p) => {
                let (h, y) = rnn_step(p, &state.h, input)?;
                state.h = h;
                Ok(y)
            }
            Layer::Lstm(p) => {
                let (s, y) = lstm_step(p, state, input)?;
                *state = s;
                Ok(y)
            }
            Layer::Gru(p) => {
                let (h, y) = gru_step(p, &state.h, input)?;
                state.h = h;
                Ok(y)
            }
            Layer::Ltc(p) => {
                state.h = match cfg.kind {
                    SolverKind::Fused => {
                        let mut x = state.h.clone();
                        for _ in 0..cfg.substeps {
                            x = ltc_step_fused(p, &x, input, cfg.step())?;
                        }
                        x
                    }
                    _ => integrate_interval_in(
                        &mut Plain,
                        cfg,
                        &mut |_: &mut Plain, x: &Tensor1, _| ltc_rhs(p, x, input),
                        &state.h,
                    )?,
                };
                p.readout(&state.h)
            }
            Layer::Cfc(p) => {
                state.h = cfc_step(p, &state.h, input, self.spec.time_gap)?;
                p.readout(&state.h)
            }
            Layer::Ssm(p) => {
                let u = p.project_input(input)?;
                if cfg.kind == SolverKind::Euler {
                    let mut y = Tensor1::zeros(p.c.rows);
                    for _ in 0..cfg.substeps {
                        let (x, out) = ssm_step(p, &state.h, u, cfg.step())?;
                        state.h = x;
                        y = out;
                    }
                    Ok(y)
                } else {
                    state.h = integrate_interval_in(
                        &mut Plain,
                        cfg,
                        &mut |_: &mut Plain, x: &Tensor1, _| p.rhs(x, u),
                        &state.h,
                    )?;
                    matvec(&p.c, &state.h)
                }
            }
        }
    }

    /// Runs the window from a zero state and returns the readout after the last step.
    pub fn forward(&self, window: &[Vec<f64>]) -> Result<Tensor1> {
        if window.is_empty() {
            return Err(Error::InvalidArgument("empty input window".into()));
        }
        let n = self.spec.hidden;
        let with_cell = self.spec.family == Family::Lstm;
        let mut states: Vec<CellState> = (0..self.layers.len()).map(|_| CellState::zeros(n, with_cell)).collect();
        let mut out = Tensor1::zeros(0);
        for row in window {
            if row.len() != self.spec.input {
                return Err(Error::shape("model input", self.spec.input, row.len()));
            }
            let mut input = Tensor1::new(row.clone());
            for (layer, state) in self.layers.iter().zip(states.iter_mut()) {
                out = self.advance(layer, state, &input)?;
                input = state.h.clone();
            }
        }
        Ok(out)
    }

    /// Mean squared error over every target element of the batch.
    pub fn loss(&self, batch: &[WindowedSample]) -> Result<f64> {
        check_batch(&self.spec, batch)?;
        let mut total = 0.0;
        for s in batch {
            let y = self.forward(&s.window)?;
            total += y.iter().zip(&s.target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>();
        }
        Ok(total / (batch.len() * self.spec.output) as f64)
    }
}

impl Predictor for FrozenModel {
    fn predict(&self, window: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.forward(window).map(|t| t.data)
    }
}

fn check_batch(spec: &ModelSpec, batch: &[WindowedSample]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    for s in batch {
        if s.target.len() != spec.output {
            return Err(Error::shape("batch target", spec.output, s.target.len()));
        }
        if let Some(row) = s.window.iter().find(|r| r.len() != spec.input) {
            return Err(Error::shape("batch window", spec.input, row.len()));
        }
    }
    Ok(())
}

/// Parameter leaves on a tape, masked where the model is wired.
struct TapeParams {
    vars: Vec<Var>,
    leaves: Vec<Var>,
    layout: Layout,
}

impl TapeParams {
    fn new(tape: &mut Tape, params: &ParamVector, mask: Option<&[f64]>) -> Self {
        let layout = params.layout().clone();
        let mut vars = Vec::new();
        let mut leaves = Vec::new();
        for seg in layout.segments() {
            let leaf = tape.leaf_slice(&params.values[seg.range()]);
            leaves.push(leaf);
            let var = match mask {
                Some(m) if m[seg.range()].iter().any(|&x| x != 1.0) => {
                    let mv = tape.leaf_slice(&m[seg.range()]);
                    tape.mul(leaf, mv)
                }
                _ => leaf,
            };
            vars.push(var);
        }
        Self { vars, leaves, layout }
    }

    fn get(&self, name: &str) -> Var {
        let (i, _) = self.layout.find(name).expect("segment exists in layout");
        self.vars[i]
    }

    fn layer(&self, l: usize, name: &str) -> Var {
        self.get(&layer_name(l, name))
    }
}

struct TapeState {
    h: Var,
    c: Option<Var>,
}

fn affine_t(t: &mut Tape, w: Var, rows: usize, cols: usize, x: Var, b: Var) -> Var {
    let wx = t.matvec(w, rows, cols, x);
    t.add(wx, b)
}

/// `1 - a`
fn one_minus(t: &mut Tape, a: Var) -> Var {
    let neg = t.scale(a, -1.0);
    t.offset(neg, 1.0)
}

fn ltc_rhs_t(t: &mut Tape, tp: &TapeParams, l: usize, n: usize, m: usize, x: Var, input: Var) -> (Var, Var) {
    let gx = t.matvec(tp.layer(l, "W_gx"), n, n, x);
    let gi = t.matvec(tp.layer(l, "W_gi"), n, m, input);
    let pre = t.add(gx, gi);
    let pre = t.add(pre, tp.layer(l, "b_g"));
    let g = t.sigmoid(pre);
    let tau = t.softplus(tp.layer(l, "tau_raw"));
    let tau = t.offset(tau, TAU_FLOOR);
    let inv_tau = t.recip(tau);
    let decay = t.add(inv_tau, g);
    let drive = t.mul(g, tp.layer(l, "A"));
    (decay, drive)
}

impl SequenceModel {
    fn tape_layer_step(&self, t: &mut Tape, tp: &TapeParams, l: usize, state: &mut TapeState, input: Var) -> Result<()> {
        let spec = &self.spec;
        let n = spec.hidden;
        let m = spec.layer_input(l);
        let p = |name: &str| tp.layer(l, name);
        match spec.family {
            Family::Rnn => {
                let a = t.matvec(p("W_hh"), n, n, state.h);
                let b = t.matvec(p("W_xh"), n, m, input);
                let pre = t.add(a, b);
                let pre = t.add(pre, p("b_h"));
                state.h = t.tanh(pre);
            }
            Family::Lstm => {
                let hx = t.concat(state.h, input);
                let gate = |t: &mut Tape, w: &str, b: &str| affine_t(t, p(w), n, n + m, hx, p(b));
                let f = gate(t, "W_f", "b_f");
                let f = t.sigmoid(f);
                let i = gate(t, "W_i", "b_i");
                let i = t.sigmoid(i);
                let c_tilde = gate(t, "W_c", "b_c");
                let c_tilde = t.tanh(c_tilde);
                let o = gate(t, "W_o", "b_o");
                let o = t.sigmoid(o);
                let c_prev = state.c.expect("lstm state has a cell vector");
                let keep = t.mul(f, c_prev);
                let write = t.mul(i, c_tilde);
                let c = t.add(keep, write);
                let tc = t.tanh(c);
                state.h = t.mul(o, tc);
                state.c = Some(c);
            }
            Family::Gru => {
                let hx = t.concat(state.h, input);
                let r = affine_t(t, p("W_r"), n, n + m, hx, p("b_r"));
                let r = t.sigmoid(r);
                let z = affine_t(t, p("W_z"), n, n + m, hx, p("b_z"));
                let z = t.sigmoid(z);
                let rh = t.mul(r, state.h);
                let rhx = t.concat(rh, input);
                let h_tilde = affine_t(t, p("W_h"), n, n + m, rhx, p("b_h"));
                let h_tilde = t.tanh(h_tilde);
                let keep = one_minus(t, z);
                let keep = t.mul(keep, state.h);
                let write = t.mul(z, h_tilde);
                state.h = t.add(keep, write);
            }
            Family::Ltc => {
                let cfg = spec.solver;
                if cfg.kind == SolverKind::Fused {
                    let h = cfg.step();
                    for _ in 0..cfg.substeps {
                        let (decay, drive) = ltc_rhs_t(t, tp, l, n, m, state.h, input);
                        let drive = t.scale(drive, h);
                        let num = t.add(state.h, drive);
                        let den = t.scale(decay, h);
                        let den = t.offset(den, 1.0);
                        state.h = t.div(num, den);
                    }
                } else {
                    let mut rhs = |t: &mut Tape, x: &Var, _: f64| {
                        let (decay, drive) = ltc_rhs_t(t, tp, l, n, m, *x, input);
                        let leak = t.mul(decay, *x);
                        Ok(t.sub(drive, leak))
                    };
                    state.h = integrate_interval_in(t, &cfg, &mut rhs, &state.h)?;
                }
            }
            Family::Cfc => {
                let xi = t.concat(state.h, input);
                let f = affine_t(t, p("W_f"), n, n + m, xi, p("b_f"));
                let f = t.softplus(f);
                let g = affine_t(t, p("W_g"), n, n + m, xi, p("b_g"));
                let g = t.tanh(g);
                let hh = affine_t(t, p("W_h"), n, n + m, xi, p("b_h"));
                let hh = t.tanh(hh);
                let ft = t.scale(f, -spec.time_gap);
                let mix = t.sigmoid(ft);
                let rest = one_minus(t, mix);
                let a = t.mul(mix, g);
                let b = t.mul(rest, hh);
                state.h = t.add(a, b);
            }
            Family::Ssm => {
                let u = t.matvec(p("w_u"), 1, m, input);
                let bu = t.matvec(p("B"), n, 1, u);
                let a = p("A");
                let mut rhs = |t: &mut Tape, x: &Var, _: f64| {
                    let ax = t.matvec(a, n, n, *x);
                    let mod_x = t.mul(bu, *x);
                    let s = t.add(ax, mod_x);
                    Ok(t.add(s, bu))
                };
                state.h = integrate_interval_in(t, &spec.solver, &mut rhs, &state.h)?;
            }
        }
        Ok(())
    }

    fn tape_readout(&self, t: &mut Tape, tp: &TapeParams, h: Var) -> Var {
        let (n, o) = (self.spec.hidden, self.spec.output);
        match self.spec.family {
            Family::Rnn | Family::Lstm | Family::Gru => affine_t(t, tp.get("W_hy"), o, n, h, tp.get("b_y")),
            Family::Ltc | Family::Cfc => affine_t(t, tp.get("W_out"), o, n, h, tp.get("b_out")),
            Family::Ssm => t.matvec(tp.get("C"), o, n, h),
        }
    }

    fn tape_forward(&self, t: &mut Tape, tp: &TapeParams, window: &[Vec<f64>]) -> Result<Var> {
        let n = self.spec.hidden;
        let with_cell = self.spec.family == Family::Lstm;
        let mut states: Vec<TapeState> = (0..self.spec.layers)
            .map(|_| TapeState {
                h: t.constant(n, 0.0),
                c: with_cell.then(|| t.constant(n, 0.0)),
            })
            .collect();
        for row in window {
            let mut input = t.leaf_slice(row);
            for (l, state) in states.iter_mut().enumerate() {
                self.tape_layer_step(t, tp, l, state, input)?;
                input = state.h;
            }
        }
        let top = states.last().expect("at least one layer").h;
        Ok(self.tape_readout(t, tp, top))
    }
}

impl Objective for SequenceModel {
    fn params(&self) -> &ParamVector {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    fn loss_at(&self, values: &[f64], batch: &[WindowedSample]) -> Result<f64> {
        self.freeze_at(values)?.loss(batch)
    }

    fn loss_and_grad(&self, batch: &[WindowedSample]) -> Result<(f64, GradVector)> {
        check_batch(&self.spec, batch)?;
        let mut t = Tape::new();
        let tp = TapeParams::new(&mut t, &self.params, self.mask.as_deref());
        let mut terms = Vec::with_capacity(batch.len());
        for s in batch {
            let y = self.tape_forward(&mut t, &tp, &s.window)?;
            terms.push(t.squared_error(y, &s.target));
        }
        let total = t.sum(&terms);
        let loss = t.scale(total, 1.0 / (batch.len() * self.spec.output) as f64);
        let value = t.value(loss)[0];
        if !value.is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        let grads = t.backward(loss);
        let mut grad = self.params.zero_grad();
        for (seg, leaf) in tp.layout.segments().iter().zip(&tp.leaves) {
            if let Some(g) = grads.get(*leaf) {
                grad.values[seg.range()].copy_from_slice(g);
            }
        }
        if grad.values.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        Ok((value, grad))
    }

    fn after_update(&mut self) {
        self.apply_mask();
    }
}

/// Analytic memory footprint of training in bytes: parameters, gradients and
/// both Adam moments, plus the recorded activations of one batch.
pub fn memory_estimate_bytes(spec: &ModelSpec, batch_size: usize, window: usize) -> usize {
    let params = param_count(spec);
    let n = spec.hidden;
    let evals_per_sample = match spec.solver.kind {
        SolverKind::Dopri5 => 7 * 10,
        SolverKind::Rk4 => 4 * spec.solver.substeps,
        _ => spec.solver.substeps,
    };
    let per_step = match spec.family {
        Family::Rnn => 3 * n,
        Family::Lstm => 14 * n + 4 * (2 * n),
        Family::Gru => 12 * n + 3 * (2 * n),
        Family::Cfc => 12 * n + 3 * (2 * n),
        Family::Ltc => 10 * n * evals_per_sample,
        Family::Ssm => 5 * n * evals_per_sample,
    };
    let activations = batch_size * window * spec.layers * (per_step + spec.input);
    8 * (4 * params + activations)
}
