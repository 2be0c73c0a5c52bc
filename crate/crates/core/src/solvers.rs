//! Explicit ODE integrators: Euler, classical RK4 and adaptive Dormand–Prince 5(4).
//!
//! Each integrator is written once against [`StateAlgebra`], so the same code
//! advances plain vectors at inference time and records differentiable
//! nodes on a [`Tape`] during training.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graddiff::{Tape, Var};
use crate::numerics::Tensor1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Euler,
    Rk4,
    Dopri5,
    /// Semi-implicit LTC update; not a generic integrator.
    Fused,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Euler => "euler",
            SolverKind::Rk4 => "rk4",
            SolverKind::Dopri5 => "dopri5",
            SolverKind::Fused => "fused",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(SolverKind::Euler),
            "rk4" => Ok(SolverKind::Rk4),
            "dopri5" => Ok(SolverKind::Dopri5),
            "fused" => Ok(SolverKind::Fused),
            _ => Err(Error::InvalidArgument(format!(
                "unknown solver '{s}' (expected euler, rk4, dopri5 or fused)"
            ))),
        }
    }
}

pub const DEFAULT_RTOL: f64 = 1e-3;
pub const DEFAULT_ATOL: f64 = 1e-6;

/// `dt` is the time elapsed between consecutive input samples; fixed-step
/// kinds cover it in `substeps` equal steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub dt: f64,
    pub substeps: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl SolverConfig {
    pub fn new(kind: SolverKind) -> Self {
        Self {
            kind,
            dt: 1.0,
            substeps: 1,
            rtol: DEFAULT_RTOL,
            atol: DEFAULT_ATOL,
        }
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("solver dt must be > 0, got {}", self.dt)));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidArgument("solver substeps must be >= 1".into()));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "solver tolerances must be > 0, got rtol={} atol={}",
                self.rtol, self.atol
            )));
        }
        Ok(())
    }

    /// Length of one fixed step.
    pub fn step(&self) -> f64 {
        self.dt / self.substeps as f64
    }
}

/// Linear combinations of states, the only operation the integrators need.
pub trait StateAlgebra {
    type State: Clone;

    fn combine(&mut self, terms: &[(&Self::State, f64)]) -> Self::State;

    fn values<'a>(&'a self, s: &'a Self::State) -> &'a [f64];
}

/// Plain vector arithmetic.
#[derive(Debug, Default, Clone, Copy)]
pub struct Plain;

impl StateAlgebra for Plain {
    type State = Tensor1;

    fn combine(&mut self, terms: &[(&Tensor1, f64)]) -> Tensor1 {
        let mut out = vec![0.0; terms[0].0.len()];
        for (v, c) in terms {
            for (o, x) in out.iter_mut().zip(v.iter()) {
                *o += c * x;
            }
        }
        Tensor1::new(out)
    }

    fn values<'a>(&'a self, s: &'a Tensor1) -> &'a [f64] {
        s.as_slice()
    }
}

impl StateAlgebra for Tape {
    type State = Var;

    fn combine(&mut self, terms: &[(&Var, f64)]) -> Var {
        let flat: Vec<(Var, f64)> = terms.iter().map(|(v, c)| (**v, *c)).collect();
        self.lincomb(&flat)
    }

    fn values<'a>(&'a self, s: &'a Var) -> &'a [f64] {
        self.value(*s)
    }
}

fn checked<A: StateAlgebra>(alg: &A, s: A::State, what: &'static str) -> Result<A::State> {
    if alg.values(&s).iter().all(|v| v.is_finite()) {
        Ok(s)
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("step size must be > 0, got {dt}")))
    }
}

pub fn euler_step_in<A, F>(alg: &mut A, rhs: &mut F, x: &A::State, t: f64, dt: f64) -> Result<A::State>
where
    A: StateAlgebra,
    F: FnMut(&mut A, &A::State, f64) -> Result<A::State>,
{
    check_dt(dt)?;
    let k = rhs(alg, x, t)?;
    let k = checked(alg, k, "euler rhs")?;
    Ok(alg.combine(&[(x, 1.0), (&k, dt)]))
}

pub fn rk4_step_in<A, F>(alg: &mut A, rhs: &mut F, x: &A::State, t: f64, dt: f64) -> Result<A::State>
where
    A: StateAlgebra,
    F: FnMut(&mut A, &A::State, f64) -> Result<A::State>,
{
    check_dt(dt)?;
    let half = 0.5 * dt;
    let k1 = rhs(alg, x, t)?;
    let k1 = checked(alg, k1, "rk4 stage")?;
    let x2 = alg.combine(&[(x, 1.0), (&k1, half)]);
    let k2 = rhs(alg, &x2, t + half)?;
    let k2 = checked(alg, k2, "rk4 stage")?;
    let x3 = alg.combine(&[(x, 1.0), (&k2, half)]);
    let k3 = rhs(alg, &x3, t + half)?;
    let k3 = checked(alg, k3, "rk4 stage")?;
    let x4 = alg.combine(&[(x, 1.0), (&k3, dt)]);
    let k4 = rhs(alg, &x4, t + dt)?;
    let k4 = checked(alg, k4, "rk4 stage")?;
    let s = dt / 6.0;
    Ok(alg.combine(&[(x, 1.0), (&k1, s), (&k2, 2.0 * s), (&k3, 2.0 * s), (&k4, s)]))
}

/// `x + dt * f(x, t)`.
pub fn euler_step<F>(mut rhs: F, x: &Tensor1, t: f64, dt: f64) -> Result<Tensor1>
where
    F: FnMut(&Tensor1, f64) -> Result<Tensor1>,
{
    euler_step_in(&mut Plain, &mut |_: &mut Plain, x: &Tensor1, t| rhs(x, t), x, t, dt)
}

pub fn rk4_step<F>(mut rhs: F, x: &Tensor1, t: f64, dt: f64) -> Result<Tensor1>
where
    F: FnMut(&Tensor1, f64) -> Result<Tensor1>,
{
    rk4_step_in(&mut Plain, &mut |_: &mut Plain, x: &Tensor1, t| rhs(x, t), x, t, dt)
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
/// Fifth-order weights; also the last stage row (first same as last).
const B5: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
/// Fifth- minus fourth-order weights, over all seven stages.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 5.0;
const PI_BETA: f64 = 0.04;
const PI_ALPHA: f64 = 0.2 - 0.75 * PI_BETA;
const MAX_STEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dopri5Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

/// Proportional-integral step-size control.
#[derive(Debug, Clone, Copy)]
struct StepController {
    err_prev: f64,
}

impl StepController {
    fn new() -> Self {
        Self { err_prev: 1e-4 }
    }

    /// Returns whether the step is accepted and the factor for the next step.
    fn judge(&mut self, err: f64) -> (bool, f64) {
        if err <= 1.0 {
            let factor = if err == 0.0 {
                MAX_FACTOR
            } else {
                (SAFETY * err.powf(-PI_ALPHA) * self.err_prev.powf(PI_BETA)).clamp(MIN_FACTOR, MAX_FACTOR)
            };
            self.err_prev = err.max(1e-4);
            (true, factor)
        } else {
            let factor = (SAFETY * err.powf(-PI_ALPHA)).clamp(MIN_FACTOR, 1.0);
            (false, factor)
        }
    }
}

/// RMS of `err_i / (atol + rtol * max(|x_i|, |x_new_i|))`.
fn error_norm(err: &[f64], x: &[f64], x_new: &[f64], rtol: f64, atol: f64) -> f64 {
    if err.is_empty() {
        return 0.0;
    }
    let sum: f64 = err
        .iter()
        .zip(x.iter().zip(x_new))
        .map(|(e, (a, b))| {
            let scale = atol + rtol * a.abs().max(b.abs());
            (e / scale).powi(2)
        })
        .sum();
    (sum / err.len() as f64).sqrt()
}

/// Adaptive integration of `x' = f(x, t)` from `t0` to `t1`.
///
/// Step sizes are chosen from state values only, so on a tape the result is
/// differentiated through the accepted steps with the step schedule held fixed.
pub fn dopri5_integrate_in<A, F>(
    alg: &mut A,
    rhs: &mut F,
    x0: &A::State,
    t0: f64,
    t1: f64,
    rtol: f64,
    atol: f64,
) -> Result<(A::State, Dopri5Stats)>
where
    A: StateAlgebra,
    F: FnMut(&mut A, &A::State, f64) -> Result<A::State>,
{
    if !(t1 > t0) {
        return Err(Error::InvalidArgument(format!("dopri5 needs t1 > t0, got [{t0}, {t1}]")));
    }
    if !(rtol > 0.0 && atol > 0.0) {
        return Err(Error::InvalidArgument("dopri5 tolerances must be > 0".into()));
    }
    let span = t1 - t0;
    let min_step = 1e-12 * span;
    let mut stats = Dopri5Stats::default();
    let mut ctl = StepController::new();
    let mut t = t0;
    let mut h = span / 100.0;
    let mut x = x0.clone();
    let k1 = rhs(alg, &x, t)?;
    let mut k1 = checked(alg, k1, "dopri5 stage")?;
    stats.rhs_evals += 1;

    while t < t1 {
        if stats.accepted + stats.rejected >= MAX_STEPS {
            return Err(Error::Stiffness { t, h });
        }
        let last = t + h >= t1 || t1 - (t + h) < min_step;
        if last {
            h = t1 - t;
        }
        if h < min_step {
            return Err(Error::Stiffness { t, h });
        }

        let mut k = Vec::with_capacity(7);
        k.push(k1.clone());
        let rows: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
        for (s, row) in rows.iter().enumerate() {
            let mut terms: Vec<(&A::State, f64)> = vec![(&x, 1.0)];
            terms.extend(row.iter().zip(&k).map(|(a, ki)| (ki, h * a)));
            let xs = alg.combine(&terms);
            let ks = rhs(alg, &xs, t + C[s + 1] * h)?;
            k.push(checked(alg, ks, "dopri5 stage")?);
        }
        let mut terms: Vec<(&A::State, f64)> = vec![(&x, 1.0)];
        terms.extend(B5.iter().zip(&k).map(|(b, ki)| (ki, h * b)));
        let x_new = alg.combine(&terms);
        let k7 = rhs(alg, &x_new, t + h)?;
        let k7 = checked(alg, k7, "dopri5 stage")?;
        stats.rhs_evals += 6;

        let dim = alg.values(&x).len();
        let mut err = vec![0.0; dim];
        for (e, ki) in E.iter().zip(k.iter().chain(std::iter::once(&k7))) {
            if *e != 0.0 {
                for (acc, v) in err.iter_mut().zip(alg.values(ki)) {
                    *acc += h * e * v;
                }
            }
        }
        let norm = error_norm(&err, alg.values(&x), alg.values(&x_new), rtol, atol);
        if !norm.is_finite() {
            return Err(Error::NonFinite("dopri5 error estimate"));
        }

        let (accept, factor) = ctl.judge(norm);
        if accept {
            stats.accepted += 1;
            t = if last { t1 } else { t + h };
            x = x_new;
            k1 = k7;
        } else {
            stats.rejected += 1;
        }
        h *= factor;
    }
    Ok((x, stats))
}

pub fn dopri5_integrate_with_stats<F>(
    mut rhs: F,
    x0: &Tensor1,
    t0: f64,
    t1: f64,
    rtol: f64,
    atol: f64,
) -> Result<(Tensor1, Dopri5Stats)>
where
    F: FnMut(&Tensor1, f64) -> Result<Tensor1>,
{
    dopri5_integrate_in(
        &mut Plain,
        &mut |_: &mut Plain, x: &Tensor1, t| rhs(x, t),
        x0,
        t0,
        t1,
        rtol,
        atol,
    )
}

pub fn dopri5_integrate<F>(rhs: F, x0: &Tensor1, t0: f64, t1: f64, rtol: f64, atol: f64) -> Result<Tensor1>
where
    F: FnMut(&Tensor1, f64) -> Result<Tensor1>,
{
    dopri5_integrate_with_stats(rhs, x0, t0, t1, rtol, atol).map(|(x, _)| x)
}

/// Advances one sample interval with a generic integrator.
pub fn integrate_interval_in<A, F>(
    alg: &mut A,
    cfg: &SolverConfig,
    rhs: &mut F,
    x: &A::State,
) -> Result<A::State>
where
    A: StateAlgebra,
    F: FnMut(&mut A, &A::State, f64) -> Result<A::State>,
{
    match cfg.kind {
        SolverKind::Euler | SolverKind::Rk4 => {
            let h = cfg.step();
            let mut state = x.clone();
            for s in 0..cfg.substeps {
                let t = s as f64 * h;
                state = if cfg.kind == SolverKind::Euler {
                    euler_step_in(alg, rhs, &state, t, h)?
                } else {
                    rk4_step_in(alg, rhs, &state, t, h)?
                };
            }
            Ok(state)
        }
        SolverKind::Dopri5 => dopri5_integrate_in(alg, rhs, x, 0.0, cfg.dt, cfg.rtol, cfg.atol).map(|(s, _)| s),
        SolverKind::Fused => Err(Error::InvalidArgument(
            "the fused solver is specific to LTC cells".into(),
        )),
    }
}
