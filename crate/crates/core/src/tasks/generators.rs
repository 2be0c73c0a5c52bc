//! Synthetic datasets: phase-jittered damped sines and an ICU-style cohort of
//! mean-reverting vitals driven by on/off interventions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Rng;

use super::SequenceDataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampedSineParams {
    pub n_sequences: usize,
    pub steps: usize,
    pub dt: f64,
    pub lambda: f64,
    pub omega: f64,
    /// Phases are drawn uniformly from `[-phase_jitter, phase_jitter]`.
    pub phase_jitter: f64,
}

impl Default for DampedSineParams {
    fn default() -> Self {
        Self {
            n_sequences: 10,
            steps: 200,
            dt: 0.1,
            lambda: 0.05,
            omega: 1.0,
            phase_jitter: std::f64::consts::PI,
        }
    }
}

/// `y(t) = exp(-lambda t) sin(omega t + phi)` sampled at `t = k dt`.
pub fn gen_damped_sine(rng: &mut Rng, p: &DampedSineParams) -> Result<SequenceDataset> {
    if !(p.lambda >= 0.0) || !(p.omega > 0.0) || !(p.dt > 0.0) || !(p.phase_jitter >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "damped sine needs lambda >= 0, omega > 0, dt > 0, phase_jitter >= 0; got {p:?}"
        )));
    }
    if p.n_sequences == 0 || p.steps == 0 {
        return Err(Error::InvalidArgument("damped sine needs at least one sequence and step".into()));
    }
    let mut ids = Vec::with_capacity(p.n_sequences);
    let mut sequences = Vec::with_capacity(p.n_sequences);
    for n in 0..p.n_sequences {
        let phi = rng.uniform_range(-p.phase_jitter, p.phase_jitter);
        ids.push(format!("sine-{n:04}"));
        sequences.push(
            (0..p.steps)
                .map(|k| {
                    let t = k as f64 * p.dt;
                    vec![(-p.lambda * t).exp() * (p.omega * t + phi).sin()]
                })
                .collect(),
        );
    }
    SequenceDataset::new(ids, sequences, vec!["y".into()], vec![false], p.dt)
}

struct Vital {
    name: &'static str,
    equilibrium: f64,
    scale: f64,
    bounds: (f64, f64),
}

const fn vital(name: &'static str, equilibrium: f64, scale: f64, lo: f64, hi: f64) -> Vital {
    Vital {
        name,
        equilibrium,
        scale,
        bounds: (lo, hi),
    }
}

const VITALS: [Vital; 18] = [
    vital("heart_rate", 85.0, 12.0, 20.0, 250.0),
    vital("sbp", 120.0, 15.0, 40.0, 250.0),
    vital("dbp", 65.0, 10.0, 20.0, 150.0),
    vital("map", 85.0, 10.0, 30.0, 180.0),
    vital("resp_rate", 18.0, 4.0, 4.0, 60.0),
    vital("spo2", 96.0, 2.0, 50.0, 100.0),
    vital("temperature", 37.0, 0.6, 32.0, 43.0),
    vital("glucose", 130.0, 30.0, 20.0, 800.0),
    vital("sodium", 139.0, 3.0, 110.0, 170.0),
    vital("potassium", 4.1, 0.4, 1.5, 8.0),
    vital("chloride", 104.0, 4.0, 70.0, 140.0),
    vital("bicarbonate", 24.0, 3.0, 5.0, 45.0),
    vital("bun", 20.0, 8.0, 1.0, 200.0),
    vital("creatinine", 1.1, 0.4, 0.1, 15.0),
    vital("hemoglobin", 10.5, 1.5, 3.0, 20.0),
    vital("wbc", 10.0, 3.0, 0.1, 100.0),
    vital("platelets", 200.0, 50.0, 5.0, 1000.0),
    vital("lactate", 1.8, 0.7, 0.2, 20.0),
];

/// Intervention name and its equilibrium shifts `(vital index, shift in scale units)`.
const INTERVENTIONS: [(&str, &[(usize, f64)]); 3] = [
    ("vasopressor", &[(1, 1.5), (2, 1.2), (3, 1.5), (0, 0.5)]),
    ("fluids", &[(3, 0.8), (0, -0.8), (8, -0.6), (17, -0.7)]),
    ("insulin", &[(7, -1.8), (9, -0.8)]),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcuParams {
    pub n_patients: usize,
    pub steps: usize,
    pub n_vitals: usize,
    pub n_interventions: usize,
    /// Hours per bin.
    pub dt: f64,
    /// Per-step pull of each vital toward its (shifted) equilibrium.
    pub reversion: f64,
    /// Per-step innovation standard deviation, in scale units.
    pub noise: f64,
    /// Pull of each vital toward its predecessor in a ring.
    pub coupling: f64,
    pub p_on: f64,
    pub p_off: f64,
    /// Fraction of vital readings replaced by NaN.
    pub missing_rate: f64,
}

impl Default for IcuParams {
    fn default() -> Self {
        Self {
            n_patients: 100,
            steps: 30,
            n_vitals: 18,
            n_interventions: 3,
            dt: 12.0,
            reversion: 0.3,
            noise: 0.3,
            coupling: 0.05,
            p_on: 0.1,
            p_off: 0.3,
            missing_rate: 0.0,
        }
    }
}

fn vital_info(k: usize) -> (String, f64, f64, Option<(f64, f64)>) {
    match VITALS.get(k) {
        Some(v) => (v.name.to_string(), v.equilibrium, v.scale, Some(v.bounds)),
        None => (format!("vital_{k}"), 0.0, 1.0, None),
    }
}

/// Configured equilibrium of vital `k`.
pub fn icu_equilibrium(k: usize) -> f64 {
    vital_info(k).1
}

/// Physiological clamp range per feature (vitals first, then interventions).
pub fn icu_clamp_bounds(n_vitals: usize, n_interventions: usize) -> Vec<Option<(f64, f64)>> {
    (0..n_vitals)
        .map(|k| vital_info(k).3)
        .chain((0..n_interventions).map(|_| Some((0.0, 1.0))))
        .collect()
}

fn intervention_effects(i: usize, n_vitals: usize) -> (String, Vec<(usize, f64)>) {
    match INTERVENTIONS.get(i) {
        Some((name, effects)) => (
            name.to_string(),
            effects.iter().copied().filter(|(k, _)| *k < n_vitals).collect(),
        ),
        None => (format!("intervention_{i}"), vec![(i % n_vitals, 1.0)]),
    }
}

/// Coupled mean-reverting vitals in standardized units `z`, with
/// `x = equilibrium + scale * z`:
///
/// ```text
/// z' = z + r (shift(u) - z) + c (z_prev_vital - z) + noise * N(0, 1)
/// ```
///
/// Interventions `u` are two-state Markov chains and enter as exogenous features.
pub fn gen_synthetic_icu(rng: &mut Rng, p: &IcuParams) -> Result<SequenceDataset> {
    if p.n_patients == 0 || p.steps == 0 || p.n_vitals == 0 {
        return Err(Error::InvalidArgument(
            "synthetic ICU needs at least one patient, step and vital".into(),
        ));
    }
    let probs_ok = [p.p_on, p.p_off, p.missing_rate].iter().all(|q| (0.0..=1.0).contains(q));
    if !probs_ok || !(p.reversion > 0.0 && p.reversion <= 1.0) || !(p.noise >= 0.0) || !(p.coupling >= 0.0) {
        return Err(Error::InvalidArgument(format!("invalid synthetic ICU parameters {p:?}")));
    }
    let nv = p.n_vitals;
    let info: Vec<_> = (0..nv).map(vital_info).collect();
    let effects: Vec<_> = (0..p.n_interventions).map(|i| intervention_effects(i, nv)).collect();

    let mut ids = Vec::with_capacity(p.n_patients);
    let mut sequences = Vec::with_capacity(p.n_patients);
    for patient in 0..p.n_patients {
        let mut z: Vec<f64> = (0..nv).map(|_| rng.standard_normal()).collect();
        let mut u = vec![false; p.n_interventions];
        let mut seq = Vec::with_capacity(p.steps);
        for _ in 0..p.steps {
            let mut row: Vec<f64> = (0..nv).map(|k| info[k].1 + info[k].2 * z[k]).collect();
            row.extend(u.iter().map(|&on| if on { 1.0 } else { 0.0 }));
            seq.push(row);

            let mut shift = vec![0.0; nv];
            for (i, (_, eff)) in effects.iter().enumerate() {
                if u[i] {
                    for &(k, s) in eff {
                        shift[k] += s;
                    }
                }
            }
            let prev = z.clone();
            for k in 0..nv {
                let neighbour = prev[(k + nv - 1) % nv];
                z[k] = prev[k]
                    + p.reversion * (shift[k] - prev[k])
                    + p.coupling * (neighbour - prev[k])
                    + p.noise * rng.standard_normal();
            }
            for on in u.iter_mut() {
                *on = if *on { !rng.bernoulli(p.p_off) } else { rng.bernoulli(p.p_on) };
            }
        }
        if p.missing_rate > 0.0 {
            for row in seq.iter_mut() {
                for v in row.iter_mut().take(nv) {
                    if rng.bernoulli(p.missing_rate) {
                        *v = f64::NAN;
                    }
                }
            }
        }
        ids.push(format!("patient-{patient:05}"));
        sequences.push(seq);
    }

    let mut names: Vec<String> = info.into_iter().map(|i| i.0).collect();
    names.extend(effects.into_iter().map(|e| e.0));
    let mut exo = vec![false; nv];
    exo.extend(std::iter::repeat_n(true, p.n_interventions));
    SequenceDataset::new(ids, sequences, names, exo, p.dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::streams;
    use crate::tasks::window_dataset;

    #[test]
    fn sine_starts_at_zero_without_phase() {
        let p = DampedSineParams {
            phase_jitter: 0.0,
            n_sequences: 2,
            ..DampedSineParams::default()
        };
        let ds = gen_damped_sine(&mut Rng::new(0, streams::DATA), &p).unwrap();
        assert_eq!(ds.sequences[0][0][0], 0.0);
        assert_eq!(ds.steps(), 200);
    }

    #[test]
    fn sine_envelope_bound() {
        let p = DampedSineParams::default();
        let ds = gen_damped_sine(&mut Rng::new(3, streams::DATA), &p).unwrap();
        for seq in &ds.sequences {
            for (k, row) in seq.iter().enumerate() {
                let t = k as f64 * p.dt;
                assert!(row[0].abs() <= (-p.lambda * t).exp());
            }
        }
    }

    #[test]
    fn undamped_sine_zero_crossings() {
        // omega = 2 gives roots at t = k pi / 2; sample on a grid that hits them.
        let p = DampedSineParams {
            n_sequences: 1,
            steps: 41,
            dt: std::f64::consts::PI / 8.0,
            lambda: 0.0,
            omega: 2.0,
            phase_jitter: 0.0,
        };
        let ds = gen_damped_sine(&mut Rng::new(0, 0), &p).unwrap();
        for (k, row) in ds.sequences[0].iter().enumerate() {
            if k % 4 == 0 {
                assert!(row[0].abs() < 1e-12, "k={k}: {}", row[0]);
            } else {
                assert!(row[0].abs() > 0.3);
            }
        }
    }

    #[test]
    fn sine_rejects_bad_params() {
        let p = DampedSineParams {
            omega: 0.0,
            ..DampedSineParams::default()
        };
        assert!(gen_damped_sine(&mut Rng::new(0, 0), &p).is_err());
    }

    #[test]
    fn icu_long_run_mean_without_interventions() {
        let p = IcuParams {
            n_patients: 40,
            steps: 400,
            n_interventions: 0,
            ..IcuParams::default()
        };
        let ds = gen_synthetic_icu(&mut Rng::new(1, streams::DATA), &p).unwrap();
        for k in 0..p.n_vitals {
            let burn = 50;
            let vals: Vec<f64> = ds.sequences.iter().flat_map(|s| s[burn..].iter().map(|r| r[k])).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let eq = icu_equilibrium(k);
            assert!((mean - eq).abs() <= 0.05 * eq.abs(), "{}: {mean} vs {eq}", ds.feature_names[k]);
        }
    }

    #[test]
    fn icu_interventions_are_exogenous_and_binary() {
        let ds = gen_synthetic_icu(&mut Rng::new(2, streams::DATA), &IcuParams::default()).unwrap();
        assert_eq!(ds.n_features(), 21);
        assert_eq!(ds.n_targets(), 18);
        assert_eq!(ds.dt, 12.0);
        for seq in &ds.sequences {
            for row in seq {
                assert!(row[18..].iter().all(|&v| v == 0.0 || v == 1.0));
            }
        }
        let samples = window_dataset(&ds, 5).unwrap();
        assert!(samples.iter().all(|s| s.target.len() == 18));
        let ever_on = ds.sequences.iter().any(|s| s.iter().any(|r| r[18] == 1.0));
        assert!(ever_on);
    }

    #[test]
    fn icu_is_deterministic() {
        let a = gen_synthetic_icu(&mut Rng::new(5, streams::DATA), &IcuParams::default()).unwrap();
        let b = gen_synthetic_icu(&mut Rng::new(5, streams::DATA), &IcuParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn icu_missing_values_only_in_vitals() {
        let p = IcuParams {
            missing_rate: 0.2,
            n_patients: 5,
            ..IcuParams::default()
        };
        let ds = gen_synthetic_icu(&mut Rng::new(6, streams::DATA), &p).unwrap();
        let missing = ds.sequences.iter().flatten().flat_map(|r| r[..18].iter()).filter(|v| v.is_nan()).count();
        assert!(missing > 0);
        assert!(ds.sequences.iter().flatten().all(|r| r[18..].iter().all(|v| !v.is_nan())));
    }
}
