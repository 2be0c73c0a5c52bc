//! Experiment runner: config → data → model → training → evaluation → reports.

pub mod config;
pub mod report;

use serde::{Deserialize, Serialize};

use crate::cells::Family;
use crate::error::{Error, Result};
use crate::graddiff::{grad_check, Objective};
use crate::model::{memory_estimate_bytes, FrozenModel, ModelSpec, SequenceModel};
use crate::numerics::rng::streams;
use crate::numerics::{Rng, Tensor2};
use crate::tasks::{
    add_gaussian_noise_scaled, gen_damped_sine, gen_synthetic_icu, icu_clamp_bounds, load_csv_sequences,
    minmax_apply, minmax_fit, preprocess, rollout_eval, split_by_id, window_dataset, NoiseScale, NormStats,
    Predictor, RolloutReport, SequenceDataset, WindowedSample,
};
use crate::training::{compute_metrics, train_bptt, EpochRecord, Metrics, TrainHistory};

pub use config::{load_config, parse_config, ExperimentConfig, TaskKind};
pub use report::{emit_csv_report, emit_json_summary, emit_reports};

pub const VERSION: &str = concat!("liquid-core ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub split: String,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub sigma: f64,
    pub k: usize,
    pub mae: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub version: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    /// Resolved config in the input format, defaults included.
    pub config_echo: String,
    pub param_count: usize,
    pub memory_estimate_bytes: usize,
    pub train_samples: usize,
    pub epochs: Vec<EpochRecord>,
    pub metrics: Vec<SplitMetrics>,
    pub rollout: Option<RolloutReport>,
    pub robustness: Vec<RobustnessRow>,
}

impl MetricsReport {
    pub fn split(&self, name: &str) -> Option<&Metrics> {
        self.metrics.iter().find(|m| m.split == name).map(|m| &m.metrics)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }
}

/// Normalized splits plus what is needed to perturb them.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub train: SequenceDataset,
    pub val: SequenceDataset,
    pub test: SequenceDataset,
    pub stats: NormStats,
    /// Per-feature noise unit in normalized coordinates.
    pub noise_scales: Vec<f64>,
}

fn build_dataset(cfg: &ExperimentConfig) -> Result<SequenceDataset> {
    let mut rng = Rng::new(cfg.train.seed, streams::DATA);
    match &cfg.task.kind {
        TaskKind::DampedSine(p) => gen_damped_sine(&mut rng, p),
        TaskKind::SyntheticIcu { params, .. } => gen_synthetic_icu(&mut rng, params),
        TaskKind::Csv(c) => load_csv_sequences(&c.path, &c.schema),
    }
}

/// Generates or loads the task data, splits by id, fills, clamps, and
/// normalizes with statistics fitted on the training split.
pub fn prepare_data(cfg: &ExperimentConfig) -> Result<PreparedData> {
    let ds = build_dataset(cfg)?;
    let bounds = match &cfg.task.kind {
        TaskKind::SyntheticIcu { params, clamp: true } => icu_clamp_bounds(params.n_vitals, params.n_interventions),
        _ => Vec::new(),
    };
    let splits = split_by_id(&ds, cfg.train.seed, cfg.task.split)?;
    let train = preprocess(&splits.train, &bounds)?;
    let val = preprocess(&splits.val, &bounds)?;
    let test = preprocess(&splits.test, &bounds)?;
    let stats = minmax_fit(&train);
    let noise_scales = (0..train.n_features())
        .map(|j| {
            if stats.constant[j] {
                return 0.0;
            }
            let range = stats.max[j] - stats.min[j];
            match cfg.sweep.noise_scale {
                NoiseScale::Range => 1.0,
                NoiseScale::Amplitude => stats.min[j].abs().max(stats.max[j].abs()) / range,
            }
        })
        .collect();
    Ok(PreparedData {
        train: minmax_apply(&train, &stats)?,
        val: minmax_apply(&val, &stats)?,
        test: minmax_apply(&test, &stats)?,
        stats,
        noise_scales,
    })
}

/// A trained model with its data and history.
#[derive(Debug, Clone)]
pub struct TrainedExperiment {
    pub spec: ModelSpec,
    pub model: SequenceModel,
    pub frozen: FrozenModel,
    pub history: TrainHistory,
    pub data: PreparedData,
    pub train_samples: usize,
}

pub fn train_experiment(cfg: &ExperimentConfig) -> Result<TrainedExperiment> {
    cfg.validate()?;
    let data = prepare_data(cfg)?;
    let samples = window_dataset(&data.train, cfg.task.window)?;
    let spec = cfg.model_spec(data.train.n_features(), data.train.n_targets());
    let mut model = SequenceModel::new(spec.clone(), cfg.train.seed)?;
    let history = train_bptt(&mut model, &samples, &cfg.train)?;
    let frozen = model.freeze_at(&history.final_params)?;
    Ok(TrainedExperiment {
        spec,
        model,
        frozen,
        history,
        data,
        train_samples: samples.len(),
    })
}

/// Single-step metrics of `predictor` on every window of `samples`.
pub fn evaluate_samples<P: Predictor + ?Sized>(predictor: &P, samples: &[WindowedSample]) -> Result<Metrics> {
    let o = samples.first().map_or(0, |s| s.target.len());
    let mut pred = Vec::with_capacity(samples.len() * o);
    let mut target = Vec::with_capacity(samples.len() * o);
    for s in samples {
        pred.extend(predictor.predict(&s.window)?);
        target.extend_from_slice(&s.target);
    }
    let pred = Tensor2::new(samples.len(), o, pred)?;
    let target = Tensor2::new(samples.len(), o, target)?;
    if !pred.data.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("model predictions"));
    }
    compute_metrics(&pred, &target)
}

fn max_horizon(cfg: &ExperimentConfig) -> usize {
    cfg.sweep.horizons.iter().copied().max().unwrap_or(1)
}

/// `(sigma, k)` rows for every requested sigma and horizon. Each sigma uses a
/// fresh noise stream of the run seed, so sigmas share the same normal draws.
pub fn robustness_grid(cfg: &ExperimentConfig, trained: &TrainedExperiment) -> Result<Vec<RobustnessRow>> {
    let test = &trained.data.test;
    let k_max = max_horizon(cfg);
    let mut rows = Vec::with_capacity(cfg.sweep.sigmas.len() * cfg.sweep.horizons.len());
    for &sigma in &cfg.sweep.sigmas {
        let mut rng = Rng::new(cfg.train.seed, streams::NOISE);
        let noisy = add_gaussian_noise_scaled(&mut rng, test, sigma, &trained.data.noise_scales, cfg.sweep.perturb_exo)?;
        let r = rollout_eval(&trained.frozen, &noisy, test, cfg.task.window, k_max)?;
        for &k in &cfg.sweep.horizons {
            let (_, mae, rmse) = r.per_k[k - 1];
            rows.push(RobustnessRow { sigma, k, mae, rmse });
        }
    }
    Ok(rows)
}

/// Builds the report for a trained experiment; `sweep` adds the robustness grid.
pub fn build_report(cfg: &ExperimentConfig, trained: &TrainedExperiment, sweep: bool) -> Result<MetricsReport> {
    let w = cfg.task.window;
    let mut metrics = Vec::new();
    for (name, ds) in [("train", &trained.data.train), ("val", &trained.data.val), ("test", &trained.data.test)] {
        if ds.is_empty() {
            continue;
        }
        let samples = window_dataset(ds, w)?;
        if samples.len() < 2 {
            continue;
        }
        metrics.push(SplitMetrics {
            split: name.to_string(),
            metrics: evaluate_samples(&trained.frozen, &samples)?,
        });
    }
    let rollout = rollout_eval(&trained.frozen, &trained.data.test, &trained.data.test, w, max_horizon(cfg))?;
    if rollout.per_k.iter().any(|(_, a, b)| !(a.is_finite() && b.is_finite())) {
        return Err(Error::NonFinite("rollout metrics"));
    }
    let robustness = if sweep { robustness_grid(cfg, trained)? } else { Vec::new() };
    let epochs = trained
        .history
        .epochs
        .iter()
        .map(|e| EpochRecord {
            seconds: if cfg.output.record_timing { e.seconds } else { 0.0 },
            ..e.clone()
        })
        .collect();
    Ok(MetricsReport {
        version: VERSION.to_string(),
        seed: cfg.train.seed,
        config: cfg.clone(),
        config_echo: cfg.to_ini(),
        param_count: trained.model.param_count(),
        memory_estimate_bytes: memory_estimate_bytes(&trained.spec, cfg.train.batch_size, w),
        train_samples: trained.train_samples,
        epochs,
        metrics,
        rollout: Some(rollout),
        robustness,
    })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let trained = train_experiment(cfg)?;
    build_report(cfg, &trained, false)
}

pub fn run_robustness_sweep(cfg: &ExperimentConfig) -> Result<MetricsReport> {
    let trained = train_experiment(cfg)?;
    build_report(cfg, &trained, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub family: Family,
    pub solver: String,
    pub hidden: usize,
    pub param_count: usize,
    pub epochs: usize,
    pub median_epoch_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingComparison {
    pub a: TimingEntry,
    pub b: TimingEntry,
    /// `a` median over `b` median.
    pub ratio: f64,
}

pub const MIN_PROFILE_EPOCHS: usize = 5;

fn time_one(cfg: &ExperimentConfig) -> Result<TimingEntry> {
    if cfg.train.epochs < MIN_PROFILE_EPOCHS {
        return Err(Error::InvalidArgument(format!(
            "timing needs at least {MIN_PROFILE_EPOCHS} epochs, got {}",
            cfg.train.epochs
        )));
    }
    let trained = train_experiment(cfg)?;
    Ok(TimingEntry {
        family: cfg.model.family,
        solver: cfg.solver.kind.to_string(),
        hidden: cfg.model.hidden,
        param_count: trained.model.param_count(),
        epochs: trained.history.epochs.len(),
        median_epoch_seconds: trained.history.median_epoch_seconds(),
    })
}

/// Trains both configs and compares their median epoch wall time.
pub fn profile_timing(cfg_a: &ExperimentConfig, cfg_b: &ExperimentConfig) -> Result<TimingComparison> {
    if cfg_a.task != cfg_b.task || cfg_a.train.seed != cfg_b.train.seed {
        return Err(Error::InvalidArgument(
            "profiled configs must share the same [task] section and seed".into(),
        ));
    }
    let a = time_one(cfg_a)?;
    let b = time_one(cfg_b)?;
    let ratio = a.median_epoch_seconds / b.median_epoch_seconds;
    Ok(TimingComparison { a, b, ratio })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckResult {
    pub family: Family,
    pub seeds: usize,
    pub max_relative_error: f64,
}

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Finite-difference check of a small model of `family` on random windows,
/// worst case over `seeds` seeds. Parameters are moved off their init so
/// every segment carries gradient.
pub fn gradcheck_family(family: Family, seeds: u64) -> Result<GradcheckResult> {
    let (input, hidden, output, window, batch) = (3, 6, 2, 8, 3);
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let spec = ModelSpec::new(family, input, hidden, output);
        let mut model = SequenceModel::new(spec, seed)?;
        let mut rng = Rng::new(seed, streams::DATA);
        for v in model.params_mut().values.iter_mut() {
            *v += rng.uniform_range(-0.3, 0.3);
        }
        model.after_update();
        let samples: Vec<WindowedSample> = (0..batch)
            .map(|_| WindowedSample {
                window: (0..window)
                    .map(|_| (0..input).map(|_| rng.uniform_range(-1.0, 1.0)).collect())
                    .collect(),
                target: (0..output).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
            })
            .collect();
        worst = worst.max(grad_check(&model, &samples)?);
    }
    Ok(GradcheckResult {
        family,
        seeds: seeds as usize,
        max_relative_error: worst,
    })
}

/// Process exit code for an error: 2 config, 3 numerical, 4 I/O or data.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::Shape { .. } => 2,
        Error::NonFinite(_) | Error::Divergence { .. } | Error::Stiffness { .. } => 3,
        Error::Io { .. } | Error::Data(_) => 4,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(family: &str, extra: &str) -> ExperimentConfig {
        parse_config(&format!(
            "[model]\nfamily = {family}\nhidden = 6\n[task]\nkind = synthetic_icu\nn_patients = 12\nsteps = 20\nn_vitals = 4\nn_interventions = 1\nwindow = 5\n[train]\nepochs = 2\nbatch_size = 16\nlr = 0.01\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn report_counts_and_dims() {
        let cfg = small("gru", "");
        let report = run_robustness_sweep(&cfg).unwrap();
        assert_eq!(report.epochs.len(), 2);
        assert!(report.epochs.iter().all(|e| e.seconds == 0.0));
        assert_eq!(report.param_count, crate::model::param_count(&cfg.model_spec(5, 4)));
        let rollout = report.rollout.as_ref().unwrap();
        assert_eq!(rollout.per_k.len(), 5);
        assert_eq!(report.robustness.len(), 4 * 4);
        let sigmas: Vec<f64> = report.robustness.iter().map(|r| r.sigma).collect();
        assert_eq!(&sigmas[..4], &[0.0; 4]);
        for row in report.robustness.iter().filter(|r| r.sigma == 0.0) {
            assert_eq!((row.mae, row.rmse), (rollout.per_k[row.k - 1].1, rollout.per_k[row.k - 1].2));
        }
        assert!(report.split("test").unwrap().rmse.is_finite());
    }

    #[test]
    fn lr_zero_matches_untrained_baseline() {
        let cfg = small("cfc", "");
        let mut frozen_cfg = cfg.clone();
        frozen_cfg.train.lr = 0.0;
        let trained = train_experiment(&frozen_cfg).unwrap();
        let baseline = SequenceModel::new(trained.spec.clone(), cfg.train.seed).unwrap().freeze().unwrap();
        let samples = window_dataset(&trained.data.test, cfg.task.window).unwrap();
        assert_eq!(
            evaluate_samples(&trained.frozen, &samples).unwrap(),
            evaluate_samples(&baseline, &samples).unwrap()
        );
    }

    #[test]
    fn deterministic_reports() {
        let cfg = small("ltc", "[solver]\nsubsteps = 2\n");
        assert_eq!(run_experiment(&cfg).unwrap(), run_experiment(&cfg).unwrap());
    }

    #[test]
    fn profile_requires_matching_tasks_and_epochs() {
        let a = small("gru", "");
        let mut b = small("lstm", "");
        assert!(profile_timing(&a, &b).is_err());
        b.train.seed = 5;
        let mut a5 = a.clone();
        a5.train.epochs = 5;
        assert!(profile_timing(&a5, &b).is_err());
    }

    #[test]
    fn gradcheck_all_families() {
        for family in Family::ALL {
            let r = gradcheck_family(family, 2).unwrap();
            assert!(r.max_relative_error < GRADCHECK_TOLERANCE, "{family}: {}", r.max_relative_error);
        }
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config { line: 1, msg: String::new() }), 2);
        assert_eq!(exit_code(&Error::Divergence { epoch: 0, loss: f64::NAN }), 3);
        assert_eq!(exit_code(&Error::Stiffness { t: 0.0, h: 0.0 }), 3);
        assert_eq!(exit_code(&Error::Data(String::new())), 4);
    }

    #[test]
    fn amplitude_noise_scale_in_normalized_units() {
        let cfg = parse_config("[model]\nfamily = gru\nhidden = 4\n[task]\nkind = damped_sine\nlambda = 0\nomega = 1\nsteps = 100\n").unwrap();
        let data = prepare_data(&cfg).unwrap();
        let range = data.stats.max[0] - data.stats.min[0];
        assert!((data.noise_scales[0] * range - data.stats.max[0].abs().max(data.stats.min[0].abs())).abs() < 1e-15);
        assert!((data.noise_scales[0] - 0.5).abs() < 0.01);
    }
}
