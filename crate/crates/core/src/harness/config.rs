//! Experiment configuration: `[section]` headers, `key = value` lines and `#` comments.
//!
//! ```text
//! [model]
//! family = gru
//! hidden = 32
//!
//! [task]
//! kind = damped_sine
//! ```
//!
//! Every omitted key takes a default; [`ExperimentConfig::to_ini`] writes the
//! fully resolved form, which parses back to the same config.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cells::{Family, NcpFanouts};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, WiringSpec};
use crate::solvers::{SolverConfig, SolverKind, DEFAULT_ATOL, DEFAULT_RTOL};
use crate::tasks::{CsvSchema, DampedSineParams, IcuParams, NoiseScale};
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub family: Family,
    pub hidden: usize,
    pub layers: usize,
    pub wiring: Option<WiringSpec>,
    pub time_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvTask {
    pub path: PathBuf,
    pub schema: CsvSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskKind {
    DampedSine(DampedSineParams),
    SyntheticIcu { params: IcuParams, clamp: bool },
    Csv(CsvTask),
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::DampedSine(_) => "damped_sine",
            TaskKind::SyntheticIcu { .. } => "synthetic_icu",
            TaskKind::Csv(_) => "csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSection {
    pub kind: TaskKind,
    pub window: usize,
    /// Train, validation and test fractions.
    pub split: (f64, f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSection {
    pub sigmas: Vec<f64>,
    pub horizons: Vec<usize>,
    pub noise_scale: NoiseScale,
    pub perturb_exo: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub csv: bool,
    pub json: bool,
    /// Report measured epoch seconds; when off they are written as 0 so that
    /// outputs are byte-reproducible.
    pub record_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub solver: SolverConfig,
    pub task: TaskSection,
    pub train: TrainConfig,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

const SECTIONS: [&str; 6] = ["model", "solver", "task", "train", "sweep", "output"];

fn allowed_keys(section: &str, task_kind: Option<&str>) -> &'static [&'static str] {
    match (section, task_kind) {
        ("model", _) => &["family", "hidden", "layers", "wiring", "time_gap"],
        ("solver", _) => &["kind", "dt", "substeps", "rtol", "atol"],
        ("task", Some("damped_sine")) => &[
            "kind", "window", "split", "n_sequences", "steps", "dt", "lambda", "omega", "phase_jitter",
        ],
        ("task", Some("synthetic_icu")) => &[
            "kind",
            "window",
            "split",
            "n_patients",
            "steps",
            "n_vitals",
            "n_interventions",
            "dt",
            "reversion",
            "noise",
            "coupling",
            "p_on",
            "p_off",
            "missing_rate",
            "clamp",
        ],
        ("task", Some("csv")) => &["kind", "window", "split", "path", "id_column", "features", "exogenous", "dt"],
        ("task", _) => &["kind", "window", "split"],
        ("train", _) => &["epochs", "batch_size", "lr", "seed", "shuffle", "clip_norm"],
        ("sweep", _) => &["sigmas", "horizons", "noise_scale", "perturb_exo"],
        ("output", _) => &["dir", "formats", "record_timing"],
        _ => &[],
    }
}

struct Entry {
    value: String,
    line: usize,
}

#[derive(Default)]
struct Section {
    line: usize,
    entries: BTreeMap<String, Entry>,
}

fn config_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

struct Raw {
    sections: BTreeMap<String, Section>,
}

impl Raw {
    fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, Section> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw_line) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw_line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| config_err(line, format!("malformed section header '{content}'")))?
                    .trim()
                    .to_string();
                if !SECTIONS.contains(&name.as_str()) {
                    return Err(config_err(
                        line,
                        format!("unknown section [{name}] (expected one of {})", SECTIONS.join(", ")),
                    ));
                }
                if sections.contains_key(&name) {
                    return Err(config_err(line, format!("duplicate section [{name}]")));
                }
                sections.insert(
                    name.clone(),
                    Section {
                        line,
                        entries: BTreeMap::new(),
                    },
                );
                current = Some(name);
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_err(line, format!("expected 'key = value', got '{content}'")))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(config_err(line, "empty key"));
            }
            let name = current
                .as_ref()
                .ok_or_else(|| config_err(line, format!("key '{key}' appears before any [section]")))?;
            let section = sections.get_mut(name).expect("section registered");
            if let Some(prev) = section.entries.get(&key) {
                return Err(config_err(
                    line,
                    format!("duplicate key '{key}' in [{name}] (first set at line {})", prev.line),
                ));
            }
            section.entries.insert(key, Entry { value, line });
        }
        Ok(Self { sections })
    }

    fn check_unknown_keys(&self) -> Result<()> {
        let task_kind = self
            .sections
            .get("task")
            .and_then(|s| s.entries.get("kind"))
            .map(|e| e.value.as_str());
        let mut unknown: Vec<(usize, String, &str)> = Vec::new();
        for (name, section) in &self.sections {
            let allowed = allowed_keys(name, task_kind);
            for (key, entry) in &section.entries {
                if !allowed.contains(&key.as_str()) {
                    unknown.push((entry.line, key.clone(), name));
                }
            }
        }
        match unknown.into_iter().min() {
            Some((line, key, section)) => {
                let allowed = allowed_keys(section, task_kind).join(", ");
                Err(config_err(
                    line,
                    format!("unknown key '{key}' in [{section}] (allowed: {allowed})"),
                ))
            }
            None => Ok(()),
        }
    }

    fn section_line(&self, section: &str) -> usize {
        self.sections.get(section).map_or(0, |s| s.line)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.entries.get(key))
    }

    fn get<T>(&self, section: &str, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<Option<T>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => parse(&e.value)
                .map(Some)
                .map_err(|msg| config_err(e.line, format!("[{section}] {key}: {msg}"))),
        }
    }

    fn require<T>(&self, section: &str, key: &str, parse: impl Fn(&str) -> std::result::Result<T, String>) -> Result<T> {
        self.get(section, key, parse)?.ok_or_else(|| {
            let line = self.section_line(section);
            if self.sections.contains_key(section) {
                config_err(line, format!("missing required key '{key}' in [{section}]"))
            } else {
                config_err(line, format!("missing required section [{section}] (needs '{key}')"))
            }
        })
    }

    fn line_of(&self, section: &str, key: &str) -> usize {
        self.entry(section, key).map_or_else(|| self.section_line(section), |e| e.line)
    }
}

fn p_usize(min: usize) -> impl Fn(&str) -> std::result::Result<usize, String> {
    move |s| match s.parse::<usize>() {
        Ok(v) if v >= min => Ok(v),
        Ok(v) => Err(format!("must be >= {min}, got {v}")),
        Err(_) => Err(format!("expected an integer, got '{s}'")),
    }
}

fn p_u64(s: &str) -> std::result::Result<u64, String> {
    s.parse::<u64>().map_err(|_| format!("expected a non-negative integer, got '{s}'"))
}

fn p_float(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite number, got '{s}'")),
    }
}

fn p_nonneg(s: &str) -> std::result::Result<f64, String> {
    let v = p_float(s)?;
    if v < 0.0 {
        return Err(format!("must be >= 0, got {v}"));
    }
    Ok(v)
}

fn p_pos(s: &str) -> std::result::Result<f64, String> {
    let v = p_float(s)?;
    if v <= 0.0 {
        return Err(format!("must be > 0, got {v}"));
    }
    Ok(v)
}

fn p_prob(s: &str) -> std::result::Result<f64, String> {
    let v = p_float(s)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("must lie in [0, 1], got {v}"));
    }
    Ok(v)
}

fn p_bool(s: &str) -> std::result::Result<bool, String> {
    match s {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(format!("expected true or false, got '{s}'")),
    }
}

fn p_enum<T: FromStr>(options: &'static str) -> impl Fn(&str) -> std::result::Result<T, String> {
    move |s| s.parse::<T>().map_err(|_| format!("invalid value '{s}' (expected one of {options})"))
}

fn p_list<T>(item: impl Fn(&str) -> std::result::Result<T, String>) -> impl Fn(&str) -> std::result::Result<Vec<T>, String> {
    move |s| {
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.split(',').map(|p| item(p.trim())).collect()
    }
}

fn p_names(s: &str) -> std::result::Result<Vec<String>, String> {
    let names: Vec<String> = s.split(',').map(|p| p.trim().to_string()).filter(|p| !p.is_empty()).collect();
    Ok(names)
}

fn p_wiring(s: &str) -> std::result::Result<Option<WiringSpec>, String> {
    if s == "none" {
        return Ok(None);
    }
    let inner = s
        .strip_prefix("ncp(")
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| format!("expected 'none' or 'ncp(...)', got '{s}'"))?;
    const KEYS: [&str; 7] = [
        "inter",
        "command",
        "motor",
        "sensory_fanout",
        "inter_fanout",
        "motor_fanin",
        "recurrent",
    ];
    let mut vals: BTreeMap<&str, usize> = BTreeMap::new();
    for part in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| format!("ncp arguments are 'name = value', got '{part}'"))?;
        let k = k.trim();
        let key = KEYS
            .iter()
            .find(|&&x| x == k)
            .ok_or_else(|| format!("unknown ncp argument '{k}' (expected {})", KEYS.join(", ")))?;
        let v = p_usize(0)(v.trim())?;
        if vals.insert(key, v).is_some() {
            return Err(format!("ncp argument '{k}' given twice"));
        }
    }
    let get = |k: &str| vals.get(k).copied().ok_or_else(|| format!("ncp(...) is missing '{k}'"));
    Ok(Some(WiringSpec {
        inter: get("inter")?,
        command: get("command")?,
        motor: get("motor")?,
        fanouts: NcpFanouts {
            sensory: get("sensory_fanout")?,
            inter: get("inter_fanout")?,
            motor_fanin: get("motor_fanin")?,
            recurrent: get("recurrent")?,
        },
    }))
}

fn p_formats(s: &str) -> std::result::Result<(bool, bool), String> {
    let mut csv = false;
    let mut json = false;
    for f in p_names(s)? {
        match f.as_str() {
            "csv" => csv = true,
            "json" => json = true,
            other => return Err(format!("invalid format '{other}' (expected csv, json)")),
        }
    }
    Ok((csv, json))
}

const FAMILIES: &str = "rnn, lstm, gru, ltc, cfc, ssm";

fn default_solver_kind(family: Family) -> SolverKind {
    ModelSpec::new(family, 1, 1, 1).solver.kind
}

/// Parses and validates a config. Relative CSV paths stay as written.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw = Raw::parse(text)?;
    raw.check_unknown_keys()?;

    let family: Family = raw.require("model", "family", p_enum(FAMILIES))?;
    let model = ModelSection {
        family,
        hidden: raw.require("model", "hidden", p_usize(1))?,
        layers: raw.get("model", "layers", p_usize(1))?.unwrap_or(1),
        wiring: raw.get("model", "wiring", p_wiring)?.flatten(),
        time_gap: raw.get("model", "time_gap", p_nonneg)?.unwrap_or(1.0),
    };

    let kind = raw
        .get("solver", "kind", p_enum("euler, rk4, dopri5, fused"))?
        .unwrap_or_else(|| default_solver_kind(family));
    let solver = SolverConfig {
        kind,
        dt: raw.get("solver", "dt", p_pos)?.unwrap_or(1.0),
        substeps: raw.get("solver", "substeps", p_usize(1))?.unwrap_or(1),
        rtol: raw.get("solver", "rtol", p_pos)?.unwrap_or(DEFAULT_RTOL),
        atol: raw.get("solver", "atol", p_pos)?.unwrap_or(DEFAULT_ATOL),
    };

    let task_kind: String = raw.require("task", "kind", |s| match s {
        "damped_sine" | "synthetic_icu" | "csv" => Ok(s.to_string()),
        _ => Err(format!("invalid value '{s}' (expected one of damped_sine, synthetic_icu, csv)")),
    })?;
    let kind = match task_kind.as_str() {
        "damped_sine" => {
            let d = DampedSineParams::default();
            TaskKind::DampedSine(DampedSineParams {
                n_sequences: raw.get("task", "n_sequences", p_usize(1))?.unwrap_or(d.n_sequences),
                steps: raw.get("task", "steps", p_usize(1))?.unwrap_or(d.steps),
                dt: raw.get("task", "dt", p_pos)?.unwrap_or(d.dt),
                lambda: raw.get("task", "lambda", p_nonneg)?.unwrap_or(d.lambda),
                omega: raw.get("task", "omega", p_pos)?.unwrap_or(d.omega),
                phase_jitter: raw.get("task", "phase_jitter", p_nonneg)?.unwrap_or(d.phase_jitter),
            })
        }
        "synthetic_icu" => {
            let d = IcuParams::default();
            TaskKind::SyntheticIcu {
                params: IcuParams {
                    n_patients: raw.get("task", "n_patients", p_usize(1))?.unwrap_or(d.n_patients),
                    steps: raw.get("task", "steps", p_usize(1))?.unwrap_or(d.steps),
                    n_vitals: raw.get("task", "n_vitals", p_usize(1))?.unwrap_or(d.n_vitals),
                    n_interventions: raw.get("task", "n_interventions", p_usize(0))?.unwrap_or(d.n_interventions),
                    dt: raw.get("task", "dt", p_pos)?.unwrap_or(d.dt),
                    reversion: raw.get("task", "reversion", p_prob)?.unwrap_or(d.reversion),
                    noise: raw.get("task", "noise", p_nonneg)?.unwrap_or(d.noise),
                    coupling: raw.get("task", "coupling", p_prob)?.unwrap_or(d.coupling),
                    p_on: raw.get("task", "p_on", p_prob)?.unwrap_or(d.p_on),
                    p_off: raw.get("task", "p_off", p_prob)?.unwrap_or(d.p_off),
                    missing_rate: raw.get("task", "missing_rate", p_prob)?.unwrap_or(d.missing_rate),
                },
                clamp: raw.get("task", "clamp", p_bool)?.unwrap_or(true),
            }
        }
        _ => {
            let path = PathBuf::from(raw.require("task", "path", |s| Ok::<_, String>(s.to_string()))?);
            let id_column = raw.get("task", "id_column", |s| Ok::<_, String>(s.to_string()))?.unwrap_or_else(|| "id".into());
            let features = raw.require("task", "features", p_names)?;
            if features.is_empty() {
                return Err(config_err(raw.line_of("task", "features"), "[task] features: list is empty"));
            }
            let exogenous = raw.get("task", "exogenous", p_names)?.unwrap_or_default();
            for e in &exogenous {
                if !features.contains(e) {
                    return Err(config_err(
                        raw.line_of("task", "exogenous"),
                        format!("[task] exogenous: '{e}' is not listed in features"),
                    ));
                }
            }
            let mut schema = CsvSchema::new(
                id_column,
                features.iter().map(|f| (f.clone(), exogenous.contains(f))).collect(),
            );
            schema.dt = raw.get("task", "dt", p_pos)?.unwrap_or(1.0);
            if schema.features.iter().all(|(_, e)| *e) {
                return Err(config_err(
                    raw.line_of("task", "exogenous"),
                    "[task] at least one feature must be non-exogenous",
                ));
            }
            TaskKind::Csv(CsvTask { path, schema })
        }
    };
    let split = match raw.get("task", "split", p_list(p_nonneg))? {
        None => (0.7, 0.15, 0.15),
        Some(v) if v.len() == 3 && (v.iter().sum::<f64>() - 1.0).abs() <= 1e-9 && v[0] > 0.0 && v[2] > 0.0 => {
            (v[0], v[1], v[2])
        }
        Some(_) => {
            return Err(config_err(
                raw.line_of("task", "split"),
                "[task] split: expected three fractions (train, val, test) summing to 1 with train and test > 0",
            ))
        }
    };
    let task = TaskSection {
        kind,
        window: raw.get("task", "window", p_usize(1))?.unwrap_or(10),
        split,
    };

    let d = TrainConfig::default();
    let train = TrainConfig {
        epochs: raw.get("train", "epochs", p_usize(1))?.unwrap_or(d.epochs),
        batch_size: raw.get("train", "batch_size", p_usize(1))?.unwrap_or(d.batch_size),
        lr: raw.get("train", "lr", p_nonneg)?.unwrap_or(d.lr),
        seed: raw.get("train", "seed", p_u64)?.unwrap_or(d.seed),
        shuffle: raw.get("train", "shuffle", p_bool)?.unwrap_or(d.shuffle),
        clip_norm: raw.get("train", "clip_norm", |s| {
            if s == "none" {
                Ok(None)
            } else {
                p_pos(s).map(Some)
            }
        })?
        .unwrap_or(d.clip_norm),
    };

    let is_sine = matches!(task.kind, TaskKind::DampedSine(_));
    let sweep = SweepSection {
        sigmas: raw
            .get("sweep", "sigmas", p_list(p_nonneg))?
            .unwrap_or_else(|| if is_sine { vec![0.0, 0.10] } else { vec![0.0, 0.01, 0.02, 0.05] }),
        horizons: raw.get("sweep", "horizons", p_list(p_usize(1)))?.unwrap_or_else(|| vec![1, 2, 3, 5]),
        noise_scale: raw
            .get("sweep", "noise_scale", p_enum("amplitude, range"))?
            .unwrap_or(if is_sine { NoiseScale::Amplitude } else { NoiseScale::Range }),
        perturb_exo: raw.get("sweep", "perturb_exo", p_bool)?.unwrap_or(false),
    };
    if sweep.horizons.is_empty() {
        return Err(config_err(raw.line_of("sweep", "horizons"), "[sweep] horizons: list is empty"));
    }

    let (csv, json) = raw.get("output", "formats", p_formats)?.unwrap_or((true, true));
    let output = OutputSection {
        dir: raw
            .get("output", "dir", |s| Ok::<_, String>(PathBuf::from(s)))?
            .unwrap_or_else(|| PathBuf::from("out")),
        csv,
        json,
        record_timing: raw.get("output", "record_timing", p_bool)?.unwrap_or(false),
    };

    let cfg = ExperimentConfig {
        model,
        solver,
        task,
        train,
        sweep,
        output,
    };
    cfg.validate_with(|section, key| raw.line_of(section, key))?;
    Ok(cfg)
}

/// Reads and parses `path`; a relative CSV path is taken relative to the config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    if let TaskKind::Csv(task) = &mut cfg.task.kind {
        if task.path.is_relative() {
            if let Some(dir) = path.parent() {
                task.path = dir.join(&task.path);
            }
        }
    }
    Ok(cfg)
}

impl ExperimentConfig {
    /// Model spec for a dataset with `input` features and `output` targets.
    pub fn model_spec(&self, input: usize, output: usize) -> ModelSpec {
        let mut spec = ModelSpec::new(self.model.family, input, self.model.hidden, output)
            .with_layers(self.model.layers)
            .with_solver(self.solver);
        spec.wiring = self.model.wiring;
        spec.time_gap = self.model.time_gap;
        spec
    }

    fn validate_with(&self, line_of: impl Fn(&str, &str) -> usize) -> Result<()> {
        let wrap = |section: &'static str, key: &'static str| {
            let line = line_of(section, key);
            move |e: Error| match e {
                Error::InvalidArgument(msg) => config_err(line, format!("[{section}] {msg}")),
                other => other,
            }
        };
        // Placeholder I/O dims; the real ones come from the data.
        self.model_spec(1, 1).validate().map_err(wrap("model", "family"))?;
        self.train.validate().map_err(wrap("train", "lr"))?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with(|_, _| 0)
    }

    /// Fully resolved config in the input format.
    pub fn to_ini(&self) -> String {
        let mut s = String::new();
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let m = &self.model;
        let _ = writeln!(s, "[model]");
        let _ = writeln!(s, "family = {}", m.family);
        let _ = writeln!(s, "hidden = {}", m.hidden);
        let _ = writeln!(s, "layers = {}", m.layers);
        match &m.wiring {
            None => {
                let _ = writeln!(s, "wiring = none");
            }
            Some(w) => {
                let _ = writeln!(
                    s,
                    "wiring = ncp(inter = {}, command = {}, motor = {}, sensory_fanout = {}, inter_fanout = {}, motor_fanin = {}, recurrent = {})",
                    w.inter, w.command, w.motor, w.fanouts.sensory, w.fanouts.inter, w.fanouts.motor_fanin, w.fanouts.recurrent
                );
            }
        }
        let _ = writeln!(s, "time_gap = {}", m.time_gap);

        let v = &self.solver;
        let _ = writeln!(s, "\n[solver]");
        let _ = writeln!(s, "kind = {}", v.kind);
        let _ = writeln!(s, "dt = {}", v.dt);
        let _ = writeln!(s, "substeps = {}", v.substeps);
        let _ = writeln!(s, "rtol = {}", v.rtol);
        let _ = writeln!(s, "atol = {}", v.atol);

        let t = &self.task;
        let _ = writeln!(s, "\n[task]");
        let _ = writeln!(s, "kind = {}", t.kind.name());
        let _ = writeln!(s, "window = {}", t.window);
        let _ = writeln!(s, "split = {}", list(&[t.split.0, t.split.1, t.split.2]));
        match &t.kind {
            TaskKind::DampedSine(p) => {
                let _ = writeln!(s, "n_sequences = {}", p.n_sequences);
                let _ = writeln!(s, "steps = {}", p.steps);
                let _ = writeln!(s, "dt = {}", p.dt);
                let _ = writeln!(s, "lambda = {}", p.lambda);
                let _ = writeln!(s, "omega = {}", p.omega);
                let _ = writeln!(s, "phase_jitter = {}", p.phase_jitter);
            }
            TaskKind::SyntheticIcu { params: p, clamp } => {
                let _ = writeln!(s, "n_patients = {}", p.n_patients);
                let _ = writeln!(s, "steps = {}", p.steps);
                let _ = writeln!(s, "n_vitals = {}", p.n_vitals);
                let _ = writeln!(s, "n_interventions = {}", p.n_interventions);
                let _ = writeln!(s, "dt = {}", p.dt);
                let _ = writeln!(s, "reversion = {}", p.reversion);
                let _ = writeln!(s, "noise = {}", p.noise);
                let _ = writeln!(s, "coupling = {}", p.coupling);
                let _ = writeln!(s, "p_on = {}", p.p_on);
                let _ = writeln!(s, "p_off = {}", p.p_off);
                let _ = writeln!(s, "missing_rate = {}", p.missing_rate);
                let _ = writeln!(s, "clamp = {clamp}");
            }
            TaskKind::Csv(c) => {
                let _ = writeln!(s, "path = {}", c.path.display());
                let _ = writeln!(s, "id_column = {}", c.schema.id_column);
                let names: Vec<&str> = c.schema.features.iter().map(|(n, _)| n.as_str()).collect();
                let exo: Vec<&str> = c.schema.features.iter().filter(|(_, e)| *e).map(|(n, _)| n.as_str()).collect();
                let _ = writeln!(s, "features = {}", names.join(", "));
                let _ = writeln!(s, "exogenous = {}", exo.join(", "));
                let _ = writeln!(s, "dt = {}", c.schema.dt);
            }
        }

        let r = &self.train;
        let _ = writeln!(s, "\n[train]");
        let _ = writeln!(s, "epochs = {}", r.epochs);
        let _ = writeln!(s, "batch_size = {}", r.batch_size);
        let _ = writeln!(s, "lr = {}", r.lr);
        let _ = writeln!(s, "seed = {}", r.seed);
        let _ = writeln!(s, "shuffle = {}", r.shuffle);
        match r.clip_norm {
            None => {
                let _ = writeln!(s, "clip_norm = none");
            }
            Some(c) => {
                let _ = writeln!(s, "clip_norm = {c}");
            }
        }

        let w = &self.sweep;
        let _ = writeln!(s, "\n[sweep]");
        let _ = writeln!(s, "sigmas = {}", list(&w.sigmas));
        let _ = writeln!(
            s,
            "horizons = {}",
            w.horizons.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", ")
        );
        let _ = writeln!(s, "noise_scale = {}", w.noise_scale);
        let _ = writeln!(s, "perturb_exo = {}", w.perturb_exo);

        let o = &self.output;
        let _ = writeln!(s, "\n[output]");
        let _ = writeln!(s, "dir = {}", o.dir.display());
        let formats: Vec<&str> = [(o.csv, "csv"), (o.json, "json")]
            .iter()
            .filter(|(on, _)| *on)
            .map(|(_, n)| *n)
            .collect();
        let _ = writeln!(s, "formats = {}", formats.join(", "));
        let _ = writeln!(s, "record_timing = {}", o.record_timing);
        s
    }
}
