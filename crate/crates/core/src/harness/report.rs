//! Report files. Floats use Rust's shortest round-trip formatting, so the
//! bytes depend only on the report.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::{ExperimentConfig, MetricsReport};

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn loss_history_csv(report: &MetricsReport) -> String {
    let mut s = String::from("epoch,loss,seconds\n");
    for e in &report.epochs {
        let _ = writeln!(s, "{},{},{}", e.epoch, e.loss, e.seconds);
    }
    s
}

pub fn metrics_csv(report: &MetricsReport) -> String {
    let mut s = String::from("split,metric,value\n");
    for m in &report.metrics {
        let _ = writeln!(s, "{},mae,{}", m.split, m.metrics.mae);
        let _ = writeln!(s, "{},rmse,{}", m.split, m.metrics.rmse);
        if let Some(r2) = m.metrics.r2 {
            let _ = writeln!(s, "{},r2,{}", m.split, r2);
        }
    }
    s
}

pub fn rollout_csv(report: &MetricsReport) -> String {
    let mut s = String::from("k,mae,rmse\n");
    for (k, mae, rmse) in report.rollout.iter().flat_map(|r| &r.per_k) {
        let _ = writeln!(s, "{k},{mae},{rmse}");
    }
    s
}

pub fn robustness_csv(report: &MetricsReport) -> String {
    let mut s = String::from("sigma,k,mae,rmse\n");
    for r in &report.robustness {
        let _ = writeln!(s, "{},{},{},{}", r.sigma, r.k, r.mae, r.rmse);
    }
    s
}

/// `loss_history.csv`, `metrics.csv`, `rollout.csv`, `robustness.csv` and `config_echo.txt`.
pub fn emit_csv_report(report: &MetricsReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    write(dir, "loss_history.csv", &loss_history_csv(report))?;
    write(dir, "metrics.csv", &metrics_csv(report))?;
    write(dir, "rollout.csv", &rollout_csv(report))?;
    write(dir, "robustness.csv", &robustness_csv(report))?;
    write(dir, "config_echo.txt", &report.config_echo)
}

/// `summary.json`: the whole report.
pub fn emit_json_summary(report: &MetricsReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    ensure_dir(dir)?;
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::InvalidArgument(format!("report serialization failed: {e}")))?;
    text.push('\n');
    write(dir, "summary.json", &text)
}

/// Writes whichever formats `cfg.output` selects into `dir`.
pub fn emit_reports(report: &MetricsReport, cfg: &ExperimentConfig, dir: impl AsRef<Path>) -> Result<()> {
    if cfg.output.csv {
        emit_csv_report(report, &dir)?;
    }
    if cfg.output.json {
        emit_json_summary(report, &dir)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{parse_config, run_experiment};

    fn report() -> MetricsReport {
        let cfg = parse_config(
            "[model]\nfamily = rnn\nhidden = 3\n[task]\nkind = damped_sine\nn_sequences = 6\nsteps = 30\n[train]\nepochs = 3\n",
        )
        .unwrap();
        run_experiment(&cfg).unwrap()
    }

    fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<_> = fs::read_dir(dir)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
            })
            .collect();
        files.sort();
        files
    }

    #[test]
    fn same_report_same_bytes() {
        let r = report();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        for d in [&a, &b] {
            emit_csv_report(&r, d.path()).unwrap();
            emit_json_summary(&r, d.path()).unwrap();
        }
        let fa = read_all(a.path());
        assert_eq!(fa.len(), 6);
        assert_eq!(fa, read_all(b.path()));
    }

    #[test]
    fn loss_rows_match_epochs_and_empty_sections_keep_headers() {
        let mut r = report();
        assert_eq!(loss_history_csv(&r).lines().count(), 1 + r.epochs.len());
        assert_eq!(robustness_csv(&r), "sigma,k,mae,rmse\n");
        r.rollout = None;
        assert_eq!(rollout_csv(&r), "k,mae,rmse\n");
    }

    #[test]
    fn json_round_trips() {
        let r = report();
        let dir = tempfile::tempdir().unwrap();
        emit_json_summary(&r, dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("summary.json")).unwrap();
        let back: MetricsReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn unwritable_dir_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = emit_csv_report(&report(), blocker.join("sub")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
        assert!(err.to_string().contains("sub"));
    }
}
