//! Result bundles: CSV metrics, optional slot logs, resolved-config
//! snapshots, and the cross-bundle comparison table.
//!
//! A bundle directory contains `metrics.csv`, `scenario.resolved.toml`,
//! `manifest.toml` (tool version, command, seed, sweep axis), optionally
//! `slots.csv`, and for access-threshold sweeps a plot-ready
//! `plot_throughput_vs_threshold.csv`. All numbers serialize at full
//! precision, and a rerun with the same snapshot and seed reproduces the
//! files byte for byte.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::duplex::DuplexOutcome;
use crate::error::{Error, Result};
use crate::scenario::{PolicyKindConfig, ScenarioConfig};
use crate::sim::{RunMetrics, RunOutput, SweepAxis, SweepPoint};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Paths making up one emitted result bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultBundle {
    pub dir: PathBuf,
    pub metrics_csv: PathBuf,
    pub config_snapshot: PathBuf,
    pub manifest: PathBuf,
    pub slot_log: Option<PathBuf>,
    pub plot_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    tool_version: String,
    command: String,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    axis: Option<String>,
}

/// Short human-readable policy descriptor used as a column label.
pub fn policy_label(cfg: &ScenarioConfig) -> String {
    match cfg.policy.kind {
        PolicyKindConfig::Linear => "random_linear".to_string(),
        PolicyKindConfig::Concave => format!("random_concave_c{}", cfg.policy.curvature),
        PolicyKindConfig::Deterministic => format!("deterministic_tau{}", cfg.policy.tau),
        PolicyKindConfig::Auto => "auto".to_string(),
    }
}

const METRIC_COLUMNS: &[&str] = &[
    "system_throughput_bps",
    "system_throughput_ci",
    "secondary_throughput_bps",
    "secondary_throughput_ci",
    "primary_throughput_bps",
    "primary_throughput_ci",
    "primary_success_rate",
    "primary_success_rate_ci",
    "secondary_success_rate",
    "secondary_success_rate_ci",
    "mean_energy_per_node_w",
    "fd_fraction",
    "hd_fraction",
    "silence_fraction",
    "jain_fairness",
    "secondary_shannon_sum_se",
    "secondary_shannon_sum_se_ci",
    "op_fallback_events",
];

fn metric_fields(m: &RunMetrics) -> Vec<String> {
    vec![
        format_f64(m.system_throughput_bps),
        format_f64(m.ci.system_throughput_bps),
        format_f64(m.secondary_throughput_bps),
        format_f64(m.ci.secondary_throughput_bps),
        format_f64(m.primary_throughput_bps),
        format_f64(m.ci.primary_throughput_bps),
        format_f64(m.primary_success_rate),
        format_f64(m.ci.primary_success_rate),
        format_f64(m.secondary_success_rate),
        format_f64(m.ci.secondary_success_rate),
        format_f64(m.mean_energy_per_node_w),
        format_f64(m.fd_fraction),
        format_f64(m.hd_fraction),
        format_f64(m.silence_fraction),
        format_f64(m.jain_fairness),
        format_f64(m.secondary_shannon_sum_se),
        format_f64(m.ci.secondary_shannon_sum_se),
        m.op_fallback_events.to_string(),
    ]
}

/// Shortest round-trip representation (what the csv crate uses for f64);
/// full precision by construction.
fn format_f64(v: f64) -> String {
    let mut buf = ryu_format(v);
    if buf.ends_with(".0") {
        buf.truncate(buf.len() - 2);
    }
    buf
}

fn ryu_format(v: f64) -> String {
    // serde_json's f64 Display path is ryu-backed and round-trips exactly.
    serde_json::to_string(&v).unwrap_or_else(|_| v.to_string())
}

fn write_manifest(path: &Path, command: &str, seed: u64, axis: Option<&str>) -> Result<()> {
    let manifest = Manifest {
        tool_version: TOOL_VERSION.to_string(),
        command: command.to_string(),
        seed,
        axis: axis.map(str::to_string),
    };
    let body = toml::to_string_pretty(&manifest)
        .map_err(|e| Error::Runtime(format!("manifest serialization failed: {e}")))?;
    std::fs::write(path, body)?;
    Ok(())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Runtime(format!("cannot create output dir {dir:?}: {e}")))
}

/// Emit a single-run bundle.
pub fn emit_run(out_dir: &Path, output: &RunOutput, with_slot_log: bool) -> Result<ResultBundle> {
    ensure_dir(out_dir)?;
    let cfg = &output.resolved;

    let metrics_csv = out_dir.join("metrics.csv");
    {
        let mut w = csv::Writer::from_path(&metrics_csv)?;
        let mut header = vec!["tool_version", "seed", "slots"];
        header.extend_from_slice(METRIC_COLUMNS);
        header.push("policy");
        w.write_record(&header)?;
        let mut row = vec![
            TOOL_VERSION.to_string(),
            cfg.run.seed.to_string(),
            cfg.run.slots.to_string(),
        ];
        row.extend(metric_fields(&output.metrics));
        row.push(policy_label(cfg));
        w.write_record(&row)?;
        w.flush()?;
    }

    let config_snapshot = out_dir.join("scenario.resolved.toml");
    std::fs::write(&config_snapshot, cfg.to_toml()?)?;

    let manifest = out_dir.join("manifest.toml");
    write_manifest(&manifest, "run", cfg.run.seed, None)?;

    let slot_log = if with_slot_log {
        let path = out_dir.join("slots.csv");
        write_slot_log(&path, output)?;
        Some(path)
    } else {
        None
    };

    Ok(ResultBundle {
        dir: out_dir.to_path_buf(),
        metrics_csv,
        config_snapshot,
        manifest,
        slot_log,
        plot_csv: None,
    })
}

fn write_slot_log(path: &Path, output: &RunOutput) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "slot",
        "pair",
        "mode",
        "op_a",
        "op_b",
        "op_meas_slot",
        "ab_sinr",
        "ab_success",
        "ab_power",
        "ba_sinr",
        "ba_success",
        "ba_power",
        "energy_j",
        "primary_active",
        "primary_sinr",
        "primary_success",
    ])?;
    let opt_f = |v: Option<f64>| v.map(format_f64).unwrap_or_default();
    let opt_b = |v: Option<bool>| v.map(|b| b.to_string()).unwrap_or_default();
    for rec in &output.slots {
        for (p, pair) in rec.pairs.iter().enumerate() {
            let mode = match pair.mode {
                DuplexOutcome::Fd => "fd",
                DuplexOutcome::HdA => "hd_a",
                DuplexOutcome::HdB => "hd_b",
                DuplexOutcome::Silence => "silence",
            };
            w.write_record([
                rec.slot.to_string(),
                p.to_string(),
                mode.to_string(),
                opt_f(pair.op_a_used),
                opt_f(pair.op_b_used),
                pair.op_meas_slot.map(|s| s.to_string()).unwrap_or_default(),
                opt_f(pair.dir_ab.map(|d| d.sinr)),
                opt_b(pair.dir_ab.map(|d| d.success)),
                opt_f(pair.dir_ab.map(|d| d.tx_power)),
                opt_f(pair.dir_ba.map(|d| d.sinr)),
                opt_b(pair.dir_ba.map(|d| d.success)),
                opt_f(pair.dir_ba.map(|d| d.tx_power)),
                format_f64(pair.energy_j),
                rec.primary.active.to_string(),
                opt_f(rec.primary.sinr),
                opt_b(rec.primary.success),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Emit a sweep bundle: metrics keyed by axis value, plus a plot-ready CSV
/// for access-threshold sweeps.
pub fn emit_sweep(
    out_dir: &Path,
    base: &ScenarioConfig,
    axis: SweepAxis,
    points: &[SweepPoint],
) -> Result<ResultBundle> {
    ensure_dir(out_dir)?;

    let metrics_csv = out_dir.join("metrics.csv");
    {
        let mut w = csv::Writer::from_path(&metrics_csv)?;
        let mut header = vec!["tool_version", "axis", "axis_value", "seed", "slots"];
        header.extend_from_slice(METRIC_COLUMNS);
        header.push("policy");
        w.write_record(&header)?;
        for point in points {
            let mut row = vec![
                TOOL_VERSION.to_string(),
                axis.name().to_string(),
                format_f64(point.axis_value),
                point.seed.to_string(),
                base.run.slots.to_string(),
            ];
            row.extend(metric_fields(&point.metrics));
            row.push(policy_label(base));
            w.write_record(&row)?;
        }
        w.flush()?;
    }

    let config_snapshot = out_dir.join("scenario.resolved.toml");
    std::fs::write(&config_snapshot, base.to_toml()?)?;

    let manifest = out_dir.join("manifest.toml");
    write_manifest(&manifest, "sweep", base.run.seed, Some(axis.name()))?;

    let plot_csv = if axis == SweepAxis::AccessThreshold {
        let path = out_dir.join("plot_throughput_vs_threshold.csv");
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record([
            "access_threshold_db",
            "system_tput",
            "secondary_tput",
            "primary_tput",
            "policy",
        ])?;
        for point in points {
            w.write_record([
                format_f64(point.axis_value),
                format_f64(point.metrics.system_throughput_bps),
                format_f64(point.metrics.secondary_throughput_bps),
                format_f64(point.metrics.primary_throughput_bps),
                policy_label(base),
            ])?;
        }
        w.flush()?;
        Some(path)
    } else {
        None
    };

    Ok(ResultBundle {
        dir: out_dir.to_path_buf(),
        metrics_csv,
        config_snapshot,
        manifest,
        slot_log: None,
        plot_csv,
    })
}

#[derive(Debug, Clone)]
struct LoadedBundle {
    label: String,
    axis: String,
    /// (axis value text, system, secondary, primary), in file order.
    rows: Vec<(String, String, String, String)>,
}

fn load_bundle(dir: &Path) -> Result<LoadedBundle> {
    let manifest_text = std::fs::read_to_string(dir.join("manifest.toml"))
        .map_err(|e| Error::Config(format!("bundle {dir:?}: cannot read manifest.toml: {e}")))?;
    let manifest: Manifest = toml::from_str(&manifest_text)
        .map_err(|e| Error::Config(format!("bundle {dir:?}: bad manifest: {e}")))?;
    let axis = manifest.axis.ok_or_else(|| {
        Error::Config(format!(
            "bundle {dir:?} is not a sweep bundle (no axis in manifest)"
        ))
    })?;

    let mut reader = csv::Reader::from_path(dir.join("metrics.csv"))
        .map_err(|e| Error::Config(format!("bundle {dir:?}: cannot read metrics.csv: {e}")))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Config(format!("bundle {dir:?}: metrics.csv lacks column {name}"))
        })
    };
    let (c_axis, c_sys, c_sec, c_prim, c_policy) = (
        col("axis_value")?,
        col("system_throughput_bps")?,
        col("secondary_throughput_bps")?,
        col("primary_throughput_bps")?,
        col("policy")?,
    );
    let mut rows = Vec::new();
    let mut label = String::new();
    for record in reader.records() {
        let record = record?;
        label = record[c_policy].to_string();
        rows.push((
            record[c_axis].to_string(),
            record[c_sys].to_string(),
            record[c_sec].to_string(),
            record[c_prim].to_string(),
        ));
    }
    if label.is_empty() {
        label = "unlabeled".to_string();
    }
    Ok(LoadedBundle { label, axis, rows })
}

/// Join two or more sweep bundles on their shared axis into one comparison
/// table (CSV text), one throughput column group per bundle. A single bundle
/// passes through as a one-group table.
pub fn report(bundle_dirs: &[PathBuf]) -> Result<String> {
    if bundle_dirs.is_empty() {
        return Err(Error::Config("report needs at least one bundle".into()));
    }
    let bundles: Vec<LoadedBundle> = bundle_dirs
        .iter()
        .map(|d| load_bundle(d))
        .collect::<Result<_>>()?;

    let reference = &bundles[0];
    for b in &bundles[1..] {
        let same_axis = b.axis == reference.axis
            && b.rows.len() == reference.rows.len()
            && b.rows
                .iter()
                .zip(reference.rows.iter())
                .all(|(x, y)| x.0 == y.0);
        if !same_axis {
            let describe = |lb: &LoadedBundle| {
                format!(
                    "{} over [{}]",
                    lb.axis,
                    lb.rows
                        .iter()
                        .map(|r| r.0.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                )
            };
            return Err(Error::Config(format!(
                "bundles disagree on the sweep axis: {} vs {}",
                describe(reference),
                describe(b)
            )));
        }
    }

    // Disambiguate duplicate labels by position.
    let mut labels: Vec<String> = bundles.iter().map(|b| b.label.clone()).collect();
    for i in 0..labels.len() {
        if labels.iter().filter(|l| **l == labels[i]).count() > 1 {
            labels = bundles
                .iter()
                .enumerate()
                .map(|(k, b)| format!("{}_{k}", b.label))
                .collect();
            break;
        }
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![reference.axis.clone()];
    for label in &labels {
        header.push(format!("{label}_system_tput"));
        header.push(format!("{label}_secondary_tput"));
        header.push(format!("{label}_primary_tput"));
    }
    w.write_record(&header)?;
    for (i, row) in reference.rows.iter().enumerate() {
        let mut record = vec![row.0.clone()];
        for b in &bundles {
            let r = &b.rows[i];
            record.push(r.1.clone());
            record.push(r.2.clone());
            record.push(r.3.clone());
        }
        w.write_record(&record)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Runtime(format!("report assembly failed: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Runtime(format!("report not UTF-8: {e}")))
}
