use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::bundle::{ArtifactBundle, Evaluation, TrainedModel};
use super::config::Backend;
use super::stream::evaluate_streaming;
use crate::error::{Error, Result};
use crate::featuremap::{build_feature_map, compute_uncompute, AngleVector};
use crate::metrics::MetricsReport;
use crate::persist;
use crate::qsim::CircuitSummary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub id: String,
    pub model: String,
    pub qubits: usize,
    pub threshold: f64,
    pub circuits: Vec<(String, CircuitSummary)>,
    pub evaluation: Option<Evaluation>,
}

/// Depth and gate counts of the circuits a run executes, at zero input angles.
pub fn circuit_summaries(bundle: &ArtifactBundle) -> Result<Vec<(String, CircuitSummary)>> {
    let c = &bundle.manifest.config;
    let zero = AngleVector::new(vec![0.0; c.qubits])?;
    Ok(match &bundle.model {
        TrainedModel::Qsvm(_) => {
            let spec = c.feature_map()?;
            vec![
                ("feature_map".into(), build_feature_map(&zero, &spec)?.summary()),
                ("kernel_entry".into(), compute_uncompute(&zero, &zero, &spec)?.summary()),
            ]
        }
        TrainedModel::Vqc { model, .. } => vec![("vqc".into(), model.summary())],
        TrainedModel::Baseline { .. } => Vec::new(),
    })
}

pub fn run_report(bundle: &ArtifactBundle) -> Result<RunReport> {
    let c = &bundle.manifest.config;
    Ok(RunReport {
        id: c.id.clone(),
        model: serde_json::to_value(c.model)?.as_str().unwrap_or_default().to_string(),
        qubits: c.qubits,
        threshold: bundle.threshold(),
        circuits: circuit_summaries(bundle)?,
        evaluation: bundle.manifest.evaluation.clone(),
    })
}

pub fn render_report(r: &RunReport) -> String {
    let mut out = String::new();
    writeln!(out, "{} ({}, q={}) threshold={:.6}", r.id, r.model, r.qubits, r.threshold).unwrap();
    for (name, s) in &r.circuits {
        writeln!(out, "  {name}: {s}").unwrap();
    }
    if let Some(e) = &r.evaluation {
        let line = |m: &MetricsReport| {
            format!(
                "acc={:.4} f1_macro={:.4} auroc={} auprc={}",
                m.accuracy,
                m.macro_f1,
                m.auroc.map_or("-".into(), |v| format!("{v:.4}")),
                m.auprc.map_or("-".into(), |v| format!("{v:.4}"))
            )
        };
        writeln!(out, "  val:  {}", line(&e.val)).unwrap();
        writeln!(out, "  test: {} (n={})", line(&e.test), e.test_rows).unwrap();
        if let Some(s) = &e.shots {
            writeln!(out, "  shots={} raw: {}", s.shots, line(&s.raw)).unwrap();
            if let Some(m) = &s.mitigated {
                writeln!(out, "  shots={} mitigated: {}", s.shots, line(m)).unwrap();
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub shots: u64,
    pub noise_scale: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
}

fn sweep_point(bundle: &ArtifactBundle, indices: &[usize], shots: u64, scale: f64) -> Result<SweepPoint> {
    let mut b = bundle.clone();
    let c = &mut b.manifest.config;
    c.shots = shots;
    c.noise.depol1 *= scale;
    c.noise.depol2 *= scale;
    c.noise.readout_01 *= scale;
    c.noise.readout_10 *= scale;
    let r = evaluate_streaming(&b, indices, Backend::Shots, &mut std::io::sink())?.report;
    Ok(SweepPoint {
        shots,
        noise_scale: scale,
        accuracy: r.accuracy,
        macro_f1: r.macro_f1,
        auroc: r.auroc,
        auprc: r.auprc,
    })
}

/// Shot-mode streaming metrics on `indices` for each shot count, at the configured noise.
pub fn shot_sweep(bundle: &ArtifactBundle, indices: &[usize], shots: &[u64]) -> Result<Vec<SweepPoint>> {
    shots.iter().map(|&s| sweep_point(bundle, indices, s, 1.0)).collect()
}

/// Shot-mode streaming metrics with every noise rate multiplied by each scale.
pub fn noise_sweep(bundle: &ArtifactBundle, indices: &[usize], scales: &[f64]) -> Result<Vec<SweepPoint>> {
    let shots = bundle.manifest.config.shots;
    scales.iter().map(|&s| sweep_point(bundle, indices, shots, s)).collect()
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x}"));
    let mut out = String::from("shots,noise_scale,accuracy,macro_f1,auroc,auprc\n");
    for p in points {
        writeln!(out, "{},{},{},{},{},{}", p.shots, p.noise_scale, p.accuracy, p.macro_f1, opt(p.auroc), opt(p.auprc))
            .unwrap();
    }
    out
}

pub fn write_report(bundle: &ArtifactBundle, dir: &Path) -> Result<RunReport> {
    let report = run_report(bundle)?;
    persist::write_json(&dir.join("report.json"), &report)?;
    let path = dir.join("report.txt");
    std::fs::write(&path, render_report(&report)).map_err(|e| Error::io(path, e))?;
    Ok(report)
}
