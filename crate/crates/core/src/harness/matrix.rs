use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::pipeline::{run_pipeline, StopAfter};
use super::store::Store;
use crate::error::{Error, Result};
use crate::persist;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub id: String,
    /// `None` on mean rows.
    pub repeat: Option<u64>,
    pub accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    pub auroc: Option<f64>,
    pub auprc: Option<f64>,
    pub run: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixResult {
    pub rows: Vec<MatrixRow>,
    pub means: Vec<MatrixRow>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Runs every `(config, repeat)` cell on up to `workers` threads. Completed cells are
/// found by manifest and skipped; per-cell errors are recorded, not fatal.
pub fn run_matrix(configs: &[ExperimentConfig], repeats: u64, store: &Store, workers: usize) -> Result<MatrixResult> {
    if configs.is_empty() || repeats == 0 {
        return Err(Error::invalid("matrix needs at least one config and one repeat"));
    }
    let cells: Vec<(ExperimentConfig, u64)> =
        configs.iter().flat_map(|c| (0..repeats).map(move |r| (c.with_repeat(r), r))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    let rows: Vec<MatrixRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|(config, repeat)| {
                let base = MatrixRow {
                    id: config.id.clone(),
                    repeat: Some(*repeat),
                    accuracy: None,
                    macro_f1: None,
                    auroc: None,
                    auprc: None,
                    run: None,
                    error: None,
                };
                match run_pipeline(config, store, StopAfter::Evaluate) {
                    Ok(outcome) => {
                        let t = outcome.manifest.evaluation.expect("complete run is evaluated").test;
                        MatrixRow {
                            accuracy: Some(t.accuracy),
                            macro_f1: Some(t.macro_f1),
                            auroc: t.auroc,
                            auprc: t.auprc,
                            run: outcome.run_dir.strip_prefix(store.root()).ok().map(|p| p.display().to_string()),
                            ..base
                        }
                    }
                    Err(e) => {
                        warn!("{} repeat {repeat} failed: {e}", config.id);
                        MatrixRow { error: Some(e.to_string()), ..base }
                    }
                }
            })
            .collect()
    });
    let means = configs
        .iter()
        .map(|c| {
            let mine: Vec<&MatrixRow> = rows.iter().filter(|r| r.id == c.id).collect();
            MatrixRow {
                id: c.id.clone(),
                repeat: None,
                accuracy: mean(mine.iter().map(|r| r.accuracy)),
                macro_f1: mean(mine.iter().map(|r| r.macro_f1)),
                auroc: mean(mine.iter().map(|r| r.auroc)),
                auprc: mean(mine.iter().map(|r| r.auprc)),
                run: None,
                error: None,
            }
        })
        .collect();
    Ok(MatrixResult { rows, means })
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.4}"))
}

/// Aligned text table: `ID | Seed | Acc | F1_macro | AUROC | AUPRC`, per-seed rows then means.
pub fn render_table(result: &MatrixResult) -> String {
    let mut lines =
        vec![["ID".to_string(), "Seed".into(), "Acc".into(), "F1_macro".into(), "AUROC".into(), "AUPRC".into()]];
    for r in result.rows.iter().chain(&result.means) {
        lines.push([
            r.id.clone(),
            r.repeat.map_or_else(|| "mean".into(), |s| s.to_string()),
            if r.error.is_some() { "error".into() } else { cell(r.accuracy) },
            cell(r.macro_f1),
            cell(r.auroc),
            cell(r.auprc),
        ]);
    }
    let widths: Vec<usize> = (0..6).map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, l) in lines.iter().enumerate() {
        let cells: Vec<String> = l.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
        writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
        if i == 0 {
            writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 10)).unwrap();
        }
    }
    out
}

pub fn write_matrix(result: &MatrixResult, dir: &Path) -> Result<()> {
    persist::write_json(&dir.join("matrix.json"), result)?;
    let text = render_table(result);
    std::fs::write(dir.join("matrix.txt"), text).map_err(|e| Error::io(dir.join("matrix.txt"), e))
}
