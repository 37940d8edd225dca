use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::dataset::{DatasetSplit, Part};
use super::split::{class_weights, stratified_holdout};
use crate::error::{Error, Result};
use crate::persist;

pub const FEATURE_NAMES: [&str; 41] = [
    "duration",
    "protocol_type",
    "service",
    "flag",
    "src_bytes",
    "dst_bytes",
    "land",
    "wrong_fragment",
    "urgent",
    "hot",
    "num_failed_logins",
    "logged_in",
    "num_compromised",
    "root_shell",
    "su_attempted",
    "num_root",
    "num_file_creations",
    "num_shells",
    "num_access_files",
    "num_outbound_cmds",
    "is_host_login",
    "is_guest_login",
    "count",
    "srv_count",
    "serror_rate",
    "srv_serror_rate",
    "rerror_rate",
    "srv_rerror_rate",
    "same_srv_rate",
    "diff_srv_rate",
    "srv_diff_host_rate",
    "dst_host_count",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate",
    "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
    "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
];

pub const CATEGORICAL: [usize; 3] = [1, 2, 3];
pub const RARE_TOKEN: &str = "__RARE__";
pub const RARE_MIN_COUNT: usize = 50;
const COLUMNS: usize = 43;

#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    /// The 38 numeric features in file order.
    pub numeric: Vec<f64>,
    pub categorical: [String; 3],
    /// Attack name or `normal`.
    pub label: String,
}

impl RawRecord {
    pub fn binary_label(&self) -> u8 {
        u8::from(self.label != "normal")
    }
}

pub fn parse_line(line: &str, line_no: usize) -> Result<RawRecord> {
    let fields: Vec<&str> = line.trim().split(',').map(str::trim).collect();
    if fields.len() != COLUMNS {
        return Err(Error::Malformed {
            line: line_no,
            reason: format!("expected {COLUMNS} columns, got {}", fields.len()),
        });
    }
    let mut numeric = Vec::with_capacity(38);
    for (i, f) in fields[..41].iter().enumerate() {
        if CATEGORICAL.contains(&i) {
            continue;
        }
        let v: f64 = f.parse().map_err(|_| Error::Malformed {
            line: line_no,
            reason: format!("column {} ({}) is not numeric: {f:?}", i, FEATURE_NAMES[i]),
        })?;
        numeric.push(v);
    }
    if fields[41].is_empty() {
        return Err(Error::Malformed { line: line_no, reason: "empty label".into() });
    }
    if fields[41].parse::<f64>().is_ok() || fields[1].parse::<f64>().is_ok() {
        return Err(Error::Malformed {
            line: line_no,
            reason: "unknown schema: label or protocol column is numeric".into(),
        });
    }
    Ok(RawRecord {
        numeric,
        categorical: [fields[1].to_string(), fields[2].to_string(), fields[3].to_string()],
        label: fields[41].to_string(),
    })
}

pub fn read_records(path: &Path) -> Result<Vec<RawRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| parse_line(l, i + 1)).collect()
}

/// Rare-bucketing one-hot encoder for one categorical column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalEncoder {
    pub column: String,
    pub min_count: usize,
    /// Sorted output levels; contains [`RARE_TOKEN`] when any training level was rare.
    pub levels: Vec<String>,
    /// Training levels folded into the rare bucket.
    pub rare_levels: Vec<String>,
}

impl CategoricalEncoder {
    pub fn fit<'a>(column: &str, values: impl Iterator<Item = &'a str>, min_count: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for v in values {
            *counts.entry(v).or_default() += 1;
        }
        let mut levels: Vec<String> =
            counts.iter().filter(|(_, &c)| c >= min_count).map(|(l, _)| l.to_string()).collect();
        let rare_levels: Vec<String> =
            counts.iter().filter(|(_, &c)| c < min_count).map(|(l, _)| l.to_string()).collect();
        if !rare_levels.is_empty() {
            levels.push(RARE_TOKEN.to_string());
            levels.sort();
        }
        CategoricalEncoder { column: column.to_string(), min_count, levels, rare_levels }
    }

    /// Hot index, or `None` for a level never seen in training.
    pub fn index(&self, value: &str) -> Option<usize> {
        if let Ok(i) = self.levels.binary_search_by(|l| l.as_str().cmp(value)) {
            if value != RARE_TOKEN {
                return Some(i);
            }
        }
        if self.rare_levels.binary_search_by(|l| l.as_str().cmp(value)).is_ok() {
            return self.levels.binary_search_by(|l| l.as_str().cmp(RARE_TOKEN)).ok();
        }
        None
    }
}

/// Train-fitted standardization plus one-hot encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularTransformer {
    pub means: Vec<f64>,
    /// Population standard deviations; zero marks a constant column.
    pub stds: Vec<f64>,
    pub encoders: Vec<CategoricalEncoder>,
}

impl TabularTransformer {
    pub fn fit(records: &[&RawRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty("NSL-KDD training rows"));
        }
        let n = records.len() as f64;
        let mut means = vec![0.0; 38];
        for r in records {
            means.iter_mut().zip(&r.numeric).for_each(|(m, v)| *m += v);
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut stds = vec![0.0; 38];
        for r in records {
            stds.iter_mut().zip(&r.numeric).zip(&means).for_each(|((s, v), m)| *s += (v - m) * (v - m));
        }
        stds.iter_mut().for_each(|s| *s = (*s / n).sqrt());
        let encoders = CATEGORICAL
            .iter()
            .enumerate()
            .map(|(k, &col)| {
                CategoricalEncoder::fit(
                    FEATURE_NAMES[col],
                    records.iter().map(|r| r.categorical[k].as_str()),
                    RARE_MIN_COUNT,
                )
            })
            .collect();
        Ok(TabularTransformer { means, stds, encoders })
    }

    pub fn output_names(&self) -> Vec<String> {
        let mut names: Vec<String> =
            (0..41).filter(|i| !CATEGORICAL.contains(i)).map(|i| FEATURE_NAMES[i].to_string()).collect();
        for e in &self.encoders {
            names.extend(e.levels.iter().map(|l| format!("{}={l}", e.column)));
        }
        names
    }

    pub fn width(&self) -> usize {
        38 + self.encoders.iter().map(|e| e.levels.len()).sum::<usize>()
    }

    /// Stored matrices are `f32`; this is the exact transform before narrowing.
    pub fn transform_f64(&self, records: &[&RawRecord]) -> Array2<f64> {
        let mut x = Array2::zeros((records.len(), self.width()));
        for (r, rec) in records.iter().enumerate() {
            for (j, v) in rec.numeric.iter().enumerate() {
                let s = self.stds[j];
                x[[r, j]] = if s > 0.0 { (v - self.means[j]) / s } else { 0.0 };
            }
            let mut offset = 38;
            for (k, e) in self.encoders.iter().enumerate() {
                if let Some(i) = e.index(&rec.categorical[k]) {
                    x[[r, offset + i]] = 1.0;
                }
                offset += e.levels.len();
            }
        }
        x
    }

    pub fn transform(&self, records: &[&RawRecord]) -> Array2<f32> {
        self.transform_f64(records).mapv(|v| v as f32)
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

pub struct NslKdd {
    pub split: DatasetSplit,
    pub transformer: TabularTransformer,
}

fn part(records: &[&RawRecord], rows: Vec<usize>, t: &TabularTransformer) -> Part {
    Part {
        x: t.transform(records),
        y: records.iter().map(|r| r.binary_label()).collect(),
        categories: records.iter().map(|r| r.label.clone()).collect(),
        source_index: rows,
    }
}

/// Loads `KDDTrain+`/`KDDTest+`, carves a stratified validation split from the train file
/// and fits every transformer on the remaining train rows only.
pub fn load_nslkdd(train_path: &Path, test_path: &Path, val_fraction: f64, seed: u64) -> Result<NslKdd> {
    let train_all = read_records(train_path)?;
    let test = read_records(test_path)?;
    if train_all.is_empty() || test.is_empty() {
        return Err(Error::Empty("NSL-KDD file"));
    }
    let labels: Vec<u8> = train_all.iter().map(RawRecord::binary_label).collect();
    let (train_idx, val_idx) = stratified_holdout(&labels, val_fraction, seed)?;
    let train_recs: Vec<&RawRecord> = train_idx.iter().map(|&i| &train_all[i]).collect();
    let val_recs: Vec<&RawRecord> = val_idx.iter().map(|&i| &train_all[i]).collect();
    let test_recs: Vec<&RawRecord> = test.iter().collect();
    let transformer = TabularTransformer::fit(&train_recs)?;
    let train = part(&train_recs, train_idx, &transformer);
    let weights = class_weights(&train.y)?;
    let split = DatasetSplit {
        name: "nslkdd".into(),
        val: part(&val_recs, val_idx, &transformer),
        test: part(&test_recs, (0..test.len()).collect(), &transformer),
        train,
        feature_names: transformer.output_names(),
        class_weights: weights,
        seed,
        source_hashes: vec![
            (file_name(train_path), persist::sha256_file(train_path)?),
            (file_name(test_path), persist::sha256_file(test_path)?),
        ],
    };
    Ok(NslKdd { split, transformer })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(service: &str, label: &str, duration: f64) -> String {
        let mut f: Vec<String> = (0..43).map(|_| "0".to_string()).collect();
        f[0] = duration.to_string();
        f[1] = "tcp".into();
        f[2] = service.into();
        f[3] = "SF".into();
        f[41] = label.into();
        f[42] = "20".into();
        f.join(",")
    }

    #[test]
    fn labels_binarize() {
        assert_eq!(parse_line(&line("http", "normal", 0.0), 1).unwrap().binary_label(), 0);
        assert_eq!(parse_line(&line("http", "neptune", 0.0), 1).unwrap().binary_label(), 1);
    }

    #[test]
    fn malformed_rows_report_line() {
        match parse_line("1,2,3", 7) {
            Err(Error::Malformed { line, .. }) => assert_eq!(line, 7),
            other => panic!("unexpected {other:?}"),
        }
        let mut bad = line("http", "normal", 0.0);
        bad = bad.replacen("0,tcp", "x,tcp", 1);
        assert!(parse_line(&bad, 2).is_err());
    }

    #[test]
    fn rare_threshold_boundary() {
        let mut values = vec!["ftp"; 49];
        values.extend(vec!["http"; 50]);
        let e = CategoricalEncoder::fit("service", values.into_iter(), RARE_MIN_COUNT);
        assert_eq!(e.levels, vec![RARE_TOKEN.to_string(), "http".into()]);
        assert_eq!(e.index("ftp"), Some(0));
        assert_eq!(e.index("http"), Some(1));
        assert_eq!(e.index("gopher"), None);
        assert_eq!(e.index(RARE_TOKEN), None);
    }

    #[test]
    fn standardization_uses_train_statistics() {
        let recs: Vec<RawRecord> =
            (0..10).map(|i| parse_line(&line("http", "normal", i as f64), i + 1).unwrap()).collect();
        let refs: Vec<&RawRecord> = recs.iter().collect();
        let t = TabularTransformer::fit(&refs).unwrap();
        let x = t.transform_f64(&refs);
        let col = x.column(0);
        let mean = col.sum() / 10.0;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 10.0;
        assert!(mean.abs() < 1e-9);
        assert!((var.sqrt() - 1.0).abs() < 1e-9);
        // constant column passes through as zero
        assert!(x.column(1).iter().all(|&v| v == 0.0));
        let unseen = parse_line(&line("gopher", "normal", 100.0), 1).unwrap();
        let xu = t.transform(&[&unseen]);
        assert!(xu.row(0).iter().skip(38).filter(|&&v| v == 1.0).count() == 2);
    }
}
