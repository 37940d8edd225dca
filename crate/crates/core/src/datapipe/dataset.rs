use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persist;

/// One split's dense features and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub x: Array2<f32>,
    pub y: Vec<u8>,
    /// Raw pre-binarization category (attack name, or `ham`/`spam`).
    pub categories: Vec<String>,
    /// Row index in the source file / corpus listing.
    pub source_index: Vec<usize>,
}

impl Part {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Part {
        let mut x = Array2::zeros((rows.len(), self.x.ncols()));
        for (r, &i) in rows.iter().enumerate() {
            x.row_mut(r).assign(&self.x.row(i));
        }
        Part {
            x,
            y: rows.iter().map(|&i| self.y[i]).collect(),
            categories: rows.iter().map(|&i| self.categories[i].clone()).collect(),
            source_index: rows.iter().map(|&i| self.source_index[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub name: String,
    pub train: Part,
    pub val: Part,
    pub test: Part,
    pub feature_names: Vec<String>,
    pub class_weights: [f64; 2],
    pub seed: u64,
    /// sha256 of every source file, sorted by path.
    pub source_hashes: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
struct PartHeader {
    rows: usize,
    cols: usize,
    y: Vec<u8>,
    categories: Vec<String>,
    source_index: Vec<usize>,
    x_sha256: String,
}

#[derive(Serialize, Deserialize)]
struct SplitHeader {
    name: String,
    feature_names: Vec<String>,
    class_weights: [f64; 2],
    seed: u64,
    source_hashes: Vec<(String, String)>,
    parts: Vec<(String, PartHeader)>,
}

impl DatasetSplit {
    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut parts = Vec::new();
        for (name, part) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            let bytes = persist::f32_to_le_bytes(part.x.as_slice().expect("standard layout"));
            persist::write_bytes(&dir.join(format!("{name}.f32")), &bytes)?;
            parts.push((
                name.to_string(),
                PartHeader {
                    rows: part.x.nrows(),
                    cols: part.x.ncols(),
                    y: part.y.clone(),
                    categories: part.categories.clone(),
                    source_index: part.source_index.clone(),
                    x_sha256: persist::sha256_hex(&bytes),
                },
            ));
        }
        let header = SplitHeader {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            class_weights: self.class_weights,
            seed: self.seed,
            source_hashes: self.source_hashes.clone(),
            parts,
        };
        persist::write_json(&dir.join("split.json"), &header)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let header: SplitHeader = persist::read_json(&dir.join("split.json"))?;
        let mut parts = Vec::new();
        for (name, h) in header.parts {
            let bytes = persist::read_bytes(&dir.join(format!("{name}.f32")))?;
            if persist::sha256_hex(&bytes) != h.x_sha256 {
                return Err(Error::Integrity(format!("split part {name} hash mismatch")));
            }
            let x = Array2::from_shape_vec((h.rows, h.cols), persist::f32_from_le_bytes(&bytes)?)
                .map_err(|e| Error::Integrity(e.to_string()))?;
            parts.push(Part { x, y: h.y, categories: h.categories, source_index: h.source_index });
        }
        let [train, val, test]: [Part; 3] =
            parts.try_into().map_err(|_| Error::Integrity("split needs train, val and test".into()))?;
        Ok(DatasetSplit {
            name: header.name,
            train,
            val,
            test,
            feature_names: header.feature_names,
            class_weights: header.class_weights,
            seed: header.seed,
            source_hashes: header.source_hashes,
        })
    }
}
