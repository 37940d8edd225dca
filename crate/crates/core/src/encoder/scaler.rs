use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featuremap::AngleVector;

/// Per-dimension robust scaler mapping `[q_low, q_high] → [−1, 1]`, then clipping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingScaler {
    pub low_quantile: f64,
    pub high_quantile: f64,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

/// Linear interpolation between order statistics at position `q(n−1)`.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl EmbeddingScaler {
    pub fn fit(embeddings: ArrayView2<f64>) -> Result<Self> {
        Self::fit_with(embeddings, 0.05, 0.95)
    }

    pub fn fit_with(embeddings: ArrayView2<f64>, low_quantile: f64, high_quantile: f64) -> Result<Self> {
        if embeddings.nrows() == 0 {
            return Err(Error::Empty("scaler training embeddings"));
        }
        if !(0.0..high_quantile).contains(&low_quantile) || high_quantile > 1.0 {
            return Err(Error::invalid(format!("bad quantile pair ({low_quantile}, {high_quantile})")));
        }
        let mut low = Vec::new();
        let mut high = Vec::new();
        for col in embeddings.columns() {
            let mut v = col.to_vec();
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical("non-finite embedding".into()));
            }
            v.sort_by(f64::total_cmp);
            low.push(quantile(&v, low_quantile));
            high.push(quantile(&v, high_quantile));
        }
        Ok(EmbeddingScaler { low_quantile, high_quantile, low, high })
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn is_degenerate(&self, dim: usize) -> bool {
        !(self.high[dim] > self.low[dim])
    }

    pub fn scale(&self, embedding: &[f64]) -> Result<Vec<f64>> {
        if embedding.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: embedding.len() });
        }
        Ok(embedding
            .iter()
            .enumerate()
            .map(|(d, &x)| {
                if self.is_degenerate(d) {
                    0.0
                } else {
                    (2.0 * (x - self.low[d]) / (self.high[d] - self.low[d]) - 1.0).clamp(-1.0, 1.0)
                }
            })
            .collect())
    }

    /// `π·scale(e)` truncated to the first `q` dimensions.
    pub fn angles(&self, embedding: &[f64], q: usize) -> Result<AngleVector> {
        self.angles_in_range(embedding, q, PI)
    }

    /// `range·scale(e)` truncated to the first `q` dimensions, for `0 < range ≤ π`.
    pub fn angles_in_range(&self, embedding: &[f64], q: usize, range: f64) -> Result<AngleVector> {
        if q > self.dim() {
            return Err(Error::invalid(format!("{q} qubits exceed embedding dimension {}", self.dim())));
        }
        if !(range > 0.0 && range <= PI) {
            return Err(Error::invalid(format!("angle range {range} outside (0, pi]")));
        }
        let scaled = self.scale(embedding)?;
        AngleVector::new(scaled[..q].iter().map(|x| range * x).collect())
    }

    pub fn scale_all(&self, embeddings: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut out = Array2::zeros(embeddings.raw_dim());
        for (i, row) in embeddings.rows().into_iter().enumerate() {
            let scaled = self.scale(&row.to_vec())?;
            out.row_mut(i).iter_mut().zip(scaled).for_each(|(o, s)| *o = s);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn quantiles_map_to_unit_interval() {
        let e = Array2::from_shape_fn((101, 2), |(i, j)| if j == 0 { i as f64 } else { 3.0 });
        let s = EmbeddingScaler::fit(e.view()).unwrap();
        assert_eq!(s.low[0], 5.0);
        assert_eq!(s.high[0], 95.0);
        assert_eq!(s.scale(&[5.0, 3.0]).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(s.scale(&[95.0, 3.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(s.scale(&[200.0, -4.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(s.scale(&[-200.0, 9.0]).unwrap(), vec![-1.0, 0.0]);
        assert!(s.is_degenerate(1));
    }

    #[test]
    fn interpolates_between_order_statistics() {
        assert_eq!(quantile(&[0.0, 10.0], 0.05), 0.5);
        assert_eq!(quantile(&[1.0, 2.0, 4.0], 0.75), 3.0);
    }
}
