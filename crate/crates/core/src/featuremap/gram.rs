use std::path::Path;

use nalgebra::DMatrix;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fidelity_kernel_shots, prepare_state, AngleVector, FeatureMapSpec};
use crate::error::{Error, Result};
use crate::persist;
use crate::qsim::{NoiseSpec, PureState};
use crate::rng::derive_seed;

/// Eigenvalues below `−PSD_CLAMP_THRESHOLD` trigger spectral clamping.
pub const PSD_CLAMP_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteringStats {
    /// Row means of the uncentered train Gram (equal to its column means).
    pub row_means: Vec<f64>,
    pub grand_mean: f64,
}

impl CenteringStats {
    pub fn from_gram(k: &Array2<f64>) -> Self {
        let n = k.nrows();
        let row_means: Vec<f64> = k.rows().into_iter().map(|r| r.sum() / n as f64).collect();
        let grand_mean = row_means.iter().sum::<f64>() / n as f64;
        CenteringStats { row_means, grand_mean }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsdReport {
    /// Only computed when the Cholesky probe fails.
    pub min_eigenvalue: Option<f64>,
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramBundle {
    /// `None` for kernels not produced by a feature map.
    pub spec: Option<FeatureMapSpec>,
    pub train_gram: Array2<f64>,
    pub val_block: Option<Array2<f64>>,
    pub test_block: Option<Array2<f64>>,
    /// Present once centered; always derived from the uncentered train Gram.
    pub stats: Option<CenteringStats>,
    pub psd: PsdReport,
}

impl GramBundle {
    pub fn from_blocks(
        spec: Option<FeatureMapSpec>,
        mut train_gram: Array2<f64>,
        val_block: Option<Array2<f64>>,
        test_block: Option<Array2<f64>>,
    ) -> Result<Self> {
        let n = train_gram.nrows();
        if n == 0 {
            return Err(Error::Empty("train set"));
        }
        if train_gram.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: train_gram.ncols() });
        }
        for block in [&val_block, &test_block].into_iter().flatten() {
            if block.ncols() != n {
                return Err(Error::DimensionMismatch { expected: n, got: block.ncols() });
            }
        }
        symmetrize(&mut train_gram);
        let psd = psd_project(&mut train_gram)?;
        Ok(GramBundle { spec, train_gram, val_block, test_block, stats: None, psd })
    }

    pub fn n_train(&self) -> usize {
        self.train_gram.nrows()
    }

    pub fn is_centered(&self) -> bool {
        self.stats.is_some()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut blocks = vec![("train", &self.train_gram)];
        if let Some(v) = &self.val_block {
            blocks.push(("val", v));
        }
        if let Some(t) = &self.test_block {
            blocks.push(("test", t));
        }
        let mut hashes = Vec::new();
        for (name, block) in blocks {
            let bytes = persist::f64_to_le_bytes(&row_major(block));
            hashes.push(BlockHeader {
                name: name.to_string(),
                rows: block.nrows(),
                cols: block.ncols(),
                sha256: persist::sha256_hex(&bytes),
            });
            persist::write_bytes(&dir.join(format!("{name}.f64")), &bytes)?;
        }
        let header = GramHeader {
            spec: self.spec,
            n: self.n_train(),
            m_val: self.val_block.as_ref().map(|b| b.nrows()),
            m_test: self.test_block.as_ref().map(|b| b.nrows()),
            centered: self.is_centered(),
            stats: self.stats.clone(),
            psd: self.psd,
            blocks: hashes,
        };
        persist::write_json(&dir.join("gram.json"), &header)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let header: GramHeader = persist::read_json(&dir.join("gram.json"))?;
        let mut train = None;
        let mut val = None;
        let mut test = None;
        for b in &header.blocks {
            let bytes = persist::read_bytes(&dir.join(format!("{}.f64", b.name)))?;
            if persist::sha256_hex(&bytes) != b.sha256 {
                return Err(Error::Integrity(format!("gram block {} hash mismatch", b.name)));
            }
            let values = persist::f64_from_le_bytes(&bytes)?;
            let block = Array2::from_shape_vec((b.rows, b.cols), values)
                .map_err(|e| Error::Integrity(format!("gram block {}: {e}", b.name)))?;
            match b.name.as_str() {
                "train" => train = Some(block),
                "val" => val = Some(block),
                "test" => test = Some(block),
                other => return Err(Error::Integrity(format!("unknown gram block {other}"))),
            }
        }
        let train_gram = train.ok_or_else(|| Error::Integrity("missing train block".into()))?;
        if train_gram.nrows() != header.n || header.centered != header.stats.is_some() {
            return Err(Error::Integrity("gram header disagrees with blocks".into()));
        }
        Ok(GramBundle {
            spec: header.spec,
            train_gram,
            val_block: val,
            test_block: test,
            stats: header.stats,
            psd: header.psd,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct BlockHeader {
    name: String,
    rows: usize,
    cols: usize,
    sha256: String,
}

#[derive(Serialize, Deserialize)]
struct GramHeader {
    spec: Option<FeatureMapSpec>,
    n: usize,
    m_val: Option<usize>,
    m_test: Option<usize>,
    centered: bool,
    stats: Option<CenteringStats>,
    psd: PsdReport,
    blocks: Vec<BlockHeader>,
}

fn row_major(a: &Array2<f64>) -> Vec<f64> {
    a.iter().copied().collect()
}

fn symmetrize(k: &mut Array2<f64>) {
    let n = k.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (k[[i, j]] + k[[j, i]]);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
}

fn states(angles: &[AngleVector], spec: &FeatureMapSpec) -> Result<Vec<PureState>> {
    angles.par_iter().map(|a| prepare_state(a, spec)).collect()
}

fn fidelity_unchecked(a: &PureState, b: &PureState) -> f64 {
    a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| x.conj() * y).sum::<num_complex::Complex64>().norm_sqr()
}

/// Symmetric train Gram from precomputed states, `n(n+1)/2` kernel evaluations.
/// The diagonal is exactly 1 since every state is normalized.
pub fn train_gram(train: &[AngleVector], spec: &FeatureMapSpec) -> Result<Array2<f64>> {
    if train.is_empty() {
        return Err(Error::Empty("train set"));
    }
    let psi = states(train, spec)?;
    let n = psi.len();
    let upper: Vec<Vec<f64>> =
        (0..n).into_par_iter().map(|i| (i + 1..n).map(|j| fidelity_unchecked(&psi[i], &psi[j])).collect()).collect();
    let mut k = Array2::eye(n);
    for (i, row) in upper.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            k[[i, i + 1 + off]] = v;
            k[[i + 1 + off, i]] = v;
        }
    }
    Ok(k)
}

/// Rectangular `m × n` block of kernels between `others` and `train`.
pub fn cross_block(others: &[AngleVector], train: &[AngleVector], spec: &FeatureMapSpec) -> Result<Array2<f64>> {
    let reference = KernelReference::new(train, spec)?;
    let other_psi = states(others, spec)?;
    let rows: Vec<f64> = other_psi.par_iter().flat_map_iter(|o| reference.row_from_state(o)).collect();
    Array2::from_shape_vec((others.len(), train.len()), rows).map_err(|e| Error::Numerical(e.to_string()))
}

/// Reference set with precomputed feature states, for repeated kernel rows.
#[derive(Debug, Clone)]
pub struct KernelReference {
    pub spec: FeatureMapSpec,
    pub angles: Vec<AngleVector>,
    states: Vec<PureState>,
}

impl KernelReference {
    pub fn new(angles: &[AngleVector], spec: &FeatureMapSpec) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::Empty("kernel reference set"));
        }
        Ok(KernelReference { spec: *spec, angles: angles.to_vec(), states: states(angles, spec)? })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    fn row_from_state(&self, psi: &PureState) -> impl Iterator<Item = f64> + '_ {
        let psi = psi.clone();
        self.states.iter().map(move |t| fidelity_unchecked(&psi, t))
    }

    /// Exact kernel row; bit-identical to the matching row of [`cross_block`].
    pub fn row(&self, theta: &AngleVector) -> Result<Vec<f64>> {
        Ok(self.row_from_state(&prepare_state(theta, &self.spec)?).collect())
    }

    /// Shot-estimated kernel row; entry `j` samples with `derive_seed(seed, [j])`.
    pub fn row_shots(
        &self,
        theta: &AngleVector,
        shots: u64,
        noise: &NoiseSpec,
        mitigate: bool,
        seed: u64,
    ) -> Result<Vec<f64>> {
        self.row_shots_batched(theta, self.len(), shots, noise, mitigate, seed)
    }

    /// [`Self::row_shots`] submitted in batches of `batch` circuits; the result does not depend on `batch`.
    pub fn row_shots_batched(
        &self,
        theta: &AngleVector,
        batch: usize,
        shots: u64,
        noise: &NoiseSpec,
        mitigate: bool,
        seed: u64,
    ) -> Result<Vec<f64>> {
        let batch = batch.max(1);
        let mut row = Vec::with_capacity(self.len());
        for start in (0..self.len()).step_by(batch) {
            let end = (start + batch).min(self.len());
            let part: Vec<f64> = (start..end)
                .into_par_iter()
                .map(|j| {
                    let s = derive_seed(seed, &[j as u64]);
                    fidelity_kernel_shots(theta, &self.angles[j], &self.spec, shots, noise, mitigate, s)
                })
                .collect::<Result<_>>()?;
            row.extend(part);
        }
        Ok(row)
    }
}

/// Uncentered bundle with the train Gram and optional validation/test blocks.
pub fn build_gram(
    train: &[AngleVector],
    val: Option<&[AngleVector]>,
    test: Option<&[AngleVector]>,
    spec: &FeatureMapSpec,
) -> Result<GramBundle> {
    let k = train_gram(train, spec)?;
    let val_block = val.map(|v| cross_block(v, train, spec)).transpose()?;
    let test_block = test.map(|t| cross_block(t, train, spec)).transpose()?;
    GramBundle::from_blocks(Some(*spec), k, val_block, test_block)
}

/// Linear kernel `⟨x_i, x_j⟩` on raw feature vectors.
pub fn linear_gram(rows: &[Vec<f64>], cols: &[Vec<f64>]) -> Array2<f64> {
    let mut k = Array2::zeros((rows.len(), cols.len()));
    for (i, a) in rows.iter().enumerate() {
        for (j, b) in cols.iter().enumerate() {
            k[[i, j]] = a.iter().zip(b).map(|(x, y)| x * y).sum();
        }
    }
    k
}

/// Clamps negative eigenvalues when the smallest is below `−PSD_CLAMP_THRESHOLD`.
///
/// A successful Cholesky factorization of `K + εI` proves `λ_min > −ε` and skips the
/// eigendecomposition.
pub fn psd_project(k: &mut Array2<f64>) -> Result<PsdReport> {
    let n = k.nrows();
    let mut m = DMatrix::from_row_slice(n, n, &row_major(k));
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("gram contains non-finite entries".into()));
    }
    let mut probe = m.clone();
    for i in 0..n {
        probe[(i, i)] += PSD_CLAMP_THRESHOLD;
    }
    if probe.cholesky().is_some() {
        return Ok(PsdReport { min_eigenvalue: None, clamped: false });
    }
    let eig = m.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min >= -PSD_CLAMP_THRESHOLD {
        return Ok(PsdReport { min_eigenvalue: Some(min), clamped: false });
    }
    let clamped = eig.eigenvalues.map(|v| v.max(0.0));
    m = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    for i in 0..n {
        for j in 0..n {
            k[[i, j]] = 0.5 * (m[(i, j)] + m[(j, i)]);
        }
    }
    Ok(PsdReport { min_eigenvalue: Some(min), clamped: true })
}

/// `HKH` on the train block and the matching four-term centering on every out-of-sample row.
pub fn center_gram(mut bundle: GramBundle) -> Result<GramBundle> {
    if bundle.is_centered() {
        return Err(Error::invalid("gram bundle is already centered"));
    }
    let stats = CenteringStats::from_gram(&bundle.train_gram);
    let n = bundle.n_train();
    let (m, g) = (&stats.row_means, stats.grand_mean);
    for i in 0..n {
        for j in 0..n {
            bundle.train_gram[[i, j]] += g - m[i] - m[j];
        }
    }
    for block in [&mut bundle.val_block, &mut bundle.test_block].into_iter().flatten() {
        for mut row in block.rows_mut() {
            let centered = center_test_row(row.as_slice().expect("standard layout"), &stats)?;
            row.iter_mut().zip(centered).for_each(|(r, c)| *r = c);
        }
    }
    bundle.stats = Some(stats);
    Ok(bundle)
}

/// `r − m − mean(r)·1 + g` with the train statistics.
pub fn center_test_row(row: &[f64], stats: &CenteringStats) -> Result<Vec<f64>> {
    let n = stats.row_means.len();
    if row.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: row.len() });
    }
    let mean = row.iter().sum::<f64>() / n as f64;
    Ok(row.iter().zip(&stats.row_means).map(|(r, m)| r - m - mean + stats.grand_mean).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn random_angles(n: usize, q: usize, seed: u64) -> Vec<AngleVector> {
        let mut rng = crate::rng::rng_from_seed(seed);
        (0..n).map(|_| AngleVector::new((0..q).map(|_| rng.random_range(-PI..PI)).collect()).unwrap()).collect()
    }

    #[test]
    fn single_sample_gram_is_one() {
        let spec = FeatureMapSpec::new(2, 1).unwrap();
        let b = build_gram(&random_angles(1, 2, 0), None, None, &spec).unwrap();
        assert_eq!(b.train_gram, array![[1.0]]);
        let c = center_gram(b).unwrap();
        assert_eq!(c.train_gram[[0, 0]], 0.0);
        assert_eq!(center_test_row(&[0.37], c.stats.as_ref().unwrap()).unwrap(), vec![0.0]);
    }

    #[test]
    fn gram_matches_pairwise_kernels() {
        let spec = FeatureMapSpec::new(3, 2).unwrap();
        let train = random_angles(3, 3, 1);
        let test = random_angles(2, 3, 2);
        let b = build_gram(&train, None, Some(&test), &spec).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let k = super::super::fidelity_kernel(&train[i], &train[j], &spec).unwrap();
                assert!((b.train_gram[[i, j]] - k).abs() < 1e-14);
            }
            for t in 0..2 {
                let k = super::super::fidelity_kernel(&test[t], &train[i], &spec).unwrap();
                assert!((b.test_block.as_ref().unwrap()[[t, i]] - k).abs() < 1e-14);
            }
        }
        assert!(build_gram(&[], None, None, &spec).is_err());
    }

    #[test]
    fn two_by_two_centering() {
        let b = GramBundle::from_blocks(None, array![[1.0, 0.5], [0.5, 1.0]], None, None).unwrap();
        let c = center_gram(b).unwrap();
        assert_eq!(c.train_gram, array![[0.25, -0.25], [-0.25, 0.25]]);
        assert!(center_gram(c).is_err());
    }

    #[test]
    fn constant_row_against_identity_is_constant() {
        let stats = CenteringStats::from_gram(&Array2::eye(5));
        let out = center_test_row(&[0.3; 5], &stats).unwrap();
        assert!(out.iter().all(|v| (v - out[0]).abs() < 1e-15));
        assert!(center_test_row(&[0.3; 4], &stats).is_err());
    }

    #[test]
    fn clamping_repairs_indefinite_matrix() {
        let mut k = array![[1.0, 2.0], [2.0, 1.0]];
        let r = psd_project(&mut k).unwrap();
        assert!(r.clamped);
        assert!((r.min_eigenvalue.unwrap() + 1.0).abs() < 1e-12);
        assert!((k[[0, 0]] - 1.5).abs() < 1e-12 && (k[[0, 1]] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn save_load_is_bit_exact() {
        let spec = FeatureMapSpec::new(2, 2).unwrap();
        let train = random_angles(5, 2, 3);
        let val = random_angles(3, 2, 4);
        let b = center_gram(build_gram(&train, Some(&val), None, &spec).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        b.save(dir.path()).unwrap();
        let back = GramBundle::load(dir.path()).unwrap();
        assert_eq!(back, b);
        std::fs::write(dir.path().join("val.f64"), [0u8; 24 * 4]).unwrap();
        assert!(GramBundle::load(dir.path()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn centered_means_vanish_and_rows_match(seed in any::<u64>()) {
            let mut rng = crate::rng::rng_from_seed(seed);
            let x: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let raw = linear_gram(&x, &x);
            let c = center_gram(GramBundle::from_blocks(None, raw.clone(), None, None).unwrap()).unwrap();
            let stats = c.stats.clone().unwrap();
            for i in 0..6 {
                prop_assert!(c.train_gram.row(i).sum().abs() / 6.0 < 1e-9);
                prop_assert!(c.train_gram.column(i).sum().abs() / 6.0 < 1e-9);
                let row = center_test_row(raw.row(i).as_slice().unwrap(), &stats).unwrap();
                for j in 0..6 {
                    prop_assert!((row[j] - c.train_gram[[i, j]]).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn permutation_equivariance(seed in any::<u64>()) {
            let spec = FeatureMapSpec::new(2, 1).unwrap();
            let train = random_angles(5, 2, seed);
            let perm = [3usize, 0, 4, 1, 2];
            let permuted: Vec<AngleVector> = perm.iter().map(|&p| train[p].clone()).collect();
            let k = train_gram(&train, &spec).unwrap();
            let kp = train_gram(&permuted, &spec).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    prop_assert_eq!(kp[[i, j]], k[[perm[i], perm[j]]]);
                }
            }
        }
    }
}
