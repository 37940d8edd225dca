use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persist;
use crate::rng::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub input_dim: usize,
    pub hidden_sizes: Vec<usize>,
    pub embed_dim: usize,
    pub dropout: f64,
    #[serde(default = "default_ln_eps")]
    pub layer_norm_eps: f64,
    pub seed: u64,
}

fn default_ln_eps() -> f64 {
    1e-5
}

impl EncoderConfig {
    pub fn new(input_dim: usize, hidden_sizes: Vec<usize>) -> Self {
        EncoderConfig { input_dim, hidden_sizes, embed_dim: 12, dropout: 0.15, layer_norm_eps: 1e-5, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::invalid("input_dim must be positive"));
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) {
            return Err(Error::invalid("need at least one hidden block, all sizes positive"));
        }
        if self.embed_dim < 2 {
            return Err(Error::invalid("embed_dim must be at least 2"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        if !(self.layer_norm_eps > 0.0) {
            return Err(Error::invalid("layer_norm_eps must be positive"));
        }
        Ok(())
    }
}

/// Exact `t Φ(t)`.
pub fn gelu(t: f64) -> f64 {
    0.5 * t * (1.0 + libm::erf(t * FRAC_1_SQRT_2))
}

/// `Φ(t) + t φ(t)`.
pub fn gelu_grad(t: f64) -> f64 {
    let cdf = 0.5 * (1.0 + libm::erf(t * FRAC_1_SQRT_2));
    let pdf = (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
    cdf + t * pdf
}

/// Normalizes `v` in place to `(v − μ)/√(σ² + eps)` and returns the inverse scale.
pub fn layer_norm(v: &mut [f64], eps: f64) -> f64 {
    let h = v.len() as f64;
    let mean = v.iter().sum::<f64>() / h;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / h;
    let inv = 1.0 / (var + eps).sqrt();
    v.iter_mut().for_each(|x| *x = (*x - mean) * inv);
    inv
}

pub fn gelu_tanh(t: f64) -> f64 {
    0.5 * t * (1.0 + ((2.0 / PI).sqrt() * (t + 0.044715 * t * t * t)).tanh())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    /// `h_out × h_in`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

/// Every trainable tensor; also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub blocks: Vec<Block>,
    /// `d_e × h_L`
    pub we: Array2<f64>,
    pub be: Array1<f64>,
    /// `2 × d_e`
    pub wc: Array2<f64>,
    pub bc: Array1<f64>,
}

impl Params {
    pub fn zeros_like(&self) -> Self {
        let z2 = |a: &Array2<f64>| Array2::zeros(a.raw_dim());
        let z1 = |a: &Array1<f64>| Array1::zeros(a.len());
        Params {
            blocks: self
                .blocks
                .iter()
                .map(|b| Block { w: z2(&b.w), b: z1(&b.b), gamma: z1(&b.gamma), beta: z1(&b.beta) })
                .collect(),
            we: z2(&self.we),
            be: z1(&self.be),
            wc: z2(&self.wc),
            bc: z1(&self.bc),
        }
    }

    /// Tensors in declared order with stable names.
    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let s = slice_of;
        let mut out = Vec::new();
        for (l, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{l}.w"), s(&b.w)));
            out.push((format!("block{l}.b"), slice1(&b.b)));
            out.push((format!("block{l}.gamma"), slice1(&b.gamma)));
            out.push((format!("block{l}.beta"), slice1(&b.beta)));
        }
        out.push(("embed.w".into(), s(&self.we)));
        out.push(("embed.b".into(), slice1(&self.be)));
        out.push(("classifier.w".into(), s(&self.wc)));
        out.push(("classifier.b".into(), slice1(&self.bc)));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for b in self.blocks.iter_mut() {
            out.push(b.w.as_slice_mut().expect("standard layout"));
            out.push(b.b.as_slice_mut().expect("standard layout"));
            out.push(b.gamma.as_slice_mut().expect("standard layout"));
            out.push(b.beta.as_slice_mut().expect("standard layout"));
        }
        out.push(self.we.as_slice_mut().expect("standard layout"));
        out.push(self.be.as_slice_mut().expect("standard layout"));
        out.push(self.wc.as_slice_mut().expect("standard layout"));
        out.push(self.bc.as_slice_mut().expect("standard layout"));
        out
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

fn slice_of(a: &Array2<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn slice1(a: &Array1<f64>) -> &[f64] {
    a.as_slice().expect("standard layout")
}

fn uniform_matrix(rows: usize, cols: usize, bound: f64, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

fn uniform_vector(len: usize, bound: f64, rng: &mut Rng) -> Array1<f64> {
    Array1::from_shape_fn(len, |_| rng.random_range(-bound..bound))
}

struct BlockCache {
    input: Array2<f64>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    affine: Array2<f64>,
    /// Already scaled by `1/(1−p)`.
    mask: Option<Array2<f64>>,
}

struct Cache {
    blocks: Vec<BlockCache>,
    last_hidden: Array2<f64>,
    norms: Array1<f64>,
    embeddings: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    /// `B × 2`
    pub logits: Array2<f64>,
    /// `B × d_e`, rows of unit norm.
    pub embeddings: Array2<f64>,
}

impl ForwardOutput {
    /// `logit₁ − logit₀`, the positive-class margin.
    pub fn margins(&self) -> Vec<f64> {
        self.logits.rows().into_iter().map(|r| r[1] - r[0]).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    pub config: EncoderConfig,
    pub params: Params,
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    config: EncoderConfig,
    tensors: Vec<(String, usize)>,
    sha256: String,
    init: String,
    gelu: String,
}

impl EncoderModel {
    pub const INIT_TAG: &'static str = "uniform(+-1/sqrt(fan_in)); gamma=1, beta=0";
    pub const GELU_TAG: &'static str = "exact-erf";

    /// Fan-in uniform initialization for every linear layer.
    pub fn new(config: EncoderConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_from_seed(derive_seed(config.seed, &[0]));
        let mut blocks = Vec::new();
        let mut fan_in = config.input_dim;
        for &h in &config.hidden_sizes {
            let bound = 1.0 / (fan_in as f64).sqrt();
            blocks.push(Block {
                w: uniform_matrix(h, fan_in, bound, &mut rng),
                b: uniform_vector(h, bound, &mut rng),
                gamma: Array1::ones(h),
                beta: Array1::zeros(h),
            });
            fan_in = h;
        }
        let bound = 1.0 / (fan_in as f64).sqrt();
        let we = uniform_matrix(config.embed_dim, fan_in, bound, &mut rng);
        let be = uniform_vector(config.embed_dim, bound, &mut rng);
        let bound = 1.0 / (config.embed_dim as f64).sqrt();
        let wc = uniform_matrix(2, config.embed_dim, bound, &mut rng);
        let bc = uniform_vector(2, bound, &mut rng);
        Ok(EncoderModel { config, params: Params { blocks, we, be, wc, bc } })
    }

    fn run(&self, x: ArrayView2<f64>, mut dropout: Option<&mut Rng>) -> Result<(ForwardOutput, Cache)> {
        if x.ncols() != self.config.input_dim {
            return Err(Error::DimensionMismatch { expected: self.config.input_dim, got: x.ncols() });
        }
        let p = self.config.dropout;
        let eps = self.config.layer_norm_eps;
        let mut a = x.to_owned();
        let mut caches = Vec::with_capacity(self.params.blocks.len());
        for block in &self.params.blocks {
            let pre = a.dot(&block.w.t()) + &block.b;
            let mut xhat = pre;
            let mut inv_std = Array1::zeros(xhat.nrows());
            for (mut row, s) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
                *s = layer_norm(row.as_slice_mut().expect("standard layout"), eps);
            }
            let affine = &xhat * &block.gamma + &block.beta;
            let mut z = affine.mapv(gelu);
            let mask = match dropout.as_deref_mut() {
                Some(rng) if p > 0.0 => {
                    let keep = 1.0 / (1.0 - p);
                    let m = Array2::from_shape_fn(z.raw_dim(), |_| if rng.random::<f64>() < p { 0.0 } else { keep });
                    z *= &m;
                    Some(m)
                }
                _ => None,
            };
            caches.push(BlockCache { input: a, xhat, inv_std, affine, mask });
            a = z;
        }
        let mut e = a.dot(&self.params.we.t()) + &self.params.be;
        let mut norms = Array1::zeros(e.nrows());
        for (mut row, n) in e.rows_mut().into_iter().zip(norms.iter_mut()) {
            *n = row.dot(&row).sqrt().max(1e-12);
            let inv = 1.0 / *n;
            row.mapv_inplace(|v| v * inv);
        }
        let logits = e.dot(&self.params.wc.t()) + &self.params.bc;
        let out = ForwardOutput { logits, embeddings: e.clone() };
        Ok((out, Cache { blocks: caches, last_hidden: a, norms, embeddings: e }))
    }

    /// Batched forward pass; dropout is active only when an RNG is supplied.
    pub fn forward_batch(&self, x: ArrayView2<f64>, dropout: Option<&mut Rng>) -> Result<ForwardOutput> {
        Ok(self.run(x, dropout)?.0)
    }

    /// Single-sample `(logits, embedding)`; `seed` drives the dropout masks when training.
    pub fn forward(&self, x: &[f64], training: bool, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
        let view = ArrayView2::from_shape((1, x.len()), x).map_err(|e| Error::Numerical(e.to_string()))?;
        let mut rng = rng_from_seed(seed);
        let out = self.forward_batch(view, training.then_some(&mut rng))?;
        Ok((out.logits.row(0).to_vec(), out.embeddings.row(0).to_vec()))
    }

    /// Eval-mode forward over an `f32` feature matrix in chunks.
    pub fn infer(&self, x: ArrayView2<f32>) -> Result<ForwardOutput> {
        const CHUNK: usize = 1024;
        let mut logits = Array2::zeros((x.nrows(), 2));
        let mut embeddings = Array2::zeros((x.nrows(), self.config.embed_dim));
        for start in (0..x.nrows()).step_by(CHUNK) {
            let end = (start + CHUNK).min(x.nrows());
            let chunk = x.slice(ndarray::s![start..end, ..]).mapv(f64::from);
            let out = self.forward_batch(chunk.view(), None)?;
            logits.slice_mut(ndarray::s![start..end, ..]).assign(&out.logits);
            embeddings.slice_mut(ndarray::s![start..end, ..]).assign(&out.embeddings);
        }
        Ok(ForwardOutput { logits, embeddings })
    }

    /// Weighted softmax cross-entropy `Σ w_{y_i} CE_i / Σ w_{y_i}` and its gradient.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<f64>,
        labels: &[u8],
        class_weights: [f64; 2],
        dropout: Option<&mut Rng>,
    ) -> Result<(f64, Params)> {
        if labels.is_empty() {
            return Err(Error::Empty("batch"));
        }
        if labels.len() != x.nrows() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), got: labels.len() });
        }
        crate::metrics::check_labels(labels)?;
        let (out, cache) = self.run(x, dropout)?;
        let (loss, dlogits) = weighted_cross_entropy(&out.logits, labels, class_weights);
        Ok((loss, self.backward(&cache, dlogits, None)))
    }

    /// Loss only, with the same normalization as [`Self::loss_and_gradients`].
    pub fn loss(
        &self,
        x: ArrayView2<f64>,
        labels: &[u8],
        class_weights: [f64; 2],
        dropout: Option<&mut Rng>,
    ) -> Result<f64> {
        if labels.is_empty() {
            return Err(Error::Empty("batch"));
        }
        let out = self.forward_batch(x, dropout)?;
        Ok(weighted_cross_entropy(&out.logits, labels, class_weights).0)
    }

    /// Vector–Jacobian product of the embeddings: gradients of `Σ d_embeddings ⊙ e`.
    pub fn embedding_vjp(
        &self,
        x: ArrayView2<f64>,
        d_embeddings: ArrayView2<f64>,
        dropout: Option<&mut Rng>,
    ) -> Result<(ForwardOutput, Params)> {
        let (out, cache) = self.run(x, dropout)?;
        if d_embeddings.dim() != out.embeddings.dim() {
            return Err(Error::DimensionMismatch { expected: out.embeddings.len(), got: d_embeddings.len() });
        }
        let dlogits = Array2::zeros(out.logits.raw_dim());
        let grads = self.backward(&cache, dlogits, Some(d_embeddings));
        Ok((out, grads))
    }

    fn backward(&self, cache: &Cache, dlogits: Array2<f64>, extra_de: Option<ArrayView2<f64>>) -> Params {
        let p = &self.params;
        let mut g = p.zeros_like();
        g.wc = dlogits.t().dot(&cache.embeddings);
        g.bc = dlogits.sum_axis(Axis(0));
        let mut de = dlogits.dot(&p.wc);
        if let Some(extra) = extra_de {
            de += &extra;
        }
        // d(u/|u|) = (I − e eᵀ)/|u|
        let mut du = de;
        for ((mut row, e), &n) in du.rows_mut().into_iter().zip(cache.embeddings.rows()).zip(&cache.norms) {
            let proj = row.dot(&e);
            row.zip_mut_with(&e, |d, &ei| *d = (*d - ei * proj) / n);
        }
        g.we = du.t().dot(&cache.last_hidden);
        g.be = du.sum_axis(Axis(0));
        let mut dz = du.dot(&p.we);
        for (l, (block, bc)) in p.blocks.iter().zip(&cache.blocks).enumerate().rev() {
            if let Some(m) = &bc.mask {
                dz *= m;
            }
            let dy = &dz * &bc.affine.mapv(gelu_grad);
            g.blocks[l].gamma = (&dy * &bc.xhat).sum_axis(Axis(0));
            g.blocks[l].beta = dy.sum_axis(Axis(0));
            let mut dpre = &dy * &block.gamma;
            let h = dpre.ncols() as f64;
            for ((mut row, xh), &s) in dpre.rows_mut().into_iter().zip(bc.xhat.rows()).zip(&bc.inv_std) {
                let mean_d = row.sum() / h;
                let mean_dx = row.dot(&xh) / h;
                row.zip_mut_with(&xh, |d, &x| *d = s * (*d - mean_d - x * mean_dx));
            }
            g.blocks[l].w = dpre.t().dot(&bc.input);
            g.blocks[l].b = dpre.sum_axis(Axis(0));
            if l > 0 {
                dz = dpre.dot(&block.w);
            }
        }
        g
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tensors = self.params.tensors();
        let mut flat = Vec::with_capacity(self.params.num_params());
        for (_, t) in &tensors {
            flat.extend_from_slice(t);
        }
        let bytes = persist::f64_to_le_bytes(&flat);
        let header = ModelHeader {
            config: self.config.clone(),
            tensors: tensors.iter().map(|(n, t)| (n.clone(), t.len())).collect(),
            sha256: persist::sha256_hex(&bytes),
            init: Self::INIT_TAG.into(),
            gelu: Self::GELU_TAG.into(),
        };
        persist::write_json(&path.with_extension("json"), &header)?;
        persist::write_bytes(&path.with_extension("f64"), &bytes)
    }

    /// Loads `<path>.json` and `<path>.f64` written by [`Self::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let header: ModelHeader = persist::read_json(&path.with_extension("json"))?;
        let bytes = persist::read_bytes(&path.with_extension("f64"))?;
        if persist::sha256_hex(&bytes) != header.sha256 {
            return Err(Error::Integrity("encoder parameter hash mismatch".into()));
        }
        let flat = persist::f64_from_le_bytes(&bytes)?;
        let mut model = EncoderModel::new(header.config)?;
        let expected: Vec<(String, usize)> = model.params.tensors().iter().map(|(n, t)| (n.clone(), t.len())).collect();
        if expected != header.tensors || flat.len() != model.params.num_params() {
            return Err(Error::Integrity("encoder tensor layout mismatch".into()));
        }
        let mut offset = 0;
        for t in model.params.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        Ok(model)
    }
}

/// Returns `(loss, ∂loss/∂logits)`.
fn weighted_cross_entropy(logits: &Array2<f64>, labels: &[u8], w: [f64; 2]) -> (f64, Array2<f64>) {
    let total: f64 = labels.iter().map(|&y| w[y as usize]).sum();
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let (l0, l1) = (logits[[i, 0]], logits[[i, 1]]);
        let m = l0.max(l1);
        let lse = m + ((l0 - m).exp() + (l1 - m).exp()).ln();
        let wi = w[y as usize] / total;
        loss += wi * (lse - logits[[i, y as usize]]);
        for c in 0..2 {
            let p = (logits[[i, c]] - lse).exp();
            grad[[i, c]] = wi * (p - if c == y as usize { 1.0 } else { 0.0 });
        }
    }
    (loss, grad)
}
