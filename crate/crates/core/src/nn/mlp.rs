use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default architecture: 8 channel features, two hidden layers of 100, one
/// power output.
pub const DEFAULT_DIMS: [usize; 4] = [8, 100, 100, 1];

/// Per-feature z-score statistics applied before the first layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    /// Statistics over the rows of `xs`. Constant features get unit scale.
    pub fn fit<'a>(xs: impl Iterator<Item = &'a [f64]>, dim: usize) -> Self {
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        let mut sum_sq = vec![0.0; dim];
        for x in xs {
            for (j, v) in x.iter().enumerate() {
                sum[j] += v;
                sum_sq[j] += v * v;
            }
            n += 1;
        }
        let n = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let std = sum_sq
            .iter()
            .zip(&mean)
            .map(|(sq, m)| {
                let var = (sq / n - m * m).max(0.0);
                if var > 1e-24 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (x[j] - self.mean[j]) / self.std[j];
        }
    }
}

/// Fully connected network: ReLU on hidden layers, identity on the output.
///
/// `weights[l]` maps layer `l` to layer `l + 1` and is stored row-major with
/// shape `(dims[l + 1], dims[l])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    normalization: Option<Normalization>,
}

/// Per-layer activations `a` (including the input) and pre-activations `z`
/// from one forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    /// `activations[0]` is the (normalized) input, the last entry the output.
    pub activations: Vec<Vec<f64>>,
    /// `pre_activations[l]` is `z` of layer `l + 1`.
    pub pre_activations: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn for_model(m: &Mlp) -> Self {
        Self {
            activations: m.dims.iter().map(|&d| vec![0.0; d]).collect(),
            pre_activations: m.dims[1..].iter().map(|&d| vec![0.0; d]).collect(),
        }
    }

    pub fn output(&self) -> f64 {
        self.activations.last().expect("non-empty cache")[0]
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::invalid(
            "a network needs at least an input and an output layer",
        ));
    }
    if dims.contains(&0) {
        return Err(Error::invalid(format!(
            "layer sizes must be positive: {dims:?}"
        )));
    }
    if *dims.last().unwrap() != 1 {
        return Err(Error::invalid(
            "the output layer must have exactly one unit",
        ));
    }
    Ok(())
}

impl Mlp {
    pub fn from_parts(
        dims: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self> {
        check_dims(&dims)?;
        let layers = dims.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::invalid(format!(
                "expected {layers} weight and bias arrays, got {} and {}",
                weights.len(),
                biases.len()
            )));
        }
        for l in 0..layers {
            if weights[l].len() != dims[l + 1] * dims[l] || biases[l].len() != dims[l + 1] {
                return Err(Error::invalid(format!(
                    "layer {l} shape does not match dims {dims:?}"
                )));
            }
        }
        if weights
            .iter()
            .chain(&biases)
            .flatten()
            .any(|v| !v.is_finite())
        {
            return Err(Error::invalid("network parameters must be finite"));
        }
        Ok(Self {
            dims,
            weights,
            biases,
            normalization: None,
        })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        let weights = dims.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let biases = dims[1..].iter().map(|&d| vec![0.0; d]).collect();
        Ok(Self {
            dims: dims.to_vec(),
            weights,
            biases,
            normalization: None,
        })
    }

    pub fn with_normalization(mut self, norm: Option<Normalization>) -> Result<Self> {
        if let Some(n) = &norm {
            if n.mean.len() != self.dims[0] || n.std.len() != self.dims[0] {
                return Err(Error::invalid(
                    "normalization length does not match input size",
                ));
            }
            if n.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(Error::invalid("normalization scales must be positive"));
            }
        }
        self.normalization = norm;
        Ok(self)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub fn normalization(&self) -> Option<&Normalization> {
        self.normalization.as_ref()
    }

    /// Forward pass into a reusable cache. Returns `false` if any
    /// pre-activation is non-finite.
    pub fn forward_into(&self, x: &[f64], cache: &mut ForwardCache) -> bool {
        assert_eq!(
            x.len(),
            self.dims[0],
            "input length does not match the network"
        );
        match &self.normalization {
            Some(n) => n.apply(x, &mut cache.activations[0]),
            None => cache.activations[0].copy_from_slice(x),
        }
        let last = self.num_layers() - 1;
        let mut finite = true;
        for l in 0..=last {
            let (prev, rest) = cache.activations.split_at_mut(l + 1);
            let a_in = &prev[l];
            let a_out = &mut rest[0];
            let z = &mut cache.pre_activations[l];
            let w = &self.weights[l];
            let n_in = self.dims[l];
            for (i, (zi, bi)) in z.iter_mut().zip(&self.biases[l]).enumerate() {
                let row = &w[i * n_in..(i + 1) * n_in];
                *zi = bi + row.iter().zip(a_in).map(|(wi, ai)| wi * ai).sum::<f64>();
                finite &= zi.is_finite();
            }
            if l == last {
                a_out.copy_from_slice(z);
            } else {
                for (a, zi) in a_out.iter_mut().zip(z.iter()) {
                    *a = if *zi > 0.0 { *zi } else { 0.0 };
                }
            }
        }
        finite
    }

    /// Raw (unclipped) network output.
    pub fn output(&self, x: &[f64], cache: &mut ForwardCache) -> f64 {
        self.forward_into(x, cache);
        cache.output()
    }
}

/// Xavier-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
pub fn xavier_init(dims: &[usize], seed: u64) -> Result<Mlp> {
    let mut m = Mlp::zeros(dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (l, w) in m.weights.iter_mut().enumerate() {
        let bound = (6.0 / (dims[l] + dims[l + 1]) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        for v in w.iter_mut() {
            *v = dist.sample(&mut rng);
        }
    }
    Ok(m)
}

/// Forward pass returning the output and the full cache for backprop.
pub fn forward(m: &Mlp, x: &[f64]) -> Result<(f64, ForwardCache)> {
    if x.len() != m.input_dim() {
        return Err(Error::invalid(format!(
            "expected {} features, got {}",
            m.input_dim(),
            x.len()
        )));
    }
    let mut cache = ForwardCache::for_model(m);
    if !m.forward_into(x, &mut cache) {
        return Err(Error::Divergence {
            step: 0,
            detail: "non-finite activation in forward pass".into(),
        });
    }
    Ok((cache.output(), cache))
}

/// Network power estimate clipped to `[0, max_power]`.
pub fn predict_power(m: &Mlp, x: &[f64], max_power: f64) -> f64 {
    let mut cache = ForwardCache::for_model(m);
    clip_power(m.output(x, &mut cache), max_power)
}

/// `min(max(raw, 0), max_power)`; a NaN output maps to zero power.
pub fn clip_power(raw: f64, max_power: f64) -> f64 {
    if raw > 0.0 {
        raw.min(max_power)
    } else {
        0.0
    }
}

/// Inference-only copy of a network laid out for fast batch prediction.
///
/// Weights are stored transposed, so each layer is accumulated as a sum of
/// columns scaled by the incoming activations; inactive ReLU units are
/// skipped outright.
#[derive(Debug, Clone)]
pub struct Predictor {
    dims: Vec<usize>,
    /// `columns[l][j * dims[l + 1] + i] = W^(l)[i][j]`
    columns: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    normalization: Option<Normalization>,
    max_power: f64,
}

impl Predictor {
    pub fn new(m: &Mlp, max_power: f64) -> Self {
        let columns = m
            .weights
            .iter()
            .enumerate()
            .map(|(l, w)| {
                let (n_in, n_out) = (m.dims[l], m.dims[l + 1]);
                let mut t = vec![0.0; w.len()];
                for i in 0..n_out {
                    for j in 0..n_in {
                        t[j * n_out + i] = w[i * n_in + j];
                    }
                }
                t
            })
            .collect();
        Self {
            dims: m.dims.clone(),
            columns,
            biases: m.biases.clone(),
            normalization: m.normalization.clone(),
            max_power,
        }
    }

    /// Raw network output for one input, using `bufs` as scratch space.
    pub fn raw(&self, x: &[f64], bufs: &mut [Vec<f64>; 2]) -> f64 {
        assert_eq!(
            x.len(),
            self.dims[0],
            "input length does not match the network"
        );
        let [a, z] = bufs;
        a.clear();
        match &self.normalization {
            Some(n) => a.extend(
                x.iter()
                    .zip(n.mean.iter().zip(&n.std))
                    .map(|(v, (m, s))| (v - m) / s),
            ),
            None => a.extend_from_slice(x),
        }
        let last = self.columns.len() - 1;
        for (l, cols) in self.columns.iter().enumerate() {
            let n_out = self.dims[l + 1];
            z.clear();
            z.extend_from_slice(&self.biases[l]);
            for (j, &aj) in a.iter().enumerate() {
                if aj != 0.0 {
                    for (zi, wij) in z.iter_mut().zip(&cols[j * n_out..(j + 1) * n_out]) {
                        *zi += aj * wij;
                    }
                }
            }
            if l != last {
                z.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            std::mem::swap(a, z);
        }
        a[0]
    }

    /// Clipped power for every input row.
    pub fn predict_batch<'a>(&self, xs: impl IntoIterator<Item = &'a [f64]>) -> Vec<f64> {
        let width = self.dims.iter().copied().max().unwrap_or(1);
        let mut bufs = [Vec::with_capacity(width), Vec::with_capacity(width)];
        xs.into_iter()
            .map(|x| clip_power(self.raw(x, &mut bufs), self.max_power))
            .collect()
    }
}
