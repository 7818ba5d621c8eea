//! Loss, backpropagation, update rules and the mini-batch training loop.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::mlp::{xavier_init, ForwardCache, Mlp, Normalization, DEFAULT_DIMS};

/// One labeled training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Vec<f64>,
    pub label: f64,
}

impl Example {
    pub fn new(x: impl Into<Vec<f64>>, label: f64) -> Self {
        Self { x: x.into(), label }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularization {
    None,
    L1,
    L2,
}

impl Regularization {
    pub const ALL: [Regularization; 3] =
        [Regularization::None, Regularization::L1, Regularization::L2];

    pub fn as_str(&self) -> &'static str {
        match self {
            Regularization::None => "none",
            Regularization::L1 => "l1",
            Regularization::L2 => "l2",
        }
    }
}

impl std::str::FromStr for Regularization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Regularization::None),
            "l1" => Ok(Regularization::L1),
            "l2" => Ok(Regularization::L2),
            other => Err(Error::invalid(format!("unknown regularization {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Optimizer {
    PlainGd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub const ADAM: Optimizer = Optimizer::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub layer_dims: Vec<usize>,
    pub learning_rate: f64,
    pub reg_lambda: f64,
    pub batch_size: usize,
    pub regularization: Regularization,
    pub optimizer: Optimizer,
    pub epochs: usize,
    pub seed: u64,
    /// Standardize inputs with training-set statistics stored in the model.
    pub standardize: bool,
    /// Stop after this many history points without a new best validation MSE.
    pub early_stopping_patience: Option<usize>,
    /// Steps between history samples.
    pub history_stride: usize,
    /// Validation rows scored at each history sample; `None` scores all.
    pub history_val_rows: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            layer_dims: DEFAULT_DIMS.to_vec(),
            learning_rate: 1e-4,
            reg_lambda: 5e-4,
            batch_size: 10,
            regularization: Regularization::None,
            optimizer: Optimizer::ADAM,
            epochs: 10,
            seed: 0,
            standardize: false,
            early_stopping_patience: None,
            history_stride: 100,
            history_val_rows: Some(2000),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.reg_lambda.is_finite() && self.reg_lambda >= 0.0) {
            return Err(Error::invalid("regularization weight must be nonnegative"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.history_stride == 0 {
            return Err(Error::invalid("history stride must be at least 1"));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
                return Err(Error::invalid(
                    "Adam needs beta1, beta2 in [0, 1) and eps > 0",
                ));
            }
        }
        Ok(())
    }
}

/// Parameter gradients with the same shapes as the network, averaged over a
/// batch of `batch_len` examples.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub batch_len: usize,
}

impl GradientSet {
    pub fn zeros_like(m: &Mlp) -> Self {
        Self {
            weights: m.weights().iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: m.biases().iter().map(|b| vec![0.0; b.len()]).collect(),
            batch_len: 0,
        }
    }

    fn clear(&mut self) {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .flatten()
            .for_each(|g| *g = 0.0);
        self.batch_len = 0;
    }
}

fn sign(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Mean squared error over the batch plus the selected weight penalty
/// (`lambda / 2M` times the L1 norm or the squared L2 norm; biases excluded).
pub fn loss(m: &Mlp, batch: &[Example], reg: Regularization, lambda: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("loss needs a nonempty batch"));
    }
    let mut cache = ForwardCache::for_model(m);
    let sse: f64 = batch
        .iter()
        .map(|ex| {
            let y = m.output(&ex.x, &mut cache);
            (y - ex.label) * (y - ex.label)
        })
        .sum();
    let batch_len = batch.len() as f64;
    let penalty = match reg {
        Regularization::None => 0.0,
        Regularization::L1 => m.weights().iter().flatten().map(|w| w.abs()).sum::<f64>(),
        Regularization::L2 => m.weights().iter().flatten().map(|w| w * w).sum::<f64>(),
    };
    Ok(sse / batch_len + lambda / (2.0 * batch_len) * penalty)
}

/// Reusable buffers for per-example backpropagation.
struct Backprop {
    cache: ForwardCache,
    delta: Vec<Vec<f64>>,
}

impl Backprop {
    fn new(m: &Mlp) -> Self {
        Self {
            cache: ForwardCache::for_model(m),
            delta: m.dims()[1..].iter().map(|&d| vec![0.0; d]).collect(),
        }
    }

    /// Adds one example's `delta a^T` and `delta` sums into `grads`; returns
    /// the squared error, or `None` if the forward pass was not finite.
    fn accumulate(&mut self, m: &Mlp, ex: &Example, grads: &mut GradientSet) -> Option<f64> {
        if !m.forward_into(&ex.x, &mut self.cache) {
            return None;
        }
        let residual = self.cache.output() - ex.label;
        let last = m.num_layers() - 1;
        self.delta[last][0] = 2.0 * residual;

        for l in (0..=last).rev() {
            let n_in = m.dims()[l];
            let a_in = &self.cache.activations[l];
            let (lower, upper) = self.delta.split_at_mut(l);
            let delta = &upper[0];
            let gw = &mut grads.weights[l];
            for (i, d) in delta.iter().enumerate() {
                grads.biases[l][i] += d;
                if *d != 0.0 {
                    for (g, a) in gw[i * n_in..(i + 1) * n_in].iter_mut().zip(a_in) {
                        *g += d * a;
                    }
                }
            }
            if l > 0 {
                // delta^(l) = (W^(l))^T delta^(l+1) * relu'(z^(l))
                let prev = &mut lower[l - 1];
                let z = &self.cache.pre_activations[l - 1];
                prev.iter_mut().for_each(|p| *p = 0.0);
                let w = &m.weights()[l];
                for (i, d) in delta.iter().enumerate() {
                    if *d != 0.0 {
                        for (p, wij) in prev.iter_mut().zip(&w[i * n_in..(i + 1) * n_in]) {
                            *p += wij * d;
                        }
                    }
                }
                for (p, zj) in prev.iter_mut().zip(z) {
                    if *zj <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
        }
        grads.batch_len += 1;
        Some(residual * residual)
    }

    /// Gradient of the batch MSE into `grads`; returns the batch MSE.
    fn batch(&mut self, m: &Mlp, batch: &[Example], grads: &mut GradientSet) -> Option<f64> {
        grads.clear();
        let mut sse = 0.0;
        for ex in batch {
            sse += self.accumulate(m, ex, grads)?;
        }
        let scale = 1.0 / batch.len() as f64;
        grads
            .weights
            .iter_mut()
            .chain(grads.biases.iter_mut())
            .flatten()
            .for_each(|g| *g *= scale);
        let mse = sse * scale;
        mse.is_finite().then_some(mse)
    }
}

/// Gradient of the batch MSE: `(1/M) sum delta a^T` for weights and
/// `(1/M) sum delta` for biases.
pub fn backprop(m: &Mlp, batch: &[Example]) -> Result<GradientSet> {
    if batch.is_empty() {
        return Err(Error::invalid("backprop needs a nonempty batch"));
    }
    let mut grads = GradientSet::zeros_like(m);
    Backprop::new(m)
        .batch(m, batch, &mut grads)
        .ok_or_else(|| Error::Divergence {
            step: 0,
            detail: "non-finite forward pass".into(),
        })?;
    Ok(grads)
}

/// Gradient of [`loss`], including the penalty term. L1 uses the
/// subgradient `sign(w)` with `sign(0) = 0`.
pub fn full_gradient(
    m: &Mlp,
    batch: &[Example],
    reg: Regularization,
    lambda: f64,
) -> Result<GradientSet> {
    let mut grads = backprop(m, batch)?;
    let batch_len = grads.batch_len as f64;
    for (gw, w) in grads.weights.iter_mut().zip(m.weights()) {
        for (g, wi) in gw.iter_mut().zip(w) {
            *g += match reg {
                Regularization::None => 0.0,
                Regularization::L1 => lambda / (2.0 * batch_len) * sign(*wi),
                Regularization::L2 => lambda / batch_len * wi,
            };
        }
    }
    Ok(grads)
}

fn step_biases(m: &mut Mlp, grads: &GradientSet, lr: f64) {
    for (b, g) in m.biases_mut().iter_mut().zip(&grads.biases) {
        for (bi, gi) in b.iter_mut().zip(g) {
            *bi -= lr * gi;
        }
    }
}

/// `W <- W - alpha * grad`, `b <- b - alpha * grad_b`.
pub fn step_plain(m: &mut Mlp, grads: &GradientSet, cfg: &TrainConfig) {
    let lr = cfg.learning_rate;
    for (w, g) in m.weights_mut().iter_mut().zip(&grads.weights) {
        for (wi, gi) in w.iter_mut().zip(g) {
            *wi -= lr * gi;
        }
    }
    step_biases(m, grads, lr);
}

/// Gradient step plus the L1 shrinkage `(alpha lambda / 2M) sign(W)`.
pub fn step_l1(m: &mut Mlp, grads: &GradientSet, cfg: &TrainConfig) {
    let lr = cfg.learning_rate;
    let shrink = lr * cfg.reg_lambda / (2.0 * grads.batch_len as f64);
    for (w, g) in m.weights_mut().iter_mut().zip(&grads.weights) {
        for (wi, gi) in w.iter_mut().zip(g) {
            *wi = *wi - lr * gi - shrink * sign(*wi);
        }
    }
    step_biases(m, grads, lr);
}

/// Multiplicative decay `(1 - alpha lambda / M)` followed by the gradient step.
pub fn step_l2(m: &mut Mlp, grads: &GradientSet, cfg: &TrainConfig) {
    let lr = cfg.learning_rate;
    let decay = l2_decay_factor(cfg.learning_rate, cfg.reg_lambda, grads.batch_len);
    for (w, g) in m.weights_mut().iter_mut().zip(&grads.weights) {
        for (wi, gi) in w.iter_mut().zip(g) {
            *wi = decay * *wi - lr * gi;
        }
    }
    step_biases(m, grads, lr);
}

pub fn l2_decay_factor(learning_rate: f64, lambda: f64, batch_len: usize) -> f64 {
    1.0 - learning_rate * lambda / batch_len as f64
}

/// First and second moment estimates for Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(m: &Mlp) -> Self {
        let zw: Vec<Vec<f64>> = m.weights().iter().map(|w| vec![0.0; w.len()]).collect();
        let zb: Vec<Vec<f64>> = m.biases().iter().map(|b| vec![0.0; b.len()]).collect();
        Self {
            step: 0,
            m_w: zw.clone(),
            v_w: zw,
            m_b: zb.clone(),
            v_b: zb,
        }
    }
}

/// Bias-corrected Adam step. The penalty gradient is folded into the weight
/// gradient before the moment update.
pub fn step_adam(m: &mut Mlp, grads: &GradientSet, state: &mut AdamState, cfg: &TrainConfig) {
    let Optimizer::Adam { beta1, beta2, eps } = cfg.optimizer else {
        panic!("step_adam called with a non-Adam optimizer");
    };
    state.step += 1;
    let lr = cfg.learning_rate;
    let c1 = 1.0 - beta1.powi(state.step as i32);
    let c2 = 1.0 - beta2.powi(state.step as i32);
    let batch_len = grads.batch_len as f64;
    let reg = cfg.regularization;
    let lambda = cfg.reg_lambda;

    let update = |p: &mut f64, g: f64, mo: &mut f64, ve: &mut f64| {
        *mo = beta1 * *mo + (1.0 - beta1) * g;
        *ve = beta2 * *ve + (1.0 - beta2) * g * g;
        let m_hat = *mo / c1;
        let v_hat = *ve / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };

    for l in 0..m.num_layers() {
        let w = &mut m.weights_mut()[l];
        for (k, wi) in w.iter_mut().enumerate() {
            let g = grads.weights[l][k]
                + match reg {
                    Regularization::None => 0.0,
                    Regularization::L1 => lambda / (2.0 * batch_len) * sign(*wi),
                    Regularization::L2 => lambda / batch_len * *wi,
                };
            update(wi, g, &mut state.m_w[l][k], &mut state.v_w[l][k]);
        }
        let b = &mut m.biases_mut()[l];
        for (k, bi) in b.iter_mut().enumerate() {
            update(
                bi,
                grads.biases[l][k],
                &mut state.m_b[l][k],
                &mut state.v_b[l][k],
            );
        }
    }
}

/// One sampled point of the training curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub step: usize,
    /// Mean mini-batch MSE since the previous sample.
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Mlp,
    pub history: Vec<HistoryPoint>,
    pub final_train_mse: f64,
    pub final_val_mse: f64,
    pub steps: usize,
}

/// Plain MSE of the network over `rows`.
pub fn mse(m: &Mlp, rows: &[Example]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let mut cache = ForwardCache::for_model(m);
    rows.iter()
        .map(|ex| {
            let r = m.output(&ex.x, &mut cache) - ex.label;
            r * r
        })
        .sum::<f64>()
        / rows.len() as f64
}

/// Mini-batch training. Deterministic for a fixed `(train, val, cfg)`.
pub fn train(train: &[Example], val: &[Example], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let input_dim = cfg.layer_dims[0];
    if train.iter().chain(val).any(|ex| ex.x.len() != input_dim) {
        return Err(Error::invalid(format!(
            "every example must have {input_dim} features"
        )));
    }

    let mut model = xavier_init(&cfg.layer_dims, cfg.seed)?;
    if cfg.standardize {
        let norm = Normalization::fit(train.iter().map(|ex| ex.x.as_slice()), input_dim);
        model = model.with_normalization(Some(norm))?;
    }

    let val_probe = match cfg.history_val_rows {
        Some(n) => &val[..n.min(val.len())],
        None => val,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_5eed_5eed_5eed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut batch: Vec<Example> = Vec::with_capacity(cfg.batch_size);
    let mut grads = GradientSet::zeros_like(&model);
    let mut bp = Backprop::new(&model);
    let mut adam = AdamState::new(&model);

    let mut history = Vec::new();
    let mut step = 0usize;
    let mut running = (0.0, 0usize);
    let mut best_val = f64::INFINITY;
    let mut since_best = 0usize;

    'epochs: for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| train[i].clone()));
            let batch_mse =
                bp.batch(&model, &batch, &mut grads)
                    .ok_or_else(|| Error::Divergence {
                        step,
                        detail: "non-finite training loss".into(),
                    })?;

            match (cfg.optimizer, cfg.regularization) {
                (Optimizer::Adam { .. }, _) => step_adam(&mut model, &grads, &mut adam, cfg),
                (Optimizer::PlainGd, Regularization::None) => step_plain(&mut model, &grads, cfg),
                (Optimizer::PlainGd, Regularization::L1) => step_l1(&mut model, &grads, cfg),
                (Optimizer::PlainGd, Regularization::L2) => step_l2(&mut model, &grads, cfg),
            }
            step += 1;
            running.0 += batch_mse;
            running.1 += 1;

            if step.is_multiple_of(cfg.history_stride) {
                let val_mse = mse(&model, val_probe);
                if !val_mse.is_finite() {
                    return Err(Error::Divergence {
                        step,
                        detail: "non-finite validation loss".into(),
                    });
                }
                history.push(HistoryPoint {
                    step,
                    train_mse: running.0 / running.1 as f64,
                    val_mse,
                });
                running = (0.0, 0);
                if let Some(patience) = cfg.early_stopping_patience {
                    if val_mse < best_val {
                        best_val = val_mse;
                        since_best = 0;
                    } else {
                        since_best += 1;
                        if since_best >= patience {
                            break 'epochs;
                        }
                    }
                }
            }
        }
    }

    let final_train_mse = mse(&model, train);
    let final_val_mse = mse(&model, val);
    if !final_train_mse.is_finite() {
        return Err(Error::Divergence {
            step,
            detail: "non-finite final training loss".into(),
        });
    }
    Ok(TrainOutcome {
        model,
        history,
        final_train_mse,
        final_val_mse,
        steps: step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn scalar_net(w: f64) -> Mlp {
        Mlp::from_parts(vec![1, 1], vec![vec![w]], vec![vec![0.0]]).unwrap()
    }

    fn grads_1x1(g: f64, gb: f64, batch_len: usize) -> GradientSet {
        GradientSet {
            weights: vec![vec![g]],
            biases: vec![vec![gb]],
            batch_len,
        }
    }

    fn cfg(lr: f64, lambda: f64) -> TrainConfig {
        TrainConfig {
            learning_rate: lr,
            reg_lambda: lambda,
            ..TrainConfig::default()
        }
    }

    fn random_batch(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> Vec<Example> {
        (0..n)
            .map(|_| {
                Example::new(
                    (0..dim)
                        .map(|_| rng.random_range(-1.0..1.0))
                        .collect::<Vec<_>>(),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect()
    }

    #[test]
    fn loss_examples() {
        let m = scalar_net(2.0);
        assert_eq!(
            loss(&m, &[Example::new([1.0], 2.0)], Regularization::None, 0.0).unwrap(),
            0.0
        );
        assert_eq!(
            loss(&m, &[Example::new([1.0], 1.0)], Regularization::None, 0.0).unwrap(),
            1.0
        );
        assert!(loss(&m, &[], Regularization::None, 0.0).is_err());
    }

    #[test]
    fn l2_penalty_value() {
        // Ten perfectly fitted rows, w = 2: (lambda / 2M) * 4 = 1e-4.
        let m = scalar_net(2.0);
        let batch: Vec<_> = (0..10)
            .map(|i| Example::new([i as f64], 2.0 * i as f64))
            .collect();
        let j = loss(&m, &batch, Regularization::L2, 5e-4).unwrap();
        assert!((j - 1e-4).abs() < 1e-18, "{j}");
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let m = scalar_net(2.0);
        let g = backprop(&m, &[Example::new([1.5], 3.0), Example::new([-1.0], -2.0)]).unwrap();
        assert!(g
            .weights
            .iter()
            .chain(&g.biases)
            .flatten()
            .all(|v| *v == 0.0));
    }

    #[test]
    fn dead_relu_unit_has_zero_incoming_gradient() {
        // Hidden unit 1 has a large negative bias: z < 0 on every input.
        let m = Mlp::from_parts(
            vec![2, 2, 1],
            vec![vec![0.5, 0.3, 0.2, 0.1], vec![1.0, 1.0]],
            vec![vec![0.0, -10.0], vec![0.0]],
        )
        .unwrap();
        let batch = vec![
            Example::new([0.5, 1.0], 3.0),
            Example::new([1.0, -0.5], -1.0),
        ];
        let g = backprop(&m, &batch).unwrap();
        assert_eq!(&g.weights[0][2..4], &[0.0, 0.0]);
        assert_eq!(g.biases[0][1], 0.0);
        assert!(g.weights[0][0] != 0.0);
    }

    /// Central differences of `loss` over every parameter.
    fn finite_difference(
        m: &Mlp,
        batch: &[Example],
        reg: Regularization,
        lambda: f64,
    ) -> GradientSet {
        let h = 1e-6;
        let mut out = GradientSet::zeros_like(m);
        out.batch_len = batch.len();
        let mut probe = m.clone();
        for l in 0..m.num_layers() {
            for k in 0..m.weights()[l].len() {
                let w0 = m.weights()[l][k];
                probe.weights_mut()[l][k] = w0 + h;
                let up = loss(&probe, batch, reg, lambda).unwrap();
                probe.weights_mut()[l][k] = w0 - h;
                let down = loss(&probe, batch, reg, lambda).unwrap();
                probe.weights_mut()[l][k] = w0;
                out.weights[l][k] = (up - down) / (2.0 * h);
            }
            for k in 0..m.biases()[l].len() {
                let b0 = m.biases()[l][k];
                probe.biases_mut()[l][k] = b0 + h;
                let up = loss(&probe, batch, reg, lambda).unwrap();
                probe.biases_mut()[l][k] = b0 - h;
                let down = loss(&probe, batch, reg, lambda).unwrap();
                probe.biases_mut()[l][k] = b0;
                out.biases[l][k] = (up - down) / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for trial in 0..5 {
            let m = xavier_init(&[8, 5, 5, 1], trial).unwrap();
            let batch = random_batch(&mut rng, 8, 1 + trial as usize);
            for reg in Regularization::ALL {
                let analytic = full_gradient(&m, &batch, reg, 0.05).unwrap();
                let numeric = finite_difference(&m, &batch, reg, 0.05);
                for l in 0..m.num_layers() {
                    for (a, n) in analytic.weights[l].iter().zip(&numeric.weights[l]) {
                        assert!(
                            (a - n).abs() <= 1e-5 * a.abs().max(n.abs()).max(1e-3),
                            "{reg:?}: {a} vs {n}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn plain_step_examples() {
        let mut m = scalar_net(1.0);
        step_plain(&mut m, &grads_1x1(0.5, 0.0, 1), &cfg(0.1, 0.0));
        assert!((m.weights()[0][0] - 0.95).abs() < 1e-15);

        let mut unchanged = scalar_net(1.0);
        step_plain(&mut unchanged, &grads_1x1(0.0, 0.0, 1), &cfg(0.1, 0.0));
        assert_eq!(unchanged, scalar_net(1.0));
    }

    #[test]
    fn two_frozen_steps_equal_one_summed_step() {
        let c = cfg(0.1, 0.0);
        let mut twice = scalar_net(1.0);
        step_plain(&mut twice, &grads_1x1(0.25, 0.5, 1), &c);
        step_plain(&mut twice, &grads_1x1(0.25, 0.5, 1), &c);
        let mut once = scalar_net(1.0);
        step_plain(&mut once, &grads_1x1(0.5, 1.0, 1), &c);
        assert!((twice.weights()[0][0] - once.weights()[0][0]).abs() < 1e-15);
        assert!((twice.biases()[0][0] - once.biases()[0][0]).abs() < 1e-15);
    }

    #[test]
    fn l1_step_examples() {
        let mut m = scalar_net(1.0);
        step_l1(&mut m, &grads_1x1(0.0, 0.0, 10), &cfg(0.1, 0.02));
        assert!((m.weights()[0][0] - 0.9999).abs() < 1e-15);

        let mut zero = scalar_net(0.0);
        step_l1(&mut zero, &grads_1x1(0.0, 0.0, 10), &cfg(0.1, 0.02));
        assert_eq!(zero.weights()[0][0], 0.0);
    }

    #[test]
    fn l2_step_examples() {
        let mut m = scalar_net(1.0);
        step_l2(&mut m, &grads_1x1(0.0, 0.0, 10), &cfg(1e-4, 5e-4));
        assert_eq!(m.weights()[0][0], 1.0 - 5e-9);

        // (1 - a l / M) w - a g == w - a (g + (l / M) w)
        let (w, g, a, l, mm) = (0.7, 0.3, 0.01, 0.5, 4);
        let mut decayed = scalar_net(w);
        step_l2(&mut decayed, &grads_1x1(g, 0.0, mm), &cfg(a, l));
        let mut folded = scalar_net(w);
        step_plain(
            &mut folded,
            &grads_1x1(g + l / mm as f64 * w, 0.0, mm),
            &cfg(a, l),
        );
        assert!((decayed.weights()[0][0] - folded.weights()[0][0]).abs() < 1e-15);
    }

    #[test]
    fn zero_lambda_collapses_update_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = xavier_init(&[8, 5, 5, 1], 3).unwrap();
        let g = backprop(&m, &random_batch(&mut rng, 8, 7)).unwrap();
        let c = cfg(0.01, 0.0);
        let (mut p, mut l1, mut l2) = (m.clone(), m.clone(), m.clone());
        step_plain(&mut p, &g, &c);
        step_l1(&mut l1, &g, &c);
        step_l2(&mut l2, &g, &c);
        assert_eq!(p, l1);
        assert_eq!(p, l2);
    }

    #[test]
    fn small_plain_step_decreases_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = xavier_init(&[8, 5, 5, 1], 8).unwrap();
        let batch = random_batch(&mut rng, 8, 10);
        let before = loss(&m, &batch, Regularization::None, 0.0).unwrap();
        let g = backprop(&m, &batch).unwrap();
        let mut after = m.clone();
        step_plain(&mut after, &g, &cfg(1e-6, 0.0));
        assert!(loss(&after, &batch, Regularization::None, 0.0).unwrap() < before);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        // Step 1: m_hat = g, v_hat = g^2, update = -lr * g / (|g| + eps).
        let c = TrainConfig {
            learning_rate: 1e-3,
            regularization: Regularization::None,
            ..TrainConfig::default()
        };
        let mut m = scalar_net(1.0);
        let mut st = AdamState::new(&m);
        let g = 0.37;
        step_adam(&mut m, &grads_1x1(g, -2.0, 1), &mut st, &c);
        let expect = 1.0 - 1e-3 * g / (g + 1e-8);
        assert!((m.weights()[0][0] - expect).abs() < 1e-15);
        assert!((m.biases()[0][0] - 1e-3 * 2.0 / (2.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn adam_constant_gradient_gives_sign_steps() {
        let c = TrainConfig {
            learning_rate: 1e-3,
            regularization: Regularization::None,
            ..TrainConfig::default()
        };
        let mut m = scalar_net(0.0);
        let mut st = AdamState::new(&m);
        for _ in 0..200 {
            let before = m.weights()[0][0];
            step_adam(&mut m, &grads_1x1(-5.0, 0.0, 1), &mut st, &c);
            let delta = m.weights()[0][0] - before;
            assert!((delta - 1e-3).abs() < 1e-9, "{delta}");
        }
    }

    #[test]
    fn adam_zero_gradient_leaves_parameters() {
        let c = TrainConfig {
            regularization: Regularization::None,
            ..TrainConfig::default()
        };
        let mut m = scalar_net(0.4);
        let mut st = AdamState::new(&m);
        for _ in 0..3 {
            step_adam(&mut m, &grads_1x1(0.0, 0.0, 1), &mut st, &c);
        }
        assert_eq!(m, scalar_net(0.4));
    }

    #[test]
    fn learns_linear_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Example> = (0..200)
            .map(|_| {
                let x: f64 = rng.random_range(0.0..1.0);
                Example::new([x], 2.0 * x)
            })
            .collect();
        let c = TrainConfig {
            layer_dims: vec![1, 1],
            learning_rate: 1e-2,
            reg_lambda: 0.0,
            optimizer: Optimizer::ADAM,
            epochs: 500,
            seed: 4,
            ..TrainConfig::default()
        };
        let out = train(&rows, &rows[..50], &c).unwrap();
        assert!(out.steps <= 10_000);
        assert!(out.final_train_mse < 1e-6, "{}", out.final_train_mse);
    }

    #[test]
    fn training_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows = random_batch(&mut rng, 8, 120);
        let c = TrainConfig {
            layer_dims: vec![8, 6, 1],
            epochs: 3,
            history_stride: 5,
            ..TrainConfig::default()
        };
        let a = train(&rows[..100], &rows[100..], &c).unwrap();
        let b = train(&rows[..100], &rows[100..], &c).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.history, b.history);
        assert_eq!(a.history.len(), 30 / 5);
    }

    #[test]
    fn divergence_is_reported() {
        let rows = vec![Example::new([1e200], 1e200); 4];
        let c = TrainConfig {
            layer_dims: vec![1, 1],
            learning_rate: 1e10,
            optimizer: Optimizer::PlainGd,
            epochs: 50,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train(&rows, &rows, &c),
            Err(Error::Divergence { .. })
        ));
    }
}
