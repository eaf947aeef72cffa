//! A small fully connected network with hand-written backpropagation.
//!
//! Parameters live in one flat vector (per layer: weights row-major
//! `out x in`, then biases), which the optimizers update in place and which
//! serializes directly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;
const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;

/// Clamp applied to probabilities inside the log loss.
pub const LOG_LOSS_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Selu,
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputHead {
    /// Two logits through a softmax; the prediction is the class-1 probability.
    Softmax2,
    /// One linear output.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Input width, hidden widths, output width.
    pub layer_widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_head: OutputHead,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerLayout {
    n_in: usize,
    n_out: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone)]
struct ForwardCache {
    n_rows: usize,
    input: Vec<f64>,
    /// Pre-activations of every layer.
    pre: Vec<Vec<f64>>,
    /// Activations of every hidden layer.
    post: Vec<Vec<f64>>,
    output: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Mlp {
    spec: MlpSpec,
    layout: Vec<LayerLayout>,
    pub params: Vec<f64>,
    cache: Option<ForwardCache>,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Self::Selu => {
                if x > 0.0 {
                    SELU_LAMBDA * x
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp_m1()
                }
            }
            Self::Relu => x.max(0.0),
            Self::Identity => x,
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Self::Selu => {
                if x > 0.0 {
                    SELU_LAMBDA
                } else {
                    SELU_LAMBDA * SELU_ALPHA * x.exp()
                }
            }
            Self::Relu => f64::from(u8::from(x > 0.0)),
            Self::Identity => 1.0,
        }
    }
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        let w = &self.layer_widths;
        if w.len() < 3 {
            return Err(Error::Config("need input, at least one hidden layer, and output widths".into()));
        }
        if w.contains(&0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        let out = *w.last().expect("checked length");
        match self.output_head {
            OutputHead::Softmax2 if out != 2 => Err(Error::Config(format!("softmax head needs output width 2, got {out}"))),
            OutputHead::Linear if out != 1 => Err(Error::Config(format!("linear head needs output width 1, got {out}"))),
            _ => Ok(()),
        }
    }
}

impl Mlp {
    /// LeCun-normal weights (`N(0, 1/fan_in)`) and zero biases.
    pub fn new(spec: MlpSpec) -> Result<Self> {
        spec.validate()?;
        let mut layout = Vec::new();
        let mut offset = 0;
        for pair in spec.layer_widths.windows(2) {
            let (n_in, n_out) = (pair[0], pair[1]);
            layout.push(LayerLayout { n_in, n_out, w: offset, b: offset + n_in * n_out });
            offset += n_in * n_out + n_out;
        }
        let mut params = vec![0.0; offset];
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        for l in &layout {
            let dist = Normal::new(0.0, (1.0 / l.n_in as f64).sqrt()).expect("positive std");
            for p in &mut params[l.w..l.b] {
                *p = dist.sample(&mut rng);
            }
        }
        Ok(Self { spec, layout, params, cache: None })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.spec.layer_widths[0]
    }

    /// Replaces all parameters, e.g. from a snapshot.
    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::ShapeMismatch(format!("expected {} parameters, got {}", self.params.len(), params.len())));
        }
        self.params = params;
        self.cache = None;
        Ok(())
    }

    /// Sets the output layer's weights and biases to zero.
    pub fn zero_last_layer(&mut self) {
        let l = *self.layout.last().expect("at least one layer");
        self.params[l.w..l.b + l.n_out].iter_mut().for_each(|p| *p = 0.0);
    }

    fn run(&self, x: &[f64], n_rows: usize) -> Result<ForwardCache> {
        let d = self.n_inputs();
        if n_rows == 0 || x.len() != n_rows * d {
            return Err(Error::ShapeMismatch(format!("{} values for {n_rows} rows of width {d}", x.len())));
        }
        let n_layers = self.layout.len();
        let mut pre = Vec::with_capacity(n_layers);
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(n_layers - 1);
        for (k, l) in self.layout.iter().enumerate() {
            let input: &[f64] = if k == 0 { x } else { &post[k - 1] };
            let w = &self.params[l.w..l.b];
            let b = &self.params[l.b..l.b + l.n_out];
            let mut z = vec![0.0; n_rows * l.n_out];
            for r in 0..n_rows {
                let xin = &input[r * l.n_in..(r + 1) * l.n_in];
                let zr = &mut z[r * l.n_out..(r + 1) * l.n_out];
                for j in 0..l.n_out {
                    let wj = &w[j * l.n_in..(j + 1) * l.n_in];
                    zr[j] = b[j] + wj.iter().zip(xin).map(|(a, c)| a * c).sum::<f64>();
                }
            }
            if k + 1 < n_layers {
                post.push(z.iter().map(|&v| self.spec.hidden_activation.apply(v)).collect());
            }
            pre.push(z);
        }
        let logits = pre.last().expect("at least one layer");
        let output = match self.spec.output_head {
            OutputHead::Softmax2 => (0..n_rows).map(|r| sigmoid(logits[2 * r + 1] - logits[2 * r])).collect(),
            OutputHead::Linear => logits.clone(),
        };
        Ok(ForwardCache { n_rows, input: x.to_vec(), pre, post, output })
    }

    /// Predictions for `n_rows` row-major inputs; caches intermediates for [`Mlp::backward`].
    pub fn forward(&mut self, x: &[f64], n_rows: usize) -> Result<Vec<f64>> {
        let cache = self.run(x, n_rows)?;
        let out = cache.output.clone();
        self.cache = Some(cache);
        Ok(out)
    }

    /// Pre-activations of every hidden layer, row-major per layer.
    pub fn hidden_pre_activations(&self, x: &[f64], n_rows: usize) -> Result<Vec<Vec<f64>>> {
        let mut pre = self.run(x, n_rows)?.pre;
        pre.pop();
        Ok(pre)
    }

    /// Predictions without caching.
    pub fn predict(&self, x: &[f64], n_rows: usize) -> Result<Vec<f64>> {
        Ok(self.run(x, n_rows)?.output)
    }

    /// Gradient of `Σ_r upstream[r] · pred[r]` with respect to every parameter,
    /// for the most recent [`Mlp::forward`] batch.
    pub fn backward(&self, upstream: &[f64]) -> Result<Vec<f64>> {
        let cache = self.cache.as_ref().ok_or(Error::NoForwardCache)?;
        let n = cache.n_rows;
        if upstream.len() != n {
            return Err(Error::ShapeMismatch(format!("{} upstream values for a batch of {n}", upstream.len())));
        }
        let mut grads = vec![0.0; self.params.len()];
        let last = self.layout.len() - 1;
        let mut delta: Vec<f64> = match self.spec.output_head {
            OutputHead::Softmax2 => {
                let mut d = vec![0.0; 2 * n];
                for r in 0..n {
                    let p = cache.output[r];
                    let g = upstream[r] * p * (1.0 - p);
                    d[2 * r] = -g;
                    d[2 * r + 1] = g;
                }
                d
            }
            OutputHead::Linear => upstream.to_vec(),
        };
        for k in (0..=last).rev() {
            let l = self.layout[k];
            let input: &[f64] = if k == 0 { &cache.input } else { &cache.post[k - 1] };
            let (gw, gb) = grads[l.w..l.b + l.n_out].split_at_mut(l.n_in * l.n_out);
            for r in 0..n {
                let dr = &delta[r * l.n_out..(r + 1) * l.n_out];
                let xr = &input[r * l.n_in..(r + 1) * l.n_in];
                for j in 0..l.n_out {
                    let dj = dr[j];
                    if dj == 0.0 {
                        continue;
                    }
                    gb[j] += dj;
                    for (g, x) in gw[j * l.n_in..(j + 1) * l.n_in].iter_mut().zip(xr) {
                        *g += dj * x;
                    }
                }
            }
            if k == 0 {
                break;
            }
            let w = &self.params[l.w..l.b];
            let prev_pre = &cache.pre[k - 1];
            let mut next = vec![0.0; n * l.n_in];
            for r in 0..n {
                let dr = &delta[r * l.n_out..(r + 1) * l.n_out];
                let nr = &mut next[r * l.n_in..(r + 1) * l.n_in];
                for j in 0..l.n_out {
                    let dj = dr[j];
                    if dj == 0.0 {
                        continue;
                    }
                    for (acc, wjk) in nr.iter_mut().zip(&w[j * l.n_in..(j + 1) * l.n_in]) {
                        *acc += dj * wjk;
                    }
                }
                for (acc, &z) in nr.iter_mut().zip(&prev_pre[r * l.n_in..(r + 1) * l.n_in]) {
                    *acc *= self.spec.hidden_activation.derivative(z);
                }
            }
            delta = next;
        }
        Ok(grads)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean log loss and its gradient in the predictions; probabilities are
/// clamped to `[1e-7, 1 − 1e-7]`.
pub fn log_loss(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &y)| {
            let p = p.clamp(LOG_LOSS_CLAMP, 1.0 - LOG_LOSS_CLAMP);
            loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
            (-y / p + (1.0 - y) / (1.0 - p)) / n
        })
        .collect();
    (loss / n, grad)
}

/// Mean squared error and its gradient in the predictions.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(&p, &y)| {
            loss += (p - y) * (p - y);
            2.0 * (p - y) / n
        })
        .collect();
    (loss / n, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimKind {
    Adam { beta1: f64, beta2: f64, eps: f64 },
    Sgd,
}

impl OptimKind {
    pub fn adam() -> Self {
        Self::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Optimizer with decoupled weight decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimState {
    pub kind: OptimKind,
    pub learning_rate: f64,
    pub weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl OptimState {
    pub fn new(kind: OptimKind, learning_rate: f64, weight_decay: f64, n_params: usize) -> Self {
        let moments = if matches!(kind, OptimKind::Adam { .. }) { n_params } else { 0 };
        Self { kind, learning_rate, weight_decay, m: vec![0.0; moments], v: vec![0.0; moments], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::ShapeMismatch(format!("{} parameters, {} gradients", params.len(), grads.len())));
        }
        let lr = self.learning_rate;
        let decay = 1.0 - lr * self.weight_decay;
        match self.kind {
            OptimKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p = *p * decay - lr * g;
                }
            }
            OptimKind::Adam { beta1, beta2, eps } => {
                if self.m.len() != params.len() {
                    return Err(Error::ShapeMismatch(format!("optimizer sized for {} parameters, got {}", self.m.len(), params.len())));
                }
                self.t += 1;
                let c1 = 1.0 - beta1.powf(self.t as f64);
                let c2 = 1.0 - beta2.powf(self.t as f64);
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    params[i] = params[i] * decay - lr * mh / (vh.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
