//! Masked autoregressive density model over stacked bitstrings.
//!
//! `p(σ) = Π_i p(σ_i | σ_<i)`: every conditional is the sigmoid output of a
//! dense network whose weight masks only let output `i` see input bits
//! `j < i`. Hidden units carry a degree `m ∈ [1, N−1]`; a connection from a
//! unit of degree `d` is allowed iff `d ≤ m`, inputs have degree `i + 1`, and
//! output `i` reads hidden units with `m ≤ i`.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{AdaBelief, AdaBeliefConfig};
use crate::pauli::Bitstring;
use crate::rng::{chacha, derive_seed};

pub const SELU_SCALE: f64 = 1.0507;
pub const SELU_ALPHA: f64 = 1.6733;
pub const PROB_CLAMP: f64 = 1e-12;
pub const DEFAULT_HIDDEN_LAYERS: usize = 5;
pub const DEFAULT_DENSITY: usize = 2;
pub const CHECKPOINT_FORMAT: &str = "schmidt-forge-arnn";
pub const CHECKPOINT_VERSION: u32 = 1;

fn selu(x: f64) -> f64 {
    if x > 0.0 {
        SELU_SCALE * x
    } else {
        SELU_SCALE * SELU_ALPHA * x.exp_m1()
    }
}

fn selu_prime(x: f64) -> f64 {
    if x > 0.0 {
        SELU_SCALE
    } else {
        SELU_SCALE * SELU_ALPHA * x.exp()
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs × inputs`; masked entries are held at zero.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedAutoregressiveNet {
    n: usize,
    hidden_layers: usize,
    density: usize,
    layers: Vec<Layer>,
    masks: Vec<Vec<bool>>,
}

/// Per-layer pre-activations and activations of one forward pass.
struct Trace {
    /// `acts[0]` is the input; `acts[l+1]` the output of layer `l`
    /// (probabilities for the last layer).
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    n: usize,
    hidden_layers: usize,
    density: usize,
    layers: Vec<Layer>,
}

impl MaskedAutoregressiveNet {
    /// LeCun-normal weights `N(0, 1/fan_in)` (masked afterwards), zero biases.
    pub fn new(n: usize, hidden_layers: usize, density: usize, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(n, hidden_layers, density)?;
        let mut rng = chacha(seed);
        for (layer, mask) in net.layers.iter_mut().zip(&net.masks) {
            let normal = Normal::new(0.0, (1.0 / layer.inputs as f64).sqrt()).expect("positive std");
            for (w, &keep) in layer.weights.iter_mut().zip(mask) {
                let x = normal.sample(&mut rng);
                *w = if keep { x } else { 0.0 };
            }
        }
        Ok(net)
    }

    /// All weights and biases zero: every conditional is exactly 1/2.
    pub fn zeros(n: usize, hidden_layers: usize, density: usize) -> Result<Self> {
        if n == 0 || n > crate::pauli::MAX_QUBITS || density == 0 {
            return Err(Error::InvalidInput(format!(
                "invalid network shape: {n} bits, density {density}"
            )));
        }
        let hidden = density * n;
        let mut widths = vec![n];
        widths.extend(std::iter::repeat_n(hidden, hidden_layers));
        widths.push(n);
        let layers: Vec<Layer> = widths
            .windows(2)
            .map(|w| Layer {
                inputs: w[0],
                outputs: w[1],
                weights: vec![0.0; w[0] * w[1]],
                biases: vec![0.0; w[1]],
            })
            .collect();
        Ok(Self {
            n,
            hidden_layers,
            density,
            masks: build_masks(n, &widths),
            layers,
        })
    }

    pub fn width(&self) -> usize {
        self.n
    }

    pub fn hidden_layers(&self) -> usize {
        self.hidden_layers
    }

    pub fn density(&self) -> usize {
        self.density
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Flat parameter vector: per layer, weights then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    /// Inverse of [`params`](Self::params); masked entries are forced to zero.
    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::Dimension {
                expected: self.n_params(),
                got: flat.len(),
            });
        }
        let mut off = 0;
        for (l, mask) in self.layers.iter_mut().zip(&self.masks) {
            for ((w, &x), &keep) in l.weights.iter_mut().zip(&flat[off..]).zip(mask) {
                *w = if keep { x } else { 0.0 };
            }
            off += l.weights.len();
            let nb = l.biases.len();
            l.biases.copy_from_slice(&flat[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    fn forward(&self, x: &[f64]) -> Trace {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (li, layer) in self.layers.iter().enumerate() {
            let input = &acts[li];
            let z: Vec<f64> = (0..layer.outputs)
                .map(|r| {
                    let row = &layer.weights[r * layer.inputs..(r + 1) * layer.inputs];
                    layer.biases[r] + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>()
                })
                .collect();
            let a = if li == last {
                z.iter().map(|&v| sigmoid(v)).collect()
            } else {
                z.iter().map(|&v| selu(v)).collect()
            };
            pre.push(z);
            acts.push(a);
        }
        Trace { acts, pre }
    }

    /// Raw conditionals `P(bit_i = 1 | x_<i)` for a real-valued input.
    pub fn conditionals(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n, "input width");
        self.forward(x).acts.pop().expect("output layer")
    }

    fn check(&self, sigma: &Bitstring) -> Result<Vec<f64>> {
        crate::error::check_width(self.n, sigma.width())?;
        Ok(sigma.to_bools().into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect())
    }

    /// `Σ_i log p(σ_i | σ_<i)` with conditionals clamped to `[1e-12, 1 − 1e-12]`.
    pub fn log_prob(&self, sigma: &Bitstring) -> Result<f64> {
        let x = self.check(sigma)?;
        let p = self.conditionals(&x);
        Ok(log_prob_from(&x, &p))
    }

    pub fn prob(&self, sigma: &Bitstring) -> Result<f64> {
        Ok(self.log_prob(sigma)?.exp())
    }

    /// Adds `upstream · ∂log p(σ)/∂θ` into `grad`; returns `log p(σ)`.
    fn accumulate_log_prob_grad(&self, x: &[f64], upstream: f64, grad: &mut [f64]) -> f64 {
        let trace = self.forward(x);
        let probs = trace.acts.last().expect("output");
        let lp = log_prob_from(x, probs);
        if upstream == 0.0 {
            return lp;
        }
        // ∂/∂z_i of x log p + (1−x) log(1−p) is x − p away from the clamp.
        let mut delta: Vec<f64> = x
            .iter()
            .zip(probs)
            .map(|(&xi, &p)| {
                if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                    0.0
                } else {
                    upstream * (xi - p)
                }
            })
            .collect();
        let offsets = self.param_offsets();
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = &trace.acts[li];
            let (woff, boff) = offsets[li];
            let mask = &self.masks[li];
            for r in 0..layer.outputs {
                let d = delta[r];
                if d == 0.0 {
                    continue;
                }
                grad[boff + r] += d;
                let base = woff + r * layer.inputs;
                for c in 0..layer.inputs {
                    if mask[r * layer.inputs + c] {
                        grad[base + c] += d * input[c];
                    }
                }
            }
            if li == 0 {
                break;
            }
            let prev_pre = &trace.pre[li - 1];
            let mut next = vec![0.0; layer.inputs];
            for r in 0..layer.outputs {
                let d = delta[r];
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[r * layer.inputs..(r + 1) * layer.inputs];
                for (acc, w) in next.iter_mut().zip(row) {
                    *acc += d * w;
                }
            }
            for (v, z) in next.iter_mut().zip(prev_pre) {
                *v *= selu_prime(*z);
            }
            delta = next;
        }
        lp
    }

    fn param_offsets(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.layers
            .iter()
            .map(|l| {
                let w = off;
                off += l.weights.len();
                let b = off;
                off += l.biases.len();
                (w, b)
            })
            .collect()
    }

    /// `∂log p(σ)/∂θ` as a flat vector aligned with [`params`](Self::params).
    pub fn log_prob_gradient(&self, sigma: &Bitstring) -> Result<(f64, Vec<f64>)> {
        let x = self.check(sigma)?;
        let mut g = vec![0.0; self.n_params()];
        let lp = self.accumulate_log_prob_grad(&x, 1.0, &mut g);
        Ok((lp, g))
    }

    /// `count` independent ancestral samples.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Bitstring> {
        let mut rng = chacha(seed);
        (0..count)
            .map(|_| {
                let mut x = vec![0.0; self.n];
                for i in 0..self.n {
                    let p = self.conditionals(&x)[i];
                    if rng.random::<f64>() < p {
                        x[i] = 1.0;
                    }
                }
                to_bitstring(&x)
            })
            .collect()
    }

    /// Ancestral samples with exactly `ones_a` ones in bits `[0, N/2)` and
    /// `ones_b` in `[N/2, N)`: a bit is forced to 0 once its half's quota is
    /// met and forced to 1 when the remaining positions are all needed.
    pub fn sample_fixed_excitations(&self, ones_a: usize, ones_b: usize, count: usize, seed: u64) -> Result<Vec<Bitstring>> {
        if self.n % 2 != 0 {
            return Err(Error::InvalidInput("fixed-excitation sampling needs an even width".into()));
        }
        let half = self.n / 2;
        self.sample_with_quotas(&[(half, ones_a), (half, ones_b)], count, seed)
    }

    /// Ancestral sampling with the bits split into consecutive segments
    /// `(length, ones)`, each holding exactly `ones` set bits.
    pub fn sample_with_quotas(&self, segments: &[(usize, usize)], count: usize, seed: u64) -> Result<Vec<Bitstring>> {
        if segments.iter().map(|s| s.0).sum::<usize>() != self.n {
            return Err(Error::InvalidInput(format!("quota segments do not cover {} bits", self.n)));
        }
        if let Some((len, ones)) = segments.iter().find(|(len, ones)| ones > len) {
            return Err(Error::InvalidInput(format!("quota of {ones} ones exceeds a segment of {len} bits")));
        }
        let mut owner = Vec::with_capacity(self.n);
        let mut left_in_segment = Vec::with_capacity(self.n);
        for (si, &(len, _)) in segments.iter().enumerate() {
            for j in 0..len {
                owner.push(si);
                left_in_segment.push(len - j);
            }
        }
        let mut rng = chacha(seed);
        Ok((0..count)
            .map(|_| {
                let mut x = vec![0.0; self.n];
                let mut remaining: Vec<usize> = segments.iter().map(|s| s.1).collect();
                for i in 0..self.n {
                    let h = owner[i];
                    let bit = if remaining[h] == 0 {
                        false
                    } else if remaining[h] == left_in_segment[i] {
                        true
                    } else {
                        let p = self.conditionals(&x)[i];
                        rng.random::<f64>() < p
                    };
                    if bit {
                        x[i] = 1.0;
                        remaining[h] -= 1;
                    }
                }
                to_bitstring(&x)
            })
            .collect())
    }

    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            n: self.n,
            hidden_layers: self.hidden_layers,
            density: self.density,
            layers: self.layers.clone(),
        };
        Ok(serde_json::to_string_pretty(&ck)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let mut net = Self::zeros(ck.n, ck.hidden_layers, ck.density)?;
        if ck.layers.len() != net.layers.len() {
            return Err(Error::InvalidInput("checkpoint layer count does not match its header".into()));
        }
        for (dst, src) in net.layers.iter().zip(&ck.layers) {
            if dst.inputs != src.inputs
                || dst.outputs != src.outputs
                || dst.weights.len() != src.weights.len()
                || dst.biases.len() != src.biases.len()
            {
                return Err(Error::InvalidInput("checkpoint layer shape does not match its header".into()));
            }
        }
        for ((l, m), src) in net.layers.iter().zip(&net.masks).zip(&ck.layers) {
            if src.weights.iter().zip(m).any(|(w, &keep)| !keep && *w != 0.0) {
                return Err(Error::InvalidInput(format!(
                    "checkpoint has a non-zero masked weight in a {}×{} layer",
                    l.outputs, l.inputs
                )));
            }
        }
        net.layers = ck.layers;
        Ok(net)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

fn build_masks(n: usize, widths: &[usize]) -> Vec<Vec<bool>> {
    let input_deg: Vec<usize> = (1..=n).collect();
    let hidden_deg = |count: usize| -> Vec<usize> {
        (0..count).map(|k| if n > 1 { k % (n - 1) + 1 } else { 1 }).collect()
    };
    let mut prev = input_deg;
    let mut masks = Vec::new();
    let last = widths.len() - 2;
    for (li, w) in widths.windows(2).enumerate() {
        let (inputs, outputs) = (w[0], w[1]);
        let mut mask = vec![false; inputs * outputs];
        if li == last {
            // Output i (degree i + 1) reads units of degree ≤ i.
            for r in 0..outputs {
                for c in 0..inputs {
                    mask[r * inputs + c] = prev[c] < r + 1;
                }
            }
        } else {
            let deg = hidden_deg(outputs);
            for r in 0..outputs {
                for c in 0..inputs {
                    mask[r * inputs + c] = prev[c] <= deg[r];
                }
            }
            prev = deg;
        }
        masks.push(mask);
    }
    masks
}

fn log_prob_from(x: &[f64], probs: &[f64]) -> f64 {
    x.iter()
        .zip(probs)
        .map(|(&xi, &p)| {
            let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            if xi > 0.5 {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum()
}

fn to_bitstring(x: &[f64]) -> Bitstring {
    let bools: Vec<bool> = x.iter().map(|v| *v > 0.5).collect();
    Bitstring::from_bits(&bools).expect("width checked at construction")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Mmd,
    Logcosh,
    ReverseKl,
}

/// Median pairwise Hamming distance of `set`, floored at 0.5.
pub fn median_bandwidth(set: &[Bitstring]) -> f64 {
    let mut d: Vec<u32> = Vec::new();
    for i in 0..set.len() {
        for j in i + 1..set.len() {
            d.push(set[i].hamming(&set[j]));
        }
    }
    if d.is_empty() {
        return 0.5;
    }
    d.sort_unstable();
    let mid = d.len() / 2;
    let median = if d.len() % 2 == 1 {
        d[mid] as f64
    } else {
        0.5 * (d[mid - 1] + d[mid]) as f64
    };
    median.max(0.5)
}

/// Gaussian kernel on bit vectors, `exp(−‖σ₁ − σ₂‖² / 2Δ)`.
pub fn kernel(a: &Bitstring, b: &Bitstring, delta: f64) -> f64 {
    (-(a.hamming(b) as f64) / (2.0 * delta)).exp()
}

fn check_targets(set: &[Bitstring], q: &[f64]) -> Result<()> {
    if set.len() != q.len() {
        return Err(Error::Dimension {
            expected: set.len(),
            got: q.len(),
        });
    }
    if q.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidInput("target weights must be finite and non-negative".into()));
    }
    Ok(())
}

fn probs(net: &MaskedAutoregressiveNet, set: &[Bitstring]) -> Result<Vec<f64>> {
    set.iter().map(|s| net.prob(s)).collect()
}

/// `Σ_{σ₁,σ₂∈T} (q₁q₂ − 2q₁p₂ + p₁p₂) K(σ₁, σ₂)`.
pub fn mmd_loss(net: &MaskedAutoregressiveNet, set: &[Bitstring], q: &[f64], delta: f64) -> Result<f64> {
    check_targets(set, q)?;
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("MMD bandwidth must be positive, got {delta}")));
    }
    let p = probs(net, set)?;
    let mut loss = 0.0;
    for i in 0..set.len() {
        for j in 0..set.len() {
            let k = kernel(&set[i], &set[j], delta);
            loss += (q[i] * q[j] - 2.0 * q[i] * p[j] + p[i] * p[j]) * k;
        }
    }
    Ok(loss)
}

fn logcosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `Σ_{σ∈T} log cosh(p(σ) − q(σ))`.
pub fn logcosh_loss(net: &MaskedAutoregressiveNet, set: &[Bitstring], q: &[f64]) -> Result<f64> {
    check_targets(set, q)?;
    let p = probs(net, set)?;
    Ok(p.iter().zip(q).map(|(a, b)| logcosh(a - b)).sum())
}

/// Batch mean of `log p(σ) − log λ²_σ` with targets clamped at 1e-12.
pub fn reverse_kl_loss(net: &MaskedAutoregressiveNet, batch: &[Bitstring], targets: &[f64]) -> Result<f64> {
    check_targets(batch, targets)?;
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty reverse-KL batch".into()));
    }
    let mut acc = 0.0;
    for (s, &t) in batch.iter().zip(targets) {
        acc += net.log_prob(s)? - t.max(PROB_CLAMP).ln();
    }
    Ok(acc / batch.len() as f64)
}

/// Loss and flat parameter gradient.
///
/// For the reverse-KL loss the batch is held fixed and `log λ²` is treated as
/// a constant; the gradient is the surrogate `mean[(f − f̄) ∇log p]` with
/// `f = log p − log λ²`.
pub fn loss_and_gradient(
    net: &MaskedAutoregressiveNet,
    kind: LossKind,
    set: &[Bitstring],
    q: &[f64],
    delta: f64,
) -> Result<(f64, Vec<f64>)> {
    check_targets(set, q)?;
    let mut grad = vec![0.0; net.n_params()];
    let xs: Vec<Vec<f64>> = set.iter().map(|s| net.check(s)).collect::<Result<_>>()?;
    let p: Vec<f64> = xs.iter().map(|x| log_prob_from(x, &net.conditionals(x)).exp()).collect();
    let (loss, upstream): (f64, Vec<f64>) = match kind {
        LossKind::Mmd => {
            if !(delta > 0.0) {
                return Err(Error::InvalidInput(format!("MMD bandwidth must be positive, got {delta}")));
            }
            let mut loss = 0.0;
            let mut dl_dp = vec![0.0; set.len()];
            for i in 0..set.len() {
                for j in 0..set.len() {
                    let k = kernel(&set[i], &set[j], delta);
                    loss += (q[i] * q[j] - 2.0 * q[i] * p[j] + p[i] * p[j]) * k;
                    dl_dp[j] += 2.0 * (p[i] - q[i]) * k;
                }
            }
            (loss, dl_dp.iter().zip(&p).map(|(d, pj)| d * pj).collect())
        }
        LossKind::Logcosh => {
            let loss = p.iter().zip(q).map(|(a, b)| logcosh(a - b)).sum();
            (loss, p.iter().zip(q).map(|(a, b)| (a - b).tanh() * a).collect())
        }
        LossKind::ReverseKl => {
            if set.is_empty() {
                return Err(Error::InvalidInput("empty reverse-KL batch".into()));
            }
            let f: Vec<f64> = p
                .iter()
                .zip(q)
                .map(|(pi, t)| pi.max(f64::MIN_POSITIVE).ln().max(-1e300) - t.max(PROB_CLAMP).ln())
                .collect();
            let b = set.len() as f64;
            let mean = f.iter().sum::<f64>() / b;
            (mean, f.iter().map(|fi| (fi - mean) / b).collect())
        }
    };
    for (x, u) in xs.iter().zip(&upstream) {
        net.accumulate_log_prob_grad(x, *u, &mut grad);
    }
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Training(format!("{kind:?} loss diverged ({loss})")));
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub optimizer: AdaBeliefConfig,
    /// Samples drawn per step for the reverse-KL loss.
    pub reverse_kl_batch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 200,
            optimizer: AdaBeliefConfig::default(),
            reverse_kl_batch: 64,
        }
    }
}

/// Target for training: weights `q` over a training set `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainData {
    pub set: Vec<Bitstring>,
    pub q: Vec<f64>,
}

impl TrainData {
    /// `q ∝ λ²` renormalized over `set`.
    pub fn from_coefficients(set: Vec<Bitstring>, lambda: &[f64]) -> Result<Self> {
        if set.len() != lambda.len() || set.is_empty() {
            return Err(Error::Dimension {
                expected: set.len(),
                got: lambda.len(),
            });
        }
        let total: f64 = lambda.iter().map(|l| l * l).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidInput("training targets are all zero".into()));
        }
        Ok(Self {
            set,
            q: lambda.iter().map(|l| l * l / total).collect(),
        })
    }

    fn target_of(&self, s: &Bitstring) -> f64 {
        self.set.iter().position(|t| t == s).map_or(0.0, |i| self.q[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub losses: Vec<f64>,
    /// Loss of the trained net, evaluated after the last step.
    pub final_loss: f64,
}

/// Full-batch AdaBelief training of `net` on `data`.
pub fn train(net: &mut MaskedAutoregressiveNet, data: &TrainData, kind: LossKind, config: &TrainConfig, seed: u64) -> Result<TrainReport> {
    for s in &data.set {
        crate::error::check_width(net.width(), s.width())?;
    }
    let delta = median_bandwidth(&data.set);
    let mut opt = AdaBelief::new(net.n_params(), config.optimizer);
    let mut params = net.params();
    let mut losses = Vec::with_capacity(config.epochs);
    let batch_for = |net: &MaskedAutoregressiveNet, epoch: u64| -> (Vec<Bitstring>, Vec<f64>) {
        let batch = net.sample(config.reverse_kl_batch.max(1), derive_seed(seed, epoch));
        let t = batch.iter().map(|s| data.target_of(s)).collect();
        (batch, t)
    };
    for epoch in 0..config.epochs {
        let (loss, grad) = match kind {
            LossKind::ReverseKl => {
                let (batch, t) = batch_for(net, epoch as u64);
                loss_and_gradient(net, kind, &batch, &t, delta)?
            }
            _ => loss_and_gradient(net, kind, &data.set, &data.q, delta)?,
        };
        losses.push(loss);
        opt.step(&mut params, &grad, config.learning_rate)?;
        net.set_params(&params)?;
    }
    let final_loss = match kind {
        LossKind::Mmd => mmd_loss(net, &data.set, &data.q, delta)?,
        LossKind::Logcosh => logcosh_loss(net, &data.set, &data.q)?,
        LossKind::ReverseKl => {
            let (batch, t) = batch_for(net, config.epochs as u64);
            reverse_kl_loss(net, &batch, &t)?
        }
    };
    if !final_loss.is_finite() {
        return Err(Error::Training(format!("{kind:?} loss diverged")));
    }
    Ok(TrainReport { losses, final_loss })
}

/// Arithmetic mean of the weights and biases of identically shaped nets.
pub fn model_average(nets: &[MaskedAutoregressiveNet]) -> Result<MaskedAutoregressiveNet> {
    let first = nets.first().ok_or_else(|| Error::InvalidInput("nothing to average".into()))?;
    let mut acc = vec![0.0; first.n_params()];
    for net in nets {
        if (net.n, net.hidden_layers, net.density) != (first.n, first.hidden_layers, first.density) {
            return Err(Error::InvalidInput("model averaging needs identical architectures".into()));
        }
        for (a, p) in acc.iter_mut().zip(net.params()) {
            *a += p;
        }
    }
    let count = nets.len() as f64;
    acc.iter_mut().for_each(|a| *a /= count);
    let mut out = first.clone();
    out.set_params(&acc)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn all_bitstrings(n: usize) -> Vec<Bitstring> {
        (0..1u32 << n).map(|i| Bitstring::from_index(i, n).unwrap()).collect()
    }

    #[test]
    fn zero_net_is_uniform() {
        let net = MaskedAutoregressiveNet::zeros(6, 5, 2).unwrap();
        for s in all_bitstrings(6) {
            assert_abs_diff_eq!(net.log_prob(&s).unwrap(), -6.0 * 2f64.ln(), epsilon = 1e-14);
        }
    }

    #[test]
    fn parameter_count() {
        let net = MaskedAutoregressiveNet::zeros(2, 5, 2).unwrap();
        assert_eq!(net.n_params(), (2 * 4 + 4) + 4 * (4 * 4 + 4) + (4 * 2 + 2));
        assert_eq!(net.params().len(), net.n_params());
    }

    #[test]
    fn probabilities_are_normalized() {
        for n in [1usize, 4, 9] {
            let net = MaskedAutoregressiveNet::new(n, 5, 2, 11).unwrap();
            let total: f64 = all_bitstrings(n).iter().map(|s| net.prob(s).unwrap()).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn outputs_depend_only_on_earlier_bits() {
        let n = 7;
        let net = MaskedAutoregressiveNet::new(n, 5, 2, 4).unwrap();
        let mut rng = chacha(1);
        for _ in 0..20 {
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let base = net.conditionals(&x);
            for j in 0..n {
                let mut y = x.clone();
                y[j] += 0.3;
                let moved = net.conditionals(&y);
                for i in 0..=j {
                    assert_eq!(base[i], moved[i], "output {i} depends on input {j}");
                }
            }
        }
    }

    #[test]
    fn masks_allow_full_dependence_on_the_prefix() {
        let n = 5;
        let net = MaskedAutoregressiveNet::new(n, 5, 2, 8).unwrap();
        let x = vec![0.2; n];
        let base = net.conditionals(&x);
        for j in 0..n - 1 {
            let mut y = x.clone();
            y[j] += 0.3;
            assert_ne!(net.conditionals(&y)[n - 1], base[n - 1], "last output ignores input {j}");
        }
    }

    #[test]
    fn zero_net_sampling_is_balanced() {
        let net = MaskedAutoregressiveNet::zeros(5, 5, 2).unwrap();
        let samples = net.sample(10_000, 99);
        for q in 0..5 {
            let mean = samples.iter().filter(|s| s.get(q)).count() as f64 / 1e4;
            assert!((0.47..=0.53).contains(&mean), "bit {q} mean {mean}");
        }
        assert_eq!(net.sample(50, 3), net.sample(50, 3));
    }

    #[test]
    fn fixed_excitation_quotas_always_hold() {
        let net = MaskedAutoregressiveNet::new(12, 5, 2, 5).unwrap();
        for (ka, kb) in [(0, 0), (6, 0), (3, 4), (1, 5)] {
            for s in net.sample_fixed_excitations(ka, kb, 2000, 17).unwrap() {
                let (a, b) = s.split_at(6).unwrap();
                assert_eq!((a.weight(), b.weight()), (ka as u32, kb as u32));
            }
        }
        assert!(net.sample_fixed_excitations(7, 0, 1, 0).is_err());
    }

    #[test]
    fn mmd_loss_matches_direct_sum() {
        let net = MaskedAutoregressiveNet::new(4, 5, 2, 2).unwrap();
        let set: Vec<Bitstring> = ["0000", "0110", "1011", "1111"].iter().map(|s| s.parse().unwrap()).collect();
        let q = [0.1, 0.2, 0.3, 0.4];
        let delta = 1.3;
        let p: Vec<f64> = set.iter().map(|s| net.prob(s).unwrap()).collect();
        let mut direct = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                let d: f64 = set[i].to_bools().iter().zip(set[j].to_bools()).map(|(a, b)| if *a != b { 1.0 } else { 0.0 }).sum();
                direct += (p[i] - q[i]) * (p[j] - q[j]) * (-d / (2.0 * delta)).exp();
            }
        }
        assert_abs_diff_eq!(mmd_loss(&net, &set, &q, delta).unwrap(), direct, epsilon = 1e-14);
        // Infinite bandwidth collapses the kernel to 1.
        let wide = mmd_loss(&net, &set, &q, 1e15).unwrap();
        let diff: f64 = q.iter().sum::<f64>() - p.iter().sum::<f64>();
        assert_abs_diff_eq!(wide, diff * diff, epsilon = 1e-12);
        // Matching targets give zero loss.
        assert_abs_diff_eq!(mmd_loss(&net, &set, &p, delta).unwrap(), 0.0, epsilon = 1e-15);
        assert!(mmd_loss(&net, &set, &q, 0.0).is_err());
    }

    #[test]
    fn logcosh_regimes() {
        let net = MaskedAutoregressiveNet::zeros(3, 5, 2).unwrap();
        let set: Vec<Bitstring> = vec!["010".parse().unwrap()];
        assert_abs_diff_eq!(logcosh_loss(&net, &set, &[0.125]).unwrap(), 0.0, epsilon = 1e-15);
        let r = 1e-3;
        assert_abs_diff_eq!(logcosh_loss(&net, &set, &[0.125 + r]).unwrap(), r * r / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(logcosh(3.0), 3f64.cosh().ln(), epsilon = 1e-14);
    }

    #[test]
    fn reverse_kl_values() {
        let net = MaskedAutoregressiveNet::zeros(2, 5, 2).unwrap();
        let batch: Vec<Bitstring> = vec!["00".parse().unwrap(), "11".parse().unwrap()];
        assert_abs_diff_eq!(reverse_kl_loss(&net, &batch, &[0.25, 0.25]).unwrap(), 0.0, epsilon = 1e-14);
        assert!(reverse_kl_loss(&net, &batch, &[0.0, 0.0]).unwrap() > 20.0);
    }

    #[test]
    fn bandwidth_heuristic() {
        let set: Vec<Bitstring> = ["000", "011", "111"].iter().map(|s| s.parse().unwrap()).collect();
        assert_eq!(median_bandwidth(&set), 2.0);
        assert_eq!(median_bandwidth(&set[..1]), 0.5);
    }

    fn fd_check(kind: LossKind) {
        let mut net = MaskedAutoregressiveNet::new(2, 5, 2, 21).unwrap();
        assert!(net.n_params() <= 200);
        // Random biases keep pre-activations away from the selu kink at 0.
        let mut rng = chacha(77);
        let jittered: Vec<f64> = net.params().iter().map(|p| p + rng.random_range(-0.3..0.3)).collect();
        net.set_params(&jittered).unwrap();
        let set: Vec<Bitstring> = ["00", "01", "11"].iter().map(|s| s.parse().unwrap()).collect();
        let q = [0.5, 0.3, 0.2];
        let (_, g) = loss_and_gradient(&net, kind, &set, &q, 0.8).unwrap();
        let theta = net.params();
        let mut probe = net.clone();
        let h = 1e-5;
        for i in 0..theta.len() {
            let mut t = theta.clone();
            t[i] += h;
            probe.set_params(&t).unwrap();
            let (up, _) = loss_and_gradient(&probe, kind, &set, &q, 0.8).unwrap();
            t[i] -= 2.0 * h;
            probe.set_params(&t).unwrap();
            let (down, _) = loss_and_gradient(&probe, kind, &set, &q, 0.8).unwrap();
            let fd = (up - down) / (2.0 * h);
            let scale = g[i].abs().max(fd.abs()).max(1e-6);
            assert!((g[i] - fd).abs() / scale < 1e-6 || (g[i] - fd).abs() < 1e-10, "{kind:?} param {i}: {} vs {fd}", g[i]);
        }
    }

    #[test]
    fn mmd_gradient_matches_finite_differences() {
        fd_check(LossKind::Mmd);
    }

    #[test]
    fn logcosh_gradient_matches_finite_differences() {
        fd_check(LossKind::Logcosh);
    }

    #[test]
    fn log_prob_gradient_matches_finite_differences() {
        let net = MaskedAutoregressiveNet::new(3, 5, 2, 6).unwrap();
        let s: Bitstring = "101".parse().unwrap();
        let (_, g) = net.log_prob_gradient(&s).unwrap();
        let fd = crate::simulator::central_difference(
            |t| {
                let mut p = net.clone();
                p.set_params(t).unwrap();
                p.log_prob(&s).unwrap()
            },
            &net.params(),
            1e-5,
        );
        for (a, b) in g.iter().zip(&fd) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
    }

    #[test]
    fn logcosh_training_learns_a_single_bitstring() {
        let mut net = MaskedAutoregressiveNet::new(8, 5, 2, 1).unwrap();
        let target: Bitstring = "10110010".parse().unwrap();
        let data = TrainData { set: vec![target], q: vec![1.0] };
        let cfg = TrainConfig { epochs: 2000, ..TrainConfig::default() };
        let report = train(&mut net, &data, LossKind::Logcosh, &cfg, 0).unwrap();
        assert!(report.final_loss < 1e-3, "loss {}", report.final_loss);
        assert!(net.log_prob(&target).unwrap() > 0.9f64.ln());
        assert!(net.sample(200, 5).iter().filter(|s| **s == target).count() > 180);
    }

    #[test]
    fn reverse_kl_training_reduces_divergence() {
        // Exact reverse KL by enumeration on a 4-bit toy target.
        let states = all_bitstrings(4);
        let raw: Vec<f64> = (0..16).map(|i| ((i * 7 % 16) as f64 + 1.0).powi(3)).collect();
        let total: f64 = raw.iter().sum();
        let data = TrainData { set: states.clone(), q: raw.iter().map(|r| r / total).collect() };
        let exact_kl = |net: &MaskedAutoregressiveNet| -> f64 {
            states
                .iter()
                .zip(&data.q)
                .map(|(s, q)| {
                    let p = net.prob(s).unwrap();
                    p * (p / q).ln()
                })
                .sum()
        };
        let mut improved = 0;
        for seed in 0..10 {
            let mut net = MaskedAutoregressiveNet::new(4, 5, 2, seed).unwrap();
            let before = exact_kl(&net);
            let cfg = TrainConfig { epochs: 100, reverse_kl_batch: 512, learning_rate: 1e-2, ..TrainConfig::default() };
            train(&mut net, &data, LossKind::ReverseKl, &cfg, seed).unwrap();
            if exact_kl(&net) < before {
                improved += 1;
            }
        }
        assert!(improved >= 9, "improved in {improved}/10 seeds");
    }

    #[test]
    fn model_average_of_identical_nets() {
        let net = MaskedAutoregressiveNet::new(5, 5, 2, 9).unwrap();
        let avg = model_average(&[net.clone(), net.clone(), net.clone(), net.clone()]).unwrap();
        assert_eq!(avg, net);
        let other = MaskedAutoregressiveNet::new(5, 5, 2, 10).unwrap();
        let mixed = model_average(&[net.clone(), other.clone()]).unwrap();
        let expected: Vec<f64> = net.params().iter().zip(other.params()).map(|(a, b)| (a + b) / 2.0).collect();
        assert_eq!(mixed.params(), expected);
        assert!(model_average(&[net, MaskedAutoregressiveNet::new(4, 5, 2, 0).unwrap()]).is_err());
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let net = MaskedAutoregressiveNet::new(6, 5, 2, 31).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        net.save(&path).unwrap();
        let back = MaskedAutoregressiveNet::load(&path).unwrap();
        assert_eq!(back, net);
        for (a, b) in back.params().iter().zip(net.params()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(MaskedAutoregressiveNet::from_json("{}").is_err());
    }
}
