//! Iterative neural selection of the `k` basis pairs with the largest Schmidt
//! weight.
//!
//! Each iteration samples candidates `G` from the autoregressive net, solves
//! the constrained quadratic problem over `A ∪ G` with identity circuits,
//! keeps the `k` pairs of largest `|λ|` and trains the net towards `λ²`.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arnn::{model_average, train, LossKind, MaskedAutoregressiveNet, TrainConfig, TrainData};
use crate::error::{Error, Result};
use crate::forging::{effective_matrix_identity, solve_schmidt};
use crate::oracle::RankedPair;
use crate::pauli::{BipartitionSpec, Bitstring, PauliHamiltonian};
use crate::rng::{chacha, derive_seed};

pub type Pair = (Bitstring, Bitstring);


/// Which bitstrings the net is trained on each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingSet {
    /// The pruned set `A′` with its coefficients.
    #[default]
    Pruned,
    /// All solved candidates `A ∪ G`.
    Union,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    pub k: usize,
    pub g_size: usize,
    pub max_iters: usize,
    pub stability_window: usize,
    pub loss_eps: f64,
    pub training_set: TrainingSet,
    pub loss: LossKind,
    pub model_averaging: bool,
    /// Required numbers of ones in the A and B halves.
    pub sector: Option<(usize, usize)>,
    /// Restrict to pairs `(σ, σ)`; the net then models one half only.
    pub symmetric_pairing: bool,
    /// Redraw until `G` holds `g_size` pairs not already in `A` (bounded by
    /// a draw budget); otherwise `G` is one raw batch of `g_size` samples.
    pub distinct_candidates: bool,
    pub hidden_layers: usize,
    pub density: usize,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            k: 8,
            g_size: 20,
            max_iters: 200,
            stability_window: 5,
            loss_eps: 1e-3,
            training_set: TrainingSet::Pruned,
            loss: LossKind::Mmd,
            model_averaging: false,
            sector: None,
            symmetric_pairing: false,
            distinct_candidates: true,
            hidden_layers: crate::arnn::DEFAULT_HIDDEN_LAYERS,
            density: crate::arnn::DEFAULT_DENSITY,
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("selection: {m}")));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.g_size == 0 {
            return bad("g_size must be at least 1");
        }
        if self.max_iters == 0 || self.stability_window == 0 {
            return bad("max_iters and stability_window must be positive");
        }
        if !(self.loss_eps > 0.0) {
            return bad("loss_eps must be positive");
        }
        if !(self.train.learning_rate > 0.0) || self.train.epochs == 0 {
            return bad("training needs a positive learning rate and at least one epoch");
        }
        if self.density == 0 {
            return bad("density must be positive");
        }
        if let (true, Some((a, b))) = (self.symmetric_pairing, self.sector) {
            if a != b {
                return bad("symmetric pairing needs equal sector quotas");
            }
        }
        Ok(())
    }
}

/// One row of the selection trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Pairs of `A′` that were not in the previous `A`.
    pub bit_updates: usize,
    pub loss: f64,
    /// Minimum of `λᵀMλ` over `A ∪ G`.
    pub subspace_energy: f64,
    pub set_hash: String,
    pub candidates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct SelectionState {
    pub a: Vec<Pair>,
    pub iteration: usize,
    /// Coefficients over the last solved `A ∪ G`, aligned with `candidates`.
    pub candidates: Vec<Pair>,
    pub lambda_current: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub net: MaskedAutoregressiveNet,
}

#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    /// Final pairs, ordered by descending `|λ|`.
    pub pairs: Vec<Pair>,
    /// Coefficients re-solved over `pairs` alone.
    pub lambda: Vec<f64>,
    pub energy: f64,
    pub termination: Termination,
    pub state: SelectionState,
}

/// Hex SHA-256 prefix of a pair set, independent of its order.
pub fn set_hash(pairs: &[Pair]) -> String {
    let mut lines: Vec<String> = pairs.iter().map(|(a, b)| format!("{a} {b}")).collect();
    lines.sort();
    let digest = Sha256::digest(lines.join("\n").as_bytes());
    hex::encode(&digest[..8])
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn random_half(rng: &mut impl Rng, width: usize, ones: Option<usize>) -> Bitstring {
    let mut b = Bitstring::zeros(width).expect("valid width");
    match ones {
        Some(w) => {
            for q in sample_indices(rng, width, w).into_iter() {
                b.set(q, true);
            }
        }
        None => {
            for q in 0..width {
                b.set(q, rng.random::<bool>());
            }
        }
    }
    b
}

/// Keeps the `k` largest `|λ|`, ties broken by pair order.
pub fn prune(pairs: &[Pair], lambda: &[f64], k: usize) -> (Vec<Pair>, Vec<f64>) {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_by(|&i, &j| {
        lambda[j]
            .abs()
            .total_cmp(&lambda[i].abs())
            .then_with(|| pairs[i].cmp(&pairs[j]))
    });
    order.truncate(k);
    (
        order.iter().map(|&i| pairs[i].clone()).collect(),
        order.iter().map(|&i| lambda[i]).collect(),
    )
}

fn stacked(pair: &Pair) -> Bitstring {
    Bitstring::concat(&pair.0, &pair.1).expect("half widths fit")
}

struct Sampler<'a> {
    config: &'a SelectionConfig,
    half: usize,
}

impl Sampler<'_> {
    fn net_width(&self) -> usize {
        if self.config.symmetric_pairing {
            self.half
        } else {
            2 * self.half
        }
    }

    fn encode(&self, pair: &Pair) -> Bitstring {
        if self.config.symmetric_pairing {
            pair.0.clone()
        } else {
            stacked(pair)
        }
    }

    fn decode(&self, s: &Bitstring) -> Pair {
        if self.config.symmetric_pairing {
            (s.clone(), s.clone())
        } else {
            s.split_at(self.half).expect("net width is 2·half")
        }
    }

    fn feasible_count(&self) -> f64 {
        let h = self.half;
        match (self.config.sector, self.config.symmetric_pairing) {
            (None, true) => 2f64.powi(h as i32),
            (None, false) => 2f64.powi(2 * h as i32),
            (Some((a, _)), true) => binomial(h, a),
            (Some((a, b)), false) => binomial(h, a) * binomial(h, b),
        }
    }

    fn random_pair(&self, rng: &mut impl Rng) -> Pair {
        let (qa, qb) = match self.config.sector {
            Some((a, b)) => (Some(a), Some(b)),
            None => (None, None),
        };
        let a = random_half(rng, self.half, qa);
        if self.config.symmetric_pairing {
            (a.clone(), a)
        } else {
            (a, random_half(rng, self.half, qb))
        }
    }

    fn draw(&self, net: &MaskedAutoregressiveNet, count: usize, seed: u64) -> Result<Vec<Pair>> {
        let raw = match (self.config.sector, self.config.symmetric_pairing) {
            (None, _) => net.sample(count, seed),
            (Some((a, _)), true) => net.sample_with_quotas(&[(self.half, a)], count, seed)?,
            (Some((a, b)), false) => net.sample_fixed_excitations(a, b, count, seed)?,
        };
        Ok(raw.iter().map(|s| self.decode(s)).collect())
    }

    /// Candidates `G` for one iteration, in draw order, excluding `current`.
    fn candidates(&self, net: &MaskedAutoregressiveNet, seed: u64, current: &HashSet<Pair>) -> Result<Vec<Pair>> {
        let count = self.config.g_size;
        if !self.config.distinct_candidates {
            return self.draw(net, count, seed);
        }
        let available = (self.feasible_count() - current.len() as f64).max(0.0);
        let target = if available < count as f64 { available as usize } else { count };
        let mut out = Vec::with_capacity(target);
        let mut seen = current.clone();
        for round in 0..MAX_DRAW_ROUNDS {
            if out.len() >= target {
                break;
            }
            for p in self.draw(net, count, derive_seed(seed, round))? {
                if out.len() < target && seen.insert(p.clone()) {
                    out.push(p);
                }
            }
        }
        Ok(out)
    }
}

/// Upper bound on sampling rounds of `g_size` draws spent filling `G`.
const MAX_DRAW_ROUNDS: u64 = 64;

const STREAM_INIT: u64 = 1;
const STREAM_NET: u64 = 2;
const STREAM_SAMPLE: u64 = 1 << 20;
const STREAM_TRAIN: u64 = 2 << 20;

/// Runs the selection loop for `h` split by `spec`.
pub fn run_selection(h: &PauliHamiltonian, spec: &BipartitionSpec, config: &SelectionConfig) -> Result<SelectionOutcome> {
    config.validate()?;
    spec.validate(h.width())?;
    let half = spec.half_width();
    if let Some((a, b)) = config.sector {
        if a > half || b > half {
            return Err(Error::Config(format!("sector ({a}, {b}) does not fit halves of {half} qubits")));
        }
    }
    let sampler = Sampler { config, half };
    if sampler.feasible_count() < config.k as f64 {
        return Err(Error::Config(format!(
            "only {} feasible pairs for k = {}",
            sampler.feasible_count(),
            config.k
        )));
    }

    let mut rng = chacha(derive_seed(config.seed, STREAM_INIT));
    let mut a: Vec<Pair> = Vec::with_capacity(config.k);
    let mut seen = HashSet::new();
    while a.len() < config.k {
        let p = sampler.random_pair(&mut rng);
        if seen.insert(p.clone()) {
            a.push(p);
        }
    }
    a.sort();

    let width = sampler.net_width();
    let mut net = MaskedAutoregressiveNet::new(width, config.hidden_layers, config.density, derive_seed(config.seed, STREAM_NET))?;
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut candidates = a.clone();
    let mut lambda_current = vec![0.0; a.len()];
    let mut stable = 0usize;
    let mut termination = Termination::MaxIterations;

    for it in 1..=config.max_iters {
        // 1. candidates from the net
        let mut in_union: HashSet<Pair> = a.iter().cloned().collect();
        let g = sampler.candidates(&net, derive_seed(config.seed, STREAM_SAMPLE + it as u64), &in_union)?;
        let mut union = a.clone();
        for p in g {
            if in_union.insert(p.clone()) {
                union.push(p);
            }
        }
        // 2. constrained solve over A ∪ G
        let m = effective_matrix_identity(&union, h, spec)?;
        let (lambda, energy) = solve_schmidt(&m)?;
        // 3. prune
        let (pruned, pruned_lambda) = prune(&union, &lambda, config.k);
        // 4. train towards λ²
        let data = match config.training_set {
            TrainingSet::Pruned => TrainData::from_coefficients(pruned.iter().map(|p| sampler.encode(p)).collect(), &pruned_lambda)?,
            TrainingSet::Union => TrainData::from_coefficients(union.iter().map(|p| sampler.encode(p)).collect(), &lambda)?,
        };
        let train_seed = derive_seed(config.seed, STREAM_TRAIN + it as u64);
        if it == 1 && config.model_averaging {
            let mut members = Vec::with_capacity(4);
            for j in 0..4u64 {
                let mut member = MaskedAutoregressiveNet::new(
                    width,
                    config.hidden_layers,
                    config.density,
                    derive_seed(config.seed, STREAM_NET + 16 + j),
                )?;
                train(&mut member, &data, config.loss, &config.train, derive_seed(train_seed, j))?;
                members.push(member);
            }
            net = model_average(&members)?;
        }
        let report = train(&mut net, &data, config.loss, &config.train, train_seed)?;

        // 5. A ← A′
        let old: HashSet<&Pair> = a.iter().collect();
        let bit_updates = pruned.iter().filter(|p| !old.contains(p)).count();
        let mut next = pruned.clone();
        next.sort();
        let unchanged = next == a;
        a = next;
        history.push(IterationRecord {
            iteration: it,
            bit_updates,
            loss: report.final_loss,
            subspace_energy: energy,
            set_hash: set_hash(&a),
            candidates: union.len(),
        });
        candidates = union;
        lambda_current = lambda;
        stable = if unchanged { stable + 1 } else { 0 };
        if stable >= config.stability_window && report.final_loss < config.loss_eps {
            termination = Termination::Converged;
            break;
        }
    }

    let m = effective_matrix_identity(&a, h, spec)?;
    let (lam, energy) = solve_schmidt(&m)?;
    let (pairs, lambda) = prune(&a, &lam, a.len());
    let iteration = history.len();
    Ok(SelectionOutcome {
        pairs,
        lambda,
        energy,
        termination,
        state: SelectionState {
            a,
            iteration,
            candidates,
            lambda_current,
            history,
            net,
        },
    })
}

/// Hits of `selected` among the exact top-`k` pairs of `ranked` (sorted by
/// descending weight). Pairs tied with the `k`-th weight (relative 1e-9)
/// all count as top-`k`; the result is capped at `k`.
pub fn score_against_exact(selected: &[Pair], ranked: &[RankedPair], k: usize) -> usize {
    if k == 0 || ranked.is_empty() {
        return 0;
    }
    let threshold = ranked[k.min(ranked.len()) - 1].weight * (1.0 - 1e-9);
    let top: HashSet<(&Bitstring, &Bitstring)> =
        ranked.iter().take_while(|r| r.weight >= threshold).map(|r| (&r.a, &r.b)).collect();
    selected.iter().filter(|(a, b)| top.contains(&(a, b))).count().min(k)
}

/// Hits against exactly the first `k` entries of `ranked` (ties resolved by
/// the ranking's pair order).
pub fn score_strict(selected: &[Pair], ranked: &[RankedPair], k: usize) -> usize {
    let top: HashSet<(&Bitstring, &Bitstring)> = ranked.iter().take(k).map(|r| (&r.a, &r.b)).collect();
    selected.iter().filter(|(a, b)| top.contains(&(a, b))).count()
}

pub fn write_trace_csv(path: impl AsRef<Path>, history: &[IterationRecord]) -> Result<()> {
    write_trace(std::fs::File::create(path)?, history)
}

/// Selection trace CSV: `iteration, bit_updates, loss, subspace_energy, set_hash`.
pub fn write_trace<W: Write>(out: W, history: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "bit_updates", "loss", "subspace_energy", "set_hash"])?;
    for r in history {
        w.write_record([
            r.iteration.to_string(),
            r.bit_updates.to_string(),
            r.loss.to_string(),
            r.subspace_energy.to_string(),
            r.set_hash.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One pair per line: `σA σB λ`.
pub fn write_set_file(path: impl AsRef<Path>, pairs: &[Pair], lambda: &[f64]) -> Result<()> {
    write_set(std::fs::File::create(path)?, pairs, lambda)
}

pub fn write_set<W: Write>(out: W, pairs: &[Pair], lambda: &[f64]) -> Result<()> {
    if pairs.len() != lambda.len() {
        return Err(Error::Dimension {
            expected: pairs.len(),
            got: lambda.len(),
        });
    }
    let mut f = std::io::BufWriter::new(out);
    for ((a, b), l) in pairs.iter().zip(lambda) {
        writeln!(f, "{a} {b} {l}")?;
    }
    f.flush()?;
    Ok(())
}

/// Parses a set file; `#` starts a comment and the coefficient column is optional.
pub fn parse_set_file(text: &str) -> Result<(Vec<Pair>, Option<Vec<f64>>)> {
    let mut pairs = Vec::new();
    let mut coeffs = Vec::new();
    let mut with_coeffs = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { line: i + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(err(format!("expected `σA σB [λ]`, got {} fields", fields.len())));
        }
        let a: Bitstring = fields[0].parse().map_err(|e| err(format!("{e}")))?;
        let b: Bitstring = fields[1].parse().map_err(|e| err(format!("{e}")))?;
        let has = fields.len() == 3;
        if *with_coeffs.get_or_insert(has) != has {
            return Err(err("either every line or no line carries a coefficient".into()));
        }
        if has {
            coeffs.push(fields[2].parse::<f64>().map_err(|e| err(format!("bad coefficient: {e}")))?);
        }
        pairs.push((a, b));
    }
    if pairs.is_empty() {
        return Err(Error::Parse { line: 0, msg: "set file contains no pairs".into() });
    }
    Ok((pairs, with_coeffs.unwrap_or(false).then_some(coeffs)))
}

/// `count` uniformly random distinct pairs (respecting an optional sector).
pub fn random_pairs(
    half: usize,
    count: usize,
    sector: Option<(usize, usize)>,
    symmetric_pairing: bool,
    seed: u64,
) -> Result<Vec<Pair>> {
    let config = SelectionConfig {
        sector,
        symmetric_pairing,
        k: count,
        ..SelectionConfig::default()
    };
    let sampler = Sampler { config: &config, half };
    if sampler.feasible_count() < count as f64 {
        return Err(Error::Config(format!("only {} feasible pairs for {count} requested", sampler.feasible_count())));
    }
    let mut rng = chacha(seed);
    let mut out = Vec::with_capacity(count);
    let mut seen = HashSet::new();
    while out.len() < count {
        let p = sampler.random_pair(&mut rng);
        if seen.insert(p.clone()) {
            out.push(p);
        }
    }
    Ok(out)
}
