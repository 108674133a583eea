//! Exact references: ground states by dense diagonalization or matrix-free
//! Lanczos, exact Schmidt decompositions, and the fixed-basis pair ranking
//! used to score bitstring selection.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_width, Error, Result};
use crate::pauli::{BipartitionSpec, Bitstring, PauliHamiltonian};
use crate::rng::chacha;

/// Above this many basis states `Method::Auto` switches from dense to Lanczos.
pub const DENSE_LIMIT: usize = 512;
pub const LANCZOS_TOLERANCE: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanczosConfig {
    pub krylov_dim: usize,
    pub max_restarts: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LanczosConfig {
    fn default() -> Self {
        Self {
            krylov_dim: 80,
            max_restarts: 200,
            tolerance: LANCZOS_TOLERANCE,
            seed: 0x5eed,
        }
    }
}

/// Lowest eigenpair of a Hamiltonian, amplitudes over the full `2^N` basis
/// (zero outside the sector when one was requested).
#[derive(Debug, Clone, PartialEq)]
pub struct ExactGroundState {
    pub width: usize,
    pub energy: f64,
    pub amplitudes: Vec<Complex64>,
}

impl ExactGroundState {
    /// `‖Hψ − Eψ‖` evaluated on the full space.
    pub fn residual(&self, h: &PauliHamiltonian) -> f64 {
        let full: Vec<u32> = (0..self.amplitudes.len() as u32).collect();
        let op = SectorOperator::new(h, &full);
        let hv = op.apply(&self.amplitudes);
        hv.iter()
            .zip(&self.amplitudes)
            .map(|(a, b)| (a - b * self.energy).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Full-space indices whose A half carries `ones_a` ones and B half `ones_b`.
pub fn sector_basis(spec: &BipartitionSpec, ones_a: u32, ones_b: u32) -> Result<Vec<u32>> {
    let n = spec.width();
    let mut out = Vec::new();
    for idx in 0..(1u64 << n) {
        let full = Bitstring::from_index(idx as u32, n)?;
        let (a, b) = spec.split(&full)?;
        if a.weight() == ones_a && b.weight() == ones_b {
            out.push(idx as u32);
        }
    }
    Ok(out)
}

/// `H` restricted to a sorted subset of basis states, applied matrix-free.
struct SectorOperator<'a> {
    h: &'a PauliHamiltonian,
    basis: &'a [u32],
    position: Option<Vec<u32>>,
}

impl<'a> SectorOperator<'a> {
    fn new(h: &'a PauliHamiltonian, basis: &'a [u32]) -> Self {
        let full = basis.len() == 1usize << h.width();
        let position = if full {
            None
        } else {
            let mut pos = vec![u32::MAX; 1usize << h.width()];
            for (i, &b) in basis.iter().enumerate() {
                pos[b as usize] = i as u32;
            }
            Some(pos)
        };
        Self { h, basis, position }
    }

    fn locate(&self, idx: u32) -> Option<usize> {
        match &self.position {
            None => Some(idx as usize),
            Some(pos) => {
                let p = pos[idx as usize];
                (p != u32::MAX).then_some(p as usize)
            }
        }
    }

    fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Row-parallel `Hv` using `H[r, c] = conj(H[c, r])`.
    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.basis
            .par_iter()
            .map(|&row| {
                let mut acc = ZERO;
                self.h.for_each_in_column(row, |col, val| {
                    if let Some(c) = self.locate(col) {
                        acc += val.conj() * v[c];
                    }
                });
                acc
            })
            .collect()
    }

    fn dense(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut m = DMatrix::from_element(d, d, ZERO);
        for (c, &col) in self.basis.iter().enumerate() {
            self.h.for_each_in_column(col, |row, val| {
                if let Some(r) = self.locate(row) {
                    m[(r, c)] += val;
                }
            });
        }
        m
    }
}

fn argmax_abs(v: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, x) in v.enumerate() {
        if x > best.1 + 1e-12 {
            best = (i, x);
        }
    }
    best.0
}

/// Normalizes and fixes the global phase: the largest-magnitude amplitude
/// (smallest index among ties) becomes real and positive.
fn fix_phase(v: &mut [Complex64]) {
    let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    let i = argmax_abs(v.iter().map(|x| x.norm()));
    let phase = v[i].conj() / v[i].norm() / norm;
    v.iter_mut().for_each(|x| *x *= phase);
    v[i] = Complex64::new(v[i].re, 0.0);
}

/// Ground state of `h`, optionally restricted to `sector` (sorted full-space
/// basis indices).
pub fn ground_state(h: &PauliHamiltonian, sector: Option<&[u32]>, method: Method) -> Result<ExactGroundState> {
    ground_state_with(h, sector, method, &LanczosConfig::default())
}

pub fn ground_state_with(
    h: &PauliHamiltonian,
    sector: Option<&[u32]>,
    method: Method,
    config: &LanczosConfig,
) -> Result<ExactGroundState> {
    let n = h.width();
    if n > 26 {
        return Err(Error::InvalidInput(format!("{n} qubits is beyond the exact solver")));
    }
    let full: Vec<u32>;
    let basis = match sector {
        Some(b) => {
            if b.is_empty() || b.windows(2).any(|w| w[0] >= w[1]) || b.iter().any(|&x| (x as u64) >> n != 0) {
                return Err(Error::InvalidInput("sector basis must be non-empty, sorted, unique and in range".into()));
            }
            b
        }
        None => {
            full = (0..1u32 << n).collect();
            &full
        }
    };
    let op = SectorOperator::new(h, basis);
    let use_dense = match method {
        Method::Dense => true,
        Method::Lanczos => false,
        Method::Auto => op.dim() <= DENSE_LIMIT,
    };
    let (energy, mut vec) = if use_dense { dense_lowest(&op) } else { lanczos_lowest(&op, config)? };
    fix_phase(&mut vec);
    let mut amplitudes = vec![ZERO; 1 << n];
    for (&b, a) in basis.iter().zip(vec) {
        amplitudes[b as usize] = a;
    }
    Ok(ExactGroundState {
        width: n,
        energy,
        amplitudes,
    })
}

fn dense_lowest(op: &SectorOperator<'_>) -> (f64, Vec<Complex64>) {
    let m = op.dense();
    let eig = SymmetricEigen::new(m);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = eig.eigenvalues.iter().fold(1.0f64, |s, x| s.max(x.abs()));
    let mut best: Option<(usize, usize)> = None;
    for (col, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev - min > 1e-10 * scale {
            continue;
        }
        let arg = argmax_abs(eig.eigenvectors.column(col).iter().map(|x| x.norm()));
        if best.is_none_or(|(_, a)| arg < a) {
            best = Some((col, arg));
        }
    }
    let col = best.expect("non-empty spectrum").0;
    (min, eig.eigenvectors.column(col).iter().copied().collect())
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Restarted Lanczos with full reorthogonalization; each cycle restarts from
/// the current Ritz vector.
fn lanczos_lowest(op: &SectorOperator<'_>, config: &LanczosConfig) -> Result<(f64, Vec<Complex64>)> {
    let d = op.dim();
    let mut rng = chacha(config.seed);
    let mut start: Vec<Complex64> = (0..d)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let m_max = config.krylov_dim.clamp(2, d.max(2)).min(d);
    let mut last = (f64::NAN, f64::INFINITY);
    for _ in 0..config.max_restarts {
        let n0 = norm(&start);
        start.iter_mut().for_each(|x| *x /= n0);
        let mut basis: Vec<Vec<Complex64>> = vec![start.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        loop {
            let j = basis.len() - 1;
            let mut w = op.apply(&basis[j]);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            // Two passes of classical Gram–Schmidt against the whole basis.
            for _ in 0..2 {
                for q in &basis {
                    let c = dot(q, &w);
                    w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
                }
            }
            let b = norm(&w);
            if basis.len() >= m_max || b < 1e-12 * a.abs().max(1.0) {
                break;
            }
            beta.push(b);
            w.iter_mut().for_each(|x| *x /= b);
            basis.push(w);
        }
        let m = alpha.len();
        let mut t = DMatrix::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = beta[i];
                t[(i + 1, i)] = beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (col, theta) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |b, (i, &x)| if x < b.1 { (i, x) } else { b });
        let y: DVector<f64> = eig.eigenvectors.column(col).into_owned();
        let mut x = vec![ZERO; d];
        for (q, &c) in basis.iter().zip(y.iter()) {
            x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += qi * c);
        }
        let nx = norm(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let hx = op.apply(&x);
        let residual = hx.iter().zip(&x).map(|(a, b)| (a - b * theta).norm_sqr()).sum::<f64>().sqrt();
        last = (theta, residual);
        if residual <= config.tolerance * theta.abs().max(1.0) {
            return Ok((theta, x));
        }
        start = x;
    }
    Err(Error::NoConvergence(format!(
        "Lanczos stopped after {} restarts at E = {} with residual {:.3e}",
        config.max_restarts, last.0, last.1
    )))
}

/// Amplitudes regrouped as the `2^{N/2} × 2^{N/2}` matrix `C[σ^A, σ^B]`.
pub fn amplitude_matrix(psi: &ExactGroundState, spec: &BipartitionSpec) -> Result<DMatrix<Complex64>> {
    spec.validate(psi.width)?;
    let half = spec.half_width();
    let dim = 1usize << half;
    let mut c = DMatrix::from_element(dim, dim, ZERO);
    for a in 0..dim {
        let la = Bitstring::from_index(a as u32, half)?;
        for b in 0..dim {
            let lb = Bitstring::from_index(b as u32, half)?;
            c[(a, b)] = psi.amplitudes[spec.join(&la, &lb)?.index() as usize];
        }
    }
    Ok(c)
}

/// Exact Schmidt decomposition across `spec`.
#[derive(Debug, Clone)]
pub struct ExactSchmidt {
    /// Singular values, descending.
    pub values: Vec<f64>,
    /// Computational labels carrying the largest weight in each left/right
    /// singular vector, aligned with `values`.
    pub dominant_labels: Vec<(Bitstring, Bitstring)>,
    pub left: DMatrix<Complex64>,
    pub right_adjoint: DMatrix<Complex64>,
}

pub fn exact_schmidt(psi: &ExactGroundState, spec: &BipartitionSpec) -> Result<ExactSchmidt> {
    check_width(psi.width, spec.width())?;
    let half = spec.half_width();
    let c = amplitude_matrix(psi, spec)?;
    let svd = c.svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᴴ");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let left = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let right_adjoint = DMatrix::from_fn(order.len(), vt.ncols(), |r, c| vt[(order[r], c)]);
    let dominant_labels = (0..order.len())
        .map(|i| {
            let a = argmax_abs(left.column(i).iter().map(|x| x.norm()));
            let b = argmax_abs(right_adjoint.row(i).iter().map(|x| x.norm()));
            Ok((Bitstring::from_index(a as u32, half)?, Bitstring::from_index(b as u32, half)?))
        })
        .collect::<Result<_>>()?;
    Ok(ExactSchmidt {
        values,
        dominant_labels,
        left,
        right_adjoint,
    })
}

/// Sum of the `k` largest squared coefficients.
pub fn truncated_weight(lambda: &[f64], k: usize) -> f64 {
    let mut sq: Vec<f64> = lambda.iter().map(|l| l * l).collect();
    sq.sort_by(|a, b| b.total_cmp(a));
    sq.iter().take(k).sum()
}

/// A basis pair with its ground-state amplitude magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedPair {
    pub a: Bitstring,
    pub b: Bitstring,
    pub weight: f64,
}

/// Every basis pair ranked by `|⟨σ^A σ^B|ψ⟩|` (descending; ties by pair
/// order). With identity circuits and every pair allowed, the optimal forged
/// coefficients are exactly these amplitudes, so this is the target ranking
/// of fixed-basis selection.
pub fn ranked_pairs(psi: &ExactGroundState, spec: &BipartitionSpec) -> Result<Vec<RankedPair>> {
    spec.validate(psi.width)?;
    let mut out = Vec::new();
    for (idx, amp) in psi.amplitudes.iter().enumerate() {
        if amp.norm() == 0.0 {
            continue;
        }
        let (a, b) = spec.split(&Bitstring::from_index(idx as u32, psi.width)?)?;
        out.push(RankedPair { a, b, weight: amp.norm() });
    }
    out.sort_by(|x, y| {
        y.weight
            .total_cmp(&x.weight)
            .then_with(|| x.a.cmp(&y.a))
            .then_with(|| x.b.cmp(&y.b))
    });
    Ok(out)
}

/// The `k` dominant basis pairs of [`ranked_pairs`].
pub fn exact_topk_pairs(psi: &ExactGroundState, spec: &BipartitionSpec, k: usize) -> Result<Vec<RankedPair>> {
    let mut r = ranked_pairs(psi, spec)?;
    r.truncate(k);
    Ok(r)
}
