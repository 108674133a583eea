//! Schrödinger forging: expectation values of the truncated Schmidt state
//!
//! ```text
//! |ψ⟩ = Σ_n λ_n (U|σ_n^A⟩) ⊗ (V|σ_n^B⟩)
//! ```
//!
//! from half-system simulations only. For a bipartite observable
//! `O = Σ_t c_t A_t ⊗ B_t`,
//!
//! ```text
//! ⟨O⟩ = Σ_t c_t [ Σ_n λ_n² ⟨σ_n|Ã_t|σ_n⟩⟨σ_n|B̃_t|σ_n⟩
//!               + Σ_{n>m} λ_n λ_m Σ_{p∈Z₄} (−1)^p ⟨φ^p|Ã_t|φ^p⟩⟨φ^p|B̃_t|φ^p⟩ ]
//! ```
//!
//! with `Ã = U†AU`, `B̃ = V†BV` and `|φ^p⟩ = (|σ_n⟩ + i^p|σ_m⟩)/√2` built
//! separately on each half. The whole expression is the quadratic form
//! `λᵀMλ`; [`effective_matrix`] returns `M`.

use std::collections::{BTreeMap, HashMap, HashSet};

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_width, Error, Result};
use crate::pauli::{bipartition, BipartiteTerm, BipartitionSpec, Bitstring, Pauli, PauliHamiltonian, PauliString};
use crate::simulator::{apply_pauli_sum, pair_state, prepare_basis, CircuitAnsatz, StateVector, IMAG_TOLERANCE};

pub const NORM_TOLERANCE: f64 = 1e-10;
pub const SYMMETRY_TOLERANCE: f64 = 1e-8;

/// Ordered basis pairs `(σ^A, σ^B)` with signed real coefficients on the unit
/// sphere. Signs are kept because fixed computational-basis pairs can need
/// negative weights; a sign can always be absorbed into `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchmidtVector {
    pairs: Vec<(Bitstring, Bitstring)>,
    coeffs: Vec<f64>,
}

impl SchmidtVector {
    /// Validates distinct, width-consistent pairs and a unit-norm `coeffs`.
    pub fn new(pairs: Vec<(Bitstring, Bitstring)>, coeffs: Vec<f64>) -> Result<Self> {
        validate_pairs(&pairs)?;
        if coeffs.len() != pairs.len() {
            return Err(Error::Dimension {
                expected: pairs.len(),
                got: coeffs.len(),
            });
        }
        let norm: f64 = coeffs.iter().map(|c| c * c).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE || !norm.is_finite() {
            return Err(Error::InvalidInput(format!("Schmidt coefficients have squared norm {norm}, expected 1")));
        }
        Ok(Self { pairs, coeffs })
    }

    /// Like [`SchmidtVector::new`] but rescales `coeffs` to unit norm first.
    pub fn normalized(pairs: Vec<(Bitstring, Bitstring)>, mut coeffs: Vec<f64>) -> Result<Self> {
        crate::optimizers::normalize(&mut coeffs)
            .map_err(|_| Error::InvalidInput("Schmidt coefficients are all zero".into()))?;
        Self::new(pairs, coeffs)
    }

    /// Equal weights `1/√k` on the given pairs.
    pub fn uniform(pairs: Vec<(Bitstring, Bitstring)>) -> Result<Self> {
        let k = pairs.len().max(1);
        Self::normalized(pairs, vec![1.0 / (k as f64).sqrt(); k])
    }

    pub fn pairs(&self) -> &[(Bitstring, Bitstring)] {
        &self.pairs
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn half_widths(&self) -> (usize, usize) {
        (self.pairs[0].0.width(), self.pairs[0].1.width())
    }

    /// Replaces the coefficients, re-checking normalization.
    pub fn with_coeffs(&self, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(self.pairs.clone(), coeffs)
    }

    pub fn entropy(&self) -> f64 {
        von_neumann_entropy(&self.coeffs)
    }
}

fn validate_pairs(pairs: &[(Bitstring, Bitstring)]) -> Result<()> {
    let Some(first) = pairs.first() else {
        return Err(Error::InvalidInput("at least one basis pair is required".into()));
    };
    let (wa, wb) = (first.0.width(), first.1.width());
    let mut seen = HashSet::with_capacity(pairs.len());
    for (a, b) in pairs {
        check_width(wa, a.width())?;
        check_width(wb, b.width())?;
        if !seen.insert((a.index(), b.index())) {
            return Err(Error::InvalidInput(format!("duplicate basis pair {a} {b}")));
        }
    }
    Ok(())
}

/// Borrowed half-system circuits with their parameters.
#[derive(Debug, Clone, Copy)]
pub struct Circuits<'a> {
    pub u: &'a CircuitAnsatz,
    pub theta_u: &'a [f64],
    pub v: &'a CircuitAnsatz,
    pub theta_v: &'a [f64],
}

/// Truncated Schmidt coefficients plus the two half-system circuits.
#[derive(Debug, Clone, PartialEq)]
pub struct ForgedState {
    pub schmidt: SchmidtVector,
    pub ansatz_u: CircuitAnsatz,
    pub theta_u: Vec<f64>,
    pub ansatz_v: CircuitAnsatz,
    pub theta_v: Vec<f64>,
}

impl ForgedState {
    pub fn new(
        schmidt: SchmidtVector,
        ansatz_u: CircuitAnsatz,
        theta_u: Vec<f64>,
        ansatz_v: CircuitAnsatz,
        theta_v: Vec<f64>,
    ) -> Result<Self> {
        let (wa, wb) = schmidt.half_widths();
        check_width(ansatz_u.width(), wa)?;
        check_width(ansatz_v.width(), wb)?;
        for (ansatz, theta) in [(&ansatz_u, &theta_u), (&ansatz_v, &theta_v)] {
            if theta.len() != ansatz.n_params() {
                return Err(Error::Dimension {
                    expected: ansatz.n_params(),
                    got: theta.len(),
                });
            }
        }
        Ok(Self {
            schmidt,
            ansatz_u,
            theta_u,
            ansatz_v,
            theta_v,
        })
    }

    pub fn circuits(&self) -> Circuits<'_> {
        Circuits {
            u: &self.ansatz_u,
            theta_u: &self.theta_u,
            v: &self.ansatz_v,
            theta_v: &self.theta_v,
        }
    }

    /// The full `2^N` statevector in the stacked A-then-B order
    /// (qubits `0..N/2` are A). Intended for small verification runs.
    pub fn reconstruct_stacked(&self) -> Result<Vec<num_complex::Complex64>> {
        let (wa, wb) = self.schmidt.half_widths();
        let mut psi = vec![num_complex::Complex64::new(0.0, 0.0); 1 << (wa + wb)];
        for ((a, b), lam) in self.schmidt.pairs().iter().zip(self.schmidt.coeffs()) {
            let ua = self.ansatz_u.apply(&prepare_basis(a)?, &self.theta_u)?;
            let vb = self.ansatz_v.apply(&prepare_basis(b)?, &self.theta_v)?;
            for (i, x) in ua.amplitudes().iter().enumerate() {
                for (j, y) in vb.amplitudes().iter().enumerate() {
                    psi[(i << wb) | j] += x * y * *lam;
                }
            }
        }
        Ok(psi)
    }
}

/// A half-system input state of Eq.-4 type: a basis state or a two-label
/// superposition with phase `i^p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum HalfState {
    Basis(u32),
    Pair(u32, u32, u8),
}

impl HalfState {
    fn prepare(&self, width: usize) -> Result<StateVector> {
        match *self {
            HalfState::Basis(i) => prepare_basis(&Bitstring::from_index(i, width)?),
            HalfState::Pair(n, m, p) => Ok(pair_state(
                &Bitstring::from_index(n, width)?,
                &Bitstring::from_index(m, width)?,
                p,
            )),
        }
    }
}

/// One contribution `w · X_state_A · Y_state_B` of the forged sum.
#[derive(Debug, Clone, Copy)]
struct Slot {
    a: usize,
    b: usize,
    /// Row/column of the quadratic form the slot contributes to.
    n: usize,
    m: usize,
    /// `+1`, or `(−1)^p` for superposition slots.
    sign: f64,
}

/// Unique input states and unique Pauli operators of one half.
struct HalfTable {
    width: usize,
    states: Vec<HalfState>,
    ops: Vec<PauliString>,
}

impl HalfTable {
    fn new(width: usize) -> Self {
        Self {
            width,
            states: Vec::new(),
            ops: Vec::new(),
        }
    }

    /// Expectations `⟨s|W†P_jW|s⟩` for every state `s` and op `P_j`.
    fn expectations(&self, ansatz: &CircuitAnsatz, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.states
            .par_iter()
            .map(|s| {
                let psi = ansatz.apply(&s.prepare(self.width)?, theta)?;
                self.ops
                    .iter()
                    .map(|p| {
                        let v = psi.pauli_expectation_complex(p);
                        if v.im.abs() > IMAG_TOLERANCE {
                            return Err(Error::Consistency(format!(
                                "half-system expectation of {p} has imaginary part {}",
                                v.im
                            )));
                        }
                        Ok(v.re)
                    })
                    .collect()
            })
            .collect()
    }

    /// Gradient of `Σ_s ⟨s|W†(Σ_j w_sj P_j)W|s⟩` with respect to `theta`.
    fn weighted_gradient(&self, ansatz: &CircuitAnsatz, theta: &[f64], weights: &[Vec<f64>]) -> Result<Vec<f64>> {
        let per_state: Vec<Vec<f64>> = self
            .states
            .par_iter()
            .zip(weights.par_iter())
            .map(|(s, w)| {
                if w.iter().all(|x| *x == 0.0) {
                    return Ok(vec![0.0; theta.len()]);
                }
                let input = s.prepare(self.width)?;
                let (_, g) = ansatz.expectation_gradient(&input, theta, |psi| {
                    apply_pauli_sum(psi, w.iter().copied().zip(self.ops.iter()))
                        .expect("operator widths were validated")
                })?;
                Ok(g)
            })
            .collect::<Result<_>>()?;
        let mut total = vec![0.0; theta.len()];
        for g in per_state {
            for (t, x) in total.iter_mut().zip(g) {
                *t += x;
            }
        }
        Ok(total)
    }
}

fn intern<T: Clone + Eq + std::hash::Hash>(items: &mut Vec<T>, index: &mut HashMap<T, usize>, item: T) -> usize {
    *index.entry(item.clone()).or_insert_with(|| {
        items.push(item);
        items.len() - 1
    })
}

/// Precomputed bookkeeping for evaluating Eq.-4 sums over a fixed pair list and
/// a fixed list of bipartite terms. Reused across VQE epochs.
pub struct ForgingPlan {
    k: usize,
    half_a: HalfTable,
    half_b: HalfTable,
    slots: Vec<Slot>,
    /// Per term: (coefficient, op index in A, op index in B).
    terms: Vec<(f64, usize, usize)>,
}

impl ForgingPlan {
    pub fn new(pairs: &[(Bitstring, Bitstring)], terms: &[BipartiteTerm]) -> Result<Self> {
        validate_pairs(pairs)?;
        let (wa, wb) = (pairs[0].0.width(), pairs[0].1.width());
        let mut half_a = HalfTable::new(wa);
        let mut half_b = HalfTable::new(wb);
        let (mut ia, mut ib) = (HashMap::new(), HashMap::new());
        let (mut oa, mut ob) = (HashMap::new(), HashMap::new());

        let mut term_idx = Vec::with_capacity(terms.len());
        for t in terms {
            check_width(wa, t.op_a.width())?;
            check_width(wb, t.op_b.width())?;
            if t.op_a.phase_power() != 0 || t.op_b.phase_power() != 0 {
                return Err(Error::InvalidInput("bipartite operators must carry phase +1".into()));
            }
            let a = intern(&mut half_a.ops, &mut oa, t.op_a.clone());
            let b = intern(&mut half_b.ops, &mut ob, t.op_b.clone());
            term_idx.push((t.coeff, a, b));
        }

        let mut slots = Vec::new();
        for (n, (a, b)) in pairs.iter().enumerate() {
            let sa = intern(&mut half_a.states, &mut ia, HalfState::Basis(a.index()));
            let sb = intern(&mut half_b.states, &mut ib, HalfState::Basis(b.index()));
            slots.push(Slot { a: sa, b: sb, n, m: n, sign: 1.0 });
        }
        for n in 0..pairs.len() {
            for m in 0..n {
                let (an, bn) = &pairs[n];
                let (am, bm) = &pairs[m];
                for p in 0..4u8 {
                    let sa = intern(&mut half_a.states, &mut ia, HalfState::Pair(an.index(), am.index(), p));
                    let sb = intern(&mut half_b.states, &mut ib, HalfState::Pair(bn.index(), bm.index(), p));
                    let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
                    slots.push(Slot { a: sa, b: sb, n, m, sign });
                }
            }
        }
        Ok(Self {
            k: pairs.len(),
            half_a,
            half_b,
            slots,
            terms: term_idx,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of distinct half-system circuit evaluations per side.
    pub fn state_counts(&self) -> (usize, usize) {
        (self.half_a.states.len(), self.half_b.states.len())
    }

    fn check_circuits(&self, c: &Circuits<'_>) -> Result<()> {
        check_width(self.half_a.width, c.u.width())?;
        check_width(self.half_b.width, c.v.width())
    }

    fn matrix_from(&self, xa: &[Vec<f64>], xb: &[Vec<f64>]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.k, self.k);
        for s in &self.slots {
            let mut acc = 0.0;
            for &(c, a, b) in &self.terms {
                acc += c * xa[s.a][a] * xb[s.b][b];
            }
            if s.n == s.m {
                m[(s.n, s.n)] += s.sign * acc;
            } else {
                let half = 0.5 * s.sign * acc;
                m[(s.n, s.m)] += half;
                m[(s.m, s.n)] += half;
            }
        }
        m
    }

    /// The quadratic form `M` with `⟨O⟩ = λᵀMλ` for the given circuits.
    pub fn matrix(&self, circuits: Circuits<'_>) -> Result<DMatrix<f64>> {
        self.check_circuits(&circuits)?;
        let xa = self.half_a.expectations(circuits.u, circuits.theta_u)?;
        let xb = self.half_b.expectations(circuits.v, circuits.theta_v)?;
        Ok(self.matrix_from(&xa, &xb))
    }

    /// Energy `λᵀMλ` with its gradients with respect to `Θ_U`, `Θ_V` and `λ`.
    pub fn energy_and_gradients(&self, lambda: &[f64], circuits: Circuits<'_>) -> Result<ForgedGradient> {
        self.check_circuits(&circuits)?;
        if lambda.len() != self.k {
            return Err(Error::Dimension {
                expected: self.k,
                got: lambda.len(),
            });
        }
        let xa = self.half_a.expectations(circuits.u, circuits.theta_u)?;
        let xb = self.half_b.expectations(circuits.v, circuits.theta_v)?;
        let matrix = self.matrix_from(&xa, &xb);
        let ml = &matrix * nalgebra::DVector::from_column_slice(lambda);
        let energy: f64 = lambda.iter().zip(ml.iter()).map(|(l, x)| l * x).sum();
        let grad_lambda: Vec<f64> = ml.iter().map(|x| 2.0 * x).collect();

        let mut wa = vec![vec![0.0; self.half_a.ops.len()]; self.half_a.states.len()];
        let mut wb = vec![vec![0.0; self.half_b.ops.len()]; self.half_b.states.len()];
        for s in &self.slots {
            let w = s.sign * lambda[s.n] * lambda[s.m];
            if w == 0.0 {
                continue;
            }
            for &(c, a, b) in &self.terms {
                wa[s.a][a] += c * w * xb[s.b][b];
                wb[s.b][b] += c * w * xa[s.a][a];
            }
        }
        let grad_u = self.half_a.weighted_gradient(circuits.u, circuits.theta_u, &wa)?;
        let grad_v = self.half_b.weighted_gradient(circuits.v, circuits.theta_v, &wb)?;
        Ok(ForgedGradient {
            energy,
            grad_u,
            grad_v,
            grad_lambda,
            matrix,
        })
    }
}

/// Output of [`ForgingPlan::energy_and_gradients`].
#[derive(Debug, Clone)]
pub struct ForgedGradient {
    pub energy: f64,
    pub grad_u: Vec<f64>,
    pub grad_v: Vec<f64>,
    /// `∂(λᵀMλ)/∂λ = 2Mλ`, ignoring the normalization constraint.
    pub grad_lambda: Vec<f64>,
    pub matrix: DMatrix<f64>,
}

/// Forged expectation value of `Σ_t c_t A_t ⊗ B_t` on `state`.
pub fn forged_expectation(state: &ForgedState, terms: &[BipartiteTerm]) -> Result<f64> {
    let plan = ForgingPlan::new(state.schmidt.pairs(), terms)?;
    let m = plan.matrix(state.circuits())?;
    Ok(quadratic_form(&m, state.schmidt.coeffs()))
}

pub fn quadratic_form(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..v.len() {
        for j in 0..v.len() {
            acc += v[i] * m[(i, j)] * v[j];
        }
    }
    acc
}

/// `M_nm = Re⟨σ_n|H|σ_m⟩` over full basis states `σ = join(σ^A, σ^B)`; this is
/// the effective matrix for identity circuits, computed without simulation.
pub fn effective_matrix_identity(
    pairs: &[(Bitstring, Bitstring)],
    h: &PauliHamiltonian,
    spec: &BipartitionSpec,
) -> Result<DMatrix<f64>> {
    validate_pairs(pairs)?;
    spec.validate(h.width())?;
    let full: Vec<u32> = pairs
        .iter()
        .map(|(a, b)| spec.join(a, b).map(|s| s.index()))
        .collect::<Result<_>>()?;
    let position: HashMap<u32, usize> = full.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let columns: Vec<Vec<(usize, f64)>> = full
        .par_iter()
        .map(|&ket| {
            let mut col = BTreeMap::new();
            h.for_each_in_column(ket, |row, val| {
                if let Some(&r) = position.get(&row) {
                    *col.entry(r).or_insert(0.0) += val.re;
                }
            });
            col.into_iter().collect()
        })
        .collect();
    let k = pairs.len();
    let mut m = DMatrix::zeros(k, k);
    for (c, col) in columns.into_iter().enumerate() {
        for (r, v) in col {
            m[(r, c)] = v;
        }
    }
    // Exact symmetry for real-coefficient Hamiltonians; enforce bitwise.
    let mt = m.transpose();
    Ok((m + mt) * 0.5)
}

/// Effective matrix of `h` over `pairs`: the identity-circuit path when
/// `circuits` is `None`, otherwise assembled from Eq.-4 evaluations.
pub fn effective_matrix(
    pairs: &[(Bitstring, Bitstring)],
    h: &PauliHamiltonian,
    spec: &BipartitionSpec,
    circuits: Option<Circuits<'_>>,
) -> Result<DMatrix<f64>> {
    match circuits {
        None => effective_matrix_identity(pairs, h, spec),
        Some(c) => ForgingPlan::new(pairs, &bipartition(h, spec)?)?.matrix(c),
    }
}

/// Minimizes `λᵀMλ` on the unit sphere: the eigenvector of the smallest
/// eigenvalue, with its first non-negligible component made positive.
/// Degenerate minima are resolved by picking the eigenvector whose largest
/// component sits at the smallest index.
pub fn solve_schmidt(m: &DMatrix<f64>) -> Result<(Vec<f64>, f64)> {
    let k = m.nrows();
    if k == 0 || m.ncols() != k {
        return Err(Error::InvalidInput(format!("expected a non-empty square matrix, got {}×{}", k, m.ncols())));
    }
    let scale = m.iter().fold(1.0f64, |s, x| s.max(x.abs()));
    let asym = (m - m.transpose()).iter().fold(0.0f64, |s, x| s.max(x.abs()));
    if asym > SYMMETRY_TOLERANCE * scale || m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("matrix is not symmetric (max asymmetry {asym})")));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let tie = 1e-10 * scale;
    let mut best: Option<(usize, usize)> = None;
    for (col, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev - min > tie {
            continue;
        }
        let v = eig.eigenvectors.column(col);
        let argmax = v.iter().enumerate().fold(0, |b, (i, x)| if x.abs() > v[b].abs() + 1e-12 { i } else { b });
        if best.is_none_or(|(_, a)| argmax < a) {
            best = Some((col, argmax));
        }
    }
    let (col, _) = best.expect("a minimum eigenvalue exists");
    let mut lambda: Vec<f64> = eig.eigenvectors.column(col).iter().copied().collect();
    crate::optimizers::normalize(&mut lambda)?;
    if let Some(first) = lambda.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            lambda.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let value = quadratic_form(m, &lambda);
    Ok((lambda, value))
}

/// `S = −2 Σ λ² ln|λ|` in nats, with `0·ln 0 = 0`.
pub fn von_neumann_entropy(lambda: &[f64]) -> f64 {
    let s: f64 = lambda
        .iter()
        .filter(|l| **l != 0.0)
        .map(|l| {
            let p = l * l;
            -p * p.ln()
        })
        .sum();
    s.max(0.0)
}

/// Site pairs `(i, j)` with `i < j`, ordered by `i` then `j`.
pub fn correlator_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// Forged `⟨Z_i Z_j⟩` for sites in the original (un-stacked) labelling.
pub fn correlator(state: &ForgedState, spec: &BipartitionSpec, i: usize, j: usize) -> Result<f64> {
    let n = spec.width();
    if i >= j || j >= n {
        return Err(Error::InvalidInput(format!("correlator needs i < j < {n}, got ({i}, {j})")));
    }
    let zz = PauliString::from_letters(n, &[(i, Pauli::Z), (j, Pauli::Z)])?;
    let h = PauliHamiltonian::from_terms(n, [(1.0, zz)])?;
    forged_expectation(state, &bipartition(&h, spec)?)
}

/// All correlators in [`correlator_pairs`] order, sharing one evaluation plan.
pub fn all_correlators(state: &ForgedState, spec: &BipartitionSpec) -> Result<Vec<((usize, usize), f64)>> {
    let n = spec.width();
    let pairs = correlator_pairs(n);
    let mut terms = Vec::new();
    for &(i, j) in &pairs {
        let zz = PauliString::from_letters(n, &[(i, Pauli::Z), (j, Pauli::Z)])?;
        let h = PauliHamiltonian::from_terms(n, [(1.0, zz)])?;
        terms.push(bipartition(&h, spec)?.remove(0));
    }
    // One plan over all operators; evaluate each correlator as its own term.
    let plan = ForgingPlan::new(state.schmidt.pairs(), &terms)?;
    let c = state.circuits();
    let xa = plan.half_a.expectations(c.u, c.theta_u)?;
    let xb = plan.half_b.expectations(c.v, c.theta_v)?;
    let lam = state.schmidt.coeffs();
    let mut out = Vec::with_capacity(pairs.len());
    for (t, &pair) in pairs.iter().enumerate() {
        let (coef, a, b) = plan.terms[t];
        let mut acc = 0.0;
        for s in &plan.slots {
            acc += s.sign * lam[s.n] * lam[s.m] * coef * xa[s.a][a] * xb[s.b][b];
        }
        out.push((pair, acc));
    }
    Ok(out)
}
