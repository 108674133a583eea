//! Half-system statevector simulation.
//!
//! Amplitude index `i` of a width-`n` state is the basis label whose qubit
//! `q` is bit `n - 1 - q` of `i`, matching [`Bitstring::index`].

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_width, Error, Result};
use crate::pauli::{i_pow, Bitstring, PauliString};

pub const MAX_HALF_QUBITS: usize = 16;
pub const NORM_TOLERANCE: f64 = 1e-10;
pub const IMAG_TOLERANCE: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    width: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn zero_state(width: usize) -> Result<Self> {
        if width == 0 || width > MAX_HALF_QUBITS {
            return Err(Error::InvalidInput(format!(
                "statevector width must be in 1..={MAX_HALF_QUBITS}, got {width}"
            )));
        }
        let mut amps = vec![ZERO; 1 << width];
        amps[0] = ONE;
        Ok(Self { width, amps })
    }

    /// Wraps raw amplitudes; the length must be a power of two.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() || len > 1 << MAX_HALF_QUBITS {
            return Err(Error::InvalidInput(format!("{len} amplitudes is not a supported state size")));
        }
        Ok(Self {
            width: len.trailing_zeros() as usize,
            amps,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// `P|self⟩` for a Pauli string.
    pub fn apply_pauli(&self, p: &PauliString) -> Result<StateVector> {
        check_width(self.width, p.width())?;
        let mut out = vec![ZERO; self.amps.len()];
        for (idx, a) in self.amps.iter().enumerate() {
            let (k, img) = p.apply_index(idx as u32);
            out[img as usize] = i_pow(k) * a;
        }
        Ok(StateVector { width: self.width, amps: out })
    }

    /// `⟨ψ|P|ψ⟩` as a complex number (no Hermiticity check).
    pub fn pauli_expectation_complex(&self, p: &PauliString) -> Complex64 {
        debug_assert_eq!(self.width, p.width());
        let mut acc = ZERO;
        for (idx, a) in self.amps.iter().enumerate() {
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            let (k, img) = p.apply_index(idx as u32);
            acc += self.amps[img as usize].conj() * i_pow(k) * a;
        }
        acc
    }
}

/// `|σ⟩` as a statevector.
pub fn prepare_basis(sigma: &Bitstring) -> Result<StateVector> {
    let mut s = StateVector::zero_state(sigma.width())?;
    s.amps[0] = ZERO;
    s.amps[sigma.index() as usize] = ONE;
    Ok(s)
}

/// `(|σn⟩ + i^p |σm⟩)/√2`.
pub fn prepare_superposition(sn: &Bitstring, sm: &Bitstring, p: u8) -> Result<StateVector> {
    check_width(sn.width(), sm.width())?;
    if sn == sm {
        return Err(Error::InvalidInput(format!(
            "superposition needs distinct bitstrings, got {sn} twice"
        )));
    }
    Ok(pair_state(sn, sm, p))
}

/// `(|σn⟩ + i^p |σm⟩)/√2` without the distinctness check; when the two labels
/// coincide the result is the unnormalized `(1 + i^p)/√2 |σ⟩`.
pub(crate) fn pair_state(sn: &Bitstring, sm: &Bitstring, p: u8) -> StateVector {
    let mut amps = vec![ZERO; 1 << sn.width()];
    amps[sn.index() as usize] += Complex64::new(FRAC_1_SQRT_2, 0.0);
    amps[sm.index() as usize] += i_pow(p) * FRAC_1_SQRT_2;
    StateVector { width: sn.width(), amps }
}

/// Entangler layout of the hardware-efficient ansatz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entangler {
    /// CNOT bricks `(0,1)(2,3)…` then `(1,2)(3,4)…` with an `(n-1, 0)`
    /// wrap-around when `n` is even.
    #[default]
    Brick,
    /// `CX(i, i+2)` for even `i`, then for odd `i`.
    Ladder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnsatzKind {
    HardwareEfficient {
        depth: usize,
        #[serde(default)]
        entangler: Entangler,
    },
    ExcitationPreserving { depth: usize },
}

/// One circuit instruction; `slot` indexes the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Rz { q: usize, slot: usize },
    Ry { q: usize, slot: usize },
    Cnot { control: usize, target: usize },
    /// Two-qubit hop gate on `(a, b)`.
    Hop { a: usize, b: usize, slot: usize },
    /// Four-qubit excitation-preserving gate on `q..q+4`.
    DoubleHop { q: usize, slot: usize },
}

impl Gate {
    fn slot(&self) -> Option<usize> {
        match *self {
            Gate::Rz { slot, .. } | Gate::Ry { slot, .. } | Gate::Hop { slot, .. } | Gate::DoubleHop { slot, .. } => {
                Some(slot)
            }
            Gate::Cnot { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircuitAnsatz {
    kind: AnsatzKind,
    width: usize,
    gates: Vec<Gate>,
    n_params: usize,
}

impl CircuitAnsatz {
    pub fn new(kind: AnsatzKind, width: usize) -> Result<Self> {
        if width == 0 || width > MAX_HALF_QUBITS {
            return Err(Error::InvalidInput(format!(
                "ansatz width must be in 1..={MAX_HALF_QUBITS}, got {width}"
            )));
        }
        let mut gates = Vec::new();
        let mut slot = 0;
        match kind {
            AnsatzKind::HardwareEfficient { depth, entangler } => {
                for _ in 0..depth {
                    rot_column(width, &mut slot, &mut gates);
                    cnot_layer(width, entangler, 0, &mut gates);
                    rot_column(width, &mut slot, &mut gates);
                    cnot_layer(width, entangler, 1, &mut gates);
                }
                rot_column(width, &mut slot, &mut gates);
            }
            AnsatzKind::ExcitationPreserving { depth } => {
                for _ in 0..depth {
                    for q in 0..width {
                        gates.push(Gate::Rz { q, slot });
                        slot += 1;
                    }
                    for start in [0, 1] {
                        for a in (start..width.saturating_sub(1)).step_by(2) {
                            gates.push(Gate::Hop { a, b: a + 1, slot });
                            slot += 1;
                        }
                    }
                    for q in 0..width.saturating_sub(3) {
                        gates.push(Gate::DoubleHop { q, slot });
                        slot += 1;
                    }
                }
            }
        }
        Ok(Self { kind, width, gates, n_params: slot })
    }

    pub fn kind(&self) -> AnsatzKind {
        self.kind
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::InvalidInput(format!(
                "ansatz expects {} parameters, got {}",
                self.n_params,
                params.len()
            )));
        }
        Ok(())
    }

    /// `U(Θ)|state⟩`.
    pub fn apply(&self, state: &StateVector, params: &[f64]) -> Result<StateVector> {
        check_width(self.width, state.width())?;
        self.check_params(params)?;
        let mut amps = state.amps.clone();
        for g in &self.gates {
            apply_gate(&mut amps, self.width, g, params, false);
        }
        Ok(StateVector { width: self.width, amps })
    }

    /// Value and gradient of `⟨s|U(Θ)† M U(Θ)|s⟩` by reverse-mode
    /// (adjoint) differentiation, for Hermitian `M`.
    pub fn expectation_gradient<F>(&self, input: &StateVector, params: &[f64], observable: F) -> Result<(f64, Vec<f64>)>
    where
        F: Fn(&StateVector) -> StateVector,
    {
        let psi = self.apply(input, params)?;
        let lam = observable(&psi);
        check_width(self.width, lam.width())?;
        let value = psi.inner(&lam).re;
        let mut grad = vec![0.0; self.n_params];
        let mut phi = psi.amps;
        let mut lam = lam.amps;
        let mut scratch = vec![ZERO; phi.len()];
        for g in self.gates.iter().rev() {
            apply_gate(&mut phi, self.width, g, params, true);
            if let Some(slot) = g.slot() {
                scratch.copy_from_slice(&phi);
                apply_gate_derivative(&mut scratch, self.width, g, params[slot]);
                let overlap: Complex64 = lam.iter().zip(&scratch).map(|(l, d)| l.conj() * d).sum();
                grad[slot] += 2.0 * overlap.re;
            }
            apply_gate(&mut lam, self.width, g, params, true);
        }
        Ok((value, grad))
    }
}

fn rot_column(width: usize, slot: &mut usize, gates: &mut Vec<Gate>) {
    // Rot(φ, θ, ω) = RZ(φ) RY(θ) RZ(ω); slots are laid out (φ, θ, ω).
    for q in 0..width {
        let base = *slot;
        gates.push(Gate::Rz { q, slot: base + 2 });
        gates.push(Gate::Ry { q, slot: base + 1 });
        gates.push(Gate::Rz { q, slot: base });
        *slot += 3;
    }
}

fn cnot_layer(width: usize, entangler: Entangler, parity: usize, gates: &mut Vec<Gate>) {
    match entangler {
        Entangler::Brick => {
            let mut c = parity;
            while c + 1 < width {
                gates.push(Gate::Cnot { control: c, target: c + 1 });
                c += 2;
            }
            if parity == 1 && width % 2 == 0 && width >= 2 {
                gates.push(Gate::Cnot { control: width - 1, target: 0 });
            }
        }
        Entangler::Ladder => {
            let mut c = parity;
            while c + 2 < width {
                gates.push(Gate::Cnot { control: c, target: c + 2 });
                c += 2;
            }
        }
    }
}

#[inline]
fn bit(width: usize, q: usize) -> usize {
    1 << (width - 1 - q)
}

#[inline]
fn apply_1q(amps: &mut [Complex64], mask: usize, m: [[Complex64; 2]; 2]) {
    for i0 in 0..amps.len() {
        if i0 & mask != 0 {
            continue;
        }
        let i1 = i0 | mask;
        let (a0, a1) = (amps[i0], amps[i1]);
        amps[i0] = m[0][0] * a0 + m[0][1] * a1;
        amps[i1] = m[1][0] * a0 + m[1][1] * a1;
    }
}

fn rz_matrix(phi: f64) -> [[Complex64; 2]; 2] {
    let e = Complex64::from_polar(1.0, -phi / 2.0);
    [[e, ZERO], [ZERO, e.conj()]]
}

fn ry_matrix(theta: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

/// Applies `g` (or its inverse) in place.
fn apply_gate(amps: &mut [Complex64], width: usize, g: &Gate, params: &[f64], inverse: bool) {
    let sign = if inverse { -1.0 } else { 1.0 };
    match *g {
        Gate::Rz { q, slot } => apply_1q(amps, bit(width, q), rz_matrix(sign * params[slot])),
        Gate::Ry { q, slot } => apply_1q(amps, bit(width, q), ry_matrix(sign * params[slot])),
        Gate::Cnot { control, target } => {
            let (cm, tm) = (bit(width, control), bit(width, target));
            for i in 0..amps.len() {
                if i & cm != 0 && i & tm == 0 {
                    amps.swap(i, i | tm);
                }
            }
        }
        Gate::Hop { a, b, slot } => {
            // Self-inverse: [[c, s], [s, -c]] on span{|01⟩, |10⟩}.
            let (s, c) = params[slot].sin_cos();
            let (am, bm) = (bit(width, a), bit(width, b));
            for i in 0..amps.len() {
                if i & am == 0 && i & bm != 0 {
                    let j = (i | am) & !bm;
                    let (x01, x10) = (amps[i], amps[j]);
                    amps[i] = x01 * c + x10 * s;
                    amps[j] = x01 * s - x10 * c;
                }
            }
        }
        Gate::DoubleHop { q, slot } => {
            let (s, c) = (sign * params[slot] / 2.0).sin_cos();
            let lo = bit(width, q + 2) | bit(width, q + 3);
            let hi = bit(width, q) | bit(width, q + 1);
            let all = lo | hi;
            for i in 0..amps.len() {
                if i & all == lo {
                    let j = (i & !all) | hi;
                    let (x0011, x1100) = (amps[i], amps[j]);
                    amps[i] = x0011 * c - x1100 * s;
                    amps[j] = x0011 * s + x1100 * c;
                }
            }
        }
    }
}

/// Replaces `amps` by `(dG/dθ) amps`.
fn apply_gate_derivative(amps: &mut [Complex64], width: usize, g: &Gate, theta: f64) {
    match *g {
        Gate::Rz { q, .. } => {
            let e = Complex64::from_polar(0.5, -theta / 2.0);
            let m = [[e * Complex64::new(0.0, -1.0), ZERO], [ZERO, e.conj() * Complex64::new(0.0, 1.0)]];
            apply_1q(amps, bit(width, q), m);
        }
        Gate::Ry { q, .. } => {
            let (s, c) = (theta / 2.0).sin_cos();
            let m = [
                [Complex64::new(-0.5 * s, 0.0), Complex64::new(-0.5 * c, 0.0)],
                [Complex64::new(0.5 * c, 0.0), Complex64::new(-0.5 * s, 0.0)],
            ];
            apply_1q(amps, bit(width, q), m);
        }
        Gate::Cnot { .. } => unreachable!("CNOT has no parameter"),
        Gate::Hop { a, b, .. } => {
            let (s, c) = theta.sin_cos();
            let (am, bm) = (bit(width, a), bit(width, b));
            for i in 0..amps.len() {
                let in_span = (i & am == 0) != (i & bm == 0);
                if !in_span {
                    amps[i] = ZERO;
                } else if i & am == 0 {
                    let j = (i | am) & !bm;
                    let (x01, x10) = (amps[i], amps[j]);
                    amps[i] = -x01 * s + x10 * c;
                    amps[j] = x01 * c + x10 * s;
                }
            }
        }
        Gate::DoubleHop { q, .. } => {
            let (s, c) = (theta / 2.0).sin_cos();
            let lo = bit(width, q + 2) | bit(width, q + 3);
            let hi = bit(width, q) | bit(width, q + 1);
            let all = lo | hi;
            for i in 0..amps.len() {
                let sub = i & all;
                if sub == lo {
                    let j = (i & !all) | hi;
                    let (x0011, x1100) = (amps[i], amps[j]);
                    amps[i] = (x0011 * -s - x1100 * c) * 0.5;
                    amps[j] = (x0011 * c - x1100 * s) * 0.5;
                } else if sub != hi {
                    amps[i] = ZERO;
                }
            }
        }
    }
}

/// `U(Θ)|state⟩`.
pub fn apply_ansatz(state: &StateVector, ansatz: &CircuitAnsatz, params: &[f64]) -> Result<StateVector> {
    ansatz.apply(state, params)
}

/// `⟨state|P|state⟩`, checked to be real.
pub fn expval_pauli(state: &StateVector, p: &PauliString) -> Result<f64> {
    check_width(state.width(), p.width())?;
    let v = state.pauli_expectation_complex(p);
    if v.im.abs() > IMAG_TOLERANCE {
        return Err(Error::Consistency(format!(
            "expectation of {p} has imaginary part {}",
            v.im
        )));
    }
    Ok(v.re)
}

/// `Σ_j w_j P_j |state⟩` for phase-free Pauli strings and real weights.
pub fn apply_pauli_sum<'a>(
    state: &StateVector,
    terms: impl IntoIterator<Item = (f64, &'a PauliString)>,
) -> Result<StateVector> {
    let mut out = vec![ZERO; state.amps.len()];
    for (w, p) in terms {
        check_width(state.width, p.width())?;
        if w == 0.0 {
            continue;
        }
        for (idx, a) in state.amps.iter().enumerate() {
            let (k, img) = p.apply_index(idx as u32);
            out[img as usize] += i_pow(k) * a * w;
        }
    }
    Ok(StateVector { width: state.width, amps: out })
}

/// Finite-difference step used by [`grad_params`].
pub const FD_STEP: f64 = 1e-3;

/// Central finite-difference gradient of `energy` at `params`.
pub fn grad_params<F>(energy: F, params: &[f64]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    central_difference(energy, params, FD_STEP)
}

pub fn central_difference<F>(f: F, params: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64,
{
    let mut x = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = f(&x);
            x[i] = orig - h;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bs(s: &str) -> Bitstring {
        s.parse().unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, width: usize) -> StateVector {
        let mut amps: Vec<Complex64> = (0..1 << width)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let n: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= n);
        StateVector::from_amplitudes(amps).unwrap()
    }

    fn random_params(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
    }

    #[test]
    fn basis_preparation_follows_bit_convention() {
        let s = prepare_basis(&bs("00")).unwrap();
        assert_eq!(s.amplitudes()[0], ONE);
        let s = prepare_basis(&bs("10")).unwrap();
        assert_eq!(s.amplitudes()[2], ONE);
        assert_abs_diff_eq!(s.norm_sqr(), 1.0);
    }

    #[test]
    fn superposition_amplitudes() {
        let r = FRAC_1_SQRT_2;
        let s = prepare_superposition(&bs("0"), &bs("1"), 0).unwrap();
        assert_eq!(s.amplitudes(), &[Complex64::new(r, 0.0), Complex64::new(r, 0.0)]);
        let s = prepare_superposition(&bs("0"), &bs("1"), 2).unwrap();
        assert_eq!(s.amplitudes(), &[Complex64::new(r, 0.0), Complex64::new(-r, 0.0)]);
        let s = prepare_superposition(&bs("0"), &bs("1"), 1).unwrap();
        assert_eq!(s.amplitudes(), &[Complex64::new(r, 0.0), Complex64::new(0.0, r)]);
        assert!(prepare_superposition(&bs("01"), &bs("01"), 0).is_err());
    }

    #[test]
    fn parameter_counts() {
        let hea = |d, w| {
            CircuitAnsatz::new(AnsatzKind::HardwareEfficient { depth: d, entangler: Entangler::Brick }, w)
                .unwrap()
                .n_params()
        };
        assert_eq!(hea(1, 4), 36);
        assert_eq!(hea(6, 6), 234);
        assert_eq!(hea(0, 3), 9);
        let ep = |d, w| CircuitAnsatz::new(AnsatzKind::ExcitationPreserving { depth: d }, w).unwrap().n_params();
        assert_eq!(ep(1, 6), 6 + 5 + 3);
        assert_eq!(ep(2, 4), 2 * (4 + 3 + 1));
        assert_eq!(ep(1, 2), 3);
    }

    #[test]
    fn brick_layout_matches_four_qubit_layer() {
        let a = CircuitAnsatz::new(AnsatzKind::HardwareEfficient { depth: 1, entangler: Entangler::Brick }, 4).unwrap();
        let cnots: Vec<(usize, usize)> = a
            .gates()
            .iter()
            .filter_map(|g| match *g {
                Gate::Cnot { control, target } => Some((control, target)),
                _ => None,
            })
            .collect();
        assert_eq!(cnots, vec![(0, 1), (2, 3), (1, 2), (3, 0)]);
    }

    #[test]
    fn hea_at_zero_fixes_all_zero_state() {
        let a = CircuitAnsatz::new(AnsatzKind::HardwareEfficient { depth: 3, entangler: Entangler::Brick }, 5).unwrap();
        let zero = StateVector::zero_state(5).unwrap();
        let out = a.apply(&zero, &vec![0.0; a.n_params()]).unwrap();
        assert_abs_diff_eq!(out.amplitudes()[0].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.norm_sqr(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn parameter_count_mismatch_is_rejected() {
        let a = CircuitAnsatz::new(AnsatzKind::ExcitationPreserving { depth: 1 }, 4).unwrap();
        let zero = StateVector::zero_state(4).unwrap();
        assert!(a.apply(&zero, &[0.0; 3]).is_err());
    }

    fn single_gate(g: Gate, width: usize, params: &[f64], input: &StateVector) -> StateVector {
        let mut amps = input.amplitudes().to_vec();
        apply_gate(&mut amps, width, &g, params, false);
        StateVector::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn hop_gate_on_01() {
        let theta = 0.37;
        let out = single_gate(Gate::Hop { a: 0, b: 1, slot: 0 }, 2, &[theta], &prepare_basis(&bs("01")).unwrap());
        let a = out.amplitudes();
        assert_abs_diff_eq!(a[1].re, theta.cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(a[2].re, theta.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(a[0].norm() + a[3].norm(), 0.0);
        let out = single_gate(Gate::Hop { a: 0, b: 1, slot: 0 }, 2, &[theta], &prepare_basis(&bs("10")).unwrap());
        assert_abs_diff_eq!(out.amplitudes()[1].re, theta.sin(), epsilon = 1e-15);
        assert_abs_diff_eq!(out.amplitudes()[2].re, -theta.cos(), epsilon = 1e-15);
    }

    #[test]
    fn hop_gate_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let theta = rng.random_range(-4.0..4.0);
            let v = random_state(&mut rng, 2);
            let g = Gate::Hop { a: 0, b: 1, slot: 0 };
            let twice = single_gate(g, 2, &[theta], &single_gate(g, 2, &[theta], &v));
            for (x, y) in twice.amplitudes().iter().zip(v.amplitudes()) {
                assert_abs_diff_eq!((x - y).norm(), 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn double_hop_gate_action() {
        let w = 0.81;
        let g = Gate::DoubleHop { q: 0, slot: 0 };
        let out = single_gate(g, 4, &[w], &prepare_basis(&bs("0011")).unwrap());
        assert_abs_diff_eq!(out.amplitudes()[0b0011].re, (w / 2.0).cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(out.amplitudes()[0b1100].re, (w / 2.0).sin(), epsilon = 1e-15);
        let out = single_gate(g, 4, &[w], &prepare_basis(&bs("1100")).unwrap());
        assert_abs_diff_eq!(out.amplitudes()[0b1100].re, (w / 2.0).cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(out.amplitudes()[0b0011].re, -(w / 2.0).sin(), epsilon = 1e-15);
        let other = prepare_basis(&bs("0101")).unwrap();
        assert_eq!(single_gate(g, 4, &[w], &other), other);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = random_state(&mut rng, 4);
        assert_eq!(single_gate(g, 4, &[0.0], &v), v);
        assert_abs_diff_eq!(single_gate(g, 4, &[w], &v).norm_sqr(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn ansatz_preserves_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for width in 1..=8 {
            for depth in 0..=4 {
                for kind in [
                    AnsatzKind::HardwareEfficient { depth, entangler: Entangler::Brick },
                    AnsatzKind::HardwareEfficient { depth, entangler: Entangler::Ladder },
                    AnsatzKind::ExcitationPreserving { depth },
                ] {
                    let a = CircuitAnsatz::new(kind, width).unwrap();
                    let v = random_state(&mut rng, width);
                    let out = a.apply(&v, &random_params(&mut rng, a.n_params())).unwrap();
                    assert_abs_diff_eq!(out.norm_sqr(), 1.0, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn excitation_preserving_ansatz_keeps_hamming_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for width in [4, 6, 7] {
            let a = CircuitAnsatz::new(AnsatzKind::ExcitationPreserving { depth: 3 }, width).unwrap();
            for _ in 0..10 {
                let sigma = Bitstring::from_index(rng.random_range(0..1 << width), width).unwrap();
                let out = a.apply(&prepare_basis(&sigma).unwrap(), &random_params(&mut rng, a.n_params())).unwrap();
                for (idx, amp) in out.amplitudes().iter().enumerate() {
                    if amp.norm() > 1e-12 {
                        assert_eq!((idx as u32).count_ones(), sigma.weight());
                    }
                }
            }
        }
    }

    #[test]
    fn expectation_examples() {
        let z: PauliString = "Z".parse().unwrap();
        let x: PauliString = "X".parse().unwrap();
        assert_eq!(expval_pauli(&prepare_basis(&bs("0")).unwrap(), &z).unwrap(), 1.0);
        let plus = prepare_superposition(&bs("0"), &bs("1"), 0).unwrap();
        assert_abs_diff_eq!(expval_pauli(&plus, &x).unwrap(), 1.0, epsilon = 1e-15);
        assert!(expval_pauli(&plus, &"XX".parse().unwrap()).is_err());
    }

    #[test]
    fn non_hermitian_expectation_is_flagged() {
        let s = prepare_basis(&bs("0")).unwrap();
        let iz: PauliString = "iZ".parse().unwrap();
        assert!(matches!(expval_pauli(&s, &iz), Err(Error::Consistency(_))));
    }

    #[test]
    fn single_rz_derivative_closed_form() {
        // ⟨+|RZ(φ)† X RZ(φ)|+⟩ = cos φ.
        let a = CircuitAnsatz::new(AnsatzKind::ExcitationPreserving { depth: 1 }, 1).unwrap();
        assert_eq!(a.n_params(), 1);
        let plus = prepare_superposition(&bs("0"), &bs("1"), 0).unwrap();
        let x: PauliString = "X".parse().unwrap();
        for phi in [-1.3, 0.0, 0.4, 2.2] {
            let (v, g) = a.expectation_gradient(&plus, &[phi], |s| s.apply_pauli(&x).unwrap()).unwrap();
            assert_abs_diff_eq!(v, phi.cos(), epsilon = 1e-14);
            assert_abs_diff_eq!(g[0], -phi.sin(), epsilon = 1e-14);
            let fd = grad_params(
                |p| expval_pauli(&a.apply(&plus, p).unwrap(), &x).unwrap(),
                &[phi],
            );
            assert_abs_diff_eq!(fd[0], -phi.sin(), epsilon = 1e-6);
        }
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        assert_eq!(grad_params(|_| 3.0, &[0.1, 0.2]), vec![0.0, 0.0]);
    }

    #[test]
    fn adjoint_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for kind in [
            AnsatzKind::HardwareEfficient { depth: 2, entangler: Entangler::Brick },
            AnsatzKind::ExcitationPreserving { depth: 2 },
        ] {
            let a = CircuitAnsatz::new(kind, 4).unwrap();
            let params = random_params(&mut rng, a.n_params());
            let input = random_state(&mut rng, 4);
            let obs: Vec<(f64, PauliString)> = ["ZZII", "XIXI", "IYYZ", "IIIX"]
                .iter()
                .map(|s| (rng.random_range(-1.0..1.0), s.parse().unwrap()))
                .collect();
            let apply_obs = |s: &StateVector| {
                let mut out = vec![ZERO; s.amplitudes().len()];
                for (w, p) in &obs {
                    for (o, v) in out.iter_mut().zip(s.apply_pauli(p).unwrap().amplitudes()) {
                        *o += v * w;
                    }
                }
                StateVector::from_amplitudes(out).unwrap()
            };
            let (_, g) = a.expectation_gradient(&input, &params, apply_obs).unwrap();
            let energy = |p: &[f64]| {
                let s = a.apply(&input, p).unwrap();
                obs.iter().map(|(w, q)| w * expval_pauli(&s, q).unwrap()).sum::<f64>()
            };
            let fd = central_difference(energy, &params, 1e-5);
            for (x, y) in g.iter().zip(&fd) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-8);
            }
        }
    }
}
