//! Independent reference routines shared by the integration tests.
//!
//! Nothing here calls the forging or oracle code paths under test: Pauli
//! action is re-derived from letters, eigenvalues come from a cyclic Jacobi
//! sweep.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use schmidt_forge::optimizers::normalize;
use schmidt_forge::pauli::{Bitstring, Pauli, PauliHamiltonian, PauliString};
use schmidt_forge::selection::Pair;
use schmidt_forge::simulator::{prepare_basis, AnsatzKind, CircuitAnsatz, Entangler};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// `P|x⟩ = phase · |x'⟩` from the letters of `p` (qubit 0 = MSB).
pub fn pauli_on_basis(p: &PauliString, x: usize) -> (Complex64, usize) {
    let n = p.width();
    let mut phase = p.phase();
    let mut y = x;
    for q in 0..n {
        let b = 1usize << (n - 1 - q);
        let one = x & b != 0;
        match p.letter(q) {
            Pauli::I => {}
            Pauli::X => y ^= b,
            Pauli::Y => {
                y ^= b;
                phase *= if one { Complex64::new(0.0, -1.0) } else { Complex64::new(0.0, 1.0) };
            }
            Pauli::Z => {
                if one {
                    phase = -phase;
                }
            }
        }
    }
    (phase, y)
}

/// `H|ψ⟩` on the full space.
pub fn apply_dense(h: &PauliHamiltonian, psi: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![ZERO; psi.len()];
    for (c, p) in h.terms() {
        for (x, a) in psi.iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            let (ph, y) = pauli_on_basis(p, x);
            out[y] += ph * a * *c;
        }
    }
    out
}

/// `⟨ψ|H|ψ⟩ / ⟨ψ|ψ⟩`.
pub fn dense_expectation(h: &PauliHamiltonian, psi: &[Complex64]) -> f64 {
    let hp = apply_dense(h, psi);
    let num: Complex64 = psi.iter().zip(&hp).map(|(a, b)| a.conj() * b).sum();
    let den: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
    num.re / den
}

/// A random real-coefficient Hamiltonian of `terms` Pauli strings.
pub fn random_hamiltonian(rng: &mut ChaCha8Rng, n: usize, terms: usize) -> PauliHamiltonian {
    let letters = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let list = (0..terms).map(|_| {
        let l: Vec<(usize, Pauli)> = (0..n).map(|q| (q, letters[rng.random_range(0..4)])).collect();
        (rng.random_range(-1.0..1.0), PauliString::from_letters(n, &l).unwrap())
    });
    PauliHamiltonian::from_terms(n, list).unwrap()
}

/// Like [`random_hamiltonian`], restricted to strings with an even number of
/// `Y` letters so the matrix is real.
pub fn random_real_hamiltonian(rng: &mut ChaCha8Rng, n: usize, terms: usize) -> PauliHamiltonian {
    let letters = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let list = (0..terms).map(|_| loop {
        let l: Vec<Pauli> = (0..n).map(|_| letters[rng.random_range(0..4)]).collect();
        if l.iter().filter(|p| **p == Pauli::Y).count() % 2 == 0 {
            let l: Vec<(usize, Pauli)> = l.into_iter().enumerate().collect();
            break (rng.random_range(-1.0..1.0), PauliString::from_letters(n, &l).unwrap());
        }
    });
    PauliHamiltonian::from_terms(n, list).unwrap()
}

/// Eigenvalues of a real symmetric matrix (row-major) by cyclic Jacobi
/// rotations, ascending.
pub fn jacobi_eigenvalues(a: &[f64], n: usize) -> Vec<f64> {
    let mut m = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j].powi(2))
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn random_unit(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    normalize(&mut v).unwrap();
    v
}

pub fn random_params(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).collect()
}

/// `k` distinct random pairs of `half`-bit labels.
pub fn random_pair_set(rng: &mut ChaCha8Rng, half: usize, k: usize) -> Vec<Pair> {
    let mut all: Vec<Pair> = (0..1u32 << half)
        .flat_map(|a| (0..1u32 << half).map(move |b| (a, b)))
        .map(|(a, b)| (Bitstring::from_index(a, half).unwrap(), Bitstring::from_index(b, half).unwrap()))
        .collect();
    all.shuffle(rng);
    all.truncate(k);
    all
}

pub fn random_ansatz(rng: &mut ChaCha8Rng, width: usize, excitation_preserving: bool) -> CircuitAnsatz {
    let depth = rng.random_range(1..=3);
    let kind = if excitation_preserving {
        AnsatzKind::ExcitationPreserving { depth }
    } else {
        let entangler = if rng.random_bool(0.5) { Entangler::Brick } else { Entangler::Ladder };
        AnsatzKind::HardwareEfficient { depth, entangler }
    };
    CircuitAnsatz::new(kind, width).unwrap()
}

/// `Σ_n λ_n U|a_n⟩ ⊗ V|b_n⟩` with A as the most significant half.
pub fn dense_forged_state(
    u: &CircuitAnsatz,
    theta_u: &[f64],
    v: &CircuitAnsatz,
    theta_v: &[f64],
    pairs: &[Pair],
    lambda: &[f64],
) -> Vec<Complex64> {
    let wb = v.width();
    let mut psi = vec![ZERO; 1 << (u.width() + wb)];
    for ((a, b), l) in pairs.iter().zip(lambda) {
        let ua = u.apply(&prepare_basis(a).unwrap(), theta_u).unwrap();
        let vb = v.apply(&prepare_basis(b).unwrap(), theta_v).unwrap();
        for (ia, x) in ua.amplitudes().iter().enumerate() {
            for (ib, y) in vb.amplitudes().iter().enumerate() {
                psi[(ia << wb) | ib] += x * y * *l;
            }
        }
    }
    psi
}

/// Path of a file in `tests/data`.
pub fn data_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}
