//! The exact oracle against a dense matrix diagonalized by cyclic Jacobi.

mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use schmidt_forge::models::{load_shell_model, build_shell_hamiltonian, build_tfim_1d, FieldSpec};
use schmidt_forge::oracle::{exact_schmidt, ground_state, sector_basis, truncated_weight, Method};
use schmidt_forge::pauli::{BipartitionSpec, PauliHamiltonian};

use common::{data_path, pauli_on_basis, random_real_hamiltonian};

/// Real dense matrix of `h` restricted to `basis` (row-major).
fn dense_matrix(h: &PauliHamiltonian, basis: &[usize]) -> Vec<f64> {
    let d = basis.len();
    let pos: std::collections::HashMap<usize, usize> = basis.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let mut m = vec![0.0; d * d];
    for (c, &x) in basis.iter().enumerate() {
        for (coeff, p) in h.terms() {
            let (ph, y) = pauli_on_basis(p, x);
            if let Some(&r) = pos.get(&y) {
                m[r * d + c] += (ph * *coeff).re;
            }
        }
    }
    m
}

#[test]
fn both_methods_match_jacobi_on_random_real_hamiltonians() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let h = random_real_hamiltonian(&mut rng, 6, 12);
        assert!(h.is_real());
        let all: Vec<usize> = (0..64).collect();
        let reference = common::jacobi_eigenvalues(&dense_matrix(&h, &all), 64)[0];
        for method in [Method::Dense, Method::Lanczos] {
            let gs = ground_state(&h, None, method).unwrap();
            assert!((gs.energy - reference).abs() < 1e-8, "{method:?}: {} vs {reference}", gs.energy);
            assert!(gs.residual(&h) < 1e-6);
        }
    }
}

#[test]
fn sector_ground_state_matches_jacobi_on_the_sector_block() {
    let data = load_shell_model(data_path("shell8.int")).unwrap();
    let (h, spec) = build_shell_hamiltonian(&data).unwrap();
    let sector = sector_basis(&spec, 2, 2).unwrap();
    assert_eq!(sector.len(), 36);
    let basis: Vec<usize> = sector.iter().map(|&x| x as usize).collect();
    let reference = common::jacobi_eigenvalues(&dense_matrix(&h, &basis), basis.len())[0];
    let gs = ground_state(&h, Some(&sector), Method::Auto).unwrap();
    assert!((gs.energy - reference).abs() < 1e-9, "{} vs {reference}", gs.energy);
    let outside: f64 = gs
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(i, _)| !sector.contains(&(*i as u32)))
        .map(|(_, a)| a.norm())
        .sum();
    assert_eq!(outside, 0.0);
}

#[test]
fn schmidt_values_are_normalized_and_weights_monotone() {
    let h = build_tfim_1d(10, 1.0, &FieldSpec::Uniform { h: 0.7 }).unwrap();
    let gs = ground_state(&h, None, Method::Lanczos).unwrap();
    let s = exact_schmidt(&gs, &BipartitionSpec::half_split(10).unwrap()).unwrap();
    let total: f64 = s.values.iter().map(|x| x * x).sum();
    assert!((total - 1.0).abs() < 1e-10);
    assert!(s.values.windows(2).all(|w| w[0] >= w[1]));
    let w: Vec<f64> = (1..=8).map(|k| truncated_weight(&s.values, k)).collect();
    assert!(w.windows(2).all(|p| p[0] <= p[1] + 1e-15));
}
