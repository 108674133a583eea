//! Schrödinger entanglement forging with neural bitstring selection.
//!
//! A bipartite ground-state problem on `N` qubits is approximated by a
//! truncated Schmidt form
//!
//! ```text
//! |ψ⟩ = (U ⊗ V) Σ_n λ_n |σ_n^A⟩ |σ_n^B⟩
//! ```
//!
//! where `U` and `V` are parameterized half-system circuits and the `k` basis
//! pairs `(σ^A, σ^B)` are chosen by an autoregressive network trained to model
//! `λ²`. Expectation values of bipartite Pauli observables are evaluated with
//! half-system statevector simulations only ([`forging`]).
//!
//! Module map:
//!
//! - [`pauli`]: bitstrings, Pauli strings, Hamiltonians, bipartition and the
//!   Jordan–Wigner mapping.
//! - [`models`]: benchmark Hamiltonians and the shell-model interaction file.
//! - [`simulator`]: half-system statevectors, gates, both ansatz families and
//!   adjoint gradients.
//! - [`forging`]: forged expectation values, the effective quadratic form in
//!   `λ`, entropy and correlators.
//! - [`arnn`]: the masked autoregressive density model and its losses.
//! - [`selection`]: the iterative bitstring-selection loop.
//! - [`optimizers`]: AdaBelief, Nesterov and projected gradient steps.
//! - [`oracle`]: exact diagonalization and exact Schmidt decompositions.
//! - [`pipeline`]: experiment configuration, the select → VQE driver and the
//!   result files.
//!
//! Bit convention used everywhere: qubit 0 is the leftmost label and the most
//! significant bit of a basis index. Bipartite pairs are stacked A-then-B.

pub mod arnn;
pub mod error;
pub mod forging;
pub mod models;
pub mod optimizers;
pub mod oracle;
pub mod pauli;
pub mod pipeline;
pub mod rng;
pub mod selection;
pub mod simulator;

pub use error::{Error, Result};
pub use pauli::{BipartiteTerm, BipartitionSpec, Bitstring, PauliHamiltonian, PauliString};
