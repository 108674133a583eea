//! Benchmark Hamiltonians and shell-model interaction ingestion.
//!
//! Lattice builders return qubit Hamiltonians on sites numbered row-major
//! (`site = row * cols + col`), together with the bipartition used for
//! forging.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{jordan_wigner, BipartitionSpec, FermionTerm, Ladder, Pauli, PauliHamiltonian, PauliString};
use crate::rng::SplitMix64;

/// External transverse field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Uniform { h: f64 },
    /// One SplitMix64 draw per site, in site order.
    RandomUniform { lo: f64, hi: f64, seed: u64 },
}

impl FieldSpec {
    pub fn values(&self, sites: usize) -> Result<Vec<f64>> {
        match *self {
            FieldSpec::Uniform { h } => Ok(vec![h; sites]),
            FieldSpec::RandomUniform { lo, hi, seed } => {
                if !(lo <= hi) {
                    return Err(Error::InvalidInput(format!("random field bounds lo={lo} > hi={hi}")));
                }
                let mut g = SplitMix64::new(seed);
                Ok((0..sites).map(|_| g.uniform(lo, hi)).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Boundary {
    /// Open.
    Obc,
    /// Columns wrap.
    Cbc,
    /// Rows and columns wrap.
    Tbc,
    /// Periodic ring.
    Pbc,
}

/// Subsystem cut of a 2d lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cut {
    /// The `N/2` sites with smallest `row + col` (ties by row) form A.
    #[default]
    Diagonal,
    /// The `N/2` sites with smallest `col - row` (ties by row) form A.
    AntiDiagonal,
    /// Sites `0..N/2` form A.
    HalfSplit,
}

fn require_even(n: usize) -> Result<()> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "an equal bipartition needs an even site count >= 2, got {n}"
        )));
    }
    Ok(())
}

fn two_site(n: usize, i: usize, j: usize, p: Pauli) -> Result<PauliString> {
    PauliString::from_letters(n, &[(i, p), (j, p)])
}

fn one_site(n: usize, i: usize, p: Pauli) -> Result<PauliString> {
    PauliString::from_letters(n, &[(i, p)])
}

/// `J Σ Z_i Z_{i+1} + Σ h_i X_i` on a periodic ring.
pub fn build_tfim_1d(n: usize, j: f64, field: &FieldSpec) -> Result<PauliHamiltonian> {
    require_even(n)?;
    let h = field.values(n)?;
    let mut terms = Vec::with_capacity(2 * n);
    for i in 0..n {
        terms.push((j, two_site(n, i, (i + 1) % n, Pauli::Z)?));
        terms.push((h[i], one_site(n, i, Pauli::X)?));
    }
    PauliHamiltonian::from_terms(n, terms)
}

fn heisenberg_bonds(n: usize, bonds: &[(usize, usize, f64)]) -> Result<PauliHamiltonian> {
    let mut terms = Vec::with_capacity(3 * bonds.len());
    for &(a, b, c) in bonds {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            terms.push((c, two_site(n, a, b, p)?));
        }
    }
    PauliHamiltonian::from_terms(n, terms)
}

/// `J Σ (XX + YY + ZZ)` on nearest neighbours of a periodic ring.
pub fn build_heisenberg_1d(n: usize, j: f64) -> Result<PauliHamiltonian> {
    require_even(n)?;
    let bonds: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, j)).collect();
    heisenberg_bonds(n, &bonds)
}

/// Nearest (`J1`) plus next-nearest (`J2`) Heisenberg couplings on a ring.
pub fn build_j1j2_1d(n: usize, j1: f64, j2: f64) -> Result<PauliHamiltonian> {
    require_even(n)?;
    let mut bonds: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, j1)).collect();
    bonds.extend((0..n).map(|i| (i, (i + 2) % n, j2)));
    heisenberg_bonds(n, &bonds)
}

/// Edge list of a triangular lattice on a `rows × cols` parallelogram.
///
/// Every site couples right, down and down-right. CBC wraps columns, TBC
/// wraps rows and columns. Self-loops and repeated edges are dropped.
pub fn triangular_edges(rows: usize, cols: usize, boundary: Boundary) -> Result<Vec<(usize, usize)>> {
    let (wrap_c, wrap_r) = match boundary {
        Boundary::Obc => (false, false),
        Boundary::Cbc => (true, false),
        Boundary::Tbc => (true, true),
        Boundary::Pbc => {
            return Err(Error::InvalidInput(
                "triangular lattices support OBC, CBC or TBC".into(),
            ))
        }
    };
    let mut edges = BTreeSet::new();
    for r in 0..rows {
        for c in 0..cols {
            for (dr, dc) in [(0, 1), (1, 0), (1, 1)] {
                let (mut rr, mut cc) = (r + dr, c + dc);
                if wrap_c {
                    cc %= cols;
                }
                if wrap_r {
                    rr %= rows;
                }
                if rr >= rows || cc >= cols {
                    continue;
                }
                let (s, t) = (r * cols + c, rr * cols + cc);
                if s != t {
                    edges.insert((s.min(t), s.max(t)));
                }
            }
        }
    }
    Ok(edges.into_iter().collect())
}

/// Bipartition of a `rows × cols` grid for the requested cut.
pub fn grid_cut(rows: usize, cols: usize, cut: Cut) -> Result<BipartitionSpec> {
    let n = rows * cols;
    require_even(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    match cut {
        Cut::HalfSplit => {}
        Cut::Diagonal => order.sort_by_key(|&s| (s / cols + s % cols, s / cols)),
        Cut::AntiDiagonal => order.sort_by_key(|&s| ((s % cols) as isize - (s / cols) as isize, s / cols)),
    }
    let mut a: Vec<usize> = order[..n / 2].to_vec();
    let mut b: Vec<usize> = order[n / 2..].to_vec();
    a.sort_unstable();
    b.sort_unstable();
    BipartitionSpec::new(a, b)
}

/// `Σ_⟨ij⟩ Z_i Z_j + Σ h_i X_i` on a triangular lattice.
pub fn build_tfim_2d_triangular(
    rows: usize,
    cols: usize,
    boundary: Boundary,
    field: &FieldSpec,
    cut: Cut,
) -> Result<(PauliHamiltonian, BipartitionSpec)> {
    let n = rows * cols;
    require_even(n)?;
    let edges = triangular_edges(rows, cols, boundary)?;
    let h = field.values(n)?;
    let mut terms = Vec::with_capacity(edges.len() + n);
    for (a, b) in edges {
        terms.push((1.0, two_site(n, a, b, Pauli::Z)?));
    }
    for (i, hi) in h.into_iter().enumerate() {
        terms.push((hi, one_site(n, i, Pauli::X)?));
    }
    Ok((PauliHamiltonian::from_terms(n, terms)?, grid_cut(rows, cols, cut)?))
}

/// Nearest-neighbour edges of a periodic square grid.
pub fn periodic_grid_edges(rows: usize, cols: usize) -> Vec<(usize, usize)> {
    let mut edges = BTreeSet::new();
    for r in 0..rows {
        for c in 0..cols {
            let s = r * cols + c;
            for t in [r * cols + (c + 1) % cols, ((r + 1) % rows) * cols + c] {
                if s != t {
                    edges.insert((s.min(t), s.max(t)));
                }
            }
        }
    }
    edges.into_iter().collect()
}

/// Spinless t-V model `-t Σ (a†_i a_j + h.c.) + V Σ n_i n_j` on a periodic
/// grid, Jordan–Wigner encoded in site order.
pub fn build_tv_model(rows: usize, cols: usize, t: f64, v: f64) -> Result<PauliHamiltonian> {
    let n = rows * cols;
    if n == 0 || n > crate::pauli::MAX_QUBITS {
        return Err(Error::InvalidInput(format!("grid of {n} sites is out of range")));
    }
    let mut terms = Vec::new();
    for (i, j) in periodic_grid_edges(rows, cols) {
        terms.push(FermionTerm::one_body(-t, i, j));
        terms.push(FermionTerm::one_body(-t, j, i));
        terms.push(FermionTerm::new(
            v,
            vec![Ladder::Create(i), Ladder::Annihilate(i), Ladder::Create(j), Ladder::Annihilate(j)],
        ));
    }
    jordan_wigner(&terms, n)
}

/// Second-quantized shell-model interaction.
///
/// Orbitals `0..n/2` are protons and `n/2..n` neutrons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellModelData {
    pub orbital_count: usize,
    pub core_label: String,
    pub single_particle: Vec<f64>,
    /// Entries `(i, j, k, l, V_ijkl)`.
    pub two_body: Vec<(usize, usize, usize, usize, f64)>,
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid {what} {tok:?}"),
    })
}

impl ShellModelData {
    /// Parses the line-based interaction format:
    ///
    /// ```text
    /// # comment
    /// orbitals <n> core <label>
    /// sp <i> <eps_i>
    /// tb <i> <j> <k> <l> <V_ijkl>
    /// ```
    ///
    /// The header must precede every `sp`/`tb` line. Unlisted single-particle
    /// energies are zero. Two-body entries are summed as given, no implicit
    /// symmetrization.
    pub fn parse(text: &str) -> Result<Self> {
        let mut data: Option<ShellModelData> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let mut toks = content.split_whitespace();
            let kind = toks.next().unwrap_or_default();
            match kind {
                "orbitals" => {
                    if data.is_some() {
                        return Err(Error::Parse { line, msg: "duplicate header".into() });
                    }
                    let n: usize = parse_num(toks.next(), line, "orbital count")?;
                    if n < 2 || n % 2 != 0 || n > crate::pauli::MAX_QUBITS {
                        return Err(Error::Parse {
                            line,
                            msg: format!("orbital count must be even and in 2..=32, got {n}"),
                        });
                    }
                    let core_label = match (toks.next(), toks.next()) {
                        (Some("core"), Some(label)) => label.to_string(),
                        _ => {
                            return Err(Error::Parse {
                                line,
                                msg: "expected `orbitals <n> core <label>`".into(),
                            })
                        }
                    };
                    data = Some(ShellModelData {
                        orbital_count: n,
                        core_label,
                        single_particle: vec![0.0; n],
                        two_body: Vec::new(),
                    });
                }
                "sp" | "tb" => {
                    let d = data.as_mut().ok_or_else(|| Error::Parse {
                        line,
                        msg: "interaction line before `orbitals` header".into(),
                    })?;
                    let n = d.orbital_count;
                    let nidx = if kind == "sp" { 1 } else { 4 };
                    let mut idx = [0usize; 4];
                    for slot in idx.iter_mut().take(nidx) {
                        *slot = parse_num(toks.next(), line, "orbital index")?;
                        if *slot >= n {
                            return Err(Error::Parse {
                                line,
                                msg: format!("orbital index {} out of range for {n} orbitals", *slot),
                            });
                        }
                    }
                    let value: f64 = parse_num(toks.next(), line, "matrix element")?;
                    if !value.is_finite() {
                        return Err(Error::Parse { line, msg: "non-finite matrix element".into() });
                    }
                    if kind == "sp" {
                        d.single_particle[idx[0]] = value;
                    } else {
                        d.two_body.push((idx[0], idx[1], idx[2], idx[3], value));
                    }
                }
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown record {other:?}"),
                    })
                }
            }
            if let Some(extra) = toks.next() {
                return Err(Error::Parse {
                    line,
                    msg: format!("unexpected trailing token {extra:?}"),
                });
            }
        }
        data.ok_or_else(|| Error::Parse { line: 0, msg: "missing `orbitals` header".into() })
    }

    /// Serializes back to the interaction format.
    pub fn to_text(&self) -> String {
        let mut out = format!("orbitals {} core {}\n", self.orbital_count, self.core_label);
        for (i, e) in self.single_particle.iter().enumerate() {
            out.push_str(&format!("sp {i} {e:?}\n"));
        }
        for &(i, j, k, l, v) in &self.two_body {
            out.push_str(&format!("tb {i} {j} {k} {l} {v:?}\n"));
        }
        out
    }

    /// Fermionic operator list `Σ ε_i a†_i a_i + ½ Σ V_ijkl a†_i a†_j a_l a_k`.
    pub fn fermion_terms(&self) -> Vec<FermionTerm> {
        let mut terms: Vec<FermionTerm> = self
            .single_particle
            .iter()
            .enumerate()
            .filter(|(_, e)| **e != 0.0)
            .map(|(i, &e)| FermionTerm::one_body(e, i, i))
            .collect();
        terms.extend(
            self.two_body
                .iter()
                .map(|&(i, j, k, l, v)| FermionTerm::two_body(0.5 * v, i, j, l, k)),
        );
        terms
    }
}

pub fn load_shell_model(path: impl AsRef<Path>) -> Result<ShellModelData> {
    ShellModelData::parse(&fs::read_to_string(path)?)
}

/// Qubit Hamiltonian of a shell-model interaction with the proton/neutron cut.
pub fn build_shell_hamiltonian(data: &ShellModelData) -> Result<(PauliHamiltonian, BipartitionSpec)> {
    let n = data.orbital_count;
    let h = jordan_wigner(&data.fermion_terms(), n)?;
    Ok((h, BipartitionSpec::half_split(n)?))
}

/// A declarative description of any supported benchmark model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    #[serde(rename = "tfim_1d")]
    Tfim1d {
        n: usize,
        #[serde(default = "one")]
        j: f64,
        #[serde(default = "unit_field")]
        field: FieldSpec,
    },
    #[serde(rename = "heisenberg_1d")]
    Heisenberg1d {
        n: usize,
        #[serde(default = "one")]
        j: f64,
    },
    #[serde(rename = "j1j2_1d")]
    J1j21d {
        n: usize,
        #[serde(default = "one")]
        j1: f64,
        #[serde(default = "default_j2")]
        j2: f64,
    },
    TfimTriangular {
        rows: usize,
        cols: usize,
        boundary: Boundary,
        #[serde(default = "unit_field")]
        field: FieldSpec,
        #[serde(default)]
        cut: Cut,
    },
    TvModel {
        rows: usize,
        cols: usize,
        #[serde(default = "one")]
        t: f64,
        #[serde(default = "one")]
        v: f64,
    },
    ShellModel {
        path: String,
        protons: Option<u32>,
        neutrons: Option<u32>,
    },
}

fn one() -> f64 {
    1.0
}

fn default_j2() -> f64 {
    0.2
}

fn unit_field() -> FieldSpec {
    FieldSpec::Uniform { h: 1.0 }
}

/// Particle-number quotas on the A and B halves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfSector {
    pub ones_a: u32,
    pub ones_b: u32,
}

/// A built model ready for the oracle, selection and forging stages.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub hamiltonian: PauliHamiltonian,
    pub bipartition: BipartitionSpec,
    pub sector: Option<HalfSector>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<BuiltModel> {
        let half = |h: PauliHamiltonian| -> Result<BuiltModel> {
            let bipartition = BipartitionSpec::half_split(h.width())?;
            Ok(BuiltModel { hamiltonian: h, bipartition, sector: None })
        };
        match self {
            ModelSpec::Tfim1d { n, j, field } => half(build_tfim_1d(*n, *j, field)?),
            ModelSpec::Heisenberg1d { n, j } => half(build_heisenberg_1d(*n, *j)?),
            ModelSpec::J1j21d { n, j1, j2 } => half(build_j1j2_1d(*n, *j1, *j2)?),
            ModelSpec::TfimTriangular { rows, cols, boundary, field, cut } => {
                let (hamiltonian, bipartition) = build_tfim_2d_triangular(*rows, *cols, *boundary, field, *cut)?;
                Ok(BuiltModel { hamiltonian, bipartition, sector: None })
            }
            ModelSpec::TvModel { rows, cols, t, v } => {
                let h = build_tv_model(*rows, *cols, *t, *v)?;
                require_even(h.width())?;
                half(h)
            }
            ModelSpec::ShellModel { path, protons, neutrons } => {
                let data = load_shell_model(path)?;
                let (hamiltonian, bipartition) = build_shell_hamiltonian(&data)?;
                let sector = match (protons, neutrons) {
                    (Some(p), Some(n)) => {
                        let half = (data.orbital_count / 2) as u32;
                        if *p > half || *n > half {
                            return Err(Error::Config(format!(
                                "sector ({p}, {n}) exceeds {half} orbitals per species"
                            )));
                        }
                        Some(HalfSector { ones_a: *p, ones_b: *n })
                    }
                    (None, None) => None,
                    _ => return Err(Error::Config("set both `protons` and `neutrons` or neither".into())),
                };
                Ok(BuiltModel { hamiltonian, bipartition, sector })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tfim_1d_term_counts() {
        let h = build_tfim_1d(6, 1.0, &FieldSpec::Uniform { h: 0.5 }).unwrap();
        assert_eq!(h.len(), 12);
        assert!(build_tfim_1d(5, 1.0, &FieldSpec::Uniform { h: 1.0 }).is_err());
    }

    #[test]
    fn two_site_ring_merges_double_bond() {
        let h = build_tfim_1d(2, 0.0, &FieldSpec::Uniform { h: 1.0 }).unwrap();
        let strings: Vec<String> = h.terms().iter().map(|(_, p)| p.to_string()).collect();
        assert_eq!(strings, vec!["IX", "XI"]);
        let h = build_heisenberg_1d(2, 1.0).unwrap();
        assert!(h.terms().iter().all(|(c, _)| *c == 2.0));
    }

    #[test]
    fn random_field_is_reproducible_and_bounded() {
        let f = FieldSpec::RandomUniform { lo: -1.0, hi: 1.0, seed: 42 };
        let a = f.values(12).unwrap();
        assert_eq!(a, f.values(12).unwrap());
        assert!(a.iter().all(|h| (-1.0..1.0).contains(h)));
        assert!(FieldSpec::RandomUniform { lo: 1.0, hi: -1.0, seed: 0 }.values(2).is_err());
    }

    #[test]
    fn triangular_edge_counts() {
        assert_eq!(triangular_edges(4, 3, Boundary::Obc).unwrap().len(), 23);
        assert_eq!(triangular_edges(4, 3, Boundary::Cbc).unwrap().len(), 30);
        assert_eq!(triangular_edges(4, 3, Boundary::Tbc).unwrap().len(), 36);
        assert!(triangular_edges(4, 3, Boundary::Pbc).is_err());
    }

    #[test]
    fn triangular_rejects_odd_lattices() {
        let f = FieldSpec::Uniform { h: 1.0 };
        assert!(build_tfim_2d_triangular(3, 1, Boundary::Obc, &f, Cut::Diagonal).is_err());
    }

    #[test]
    fn diagonal_cut_of_four_by_three() {
        let spec = grid_cut(4, 3, Cut::Diagonal).unwrap();
        assert_eq!(spec.qubits_a, vec![0, 1, 2, 3, 4, 6]);
        let spec = grid_cut(4, 3, Cut::AntiDiagonal).unwrap();
        assert_eq!(spec.qubits_a, vec![3, 6, 7, 9, 10, 11]);
    }

    #[test]
    fn periodic_grid_dedups_short_dimensions() {
        assert_eq!(periodic_grid_edges(2, 1), vec![(0, 1)]);
        assert_eq!(periodic_grid_edges(4, 3).len(), 24);
    }

    #[test]
    fn parse_interaction_file() {
        let text = "# demo\n orbitals 4  core 4He\nsp 0 -1.5\nsp 2 -1.0 # trailing\n\ntb 0 2 0 2 0.25\n";
        let d = ShellModelData::parse(text).unwrap();
        assert_eq!(d.orbital_count, 4);
        assert_eq!(d.core_label, "4He");
        assert_eq!(d.single_particle, vec![-1.5, 0.0, -1.0, 0.0]);
        assert_eq!(d.two_body, vec![(0, 2, 0, 2, 0.25)]);
        assert_eq!(ShellModelData::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = ShellModelData::parse("orbitals 4 core x\nsp 9 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = ShellModelData::parse("sp 0 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        let err = ShellModelData::parse("orbitals 4 core x\ntb 0 1 0 nope 1.0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = ShellModelData::parse("orbitals 3 core x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(ShellModelData::parse("# nothing\n").is_err());
    }

    #[test]
    fn non_hermitian_two_body_rejected() {
        let d = ShellModelData::parse("orbitals 4 core x\ntb 0 2 1 2 1.0\n").unwrap();
        assert!(matches!(build_shell_hamiltonian(&d), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn model_spec_json_round_trip() {
        let spec = ModelSpec::TfimTriangular {
            rows: 4,
            cols: 3,
            boundary: Boundary::Obc,
            field: FieldSpec::RandomUniform { lo: -1.0, hi: 1.0, seed: 3 },
            cut: Cut::Diagonal,
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ModelSpec>(&text).unwrap(), spec);
        let parsed: ModelSpec = serde_json::from_str(r#"{"model":"tfim_1d","n":4}"#).unwrap();
        assert_eq!(parsed, ModelSpec::Tfim1d { n: 4, j: 1.0, field: FieldSpec::Uniform { h: 1.0 } });
    }
}
