//! Pauli-string algebra over at most 32 qubits.
//!
//! Strings are stored as an X mask and a Z mask plus a global phase `i^k`.
//! Qubit `q` of a width-`n` object lives at bit `n - 1 - q`, so the integer
//! value of a [`Bitstring`] is its computational-basis index with qubit 0 as
//! the most significant (leftmost) factor of the Kronecker product.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_width, Error, Result};

pub const MAX_QUBITS: usize = 32;

/// Coefficients below this magnitude are dropped after merging.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// Maximum imaginary residue tolerated when a sum is declared Hermitian.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

#[inline]
fn width_mask(width: usize) -> u32 {
    if width == 32 {
        u32::MAX
    } else {
        (1u32 << width) - 1
    }
}

#[inline]
fn qubit_bit(width: usize, q: usize) -> u32 {
    1u32 << (width - 1 - q)
}

/// `i^k` for `k` taken modulo 4.
#[inline]
pub fn i_pow(k: u8) -> Complex64 {
    match k & 3 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// A computational-basis label of fixed width.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bitstring {
    bits: u32,
    width: u8,
}

impl Bitstring {
    pub fn zeros(width: usize) -> Result<Self> {
        Self::from_index(0, width)
    }

    /// Builds the label whose basis index is `index`.
    pub fn from_index(index: u32, width: usize) -> Result<Self> {
        if width == 0 || width > MAX_QUBITS {
            return Err(Error::InvalidInput(format!(
                "bitstring width must be in 1..={MAX_QUBITS}, got {width}"
            )));
        }
        if index & !width_mask(width) != 0 {
            return Err(Error::InvalidInput(format!(
                "index {index} does not fit in {width} bits"
            )));
        }
        Ok(Self {
            bits: index,
            width: width as u8,
        })
    }

    /// Builds a label from per-qubit values, qubit 0 first.
    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let width = bits.len();
        let mut out = Self::zeros(width)?;
        for (q, &b) in bits.iter().enumerate() {
            out.set(q, b);
        }
        Ok(out)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width as usize
    }

    /// Basis index (qubit 0 is the most significant bit).
    #[inline]
    pub fn index(&self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn get(&self, q: usize) -> bool {
        assert!(q < self.width(), "qubit {q} out of range");
        self.bits & qubit_bit(self.width(), q) != 0
    }

    #[inline]
    pub fn set(&mut self, q: usize, value: bool) {
        assert!(q < self.width(), "qubit {q} out of range");
        let b = qubit_bit(self.width(), q);
        if value {
            self.bits |= b;
        } else {
            self.bits &= !b;
        }
    }

    /// Number of ones.
    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.width()).map(|q| self.get(q)).collect()
    }

    /// Stacks `a` then `b` into one label of width `a.width + b.width`.
    pub fn concat(a: &Bitstring, b: &Bitstring) -> Result<Self> {
        let width = a.width() + b.width();
        if width > MAX_QUBITS {
            return Err(Error::InvalidInput(format!("concatenated width {width} exceeds {MAX_QUBITS}")));
        }
        let bits = ((a.bits as u64) << b.width()) as u32 | b.bits;
        Self::from_index(bits, width)
    }

    /// Splits into the first `left` qubits and the rest.
    pub fn split_at(&self, left: usize) -> Result<(Self, Self)> {
        if left == 0 || left >= self.width() {
            return Err(Error::InvalidInput(format!(
                "cannot split width {} at {left}",
                self.width()
            )));
        }
        let right = self.width() - left;
        let a = Self::from_index(self.bits >> right, left)?;
        let b = Self::from_index(self.bits & width_mask(right), right)?;
        Ok((a, b))
    }

    /// Gathers the listed qubits, in the listed order, into a new label.
    pub fn gather(&self, qubits: &[usize]) -> Result<Self> {
        let mut out = Self::zeros(qubits.len())?;
        for (j, &q) in qubits.iter().enumerate() {
            if q >= self.width() {
                return Err(Error::Dimension {
                    expected: self.width(),
                    got: q + 1,
                });
            }
            out.set(j, self.get(q));
        }
        Ok(out)
    }

    /// Count of positions where `self` and `other` differ.
    pub fn hamming(&self, other: &Bitstring) -> u32 {
        (self.bits ^ other.bits).count_ones()
    }
}

impl PartialOrd for Bitstring {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Bitstring {
    /// Lexicographic on bits (qubit 0 first); shorter labels sort first.
    fn cmp(&self, other: &Self) -> Ordering {
        self.width
            .cmp(&other.width)
            .then_with(|| self.bits.cmp(&other.bits))
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.width() {
            f.write_str(if self.get(q) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{self}⟩")
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .trim()
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidInput(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(&bits)
    }
}

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn from_xz(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    fn xz(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A tensor product of Pauli letters with a phase in `{±1, ±i}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    x: u32,
    z: u32,
    width: u8,
    /// Power of `i`, in `0..4`.
    phase: u8,
}

impl PauliString {
    pub fn identity(width: usize) -> Result<Self> {
        if width == 0 || width > MAX_QUBITS {
            return Err(Error::InvalidInput(format!(
                "Pauli string width must be in 1..={MAX_QUBITS}, got {width}"
            )));
        }
        Ok(Self {
            x: 0,
            z: 0,
            width: width as u8,
            phase: 0,
        })
    }

    /// Builds a string from `(qubit, letter)` pairs; unlisted qubits are `I`.
    pub fn from_letters(width: usize, letters: &[(usize, Pauli)]) -> Result<Self> {
        let mut out = Self::identity(width)?;
        for &(q, p) in letters {
            if q >= width {
                return Err(Error::Dimension {
                    expected: width,
                    got: q + 1,
                });
            }
            out.set_letter(q, p);
        }
        Ok(out)
    }

    pub fn with_phase(mut self, phase: u8) -> Self {
        self.phase = phase & 3;
        self
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width as usize
    }

    /// Phase as a power of `i`.
    #[inline]
    pub fn phase_power(&self) -> u8 {
        self.phase
    }

    pub fn phase(&self) -> Complex64 {
        i_pow(self.phase)
    }

    #[inline]
    pub fn x_mask(&self) -> u32 {
        self.x
    }

    #[inline]
    pub fn z_mask(&self) -> u32 {
        self.z
    }

    pub fn letter(&self, q: usize) -> Pauli {
        let b = qubit_bit(self.width(), q);
        Pauli::from_xz(self.x & b != 0, self.z & b != 0)
    }

    fn set_letter(&mut self, q: usize, p: Pauli) {
        let b = qubit_bit(self.width(), q);
        let (x, z) = p.xz();
        self.x = if x { self.x | b } else { self.x & !b };
        self.z = if z { self.z | b } else { self.z & !b };
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Number of non-identity letters.
    pub fn support_size(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Action on a basis index: `P|idx⟩ = i^k |idx'⟩`, returns `(k, idx')`.
    #[inline]
    pub fn apply_index(&self, idx: u32) -> (u8, u32) {
        let y = self.y_count() as u8;
        let sign = ((self.z & idx).count_ones() & 1) as u8;
        ((self.phase + y + 2 * sign) & 3, idx ^ self.x)
    }

    /// Action on a basis state: returns the phase and the image label.
    pub fn apply(&self, sigma: &Bitstring) -> Result<(Complex64, Bitstring)> {
        check_width(self.width(), sigma.width())?;
        let (k, idx) = self.apply_index(sigma.index());
        Ok((i_pow(k), Bitstring::from_index(idx, self.width())?))
    }

    /// Operator product `self · other`.
    pub fn mul(&self, other: &PauliString) -> Result<PauliString> {
        check_width(self.width(), other.width())?;
        // Convert to X^x Z^z form, where Y = i·XZ.
        let a = self.phase + self.y_count() as u8;
        let b = other.phase + other.y_count() as u8;
        let swap = 2 * ((self.z & other.x).count_ones() & 1) as u8;
        let x = self.x ^ other.x;
        let z = self.z ^ other.z;
        let y = (x & z).count_ones() as u8;
        let phase = (a + b + swap + 4 - (y & 3)) & 3;
        Ok(PauliString {
            x,
            z,
            width: self.width,
            phase,
        })
    }

    /// Restriction to the listed qubits (in the listed order), phase dropped.
    pub fn restrict(&self, qubits: &[usize]) -> Result<PauliString> {
        let mut out = PauliString::identity(qubits.len())?;
        for (j, &q) in qubits.iter().enumerate() {
            if q >= self.width() {
                return Err(Error::Dimension {
                    expected: self.width(),
                    got: q + 1,
                });
            }
            out.set_letter(j, self.letter(q));
        }
        Ok(out)
    }

    /// Canonical key ignoring the phase.
    #[inline]
    pub fn key(&self) -> (u32, u32) {
        (self.x, self.z)
    }

    fn letters_cmp(&self, other: &Self) -> Ordering {
        self.width.cmp(&other.width).then_with(|| {
            (0..self.width())
                .map(|q| self.letter(q).cmp(&other.letter(q)))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PauliString {
    /// Lexicographic over letters with `I < X < Y < Z`, then phase.
    fn cmp(&self, other: &Self) -> Ordering {
        self.letters_cmp(other).then(self.phase.cmp(&other.phase))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.phase {
            0 => {}
            1 => f.write_str("i")?,
            2 => f.write_str("-")?,
            _ => f.write_str("-i")?,
        }
        for q in 0..self.width() {
            write!(f, "{}", self.letter(q).symbol())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses strings such as `XIZY`, with an optional `-`, `i` or `-i` prefix.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (phase, body) = if let Some(rest) = s.strip_prefix("-i") {
            (3, rest)
        } else if let Some(rest) = s.strip_prefix('-') {
            (2, rest)
        } else if let Some(rest) = s.strip_prefix('i') {
            (1, rest)
        } else {
            (0, s)
        };
        let letters = body
            .chars()
            .enumerate()
            .map(|(q, c)| {
                let p = match c {
                    'I' => Pauli::I,
                    'X' => Pauli::X,
                    'Y' => Pauli::Y,
                    'Z' => Pauli::Z,
                    other => return Err(Error::InvalidInput(format!("invalid Pauli letter {other:?}"))),
                };
                Ok((q, p))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_letters(letters.len(), &letters)?.with_phase(phase))
    }
}

impl Serialize for PauliString {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PauliString {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Accumulates complex multiples of Pauli strings, merging equal strings.
#[derive(Debug, Clone)]
pub struct PauliSum {
    width: usize,
    terms: BTreeMap<(u32, u32), Complex64>,
}

impl PauliSum {
    pub fn new(width: usize) -> Result<Self> {
        PauliString::identity(width)?;
        Ok(Self {
            width,
            terms: BTreeMap::new(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Adds `coeff · p`, folding the string's phase into the coefficient.
    pub fn add(&mut self, coeff: Complex64, p: &PauliString) -> Result<()> {
        check_width(self.width, p.width())?;
        let c = coeff * p.phase();
        *self.terms.entry(p.key()).or_insert(Complex64::new(0.0, 0.0)) += c;
        Ok(())
    }

    pub fn add_real(&mut self, coeff: f64, p: &PauliString) -> Result<()> {
        self.add(Complex64::new(coeff, 0.0), p)
    }

    pub fn extend(&mut self, other: &PauliSum) -> Result<()> {
        check_width(self.width, other.width)?;
        for (k, c) in &other.terms {
            *self.terms.entry(*k).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        Ok(())
    }

    /// Product of two sums, distributing over all term pairs.
    pub fn mul(&self, other: &PauliSum) -> Result<PauliSum> {
        check_width(self.width, other.width)?;
        let mut out = PauliSum::new(self.width)?;
        for (&(xa, za), &ca) in &self.terms {
            let a = self.string_from_key(xa, za);
            for (&(xb, zb), &cb) in &other.terms {
                let b = self.string_from_key(xb, zb);
                out.add(ca * cb, &a.mul(&b)?)?;
            }
        }
        Ok(out)
    }

    pub fn scale(&mut self, factor: Complex64) {
        for c in self.terms.values_mut() {
            *c *= factor;
        }
    }

    fn string_from_key(&self, x: u32, z: u32) -> PauliString {
        PauliString {
            x,
            z,
            width: self.width as u8,
            phase: 0,
        }
    }

    /// Merges into a Hermitian Hamiltonian, rejecting imaginary residues.
    pub fn into_hamiltonian(self) -> Result<PauliHamiltonian> {
        let mut terms = Vec::with_capacity(self.terms.len());
        for (&(x, z), c) in &self.terms {
            if c.im.abs() > HERMITIAN_TOLERANCE {
                let p = self.string_from_key(x, z);
                return Err(Error::InvalidInput(format!(
                    "non-Hermitian coefficient {c} on {p}"
                )));
            }
            if c.re.abs() >= MERGE_TOLERANCE {
                terms.push((c.re, self.string_from_key(x, z)));
            }
        }
        terms.sort_by(|a, b| a.1.cmp(&b.1));
        Ok(PauliHamiltonian {
            width: self.width,
            terms,
        })
    }
}

/// A real-weighted sum of phase-free Pauli strings with no duplicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliHamiltonian {
    width: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliHamiltonian {
    /// Builds a Hamiltonian from real-weighted strings, merging duplicates.
    pub fn from_terms(width: usize, terms: impl IntoIterator<Item = (f64, PauliString)>) -> Result<Self> {
        let mut sum = PauliSum::new(width)?;
        for (c, p) in terms {
            if !c.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite coefficient {c}")));
            }
            sum.add_real(c, &p)?;
        }
        sum.into_hamiltonian()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `⟨bra|H|ket⟩`.
    pub fn matrix_element(&self, bra: &Bitstring, ket: &Bitstring) -> Result<Complex64> {
        check_width(self.width, bra.width())?;
        check_width(self.width, ket.width())?;
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, p) in &self.terms {
            let (k, img) = p.apply_index(ket.index());
            if img == bra.index() {
                acc += *c * i_pow(k);
            }
        }
        Ok(acc)
    }

    /// Visits every nonzero `(row, value)` of column `ket` of the matrix.
    #[inline]
    pub fn for_each_in_column(&self, ket: u32, mut f: impl FnMut(u32, Complex64)) {
        for (c, p) in &self.terms {
            let (k, img) = p.apply_index(ket);
            f(img, *c * i_pow(k));
        }
    }

    /// Real Hamiltonian matrix entries only (no odd-Y strings).
    pub fn is_real(&self) -> bool {
        self.terms.iter().all(|(_, p)| p.y_count() % 2 == 0)
    }
}

/// One bipartite observable `coeff · O_A ⊗ O_B`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteTerm {
    pub coeff: f64,
    pub op_a: PauliString,
    pub op_b: PauliString,
}

/// A partition of `{0..N-1}` into subsystem A and subsystem B.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartitionSpec {
    pub qubits_a: Vec<usize>,
    pub qubits_b: Vec<usize>,
}

impl BipartitionSpec {
    /// Checks the lists partition `0..width` into two equal halves.
    pub fn new(qubits_a: Vec<usize>, qubits_b: Vec<usize>) -> Result<Self> {
        let spec = Self { qubits_a, qubits_b };
        spec.validate(spec.width())?;
        Ok(spec)
    }

    /// First half versus second half.
    pub fn half_split(width: usize) -> Result<Self> {
        if width < 2 || width % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "equal bipartition needs an even width >= 2, got {width}"
            )));
        }
        Self::new((0..width / 2).collect(), (width / 2..width).collect())
    }

    pub fn width(&self) -> usize {
        self.qubits_a.len() + self.qubits_b.len()
    }

    pub fn half_width(&self) -> usize {
        self.qubits_a.len()
    }

    pub fn validate(&self, width: usize) -> Result<()> {
        check_width(width, self.width())?;
        if self.qubits_a.len() != self.qubits_b.len() {
            return Err(Error::InvalidInput(format!(
                "unequal bipartition {} + {}",
                self.qubits_a.len(),
                self.qubits_b.len()
            )));
        }
        let mut seen = vec![false; width];
        for &q in self.qubits_a.iter().chain(&self.qubits_b) {
            if q >= width || seen[q] {
                return Err(Error::InvalidInput(format!(
                    "qubit {q} is out of range or listed twice"
                )));
            }
            seen[q] = true;
        }
        Ok(())
    }

    /// Places the two halves back into a full-width label.
    pub fn join(&self, a: &Bitstring, b: &Bitstring) -> Result<Bitstring> {
        check_width(self.qubits_a.len(), a.width())?;
        check_width(self.qubits_b.len(), b.width())?;
        let mut out = Bitstring::zeros(self.width())?;
        for (j, &q) in self.qubits_a.iter().enumerate() {
            out.set(q, a.get(j));
        }
        for (j, &q) in self.qubits_b.iter().enumerate() {
            out.set(q, b.get(j));
        }
        Ok(out)
    }

    /// Splits a full-width label into its A and B halves.
    pub fn split(&self, full: &Bitstring) -> Result<(Bitstring, Bitstring)> {
        check_width(self.width(), full.width())?;
        Ok((full.gather(&self.qubits_a)?, full.gather(&self.qubits_b)?))
    }

    /// Qubit order placing A first then B.
    pub fn stacked_order(&self) -> Vec<usize> {
        self.qubits_a.iter().chain(&self.qubits_b).copied().collect()
    }
}

/// Splits every term of `h` across the cut described by `spec`.
pub fn bipartition(h: &PauliHamiltonian, spec: &BipartitionSpec) -> Result<Vec<BipartiteTerm>> {
    spec.validate(h.width())?;
    h.terms()
        .iter()
        .map(|(c, p)| {
            Ok(BipartiteTerm {
                coeff: *c,
                op_a: p.restrict(&spec.qubits_a)?,
                op_b: p.restrict(&spec.qubits_b)?,
            })
        })
        .collect()
}

/// Keeps the `k` terms of largest `|coeff|`, ties by `(op_a, op_b)` order.
pub fn truncate_terms(terms: &[BipartiteTerm], k: usize) -> Result<Vec<BipartiteTerm>> {
    if k == 0 {
        return Err(Error::InvalidInput("term budget must be at least 1".into()));
    }
    let mut sorted: Vec<BipartiteTerm> = terms.to_vec();
    sorted.sort_by(|a, b| {
        b.coeff
            .abs()
            .total_cmp(&a.coeff.abs())
            .then_with(|| a.op_a.cmp(&b.op_a))
            .then_with(|| a.op_b.cmp(&b.op_b))
    });
    sorted.truncate(k);
    Ok(sorted)
}

/// A fermionic ladder operator on one orbital.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    Create(usize),
    Annihilate(usize),
}

impl Ladder {
    fn orbital(self) -> usize {
        match self {
            Ladder::Create(i) | Ladder::Annihilate(i) => i,
        }
    }
}

/// A weighted product of ladder operators, applied right-to-left.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionTerm {
    pub coeff: f64,
    pub ops: Vec<Ladder>,
}

impl FermionTerm {
    pub fn new(coeff: f64, ops: Vec<Ladder>) -> Self {
        Self { coeff, ops }
    }

    /// `coeff · a†_i a_j`.
    pub fn one_body(coeff: f64, i: usize, j: usize) -> Self {
        Self::new(coeff, vec![Ladder::Create(i), Ladder::Annihilate(j)])
    }

    /// `coeff · a†_i a†_j a_k a_l`, operators in the written order.
    pub fn two_body(coeff: f64, i: usize, j: usize, k: usize, l: usize) -> Self {
        Self::new(
            coeff,
            vec![
                Ladder::Create(i),
                Ladder::Create(j),
                Ladder::Annihilate(k),
                Ladder::Annihilate(l),
            ],
        )
    }
}

/// Jordan–Wigner image of one ladder operator on `n` orbitals.
///
/// Occupied is `|1⟩`: `a†_i = Z_0 ⋯ Z_{i-1} (X_i − iY_i)/2`.
fn ladder_to_pauli(op: Ladder, n: usize) -> Result<PauliSum> {
    let i = op.orbital();
    let mut z_string: Vec<(usize, Pauli)> = (0..i).map(|q| (q, Pauli::Z)).collect();
    z_string.push((i, Pauli::X));
    let x_part = PauliString::from_letters(n, &z_string)?;
    z_string.pop();
    z_string.push((i, Pauli::Y));
    let y_part = PauliString::from_letters(n, &z_string)?;
    let sign = match op {
        Ladder::Create(_) => -1.0,
        Ladder::Annihilate(_) => 1.0,
    };
    let mut sum = PauliSum::new(n)?;
    sum.add(Complex64::new(0.5, 0.0), &x_part)?;
    sum.add(Complex64::new(0.0, 0.5 * sign), &y_part)?;
    Ok(sum)
}

/// Maps a fermionic operator sum on `n` orbitals to a qubit Hamiltonian.
pub fn jordan_wigner(terms: &[FermionTerm], n: usize) -> Result<PauliHamiltonian> {
    let mut total = PauliSum::new(n)?;
    let mut cache: HashMap<(usize, bool), PauliSum> = HashMap::new();
    for term in terms {
        if !term.coeff.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite coefficient {}", term.coeff)));
        }
        let mut product = PauliSum::new(n)?;
        product.add_real(1.0, &PauliString::identity(n)?)?;
        for &op in &term.ops {
            let i = op.orbital();
            if i >= n {
                return Err(Error::InvalidInput(format!("orbital {i} out of range for {n} orbitals")));
            }
            let key = (i, matches!(op, Ladder::Create(_)));
            if !cache.contains_key(&key) {
                cache.insert(key, ladder_to_pauli(op, n)?);
            }
            product = product.mul(&cache[&key])?;
        }
        product.scale(Complex64::new(term.coeff, 0.0));
        total.extend(&product)?;
    }
    total.into_hamiltonian()
}
