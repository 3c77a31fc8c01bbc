//! Pauli-sum Hamiltonians, the long-range XY chain and phase-frame tools.
//!
//! A term `c · P_0 P_1 … P_{n-1}` is stored as one [`Pauli`] per qubit. In the
//! text form used by JSON files, character `j` of the Pauli string is qubit
//! `j`, so `"XXI"` couples qubits 0 and 1 of a 3-qubit system.
//!
//! Conjugating by a quarter-turn phase gate maps `X → -Y` and `Y → X` (the
//! matrices of `X` and `Y` written in the basis `{|0>, i|1>}`). A Pauli-sum
//! Hamiltonian is antisymmetric under transposition in a frame exactly when
//! every term has an odd number of `Y` factors after conjugation.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::linalg::{CsrMatrix, Mat2, I, ONE, ZERO};
use crate::qstate::{pow_i, PhaseFrame};

/// Largest register for which dense matrices are built (2^12 × 2^12 complex
/// entries is 256 MiB).
pub const MAX_DENSE_QUBITS: usize = 12;
/// Largest register for sparse Hamiltonians.
pub const MAX_SPARSE_QUBITS: usize = 22;
/// Largest system searched exhaustively by [`find_phase_frame`].
pub const MAX_FRAME_SEARCH_QUBITS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'I' | 'i' => Some(Pauli::I),
            'X' | 'x' => Some(Pauli::X),
            'Y' | 'y' => Some(Pauli::Y),
            'Z' | 'z' => Some(Pauli::Z),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn matrix(self) -> Mat2 {
        match self {
            Pauli::I => [[ONE, ZERO], [ZERO, ONE]],
            Pauli::X => [[ZERO, ONE], [ONE, ZERO]],
            Pauli::Y => [[ZERO, -I], [I, ZERO]],
            Pauli::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }

    /// The matrix in the basis `{|0>, e^{iθ}|1>}`.
    pub fn matrix_in_frame(self, quarter_turn: bool) -> Mat2 {
        let mut m = self.matrix();
        if quarter_turn {
            m[0][1] *= I;
            m[1][0] *= -I;
        }
        m
    }

    /// Symbolic image under a quarter-turn conjugation, with its sign.
    pub fn quarter_turn(self) -> (f64, Pauli) {
        match self {
            Pauli::X => (-1.0, Pauli::Y),
            Pauli::Y => (1.0, Pauli::X),
            p => (1.0, p),
        }
    }
}

/// A real multiple of a tensor product of Pauli matrices; Hermitian by
/// construction.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "PauliStringRepr", into = "PauliStringRepr"))]
pub struct PauliString {
    ops: Vec<Pauli>,
    coeff: f64,
}

impl PauliString {
    pub fn new(ops: Vec<Pauli>, coeff: f64) -> Result<Self> {
        if !coeff.is_finite() {
            return Err(invalid("Pauli coefficient must be finite"));
        }
        Ok(Self { ops, coeff })
    }

    /// Parses a string such as `"IXXY"`.
    pub fn parse(text: &str, coeff: f64) -> Result<Self> {
        let ops = text
            .chars()
            .map(|c| Pauli::from_char(c).ok_or_else(|| invalid(alloc::format!("invalid Pauli character `{c}`"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ops, coeff)
    }

    /// Identity everywhere except the listed `(site, pauli)` factors.
    pub fn from_sites(num_qubits: usize, factors: &[(usize, Pauli)], coeff: f64) -> Result<Self> {
        let mut ops = vec![Pauli::I; num_qubits];
        for &(site, p) in factors {
            if site >= num_qubits {
                return Err(Error::SiteOutOfRange { site, num_qubits });
            }
            ops[site] = p;
        }
        Self::new(ops, coeff)
    }

    pub fn ops(&self) -> &[Pauli] {
        &self.ops
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn num_qubits(&self) -> usize {
        self.ops.len()
    }

    pub fn y_count(&self) -> usize {
        self.ops.iter().filter(|&&p| p == Pauli::Y).count()
    }

    /// Bit masks of the qubits carrying a flip (`X`/`Y`) and a phase (`Y`/`Z`).
    pub fn masks(&self) -> (usize, usize) {
        let mut x = 0;
        let mut z = 0;
        for (j, p) in self.ops.iter().enumerate() {
            match p {
                Pauli::X => x |= 1 << j,
                Pauli::Y => {
                    x |= 1 << j;
                    z |= 1 << j;
                }
                Pauli::Z => z |= 1 << j,
                Pauli::I => {}
            }
        }
        (x, z)
    }

    /// `P|y> = amplitude · |y ⊕ x_mask>`, without the coefficient.
    pub fn apply_to_basis(&self, y: usize) -> (usize, C64) {
        let (xm, zm) = self.masks();
        let sign = if (y & zm).count_ones() % 2 == 0 { ONE } else { -ONE };
        (y ^ xm, pow_i(self.y_count()) * sign)
    }

    /// Image under conjugation by the frame's phase gates.
    pub fn conjugate_by_frame(&self, frame: &PhaseFrame) -> Self {
        let mut coeff = self.coeff;
        let ops = self
            .ops
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                if frame.is_quarter_turn(j) {
                    let (s, q) = p.quarter_turn();
                    coeff *= s;
                    q
                } else {
                    p
                }
            })
            .collect();
        Self { ops, coeff }
    }

    /// Whether this term changes sign under transposition once written in a
    /// frame with quarter turns on `frame_mask`.
    pub fn is_odd_in_frame(&self, frame_mask: u64) -> bool {
        let (xm, _) = self.masks();
        let flips = ((xm as u64) & frame_mask).count_ones() as usize;
        (self.y_count() + flips) % 2 == 1
    }

    fn label(&self) -> String {
        self.ops.iter().map(|p| p.as_char()).collect()
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+} {}", self.coeff, self.label())
    }
}

#[cfg(feature = "serde")]
#[derive(serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct PauliStringRepr {
    paulis: String,
    coeff: f64,
}

#[cfg(feature = "serde")]
impl TryFrom<PauliStringRepr> for PauliString {
    type Error = Error;
    fn try_from(r: PauliStringRepr) -> Result<Self> {
        PauliString::parse(&r.paulis, r.coeff)
    }
}

#[cfg(feature = "serde")]
impl From<PauliString> for PauliStringRepr {
    fn from(p: PauliString) -> Self {
        PauliStringRepr { paulis: p.label(), coeff: p.coeff }
    }
}

/// Which pairs of the chain an XY Hamiltonian couples. Sublattice A holds the
/// even-indexed sites and B the odd-indexed ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ChainPart {
    /// Pairs with one site on each sublattice.
    Ab,
    /// Pairs inside sublattice A.
    Aa,
    /// Pairs inside sublattice B.
    Bb,
    /// `Aa` and `Bb` together.
    Intra,
    /// Every pair.
    All,
}

impl ChainPart {
    fn includes(self, i: usize, j: usize) -> bool {
        let same = i % 2 == j % 2;
        match self {
            ChainPart::Ab => !same,
            ChainPart::Aa => same && i % 2 == 0,
            ChainPart::Bb => same && i % 2 == 1,
            ChainPart::Intra => same,
            ChainPart::All => true,
        }
    }
}

/// Lattice information carried along with chain Hamiltonians so that noise
/// channels can build matching perturbations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChainMetadata {
    /// Coupling `J`; pair `(i, j)` gets `J / |i - j|^exponent`.
    pub coupling: f64,
    pub exponent: f64,
    pub part: ChainPart,
}

/// A Hamiltonian given as a sum of Pauli strings on `num_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "HamiltonianRepr"))]
pub struct HamiltonianSpec {
    num_qubits: usize,
    terms: Vec<PauliString>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    metadata: Option<ChainMetadata>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct HamiltonianRepr {
    num_qubits: usize,
    terms: Vec<PauliString>,
    #[serde(default)]
    metadata: Option<ChainMetadata>,
}

#[cfg(feature = "serde")]
impl TryFrom<HamiltonianRepr> for HamiltonianSpec {
    type Error = Error;
    fn try_from(r: HamiltonianRepr) -> Result<Self> {
        let mut h = HamiltonianSpec::new(r.num_qubits, r.terms)?;
        h.metadata = r.metadata;
        Ok(h)
    }
}

impl HamiltonianSpec {
    pub fn new(num_qubits: usize, terms: Vec<PauliString>) -> Result<Self> {
        if num_qubits == 0 || num_qubits > 64 {
            return Err(invalid("number of qubits must be between 1 and 64"));
        }
        if let Some(t) = terms.iter().find(|t| t.num_qubits() != num_qubits) {
            return Err(Error::DimensionMismatch { expected: num_qubits, found: t.num_qubits() });
        }
        Ok(Self { num_qubits, terms, metadata: None })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn terms(&self) -> &[PauliString] {
        &self.terms
    }

    pub fn metadata(&self) -> Option<&ChainMetadata> {
        self.metadata.as_ref()
    }

    pub fn with_metadata(mut self, metadata: Option<ChainMetadata>) -> Self {
        self.metadata = metadata;
        self
    }

    /// Multiplies every coefficient by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let terms = self.terms.iter().map(|t| PauliString { ops: t.ops.clone(), coeff: t.coeff * s }).collect();
        Self { num_qubits: self.num_qubits, terms, metadata: None }
    }

    /// `self + s · other`. Metadata is dropped.
    pub fn plus(&self, other: &HamiltonianSpec, s: f64) -> Result<Self> {
        if other.num_qubits != self.num_qubits {
            return Err(Error::DimensionMismatch { expected: self.num_qubits, found: other.num_qubits });
        }
        let mut terms = self.terms.clone();
        terms.extend(other.scaled(s).terms);
        Ok(Self { num_qubits: self.num_qubits, terms, metadata: None })
    }

    /// Merges repeated Pauli strings and drops terms whose coefficients cancel.
    pub fn simplified(&self) -> Self {
        let mut acc: BTreeMap<Vec<Pauli>, f64> = BTreeMap::new();
        for t in &self.terms {
            *acc.entry(t.ops.clone()).or_insert(0.0) += t.coeff;
        }
        let scale = self.terms.iter().fold(0.0f64, |m, t| m.max(libm::fabs(t.coeff)));
        let terms = acc
            .into_iter()
            .filter(|(_, c)| libm::fabs(*c) > 1e-14 * scale)
            .map(|(ops, coeff)| PauliString { ops, coeff })
            .collect();
        Self { num_qubits: self.num_qubits, terms, metadata: self.metadata.clone() }
    }

    /// Places this Hamiltonian on one copy of a doubled register (pair-local
    /// layout): site `j` goes to register qubit `2j + copy`.
    pub fn embed_copy(&self, copy: usize) -> Result<Self> {
        if copy > 1 {
            return Err(invalid("copy index must be 0 or 1"));
        }
        if 2 * self.num_qubits > 64 {
            return Err(invalid("doubled register exceeds 64 qubits"));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let mut ops = vec![Pauli::I; 2 * self.num_qubits];
                for (j, &p) in t.ops.iter().enumerate() {
                    ops[2 * j + copy] = p;
                }
                PauliString { ops, coeff: t.coeff }
            })
            .collect();
        Ok(Self { num_qubits: 2 * self.num_qubits, terms, metadata: None })
    }

    /// `H ⊗ 1 + 1 ⊗ H` on the doubled register.
    pub fn doubled(&self) -> Result<Self> {
        self.embed_copy(0)?.plus(&self.embed_copy(1)?, 1.0)
    }
}

/// The XY chain `Σ J/|i-j|³ (XᵢXⱼ + YᵢYⱼ)` restricted to `part`.
pub fn build_xy_chain(n: usize, coupling: f64, part: ChainPart) -> Result<HamiltonianSpec> {
    build_power_law_xy(n, coupling, 3.0, part)
}

/// As [`build_xy_chain`] with couplings `J/|i-j|^exponent`.
pub fn build_power_law_xy(n: usize, coupling: f64, exponent: f64, part: ChainPart) -> Result<HamiltonianSpec> {
    if n < 2 {
        return Err(invalid("an XY chain needs at least two sites"));
    }
    if !coupling.is_finite() || !exponent.is_finite() {
        return Err(invalid("coupling and exponent must be finite"));
    }
    let mut terms = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if part.includes(i, j) {
                let c = coupling / libm::pow((j - i) as f64, exponent);
                terms.push(PauliString::from_sites(n, &[(i, Pauli::X), (j, Pauli::X)], c)?);
                terms.push(PauliString::from_sites(n, &[(i, Pauli::Y), (j, Pauli::Y)], c)?);
            }
        }
    }
    Ok(HamiltonianSpec::new(n, terms)?.with_metadata(Some(ChainMetadata { coupling, exponent, part })))
}

/// `J Σ_j (X_j X_j' + Y_j Y_j')` coupling site `j` of copy 1 to site `j` of
/// copy 2, on the `2n`-qubit pair-local register.
pub fn build_intercopy_coupling(n: usize, coupling: f64) -> Result<HamiltonianSpec> {
    if n == 0 {
        return Err(invalid("coupling needs at least one site"));
    }
    let mut terms = Vec::new();
    for j in 0..n {
        terms.push(PauliString::from_sites(2 * n, &[(2 * j, Pauli::X), (2 * j + 1, Pauli::X)], coupling)?);
        terms.push(PauliString::from_sites(2 * n, &[(2 * j, Pauli::Y), (2 * j + 1, Pauli::Y)], coupling)?);
    }
    HamiltonianSpec::new(2 * n, terms)
}

/// Conjugates every term symbolically by the frame's phase gates.
pub fn conjugate_by_frame(h: &HamiltonianSpec, frame: &PhaseFrame) -> Result<HamiltonianSpec> {
    check_frame(h, frame)?;
    let terms = h.terms.iter().map(|t| t.conjugate_by_frame(frame)).collect();
    Ok(HamiltonianSpec { num_qubits: h.num_qubits, terms, metadata: h.metadata.clone() })
}

/// Outcome of checking `Hᵀ = -H` in a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntisymmetryReport {
    pub holds: bool,
    /// Largest `|coefficient|` among (merged) terms that are even under
    /// transposition; zero when the property holds.
    pub max_violation: f64,
}

/// Certifies `Hᵀ = -H` in `frame` from the Pauli algebra alone.
pub fn antisymmetry_report(h: &HamiltonianSpec, frame: &PhaseFrame) -> Result<AntisymmetryReport> {
    check_frame(h, frame)?;
    let mask = frame.mask();
    let max_violation = h
        .simplified()
        .terms
        .iter()
        .filter(|t| !t.is_odd_in_frame(mask))
        .fold(0.0f64, |m, t| m.max(libm::fabs(t.coeff)));
    Ok(AntisymmetryReport { holds: max_violation == 0.0, max_violation })
}

/// `max |Hᵀ + H|` from the dense matrix, for cross-checking the algebraic test.
pub fn dense_antisymmetry_violation(h: &HamiltonianSpec, frame: &PhaseFrame) -> Result<f64> {
    let m = dense_matrix(h, frame)?;
    let s = m.transpose() + &m;
    Ok(s.iter().fold(0.0, |acc, v| acc.max(v.norm())))
}

/// Exhaustive search over the `2^n` frames in ascending mask order; returns the
/// first frame in which `Hᵀ = -H`, or `None`.
pub fn find_phase_frame(h: &HamiltonianSpec) -> Result<Option<PhaseFrame>> {
    let n = h.num_qubits;
    if n > MAX_FRAME_SEARCH_QUBITS {
        return Err(Error::SearchSpaceExceeded(n));
    }
    let simplified = h.simplified();
    let terms: Vec<(u64, usize)> = simplified.terms.iter().map(|t| (t.masks().0 as u64, t.y_count())).collect();
    for mask in 0..(1u64 << n) {
        if terms.iter().all(|&(xm, y)| (y + (xm & mask).count_ones() as usize) % 2 == 1) {
            return Ok(Some(PhaseFrame::from_mask(n, mask)));
        }
    }
    Ok(None)
}

fn check_frame(h: &HamiltonianSpec, frame: &PhaseFrame) -> Result<()> {
    if frame.num_qubits() != h.num_qubits {
        return Err(Error::DimensionMismatch { expected: h.num_qubits, found: frame.num_qubits() });
    }
    Ok(())
}

/// Sparse matrix of `h` in the frame basis: entry `(x, y)` is
/// `e^{-iθ·x} H_xy e^{iθ·y}`.
pub fn sparse_matrix(h: &HamiltonianSpec, frame: &PhaseFrame) -> Result<CsrMatrix> {
    check_frame(h, frame)?;
    let n = h.num_qubits;
    if n > MAX_SPARSE_QUBITS {
        return Err(Error::BudgetExceeded { qubits: n, limit: MAX_SPARSE_QUBITS });
    }
    let fmask = frame.mask() as usize;
    let terms: Vec<(usize, usize, C64)> = h
        .terms
        .iter()
        .map(|t| {
            let (xm, zm) = t.masks();
            (xm, zm, pow_i(t.y_count()) * t.coeff)
        })
        .collect();
    let scale = h.terms.iter().fold(0.0f64, |m, t| m.max(libm::fabs(t.coeff)));
    Ok(CsrMatrix::from_rows(
        1 << n,
        |x, row| {
            for &(xm, zm, c) in &terms {
                let y = x ^ xm;
                let sign = if (y & zm).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                let turns = 4 + (y & fmask).count_ones() as usize - (x & fmask).count_ones() as usize;
                row.push((y, c * sign * pow_i(turns % 4)));
            }
        },
        1e-14 * scale,
    ))
}

/// Dense matrix of `h` in the frame basis.
pub fn dense_matrix(h: &HamiltonianSpec, frame: &PhaseFrame) -> Result<DMatrix<C64>> {
    if h.num_qubits > MAX_DENSE_QUBITS {
        return Err(Error::BudgetExceeded { qubits: h.num_qubits, limit: MAX_DENSE_QUBITS });
    }
    Ok(sparse_matrix(h, frame)?.to_dense())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;

    #[test]
    fn frame_matrices_match_symbolic_conjugation() {
        for p in [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z] {
            let (s, q) = p.quarter_turn();
            let m = p.matrix_in_frame(true);
            let expected = q.matrix();
            for r in 0..2 {
                for c in 0..2 {
                    assert!((m[r][c] - expected[r][c] * s).norm() < 1e-15, "{p:?}");
                }
            }
        }
    }

    #[test]
    fn chain_term_counts() {
        let ab = build_xy_chain(4, 1.0, ChainPart::Ab).unwrap();
        // AB pairs of 4 sites: (0,1) (0,3) (1,2) (2,3)
        assert_eq!(ab.terms().len(), 8);
        let aa = build_xy_chain(4, 1.0, ChainPart::Aa).unwrap();
        assert_eq!(aa.terms().len(), 2);
        assert!((aa.terms()[0].coeff() - 1.0 / 8.0).abs() < 1e-15);
        assert!(build_xy_chain(1, 1.0, ChainPart::Ab).is_err());
        let c = build_intercopy_coupling(2, 0.5).unwrap();
        assert_eq!(c.num_qubits(), 4);
        assert_eq!(c.terms().len(), 4);
    }

    #[test]
    fn ab_chain_antisymmetric_in_alternating_frame() {
        let h = build_xy_chain(6, 1.0, ChainPart::Ab).unwrap();
        let f = PhaseFrame::alternating(6);
        let r = antisymmetry_report(&h, &f).unwrap();
        assert!(r.holds);
        assert!(dense_antisymmetry_violation(&h, &f).unwrap() < 1e-14);
        let aa = build_xy_chain(6, 1.0, ChainPart::Aa).unwrap();
        let r = antisymmetry_report(&aa, &f).unwrap();
        assert!(!r.holds);
        assert!((r.max_violation - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn frame_search_returns_first_mask() {
        let h = build_xy_chain(4, 1.0, ChainPart::Ab).unwrap();
        assert_eq!(find_phase_frame(&h).unwrap(), Some(PhaseFrame::alternating(4)));
        let zz = HamiltonianSpec::new(2, vec![PauliString::parse("ZZ", 1.0).unwrap()]).unwrap();
        assert_eq!(find_phase_frame(&zz).unwrap(), None);
        let empty = HamiltonianSpec::new(3, vec![]).unwrap();
        assert_eq!(find_phase_frame(&empty).unwrap(), Some(PhaseFrame::trivial(3)));
        let big = HamiltonianSpec::new(17, vec![]).unwrap();
        assert_eq!(find_phase_frame(&big), Err(Error::SearchSpaceExceeded(17)));
    }

    #[test]
    fn cancelling_terms_do_not_violate() {
        let t = PauliString::parse("XX", 0.3).unwrap();
        let h = HamiltonianSpec::new(2, vec![t.clone(), PauliString::parse("XX", -0.3).unwrap()]).unwrap();
        assert!(antisymmetry_report(&h, &PhaseFrame::trivial(2)).unwrap().holds);
    }

    #[test]
    fn dense_frame_matrix_equals_conjugated_spec() {
        let h = build_xy_chain(3, 0.7, ChainPart::All)
            .unwrap()
            .plus(&HamiltonianSpec::new(3, vec![PauliString::parse("ZYX", 0.4).unwrap()]).unwrap(), 1.0)
            .unwrap();
        let f = PhaseFrame::from_mask(3, 0b101);
        let a = dense_matrix(&h, &f).unwrap();
        let b = dense_matrix(&conjugate_by_frame(&h, &f).unwrap(), &PhaseFrame::trivial(3)).unwrap();
        assert!(max_abs_diff(&a, &b) < 1e-14);
    }

    #[test]
    fn dense_matrix_of_xy_pair_is_hopping() {
        // XX + YY = 2(|01><10| + |10><01|)
        let h = build_xy_chain(2, 1.0, ChainPart::Ab).unwrap();
        let m = dense_matrix(&h, &PhaseFrame::trivial(2)).unwrap();
        assert_eq!(m[(1, 2)], C64::new(2.0, 0.0));
        assert_eq!(m[(2, 1)], C64::new(2.0, 0.0));
        assert_eq!(m[(0, 3)], ZERO);
        assert_eq!(sparse_matrix(&h, &PhaseFrame::trivial(2)).unwrap().nnz(), 2);
    }
}
