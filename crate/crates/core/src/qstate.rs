//! State vectors, phase frames and measurements on doubled registers.
//!
//! A [`PhaseFrame`] assigns every qubit the basis `{|0>, e^{iθ}|1>}` with
//! `θ ∈ {0, π/2}`. State amplitudes are always stored as coefficients in the
//! frame basis of the state. A Bell pair written `(|00> + |11>)/√2` in frame
//! coefficients is the physical pair `(|00> + e^{-2iθ}|11>)/√2`, i.e. the
//! physical `|Φ⁻>` on quarter-turn sites. That pairing is what makes
//! `(1 ⊗ U)|Bell> = (Uᵀ ⊗ 1)|Bell>` hold for matrices written in the frame.
//!
//! Doubled registers use the pair-local layout described in the crate docs.
//! For one system qubit the register index is `a + 2b` where `a` is the copy-1
//! bit and `b` the copy-2 bit, so the frame Bell state has amplitudes
//! `[1, 0, 0, 1] / √2`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::hamiltonians::Pauli;
use crate::linalg::{
    mat2_hermitian_eigen, mat2_hermiticity_error, mat2_transpose, mat2_unitarity_error, spread_table, Mat2, I, ONE,
    ZERO,
};

/// Tolerance on state norms after construction.
pub const NORM_TOL: f64 = 1e-12;
/// Largest imaginary part tolerated when a Hermitian expectation is returned
/// as a real number.
pub const IMAG_TOL: f64 = 1e-10;

/// Memory budget for dense state vectors, expressed as a qubit count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    pub max_qubits: usize,
}

impl Default for Budget {
    fn default() -> Self {
        // 2^24 amplitudes is 256 MiB.
        Self { max_qubits: 24 }
    }
}

impl Budget {
    pub fn check(&self, qubits: usize) -> Result<()> {
        if qubits > self.max_qubits {
            return Err(Error::BudgetExceeded { qubits, limit: self.max_qubits });
        }
        Ok(())
    }
}

/// Per-qubit basis phases. `true` marks a quarter turn (`θ = π/2`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PhaseFrame {
    quarter_turns: Vec<bool>,
}

impl PhaseFrame {
    /// All angles zero.
    pub fn trivial(num_qubits: usize) -> Self {
        Self { quarter_turns: vec![false; num_qubits] }
    }

    /// Quarter turns on the even-indexed sites, the sublattice that makes the
    /// nearest-neighbour-alternating XY coupling antisymmetric.
    pub fn alternating(num_qubits: usize) -> Self {
        Self { quarter_turns: (0..num_qubits).map(|j| j % 2 == 0).collect() }
    }

    /// Quarter turns where bit `j` of `mask` is set.
    pub fn from_mask(num_qubits: usize, mask: u64) -> Self {
        Self { quarter_turns: (0..num_qubits).map(|j| j < 64 && (mask >> j) & 1 == 1).collect() }
    }

    pub fn from_quarter_turns(quarter_turns: Vec<bool>) -> Self {
        Self { quarter_turns }
    }

    /// Builds a frame from explicit angles. Only `0` and `π/2` are accepted.
    pub fn from_angles(angles: &[f64]) -> Result<Self> {
        let half_pi = core::f64::consts::FRAC_PI_2;
        let quarter_turns = angles
            .iter()
            .map(|&a| {
                if libm::fabs(a) < 1e-9 {
                    Ok(false)
                } else if libm::fabs(a - half_pi) < 1e-9 {
                    Ok(true)
                } else {
                    Err(Error::UnsupportedFrameAngle(a))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { quarter_turns })
    }

    pub fn num_qubits(&self) -> usize {
        self.quarter_turns.len()
    }

    pub fn is_quarter_turn(&self, site: usize) -> bool {
        self.quarter_turns[site]
    }

    pub fn angle(&self, site: usize) -> f64 {
        if self.quarter_turns[site] {
            core::f64::consts::FRAC_PI_2
        } else {
            0.0
        }
    }

    pub fn angles(&self) -> Vec<f64> {
        (0..self.num_qubits()).map(|j| self.angle(j)).collect()
    }

    pub fn is_trivial(&self) -> bool {
        !self.quarter_turns.iter().any(|&q| q)
    }

    /// Bit mask of quarter-turn sites. Sites past 63 are not representable.
    pub fn mask(&self) -> u64 {
        self.quarter_turns.iter().enumerate().filter(|(j, &q)| q && *j < 64).fold(0, |m, (j, _)| m | (1u64 << j))
    }

    /// The frame of a doubled register: both copies of site `j` carry the angle
    /// of site `j`.
    pub fn doubled(&self) -> Self {
        Self { quarter_turns: self.quarter_turns.iter().flat_map(|&q| [q, q]).collect() }
    }

    /// Inverse of [`PhaseFrame::doubled`]; `None` when the two copies disagree.
    pub fn single_copy(&self) -> Option<Self> {
        if self.num_qubits() % 2 != 0 {
            return None;
        }
        let pairs: Vec<bool> = self.quarter_turns.chunks(2).map(|c| c[0]).collect();
        if self.quarter_turns.chunks(2).all(|c| c[0] == c[1]) {
            Some(Self { quarter_turns: pairs })
        } else {
            None
        }
    }

    /// `e^{-i θ·x}`, the factor converting a physical amplitude of basis string
    /// `x` into its frame coefficient.
    pub fn physical_to_frame_phase(&self, x: usize) -> C64 {
        let count = self.quarter_turns.iter().enumerate().filter(|(j, &q)| q && (x >> j) & 1 == 1).count();
        pow_i(4 - (count % 4))
    }

    /// Physical Bell pair on every site that gives the frame Bell state:
    /// `|Φ⁻>` on quarter-turn sites and `|Φ⁺>` elsewhere.
    pub fn natural_pair_signs(&self) -> Vec<PairSign> {
        self.quarter_turns.iter().map(|&q| if q { PairSign::Minus } else { PairSign::Plus }).collect()
    }
}

pub(crate) fn pow_i(k: usize) -> C64 {
    match k % 4 {
        0 => ONE,
        1 => I,
        2 => -ONE,
        _ => -I,
    }
}

/// Sign of a physical Bell pair `(|00> ± |11>)/√2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PairSign {
    Plus,
    Minus,
}

/// The four physical Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellKind {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [BellKind::PhiPlus, BellKind::PhiMinus, BellKind::PsiPlus, BellKind::PsiMinus];

    /// Physical amplitudes in pair order `a + 2b` (copy-1 bit `a`).
    pub fn physical_amplitudes(self) -> [C64; 4] {
        let h = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
        match self {
            BellKind::PhiPlus => [h, ZERO, ZERO, h],
            BellKind::PhiMinus => [h, ZERO, ZERO, -h],
            BellKind::PsiPlus => [ZERO, h, h, ZERO],
            BellKind::PsiMinus => [ZERO, -h, h, ZERO],
        }
    }

    /// Frame coefficients of the pair when both copies carry `quarter_turn`.
    pub fn frame_amplitudes(self, quarter_turn: bool) -> [C64; 4] {
        let mut amps = self.physical_amplitudes();
        if quarter_turn {
            // |1>_phys = -i |1>_frame
            amps[1] *= -I;
            amps[2] *= -I;
            amps[3] *= -ONE;
        }
        amps
    }
}

impl From<PairSign> for BellKind {
    fn from(s: PairSign) -> Self {
        match s {
            PairSign::Plus => BellKind::PhiPlus,
            PairSign::Minus => BellKind::PhiMinus,
        }
    }
}

/// A normalised pure state in the basis of its phase frame.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amps: Vec<C64>,
    frame: PhaseFrame,
}

impl StateVector {
    /// Basis state `|index>` of the frame.
    pub fn basis(frame: PhaseFrame, index: usize) -> Result<Self> {
        let n = frame.num_qubits();
        Budget::default().check(n)?;
        let dim = 1usize << n;
        if index >= dim {
            return Err(invalid("basis index out of range"));
        }
        let mut amps = vec![ZERO; dim];
        amps[index] = ONE;
        Ok(Self { amps, frame })
    }

    /// Equal superposition of all frame basis states.
    pub fn uniform(frame: PhaseFrame) -> Result<Self> {
        let n = frame.num_qubits();
        Budget::default().check(n)?;
        let dim = 1usize << n;
        let a = C64::new(1.0 / libm::sqrt(dim as f64), 0.0);
        Ok(Self { amps: vec![a; dim], frame })
    }

    /// Wraps amplitudes that are already normalised.
    pub fn from_amplitudes(amps: Vec<C64>, frame: PhaseFrame) -> Result<Self> {
        let expected = 1usize << frame.num_qubits();
        if amps.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: amps.len() });
        }
        let norm = norm_of(&amps);
        if libm::fabs(norm - 1.0) > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amps, frame })
    }

    /// Normalises arbitrary nonzero amplitudes.
    pub fn normalized(mut amps: Vec<C64>, frame: PhaseFrame) -> Result<Self> {
        let expected = 1usize << frame.num_qubits();
        if amps.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: amps.len() });
        }
        let norm = norm_of(&amps);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroOperator);
        }
        for a in &mut amps {
            *a /= norm;
        }
        Ok(Self { amps, frame })
    }

    pub(crate) fn from_raw(amps: Vec<C64>, frame: PhaseFrame) -> Self {
        debug_assert_eq!(amps.len(), 1usize << frame.num_qubits());
        Self { amps, frame }
    }

    pub fn num_qubits(&self) -> usize {
        self.frame.num_qubits()
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn frame(&self) -> &PhaseFrame {
        &self.frame
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        norm_of(&self.amps)
    }

    /// `<self|other>`. Both states must share a frame.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.frame != other.frame {
            return Err(invalid("inner product of states in different frames"));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// `|<self|other>|`, comparing the states physically even when their frames
    /// differ.
    pub fn overlap_magnitude(&self, other: &StateVector) -> Result<f64> {
        if self.num_qubits() != other.num_qubits() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        let b = other.to_frame(self.frame.clone());
        Ok(self.inner(&b)?.norm())
    }

    /// The same physical state written in another frame.
    pub fn to_frame(&self, frame: PhaseFrame) -> StateVector {
        assert_eq!(frame.num_qubits(), self.num_qubits());
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(x, &a)| {
                // frame coefficient -> physical -> new frame coefficient
                let phys = a * self.frame.physical_to_frame_phase(x).conj();
                phys * frame.physical_to_frame_phase(x)
            })
            .collect();
        StateVector { amps, frame }
    }

    /// Applies a single-qubit unitary written in this state's frame.
    pub fn apply_local_unitary(&mut self, site: usize, u: &Mat2) -> Result<()> {
        if site >= self.num_qubits() {
            return Err(Error::SiteOutOfRange { site, num_qubits: self.num_qubits() });
        }
        let deviation = mat2_unitarity_error(u);
        if deviation > 1e-10 {
            return Err(Error::NotUnitary { deviation });
        }
        apply_mat2(&mut self.amps, site, u);
        Ok(())
    }

    /// Multiplies amplitude `x` by `phases[x]`. Used for diagonal unitaries.
    pub fn apply_diagonal_phases(&mut self, phases: &[C64]) -> Result<()> {
        if phases.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: phases.len() });
        }
        for (a, p) in self.amps.iter_mut().zip(phases) {
            *a *= p;
        }
        Ok(())
    }
}

pub(crate) fn norm_of(amps: &[C64]) -> f64 {
    libm::sqrt(amps.iter().map(|a| a.norm_sqr()).sum())
}

/// In-place `amps <- (1 ⊗ .. ⊗ m_site ⊗ .. ⊗ 1) amps`; `m` need not be unitary.
pub(crate) fn apply_mat2(amps: &mut [C64], site: usize, m: &Mat2) {
    let bit = 1usize << site;
    for x in 0..amps.len() {
        if x & bit == 0 {
            let (a0, a1) = (amps[x], amps[x | bit]);
            amps[x] = m[0][0] * a0 + m[0][1] * a1;
            amps[x | bit] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
}

/// Product of Bell pairs across two copies of an `n`-qubit system, in the
/// pair-local layout and the doubled frame. `pair_signs[j]` selects the
/// physical pair `|Φ±>` on site `j`; [`PhaseFrame::natural_pair_signs`] gives
/// the frame Bell state.
pub fn bell_state(frame: &PhaseFrame, pair_signs: &[PairSign]) -> Result<StateVector> {
    bell_state_with_budget(frame, pair_signs, Budget::default())
}

pub fn bell_state_with_budget(frame: &PhaseFrame, pair_signs: &[PairSign], budget: Budget) -> Result<StateVector> {
    let n = frame.num_qubits();
    if pair_signs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: pair_signs.len() });
    }
    let kinds: Vec<BellKind> = pair_signs.iter().map(|&s| s.into()).collect();
    pair_product_state(frame, &kinds, budget)
}

/// The frame Bell state `2^{-n/2} Σ_x |x>|x>` in frame coefficients.
pub fn frame_bell_state(frame: &PhaseFrame) -> Result<StateVector> {
    bell_state(frame, &frame.natural_pair_signs())
}

/// Product of arbitrary physical Bell pairs, one per site.
pub fn pair_product_state(frame: &PhaseFrame, kinds: &[BellKind], budget: Budget) -> Result<StateVector> {
    let n = frame.num_qubits();
    if kinds.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: kinds.len() });
    }
    budget.check(2 * n)?;
    let pairs: Vec<[C64; 4]> =
        kinds.iter().enumerate().map(|(j, k)| k.frame_amplitudes(frame.is_quarter_turn(j))).collect();
    let dim = 1usize << (2 * n);
    let mut amps = vec![ZERO; dim];
    for (idx, amp) in amps.iter_mut().enumerate() {
        let mut a = ONE;
        for (j, pair) in pairs.iter().enumerate() {
            a *= pair[(idx >> (2 * j)) & 3];
            if a == ZERO {
                break;
            }
        }
        *amp = a;
    }
    Ok(StateVector::from_raw(amps, frame.doubled()))
}

/// `‖(U ⊗ U*)|Bell> - |Bell>‖` for an `n`-qubit unitary `u`, with both
/// factors applied to the register amplitudes of the trivial-frame Bell
/// state. Zero up to rounding for every unitary.
pub fn isotropic_identity_residual(n: usize, u: &DMatrix<C64>) -> Result<f64> {
    let d = 1usize << n;
    if u.nrows() != d || u.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: u.nrows() });
    }
    let deviation = crate::linalg::unitarity_error(u);
    if deviation > 1e-10 {
        return Err(Error::NotUnitary { deviation });
    }
    let bell = frame_bell_state(&PhaseFrame::trivial(n))?;
    let spread = spread_table(n);
    let idx = |a: usize, b: usize| spread[a] | (spread[b] << 1);
    let psi = bell.amplitudes();
    // Copy 1 first, then the conjugate on copy 2.
    let mut mid = vec![ZERO; d * d];
    for a in 0..d {
        for b in 0..d {
            mid[idx(a, b)] = (0..d).map(|k| u[(a, k)] * psi[idx(k, b)]).sum();
        }
    }
    let mut residual = 0.0;
    for a in 0..d {
        for b in 0..d {
            let out: C64 = (0..d).map(|k| u[(b, k)].conj() * mid[idx(a, k)]).sum();
            residual += (out - psi[idx(a, b)]).norm_sqr();
        }
    }
    Ok(libm::sqrt(residual))
}

/// A Hermitian single-site observable written in some frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalObservable {
    site: usize,
    matrix: Mat2,
}

impl LocalObservable {
    pub fn new(site: usize, matrix: Mat2) -> Result<Self> {
        let deviation = mat2_hermiticity_error(&matrix);
        if deviation > 1e-12 {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { site, matrix })
    }

    /// A Pauli matrix on `site`, expressed in `frame`.
    pub fn pauli(pauli: Pauli, site: usize, frame: &PhaseFrame) -> Result<Self> {
        if site >= frame.num_qubits() {
            return Err(Error::SiteOutOfRange { site, num_qubits: frame.num_qubits() });
        }
        Ok(Self { site, matrix: pauli.matrix_in_frame(frame.is_quarter_turn(site)) })
    }

    pub fn site(&self) -> usize {
        self.site
    }

    pub fn matrix(&self) -> &Mat2 {
        &self.matrix
    }

    /// `Vᵀ`, Hermitian whenever `V` is.
    pub fn transpose(&self) -> Self {
        Self { site: self.site, matrix: mat2_transpose(&self.matrix) }
    }

    /// Eigenvalues (ascending) and eigenvectors.
    pub fn eigen(&self) -> ([f64; 2], [[C64; 2]; 2]) {
        mat2_hermitian_eigen(&self.matrix)
    }
}

/// A real operator that is diagonal in the frame basis, e.g. `σᶻ` or a sum of
/// `σᶻ` terms. Values are indexed by basis string.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalOperator {
    num_qubits: usize,
    values: Vec<f64>,
}

impl DiagonalOperator {
    pub fn from_values(num_qubits: usize, values: Vec<f64>) -> Result<Self> {
        Budget::default().check(num_qubits)?;
        let expected = 1usize << num_qubits;
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, found: values.len() });
        }
        Ok(Self { num_qubits, values })
    }

    pub fn identity(num_qubits: usize) -> Result<Self> {
        Self::from_values(num_qubits, vec![1.0; 1usize << num_qubits])
    }

    /// `σᶻ` on `site`; `+1` on `|0>`.
    pub fn pauli_z(num_qubits: usize, site: usize) -> Result<Self> {
        Self::z_sum(num_qubits, &[site])
    }

    /// `Σ_{j ∈ sites} σᶻ_j`.
    pub fn z_sum(num_qubits: usize, sites: &[usize]) -> Result<Self> {
        if let Some(&site) = sites.iter().find(|&&s| s >= num_qubits) {
            return Err(Error::SiteOutOfRange { site, num_qubits });
        }
        Budget::default().check(num_qubits)?;
        let values = (0..1usize << num_qubits)
            .map(|x| sites.iter().map(|&s| if (x >> s) & 1 == 0 { 1.0 } else { -1.0 }).sum())
            .collect();
        Self::from_values(num_qubits, values)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn trace(&self) -> f64 {
        self.values.iter().sum()
    }

    /// `Tr(W W†)`.
    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn is_unitary(&self) -> bool {
        self.values.iter().all(|v| libm::fabs(libm::fabs(*v) - 1.0) < 1e-12)
    }
}

/// `(W ⊗ 1)|Bell>` in the frame, normalised by `√(Tr(W W†)/2^n)`.
pub fn operator_state(w: &DiagonalOperator, frame: &PhaseFrame) -> Result<StateVector> {
    let n = frame.num_qubits();
    if w.num_qubits() != n {
        return Err(Error::DimensionMismatch { expected: n, found: w.num_qubits() });
    }
    let norm = w.norm_sqr();
    if norm == 0.0 {
        return Err(Error::ZeroOperator);
    }
    Budget::default().check(2 * n)?;
    let scale = 1.0 / libm::sqrt(norm);
    let spread = spread_table(n);
    let mut amps = vec![ZERO; 1usize << (2 * n)];
    for (x, &v) in w.values().iter().enumerate() {
        amps[spread[x] | (spread[x] << 1)] = C64::new(v * scale, 0.0);
    }
    Ok(StateVector::from_raw(amps, frame.doubled()))
}

/// Counts of joint outcomes of measuring `V` on copy 1 and `Vᵀ` on copy 2.
/// `counts[a][b]` counts eigenvalue index `a` of `V` and `b` of `Vᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutcomeCounts {
    pub eigenvalues: [f64; 2],
    pub counts: [[u64; 2]; 2],
}

impl OutcomeCounts {
    pub fn shots(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Sample mean of the product of the two eigenvalues.
    pub fn mean(&self) -> f64 {
        let n = self.shots();
        if n == 0 {
            return 0.0;
        }
        let mut s = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                s += self.counts[a][b] as f64 * self.eigenvalues[a] * self.eigenvalues[b];
            }
        }
        s / n as f64
    }

    /// Standard error of [`OutcomeCounts::mean`]. For ±1 outcomes this is
    /// `√((1 - m²)/(N - 1))`. A single shot reports `1.0`.
    pub fn stderr(&self) -> f64 {
        let n = self.shots();
        if n <= 1 {
            return 1.0;
        }
        let m = self.mean();
        let mut ss = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                let o = self.eigenvalues[a] * self.eigenvalues[b];
                ss += self.counts[a][b] as f64 * (o - m) * (o - m);
            }
        }
        let var = ss / (n - 1) as f64;
        libm::sqrt(var / n as f64)
    }
}

fn check_pair_observable(state: &StateVector, v: &LocalObservable) -> Result<()> {
    let nq = state.num_qubits();
    if nq % 2 != 0 {
        return Err(invalid("state is not a doubled register"));
    }
    if v.site() >= nq / 2 {
        return Err(Error::SiteOutOfRange { site: v.site(), num_qubits: nq / 2 });
    }
    Ok(())
}

/// `<ψ| V ⊗ Vᵀ |ψ>` for a doubled-register state. `V` acts on copy 1.
pub fn expectation_vvt(state: &StateVector, v: &LocalObservable) -> Result<f64> {
    check_pair_observable(state, v)?;
    let m = v.matrix();
    let mt = mat2_transpose(m);
    let b1 = 1usize << (2 * v.site());
    let b2 = b1 << 1;
    let psi = state.amplitudes();
    let mut acc = ZERO;
    for x in 0..psi.len() {
        if x & (b1 | b2) != 0 {
            continue;
        }
        let idx = [x, x | b1, x | b2, x | b1 | b2];
        let local = [psi[idx[0]], psi[idx[1]], psi[idx[2]], psi[idx[3]]];
        for s1 in 0..2 {
            for s2 in 0..2 {
                let mut out = ZERO;
                for r1 in 0..2 {
                    for r2 in 0..2 {
                        out += m[s1][r1] * mt[s2][r2] * local[r1 + 2 * r2];
                    }
                }
                acc += local[s1 + 2 * s2].conj() * out;
            }
        }
    }
    if libm::fabs(acc.im) > IMAG_TOL {
        return Err(Error::NonRealExpectation(acc.im));
    }
    Ok(acc.re)
}

/// Joint outcome probabilities `P(a, b)` for eigenvector `a` of `V` on copy 1
/// and eigenvector `b` of `Vᵀ` on copy 2, with the eigenvalues of `V`.
pub fn vvt_probabilities(state: &StateVector, v: &LocalObservable) -> Result<([f64; 2], [[f64; 2]; 2])> {
    check_pair_observable(state, v)?;
    let (vals, vecs) = v.eigen();
    let b1 = 1usize << (2 * v.site());
    let b2 = b1 << 1;
    let psi = state.amplitudes();
    let mut p = [[0.0; 2]; 2];
    for x in 0..psi.len() {
        if x & (b1 | b2) != 0 {
            continue;
        }
        let local = [psi[x], psi[x | b1], psi[x | b2], psi[x | b1 | b2]];
        for a in 0..2 {
            for b in 0..2 {
                // Eigenvectors of Vᵀ are the complex conjugates of those of V.
                let mut c = ZERO;
                for s1 in 0..2 {
                    for s2 in 0..2 {
                        c += vecs[a][s1].conj() * vecs[b][s2] * local[s1 + 2 * s2];
                    }
                }
                p[a][b] += c.norm_sqr();
            }
        }
    }
    Ok((vals, p))
}

/// Draws `shots` joint outcomes from the probabilities `p`.
pub fn sample_counts(eigenvalues: [f64; 2], p: &[[f64; 2]; 2], shots: u64, rng: &mut impl Rng) -> OutcomeCounts {
    let flat = [p[0][0], p[0][1], p[1][0], p[1][1]];
    let total: f64 = flat.iter().map(|x| x.max(0.0)).sum();
    let mut counts = [[0u64; 2]; 2];
    for _ in 0..shots {
        let mut u = rng.gen::<f64>() * total;
        let mut k = 3;
        for (i, &q) in flat.iter().enumerate() {
            let q = q.max(0.0);
            if u < q {
                k = i;
                break;
            }
            u -= q;
        }
        counts[k / 2][k % 2] += 1;
    }
    OutcomeCounts { eigenvalues, counts }
}

/// Result of a finite-shot estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub counts: OutcomeCounts,
}

/// Simulates `shots` projective measurements of `V ⊗ Vᵀ`.
pub fn sample_vvt(state: &StateVector, v: &LocalObservable, shots: u64, seed: u64) -> Result<SampleEstimate> {
    if shots == 0 {
        return Err(invalid("shots must be positive"));
    }
    let (vals, p) = vvt_probabilities(state, v)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = sample_counts(vals, &p, shots, &mut rng);
    Ok(SampleEstimate { mean: counts.mean(), stderr: counts.stderr(), counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unitarity_error;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn one_qubit_bell_layout() {
        let b = frame_bell_state(&PhaseFrame::trivial(1)).unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(b.amplitudes(), &[c(h, 0.0), ZERO, ZERO, c(h, 0.0)]);
        // The quarter-turn frame Bell state is the physical |Φ⁻>.
        let q = PhaseFrame::from_mask(1, 1);
        let b = frame_bell_state(&q).unwrap();
        assert_eq!(b.amplitudes(), &[c(h, 0.0), ZERO, ZERO, c(h, 0.0)]);
        let phys = b.to_frame(PhaseFrame::trivial(2));
        assert!((phys.amplitudes()[3] - c(-h, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn bell_norm_and_pair_signs() {
        let f = PhaseFrame::alternating(3);
        let signs = [PairSign::Plus, PairSign::Plus, PairSign::Minus];
        let b = bell_state(&f, &signs).unwrap();
        assert!((b.norm() - 1.0).abs() < 1e-12);
        assert_eq!(b.num_qubits(), 6);
        // Site 0 is a quarter turn with |Φ⁺>: the frame |11> coefficient is negative.
        assert!(b.amplitudes()[0b11].re < 0.0);
    }

    #[test]
    fn frame_angles_validated() {
        assert!(PhaseFrame::from_angles(&[0.0, core::f64::consts::FRAC_PI_2]).is_ok());
        assert_eq!(PhaseFrame::from_angles(&[0.3]), Err(Error::UnsupportedFrameAngle(0.3)));
    }

    #[test]
    fn doubled_frame_roundtrip() {
        let f = PhaseFrame::alternating(4);
        assert_eq!(f.doubled().single_copy(), Some(f.clone()));
        assert_eq!(f.doubled().mask(), 0b0011_0011);
        assert_eq!(PhaseFrame::from_mask(2, 0b01).single_copy(), None);
    }

    #[test]
    fn isotropic_identity_for_random_unitary() {
        // A fixed 2-qubit unitary built from a Hermitian generator.
        let g = DMatrix::from_fn(4, 4, |r, c| {
            let x = (r * 7 + c * 3) as f64 * 0.37;
            if r == c {
                c64(libm::sin(x), 0.0)
            } else if r < c {
                c64(libm::cos(x), libm::sin(1.3 * x))
            } else {
                let y = (c * 7 + r * 3) as f64 * 0.37;
                c64(libm::cos(y), -libm::sin(1.3 * y))
            }
        });
        let eig = g.clone().symmetric_eigen();
        let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|e| c64(libm::cos(e), libm::sin(e))));
        let u = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
        assert!(unitarity_error(&u) < 1e-12);
        assert!(isotropic_identity_residual(2, &u).unwrap() < 1e-12);
        assert!(matches!(isotropic_identity_residual(2, &(u * c64(1.1, 0.0))), Err(Error::NotUnitary { .. })));
    }

    fn c64(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn vvt_on_bell_is_one_for_hermitian_v() {
        let f = PhaseFrame::alternating(2);
        let b = frame_bell_state(&f).unwrap();
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            for site in 0..2 {
                let v = LocalObservable::pauli(p, site, &f).unwrap();
                assert!((expectation_vvt(&b, &v).unwrap() - 1.0).abs() < 1e-12);
                let (vals, probs) = vvt_probabilities(&b, &v).unwrap();
                let m: f64 = (0..2)
                    .flat_map(|a| (0..2).map(move |b| (a, b)))
                    .map(|(a, bb)| vals[a] * vals[bb] * probs[a][bb])
                    .sum();
                assert!((m - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stderr_of_single_shot_is_one() {
        let counts = OutcomeCounts { eigenvalues: [-1.0, 1.0], counts: [[0, 0], [0, 1]] };
        assert_eq!(counts.stderr(), 1.0);
        let counts = OutcomeCounts { eigenvalues: [-1.0, 1.0], counts: [[30, 10], [20, 40]] };
        let m = counts.mean();
        assert!((m - 0.4).abs() < 1e-12);
        assert!((counts.stderr() - ((1.0 - m * m) / 99.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn local_unitary_rejects_non_unitary() {
        let mut s = StateVector::basis(PhaseFrame::trivial(1), 0).unwrap();
        let m = [[c(2.0, 0.0), ZERO], [ZERO, ONE]];
        assert!(matches!(s.apply_local_unitary(0, &m), Err(Error::NotUnitary { .. })));
    }
}
