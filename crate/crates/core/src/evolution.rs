//! Exact time evolution.
//!
//! [`diagonalize`] splits the Hamiltonian into the sectors its matrix does not
//! connect (for XY-type couplings these are the fixed-magnetisation sectors)
//! and diagonalises each block densely. Propagators are stored block by block,
//! so `e^{-iHt}` for ten qubits costs a few 252×252 products instead of one
//! 1024×1024 product.
//!
//! Doubled-copy states are evolved through their matrix view: a pair-local
//! state `Σ M_ab |a>_1 |b>_2` maps under `U₁ ⊗ U₂` to `U₁ M U₂ᵀ`.

pub mod lindblad;

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::hamiltonians::{sparse_matrix, HamiltonianSpec};
use crate::linalg::{spread_table, CsrMatrix, Sectors, ONE, ZERO};
use crate::qstate::{PhaseFrame, StateVector};

/// Largest block handed to the dense eigensolver.
pub const MAX_BLOCK_DIM: usize = 4096;
/// Tolerance on the orthonormality of computed eigenvectors.
pub const EIGENVECTOR_TOL: f64 = 1e-10;

/// Per-sector eigendecomposition of a Hamiltonian in a fixed frame.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    num_qubits: usize,
    sectors: Arc<Sectors>,
    values: Vec<Vec<f64>>,
    vectors: Vec<DMatrix<C64>>,
}

/// Diagonalises `h` written in `frame`, block by block.
pub fn diagonalize(h: &HamiltonianSpec, frame: &PhaseFrame) -> Result<SpectralDecomposition> {
    let csr = sparse_matrix(h, frame)?;
    diagonalize_sparse(h.num_qubits(), &csr)
}

pub(crate) fn diagonalize_sparse(num_qubits: usize, csr: &CsrMatrix) -> Result<SpectralDecomposition> {
    let sectors = Sectors::connected_components(csr);
    if sectors.largest() > MAX_BLOCK_DIM {
        return Err(Error::BudgetExceeded { qubits: num_qubits, limit: MAX_BLOCK_DIM.trailing_zeros() as usize });
    }
    let mut values = Vec::with_capacity(sectors.len());
    let mut vectors = Vec::with_capacity(sectors.len());
    for members in sectors.iter() {
        let s = members.len();
        let mut block = DMatrix::<C64>::zeros(s, s);
        for (i, &r) in members.iter().enumerate() {
            for (c, v) in csr.row(r) {
                block[(i, sectors.position(c))] = v;
            }
        }
        let eig = block.symmetric_eigen();
        let q = eig.eigenvectors;
        let err = orthonormality_error(&q);
        if err > EIGENVECTOR_TOL {
            return Err(Error::NotUnitary { deviation: err });
        }
        values.push(eig.eigenvalues.iter().copied().collect());
        vectors.push(q);
    }
    Ok(SpectralDecomposition { num_qubits, sectors: Arc::new(sectors), values, vectors })
}

fn orthonormality_error(q: &DMatrix<C64>) -> f64 {
    let g = q.adjoint() * q;
    let mut m: f64 = 0.0;
    for r in 0..g.nrows() {
        for c in 0..g.ncols() {
            let t = if r == c { ONE } else { ZERO };
            m = m.max((g[(r, c)] - t).norm());
        }
    }
    m
}

impl SpectralDecomposition {
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn sectors(&self) -> &Arc<Sectors> {
        &self.sectors
    }

    /// All eigenvalues, grouped by sector.
    pub fn eigenvalues(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// `e^{-iHt}`.
    pub fn propagator(&self, t: f64) -> Propagator {
        let blocks = self
            .values
            .iter()
            .zip(&self.vectors)
            .map(|(vals, q)| {
                let mut qd = q.clone();
                for (k, &e) in vals.iter().enumerate() {
                    let (s, c) = libm::sincos(-e * t);
                    let phase = C64::new(c, s);
                    for v in qd.column_mut(k).iter_mut() {
                        *v *= phase;
                    }
                }
                qd * q.adjoint()
            })
            .collect();
        Propagator { num_qubits: self.num_qubits, time: t, sectors: self.sectors.clone(), blocks }
    }
}

/// A block-diagonal unitary `e^{-iHt}` on `num_qubits` qubits.
#[derive(Debug, Clone)]
pub struct Propagator {
    num_qubits: usize,
    time: f64,
    sectors: Arc<Sectors>,
    blocks: Vec<DMatrix<C64>>,
}

/// `e^{-iHt}` for `h` written in `frame`; checks unitarity to `1e-10`.
pub fn make_propagator(h: &HamiltonianSpec, frame: &PhaseFrame, t: f64) -> Result<Propagator> {
    let u = diagonalize(h, frame)?.propagator(t);
    let deviation = u.unitarity_error();
    if deviation > EIGENVECTOR_TOL {
        return Err(Error::NotUnitary { deviation });
    }
    Ok(u)
}

impl Propagator {
    pub fn identity(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        Self {
            num_qubits,
            time: 0.0,
            sectors: Arc::new(Sectors::singletons(dim)),
            blocks: vec![DMatrix::from_element(1, 1, ONE); dim],
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.num_qubits
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn sectors(&self) -> &Sectors {
        &self.sectors
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let k = self.sectors.sector_of(r);
        if self.sectors.sector_of(c) != k {
            return ZERO;
        }
        self.blocks[k][(self.sectors.position(r), self.sectors.position(c))]
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for (k, members) in self.sectors.iter().enumerate() {
            for (i, &r) in members.iter().enumerate() {
                for (j, &c) in members.iter().enumerate() {
                    m[(r, c)] = self.blocks[k][(i, j)];
                }
            }
        }
        m
    }

    pub fn adjoint(&self) -> Self {
        Self {
            num_qubits: self.num_qubits,
            time: -self.time,
            sectors: self.sectors.clone(),
            blocks: self.blocks.iter().map(|b| b.adjoint()).collect(),
        }
    }

    /// `max |U† U - 1|`.
    pub fn unitarity_error(&self) -> f64 {
        self.blocks.iter().fold(0.0, |m, b| m.max(orthonormality_error(b)))
    }

    /// Largest imaginary part of any entry; zero when `H` is antisymmetric in
    /// the frame.
    pub fn max_imaginary(&self) -> f64 {
        self.blocks.iter().flat_map(|b| b.iter()).fold(0.0, |m, v| m.max(libm::fabs(v.im)))
    }

    /// `U ψ` for `n`-qubit amplitudes.
    pub fn apply(&self, amps: &[C64]) -> Result<Vec<C64>> {
        if amps.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: amps.len() });
        }
        let mut out = vec![ZERO; amps.len()];
        for (k, members) in self.sectors.iter().enumerate() {
            let b = &self.blocks[k];
            for (i, &r) in members.iter().enumerate() {
                let mut acc = ZERO;
                for (j, &c) in members.iter().enumerate() {
                    acc += b[(i, j)] * amps[c];
                }
                out[r] = acc;
            }
        }
        Ok(out)
    }

    /// Blocks of `U diag(w) U†` for a real diagonal `w`, sharing this
    /// propagator's sectors.
    pub fn conjugate_diagonal(&self, w: &[f64]) -> Result<BlockMatrix> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: w.len() });
        }
        let blocks = self
            .sectors
            .iter()
            .zip(&self.blocks)
            .map(|(members, u)| {
                let mut uw = u.clone();
                for (j, &x) in members.iter().enumerate() {
                    let s = w[x];
                    for v in uw.column_mut(j).iter_mut() {
                        *v *= s;
                    }
                }
                uw * u.adjoint()
            })
            .collect();
        Ok(BlockMatrix { sectors: self.sectors.clone(), blocks })
    }
}

/// A matrix that is block diagonal in a sector partition.
#[derive(Debug, Clone)]
pub struct BlockMatrix {
    sectors: Arc<Sectors>,
    blocks: Vec<DMatrix<C64>>,
}

impl BlockMatrix {
    pub fn sectors(&self) -> &Sectors {
        &self.sectors
    }

    pub fn blocks(&self) -> &[DMatrix<C64>] {
        &self.blocks
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let k = self.sectors.sector_of(r);
        if self.sectors.sector_of(c) != k {
            return ZERO;
        }
        self.blocks[k][(self.sectors.position(r), self.sectors.position(c))]
    }
}

fn check_doubled(state: &StateVector, n: usize) -> Result<()> {
    if state.num_qubits() != 2 * n {
        return Err(Error::DimensionMismatch { expected: 2 * n, found: state.num_qubits() });
    }
    Ok(())
}

/// `(U ⊗ U)|ψ>` on a doubled register.
pub fn evolve_doubled(state: &StateVector, u: &Propagator) -> Result<StateVector> {
    evolve_doubled_pair(state, u, u)
}

/// `(U₁ ⊗ U₂)|ψ>` on a doubled register; the copies may evolve differently.
pub fn evolve_doubled_pair(state: &StateVector, u1: &Propagator, u2: &Propagator) -> Result<StateVector> {
    let n = u1.num_qubits();
    if u2.num_qubits() != n {
        return Err(Error::DimensionMismatch { expected: n, found: u2.num_qubits() });
    }
    check_doubled(state, n)?;
    let spread = spread_table(n);
    let amps = state.amplitudes();
    let mut out = vec![ZERO; amps.len()];
    for (k, rows) in u1.sectors.iter().enumerate() {
        for (l, cols) in u2.sectors.iter().enumerate() {
            let mut m = DMatrix::<C64>::zeros(rows.len(), cols.len());
            let mut nonzero = false;
            for (j, &b) in cols.iter().enumerate() {
                let hi = spread[b] << 1;
                for (i, &a) in rows.iter().enumerate() {
                    let v = amps[spread[a] | hi];
                    if v != ZERO {
                        nonzero = true;
                        m[(i, j)] = v;
                    }
                }
            }
            if !nonzero {
                continue;
            }
            let r = &u1.blocks[k] * m * u2.blocks[l].transpose();
            for (j, &b) in cols.iter().enumerate() {
                let hi = spread[b] << 1;
                for (i, &a) in rows.iter().enumerate() {
                    out[spread[a] | hi] = r[(i, j)];
                }
            }
        }
    }
    Ok(StateVector::from_raw(out, state.frame().clone()))
}

/// `e^{-iHt}|ψ>` for a Hamiltonian on the full register of `state` (e.g. two
/// coupled copies), written in the state's frame.
pub fn evolve_full(state: &StateVector, h: &HamiltonianSpec, t: f64) -> Result<StateVector> {
    let gen = SparseGenerator::new(h, state.frame())?;
    gen.evolve(state, t)
}

/// Sparse Hamiltonian whose action `e^{-iHt}ψ` is evaluated by a truncated
/// Taylor series on short sub-steps. Used for registers too large to
/// diagonalise cheaply; accurate to about `1e-13` in the state.
#[derive(Debug, Clone)]
pub struct SparseGenerator {
    h: CsrMatrix,
    frame: PhaseFrame,
    norm_bound: f64,
}

impl SparseGenerator {
    pub fn new(h: &HamiltonianSpec, frame: &PhaseFrame) -> Result<Self> {
        let csr = sparse_matrix(h, frame)?;
        // The max row sum bounds the spectral norm.
        let norm_bound = (0..csr.dim()).map(|r| csr.row(r).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max);
        Ok(Self { h: csr, frame: frame.clone(), norm_bound })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.h
    }

    pub fn evolve(&self, state: &StateVector, t: f64) -> Result<StateVector> {
        if state.frame() != &self.frame {
            return Err(crate::error::invalid("state frame differs from the generator frame"));
        }
        let mut psi = state.amplitudes().to_vec();
        let steps = libm::ceil(libm::fabs(t) * self.norm_bound).max(1.0) as usize;
        let dt = t / steps as f64;
        let mut term = vec![ZERO; psi.len()];
        let mut next = vec![ZERO; psi.len()];
        for _ in 0..steps {
            // Σ_k (-i H dt)^k / k! with ‖H dt‖ ≤ 1.
            term.copy_from_slice(&psi);
            for k in 1..40 {
                self.h.mul_vec(&term, &mut next);
                let f = C64::new(0.0, -dt / k as f64);
                let mut size = 0.0f64;
                for (tn, nx) in term.iter_mut().zip(&next) {
                    *tn = nx * f;
                    size = size.max(tn.norm());
                }
                for (p, tn) in psi.iter_mut().zip(&term) {
                    *p += tn;
                }
                if size < 1e-17 {
                    break;
                }
            }
        }
        Ok(StateVector::from_raw(psi, state.frame().clone()))
    }
}

/// `‖(1 ⊗ U)|Bell> - (U† ⊗ 1)|Bell>‖`, the time-reversal residual of a
/// propagator. Zero up to rounding when `Uᵀ = U†`, i.e. when the generating
/// Hamiltonian is antisymmetric in `frame`.
pub fn time_reversal_residual(u: &Propagator, frame: &PhaseFrame) -> Result<f64> {
    let n = u.num_qubits();
    let bell = crate::qstate::frame_bell_state(frame)?;
    let id = Propagator::identity(n);
    let a = evolve_doubled_pair(&bell, &id, u)?;
    let b = evolve_doubled_pair(&bell, &u.adjoint(), &id)?;
    Ok(libm::sqrt(a.amplitudes().iter().zip(b.amplitudes()).map(|(x, y)| (x - y).norm_sqr()).sum()))
}
