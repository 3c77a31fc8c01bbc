//! Density matrices and a fixed-step RK4 integrator for
//! `dρ/dt = -i[H, ρ] + γ Σ_j D[σ⁻_j](ρ) + γ_d (Tr ρ · 1/d - ρ)`.
//!
//! `σ⁻ = |0><1|`: `|1>` is the excited state, so a lone excited qubit keeps
//! population `e^{-γt}`. The dissipator is unchanged by the frame phases, since
//! they only multiply `σ⁻` by a unit phase.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::hamiltonians::{sparse_matrix, HamiltonianSpec};
use crate::linalg::{mat2_hermitian_eigen, CsrMatrix, ZERO};
use crate::qstate::{LocalObservable, PhaseFrame, StateVector, IMAG_TOL};

/// Largest register held as a dense density matrix (4096² entries).
pub const MAX_DENSITY_QUBITS: usize = 12;
/// Default step in units of `1/J`.
pub const DEFAULT_DT: f64 = 1e-3;
/// Trace drift at which integration stops with an error.
pub const MAX_TRACE_DRIFT: f64 = 1e-6;

/// Dense Hermitian density matrix, row-major, in the basis of its frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    frame: PhaseFrame,
    data: Vec<C64>,
}

impl DensityMatrix {
    pub fn from_pure(state: &StateVector) -> Result<Self> {
        let n = state.num_qubits();
        if n > MAX_DENSITY_QUBITS {
            return Err(Error::BudgetExceeded { qubits: n, limit: MAX_DENSITY_QUBITS });
        }
        let psi = state.amplitudes();
        let d = psi.len();
        let mut data = vec![ZERO; d * d];
        for a in 0..d {
            for b in 0..d {
                data[a * d + b] = psi[a] * psi[b].conj();
            }
        }
        Ok(Self { frame: state.frame().clone(), data })
    }

    pub fn maximally_mixed(frame: PhaseFrame) -> Result<Self> {
        let n = frame.num_qubits();
        if n > MAX_DENSITY_QUBITS {
            return Err(Error::BudgetExceeded { qubits: n, limit: MAX_DENSITY_QUBITS });
        }
        let d = 1usize << n;
        let mut data = vec![ZERO; d * d];
        for a in 0..d {
            data[a * d + a] = C64::new(1.0 / d as f64, 0.0);
        }
        Ok(Self { frame, data })
    }

    /// Wraps row-major data; checks the shape and Hermiticity.
    pub fn from_row_major(frame: PhaseFrame, data: Vec<C64>) -> Result<Self> {
        let d = 1usize << frame.num_qubits();
        if data.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, found: data.len() });
        }
        let rho = Self { frame, data };
        let deviation = rho.hermiticity_error();
        if deviation > 1e-12 {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(rho)
    }

    pub fn num_qubits(&self) -> usize {
        self.frame.num_qubits()
    }

    pub fn dim(&self) -> usize {
        1usize << self.num_qubits()
    }

    pub fn frame(&self) -> &PhaseFrame {
        &self.frame
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.dim() + c]
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn trace(&self) -> C64 {
        let d = self.dim();
        (0..d).map(|a| self.data[a * d + a]).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut m: f64 = 0.0;
        for a in 0..d {
            for b in a..d {
                m = m.max((self.data[a * d + b] - self.data[b * d + a].conj()).norm());
            }
        }
        m
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |r, c| self.data[r * d + c])
    }

    /// Smallest eigenvalue (dense diagonalisation).
    pub fn min_eigenvalue(&self) -> f64 {
        self.to_dense().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Whether `ρ + tol·1` admits a Cholesky factorisation, i.e. all
    /// eigenvalues are above `-tol`.
    pub fn is_positive_within(&self, tol: f64) -> bool {
        let mut m = self.to_dense();
        for k in 0..m.nrows() {
            m[(k, k)] += C64::new(tol, 0.0);
        }
        m.cholesky().is_some()
    }

    /// `Tr(ρ (V ⊗ Vᵀ))` on a doubled register.
    pub fn expectation_vvt(&self, v: &LocalObservable) -> Result<f64> {
        let (p, vals) = self.vvt_probabilities(v)?;
        let mut s = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                s += vals[a] * vals[b] * p[a][b];
            }
        }
        Ok(s)
    }

    /// Joint outcome probabilities for `V` on copy 1 and `Vᵀ` on copy 2, and
    /// the eigenvalues of `V`.
    pub fn vvt_probabilities(&self, v: &LocalObservable) -> Result<([[f64; 2]; 2], [f64; 2])> {
        let nq = self.num_qubits();
        if nq % 2 != 0 || v.site() >= nq / 2 {
            return Err(invalid("observable does not fit the doubled register"));
        }
        let (vals, vecs) = mat2_hermitian_eigen(v.matrix());
        let b1 = 1usize << (2 * v.site());
        let b2 = b1 << 1;
        let d = self.dim();
        let mut p = [[0.0; 2]; 2];
        let mut imag: f64 = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                // Projector onto e_a ⊗ conj(e_b) in the local pair.
                let f = |s: usize| vecs[a][s & 1] * vecs[b][s >> 1].conj();
                let mut acc = ZERO;
                for x in 0..d {
                    if x & (b1 | b2) != 0 {
                        continue;
                    }
                    let idx = [x, x | b1, x | b2, x | b1 | b2];
                    for (s, &r) in idx.iter().enumerate() {
                        for (t, &c) in idx.iter().enumerate() {
                            // <r|P|c> = f(s) conj(f(t))
                            acc += f(s) * f(t).conj() * self.data[c * d + r];
                        }
                    }
                }
                imag = imag.max(libm::fabs(acc.im));
                p[a][b] = acc.re;
            }
        }
        if imag > IMAG_TOL {
            return Err(Error::NonRealExpectation(imag));
        }
        Ok((p, vals))
    }
}

/// Generator of the master equation on one register.
#[derive(Debug, Clone)]
pub struct LindbladModel {
    h: CsrMatrix,
    frame: PhaseFrame,
    emission_mask: usize,
    emission_rate: f64,
    depolarizing_rate: f64,
}

/// Result of an integration.
#[derive(Debug, Clone)]
pub struct LindbladOutcome {
    pub rho: DensityMatrix,
    /// Largest `|Tr ρ - Tr ρ₀|` seen during the run.
    pub trace_drift: f64,
    pub steps: usize,
}

impl LindbladModel {
    pub fn new(h: &HamiltonianSpec, frame: &PhaseFrame) -> Result<Self> {
        if h.num_qubits() > MAX_DENSITY_QUBITS {
            return Err(Error::BudgetExceeded { qubits: h.num_qubits(), limit: MAX_DENSITY_QUBITS });
        }
        Ok(Self {
            h: sparse_matrix(h, frame)?,
            frame: frame.clone(),
            emission_mask: 0,
            emission_rate: 0.0,
            depolarizing_rate: 0.0,
        })
    }

    /// Adds spontaneous emission `σ⁻_j` at rate `gamma` on each listed qubit.
    pub fn with_emission(mut self, sites: &[usize], gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidStrength { channel: "spontaneous_emission", strength: gamma });
        }
        let n = self.frame.num_qubits();
        for &s in sites {
            if s >= n {
                return Err(Error::SiteOutOfRange { site: s, num_qubits: n });
            }
            self.emission_mask |= 1 << s;
        }
        self.emission_rate = gamma;
        Ok(self)
    }

    /// Adds global depolarisation `γ_d (Tr ρ · 1/d - ρ)`.
    pub fn with_depolarizing(mut self, gamma: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidStrength { channel: "depolarizing", strength: gamma });
        }
        self.depolarizing_rate = gamma;
        Ok(self)
    }

    fn dim(&self) -> usize {
        self.h.dim()
    }

    /// `out = L(ρ)` for Hermitian `ρ`.
    pub fn apply(&self, rho: &[C64], out: &mut [C64]) {
        let d = self.dim();
        // out <- H ρ, row by row.
        for (a, row) in out.chunks_exact_mut(d).enumerate() {
            row.fill(ZERO);
            for (b, h) in self.h.row(a) {
                let src = &rho[b * d..(b + 1) * d];
                for (o, s) in row.iter_mut().zip(src) {
                    *o += h * s;
                }
            }
        }
        // -i(Hρ - ρH) with ρH = (Hρ)† for Hermitian ρ.
        for a in 0..d {
            for b in a..d {
                let x = out[a * d + b];
                let y = out[b * d + a];
                let ab = x - y.conj();
                out[a * d + b] = C64::new(ab.im, -ab.re);
                if a != b {
                    let ba = y - x.conj();
                    out[b * d + a] = C64::new(ba.im, -ba.re);
                }
            }
        }
        if self.emission_rate > 0.0 {
            let g = self.emission_rate;
            let m = self.emission_mask;
            for a in 0..d {
                let pa = (a & m).count_ones() as f64;
                let row = &mut out[a * d..(a + 1) * d];
                for (b, o) in row.iter_mut().enumerate() {
                    let pb = (b & m).count_ones() as f64;
                    *o -= rho[a * d + b] * (0.5 * g * (pa + pb));
                }
                let free = !a & m;
                let mut bits = free;
                while bits != 0 {
                    let e = bits & bits.wrapping_neg();
                    bits ^= e;
                    let src = &rho[(a | e) * d..((a | e) + 1) * d];
                    let row = &mut out[a * d..(a + 1) * d];
                    for b in 0..d {
                        if b & e == 0 {
                            row[b] += src[b | e] * g;
                        }
                    }
                }
            }
        }
        if self.depolarizing_rate > 0.0 {
            let g = self.depolarizing_rate;
            let tr: C64 = (0..d).map(|a| rho[a * d + a]).sum();
            for (o, r) in out.iter_mut().zip(rho) {
                *o -= r * g;
            }
            for a in 0..d {
                out[a * d + a] += tr * (g / d as f64);
            }
        }
    }

    /// Integrates from `t = 0` to `t` with steps of at most `dt`.
    pub fn evolve(&self, rho0: &DensityMatrix, t: f64, dt: f64) -> Result<LindbladOutcome> {
        let mut last = None;
        let drift_steps = self.evolve_observed(rho0, &[t], dt, |_, rho| {
            last = Some(rho.clone());
            Ok(())
        })?;
        Ok(LindbladOutcome { rho: last.expect("one output time"), trace_drift: drift_steps.0, steps: drift_steps.1 })
    }

    /// Integrates through the increasing output `times`, calling `observe` at
    /// each. Returns the largest trace drift and the number of steps.
    pub fn evolve_observed(
        &self,
        rho0: &DensityMatrix,
        times: &[f64],
        dt: f64,
        mut observe: impl FnMut(f64, &DensityMatrix) -> Result<()>,
    ) -> Result<(f64, usize)> {
        if rho0.frame() != &self.frame {
            return Err(invalid("density matrix frame differs from the model frame"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt must be positive"));
        }
        for (k, w) in times.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::TimeGridNotIncreasing(k + 1));
            }
        }
        if times.first().is_some_and(|&t| t < 0.0) {
            return Err(invalid("output times must be non-negative"));
        }
        let d = self.dim();
        let tr0 = rho0.trace();
        let mut rho = rho0.clone();
        let mut k1 = vec![ZERO; d * d];
        let mut k2 = vec![ZERO; d * d];
        let mut tmp = vec![ZERO; d * d];
        let mut acc = vec![ZERO; d * d];
        let mut now = 0.0;
        let mut drift: f64 = 0.0;
        let mut steps = 0;
        for &target in times {
            let span = target - now;
            let n_steps = if span <= 0.0 { 0 } else { libm::ceil(span / dt - 1e-9).max(1.0) as usize };
            let h = if n_steps > 0 { span / n_steps as f64 } else { 0.0 };
            for _ in 0..n_steps {
                let r = &mut rho.data;
                // Classic RK4, accumulating k1 + 2k2 + 2k3 + k4 in `acc`.
                self.apply(r, &mut k1);
                acc.copy_from_slice(&k1);
                axpy_into(&mut tmp, r, &k1, 0.5 * h);
                self.apply(&tmp, &mut k2);
                add_scaled(&mut acc, &k2, 2.0);
                axpy_into(&mut tmp, r, &k2, 0.5 * h);
                self.apply(&tmp, &mut k1);
                add_scaled(&mut acc, &k1, 2.0);
                axpy_into(&mut tmp, r, &k1, h);
                self.apply(&tmp, &mut k2);
                add_scaled(&mut acc, &k2, 1.0);
                add_scaled(r, &acc, h / 6.0);
                steps += 1;
                now += h;
                let dr = (rho.trace() - tr0).norm();
                drift = drift.max(dr);
                if dr > MAX_TRACE_DRIFT {
                    return Err(Error::TraceDrift { drift: dr, time: now, dt: h });
                }
            }
            now = target;
            observe(target, &rho)?;
        }
        Ok((drift, steps))
    }
}

fn axpy_into(out: &mut [C64], x: &[C64], y: &[C64], s: f64) {
    for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
        *o = a + b * s;
    }
}

fn add_scaled(out: &mut [C64], y: &[C64], s: f64) {
    for (o, b) in out.iter_mut().zip(y) {
        *o += b * s;
    }
}

/// Spontaneous emission on the listed qubits at rate `gamma`, integrated to
/// `t` with RK4 steps of at most `dt`.
pub fn lindblad_evolve(
    rho0: &DensityMatrix,
    h: &HamiltonianSpec,
    jumps: &[usize],
    gamma: f64,
    t: f64,
    dt: f64,
) -> Result<LindbladOutcome> {
    LindbladModel::new(h, rho0.frame())?.with_emission(jumps, gamma)?.evolve(rho0, t, dt)
}

/// Largest entrywise change of the final state when the step is halved.
pub fn step_halving_difference(model: &LindbladModel, rho0: &DensityMatrix, t: f64, dt: f64) -> Result<f64> {
    let a = model.evolve(rho0, t, dt)?.rho;
    let b = model.evolve(rho0, t, 0.5 * dt)?.rho;
    Ok(a.data.iter().zip(&b.data).fold(0.0, |m, (x, y)| m.max((x - y).norm())))
}
