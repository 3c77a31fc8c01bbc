//! Variational preparation of purified operator states.
//!
//! For a diagonal `W` on `k` qubits the target is
//! `|W₁> = Σ_x w_x |x> / √Tr(W W†)`. The ansatz starts from `|+>^k` and applies
//! `p` rounds of `e^{iα_j W}` followed by the reflection `U_x = 1 - 2|+><+|`,
//! with `α_1` applied first. Because every gate is a function of `W` or of
//! `|+>`, amplitudes only depend on the eigenvalue `w_x`, and the overlap with
//! the target is a function of the spectrum alone:
//!
//! - `F₀ = E[w] / √E[w²]`
//! - `F₁(α) = (E[w e^{iαw}] - 2 E[w] φ(α)) / √E[w²]` with `φ(α) = E[e^{iαw}]`
//! - `F_p(α_1, …, α_p) = F_{p-1}(α_1 + α_2, α_3, …) - 2 φ(α_1) F_{p-1}(α_2, …)`
//!
//! where `E` averages over the eigenvalues (with degeneracy) or over a
//! continuous eigenvalue density. Copying the prepared state into a second
//! register with CNOTs gives `|W₁₂> = Σ_w f(w) |w>|w>`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{spread_table, ZERO};
use crate::qstate::{DiagonalOperator, PhaseFrame, StateVector};

/// Default width of the Gaussian eigenvalue density. The maximum fidelity
/// does not depend on it, since rescaling `W` rescales the optimal angles.
pub const DEFAULT_GAUSSIAN_SIGMA: f64 = 1.0 / 3.0;

/// Deepest ansatz handled by the optimizer.
pub const MAX_DEPTH: usize = 3;

/// One eigenvalue with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Level {
    pub w: f64,
    pub degeneracy: u64,
}

/// Continuous (or two-point) eigenvalue distributions.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "type", rename_all = "snake_case"))]
pub enum Distribution {
    /// `P(w = high) = q`, `P(w = low) = 1 - q`.
    TwoPoint { low: f64, high: f64, q: f64 },
    /// Flat on `[-1, 1]`.
    Uniform,
    /// Density `1 / (π √(1 - w²))` on `[-1, 1]`.
    Arcsine,
    /// Density `(2/π) √(1 - w²)` on `[-1, 1]`.
    WignerSemicircle,
    /// Centred normal with standard deviation `sigma`.
    Gaussian { sigma: f64 },
}

impl Distribution {
    /// Pauli-like spectrum: `±1` with `P(+1) = q`.
    pub fn bernoulli(q: f64) -> Self {
        Distribution::TwoPoint { low: -1.0, high: 1.0, q }
    }

    /// Parses `uniform`, `arcsine`, `wigner_semicircle` (or `wigner`),
    /// `gaussian` (parameter `σ`, default 1/3) and `bernoulli` (parameter
    /// `q`, default 1/2).
    pub fn from_name(name: &str, param: Option<f64>) -> Result<Self> {
        let d = match name {
            "uniform" => Distribution::Uniform,
            "arcsine" => Distribution::Arcsine,
            "wigner" | "wigner_semicircle" | "semicircle" => Distribution::WignerSemicircle,
            "gaussian" | "normal" => Distribution::Gaussian { sigma: param.unwrap_or(DEFAULT_GAUSSIAN_SIGMA) },
            "bernoulli" => Distribution::bernoulli(param.unwrap_or(0.5)),
            other => return Err(Error::UnknownDistribution(String::from(other))),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Distribution::TwoPoint { .. } => "two_point",
            Distribution::Uniform => "uniform",
            Distribution::Arcsine => "arcsine",
            Distribution::WignerSemicircle => "wigner_semicircle",
            Distribution::Gaussian { .. } => "gaussian",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Distribution::TwoPoint { low, high, q }
                if !(low.is_finite() && high.is_finite() && (0.0..=1.0).contains(&q)) =>
            {
                return Err(invalid("two-point distribution needs finite values and q in [0, 1]"));
            }
            Distribution::Gaussian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                return Err(invalid("gaussian sigma must be positive"));
            }
            _ => {}
        }
        Ok(())
    }

    /// Draws one eigenvalue.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            Distribution::TwoPoint { low, high, q } => {
                if rng.gen::<f64>() < q {
                    high
                } else {
                    low
                }
            }
            Distribution::Uniform => 2.0 * rng.gen::<f64>() - 1.0,
            Distribution::Arcsine => libm::cos(core::f64::consts::PI * rng.gen::<f64>()),
            Distribution::WignerSemicircle => loop {
                let x = 2.0 * rng.gen::<f64>() - 1.0;
                let y = rng.gen::<f64>();
                if y * y + x * x <= 1.0 {
                    break x;
                }
            },
            Distribution::Gaussian { sigma } => {
                let u1 = 1.0 - rng.gen::<f64>();
                let u2 = rng.gen::<f64>();
                sigma * libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
            }
        }
    }
}

/// Eigenvalue content of `W`: either explicit levels of an `n`-qubit operator
/// or a limiting density.
#[derive(Debug, Clone, PartialEq)]
pub enum Spectrum {
    Discrete { num_qubits: usize, levels: Vec<Level> },
    Continuous(Distribution),
}

impl Spectrum {
    /// Checks that degeneracies add up to `2^n` and the operator is nonzero.
    pub fn discrete(num_qubits: usize, levels: Vec<Level>) -> Result<Self> {
        if num_qubits == 0 || num_qubits > 62 {
            return Err(invalid("discrete spectra need between 1 and 62 qubits"));
        }
        let total: u64 = levels.iter().map(|l| l.degeneracy).sum();
        if total != 1u64 << num_qubits {
            return Err(invalid(alloc::format!("degeneracies sum to {total}, expected 2^{num_qubits}")));
        }
        if levels.iter().any(|l| !l.w.is_finite()) {
            return Err(invalid("eigenvalues must be finite"));
        }
        let s = Spectrum::Discrete { num_qubits, levels };
        if s.second_moment() == 0.0 {
            return Err(Error::ZeroOperator);
        }
        Ok(s)
    }

    /// Spectrum of the diagonal entries of `w`, grouping equal values.
    pub fn from_diagonal(w: &DiagonalOperator) -> Result<Self> {
        let mut vals: Vec<f64> = w.values().to_vec();
        vals.sort_by(|a, b| a.total_cmp(b));
        let mut levels: Vec<Level> = Vec::new();
        for v in vals {
            match levels.last_mut() {
                Some(l) if l.w == v => l.degeneracy += 1,
                _ => levels.push(Level { w: v, degeneracy: 1 }),
            }
        }
        Self::discrete(w.num_qubits(), levels)
    }

    pub fn continuous(d: Distribution) -> Result<Self> {
        d.validate()?;
        let s = Spectrum::Continuous(d);
        if s.second_moment() == 0.0 {
            return Err(Error::ZeroOperator);
        }
        Ok(s)
    }

    /// `E[e^{iαw}]`.
    pub fn characteristic(&self, alpha: f64) -> C64 {
        match self {
            Spectrum::Discrete { num_qubits, levels } => {
                let d = (1u64 << num_qubits) as f64;
                levels.iter().map(|l| cis(alpha * l.w) * (l.degeneracy as f64 / d)).sum()
            }
            Spectrum::Continuous(dist) => match *dist {
                Distribution::TwoPoint { low, high, q } => cis(alpha * low) * (1.0 - q) + cis(alpha * high) * q,
                Distribution::Uniform => C64::new(sinc(alpha), 0.0),
                Distribution::Arcsine => C64::new(libm::j0(alpha), 0.0),
                Distribution::WignerSemicircle => {
                    let v = if libm::fabs(alpha) < 1e-6 {
                        1.0 - alpha * alpha / 8.0
                    } else {
                        2.0 * libm::j1(alpha) / alpha
                    };
                    C64::new(v, 0.0)
                }
                Distribution::Gaussian { sigma } => C64::new(libm::exp(-0.5 * alpha * alpha * sigma * sigma), 0.0),
            },
        }
    }

    /// `E[w e^{iαw}]`.
    pub fn weighted_characteristic(&self, alpha: f64) -> C64 {
        let i = C64::new(0.0, 1.0);
        match self {
            Spectrum::Discrete { num_qubits, levels } => {
                let d = (1u64 << num_qubits) as f64;
                levels.iter().map(|l| cis(alpha * l.w) * (l.w * l.degeneracy as f64 / d)).sum()
            }
            Spectrum::Continuous(dist) => match *dist {
                Distribution::TwoPoint { low, high, q } => {
                    cis(alpha * low) * (low * (1.0 - q)) + cis(alpha * high) * (high * q)
                }
                Distribution::Uniform => {
                    let v = if libm::fabs(alpha) < 1e-4 {
                        alpha / 3.0 - alpha * alpha * alpha / 30.0
                    } else {
                        (libm::sin(alpha) - alpha * libm::cos(alpha)) / (alpha * alpha)
                    };
                    i * v
                }
                Distribution::Arcsine => i * libm::j1(alpha),
                Distribution::WignerSemicircle => {
                    let v = if libm::fabs(alpha) < 1e-6 { alpha / 4.0 } else { 2.0 * libm::jn(2, alpha) / alpha };
                    i * v
                }
                Distribution::Gaussian { sigma } => {
                    i * (alpha * sigma * sigma * libm::exp(-0.5 * alpha * alpha * sigma * sigma))
                }
            },
        }
    }

    /// `E[w]`.
    pub fn mean(&self) -> f64 {
        match self {
            Spectrum::Discrete { num_qubits, levels } => {
                let d = (1u64 << num_qubits) as f64;
                levels.iter().map(|l| l.w * l.degeneracy as f64 / d).sum()
            }
            Spectrum::Continuous(Distribution::TwoPoint { low, high, q }) => low * (1.0 - q) + high * q,
            Spectrum::Continuous(_) => 0.0,
        }
    }

    /// `E[w²] = Tr(W W†) / 2^n`.
    pub fn second_moment(&self) -> f64 {
        match self {
            Spectrum::Discrete { num_qubits, levels } => {
                let d = (1u64 << num_qubits) as f64;
                levels.iter().map(|l| l.w * l.w * l.degeneracy as f64 / d).sum()
            }
            Spectrum::Continuous(dist) => match *dist {
                Distribution::TwoPoint { low, high, q } => low * low * (1.0 - q) + high * high * q,
                Distribution::Uniform => 1.0 / 3.0,
                Distribution::Arcsine => 0.5,
                Distribution::WignerSemicircle => 0.25,
                Distribution::Gaussian { sigma } => sigma * sigma,
            },
        }
    }
}

fn cis(x: f64) -> C64 {
    let (s, c) = libm::sincos(x);
    C64::new(c, s)
}

fn sinc(x: f64) -> f64 {
    if libm::fabs(x) < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        libm::sin(x) / x
    }
}

/// Spectrum of `Σ_{j<k} σᶻ_j` on `n` qubits: level `k - 2m` with degeneracy `C(k, m) 2^{n-k}`.
pub fn spectrum_of_zsum(k: usize, n: usize) -> Result<Spectrum> {
    if k == 0 || k > n {
        return Err(invalid("zsum needs 1 <= k <= n"));
    }
    if n > 62 {
        return Err(invalid("zsum supports at most 62 qubits"));
    }
    let mut levels = Vec::with_capacity(k + 1);
    let mut binom: u64 = 1;
    for m in 0..=k {
        levels.push(Level { w: (k as f64) - 2.0 * m as f64, degeneracy: binom << (n - k) });
        binom = binom * (k - m) as u64 / (m as u64 + 1);
    }
    Spectrum::discrete(n, levels)
}

/// Angles `α_1, …, α_p` of the ansatz, `α_1` applied first.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnsatzParams {
    pub alphas: Vec<f64>,
}

impl AnsatzParams {
    pub fn new(alphas: Vec<f64>) -> Self {
        Self { alphas }
    }

    pub fn depth(&self) -> usize {
        self.alphas.len()
    }
}

/// Complex overlap `<W₁|ψ_p>` with its magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fidelity {
    pub overlap: C64,
}

impl Fidelity {
    pub fn magnitude(&self) -> f64 {
        self.overlap.norm()
    }
}

/// `F₀ = E[w] / √E[w²]`, the overlap of `|+>` with the target.
pub fn fidelity_f0(s: &Spectrum) -> Result<Fidelity> {
    let m2 = s.second_moment();
    if m2 == 0.0 {
        return Err(Error::ZeroOperator);
    }
    Ok(Fidelity { overlap: C64::new(s.mean() / libm::sqrt(m2), 0.0) })
}

/// Analytic `F_p` from the recursion.
pub fn fidelity_fp(s: &Spectrum, params: &AnsatzParams) -> Result<Fidelity> {
    let m2 = s.second_moment();
    if m2 == 0.0 {
        return Err(Error::ZeroOperator);
    }
    if params.alphas.iter().any(|a| !a.is_finite()) {
        return Err(invalid("angles must be finite"));
    }
    let inv = 1.0 / libm::sqrt(m2);
    let mean = s.mean();
    Ok(Fidelity { overlap: fp_recursive(s, mean, inv, &params.alphas) })
}

fn fp_recursive(s: &Spectrum, mean: f64, inv_norm: f64, alphas: &[f64]) -> C64 {
    match alphas.len() {
        0 => C64::new(mean * inv_norm, 0.0),
        1 => (s.weighted_characteristic(alphas[0]) - s.characteristic(alphas[0]) * (2.0 * mean)) * inv_norm,
        _ => {
            let mut merged = Vec::with_capacity(alphas.len() - 1);
            merged.push(alphas[0] + alphas[1]);
            merged.extend_from_slice(&alphas[2..]);
            fp_recursive(s, mean, inv_norm, &merged)
                - s.characteristic(alphas[0]) * 2.0 * fp_recursive(s, mean, inv_norm, &alphas[1..])
        }
    }
}

/// Search settings of [`optimize_alphas`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    /// Grid points per angle; `None` picks 512, 128 or 48 for depth 1, 2, 3.
    pub grid_points: Option<usize>,
    /// Angles are searched in `[lower, upper)`.
    pub lower: f64,
    pub upper: f64,
    /// Number of best grid points refined with Nelder-Mead.
    pub refine_starts: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        // Continuous spectra have no period in α, and their optima sit at
        // negative as well as positive angles.
        let two_pi = 2.0 * core::f64::consts::PI;
        Self { grid_points: None, lower: -two_pi, upper: two_pi, refine_starts: 6 }
    }
}

/// Optimal angles found by [`optimize_alphas`].
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub params: AnsatzParams,
    pub fidelity: f64,
}

/// Maximises `|F_p|` by a grid search followed by Nelder-Mead refinement.
pub fn optimize_alphas(s: &Spectrum, p: usize) -> Result<Optimum> {
    optimize_alphas_with(s, p, &OptimizerOptions::default())
}

pub fn optimize_alphas_with(s: &Spectrum, p: usize, opts: &OptimizerOptions) -> Result<Optimum> {
    if p > MAX_DEPTH {
        return Err(invalid(alloc::format!("depth {p} exceeds the supported maximum of {MAX_DEPTH}")));
    }
    if !(opts.upper > opts.lower) {
        return Err(invalid("empty angle range"));
    }
    let f = |a: &[f64]| -> f64 { fidelity_fp(s, &AnsatzParams::new(a.to_vec())).map(|f| f.magnitude()).unwrap_or(0.0) };
    if p == 0 {
        return Ok(Optimum { params: AnsatzParams::new(vec![]), fidelity: fidelity_f0(s)?.magnitude() });
    }
    let g = opts.grid_points.unwrap_or(match p {
        1 => 512,
        2 => 128,
        _ => 48,
    });
    if g < 2 {
        return Err(invalid("grid needs at least two points per angle"));
    }
    let step = (opts.upper - opts.lower) / g as f64;
    let total = g.pow(p as u32);
    let keep = opts.refine_starts.max(1);
    let mut best: Vec<(f64, Vec<f64>)> = Vec::with_capacity(keep + 1);
    let mut point = vec![0.0; p];
    for idx in 0..total {
        let mut r = idx;
        for a in point.iter_mut() {
            *a = opts.lower + step * (r % g) as f64;
            r /= g;
        }
        let v = f(&point);
        if best.len() < keep || v > best[best.len() - 1].0 {
            let pos = best.iter().position(|b| v > b.0).unwrap_or(best.len());
            best.insert(pos, (v, point.clone()));
            best.truncate(keep);
        }
    }
    let mut out = best[0].clone();
    for (_, start) in &best {
        let (x, v) = nelder_mead(|a| -f(a), start, 0.5 * step, 4000);
        if -v > out.0 {
            out = (-v, x);
        }
    }
    Ok(Optimum { params: AnsatzParams::new(out.1), fidelity: out.0 })
}

/// Minimises `f` from `start` with an initial simplex of size `scale`.
fn nelder_mead(f: impl Fn(&[f64]) -> f64, start: &[f64], scale: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let dim = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), f(start)));
    for k in 0..dim {
        let mut x = start.to_vec();
        x[k] += scale;
        let v = f(&x);
        simplex.push((x, v));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[dim].1 - simplex[0].1;
        let size = simplex
            .iter()
            .skip(1)
            .map(|s| s.0.iter().zip(&simplex[0].0).map(|(a, b)| libm::fabs(a - b)).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread < 1e-15 && size < 1e-10 {
            break;
        }
        let mut centroid = vec![0.0; dim];
        for s in &simplex[..dim] {
            for (c, x) in centroid.iter_mut().zip(&s.0) {
                *c += x / dim as f64;
            }
        }
        let worst = simplex[dim].clone();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };
        let xr = along(1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = f(&xe);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < worst.1.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for s in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = s.0.iter().zip(&best).map(|(a, b)| b + 0.5 * (a - b)).collect();
                    let v = f(&x);
                    *s = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, v)
}

/// `|F₂|` on an `points × points` grid of `(α_1, α_2)` over `[lower, upper)`.
/// Rows are `(α_1, α_2, |F₂|)`.
pub fn landscape(s: &Spectrum, points: usize, lower: f64, upper: f64) -> Result<Vec<(f64, f64, f64)>> {
    if points < 2 || !(upper > lower) {
        return Err(invalid("landscape needs at least two points and a nonempty range"));
    }
    let step = (upper - lower) / (points - 1) as f64;
    let mut rows = Vec::with_capacity(points * points);
    for i in 0..points {
        for j in 0..points {
            let a = [lower + step * i as f64, lower + step * j as f64];
            rows.push((a[0], a[1], fidelity_fp(s, &AnsatzParams::new(a.to_vec()))?.magnitude()));
        }
    }
    Ok(rows)
}

fn check_support(w: &DiagonalOperator, n: usize) -> Result<()> {
    if w.num_qubits() > n {
        return Err(invalid("the register is smaller than the support of W"));
    }
    crate::qstate::Budget::default().check(n)
}

/// The ansatz state on `n` qubits for `W` supported on qubits `0..k`, in the
/// trivial frame. Qubits outside the support stay in `|+>`.
pub fn build_ansatz_state(w: &DiagonalOperator, params: &AnsatzParams, n: usize) -> Result<StateVector> {
    check_support(w, n)?;
    let k = w.num_qubits();
    let block = 1usize << k;
    let dim = 1usize << n;
    let mut amps = vec![C64::new(1.0 / libm::sqrt(dim as f64), 0.0); dim];
    let vals = w.values();
    let inv_sqrt_block = 1.0 / libm::sqrt(block as f64);
    for &alpha in &params.alphas {
        for (x, a) in amps.iter_mut().enumerate() {
            *a *= cis(alpha * vals[x & (block - 1)]);
        }
        // U_x = 1 - 2|+><+| on the support, once per configuration of the rest.
        for chunk in amps.chunks_exact_mut(block) {
            let overlap: C64 = chunk.iter().sum::<C64>() * inv_sqrt_block;
            let shift = overlap * (2.0 * inv_sqrt_block);
            for a in chunk.iter_mut() {
                *a -= shift;
            }
        }
    }
    StateVector::from_amplitudes(amps, PhaseFrame::trivial(n))
}

/// `|W₁> = Σ_x w(x) |x> / √Tr(W W†)` on `n` qubits, trivial frame.
pub fn w1_target(w: &DiagonalOperator, n: usize) -> Result<StateVector> {
    check_support(w, n)?;
    let block = 1usize << w.num_qubits();
    let amps = (0..1usize << n).map(|x| C64::new(w.values()[x & (block - 1)], 0.0)).collect();
    StateVector::normalized(amps, PhaseFrame::trivial(n))
}

/// `<W₁|ψ_p>` evaluated by simulating the circuit.
pub fn circuit_fidelity(w: &DiagonalOperator, params: &AnsatzParams) -> Result<Fidelity> {
    let n = w.num_qubits();
    let psi = build_ansatz_state(w, params, n)?;
    let target = w1_target(w, n)?;
    Ok(Fidelity { overlap: target.inner(&psi)? })
}

/// Copies the basis string of every amplitude into a second register:
/// `Σ_x ψ_x |x>` becomes `Σ_x ψ_x |x>|x>` in the pair-local layout, with both
/// copies written in `frame`.
pub fn extend_to_w12(state: &StateVector, frame: &PhaseFrame) -> Result<StateVector> {
    let n = state.num_qubits();
    if frame.num_qubits() != n {
        return Err(Error::DimensionMismatch { expected: n, found: frame.num_qubits() });
    }
    crate::qstate::Budget::default().check(2 * n)?;
    let spread = spread_table(n);
    let mut amps = vec![ZERO; 1usize << (2 * n)];
    for (x, &a) in state.amplitudes().iter().enumerate() {
        amps[spread[x] | (spread[x] << 1)] = a;
    }
    StateVector::from_amplitudes(amps, frame.doubled())
}

/// [`extend_to_w12`] followed by `U ⊗ U*`, which purifies the non-diagonal
/// operator `U W U†` from the diagonal `W` that prepared `state`.
pub fn extend_to_w12_rotated(state: &StateVector, frame: &PhaseFrame, u: &DMatrix<C64>) -> Result<StateVector> {
    let n = state.num_qubits();
    let d = 1usize << n;
    if u.nrows() != d || u.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, found: u.nrows() });
    }
    let deviation = crate::linalg::unitarity_error(u);
    if deviation > 1e-10 {
        return Err(Error::NotUnitary { deviation });
    }
    // Σ_x ψ_x |x>|x> has matrix view diag(ψ); (U ⊗ U*) maps it to U diag(ψ) U†.
    let m = u * DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(state.amplitudes())) * u.adjoint();
    let spread = spread_table(n);
    let mut amps = vec![ZERO; d * d];
    for a in 0..d {
        for b in 0..d {
            amps[spread[a] | (spread[b] << 1)] = m[(a, b)];
        }
    }
    StateVector::normalized(amps, frame.doubled())
}

/// Largest difference between amplitudes of basis states that share an
/// eigenvalue of `W`; zero for any ansatz state.
pub fn max_degenerate_spread(state: &StateVector, w: &DiagonalOperator) -> f64 {
    let block = 1usize << w.num_qubits();
    let mut order: Vec<usize> = (0..state.dim()).collect();
    let key = |x: usize| w.values()[x & (block - 1)];
    order.sort_by(|&a, &b| key(a).total_cmp(&key(b)));
    let amps = state.amplitudes();
    let mut spread: f64 = 0.0;
    let mut start = 0;
    for i in 1..=order.len() {
        if i == order.len() || key(order[i]) != key(order[start]) {
            for &x in &order[start..i] {
                spread = spread.max((amps[x] - amps[order[start]]).norm());
            }
            start = i;
        }
    }
    spread
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_spectrum_reaches_unit_fidelity() {
        let s = Spectrum::continuous(Distribution::bernoulli(0.5)).unwrap();
        assert!(fidelity_f0(&s).unwrap().magnitude() < 1e-15);
        let f = fidelity_fp(&s, &AnsatzParams::new(vec![core::f64::consts::FRAC_PI_2])).unwrap();
        assert!((f.magnitude() - 1.0).abs() < 1e-12);
        let o = optimize_alphas(&s, 1).unwrap();
        assert!((o.fidelity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_one_bernoulli_is_capped() {
        // On {0, 1} with q = 1/2 the p = 1 overlap magnitude is 1/√2 at every angle.
        let s = Spectrum::continuous(Distribution::TwoPoint { low: 0.0, high: 1.0, q: 0.5 }).unwrap();
        assert!((fidelity_f0(&s).unwrap().magnitude() - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        for a in [0.1, 1.0, 2.5] {
            let f = fidelity_fp(&s, &AnsatzParams::new(vec![a])).unwrap().magnitude();
            assert!((f - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        }
    }

    #[test]
    fn zsum_levels() {
        let s = spectrum_of_zsum(3, 4).unwrap();
        match &s {
            Spectrum::Discrete { levels, .. } => {
                let w: Vec<f64> = levels.iter().map(|l| l.w).collect();
                let g: Vec<u64> = levels.iter().map(|l| l.degeneracy).collect();
                assert_eq!(w, vec![3.0, 1.0, -1.0, -3.0]);
                assert_eq!(g, vec![2, 6, 6, 2]);
            }
            _ => unreachable!(),
        }
        assert!((s.second_moment() - 3.0).abs() < 1e-15);
        assert!(s.mean().abs() < 1e-15);
    }

    #[test]
    fn characteristic_functions_match_quadrature() {
        // Midpoint rule on the densities, with the substitution w = cos θ for
        // the arcsine law.
        let n = 200_000;
        for (dist, density) in [
            (Distribution::Uniform, (|_: f64| 0.5) as fn(f64) -> f64),
            (Distribution::WignerSemicircle, |w: f64| 2.0 / core::f64::consts::PI * libm::sqrt(1.0 - w * w)),
        ] {
            let s = Spectrum::continuous(dist).unwrap();
            for alpha in [0.0, 0.7, 3.1, -5.0] {
                let (mut phi, mut g) = (ZERO, ZERO);
                for k in 0..n {
                    let w = -1.0 + (k as f64 + 0.5) * 2.0 / n as f64;
                    let c = cis(alpha * w) * density(w) * (2.0 / n as f64);
                    phi += c;
                    g += c * w;
                }
                assert!((phi - s.characteristic(alpha)).norm() < 1e-8, "{dist:?} {alpha}");
                assert!((g - s.weighted_characteristic(alpha)).norm() < 1e-8, "{dist:?} {alpha}");
            }
        }
        let s = Spectrum::continuous(Distribution::Arcsine).unwrap();
        for alpha in [0.4, 2.2] {
            let (mut phi, mut g) = (ZERO, ZERO);
            for k in 0..n {
                let w = libm::cos(core::f64::consts::PI * (k as f64 + 0.5) / n as f64);
                phi += cis(alpha * w) / n as f64;
                g += cis(alpha * w) * w / n as f64;
            }
            assert!((phi - s.characteristic(alpha)).norm() < 1e-9);
            assert!((g - s.weighted_characteristic(alpha)).norm() < 1e-9);
        }
    }

    #[test]
    fn grover_special_case() {
        // W = projector on m marked states of n qubits; α_j = π gives
        // (-1)^p times the Grover iterate.
        let n = 5;
        let marked = [3usize, 17, 29];
        let mut vals = vec![0.0; 1 << n];
        for &m in &marked {
            vals[m] = 1.0;
        }
        let w = DiagonalOperator::from_values(n, vals).unwrap();
        let theta = libm::asin(libm::sqrt(marked.len() as f64 / 32.0));
        for p in 1..=3 {
            let psi = build_ansatz_state(&w, &AnsatzParams::new(vec![core::f64::consts::PI; p]), n).unwrap();
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            let good = sign * libm::sin((2 * p + 1) as f64 * theta) / libm::sqrt(marked.len() as f64);
            let bad = sign * libm::cos((2 * p + 1) as f64 * theta) / libm::sqrt((32 - marked.len()) as f64);
            for x in 0..32 {
                let expected = if marked.contains(&x) { good } else { bad };
                assert!((psi.amplitudes()[x] - C64::new(expected, 0.0)).norm() < 1e-12, "p={p} x={x}");
            }
        }
    }

    #[test]
    fn analytic_matches_circuit() {
        let w = DiagonalOperator::from_values(3, vec![0.3, -1.2, 0.3, 2.0, -0.5, 0.0, 1.1, -0.7]).unwrap();
        let s = Spectrum::from_diagonal(&w).unwrap();
        for alphas in [vec![], vec![0.4], vec![1.3, -0.2], vec![0.9, 2.1, -1.7]] {
            let p = AnsatzParams::new(alphas);
            let a = fidelity_fp(&s, &p).unwrap().overlap;
            let b = circuit_fidelity(&w, &p).unwrap().overlap;
            assert!((a - b).norm() < 1e-12, "{a} {b}");
        }
    }

    #[test]
    fn ansatz_amplitudes_depend_on_eigenvalue_only() {
        let w = DiagonalOperator::z_sum(4, &[0, 1, 2]).unwrap();
        let psi = build_ansatz_state(&w, &AnsatzParams::new(vec![0.3, 1.9]), 5).unwrap();
        assert!(max_degenerate_spread(&psi, &w) < 1e-14);
    }

    #[test]
    fn depth_limit() {
        let s = Spectrum::continuous(Distribution::Uniform).unwrap();
        assert!(optimize_alphas(&s, 4).is_err());
        assert!((optimize_alphas(&s, 0).unwrap().fidelity).abs() < 1e-15);
    }
}
