//! OTOCs from the trace definition and from the Bell-pair protocol.
//!
//! For a diagonal `W` and a local Hermitian `V`, the normalised correlator is
//! `O(t) = Tr(W V(t) W V(t)) / Tr(W W†)` with `V(t) = e^{iHt} V e^{-iHt}`.
//! The protocol prepares `|W₁₂> ∝ (W ⊗ 1)|Bell>`, evolves both copies with
//! `e^{-iHt}` and measures `V ⊗ Vᵀ`; the two agree whenever `Hᵀ = -H` in the
//! working frame. The same measurement on `|Bell>` itself gives the baseline
//! `O′`, which is exactly 1 in that case.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::evolution::{diagonalize, evolve_doubled, BlockMatrix, Propagator, SpectralDecomposition};
use crate::hamiltonians::{antisymmetry_report, find_phase_frame, AntisymmetryReport, HamiltonianSpec, Pauli};
use crate::linalg::ZERO;
use crate::qstate::{
    frame_bell_state, operator_state, sample_counts, vvt_probabilities, DiagonalOperator, LocalObservable, PhaseFrame,
    StateVector, IMAG_TOL,
};

/// Baselines closer to zero than this make `O̅ = O_est / O′` undefined.
pub const MIN_BASELINE: f64 = 1e-6;

/// `O̅ = estimate / baseline`.
pub fn otoc_rescaled(estimate: f64, baseline: f64) -> Result<f64> {
    if !(libm::fabs(baseline) > MIN_BASELINE) {
        return Err(Error::UndefinedRatio(baseline));
    }
    Ok(estimate / baseline)
}

/// `Tr(K V K V)` for block-diagonal `K = U W U†`.
fn trace_kvkv(k: &BlockMatrix, v: &LocalObservable) -> Result<f64> {
    let m = v.matrix();
    let bit = 1usize << v.site();
    let sectors = k.sectors();
    let mut acc = ZERO;
    for (block, members) in k.blocks().iter().zip(sectors.iter()) {
        for (i, &a) in members.iter().enumerate() {
            let aj = (a & bit != 0) as usize;
            for (l, &b) in members.iter().enumerate() {
                let kab = block[(i, l)];
                if kab == ZERO {
                    continue;
                }
                let bj = (b & bit != 0) as usize;
                // (V K V)_{ba} = Σ_{s,r} V[b_j][s] K[b(s), a(r)] V[r][a_j]
                let mut vkv = ZERO;
                for s in 0..2 {
                    let bs = (b & !bit) | (s * bit);
                    let vbs = m[bj][s];
                    if vbs == ZERO {
                        continue;
                    }
                    for (r, row) in m.iter().enumerate() {
                        let ar = (a & !bit) | (r * bit);
                        let vra = row[aj];
                        if vra == ZERO {
                            continue;
                        }
                        vkv += vbs * k.get(bs, ar) * vra;
                    }
                }
                acc += kab * vkv;
            }
        }
    }
    let scale = acc.norm().max(1.0);
    if libm::fabs(acc.im) > IMAG_TOL * scale {
        return Err(Error::NonRealExpectation(acc.im));
    }
    Ok(acc.re)
}

/// Normalised `Tr(W V(t) W V(t)) / Tr(W W†)` for every `V` in `vs`, with
/// `U = e^{-iHt}` given.
pub fn exact_trace_with_propagator(u: &Propagator, w: &DiagonalOperator, vs: &[LocalObservable]) -> Result<Vec<f64>> {
    check_sizes(u.num_qubits(), w, vs)?;
    let norm = w.norm_sqr();
    if norm == 0.0 {
        return Err(Error::ZeroOperator);
    }
    // V(t) = U† V U, so Tr(W V(t) W V(t)) = Tr(K V K V) with K = U W U†.
    let k = u.conjugate_diagonal(w.values())?;
    vs.iter().map(|v| Ok(trace_kvkv(&k, v)? / norm)).collect()
}

fn check_sizes(n: usize, w: &DiagonalOperator, vs: &[LocalObservable]) -> Result<()> {
    if w.num_qubits() != n {
        return Err(Error::DimensionMismatch { expected: n, found: w.num_qubits() });
    }
    if let Some(v) = vs.iter().find(|v| v.site() >= n) {
        return Err(Error::SiteOutOfRange { site: v.site(), num_qubits: n });
    }
    Ok(())
}

/// Diagonalised Hamiltonian plus frame, reused across times and operators.
#[derive(Debug, Clone)]
pub struct OtocEngine {
    frame: PhaseFrame,
    spectral: SpectralDecomposition,
    antisymmetry: AntisymmetryReport,
}

impl OtocEngine {
    pub fn new(h: &HamiltonianSpec, frame: &PhaseFrame) -> Result<Self> {
        let antisymmetry = antisymmetry_report(h, frame)?;
        let spectral = diagonalize(h, frame)?;
        Ok(Self { frame: frame.clone(), spectral, antisymmetry })
    }

    pub fn num_qubits(&self) -> usize {
        self.frame.num_qubits()
    }

    pub fn frame(&self) -> &PhaseFrame {
        &self.frame
    }

    pub fn antisymmetry(&self) -> AntisymmetryReport {
        self.antisymmetry
    }

    pub fn spectral(&self) -> &SpectralDecomposition {
        &self.spectral
    }

    pub fn propagator(&self, t: f64) -> Propagator {
        self.spectral.propagator(t)
    }

    /// Trace-definition OTOCs at time `t`.
    pub fn exact(&self, w: &DiagonalOperator, vs: &[LocalObservable], t: f64) -> Result<Vec<f64>> {
        exact_trace_with_propagator(&self.propagator(t), w, vs)
    }

    /// `(U ⊗ U)|W₁₂>`.
    pub fn protocol_state(&self, w: &DiagonalOperator, t: f64) -> Result<StateVector> {
        evolve_doubled(&operator_state(w, &self.frame)?, &self.propagator(t))
    }

    /// Protocol OTOCs `<W₁₂(t)| V ⊗ Vᵀ |W₁₂(t)>` at time `t`.
    pub fn protocol(&self, w: &DiagonalOperator, vs: &[LocalObservable], t: f64) -> Result<Vec<f64>> {
        let psi = self.protocol_state(w, t)?;
        vs.iter().map(|v| crate::qstate::expectation_vvt(&psi, v)).collect()
    }
}

/// Result of a protocol evaluation with its antisymmetry diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolValue {
    pub value: f64,
    /// `false` when `Hᵀ = -H` fails in the frame, so the value need not equal
    /// the trace OTOC.
    pub antisymmetric: bool,
    pub max_violation: f64,
}

/// `Tr(σᶻ_w σˣ_v(t) σᶻ_w σˣ_v(t)) / 2^n`, the reference value.
pub fn otoc_exact_trace(h: &HamiltonianSpec, frame: &PhaseFrame, w_site: usize, v_site: usize, t: f64) -> Result<f64> {
    let w = DiagonalOperator::pauli_z(h.num_qubits(), w_site)?;
    let v = LocalObservable::pauli(Pauli::X, v_site, frame)?;
    let u = diagonalize(h, frame)?.propagator(t);
    Ok(exact_trace_with_propagator(&u, &w, &[v])?[0])
}

/// The Bell-pair protocol estimate of the same correlator.
pub fn otoc_protocol(
    h: &HamiltonianSpec,
    frame: &PhaseFrame,
    w_site: usize,
    v_site: usize,
    t: f64,
) -> Result<ProtocolValue> {
    let engine = OtocEngine::new(h, frame)?;
    let w = DiagonalOperator::pauli_z(h.num_qubits(), w_site)?;
    let v = LocalObservable::pauli(Pauli::X, v_site, frame)?;
    let value = engine.protocol(&w, &[v], t)?[0];
    let report = engine.antisymmetry();
    Ok(ProtocolValue { value, antisymmetric: report.holds, max_violation: report.max_violation })
}

/// Joint outcome distribution of a `V ⊗ Vᵀ` measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub eigenvalues: [f64; 2],
    pub probabilities: [[f64; 2]; 2],
}

impl Measurement {
    pub fn of_state(state: &StateVector, v: &LocalObservable) -> Result<Self> {
        let (eigenvalues, probabilities) = vvt_probabilities(state, v)?;
        Ok(Self { eigenvalues, probabilities })
    }

    /// Expectation value of the eigenvalue product.
    pub fn value(&self) -> f64 {
        let mut s = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                s += self.eigenvalues[a] * self.eigenvalues[b] * self.probabilities[a][b];
            }
        }
        s
    }

    /// Mixes with the uniform distribution: weight `keep` on `self`.
    pub fn depolarized(&self, keep: f64) -> Self {
        let mut p = self.probabilities;
        for row in &mut p {
            for q in row.iter_mut() {
                *q = keep * *q + (1.0 - keep) * 0.25;
            }
        }
        Self { eigenvalues: self.eigenvalues, probabilities: p }
    }

    /// Each recorded outcome is flipped to the other eigenvalue with
    /// probability `x`, independently on both copies.
    pub fn with_readout_error(&self, x: f64) -> Self {
        let keep = [1.0 - x, x];
        let mut p = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                for fa in 0..2 {
                    for fb in 0..2 {
                        p[a ^ fa][b ^ fb] += self.probabilities[a][b] * keep[fa] * keep[fb];
                    }
                }
            }
        }
        Self { eigenvalues: self.eigenvalues, probabilities: p }
    }
}

/// Finite-shot statistics of one estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sampled {
    pub mean: f64,
    pub stderr: f64,
    /// Sampled baseline `O′` from an independent run of the same size.
    pub baseline: f64,
    pub baseline_stderr: f64,
}

impl Sampled {
    /// `mean / baseline`, if the sampled baseline is usable.
    pub fn rescaled(&self) -> Option<f64> {
        otoc_rescaled(self.mean, self.baseline).ok()
    }

    /// First-order standard error of [`Sampled::rescaled`].
    pub fn rescaled_stderr(&self) -> Option<f64> {
        let r = self.rescaled()?;
        let rel = libm::hypot(self.stderr / self.mean.abs().max(1e-300), self.baseline_stderr / self.baseline.abs());
        Some(if self.mean == 0.0 { self.stderr / self.baseline.abs() } else { libm::fabs(r) * rel })
    }
}

/// One time point of a series. `protocol` and `baseline` are the infinite-shot
/// values of the (possibly noisy) estimate `O_est` and of `O′`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OtocPoint {
    pub t: f64,
    pub exact: f64,
    pub protocol: f64,
    pub baseline: f64,
    pub rescaled: Option<f64>,
    pub sampled: Option<Sampled>,
    pub shots: u64,
    pub seed: u64,
}

impl OtocPoint {
    /// Builds a point from the two measurement distributions, sampling both
    /// when `shots > 0`.
    pub fn from_measurements(t: f64, exact: f64, est: &Measurement, base: &Measurement, shots: u64, seed: u64) -> Self {
        let protocol = est.value();
        let baseline = base.value();
        let sampled = (shots > 0).then(|| {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = sample_counts(est.eigenvalues, &est.probabilities, shots, &mut rng);
            let b = sample_counts(base.eigenvalues, &base.probabilities, shots, &mut rng);
            Sampled { mean: a.mean(), stderr: a.stderr(), baseline: b.mean(), baseline_stderr: b.stderr() }
        });
        Self { t, exact, protocol, baseline, rescaled: otoc_rescaled(protocol, baseline).ok(), sampled, shots, seed }
    }
}

/// Diagnostics attached to a series.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Warning {
    /// `Hᵀ = -H` fails in the frame; protocol values need not match the trace.
    AntisymmetryViolated { max_violation: f64 },
    /// No phase frame makes the Hamiltonian antisymmetric; the trivial frame
    /// was used.
    NoPhaseFrame,
}

/// Operator `W` of a series.
#[derive(Debug, Clone, PartialEq)]
pub enum WOperator {
    PauliZ(usize),
    Diagonal { label: String, op: DiagonalOperator },
}

impl WOperator {
    pub fn to_diagonal(&self, n: usize) -> Result<DiagonalOperator> {
        match self {
            WOperator::PauliZ(site) => DiagonalOperator::pauli_z(n, *site),
            WOperator::Diagonal { op, .. } => {
                if op.num_qubits() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: op.num_qubits() });
                }
                Ok(op.clone())
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            WOperator::PauliZ(site) => alloc::format!("Z{site}"),
            WOperator::Diagonal { label, .. } => label.clone(),
        }
    }
}

/// Inputs of [`run_series`]. `V` is `σˣ` on each of `v_sites`.
#[derive(Debug, Clone)]
pub struct SeriesConfig {
    pub hamiltonian: HamiltonianSpec,
    /// `None` searches for a frame and falls back to the trivial one.
    pub frame: Option<PhaseFrame>,
    pub w: WOperator,
    pub v_sites: Vec<usize>,
    pub times: Vec<f64>,
    /// Shots per estimate; 0 disables sampling.
    pub shots: u64,
    pub seed: u64,
}

/// One `(W, V)` correlator over the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OtocSeries {
    pub w_label: String,
    pub v_site: usize,
    pub points: Vec<OtocPoint>,
    pub warnings: Vec<Warning>,
}

/// `points` evenly spaced values from `start` to `stop` inclusive.
pub fn time_grid(start: f64, stop: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 || !(start.is_finite() && stop.is_finite()) {
        return Err(crate::error::invalid("time grid needs at least one finite point"));
    }
    if points == 1 {
        return Ok(alloc::vec![start]);
    }
    if stop <= start {
        return Err(Error::TimeGridNotIncreasing(1));
    }
    let step = (stop - start) / (points - 1) as f64;
    Ok((0..points).map(|k| if k + 1 == points { stop } else { start + step * k as f64 }).collect())
}

/// Accepts empty grids; a nonempty grid must be strictly increasing.
pub(crate) fn check_time_grid(times: &[f64]) -> Result<()> {
    for (k, w) in times.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::TimeGridNotIncreasing(k + 1));
        }
    }
    Ok(())
}

/// Seed of an independent random stream, derived from the run seed.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    splitmix(seed ^ splitmix(stream))
}

/// Stream index for series `series`, time point `point`.
pub fn point_stream(series: usize, point: usize) -> u64 {
    ((series as u64) << 32) | point as u64
}

/// Resolves the frame of a series configuration.
pub fn resolve_frame(h: &HamiltonianSpec, frame: Option<&PhaseFrame>) -> Result<(PhaseFrame, Vec<Warning>)> {
    match frame {
        Some(f) => Ok((f.clone(), Vec::new())),
        None => match find_phase_frame(h)? {
            Some(f) => Ok((f, Vec::new())),
            None => Ok((PhaseFrame::trivial(h.num_qubits()), alloc::vec![Warning::NoPhaseFrame])),
        },
    }
}

/// Exact, protocol, baseline and (optionally) sampled OTOCs over the grid.
pub fn run_series(config: &SeriesConfig) -> Result<Vec<OtocSeries>> {
    check_time_grid(&config.times)?;
    let h = &config.hamiltonian;
    let n = h.num_qubits();
    let (frame, mut warnings) = resolve_frame(h, config.frame.as_ref())?;
    let engine = OtocEngine::new(h, &frame)?;
    let report = engine.antisymmetry();
    if !report.holds {
        warnings.push(Warning::AntisymmetryViolated { max_violation: report.max_violation });
    }
    let w = config.w.to_diagonal(n)?;
    let vs = config.v_sites.iter().map(|&j| LocalObservable::pauli(Pauli::X, j, &frame)).collect::<Result<Vec<_>>>()?;
    let w_state = operator_state(&w, &frame)?;
    let bell = frame_bell_state(&frame)?;
    let mut series: Vec<OtocSeries> = config
        .v_sites
        .iter()
        .map(|&j| OtocSeries { w_label: config.w.label(), v_site: j, points: Vec::new(), warnings: warnings.clone() })
        .collect();
    for (ti, &t) in config.times.iter().enumerate() {
        let u = engine.propagator(t);
        let exact = exact_trace_with_propagator(&u, &w, &vs)?;
        let psi = evolve_doubled(&w_state, &u)?;
        let bell_t = evolve_doubled(&bell, &u)?;
        for (vi, v) in vs.iter().enumerate() {
            let est = Measurement::of_state(&psi, v)?;
            let base = Measurement::of_state(&bell_t, v)?;
            let seed = stream_seed(config.seed, point_stream(vi, ti));
            series[vi].points.push(OtocPoint::from_measurements(t, exact[vi], &est, &base, config.shots, seed));
        }
    }
    Ok(series)
}
