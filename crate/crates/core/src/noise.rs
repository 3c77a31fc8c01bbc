//! Imperfections of the Bell-pair protocol.
//!
//! Every channel produces, for each time point, the outcome distribution of the
//! `V ⊗ Vᵀ` measurement for the operator state (giving `O_est`) and for the
//! Bell state (giving the baseline `O′`). The exact column always holds the
//! ideal trace OTOC of the unperturbed Hamiltonian, so `O - O_est`,
//! `1 - O′` and `O - O̅` can be read off one series.
//!
//! | channel | strength | model |
//! |---|---|---|
//! | `readout` | `x ∈ [0, 1/2]` | each recorded outcome flips with probability `x` |
//! | `imperfect_bell` | `δ ∈ [0, 1]` | each pair is replaced by a uniformly random Bell state with probability `δ` |
//! | `symmetry_breaking` | `ε` | both copies evolve with `H + ε(H_AA + H_BB)` |
//! | `unequal_hamiltonians` | `ε` | copy 1 evolves with `(1+ε)H`, copy 2 with `(1-ε)H` |
//! | `intercopy_coupling` | `ε` | joint evolution with `H ⊗ 1 + 1 ⊗ H + ε J Σ_j (X_j X_j' + Y_j Y_j')` |
//! | `spontaneous_emission` | `γ ≥ 0` | Lindblad decay `σ⁻` on every qubit of both copies |
//! | `depolarizing` | `γ ≥ 0` | `ρ → e^{-γt} ρ + (1 - e^{-γt}) 1/d` |

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::evolution::lindblad::{DensityMatrix, LindbladModel, DEFAULT_DT};
use crate::evolution::{diagonalize, evolve_doubled, evolve_doubled_pair, Propagator, SparseGenerator};
use crate::hamiltonians::{
    antisymmetry_report, build_intercopy_coupling, build_power_law_xy, ChainPart, HamiltonianSpec, Pauli,
};
use crate::linalg::{gather_even_bits, ZERO};
use crate::protocol::{
    check_time_grid, exact_trace_with_propagator, point_stream, resolve_frame, stream_seed, Measurement, OtocPoint,
    OtocSeries, SeriesConfig, Warning,
};
use crate::qstate::{
    frame_bell_state, operator_state, pair_product_state, BellKind, Budget, DiagonalOperator, LocalObservable,
    OutcomeCounts, PairSign, PhaseFrame, StateVector,
};

/// Largest system for the exact imperfect-Bell contraction.
pub const MAX_IMPERFECT_BELL_QUBITS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum NoiseKind {
    Readout,
    ImperfectBell,
    SymmetryBreaking,
    UnequalHamiltonians,
    IntercopyCoupling,
    SpontaneousEmission,
    Depolarizing,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 7] = [
        NoiseKind::Readout,
        NoiseKind::ImperfectBell,
        NoiseKind::SymmetryBreaking,
        NoiseKind::UnequalHamiltonians,
        NoiseKind::IntercopyCoupling,
        NoiseKind::SpontaneousEmission,
        NoiseKind::Depolarizing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Readout => "readout",
            NoiseKind::ImperfectBell => "imperfect_bell",
            NoiseKind::SymmetryBreaking => "symmetry_breaking",
            NoiseKind::UnequalHamiltonians => "unequal_hamiltonians",
            NoiseKind::IntercopyCoupling => "intercopy_coupling",
            NoiseKind::SpontaneousEmission => "spontaneous_emission",
            NoiseKind::Depolarizing => "depolarizing",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.name() == name)
            .ok_or_else(|| invalid(alloc::format!("unknown noise channel `{name}`")))
    }

    /// Checks that `strength` is admissible for this channel.
    pub fn validate(self, strength: f64) -> Result<()> {
        let ok = strength.is_finite()
            && match self {
                NoiseKind::Readout => (0.0..=0.5).contains(&strength),
                NoiseKind::ImperfectBell => (0.0..=1.0).contains(&strength),
                NoiseKind::SpontaneousEmission | NoiseKind::Depolarizing => strength >= 0.0,
                // ε may take either sign; the response is even in ε.
                NoiseKind::SymmetryBreaking | NoiseKind::UnequalHamiltonians | NoiseKind::IntercopyCoupling => true,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidStrength { channel: self.name(), strength })
        }
    }
}

impl core::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// A channel with its strength.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    pub strength: f64,
    /// RK4 step for the Lindblad channel, in units of `1/J`.
    pub lindblad_dt: f64,
}

impl NoiseConfig {
    pub fn new(kind: NoiseKind, strength: f64) -> Result<Self> {
        kind.validate(strength)?;
        Ok(Self { kind, strength, lindblad_dt: DEFAULT_DT })
    }

    pub fn with_lindblad_dt(mut self, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt must be positive"));
        }
        self.lindblad_dt = dt;
        Ok(self)
    }
}

/// Flips each recorded outcome independently with probability `x`.
pub fn apply_readout(counts: &OutcomeCounts, x: f64, seed: u64) -> Result<OutcomeCounts> {
    NoiseKind::Readout.validate(x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = OutcomeCounts { eigenvalues: counts.eigenvalues, counts: [[0; 2]; 2] };
    for a in 0..2 {
        for b in 0..2 {
            for _ in 0..counts.counts[a][b] {
                let fa = (rng.gen::<f64>() < x) as usize;
                let fb = (rng.gen::<f64>() < x) as usize;
                out.counts[a ^ fa][b ^ fb] += 1;
            }
        }
    }
    Ok(out)
}

/// Draws pure product states of Bell pairs: each pair is the requested one
/// with probability `1 - δ` and a uniformly random Bell state otherwise.
#[derive(Debug, Clone)]
pub struct ImperfectBellSampler {
    frame: PhaseFrame,
    ideal: Vec<BellKind>,
    delta: f64,
    rng: ChaCha8Rng,
}

pub fn imperfect_bell_ensemble(
    frame: &PhaseFrame,
    pair_signs: &[PairSign],
    delta: f64,
    seed: u64,
) -> Result<ImperfectBellSampler> {
    NoiseKind::ImperfectBell.validate(delta)?;
    if pair_signs.len() != frame.num_qubits() {
        return Err(Error::DimensionMismatch { expected: frame.num_qubits(), found: pair_signs.len() });
    }
    Budget::default().check(2 * frame.num_qubits())?;
    Ok(ImperfectBellSampler {
        frame: frame.clone(),
        ideal: pair_signs.iter().map(|&s| s.into()).collect(),
        delta,
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

impl ImperfectBellSampler {
    /// Pair kinds of the next draw.
    pub fn draw_kinds(&mut self) -> Vec<BellKind> {
        let delta = self.delta;
        let rng = &mut self.rng;
        self.ideal
            .iter()
            .map(|&k| if rng.gen::<f64>() < delta { BellKind::ALL[rng.gen_range(0..4)] } else { k })
            .collect()
    }

    pub fn draw(&mut self) -> StateVector {
        let kinds = self.draw_kinds();
        pair_product_state(&self.frame, &kinds, Budget::default()).expect("budget checked at construction")
    }
}

impl Iterator for ImperfectBellSampler {
    type Item = StateVector;
    fn next(&mut self) -> Option<StateVector> {
        Some(self.draw())
    }
}

/// Mean and standard error of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub draws: usize,
}

fn apply_w_copy1(state: &StateVector, w: &DiagonalOperator) -> StateVector {
    let n = w.num_qubits();
    let scale = 1.0 / libm::sqrt(w.norm_sqr() / (1usize << n) as f64);
    let amps = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(idx, &a)| a * (w.values()[gather_even_bits(idx, n)] * scale))
        .collect();
    StateVector::from_raw(amps, state.frame().clone())
}

/// Monte Carlo estimate of `O_est` for the imperfect-Bell channel from `draws`
/// sampled pure states. Each draw contributes its exact `V ⊗ Vᵀ` expectation.
pub fn imperfect_bell_ensemble_estimate(
    u: &Propagator,
    frame: &PhaseFrame,
    w: &DiagonalOperator,
    v: &LocalObservable,
    delta: f64,
    draws: usize,
    seed: u64,
) -> Result<EnsembleEstimate> {
    if draws < 2 {
        return Err(invalid("at least two draws are needed"));
    }
    let mut sampler = imperfect_bell_ensemble(frame, &frame.natural_pair_signs(), delta, seed)?;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let pairs = sampler.draw();
        let psi = evolve_doubled(&apply_w_copy1(&pairs, w), u)?;
        // `psi` is not normalised for non-unitary W; the weights average to one.
        let x = Measurement::of_state(&psi, v)?.value();
        sum += x;
        sum_sq += x * x;
    }
    let m = sum / draws as f64;
    let var = (sum_sq - draws as f64 * m * m).max(0.0) / (draws - 1) as f64;
    Ok(EnsembleEstimate { mean: m, stderr: libm::sqrt(var / draws as f64), draws })
}

/// `U† (P ⊗ 1) U` for a single-site projector `P` on `site`, dense.
fn heisenberg_projector(u: &DMatrix<C64>, site: usize, p: &[[C64; 2]; 2]) -> DMatrix<C64> {
    let d = u.nrows();
    let bit = 1usize << site;
    let pu = DMatrix::from_fn(d, d, |r, c| {
        let rj = (r & bit != 0) as usize;
        let r0 = r & !bit;
        p[rj][0] * u[(r0, c)] + p[rj][1] * u[(r0 | bit, c)]
    });
    u.adjoint() * pu
}

/// `Tr[ρ_δ (A ⊗ B)]` where `ρ_δ` is the product over sites of
/// `(1-δ)|β><β| + δ/4`, with `|β>` the frame Bell pair.
///
/// Expanding the product over the set `S` of depolarised pairs reduces every
/// term to partial traces over `S`, so the cost is `6^n` instead of `16^n`.
fn contract_imperfect_pairs(a: &DMatrix<C64>, b: &DMatrix<C64>, n: usize, delta: f64) -> C64 {
    let mut total = ZERO;
    for s in 0..(1usize << n) {
        let k = s.count_ones() as i32;
        let weight = libm::pow(1.0 - delta, (n as i32 - k) as f64) * libm::pow(delta, k as f64)
            / libm::pow(2.0, (n as i32 - k) as f64)
            / libm::pow(4.0, k as f64);
        if weight == 0.0 {
            continue;
        }
        let kept: Vec<usize> = (0..n).filter(|j| s & (1 << j) == 0).collect();
        let traced: Vec<usize> = (0..n).filter(|j| s & (1 << j) != 0).collect();
        let embed = |bits: usize, sites: &[usize]| -> usize {
            sites.iter().enumerate().fold(0, |acc, (i, &j)| acc | (((bits >> i) & 1) << j))
        };
        let mut acc = ZERO;
        for uu in 0..(1usize << kept.len()) {
            let u_idx = embed(uu, &kept);
            for up in 0..(1usize << kept.len()) {
                let up_idx = embed(up, &kept);
                let mut ta = ZERO;
                let mut tb = ZERO;
                for xs in 0..(1usize << traced.len()) {
                    let x = embed(xs, &traced);
                    ta += a[(up_idx | x, u_idx | x)];
                    tb += b[(up_idx | x, u_idx | x)];
                }
                acc += ta * tb;
            }
        }
        total += acc * weight;
    }
    total
}

/// Exact outcome distribution of `V ⊗ Vᵀ` after `(U₁ ⊗ U₂)(W ⊗ 1)` acting on
/// the imperfect Bell-pair mixture with infidelity `delta`.
pub fn imperfect_bell_measurement(
    u1: &Propagator,
    u2: &Propagator,
    w: &DiagonalOperator,
    v: &LocalObservable,
    delta: f64,
) -> Result<Measurement> {
    NoiseKind::ImperfectBell.validate(delta)?;
    let n = u1.num_qubits();
    if n > MAX_IMPERFECT_BELL_QUBITS {
        return Err(Error::BudgetExceeded { qubits: n, limit: MAX_IMPERFECT_BELL_QUBITS });
    }
    let d = 1usize << n;
    let (eigenvalues, vecs) = v.eigen();
    let u1d = u1.to_dense();
    let u2d = u2.to_dense();
    let norm = w.norm_sqr() / d as f64;
    let mut probabilities = [[0.0; 2]; 2];
    let proj = |e: &[C64; 2], conj: bool| {
        let e = if conj { [e[0].conj(), e[1].conj()] } else { *e };
        [[e[0] * e[0].conj(), e[0] * e[1].conj()], [e[1] * e[0].conj(), e[1] * e[1].conj()]]
    };
    for ai in 0..2 {
        let mut a = heisenberg_projector(&u1d, v.site(), &proj(&vecs[ai], false));
        for r in 0..d {
            for c in 0..d {
                a[(r, c)] *= w.values()[r] * w.values()[c];
            }
        }
        for bi in 0..2 {
            let b = heisenberg_projector(&u2d, v.site(), &proj(&vecs[bi], true));
            probabilities[ai][bi] = contract_imperfect_pairs(&a, &b, n, delta).re / norm;
        }
    }
    Ok(Measurement { eigenvalues, probabilities })
}

fn chain_coupling(h: &HamiltonianSpec, kind: NoiseKind) -> Result<(f64, f64)> {
    let meta = h.metadata().ok_or_else(|| {
        invalid(alloc::format!("the {} channel needs a chain Hamiltonian with lattice metadata", kind.name()))
    })?;
    Ok((meta.coupling, meta.exponent))
}

/// Time series of one channel at one strength. `base.w`, `base.v_sites`,
/// `base.times`, `base.shots` and `base.seed` are used as in
/// [`crate::protocol::run_series`].
pub fn channel_series(noise: &NoiseConfig, base: &SeriesConfig) -> Result<Vec<OtocSeries>> {
    noise.kind.validate(noise.strength)?;
    check_time_grid(&base.times)?;
    if base.times.first().is_some_and(|&t| t < 0.0) {
        return Err(invalid("noise channels need non-negative times"));
    }
    let h = &base.hamiltonian;
    let n = h.num_qubits();
    let (frame, mut warnings) = resolve_frame(h, base.frame.as_ref())?;
    let report = antisymmetry_report(h, &frame)?;
    if !report.holds {
        warnings.push(Warning::AntisymmetryViolated { max_violation: report.max_violation });
    }
    let w = base.w.to_diagonal(n)?;
    let vs = base.v_sites.iter().map(|&j| LocalObservable::pauli(Pauli::X, j, &frame)).collect::<Result<Vec<_>>>()?;
    let ideal = diagonalize(h, &frame)?;
    let w_state = operator_state(&w, &frame)?;
    let bell = frame_bell_state(&frame)?;
    let eps = noise.strength;

    // measurements[t][v] = (estimate, baseline)
    let mut measured: Vec<Vec<(Measurement, Measurement)>> = Vec::with_capacity(base.times.len());
    let from_states = |psi: &StateVector, b: &StateVector| -> Result<Vec<(Measurement, Measurement)>> {
        vs.iter().map(|v| Ok((Measurement::of_state(psi, v)?, Measurement::of_state(b, v)?))).collect()
    };
    match noise.kind {
        NoiseKind::Readout | NoiseKind::Depolarizing => {
            for &t in &base.times {
                let u = ideal.propagator(t);
                let clean = from_states(&evolve_doubled(&w_state, &u)?, &evolve_doubled(&bell, &u)?)?;
                let map = |m: &Measurement| match noise.kind {
                    NoiseKind::Readout => m.with_readout_error(eps),
                    _ => m.depolarized(libm::exp(-eps * t)),
                };
                measured.push(clean.iter().map(|(a, b)| (map(a), map(b))).collect());
            }
        }
        NoiseKind::ImperfectBell => {
            let id = DiagonalOperator::identity(n)?;
            for &t in &base.times {
                let u = ideal.propagator(t);
                measured.push(
                    vs.iter()
                        .map(|v| {
                            Ok((
                                imperfect_bell_measurement(&u, &u, &w, v, eps)?,
                                imperfect_bell_measurement(&u, &u, &id, v, eps)?,
                            ))
                        })
                        .collect::<Result<Vec<_>>>()?,
                );
            }
        }
        NoiseKind::SymmetryBreaking => {
            let (j, exponent) = chain_coupling(h, noise.kind)?;
            let intra = build_power_law_xy(n, j, exponent, ChainPart::Intra)?;
            let h_eps = h.plus(&intra, eps)?;
            let spec = diagonalize(&h_eps, &frame)?;
            for &t in &base.times {
                let u = spec.propagator(t);
                measured.push(from_states(&evolve_doubled(&w_state, &u)?, &evolve_doubled(&bell, &u)?)?);
            }
        }
        NoiseKind::UnequalHamiltonians => {
            for &t in &base.times {
                let u1 = ideal.propagator((1.0 + eps) * t);
                let u2 = ideal.propagator((1.0 - eps) * t);
                measured.push(from_states(
                    &evolve_doubled_pair(&w_state, &u1, &u2)?,
                    &evolve_doubled_pair(&bell, &u1, &u2)?,
                )?);
            }
        }
        NoiseKind::IntercopyCoupling => {
            let (j, _) = chain_coupling(h, noise.kind)?;
            let total = h.doubled()?.plus(&build_intercopy_coupling(n, j)?, eps)?;
            let gen = SparseGenerator::new(&total, &frame.doubled())?;
            let mut psi = w_state.clone();
            let mut b = bell.clone();
            let mut now = 0.0;
            for &t in &base.times {
                psi = gen.evolve(&psi, t - now)?;
                b = gen.evolve(&b, t - now)?;
                now = t;
                measured.push(from_states(&psi, &b)?);
            }
        }
        NoiseKind::SpontaneousEmission => {
            let sites: Vec<usize> = (0..2 * n).collect();
            let model = LindbladModel::new(&h.doubled()?, &frame.doubled())?.with_emission(&sites, eps)?;
            let mut est: Vec<Vec<Measurement>> = Vec::new();
            let mut bas: Vec<Vec<Measurement>> = Vec::new();
            for (rho0, out) in [(&w_state, &mut est), (&bell, &mut bas)] {
                let rho0 = DensityMatrix::from_pure(rho0)?;
                model.evolve_observed(&rho0, &base.times, noise.lindblad_dt, |_, rho| {
                    out.push(
                        vs.iter()
                            .map(|v| {
                                let (probabilities, eigenvalues) = rho.vvt_probabilities(v)?;
                                Ok(Measurement { eigenvalues, probabilities })
                            })
                            .collect::<Result<Vec<_>>>()?,
                    );
                    Ok(())
                })?;
            }
            for (e, b) in est.into_iter().zip(bas) {
                measured.push(e.into_iter().zip(b).collect());
            }
        }
    }

    let mut series: Vec<OtocSeries> = base
        .v_sites
        .iter()
        .map(|&j| OtocSeries { w_label: base.w.label(), v_site: j, points: Vec::new(), warnings: warnings.clone() })
        .collect();
    for (ti, (&t, row)) in base.times.iter().zip(&measured).enumerate() {
        let exact = exact_trace_with_propagator(&ideal.propagator(t), &w, &vs)?;
        for (vi, (est, bas)) in row.iter().enumerate() {
            let seed = stream_seed(base.seed, point_stream(vi, ti));
            series[vi].points.push(OtocPoint::from_measurements(t, exact[vi], est, bas, base.shots, seed));
        }
    }
    Ok(series)
}

/// Least-squares line through `(xs, ys)`; returns `(slope, intercept)`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::DegenerateFit("need at least two points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae are equal"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Log-log fit of `|O_ε(t) - O_0(t)|` against the strength.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// `(strength, |O_ε - O_0|)` for each strength.
    pub deviations: Vec<(f64, f64)>,
}

/// Fits the exponent of the leading-order deviation of `O_est` caused by
/// `kind`. Needs at least four positive strengths spanning a decade; `base`
/// must name exactly one `V` site and its time grid is replaced by `[t]`.
pub fn scaling_exponent(kind: NoiseKind, strengths: &[f64], t: f64, base: &SeriesConfig) -> Result<ScalingFit> {
    if strengths.len() < 4 {
        return Err(invalid("the fit needs at least four strengths"));
    }
    if strengths.iter().any(|&s| !(s > 0.0)) {
        return Err(invalid("strengths must be positive"));
    }
    let lo = strengths.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = strengths.iter().copied().fold(0.0, f64::max);
    if hi < 10.0 * lo * (1.0 - 1e-12) {
        return Err(invalid("strengths must span at least a decade"));
    }
    if base.v_sites.len() != 1 {
        return Err(invalid("the fit uses exactly one V site"));
    }
    let mut cfg = base.clone();
    cfg.times = vec![t];
    cfg.shots = 0;
    let o0 = crate::protocol::run_series(&cfg)?[0].points[0].protocol;
    let mut deviations = Vec::with_capacity(strengths.len());
    for &s in strengths {
        let noise = NoiseConfig::new(kind, s)?;
        let o = channel_series(&noise, &cfg)?[0].points[0].protocol;
        deviations.push((s, libm::fabs(o - o0)));
    }
    if deviations.iter().any(|&(_, d)| d < 1e-12) {
        return Err(Error::DegenerateFit("deviation below 1e-12; the channel has no effect at this time"));
    }
    let xs: Vec<f64> = deviations.iter().map(|d| libm::log(d.0)).collect();
    let ys: Vec<f64> = deviations.iter().map(|d| libm::log(d.1)).collect();
    let (slope, intercept) = least_squares_slope(&xs, &ys)?;
    Ok(ScalingFit { slope, intercept, deviations })
}

/// Human-readable label of a channel and strength, e.g. `depolarizing(0.1)`.
pub fn label(noise: &NoiseConfig) -> String {
    alloc::format!("{}({})", noise.kind.name(), noise.strength)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonians::build_xy_chain;
    use crate::protocol::WOperator;

    fn base(n: usize, times: Vec<f64>) -> SeriesConfig {
        SeriesConfig {
            hamiltonian: build_xy_chain(n, 1.0, ChainPart::Ab).unwrap(),
            frame: Some(PhaseFrame::alternating(n)),
            w: WOperator::PauliZ(0),
            v_sites: vec![n - 1],
            times,
            shots: 0,
            seed: 1,
        }
    }

    #[test]
    fn strengths_validated() {
        assert!(NoiseConfig::new(NoiseKind::Readout, 0.6).is_err());
        assert!(NoiseConfig::new(NoiseKind::ImperfectBell, 1.2).is_err());
        assert!(NoiseConfig::new(NoiseKind::Depolarizing, -0.1).is_err());
        assert!(NoiseConfig::new(NoiseKind::SymmetryBreaking, -0.1).is_ok());
        assert_eq!(NoiseKind::parse("unequal_hamiltonians").unwrap(), NoiseKind::UnequalHamiltonians);
    }

    #[test]
    fn readout_flip_sampling_keeps_shot_count() {
        let c = OutcomeCounts { eigenvalues: [-1.0, 1.0], counts: [[0, 0], [0, 5000]] };
        let r = apply_readout(&c, 0.1, 3).unwrap();
        assert_eq!(r.shots(), 5000);
        assert!((r.mean() - 0.64).abs() < 0.05);
    }

    #[test]
    fn imperfect_contraction_matches_dense_density_matrix() {
        // Brute force: build ρ_δ on 2n qubits, apply the circuit, measure.
        let n = 2;
        let frame = PhaseFrame::alternating(n);
        let h = build_xy_chain(n, 1.0, ChainPart::All).unwrap();
        let spec = diagonalize(&h, &frame).unwrap();
        let u1 = spec.propagator(0.8);
        let u2 = spec.propagator(0.5);
        let w = DiagonalOperator::from_values(n, vec![0.5, -1.0, 2.0, 0.25]).unwrap();
        let v = LocalObservable::pauli(Pauli::Y, 1, &frame).unwrap();
        let delta = 0.3;
        let m = imperfect_bell_measurement(&u1, &u2, &w, &v, delta).unwrap();
        // Mixture over all 4^n pair assignments.
        let mut expected = 0.0;
        let mut total_weight = 0.0;
        for assign in 0..(1usize << (2 * n)) {
            let kinds: Vec<BellKind> = (0..n).map(|j| BellKind::ALL[(assign >> (2 * j)) & 3]).collect();
            let ideal = frame.natural_pair_signs();
            let mut weight = 1.0;
            for j in 0..n {
                let p_ideal: BellKind = ideal[j].into();
                weight *= if kinds[j] == p_ideal { 1.0 - delta + delta / 4.0 } else { delta / 4.0 };
            }
            let pairs = pair_product_state(&frame, &kinds, Budget::default()).unwrap();
            let psi = evolve_doubled_pair(&apply_w_copy1(&pairs, &w), &u1, &u2).unwrap();
            expected += weight * Measurement::of_state(&psi, &v).unwrap().value();
            total_weight += weight;
        }
        assert!((total_weight - 1.0).abs() < 1e-12);
        assert!((m.value() - expected).abs() < 1e-12, "{} {}", m.value(), expected);
    }

    #[test]
    fn depolarizing_and_readout_cancel_in_rescaled() {
        let cfg = base(4, vec![0.0, 0.5, 1.0]);
        for noise in [
            NoiseConfig::new(NoiseKind::Depolarizing, 0.7).unwrap(),
            NoiseConfig::new(NoiseKind::Readout, 0.15).unwrap(),
        ] {
            let s = &channel_series(&noise, &cfg).unwrap()[0];
            for p in &s.points {
                assert!((p.rescaled.unwrap() - p.exact).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn epsilon_channels_are_even() {
        let cfg = base(4, vec![0.7, 1.2]);
        for kind in [NoiseKind::SymmetryBreaking, NoiseKind::UnequalHamiltonians, NoiseKind::IntercopyCoupling] {
            let a = channel_series(&NoiseConfig::new(kind, 0.05).unwrap(), &cfg).unwrap();
            let b = channel_series(&NoiseConfig::new(kind, -0.05).unwrap(), &cfg).unwrap();
            for (p, q) in a[0].points.iter().zip(&b[0].points) {
                assert!((p.protocol - q.protocol).abs() < 1e-10, "{kind}");
                assert!((p.protocol - p.exact).abs() > 1e-8, "{kind}");
            }
        }
    }

    #[test]
    fn coupling_invisible_in_baseline() {
        let cfg = base(4, vec![0.5, 1.0, 1.5]);
        let s = &channel_series(&NoiseConfig::new(NoiseKind::IntercopyCoupling, 0.05).unwrap(), &cfg).unwrap()[0];
        for p in &s.points {
            assert!((p.baseline - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn slope_fit_recovers_power() {
        let xs: Vec<f64> = [0.01f64, 0.02, 0.04, 0.08].iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 0.3).collect();
        let (s, i) = least_squares_slope(&xs, &ys).unwrap();
        assert!((s - 2.0).abs() < 1e-12 && (i - 0.3).abs() < 1e-12);
    }

    #[test]
    fn scaling_needs_a_decade() {
        let cfg = base(4, vec![1.0]);
        let e = scaling_exponent(NoiseKind::UnequalHamiltonians, &[0.01, 0.02, 0.03, 0.05], 1.0, &cfg);
        assert!(e.is_err());
        let e = scaling_exponent(NoiseKind::UnequalHamiltonians, &[0.01, 0.02], 1.0, &cfg);
        assert!(e.is_err());
    }
}
