//! The four experiment commands. Each one writes its files into an
//! [`OutputDir`] and returns the warnings that decide the exit status.

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use otoc_core::evolution::evolve_doubled;
use otoc_core::hamiltonians::{
    antisymmetry_report, dense_antisymmetry_violation, find_phase_frame, HamiltonianSpec, Pauli,
};
use otoc_core::noise::{channel_series, scaling_exponent, NoiseConfig, NoiseKind};
use otoc_core::protocol::{
    exact_trace_with_propagator, point_stream, resolve_frame, stream_seed, Measurement, OtocEngine, OtocPoint,
    OtocSeries, SeriesConfig, Warning,
};
use otoc_core::qstate::{frame_bell_state, operator_state, LocalObservable, PairSign, PhaseFrame};
use otoc_core::varprep::{fidelity_f0, landscape, optimize_alphas, AnsatzParams};

use crate::config::ExperimentConfig;
use crate::output::{cell, num, OutputDir};
use crate::plot::{heatmap, line_chart, Curve};

/// Largest system for the dense `‖Hᵀ + H‖` cross-check.
const DENSE_CHECK_MAX_QUBITS: usize = 8;

// Stream offsets keep the random streams of different sub-experiments apart.
const SHOT_NOISE_STREAM: u64 = 0x5348_4f54 << 32;
const STRENGTH_STREAM: u64 = 0x5354_5247 << 32;

/// What a command reports back to the front end.
#[derive(Debug, Default)]
pub struct Outcome {
    pub warnings: Vec<String>,
    /// Lines printed to stdout.
    pub summary: Vec<String>,
    /// Set when the result itself is a failed check (no phase frame).
    pub failed_check: bool,
}

pub fn describe(w: &Warning) -> String {
    match w {
        Warning::AntisymmetryViolated { max_violation } => {
            format!("H^T = -H fails in the chosen frame (max violation {max_violation:e})")
        }
        Warning::NoPhaseFrame => "no phase frame makes H antisymmetric; used the trivial frame".into(),
    }
}

fn series_config(cfg: &ExperimentConfig) -> Result<SeriesConfig> {
    let hamiltonian = cfg.model()?;
    let n = hamiltonian.num_qubits();
    let ops = cfg.operators()?;
    for &j in &ops.v_sites {
        ensure!(j < n, "V site {j} is outside the {n}-site model");
    }
    Ok(SeriesConfig {
        frame: cfg.frame.resolve(n)?,
        w: ops.w.to_operator(n)?,
        v_sites: ops.v_sites.clone(),
        times: cfg.times.grid()?,
        shots: cfg.shots,
        seed: cfg.seed,
        hamiltonian,
    })
}

/// Per time point, the exact values and the `(estimate, baseline)`
/// measurement distributions of every `V`.
type TimeRow = (Vec<f64>, Vec<(Measurement, Measurement)>);

/// Same result as [`otoc_core::protocol::run_series`], with the time points
/// evaluated in parallel. Also returns the measurement distributions.
pub fn compute_series(sc: &SeriesConfig) -> Result<(Vec<OtocSeries>, Vec<TimeRow>)> {
    ensure!(sc.times.windows(2).all(|w| w[1] > w[0]), "times must be strictly increasing");
    let h = &sc.hamiltonian;
    let n = h.num_qubits();
    let (frame, mut warnings) = resolve_frame(h, sc.frame.as_ref())?;
    let engine = OtocEngine::new(h, &frame)?;
    let report = engine.antisymmetry();
    if !report.holds {
        warnings.push(Warning::AntisymmetryViolated { max_violation: report.max_violation });
    }
    let w = sc.w.to_diagonal(n)?;
    let vs = sc
        .v_sites
        .iter()
        .map(|&j| LocalObservable::pauli(Pauli::X, j, &frame))
        .collect::<otoc_core::Result<Vec<_>>>()?;
    let w_state = operator_state(&w, &frame)?;
    let bell = frame_bell_state(&frame)?;
    let rows: Vec<TimeRow> = sc
        .times
        .par_iter()
        .map(|&t| -> Result<TimeRow> {
            let u = engine.propagator(t);
            let exact = exact_trace_with_propagator(&u, &w, &vs)?;
            let psi = evolve_doubled(&w_state, &u)?;
            let bell_t = evolve_doubled(&bell, &u)?;
            let m = vs
                .iter()
                .map(|v| Ok((Measurement::of_state(&psi, v)?, Measurement::of_state(&bell_t, v)?)))
                .collect::<otoc_core::Result<Vec<_>>>()?;
            Ok((exact, m))
        })
        .collect::<Result<_>>()?;
    let series = sc
        .v_sites
        .iter()
        .enumerate()
        .map(|(vi, &j)| OtocSeries {
            w_label: sc.w.label(),
            v_site: j,
            points: rows
                .iter()
                .zip(&sc.times)
                .enumerate()
                .map(|(ti, ((exact, m), &t))| {
                    let seed = stream_seed(sc.seed, point_stream(vi, ti));
                    OtocPoint::from_measurements(t, exact[vi], &m[vi].0, &m[vi].1, sc.shots, seed)
                })
                .collect(),
            warnings: warnings.clone(),
        })
        .collect();
    Ok((series, rows))
}

pub const SERIES_HEADER: [&str; 13] = [
    "t",
    "exact",
    "protocol",
    "baseline",
    "rescaled",
    "n_shots",
    "seed",
    "sampled_mean",
    "sampled_stderr",
    "sampled_baseline",
    "sampled_baseline_stderr",
    "sampled_rescaled",
    "sampled_rescaled_stderr",
];

fn point_cells(p: &OtocPoint) -> Vec<String> {
    let s = p.sampled.as_ref();
    vec![
        num(p.t),
        num(p.exact),
        num(p.protocol),
        num(p.baseline),
        cell(p.rescaled),
        p.shots.to_string(),
        p.seed.to_string(),
        cell(s.map(|s| s.mean)),
        cell(s.map(|s| s.stderr)),
        cell(s.map(|s| s.baseline)),
        cell(s.map(|s| s.baseline_stderr)),
        cell(s.and_then(|s| s.rescaled())),
        cell(s.and_then(|s| s.rescaled_stderr())),
    ]
}

fn collect_warnings(series: &[OtocSeries], out: &mut Vec<String>) {
    for w in series.iter().flat_map(|s| &s.warnings) {
        let text = describe(w);
        if !out.contains(&text) {
            out.push(text);
        }
    }
}

/// `otoc`: one CSV per `(W, V)` pair, a line plot and optionally a shot-noise
/// study.
pub fn otoc(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome> {
    let sc = series_config(cfg)?;
    let (series, rows) = compute_series(&sc)?;
    let mut outcome = Outcome::default();
    collect_warnings(&series, &mut outcome.warnings);

    let mut curves = Vec::new();
    for s in &series {
        let name = format!("otoc_{}_v{}.csv", s.w_label, s.v_site);
        let rows: Vec<Vec<String>> = s.points.iter().map(point_cells).collect();
        out.write_csv(&name, &SERIES_HEADER, &rows)?;
        curves.push(Curve {
            label: format!("O[{}, X{}] exact", s.w_label, s.v_site),
            points: s.points.iter().map(|p| (p.t, p.exact)).collect(),
            markers: false,
        });
        if sc.shots > 0 {
            curves.push(Curve {
                label: format!("O[{}, X{}] sampled", s.w_label, s.v_site),
                points: s.points.iter().filter_map(|p| Some((p.t, p.sampled?.rescaled()?))).collect(),
                markers: true,
            });
        }
        if let Some(p0) = s.points.first() {
            outcome.summary.push(format!("{}: W={} V=X{} O(t={})={:.6}", name, s.w_label, s.v_site, p0.t, p0.exact));
        }
    }
    let title = format!("OTOC, n = {}", sc.hamiltonian.num_qubits());
    out.write("otoc.svg", line_chart(&title, "Jt", "O(t)", &curves)?.as_bytes())?;

    if let Some(sn) = &cfg.shot_noise {
        shot_noise(cfg, &sc, &rows, sn, out, &mut outcome)?;
    }
    Ok(outcome)
}

fn shot_noise(
    cfg: &ExperimentConfig,
    sc: &SeriesConfig,
    rows: &[TimeRow],
    sn: &crate::config::ShotNoiseConfig,
    out: &mut OutputDir,
    outcome: &mut Outcome,
) -> Result<()> {
    let mut jobs = Vec::new();
    for (si, &shots) in sn.shots.iter().enumerate() {
        for vi in 0..sc.v_sites.len() {
            for ti in 0..rows.len() {
                jobs.push((si, shots, vi, ti));
            }
        }
    }
    // Each job repeats the finite-shot experiment and reports RMS errors
    // against the exact value.
    let results: Vec<Vec<String>> = jobs
        .par_iter()
        .map(|&(si, shots, vi, ti)| {
            let (exact, m) = &rows[ti];
            let job_seed = stream_seed(stream_seed(cfg.seed, SHOT_NOISE_STREAM | si as u64), point_stream(vi, ti));
            let (mut se_est, mut se_res, mut stderr_sum, mut used) = (0.0, 0.0, 0.0, 0u64);
            for r in 0..sn.repetitions {
                let p = OtocPoint::from_measurements(
                    sc.times[ti],
                    exact[vi],
                    &m[vi].0,
                    &m[vi].1,
                    shots,
                    stream_seed(job_seed, r),
                );
                let s = p.sampled.expect("shots >= 2");
                se_est += (s.mean - exact[vi]).powi(2);
                stderr_sum += s.stderr;
                if let Some(x) = s.rescaled() {
                    se_res += (x - exact[vi]).powi(2);
                    used += 1;
                }
            }
            let reps = sn.repetitions as f64;
            vec![
                shots.to_string(),
                sc.v_sites[vi].to_string(),
                num(sc.times[ti]),
                num((se_est / reps).sqrt()),
                cell((used > 0).then(|| (se_res / used as f64).sqrt())),
                num(stderr_sum / reps),
                used.to_string(),
            ]
        })
        .collect();
    let header =
        ["n_shots", "v_site", "t", "rms_error_estimate", "rms_error_rescaled", "mean_stderr", "rescaled_samples"];
    out.write_csv("shot_noise.csv", &header, &results)?;

    let v0 = sc.v_sites[0].to_string();
    let curves: Vec<Curve> = sn
        .shots
        .iter()
        .map(|&shots| Curve {
            label: format!("{shots} shots"),
            points: results
                .iter()
                .filter(|r| r[0] == shots.to_string() && r[1] == v0 && !r[4].is_empty())
                .map(|r| (r[2].parse().unwrap(), r[4].parse().unwrap()))
                .collect(),
            markers: false,
        })
        .collect();
    out.write(
        "shot_noise.svg",
        line_chart(&format!("Shot noise, V = X{v0}"), "Jt", "RMS error of rescaled OTOC", &curves)?.as_bytes(),
    )?;
    outcome.summary.push(format!("shot_noise.csv: {} rows, {} repetitions each", results.len(), sn.repetitions));
    Ok(())
}

/// Strengths of a sweep, each followed by its mirror image when requested.
pub fn sweep_strengths(strengths: &[f64], mirror: bool) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 * strengths.len());
    for &s in strengths {
        v.push(s);
        if mirror && s != 0.0 {
            v.push(-s);
        }
    }
    v
}

pub const NOISE_HEADER: [&str; 20] = [
    "channel",
    "strength",
    "w",
    "v_site",
    "t",
    "exact",
    "protocol",
    "baseline",
    "rescaled",
    "err_estimate",
    "err_baseline",
    "err_rescaled",
    "n_shots",
    "seed",
    "sampled_mean",
    "sampled_stderr",
    "sampled_baseline",
    "sampled_baseline_stderr",
    "sampled_rescaled",
    "sampled_rescaled_stderr",
];

/// `noise`: one channel over a list of strengths.
pub fn noise(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome> {
    let sweep = cfg.noise.as_ref().context("the config has no [noise] section")?;
    let base = series_config(cfg)?;
    let kind = sweep.channel;
    let strengths = sweep_strengths(&sweep.strengths, sweep.mirror);
    let noise_for = |s: f64| -> Result<NoiseConfig> {
        let c = NoiseConfig::new(kind, s)?;
        Ok(match sweep.lindblad_dt {
            Some(dt) => c.with_lindblad_dt(dt)?,
            None => c,
        })
    };
    let runs: Vec<Vec<OtocSeries>> = strengths
        .par_iter()
        .enumerate()
        .map(|(si, &s)| {
            let mut sc = base.clone();
            sc.seed = stream_seed(cfg.seed, STRENGTH_STREAM | si as u64);
            Ok(channel_series(&noise_for(s)?, &sc)?)
        })
        .collect::<Result<_>>()?;

    let mut outcome = Outcome::default();
    let mut rows = Vec::new();
    for (&s, series) in strengths.iter().zip(&runs) {
        collect_warnings(series, &mut outcome.warnings);
        for sr in series {
            for p in &sr.points {
                let c = point_cells(p);
                let mut row = vec![kind.name().to_string(), num(s), sr.w_label.clone(), sr.v_site.to_string()];
                row.extend_from_slice(&c[..5]);
                row.push(num(p.exact - p.protocol));
                row.push(num(1.0 - p.baseline));
                row.push(cell(p.rescaled.map(|r| p.exact - r)));
                row.extend_from_slice(&c[5..]);
                rows.push(row);
            }
        }
    }
    out.write_csv("noise.csv", &NOISE_HEADER, &rows)?;

    let mut curves = Vec::new();
    for (&s, series) in strengths.iter().zip(&runs) {
        let Some(sr) = series.first() else { continue };
        curves.push(Curve {
            label: format!("O - O_est, {} = {s}", kind.name()),
            points: sr.points.iter().map(|p| (p.t, p.exact - p.protocol)).collect(),
            markers: false,
        });
        curves.push(Curve {
            label: format!("O - rescaled, {} = {s}", kind.name()),
            points: sr.points.iter().filter_map(|p| Some((p.t, p.exact - p.rescaled?))).collect(),
            markers: true,
        });
    }
    let v0 = base.v_sites[0];
    out.write(
        "noise.svg",
        line_chart(&format!("{} errors, V = X{v0}", kind.name()), "Jt", "error", &curves)?.as_bytes(),
    )?;
    outcome.summary.push(format!("noise.csv: {} rows over {} strengths", rows.len(), strengths.len()));

    if let Some(fit) = &sweep.fit {
        scaling(kind, fit, &base, out, &mut outcome)?;
    }
    Ok(outcome)
}

fn scaling(
    kind: NoiseKind,
    fit: &crate::config::FitConfig,
    base: &SeriesConfig,
    out: &mut OutputDir,
    outcome: &mut Outcome,
) -> Result<()> {
    let mut jobs = Vec::new();
    for &v in &base.v_sites {
        for &t in &fit.times {
            jobs.push((v, t));
        }
    }
    let fits = jobs
        .par_iter()
        .map(|&(v, t)| {
            let mut sc = base.clone();
            sc.v_sites = vec![v];
            scaling_exponent(kind, &fit.strengths, t, &sc).with_context(|| format!("scaling fit at V=X{v}, t={t}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut summary = Vec::new();
    let mut points = Vec::new();
    let mut curves = Vec::new();
    for (&(v, t), f) in jobs.iter().zip(&fits) {
        summary.push(vec![kind.name().to_string(), v.to_string(), num(t), num(f.slope), num(f.intercept)]);
        for &(s, d) in &f.deviations {
            points.push(vec![kind.name().to_string(), v.to_string(), num(t), num(s), num(d)]);
        }
        curves.push(Curve {
            label: format!("V=X{v}, t={t}: slope {:.3}", f.slope),
            points: f.deviations.iter().map(|&(s, d)| (s.log10(), d.log10())).collect(),
            markers: true,
        });
        outcome.summary.push(format!("scaling V=X{v} t={t}: slope {:.4}", f.slope));
    }
    out.write_csv("scaling.csv", &["channel", "v_site", "t", "slope", "intercept"], &summary)?;
    out.write_csv("scaling_points.csv", &["channel", "v_site", "t", "strength", "deviation"], &points)?;
    out.write(
        "scaling.svg",
        line_chart(&format!("{} scaling", kind.name()), "log10 strength", "log10 |O_est(eps) - O_est(0)|", &curves)?
            .as_bytes(),
    )?;
    Ok(())
}

/// `varprep`: maximum fidelities per spectrum and depth, plus landscapes.
pub fn varprep(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<Outcome> {
    let vp = cfg.varprep.as_ref().context("the config has no [varprep] section")?;
    let spectra = vp
        .spectra
        .iter()
        .map(|s| Ok((s.label(), s.build().with_context(|| format!("spectrum {}", s.label()))?)))
        .collect::<Result<Vec<_>>>()?;
    let mut jobs = Vec::new();
    for si in 0..spectra.len() {
        for &p in &vp.depths {
            jobs.push((si, p));
        }
    }
    let results = jobs
        .par_iter()
        .map(|&(si, p)| {
            let s = &spectra[si].1;
            if p == 0 {
                Ok((AnsatzParams::new(vec![]), fidelity_f0(s)?.magnitude()))
            } else {
                let o = optimize_alphas(s, p)?;
                Ok((o.params, o.fidelity))
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut outcome = Outcome::default();
    let mut rows = Vec::new();
    for (&(si, p), (params, f)) in jobs.iter().zip(&results) {
        let alphas = params.alphas.iter().map(|a| num(*a)).collect::<Vec<_>>().join(";");
        rows.push(vec![spectra[si].0.clone(), p.to_string(), num(*f), alphas]);
        outcome.summary.push(format!("{:<24} p={p} max|F|={f:.6}", spectra[si].0));
    }
    out.write_csv("summary.csv", &["spectrum", "p", "max_fidelity", "alphas"], &rows)?;

    let curves: Vec<Curve> = spectra
        .iter()
        .enumerate()
        .map(|(si, (label, _))| Curve {
            label: label.clone(),
            points: jobs.iter().zip(&results).filter(|(j, _)| j.0 == si).map(|(j, r)| (j.1 as f64, r.1)).collect(),
            markers: true,
        })
        .collect();
    out.write("summary.svg", line_chart("Maximum fidelity", "depth p", "max |F_p|", &curves)?.as_bytes())?;

    if let Some(l) = &vp.landscape {
        let maps = spectra
            .par_iter()
            .map(|(_, s)| Ok(landscape(s, l.points, l.lower, l.upper)?))
            .collect::<Result<Vec<_>>>()?;
        for ((label, _), cells) in spectra.iter().zip(&maps) {
            let rows: Vec<Vec<String>> = cells.iter().map(|&(a, b, f)| vec![num(a), num(b), num(f)]).collect();
            out.write_csv(&format!("landscape_{label}.csv"), &["alpha1", "alpha2", "fidelity"], &rows)?;
            let svg = heatmap(&format!("|F2| for {label}"), "alpha1", "alpha2", cells, l.points)?;
            out.write(&format!("landscape_{label}.svg"), svg.as_bytes())?;
            let best = cells.iter().map(|c| c.2).fold(0.0, f64::max);
            outcome.summary.push(format!("landscape_{label}.csv: grid max {best:.6}"));
        }
    }
    Ok(outcome)
}

fn sign_name(s: PairSign) -> &'static str {
    match s {
        PairSign::Plus => "Phi+",
        PairSign::Minus => "Phi-",
    }
}

/// Result of `check-symmetry`, also written as `symmetry.json`.
#[derive(Debug, Serialize)]
pub struct SymmetryReport {
    pub num_qubits: usize,
    pub num_terms: usize,
    /// Sites carrying a quarter turn, or `None` when no frame exists.
    pub frame: Option<Vec<usize>>,
    pub pair_signs: Option<Vec<&'static str>>,
    /// Violation in the found frame, or in the trivial frame if none exists.
    pub holds: bool,
    pub max_violation: f64,
    pub dense_violation: Option<f64>,
}

pub fn symmetry_report(h: &HamiltonianSpec) -> Result<SymmetryReport> {
    let n = h.num_qubits();
    let found = find_phase_frame(h)?;
    let frame = found.clone().unwrap_or_else(|| PhaseFrame::trivial(n));
    let report = antisymmetry_report(h, &frame)?;
    let dense = (n <= DENSE_CHECK_MAX_QUBITS).then(|| dense_antisymmetry_violation(h, &frame)).transpose()?;
    Ok(SymmetryReport {
        num_qubits: n,
        num_terms: h.terms().len(),
        frame: found.as_ref().map(|f| (0..n).filter(|&j| f.is_quarter_turn(j)).collect()),
        pair_signs: found.as_ref().map(|f| f.natural_pair_signs().into_iter().map(sign_name).collect()),
        holds: report.holds,
        max_violation: report.max_violation,
        dense_violation: dense,
    })
}

/// `check-symmetry`: frame search and antisymmetry diagnostics.
pub fn check_symmetry(h: &HamiltonianSpec, out: Option<&mut OutputDir>) -> Result<Outcome> {
    let r = symmetry_report(h)?;
    let mut outcome = Outcome::default();
    outcome.summary.push(format!("qubits: {}, terms: {}", r.num_qubits, r.num_terms));
    match (&r.frame, &r.pair_signs) {
        (Some(sites), Some(signs)) => {
            let sites = sites.iter().map(|j| j.to_string()).collect::<Vec<_>>();
            outcome.summary.push(format!("frame: quarter turns on sites [{}]", sites.join(", ")));
            let pairs = signs.iter().enumerate().map(|(j, s)| format!("{j}:{s}")).collect::<Vec<_>>();
            outcome.summary.push(format!("pair signs: {}", pairs.join(" ")));
        }
        _ => {
            outcome.summary.push("frame: NONE".into());
            outcome.failed_check = true;
        }
    }
    outcome.summary.push(format!("algebraic max violation: {:e}", r.max_violation));
    match r.dense_violation {
        Some(d) => outcome.summary.push(format!("dense max |H^T + H|: {d:e}")),
        None => outcome.summary.push(format!("dense check skipped (n > {DENSE_CHECK_MAX_QUBITS})")),
    }
    if let Some(out) = out {
        out.write("symmetry.json", (serde_json::to_string_pretty(&r)? + "\n").as_bytes())?;
    }
    Ok(outcome)
}

/// Rejects configs that lack what a command needs before any work starts.
pub fn preflight(command: &str, cfg: &ExperimentConfig) -> Result<()> {
    let need = |ok: bool, what: &str| -> Result<()> {
        if !ok {
            bail!("`{command}` needs a [{what}] section");
        }
        Ok(())
    };
    match command {
        "otoc" => {
            need(cfg.model.is_some(), "model")?;
            need(cfg.operators.is_some(), "operators")
        }
        "noise" => {
            need(cfg.model.is_some(), "model")?;
            need(cfg.operators.is_some(), "operators")?;
            need(cfg.noise.is_some(), "noise")
        }
        "varprep" => need(cfg.varprep.is_some(), "varprep"),
        _ => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirrored_strengths_follow_their_originals() {
        assert_eq!(sweep_strengths(&[0.0, 0.1, 0.2], true), vec![0.0, 0.1, -0.1, 0.2, -0.2]);
        assert_eq!(sweep_strengths(&[0.1], false), vec![0.1]);
    }

    #[test]
    fn header_and_rows_have_equal_width() {
        let p = OtocPoint::from_measurements(
            0.0,
            1.0,
            &Measurement { eigenvalues: [-1.0, 1.0], probabilities: [[0.5, 0.0], [0.0, 0.5]] },
            &Measurement { eigenvalues: [-1.0, 1.0], probabilities: [[0.5, 0.0], [0.0, 0.5]] },
            10,
            3,
        );
        assert_eq!(point_cells(&p).len(), SERIES_HEADER.len());
    }
}
