use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use otoc_core::protocol::run_series;
use otoc_lab::commands::{self, compute_series};
use otoc_lab::config::{parse_config, ExperimentConfig};
use otoc_lab::output::{sha256_hex, OutputDir};
use otoc_lab::presets;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_otoc-lab"))
}

fn run(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = bin();
    c.args(args);
    match threads {
        Some(t) => c.env("OTOC_LAB_THREADS", t),
        None => c.env_remove("OTOC_LAB_THREADS"),
    };
    c.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Rows of a CSV file as header-keyed maps.
fn read_csv(path: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    r.records().map(|rec| header.iter().cloned().zip(rec.unwrap().iter().map(String::from)).collect()).collect()
}

fn f(row: &std::collections::HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or_else(|_| panic!("column {key} = {:?}", row[key]))
}

const SMALL: &str = r#"
seed = 5
shots = 200

[model]
type = "xy_chain"
n = 4

[operators]
w = 0
v_sites = [1, 3]

[times]
stop = 1.0
points = 6
"#;

fn preset(name: &str) -> ExperimentConfig {
    parse_config(presets::get(name).unwrap(), Path::new(&format!("{name}.toml"))).unwrap()
}

#[test]
fn unknown_keys_are_rejected_with_their_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "seed = 1\n\n[model]\ntype = \"xy_chain\"\nn = 4\nspacing = 2\n");
    let o = run(&["otoc", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()], None);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    // Tagged tables report the position of their header.
    assert!(err.contains("spacing") && err.contains("line 3"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn malformed_json_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", "{\n  \"seed\": 1,\n  \"shots\": }\n");
    let o = run(&["otoc", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 3 column"), "{}", stderr(&o));
}

#[test]
fn semantic_errors_fail_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write(dir.path(), "c.toml", &SMALL.replace("v_sites = [1, 3]", "v_sites = [1, 9]"));
    let o = run(&["otoc", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("V site 9"), "{}", stderr(&o));
    let cfg = write(dir.path(), "d.toml", "[varprep]\nspectra = []\n");
    assert_eq!(code(&run(&["varprep", "--config", cfg.to_str().unwrap()], None)), 1);
    let o = run(&["noise", "--config", write(dir.path(), "e.toml", SMALL).to_str().unwrap()], None);
    assert!(stderr(&o).contains("needs a [noise] section"), "{}", stderr(&o));
    let o = run(&["otoc", "--config", "no-such-preset"], None);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("chain10"));
}

#[test]
fn json_and_toml_configs_are_interchangeable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg: ExperimentConfig = toml::from_str(SMALL).unwrap();
    let t = write(dir.path(), "c.toml", SMALL);
    let j = write(dir.path(), "c.json", &serde_json::to_string(&cfg).unwrap());
    for (p, o) in [(&t, "ot"), (&j, "oj")] {
        let out = run(&["otoc", "--config", p.to_str().unwrap(), "--out", dir.path().join(o).to_str().unwrap()], None);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let a = fs::read(dir.path().join("ot/otoc_Z0_v3.csv")).unwrap();
    let b = fs::read(dir.path().join("oj/otoc_Z0_v3.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn chain_preset_gives_six_curves_with_the_right_initial_values() {
    let mut cfg = preset("chain10");
    cfg.times.values = Some(vec![0.0, 0.05]);
    let dir = tempfile::tempdir().unwrap();
    let mut out = OutputDir::create(dir.path()).unwrap();
    let outcome = commands::otoc(&cfg, &mut out).unwrap();
    assert!(outcome.warnings.is_empty(), "{:?}", outcome.warnings);
    let csvs: Vec<_> = out.files().iter().filter(|f| f.path.ends_with(".csv")).collect();
    assert_eq!(csvs.len(), 6);
    for v in 4..10 {
        let rows = read_csv(&dir.path().join(format!("otoc_Z4_v{v}.csv")));
        let expected = if v == 4 { -1.0 } else { 1.0 };
        assert!((f(&rows[0], "exact") - expected).abs() < 1e-12);
        assert!((f(&rows[0], "protocol") - expected).abs() < 1e-12);
        assert!((f(&rows[1], "protocol") - f(&rows[1], "exact")).abs() < 1e-10);
    }
}

#[test]
fn zero_shots_writes_exact_values_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("o");
    let o = run(&["otoc", "--config", cfg.to_str().unwrap(), "--shots", "0", "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for row in read_csv(&out.join("otoc_Z0_v1.csv")) {
        assert_eq!(row["n_shots"], "0");
        for k in ["sampled_mean", "sampled_stderr", "sampled_baseline", "sampled_rescaled"] {
            assert_eq!(row[k], "", "{k}");
        }
        assert!((f(&row, "exact") - f(&row, "protocol")).abs() < 1e-10);
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["shots"], 0);
    assert_eq!(manifest["effective_config"]["shots"], 0);
}

#[test]
fn fixed_seed_gives_identical_files_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write(dir.path(), "c.toml", &(SMALL.to_string() + "\n[shot_noise]\nshots = [50, 500]\nrepetitions = 20\n"));
    let mut outputs = Vec::new();
    for (i, threads) in [Some("1"), Some("1"), Some("3"), None].into_iter().enumerate() {
        let out = dir.path().join(format!("o{i}"));
        let o =
            run(&["otoc", "--config", cfg.to_str().unwrap(), "--seed", "99", "--out", out.to_str().unwrap()], threads);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        outputs.push(out);
    }
    for name in ["otoc_Z0_v1.csv", "otoc_Z0_v3.csv", "shot_noise.csv", "otoc.svg"] {
        let first = fs::read(outputs[0].join(name)).unwrap();
        for o in &outputs[1..] {
            assert_eq!(first, fs::read(o.join(name)).unwrap(), "{name}");
        }
    }
    let other = dir.path().join("other");
    run(&["otoc", "--config", cfg.to_str().unwrap(), "--seed", "100", "--out", other.to_str().unwrap()], None);
    assert_ne!(fs::read(outputs[0].join("otoc_Z0_v1.csv")).unwrap(), fs::read(other.join("otoc_Z0_v1.csv")).unwrap());
}

#[test]
fn parallel_series_equals_the_serial_core_loop() {
    let mut cfg: ExperimentConfig = toml::from_str(SMALL).unwrap();
    cfg.times.points = 9;
    let dir = tempfile::tempdir().unwrap();
    let mut out = OutputDir::create(dir.path()).unwrap();
    commands::otoc(&cfg, &mut out).unwrap();
    let sc = otoc_core::protocol::SeriesConfig {
        hamiltonian: cfg.model().unwrap(),
        frame: None,
        w: otoc_core::protocol::WOperator::PauliZ(0),
        v_sites: vec![1, 3],
        times: cfg.times.grid().unwrap(),
        shots: cfg.shots,
        seed: cfg.seed,
    };
    let (parallel, _) =
        rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| compute_series(&sc).unwrap());
    assert_eq!(parallel, run_series(&sc).unwrap());
}

#[test]
fn manifest_records_hashes_and_versions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("o");
    assert_eq!(code(&run(&["otoc", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], Some("2"))), 0);
    let m: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config_sha256"], sha256_hex(SMALL.as_bytes()));
    assert_eq!(m["otoc_core_version"], otoc_core::VERSION);
    assert_eq!(m["threads"], 2);
    assert_eq!(m["seed"], 5);
    let files = m["files"].as_array().unwrap();
    assert_eq!(files.len(), 3);
    for entry in files {
        let bytes = fs::read(out.join(entry["path"].as_str().unwrap())).unwrap();
        assert_eq!(entry["sha256"], sha256_hex(&bytes));
    }
}

#[test]
fn empty_time_grid_writes_header_only_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &SMALL.replace("points = 6", "points = 0"));
    let out = dir.path().join("o");
    let o = run(&["otoc", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(out.join("otoc_Z0_v1.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("t,exact,protocol"));
}

#[test]
fn warnings_set_exit_status_two_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let zz = r#"
[model]
type = "pauli_sum"
num_qubits = 3
terms = [{ paulis = "ZZI", coeff = 1.0 }, { paulis = "XIX", coeff = 0.5 }]

[operators]
w = 0
v_sites = [2]

[times]
stop = 0.5
points = 3
"#;
    let cfg = write(dir.path(), "zz.toml", zz);
    let o = run(&["otoc", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("a").to_str().unwrap()], None);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("warning: no phase frame"), "{}", stderr(&o));
    let allowed = write(dir.path(), "zz2.toml", &format!("allow_warnings = true\n{zz}"));
    let o =
        run(&["otoc", "--config", allowed.to_str().unwrap(), "--out", dir.path().join("b").to_str().unwrap()], None);
    assert_eq!(code(&o), 0);
    let m: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("b/manifest.json")).unwrap()).unwrap();
    assert!(!m["warnings"].as_array().unwrap().is_empty());
}

fn noise_rows(preset_name: &str) -> Vec<std::collections::HashMap<String, String>> {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&["noise", "--config", preset_name, "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    read_csv(&out.join("noise.csv"))
}

#[test]
fn depolarizing_is_removed_by_rescaling() {
    let rows = noise_rows("depolarizing");
    assert_eq!(rows.len(), 4 * 31);
    for row in &rows {
        assert!(f(row, "err_rescaled").abs() <= 1e-10, "{row:?}");
    }
    assert!(rows.iter().any(|r| f(r, "err_estimate").abs() > 1e-2));
}

#[test]
fn intercopy_coupling_leaves_the_baseline_at_one() {
    for row in noise_rows("intercopy-coupling") {
        assert!(f(&row, "err_baseline").abs() <= 1e-10, "{row:?}");
    }
}

#[test]
fn mirrored_symmetry_breaking_rows_are_equal() {
    let rows = noise_rows("symmetry-breaking");
    let key = |r: &std::collections::HashMap<String, String>| (f(r, "strength"), r["t"].clone());
    let mut checked = 0;
    for r in rows.iter().filter(|r| f(r, "strength") > 0.0) {
        let (s, t) = key(r);
        let m = rows.iter().find(|q| key(q) == (-s, t.clone())).expect("mirror row");
        for col in ["protocol", "baseline", "rescaled"] {
            assert!((f(r, col) - f(m, col)).abs() < 1e-10, "{col} at eps={s}, t={t}");
        }
        checked += 1;
    }
    assert_eq!(checked, 3 * 31);
}

#[test]
fn scaling_fit_finds_quadratic_response() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(code(&run(&["noise", "--config", "epsilon-scaling", "--out", out.to_str().unwrap()], None)), 0);
    let rows = read_csv(&out.join("scaling.csv"));
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!((f(&r, "slope") - 2.0).abs() <= 0.05, "{r:?}");
    }
}

#[test]
fn fidelity_table_preset_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = run(&["varprep", "--config", "fidelity-table", "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = read_csv(&out.join("summary.csv"));
    assert_eq!(rows.len(), 6 * 3);
    let get = |name: &str, p: &str| {
        let r = rows.iter().find(|r| r["spectrum"] == name && r["p"] == p).unwrap();
        (f(r, "max_fidelity"), r["alphas"].split(';').filter(|s| !s.is_empty()).count())
    };
    // Reference values from an independent reduced-space simulation.
    for (name, target, tol) in [
        ("zsum5", 0.995391, 1e-5),
        ("uniform", 0.999, 1e-3),
        ("arcsine", 0.9997, 5e-4),
        ("wigner_semicircle", 0.999, 1e-3),
        ("gaussian_sigma0.3333", 0.991, 5e-3),
    ] {
        let (v, n) = get(name, "2");
        assert!((v - target).abs() <= tol, "{name}: {v}");
        assert_eq!(n, 2);
    }
    assert!((get("bernoulli_q0.5", "1").0 - 1.0).abs() < 1e-9);
}

#[test]
fn depth_zero_reports_the_plain_overlap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[varprep]\ndepths = [0]\nspectra = [{ type = \"two_point\", low = 0.0, high = 1.0, q = 0.5 }]\n",
    );
    let out = dir.path().join("o");
    assert_eq!(code(&run(&["varprep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None)), 0);
    let rows = read_csv(&out.join("summary.csv"));
    assert_eq!(rows.len(), 1);
    // E[w] / sqrt(E[w^2]) = 0.5 / sqrt(0.5)
    assert!((f(&rows[0], "max_fidelity") - 0.5f64.sqrt()).abs() < 1e-12);
    assert_eq!(rows[0]["alphas"], "");
}

#[test]
fn landscape_has_a_full_grid_and_heatmap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[varprep]\ndepths = [2]\nspectra = [{ type = \"zsum\", k = 3 }]\n[varprep.landscape]\npoints = 11\n",
    );
    let out = dir.path().join("o");
    assert_eq!(code(&run(&["varprep", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None)), 0);
    let rows = read_csv(&out.join("landscape_zsum3.csv"));
    assert_eq!(rows.len(), 121);
    assert!(rows.iter().all(|r| (0.0..=1.0 + 1e-12).contains(&f(r, "fidelity"))));
    assert!(fs::read_to_string(out.join("landscape_zsum3.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn check_symmetry_finds_the_chain_frame() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SMALL);
    let out = dir.path().join("o");
    let o = run(&["check-symmetry", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("quarter turns on sites [0, 2]"), "{text}");
    assert!(text.contains("0:Phi-") && text.contains("1:Phi+"), "{text}");
    let r: serde_json::Value = serde_json::from_slice(&fs::read(out.join("symmetry.json")).unwrap()).unwrap();
    assert_eq!(r["holds"], true);
    assert_eq!(r["max_violation"], 0.0);
    assert_eq!(r["dense_violation"], 0.0);
}

#[test]
fn check_symmetry_reports_none_for_zz_terms() {
    let dir = tempfile::tempdir().unwrap();
    let h = write(dir.path(), "h.json", r#"{"num_qubits": 2, "terms": [{"paulis": "ZZ", "coeff": 1.0}]}"#);
    let o = run(&["check-symmetry", "--config", h.to_str().unwrap()], None);
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("frame: NONE"), "{}", stdout(&o));
    assert!(stdout(&o).contains("algebraic max violation: 1e0"), "{}", stdout(&o));
}

#[test]
fn check_symmetry_gives_the_trivial_frame_for_an_empty_model() {
    let dir = tempfile::tempdir().unwrap();
    let h = write(dir.path(), "h.json", r#"{"num_qubits": 3, "terms": []}"#);
    let o = run(&["check-symmetry", "--config", h.to_str().unwrap()], None);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("quarter turns on sites []"), "{}", stdout(&o));
}

#[test]
fn check_symmetry_reports_parse_locations() {
    let dir = tempfile::tempdir().unwrap();
    let h = write(dir.path(), "h.json", "{\"num_qubits\": 2,\n \"terms\": [{\"paulis\": \"QZ\", \"coeff\": 1.0}]}");
    let o = run(&["check-symmetry", "--config", h.to_str().unwrap()], None);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("line 2") && err.contains("Q"), "{err}");
}
