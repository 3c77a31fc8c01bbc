//! Argument parsing, config resolution and the exit-status policy.
//!
//! Exit status: 0 when the run completed and passed its checks, 1 on any
//! error, 2 when the run completed but a warning policy or check failed
//! (warnings without `allow_warnings`, or no phase frame in
//! `check-symmetry`).

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use otoc_core::hamiltonians::HamiltonianSpec;

use crate::commands::{self, Outcome};
use crate::config::{is_json, parse_config, ExperimentConfig};
use crate::output::{sha256_hex, Manifest, OutputDir};
use crate::presets;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "OTOC_LAB_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "otoc-lab",
    version,
    about = "Bell-pair OTOC experiments: series, noise sweeps and variational preparation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// OTOC time series for every V site.
    Otoc(CommonArgs),
    /// One noise channel over a list of strengths.
    Noise(CommonArgs),
    /// Maximum fidelities and landscapes of the variational state.
    Varprep(CommonArgs),
    /// Search for a phase frame with H^T = -H and report violations.
    CheckSymmetry(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Config file (TOML, or JSON by extension) or a preset name.
    #[arg(long)]
    pub config: String,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config shot count; 0 gives infinite-shot values only.
    #[arg(long)]
    pub shots: Option<u64>,
    /// Output directory. Defaults to `out` (check-symmetry writes nothing
    /// without it).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Otoc(_) => "otoc",
            Command::Noise(_) => "noise",
            Command::Varprep(_) => "varprep",
            Command::CheckSymmetry(_) => "check-symmetry",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Otoc(a) | Command::Noise(a) | Command::Varprep(a) | Command::CheckSymmetry(a) => a,
        }
    }
}

/// Raw config text plus the name it was loaded under.
struct Source {
    label: String,
    path: PathBuf,
    text: String,
}

fn load_source(spec: &str) -> Result<Source> {
    let path = Path::new(spec);
    if path.exists() {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        return Ok(Source { label: spec.to_string(), path: path.to_path_buf(), text });
    }
    match presets::get(spec) {
        Some(text) => Ok(Source {
            label: format!("preset:{spec}"),
            path: PathBuf::from(format!("{spec}.toml")),
            text: text.into(),
        }),
        None => bail!("no config file `{spec}`, and no preset of that name (presets: {})", presets::names().join(", ")),
    }
}

fn thread_count() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize =
                v.trim().parse().with_context(|| format!("{THREADS_ENV}={v:?} is not a positive integer"))?;
            if n == 0 {
                bail!("{THREADS_ENV} must be at least 1");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

/// Input of `check-symmetry`: a bare Hamiltonian (`num_qubits` and `terms`)
/// or an experiment config with a `[model]`.
fn symmetry_input(src: &Source) -> Result<(HamiltonianSpec, Option<ExperimentConfig>)> {
    let bare = if is_json(&src.path) {
        serde_json::from_str::<serde_json::Value>(&src.text).ok().is_some_and(|v| v.get("num_qubits").is_some())
    } else {
        toml::from_str::<toml::Table>(&src.text).ok().is_some_and(|t| t.contains_key("num_qubits"))
    };
    if bare {
        let h = if is_json(&src.path) {
            serde_json::from_str(&src.text).with_context(|| format!("{}: invalid Hamiltonian", src.path.display()))?
        } else {
            toml::from_str(&src.text).with_context(|| format!("{}: invalid Hamiltonian", src.path.display()))?
        };
        Ok((h, None))
    } else {
        let cfg = parse_config(&src.text, &src.path)?;
        Ok((cfg.model()?, Some(cfg)))
    }
}

/// Runs one command; returns the process exit status.
pub fn run(cli: &Cli) -> Result<u8> {
    let threads = thread_count()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("cannot start the worker pool")?;
    pool.install(|| run_in_pool(cli))
}

fn run_in_pool(cli: &Cli) -> Result<u8> {
    let command = cli.command.name();
    let args = cli.command.args();
    let src = load_source(&args.config)?;

    let (outcome, cfg, out) = if let Command::CheckSymmetry(_) = cli.command {
        let (h, cfg) = symmetry_input(&src)?;
        let mut out = args.out.as_deref().map(OutputDir::create).transpose()?;
        let outcome = commands::check_symmetry(&h, out.as_mut())?;
        (outcome, cfg, out)
    } else {
        let mut cfg = parse_config(&src.text, &src.path)?;
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        if let Some(s) = args.shots {
            cfg.shots = s;
        }
        commands::preflight(command, &cfg)?;
        let mut out = OutputDir::create(args.out.as_deref().unwrap_or(Path::new("out")))?;
        let outcome = match cli.command {
            Command::Otoc(_) => commands::otoc(&cfg, &mut out)?,
            Command::Noise(_) => commands::noise(&cfg, &mut out)?,
            Command::Varprep(_) => commands::varprep(&cfg, &mut out)?,
            Command::CheckSymmetry(_) => unreachable!(),
        };
        (outcome, Some(cfg), Some(out))
    };

    if let Some(out) = &out {
        let manifest = Manifest {
            tool: "otoc-lab",
            tool_version: env!("CARGO_PKG_VERSION"),
            otoc_core_version: otoc_core::VERSION,
            command,
            config_source: &src.label,
            config_sha256: sha256_hex(src.text.as_bytes()),
            effective_config: cfg.as_ref(),
            seed: cfg.as_ref().map(|c| c.seed),
            shots: cfg.as_ref().map(|c| c.shots),
            threads: rayon::current_num_threads(),
            warnings: &outcome.warnings,
            files: out.files().to_vec(),
        };
        manifest.write(out.root())?;
    }
    report(&outcome, out.as_ref());
    let allow = cfg.as_ref().is_some_and(|c| c.allow_warnings);
    Ok(exit_status(&outcome, allow))
}

fn report(outcome: &Outcome, out: Option<&OutputDir>) {
    for line in &outcome.summary {
        println!("{line}");
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(out) = out {
        println!("wrote {} files and manifest.json to {}", out.files().len(), out.root().display());
    }
}

pub fn exit_status(outcome: &Outcome, allow_warnings: bool) -> u8 {
    if outcome.failed_check || (!outcome.warnings.is_empty() && !allow_warnings) {
        2
    } else {
        0
    }
}
