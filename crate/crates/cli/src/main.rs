use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use kicked_rotors::experiments::{parse_config, parse_config_str, read_manifest, run, verify_manifest, ExperimentKind};
use kicked_rotors::Error;

/// Entanglement experiments on two coupled kicked rotors.
#[derive(Parser)]
#[command(name = "rotors", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average purity decay over a grid of kick strengths and couplings.
    PuritySweep(RunArgs),
    /// Purity curves against Lyapunov-rescaled time.
    Collapse(RunArgs),
    /// Husimi and Wigner functions against the classical density.
    WignerCompare(RunArgs),
    /// Decoherence of one rotor by a mixed-state chaotic environment.
    EnvDecoherence(RunArgs),
    /// Classical correlator estimate of the golden-rule rate.
    Gamma(RunArgs),
    /// Lyapunov exponents of the standard map.
    Lyapunov(RunArgs),
    /// Check a run directory against its manifest.
    Verify { dir: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one value, e.g. `--set system.eps=[1.0,2.0]`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    overrides: Vec<String>,
    /// Root seed; required when the config does not give one.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. Defaults to `$ROTORS_OUT/<experiment>-seed<seed>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Regime(_) => 3,
        Error::Resource { .. } => 4,
        _ => 1,
    }
}

fn execute(kind: ExperimentKind, args: RunArgs) -> Result<PathBuf, Error> {
    let mut overrides = args.overrides;
    if let Some(seed) = args.seed {
        overrides.push(format!("experiment.seed={seed}"));
    }
    let cfg = match &args.config {
        Some(path) => parse_config(path, &overrides)?,
        None => {
            overrides.insert(0, format!("experiment.kind=\"{}\"", kind.name()));
            parse_config_str("", &overrides)?
        }
    };
    if cfg.experiment.kind != kind {
        return Err(Error::Config(format!(
            "config describes a {} experiment, not {}",
            cfg.experiment.kind,
            kind
        )));
    }
    let out = match (args.out, &cfg.experiment.output_dir) {
        (Some(dir), _) => dir,
        (None, Some(dir)) => PathBuf::from(dir),
        (None, None) => {
            let root = std::env::var_os("ROTORS_OUT").map(PathBuf::from).unwrap_or_else(|| "runs".into());
            root.join(format!("{}-seed{}", kind.name(), cfg.experiment.seed))
        }
    };
    let start = Instant::now();
    run(&cfg, &out)?;
    write_timing(&out, start.elapsed().as_secs_f64())?;
    Ok(out)
}

// kept out of the manifest so reruns stay byte-identical
fn write_timing(dir: &Path, seconds: f64) -> Result<(), Error> {
    std::fs::write(dir.join("timing.json"), format!("{{\n  \"wall_seconds\": {seconds}\n}}\n"))?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::PuritySweep(a) => (ExperimentKind::PuritySweep, a),
        Command::Collapse(a) => (ExperimentKind::LyapunovCollapse, a),
        Command::WignerCompare(a) => (ExperimentKind::WignerCompare, a),
        Command::EnvDecoherence(a) => (ExperimentKind::EnvDecoherence, a),
        Command::Gamma(a) => (ExperimentKind::GammaEstimate, a),
        Command::Lyapunov(a) => (ExperimentKind::LyapunovEstimate, a),
        Command::Verify { dir } => {
            return match read_manifest(&dir).and_then(|m| verify_manifest(&dir, &m)) {
                Ok(()) => {
                    println!("{}: ok", dir.display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    log::error!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match execute(kind, args) {
        Ok(dir) => {
            println!("{}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
