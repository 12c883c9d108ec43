use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};

use covmag::cli::{render, run_config, write_artifacts, TableFormat};
use covmag::config::ExperimentConfig;
use covmag::selftest::{run_selftest, SelfTestHooks};

/// Covariance magnetometry simulator.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Variance-based phase cycling of two resolvable NVs.
    PhaseCycle(RunArgs),
    /// Phase cycling with a ¹³C-conditioned spin flip.
    C13Cycle(RunArgs),
    /// Correlation from Φ/Ψ Bell pairs.
    BellCovar(RunArgs),
    /// Bell-state fidelity from a phase-incremented readout.
    TppiFidelity(RunArgs),
    /// Two-time correlation through a SWAP gate.
    TwoTimeSwap(RunArgs),
    /// Two-time correlation with overlapping windows.
    TwoTimeOverlap(RunArgs),
    /// Minimum detectable field against averaging time.
    SensitivityCurve(RunArgs),
    /// NV signal under an XY train with a coupled ¹³C.
    XySpectrum(RunArgs),
    /// Fast invariant suite.
    Selftest {
        /// Corrupt one gate matrix entry (checks that the suite catches it).
        #[arg(long, hide = true)]
        perturb_gate: bool,
        /// Corrupt the readout-noise factor.
        #[arg(long, hide = true)]
        perturb_sigma_r: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Experiment config (TOML, or JSON by extension).
    #[arg(long)]
    config: PathBuf,
    /// Master seed, replacing the config's.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory. Defaults to the config's, then COVMAG_OUT_DIR, then ./covmag-out.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads; all cores by default. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Format of the sweep table.
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

const OUT_DIR_ENV: &str = "COVMAG_OUT_DIR";

fn run(name: &str, args: RunArgs) -> anyhow::Result<()> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    let mut cfg = ExperimentConfig::load(&args.config).with_context(|| format!("loading {}", args.config.display()))?;
    if cfg.experiment.id() != name {
        bail!("config {} describes `{}`, not `{name}`", args.config.display(), cfg.experiment.id());
    }
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    let out_dir = args
        .out_dir
        .or_else(|| cfg.output.dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("covmag-out"));
    let format = match args.format {
        Format::Csv => TableFormat::Csv,
        Format::Json => TableFormat::Json,
    };
    info!("running {name} with seed {}", cfg.run.seed);
    let out = run_config(&cfg)?;
    let files = render(&out, format)?;
    write_artifacts(&out_dir, &files)?;
    for (n, _) in &files {
        println!("{}", out_dir.join(n).display());
    }
    if !out.checks_passed() {
        warn!("some consistency checks failed; see summary.json");
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::PhaseCycle(a) => run("phase-cycle", a),
        Command::C13Cycle(a) => run("c13-cycle", a),
        Command::BellCovar(a) => run("bell-covar", a),
        Command::TppiFidelity(a) => run("tppi-fidelity", a),
        Command::TwoTimeSwap(a) => run("two-time-swap", a),
        Command::TwoTimeOverlap(a) => run("two-time-overlap", a),
        Command::SensitivityCurve(a) => run("sensitivity-curve", a),
        Command::XySpectrum(a) => run("xy-spectrum", a),
        Command::Selftest { perturb_gate, perturb_sigma_r } => {
            match run_selftest(SelfTestHooks { perturb_gate, perturb_sigma_r }) {
                Ok(report) => {
                    for c in &report.checks {
                        println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
                    }
                    if report.passed() {
                        return ExitCode::SUCCESS;
                    }
                    eprintln!("failing invariants: {}", report.failures().join(", "));
                    return ExitCode::from(1);
                }
                Err(e) => Err(e.into()),
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
