use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use besq_core::harness::{run_experiment, ExperimentConfig};
use clap::{Parser, Subcommand};

mod plot;

/// Experiments on non-intersecting squared Bessel processes and their
/// hard-edge limit.
#[derive(Debug, Parser)]
#[command(name = "besq", version)]
struct Cli {
    /// Experiment configuration (key = value lines, `#` comments).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// CSV output (SVG for `plot`); defaults to stdout.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads for replica fan-out.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Extra configuration entry, applied after the file; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Gronwall inequality, Laguerre orthogonality and the h_α ODE.
    SpecfunCheck,
    /// Chapman–Kolmogorov, integral representation, TP2 and log-supermodularity.
    DensityCheck,
    /// Non-intersecting squared Bessel bridges by acceptance sampling.
    SampleBridge,
    /// Glauber chain occupation or the discretization study.
    GlauberRun,
    /// Two Glauber chains under the monotone coupling.
    GlauberCouple,
    /// Eigenvalue paths of the Laguerre matrix process.
    LueSample,
    /// Kernel values on a space-time grid.
    KernelEval,
    /// Finite-N kernel against the extended Bessel kernel.
    KernelConverge,
    /// Fredholm gap probabilities E0, E1.
    GapProb,
    /// Resampling invariance of the prelimit ensemble.
    GibbsTest,
    /// Modulus-of-continuity probabilities across N.
    Tightness,
    /// Upper and lower tail bounds of the curves.
    Bounds,
    /// Smallest-particle law and one-point intensity against the kernel.
    Onepoint,
    /// SVG line plot of CSV columns.
    Plot {
        /// CSV produced by another subcommand.
        #[arg(long)]
        input: PathBuf,
        /// Column for the horizontal axis.
        #[arg(long)]
        x: String,
        /// Comma-separated columns to draw.
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        #[arg(long, default_value = "")]
        title: String,
    },
}

impl Command {
    fn experiment_name(&self) -> Option<&'static str> {
        Some(match self {
            Command::SpecfunCheck => "specfun-check",
            Command::DensityCheck => "density-check",
            Command::SampleBridge => "sample-bridge",
            Command::GlauberRun => "glauber-run",
            Command::GlauberCouple => "glauber-couple",
            Command::LueSample => "lue-sample",
            Command::KernelEval => "kernel-eval",
            Command::KernelConverge => "kernel-converge",
            Command::GapProb => "gap-prob",
            Command::GibbsTest => "gibbs-test",
            Command::Tightness => "tightness",
            Command::Bounds => "bounds",
            Command::Onepoint => "onepoint",
            Command::Plot { .. } => return None,
        })
    }
}

const EXIT_USAGE: u8 = 1;
const EXIT_THRESHOLD: u8 = 2;

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn build_config(cli: &Cli, name: &str) -> Result<ExperimentConfig, String> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got {kv:?}"))?;
        cfg.set(k.trim(), v.trim()).map_err(|e| e.to_string())?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_path = Some(out.clone());
    }
    cfg.experiment = name.to_string();
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return usage_error("--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return usage_error(e);
        }
    }
    if let Command::Plot { input, x, y, title } = &cli.command {
        let series = match plot::read_series(input, x, y) {
            Ok(s) => s,
            Err(e) => return usage_error(e),
        };
        let svg = plot::render_svg(&series, x, title);
        let written = match &cli.out {
            Some(p) => std::fs::write(p, svg),
            None => std::io::stdout().write_all(svg.as_bytes()),
        };
        return match written {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => usage_error(e),
        };
    }
    let name = cli.command.experiment_name().expect("experiment subcommand");
    let cfg = match build_config(&cli, name) {
        Ok(c) => c,
        Err(e) => return usage_error(e),
    };
    let start = Instant::now();
    let report = match run_experiment(name, &cfg) {
        Ok(r) => r,
        Err(e) => return usage_error(e),
    };
    let written = match &cfg.output_path {
        Some(p) => report.write_to_path(p).map_err(|e| e.to_string()),
        None => report.write_csv(std::io::stdout().lock()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        return usage_error(e);
    }
    eprint!("{report}");
    eprintln!("  elapsed {:.2} s", start.elapsed().as_secs_f64());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_THRESHOLD)
    }
}
