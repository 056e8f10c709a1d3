use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use geokinetic::harness::config::{EstimatorCfg, MetricKind};
use geokinetic::harness::{run_experiment, ExperimentConfig, ReportFormat, Suite};

#[derive(Parser)]
#[command(name = "geokinetic", version, about = "Ray transforms, kinetic checks and source recovery on Riemannian balls")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (`key = value`, dotted sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for sample scattering; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `metric`.
    #[arg(long, global = true, value_enum)]
    metric: Option<MetricArg>,
    /// Arclength step; overrides `grid.step`.
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Recovery probe size; overrides `grid.eps`.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Overrides `estimator`.
    #[arg(long, global = true, value_enum)]
    estimator: Option<EstimatorArg>,
    /// Center lattice points per axis; overrides `grid.lattice`.
    #[arg(long, global = true)]
    centers: Option<usize>,
    /// Report format printed to stdout.
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: FormatArg,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    Geodesic,
    Forward,
    KineticCheck,
    Spectrum,
    LemmaCheck,
    Recover,
    Uniqueness,
    All,
}

#[derive(ValueEnum, Clone, Copy)]
enum MetricArg {
    Euclidean,
    Bump,
}

#[derive(ValueEnum, Clone, Copy)]
enum EstimatorArg {
    Spectral,
    Kinetic,
    Both,
}

#[derive(ValueEnum, Clone, Copy)]
enum FormatArg {
    Text,
    Csv,
}

impl Command {
    fn suite(self) -> Suite {
        match self {
            Command::Geodesic => Suite::Geodesic,
            Command::Forward => Suite::Forward,
            Command::KineticCheck => Suite::Kinetic,
            Command::Spectrum => Suite::Spectrum,
            Command::LemmaCheck => Suite::Lemmas,
            Command::Recover => Suite::Recover,
            Command::Uniqueness => Suite::Uniqueness,
            Command::All => Suite::All,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    cfg.suite = cli.command.suite();
    if let Some(o) = cli.out {
        cfg.output = o;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(m) = cli.metric {
        cfg.metric = match m {
            MetricArg::Euclidean => MetricKind::Euclidean,
            MetricArg::Bump => MetricKind::Bump,
        };
    }
    if let Some(s) = cli.step {
        cfg.grid.step = s;
    }
    if let Some(e) = cli.eps {
        cfg.grid.eps = e;
    }
    if let Some(n) = cli.centers {
        cfg.grid.lattice = n;
    }
    if let Some(e) = cli.estimator {
        cfg.estimator = match e {
            EstimatorArg::Spectral => EstimatorCfg::Spectral,
            EstimatorArg::Kinetic => EstimatorCfg::Kinetic,
            EstimatorArg::Both => EstimatorCfg::Both,
        };
    }
    match run_experiment(&cfg) {
        Ok(report) => {
            let format = match cli.format {
                FormatArg::Text => ReportFormat::Text,
                FormatArg::Csv => ReportFormat::Csv,
            };
            print!("{}", report.emit(format));
            if report.pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
