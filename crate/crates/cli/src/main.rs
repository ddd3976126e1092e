use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use qkdnet::RecommendMode;
use qkdnet_cli::commands;
use qkdnet_cli::output::{self, Format};
use qkdnet_cli::{CliError, ScenarioConfig};

/// Cost planner for trusted-repeater QKD networks.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides `mc.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output format. Defaults to csv for link-curve and json otherwise.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    /// Asymptotic backbone, no access term.
    Paper,
    /// Exact hop sum with access term.
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Rate and per-bit cost versus link length.
    LinkCurve {
        #[arg(long)]
        ell_min: Option<f64>,
        #[arg(long)]
        ell_max: Option<f64>,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Optimal chain spacing and backbone cell sizes.
    Optimize,
    /// Recommend chains or a square backbone for the scenario.
    Compare {
        #[arg(long, value_enum, default_value = "paper")]
        mode: Mode,
    },
    /// Run the Monte-Carlo and quadrature cross-checks (needs an [mc] section).
    Validate {
        /// Also write a sampled node set and one routed path.
        #[arg(long)]
        dump_geometry: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>) -> Result<ScenarioConfig, CliError> {
    let path = path.ok_or_else(|| CliError::Config("--config is required".into()))?;
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ScenarioConfig::from_toml(&text).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn render<T: serde::Serialize>(report: &T, format: Format) -> String {
    match format {
        Format::Json => output::json(report),
        Format::Csv => output::key_value_csv(report),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = load(cli.config.as_deref())?;
    let resolved = config.resolve()?;
    let mut failure = None;
    let text = match cli.command {
        Command::LinkCurve { ell_min, ell_max, steps } => {
            let curve = commands::link_curve(&resolved, ell_min, ell_max, steps)?;
            match cli.format.unwrap_or(Format::Csv) {
                Format::Csv => curve.csv(),
                Format::Json => output::json(&curve),
            }
        }
        Command::Optimize => render(&commands::optimize(&resolved)?, cli.format.unwrap_or(Format::Json)),
        Command::Compare { mode } => {
            let mode = match mode {
                Mode::Paper => RecommendMode::PaperFaithful,
                Mode::Full => RecommendMode::Full,
            };
            render(&commands::compare(&resolved, mode)?, cli.format.unwrap_or(Format::Json))
        }
        Command::Validate { dump_geometry } => {
            let mut mc = resolved
                .mc
                .ok_or_else(|| CliError::Config("validate needs an [mc] section".into()))?;
            if let Some(seed) = cli.seed {
                mc.seed = seed;
            }
            let report = commands::validate(&resolved, &mc)?;
            if let Some(path) = dump_geometry {
                let mut buf = Vec::new();
                commands::dump_geometry(&mut buf, report.alpha_bb_km, mc.side_in_alpha, mc.seed)?;
                write_file(&path, &buf)?;
            }
            if !report.all_passed {
                failure = Some(CliError::Validation(report.failures().join(", ")));
            }
            render(&report, cli.format.unwrap_or(Format::Json))
        }
    };
    match &cli.out {
        Some(path) => write_file(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    failure.map_or(Ok(()), Err)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
