use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod output;

use config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "holonoise", version, about = "Environmental error of holonomic gates on the control sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config with [system], [bath], [gate] and [run] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write the artifact here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides run.steps (time steps of the master-equation oracle).
    #[arg(long, global = true)]
    steps: Option<usize>,

    /// Overrides run.samples (random C2 loops in verify-appendix).
    #[arg(long, global = true)]
    samples: Option<usize>,

    /// Table encoding; records (optimize, critical-k, verify-appendix) are always JSON.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Transition error against θ_M at v_max.
    /// CSV: theta_m,delta_tr,delta_tr_meridian,delta_tr_parallel
    SweepTheta,
    /// Transition error of the best scheduled loop against v·t.
    /// CSV: v_t,delta_tr,reference_line
    SweepTime,
    /// Best C1 loop within run.t_ad_ps with its full error breakdown (JSON).
    Optimize,
    /// Critical product v·t of the configured gate (JSON).
    CriticalK,
    /// Error parts against gate time plus power-law exponents.
    /// CSV: t_ad_ps,delta_tr,delta_pd_meridian,delta_pd_parallel
    Scaling,
    /// C2 to C1 replacement inequalities on random loops and an exhaustive
    /// staircase search (JSON; exit 3 on failure).
    VerifyAppendix,
    /// Closed forms against the second-order master equation (exit 3 when a
    /// relative gap exceeds 10%).
    /// CSV: theta_m,delta_phi,t_ad_ps,closed_form,oracle,relative_gap
    OracleCheck,
    /// Scheduled holonomic loop against the pole-to-pole schedule.
    /// CSV: t_ad_ps,delta_holonomic_tr,delta_holonomic_total,delta_stirap_tr,ratio_tr
    CompareStirap,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Infeasible(String),
    Verification(String),
    Runtime(String),
    Io(std::io::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Runtime(_) | CliError::Io(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::Verification(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Infeasible(m) => write!(f, "infeasible: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl From<holonomic_noise::Error> for CliError {
    fn from(e: holonomic_noise::Error) -> Self {
        use holonomic_noise::Error as E;
        match e {
            E::Infeasible(m) => CliError::Infeasible(m),
            E::TimeOutOfRange { .. } => CliError::Infeasible(e.to_string()),
            E::InvalidParameter(_) | E::NotClosed(_) => CliError::Config(e.to_string()),
            E::NoCrossing(_) | E::Quadrature(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(s) = cli.steps {
        cfg.run.steps = s;
    }
    if let Some(s) = cli.samples {
        cfg.run.samples = s;
    }
    let out = commands::Out { path: cli.out, format: cli.format };
    match cli.command {
        Command::SweepTheta => commands::sweep_theta(&cfg, &out),
        Command::SweepTime => commands::sweep_time(&cfg, &out),
        Command::Optimize => commands::optimize(&cfg, &out),
        Command::CriticalK => commands::critical_k(&cfg, &out),
        Command::Scaling => commands::scaling(&cfg, &out),
        Command::VerifyAppendix => commands::verify_appendix(&cfg, &out),
        Command::OracleCheck => commands::oracle_check(&cfg, &out),
        Command::CompareStirap => commands::compare_stirap(&cfg, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.code())
        }
    }
}
