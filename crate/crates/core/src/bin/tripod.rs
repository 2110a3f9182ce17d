use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tripod_core::cli::{exit_code, run, RunConfig, ScenarioName, KEYS_HELP};
use tripod_core::Result;

/// Tripod-atom holonomy simulations with deterministic CSV output.
#[derive(Parser)]
#[command(name = "tripod", version, after_help = KEYS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Recoil oscillation of a D2 atom at fixed phases, pinned and thermal.
    Fig2(Common),
    /// Final populations against loop size phi0.
    Fig3(Common),
    /// Loop holonomy against its cyclic shift, pinned and reconstructed.
    Fig4(Common),
    /// Temperature fit to synthetic P3 - P1 data.
    Thermometry(Common),
    /// Full four-level model against the adiabatic model over the loop.
    Adiabaticity(Common),
    /// Holonomy of the configured loop or vertex list.
    Loop(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for Monte-Carlo sampling and synthetic noise.
    #[arg(long)]
    seed: Option<u64>,
    /// Loop size in units of pi.
    #[arg(long, allow_hyphen_values = true)]
    phi0: Option<f64>,
    /// Cloud temperature in microkelvin.
    #[arg(long = "temperature-uK", allow_hyphen_values = true)]
    temperature_uk: Option<f64>,
    /// Rabi frequency of each beam in kHz.
    #[arg(long = "rabi-kHz", allow_hyphen_values = true)]
    rabi_khz: Option<f64>,
    /// Samples per loop segment in time-resolved output.
    #[arg(long)]
    steps: Option<usize>,
}

impl Common {
    fn resolve(&self, scenario: ScenarioName) -> Result<RunConfig> {
        let mut cfg = RunConfig::defaults(scenario);
        if let Some(path) = &self.config {
            cfg.apply_text(&std::fs::read_to_string(path)?)?;
        }
        if let Some(p) = &self.out {
            cfg.out = Some(p.clone());
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = self.phi0 {
            cfg.phi0_over_pi = p;
        }
        if let Some(t) = self.temperature_uk {
            cfg.temperature_uk = t;
        }
        if let Some(r) = self.rabi_khz {
            cfg.rabi_khz = Some(r);
        }
        if let Some(n) = self.steps {
            cfg.steps = n;
        }
        Ok(cfg)
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let (scenario, common) = match &cli.command {
        Command::Fig2(c) => (ScenarioName::Fig2, c),
        Command::Fig3(c) => (ScenarioName::Fig3, c),
        Command::Fig4(c) => (ScenarioName::Fig4, c),
        Command::Thermometry(c) => (ScenarioName::Thermometry, c),
        Command::Adiabaticity(c) => (ScenarioName::Adiabaticity, c),
        Command::Loop(c) => (ScenarioName::Loop, c),
    };
    let cfg = common.resolve(scenario)?;
    let out = run(&cfg)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, &out.csv)?,
        None => print!("{}", out.csv),
    }
    for line in &out.summary {
        eprintln!("{line}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
