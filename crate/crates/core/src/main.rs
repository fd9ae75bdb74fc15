use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use ran_import::kinetics::{Compartment, Species};
use ran_import::sim::{self, SimConfig};
use ran_import::Error;

#[derive(Parser)]
#[command(name = "ran-import", version, about = "Two-compartment DG simulator for Ran-mediated nuclear import")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Directory for CSV output (overrides the config).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Switch microtubule transport off regardless of the config.
    #[arg(long, global = true)]
    no_advection: bool,

    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and write timeseries.csv.
    Simulate { config: PathBuf },
    /// Compare runs with and without microtubule transport.
    Nocodazole { config: PathBuf },
    /// Convergence study with manufactured solutions.
    Converge {
        config: PathBuf,
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Compare compartment averages with the well-mixed model.
    Oracle {
        config: PathBuf,
        #[arg(long)]
        scale: Option<f64>,
    },
}

fn load(path: &Path, cli: &Cli) -> Result<SimConfig, Error> {
    let mut cfg = SimConfig::load(path)?;
    if cli.no_advection {
        cfg.model.advection = false;
    }
    if let Some(dir) = &cli.output_dir {
        cfg.output.directory = dir.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Simulate { config } => {
            let cfg = load(config, cli)?;
            let out = sim::run_simulation(&cfg, Some(&cfg.output.directory))?;
            let last = out.series.last().expect("at least the initial sample");
            let rt_ratio = last.average(Species::Rt, Compartment::Nucleus) / last.average(Species::Rt, Compartment::Cytoplasm);
            let drift = out.series.max_abs_drift();
            info!("t = {:.3} s: nuclear/cytoplasmic RanGTP {:.3}", last.t, rt_ratio);
            info!("nuclear cargo {:.4} uM", sim::nuclear_cargo(last));
            info!("max drift ran {:.2e} cargo {:.2e} receptor {:.2e}", drift[0], drift[1], drift[2]);
        }
        Command::Nocodazole { config } => {
            let cfg = load(config, cli)?;
            let report = sim::run_nocodazole_experiment(&cfg, Some(&cfg.output.directory))?;
            print!("{}", report.to_text());
        }
        Command::Converge { config, levels } => {
            let cfg = load(config, cli)?;
            let levels = levels.unwrap_or(cfg.experiment.levels);
            if levels < 3 {
                return Err(Error::Config(format!("--levels must be at least 3, got {levels}")));
            }
            std::fs::create_dir_all(&cfg.output.directory)?;
            let mut text = String::new();
            for &m in &cfg.experiment.degrees {
                let table = sim::run_convergence_study(&cfg.geometry, &cfg.model, m, cfg.experiment.coarse_h, levels)?;
                info!("degree {m}: finest-pair rate {:.3}", table.finest_rate());
                text.push_str(&table.to_text());
            }
            std::fs::write(cfg.output.directory.join("convergence.csv"), &text)?;
            print!("{text}");
        }
        Command::Oracle { config, scale } => {
            let cfg = load(config, cli)?;
            let scale = scale.unwrap_or(cfg.experiment.diffusion_scale);
            std::fs::create_dir_all(&cfg.output.directory)?;
            let report = sim::run_oracle_comparison(&cfg, scale, Some(&cfg.output.directory))?;
            print!("{}", report.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Error::Step { time, .. } = &e {
                error!("last good state at t = {time:.4} s minus one step");
            }
            error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
