use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use mdkinetic_cli::config::{parse_config, Preset, RunConfig};
use mdkinetic_cli::experiments::{run_consistency, run_meanfield, run_moments, run_therapy};

const DEFAULTS: &str = "\
Configuration keys (TOML, all optional; unknown keys are rejected):
  beta_N beta_D beta_M beta_C        0.2 0.1 0.2 0.1
  sigma2_N sigma2_D sigma2_M sigma2_C  0.01 each (noise variances, not standard deviations)
  gamma_M gamma_C                    0.05 0.05
  nu_control                         0      therapy efficacy, at most 1
  epsilon                            1      recorded scaling of the parameter set
  preset                             fig1 for `moments`, sec41 otherwise
                                     fig1 = (9, 1, 0.1, 0.5), sec41 = (9, 1, 0.6, 0.6)
  initial_means                      overrides the preset, [m_N, m_D, m_M, m_C]
  initial_variance                   0.1    uniform boxes of width sqrt(12 V), cut at 0
  length n_x                         12 801 mean-field grid on [0, length]
  n_particles seed workers           100000 2024 all threads
  dt_max                             0.5    DSMC internal step bound
  ode_dt                             0.01   RK4 step of the moment equations
  epsilons                           [0.001, 0.01, 0.1, 0.5]
  p_values                           [0.625, 0.75, 0.875]
  horizon                            100 moments, 10 consistency, 75 meanfield
  report_interval                    0.1 moments, 0.5 consistency, 0.1 meanfield
  output_dir                         out";

#[derive(Debug, Parser)]
#[command(name = "mdkinetic", version, about = "Kinetic and mean-field experiments for the muscle-damage immune model", after_help = DEFAULTS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed for the particle runs.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Initial-mean preset: fig1 or sec41.
    #[arg(long)]
    preset: Option<Preset>,
    /// Comma-separated scaling parameters for `consistency`.
    #[arg(long, value_delimiter = ',')]
    epsilon: Option<Vec<f64>>,
    /// Comma-separated energy-distance exponents in (1/2, 1).
    #[arg(long = "p", value_delimiter = ',')]
    p_values: Option<Vec<f64>>,
    /// Therapy efficacy.
    #[arg(long)]
    nu: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Moment equations to equilibrium, with phase-plane data.
    Moments(Common),
    /// Particle runs for each epsilon against the moment equations.
    Consistency(Common),
    /// Fokker-Planck densities, distances to equilibrium and decay envelopes.
    Meanfield(Common),
    /// Moments and mean-field runs with the therapy control (default nu = 0.1).
    Therapy(Common),
    /// Parse and check a configuration without running anything.
    ValidateConfig(Common),
}

fn resolve(c: &Common) -> Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    if let Some(p) = c.preset {
        cfg.preset = Some(p);
    }
    if let Some(e) = &c.epsilon {
        cfg.epsilons = e.clone();
    }
    if let Some(p) = &c.p_values {
        cfg.p_values = p.clone();
    }
    if let Some(nu) = c.nu {
        cfg.params.nu_control = nu;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Moments(c) => {
            let cfg = resolve(&c)?;
            print!("{}", run_moments(&cfg, &cfg.output_dir.join("moments"))?);
        }
        Command::Consistency(c) => {
            let cfg = resolve(&c)?;
            print!("{}", run_consistency(&cfg, &cfg.output_dir.join("consistency"))?);
        }
        Command::Meanfield(c) => {
            let cfg = resolve(&c)?;
            print!("{}", run_meanfield(&cfg, &cfg.output_dir.join("meanfield"))?);
        }
        Command::Therapy(c) => {
            let nu = c.nu.unwrap_or(0.1);
            let cfg = resolve(&c)?;
            for r in run_therapy(&cfg, nu, &cfg.output_dir.join("therapy"))? {
                print!("{r}");
            }
        }
        Command::ValidateConfig(c) => {
            let cfg = resolve(&c)?;
            println!("configuration ok");
            println!("{cfg:#?}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
