use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bregman_bayes::experiments::config::ScenarioName;
use bregman_bayes::experiments::{run_dilemma, run_stage, ScenarioConfig, Stage};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bregman-bayes", version, about = "MAP and CM estimation for linear inverse problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario config file (TOML)
    config: PathBuf,
    /// Override `[scenario] seed`
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: out/<scenario>)
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate truth and data
    Scenario(Common),
    /// Solve for the MAP estimate
    Map(Common),
    /// Sample the posterior and compute the CM estimate
    Cm(Common),
    /// MAP, CM and error metrics
    Estimate(Common),
    /// Full run with every Bayes-cost check
    Verify(Common),
    /// TV discretization sweep
    Dilemma(Common),
    /// Print the fully resolved config of a preset
    Preset {
        /// deblur2d, tv1d or ct2d
        name: String,
    },
}

fn load(common: &Common) -> bregman_bayes::Result<(ScenarioConfig, PathBuf)> {
    let mut cfg = ScenarioConfig::from_file(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.scenario.seed = seed;
    }
    let out = common
        .out_dir
        .clone()
        .unwrap_or_else(|| Path::new("out").join(cfg.scenario.name.to_string()));
    Ok((cfg, out))
}

fn run(cli: Cli) -> bregman_bayes::Result<()> {
    let (common, stage) = match &cli.command {
        Command::Scenario(c) => (c, Some(Stage::Scenario)),
        Command::Map(c) => (c, Some(Stage::Map)),
        Command::Cm(c) => (c, Some(Stage::Cm)),
        Command::Estimate(c) => (c, Some(Stage::Estimate)),
        Command::Verify(c) => (c, Some(Stage::Verify)),
        Command::Dilemma(c) => (c, None),
        Command::Preset { name } => {
            let name: ScenarioName = name.parse()?;
            let cfg = ScenarioConfig::preset(name)
                .ok_or_else(|| bregman_bayes::Error::Config("the custom scenario has no preset".into()))?;
            print!("{}", cfg.to_toml_string()?);
            return Ok(());
        }
    };
    let (cfg, out) = load(common)?;
    let manifest = match stage {
        Some(stage) => run_stage(&cfg, stage, &out)?,
        None => {
            let dir = if common.out_dir.is_none() { Path::new("out").join("dilemma") } else { out };
            let (record, manifest) = run_dilemma(&cfg, Some(&dir))?;
            println!("{}", record.to_csv());
            println!("sqrt rule, MAP range non-increasing: {}", record.sqrt_map_range_nonincreasing);
            if let Some(b) = record.const_cm_tv_nondecreasing {
                println!("constant lambda, CM TV non-decreasing: {b}");
            }
            println!(
                "constant lambda, MAP TV change between the finest levels: {:.2}%",
                100.0 * record.const_map_tv_rel_change
            );
            manifest.expect("an output directory was given")
        }
    };
    println!("wrote {} artifacts (config {})", manifest.artifacts.len(), &manifest.config_hash[..12]);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
