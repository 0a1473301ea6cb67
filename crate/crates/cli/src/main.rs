use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use metavqt_cli::{read_config, run, CliResult, Command, RunConfig};

#[derive(Parser)]
#[command(name = "metavqt", version, about = "Meta-learned Gibbs state preparation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// TOML config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set train.epochs=200`. Repeatable.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (default: $METAVQT_OUT or ./metavqt-out).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Checkpoint to load (eval, warmstart-vqt, qbm).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Seed shortcut for `train.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the resolved config and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Sub {
    /// Train a Meta-VQT preparer.
    TrainMeta(Common),
    /// Train an NN-Meta-VQT preparer.
    TrainNnMeta(Common),
    /// Evaluate a checkpoint on a test grid.
    Eval(Common),
    /// Single-point VQT from meta and random initializations.
    WarmstartVqt(Common),
    /// Train a quantum Boltzmann machine through a frozen preparer.
    Qbm(Common),
    /// Susceptibility crossover scan from the exact oracle.
    PhaseScan(Common),
    /// Exact free energies on a grid.
    Oracle(Common),
}

fn execute(cli: Cli) -> CliResult<String> {
    let (command, common) = match cli.command {
        Sub::TrainMeta(c) => (Command::TrainMeta, c),
        Sub::TrainNnMeta(c) => (Command::TrainNnMeta, c),
        Sub::Eval(c) => (Command::Eval, c),
        Sub::WarmstartVqt(c) => (Command::WarmstartVqt, c),
        Sub::Qbm(c) => (Command::Qbm, c),
        Sub::PhaseScan(c) => (Command::PhaseScan, c),
        Sub::Oracle(c) => (Command::Oracle, c),
    };
    let mut overrides = common.set;
    if let Some(o) = common.out {
        overrides.push(format!("output.dir={}", toml_string(&o.to_string_lossy())));
    }
    if let Some(cp) = common.checkpoint {
        overrides.push(format!("input.checkpoint={}", toml_string(&cp.to_string_lossy())));
    }
    if let Some(seed) = common.seed {
        overrides.push(format!("train.seed={seed}"));
    }
    let file = read_config(common.config.as_deref(), &overrides)?;
    let config = RunConfig::resolve(command, file)?;
    if common.dry_run {
        return Ok(config.to_toml());
    }
    let record = run(&config)?;
    let dir = metavqt_cli::run::run_dir(&config, &record.input_hash);
    let summary = serde_json::json!({
        "command": record.command,
        "dir": dir,
        "input_hash": record.input_hash,
        "metrics": record.metrics,
    });
    Ok(serde_json::to_string_pretty(&summary).expect("plain values"))
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
