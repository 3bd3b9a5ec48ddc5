use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod settings;

#[derive(Parser)]
#[command(name = "aleph-lab", version, about = "Run and check simulated atomic broadcast experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario for its step budget and summarize it.
    Run(ScenarioArgs),
    /// Run trustless beacon setup followed by a series of tosses.
    Beacon {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Tosses after setup (0 runs setup only).
        #[arg(long, default_value_t = 5)]
        tosses: u64,
    },
    /// Mount an attack and report what honest nodes store.
    Attack {
        #[arg(long, default_value = "fork-bomb")]
        attack: String,
        /// Depth of the attack.
        #[arg(long = "K", default_value_t = 6)]
        k: usize,
        /// `quick` runs weakened and hardened quick mode; `aleph` runs RBC mode; `all` runs the three.
        #[arg(long, default_value = "quick")]
        mode: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run acceptance suites by name or number (`all` for every one).
    Verify {
        #[arg(default_value = "all")]
        suites: Vec<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
pub struct ScenarioArgs {
    /// JSON scenario file; flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Byzantine behaviors for the top node ids, e.g. `forker:2`, `garbage+withholder`, `crash@1`.
    #[arg(long)]
    pub byzantine: Option<String>,
    /// aleph or quick.
    #[arg(long)]
    pub mode: Option<String>,
    /// dealer or trustless.
    #[arg(long)]
    pub beacon: Option<String>,
    /// fair, synchronous, or adversarial[:slow].
    #[arg(long)]
    pub scheduler: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of consecutive seeds to run.
    #[arg(long)]
    pub repeat: Option<u64>,
    /// Step budget per run.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Transactions injected per step.
    #[arg(long)]
    pub tx_rate: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ALEPH_LAB_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.cmd {
        Command::Run(args) => commands::run(&args),
        Command::Beacon { scenario, tosses } => commands::beacon(&scenario, tosses),
        Command::Attack { attack, k, mode, seed, budget, out_dir } => {
            commands::attack(&attack, k, &mode, seed, budget, out_dir.as_deref())
        }
        Command::Verify { suites, out_dir } => commands::verify(&suites, out_dir.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
