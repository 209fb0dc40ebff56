use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dualad_cli::{cmd_bench, cmd_encode, cmd_run, CliError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "dualad", version, about = "Closed-loop driving simulator with a speed-supervising reasoner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its trace and score card.
    Run(RunArgs),
    /// Simulate a corpus in both modes and write score reports.
    Bench(BenchArgs),
    /// Print the text description of a scenario at one instant.
    Encode(EncodeArgs),
}

#[derive(Args)]
struct Shared {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// idm, lattice or sampling.
    #[arg(long)]
    planner: Option<String>,
    /// none, mock, remote or replay.
    #[arg(long)]
    reasoner: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recorded replies for `--reasoner replay`.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Seed stored in the traces.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// non_reactive or reactive.
    #[arg(long)]
    mode: Option<String>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct BenchArgs {
    /// Directory of scenario files (or one holding `scenarios/`).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// JSON file whose `scenario_ids` restrict the corpus.
    #[arg(long)]
    suite: Option<PathBuf>,
    /// Also write the worst-k benchmark set (0 = none).
    #[arg(long)]
    k: Option<usize>,
    /// Simulation threads (default: one per CPU).
    #[arg(long)]
    workers: Option<usize>,
    /// Also write every trace under `<out>/traces/`.
    #[arg(long)]
    traces: bool,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Time in seconds.
    #[arg(long, allow_negative_numbers = true)]
    time: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn shared_overrides(s: Shared) -> (Option<PathBuf>, Overrides) {
    let o = Overrides {
        planner: s.planner,
        reasoner: s.reasoner,
        out: s.out,
        replay: s.replay,
        seed: s.seed,
        ..Default::default()
    };
    (s.config, o)
}

enum Action {
    Run,
    Bench { traces: bool },
    Encode,
}

fn execute(command: Command) -> Result<(), CliError> {
    let (config, overrides, action) = match command {
        Command::Run(a) => {
            let (config, o) = shared_overrides(a.shared);
            let o = Overrides { scenario: a.scenario, mode: a.mode, ..o };
            (config, o, Action::Run)
        }
        Command::Bench(a) => {
            let (config, o) = shared_overrides(a.shared);
            let o = Overrides {
                corpus: a.corpus,
                suite: a.suite,
                k: a.k,
                workers: a.workers,
                ..o
            };
            (config, o, Action::Bench { traces: a.traces })
        }
        Command::Encode(a) => {
            let o = Overrides { scenario: a.scenario, time: a.time, ..Default::default() };
            (a.config, o, Action::Encode)
        }
    };
    let mut cfg = match &config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply(overrides);
    let resolved = cfg.resolve()?;
    match action {
        Action::Run => cmd_run(&resolved).map(|_| ()),
        Action::Bench { traces } => cmd_bench(&resolved, traces).map(|_| ()),
        Action::Encode => cmd_encode(&resolved),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dualad: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
