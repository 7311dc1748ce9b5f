use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use linopt_verify::{run_all, Depth};
use linopt::scenarios::{self, protocol_warning, run_scenario, ProtocolChoice, RunConfig, ScenarioError, SCENARIOS};

/// Linear-optics entanglement generator and protocol simulator.
#[derive(Parser)]
#[command(name = "sim", version)]
struct Cli {
    /// Worker threads for placement sweeps (default: all cores).
    #[arg(long, env = "SIM_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its report.
    Run(RunArgs),
    /// Run the acceptance suite, one line per criterion.
    VerifyAll {
        /// Sample placements and phase vectors instead of enumerating them.
        #[arg(long, conflicts_with = "full")]
        quick: bool,
        /// Exhaustive sweeps (the default).
        #[arg(long)]
        full: bool,
    },
    /// List scenario ids.
    List,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario id (see `sim list`).
    scenario: String,
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Output::Table)]
    out: Output,
    /// Enumerate every input placement and report the minimum.
    #[arg(long)]
    sweep: bool,
    /// Sweep this many seeded random placements.
    #[arg(long)]
    sample: Option<usize>,
    /// Copies of the generator (1, 2, 4 or 8).
    #[arg(long)]
    copies: Option<u32>,
    /// Hadamard network size.
    #[arg(long)]
    k: Option<u32>,
    /// Named protocol for dna-run.
    #[arg(long)]
    protocol: Option<String>,
    /// Random phase vectors for dna-phase-invariance.
    #[arg(long)]
    phase_vectors: Option<usize>,
    /// Write the dna-run transcript here as JSON lines.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Output {
    Json,
    Table,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: {e}");
        }
    }
    match cli.command {
        Command::Run(args) => run(args),
        Command::VerifyAll { quick, .. } => verify_all(if quick { Depth::Quick } else { Depth::Full }),
        Command::List => {
            emit(&(SCENARIOS.join("\n") + "\n"));
            ExitCode::SUCCESS
        }
    }
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}\n");
    eprintln!("{}", Cli::command().render_usage());
    eprintln!("scenarios: {}", SCENARIOS.join(", "));
    ExitCode::from(2)
}

fn config(args: &RunArgs) -> Result<RunConfig, String> {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            RunConfig::from_toml(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => RunConfig::default(),
    };
    let flags = RunConfig {
        seed: args.seed,
        sweep: args.sweep.then_some(true),
        sample: args.sample,
        copies: args.copies,
        k: args.k,
        protocol: args.protocol.clone().map(ProtocolChoice::Named),
        phase_vectors: args.phase_vectors,
        ..RunConfig::default()
    };
    Ok(file.overridden_by(flags))
}

fn run(args: RunArgs) -> ExitCode {
    if !SCENARIOS.contains(&args.scenario.as_str()) {
        return usage_error(&format!("unknown scenario {:?}", args.scenario));
    }
    let cfg = match config(&args) {
        Ok(c) => c,
        Err(e) => return usage_error(&e),
    };
    if args.scenario == "dna-run" {
        if let Some(w) = scenarios::dna_run_protocol(&cfg).ok().as_ref().and_then(protocol_warning) {
            eprintln!("{w}");
        }
    }
    let report = match run_scenario(&args.scenario, &cfg) {
        Ok(r) => r,
        Err(ScenarioError::Unknown(s)) => return usage_error(&format!("unknown scenario {s:?}")),
        Err(ScenarioError::Sim(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(path) = &args.transcript {
        let written = scenarios::dna_run_transcript(&cfg)
            .map_err(|e| e.to_string())
            .and_then(|t| std::fs::write(path, t).map_err(|e| format!("{}: {e}", path.display())));
        if let Err(e) = written {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match args.out {
        Output::Json => emit(&(report.to_json() + "\n")),
        Output::Table => emit(&report.to_table()),
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn verify_all(depth: Depth) -> ExitCode {
    let results = run_all(depth);
    let failed = results.iter().filter(|r| !r.passed()).count();
    let mut text: String = results.iter().map(|r| r.line() + "\n").collect();
    text += &format!("{} of {} criteria pass\n", results.len() - failed, results.len());
    emit(&text);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
