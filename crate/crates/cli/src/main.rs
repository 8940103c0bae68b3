use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sac_cli::{cmd_forensics, cmd_run, cmd_spv_fuzz, load_scenario, offending, CliError, ProtocolArg, Status};

#[derive(Parser)]
#[command(name = "sac", version, about = "Snap-and-chat simulator, forensics and SPV fuzzing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and check ledger properties.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Scan a transcript for slashable vote pairs.
    Forensics {
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long, value_enum, default_value = "streamlet")]
        protocol: ProtocolArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query light clients against honest and lying provers.
    SpvFuzz {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1000)]
        queries: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cmd: Command) -> Result<Status, CliError> {
    match cmd {
        Command::Run { scenario, out, seed } => {
            let mut sc = load_scenario(&scenario)?;
            if let Some(s) = seed {
                sc.seed = s;
            }
            let (report, status) = cmd_run(&sc, &out)?;
            for (name, outcome) in report.checks.all() {
                println!("{name:<12} {}", serde_json::to_string(&outcome).expect("plain enum").trim_matches('"'));
            }
            println!("spv false accepts {}, accused {}", report.spv.false_accepts, report.forensics.accused_count);
            Ok(status)
        }
        Command::Forensics { transcript, protocol, out } => {
            let (report, status) = cmd_forensics(&transcript, protocol, &out)?;
            println!("{} evidence, {} accused", report.evidence.len(), report.accused.len());
            Ok(status)
        }
        Command::SpvFuzz { scenario, queries, seed, out } => {
            let sc = load_scenario(&scenario)?;
            let (o, status) = cmd_spv_fuzz(&sc, queries, seed, &out)?;
            let s = o.summary;
            println!("queries {}, accepted {}, unavailable {}, false accepts {}, misses {}", s.queries, s.accepted, s.unavailable, s.false_accepts, o.report.misses);
            if let Some((slot, node, tx)) = offending(&o.report).filter(|_| status != Status::Pass) {
                eprintln!("offending query: slot {slot}, node {node}, tx {tx}");
            }
            Ok(status)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = dispatch(cli.command).unwrap_or_else(|e| {
        eprintln!("{}", e.to_json());
        Status::InputError
    });
    ExitCode::from(status as u8)
}
