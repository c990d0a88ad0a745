use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mppsi_core::audit::{run_check, AuditOptions, CheckKind, Instance, Mutation};
use mppsi_core::orchestrator::{demo, parse_config, run_session, Phase, SessionConfig, SessionTranscript, Transport};
use mppsi_core::{elect_leader, Error, Result};
use serde_json::json;

#[derive(Parser)]
#[command(name = "mppsi", version, about = "Multi-party private set intersection over replicated databases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum TransportArg {
    Mem,
    Net,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Reliability,
    Lemma1,
    Lemma2,
    Lemma3,
    LeaderMi,
    ClientMi,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    None,
    ZeroLocal,
    ZeroIndividual,
    DisableGlobal,
    BreakCorrelation,
    ZeroQueryMask,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoName {
    Sec4,
    #[value(name = "sec7_1")]
    Sec71,
    #[value(name = "sec7_2")]
    Sec72,
}

#[derive(clap::Args)]
struct SessionArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Use this party as leader instead of the cheapest one.
    #[arg(long)]
    leader: Option<u32>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a session and print the intersection.
    Run {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, value_enum)]
        transport: Option<TransportArg>,
        /// Write the transcript here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Print the download cost of every leader candidate.
    Cost {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Verify reliability and privacy by exhaustive enumeration.
    Audit {
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, value_enum, default_value = "all")]
        check: CheckArg,
        /// Largest number of realizations enumerated per check.
        #[arg(long, default_value_t = 10_000_000)]
        bound: u128,
        /// Run against a deliberately broken scheme.
        #[arg(long, value_enum, default_value = "none")]
        mutation: MutationArg,
        #[arg(long)]
        json: bool,
    },
    /// Run one of the worked examples and compare with its known outcome.
    Demo {
        #[arg(value_enum)]
        name: DemoName,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

fn load(args: &SessionArgs) -> Result<SessionConfig> {
    let bytes = fs::read(&args.config).map_err(|e| Error::Config(format!("{}: {e}", args.config.display())))?;
    let mut cfg = parse_config(&bytes)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.leader.is_some() {
        cfg.leader = args.leader;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write_transcript(path: &Path, t: &SessionTranscript) -> Result<()> {
    fs::write(path, t.to_json()).map_err(|e| Error::Transport(format!("{}: {e}", path.display())))
}

fn summary(t: &SessionTranscript) -> serde_json::Value {
    json!({
        "session_id": t.session_id,
        "leader": t.leader,
        "intersection": t.result.intersection,
        "download_cost_actual": t.result.download_cost_actual,
        "download_cost_expected": t.expected_download_cost,
        "messages": {
            "randomness": t.count(Phase::Randomness),
            "query": t.count(Phase::Query),
            "answer": t.count(Phase::Answer),
        },
    })
}

fn print_json(v: serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(&v).expect("report serializes"));
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { session, transport, out, json } => {
            let mut cfg = load(&session)?;
            match transport {
                Some(TransportArg::Mem) => cfg.transport = Transport::Memory,
                Some(TransportArg::Net) => cfg.transport = Transport::Network,
                None => {}
            }
            let t = run_session(&cfg)?;
            t.check_structure()?;
            if let Some(path) = out {
                write_transcript(&path, &t)?;
            }
            if json {
                print_json(summary(&t));
            } else {
                println!("leader: {}", t.leader);
                println!("intersection: {:?}", t.result.intersection);
                println!(
                    "download cost: {} (expected {})",
                    t.result.download_cost_actual, t.expected_download_cost
                );
            }
            Ok(true)
        }
        Command::Cost { config, json } => {
            let bytes = fs::read(&config).map_err(|e| Error::Config(format!("{}: {e}", config.display())))?;
            let cfg = parse_config(&bytes)?;
            let table = mppsi_core::CostTable::compute(&cfg.profiles());
            let elected = elect_leader(&cfg.profiles()).ok().map(|(p, _)| p);
            if json {
                print_json(json!({ "cost_table": table, "argmin": elected }));
            } else {
                for e in &table.entries {
                    match e.cost {
                        Some(c) => println!("{}: {c}", e.party),
                        None => println!("{}: infeasible", e.party),
                    }
                }
                match elected {
                    Some(p) => println!("argmin: {p}"),
                    None => println!("argmin: none (infeasible)"),
                }
            }
            Ok(true)
        }
        Command::Audit { session, check, bound, mutation, json } => {
            let cfg = load(&session)?;
            let instance = Instance::from_config(&cfg)?;
            let opts = AuditOptions {
                bound,
                seed: cfg.seed,
                mutation: match mutation {
                    MutationArg::None => Mutation::None,
                    MutationArg::ZeroLocal => Mutation::ZeroLocal,
                    MutationArg::ZeroIndividual => Mutation::ZeroIndividual,
                    MutationArg::DisableGlobal => Mutation::DisableGlobal,
                    MutationArg::BreakCorrelation => Mutation::BreakCorrelation,
                    MutationArg::ZeroQueryMask => Mutation::ZeroQueryMask,
                },
                ..AuditOptions::default()
            };
            let kinds: Vec<CheckKind> = match check {
                CheckArg::All => CheckKind::ALL.to_vec(),
                CheckArg::Reliability => vec![CheckKind::Reliability],
                CheckArg::Lemma1 => vec![CheckKind::Lemma1],
                CheckArg::Lemma2 => vec![CheckKind::Lemma2],
                CheckArg::Lemma3 => vec![CheckKind::Lemma3],
                CheckArg::LeaderMi => vec![CheckKind::LeaderMi],
                CheckArg::ClientMi => vec![CheckKind::ClientMi],
            };
            if let [kind] = kinds[..] {
                let report = run_check(kind, &instance, &opts)?;
                if json {
                    print_json(json!([report]));
                } else {
                    println!("{report}");
                }
                return Ok(report.pass);
            }
            // With several checks, one that cannot run does not hide the others.
            let mut pass = true;
            let mut out = Vec::new();
            for kind in kinds {
                match run_check(kind, &instance, &opts) {
                    Ok(r) => {
                        pass &= r.pass;
                        if !json {
                            println!("{r}");
                        }
                        out.push(json!(r));
                    }
                    Err(e) => {
                        pass = false;
                        if !json {
                            println!("ERROR {kind}: {e}");
                        }
                        out.push(json!({ "check": kind, "error": e.to_string() }));
                    }
                }
            }
            if json {
                print_json(json!(out));
            }
            Ok(pass)
        }
        Command::Demo { name, out, json } => {
            let name = match name {
                DemoName::Sec4 => "sec4",
                DemoName::Sec71 => "sec7_1",
                DemoName::Sec72 => "sec7_2",
            };
            let (report, t) = demo(name)?;
            if let Some(path) = out {
                write_transcript(&path, &t)?;
            }
            if json {
                print_json(json!(report));
            } else {
                print!("{report}");
            }
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
