//! `simnet run --seed <n> --scenario <file>` and `simnet fuzz --seeds <a>..<b>`

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use relaymesh_core::simnet::parse_scenario;
use relaymesh_node::sim::{fuzz_one, parse_seed_range, run, Shape};

/// Runs the daemons on a deterministic in-memory network and checks the
/// confidentiality and audit oracles.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Runs one script.
    Run {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        scenario: PathBuf,
        /// Writes every observed frame here, one per line.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[command(flatten)]
        shape: ShapeArgs,
    },
    /// Runs a random script per seed.
    Fuzz {
        /// `<a>..<b>`, end exclusive.
        #[arg(long)]
        seeds: String,
        #[command(flatten)]
        shape: ShapeArgs,
    },
}

#[derive(Args)]
struct ShapeArgs {
    #[arg(long, default_value_t = 2)]
    agencies: usize,
    #[arg(long, default_value_t = 3)]
    relays: usize,
    #[arg(long, default_value_t = 3)]
    clients: usize,
    #[arg(long, default_value_t = relaymesh_core::routing::DEFAULT_HOPS)]
    hops: usize,
}

impl From<ShapeArgs> for Shape {
    fn from(a: ShapeArgs) -> Self {
        Shape {
            agencies: a.agencies,
            relays: a.relays,
            clients: a.clients,
            hops: a.hops,
        }
    }
}

fn main() -> anyhow::Result<ExitCode> {
    match Cli::parse().cmd {
        Cmd::Run {
            seed,
            scenario,
            trace,
            shape,
        } => {
            let text = std::fs::read_to_string(&scenario).with_context(|| format!("reading {}", scenario.display()))?;
            let script = parse_scenario(&text)?;
            let report = run(seed, shape.into(), &script)?;
            if let Some(path) = trace {
                std::fs::write(&path, &report.trace).with_context(|| format!("writing {}", path.display()))?;
            }
            println!("{report}");
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::Fuzz { seeds, shape } => {
            let range = parse_seed_range(&seeds).map_err(anyhow::Error::msg)?;
            let shape: Shape = shape.into();
            let (mut passed, mut total) = (0, 0);
            for seed in range {
                let report = fuzz_one(seed, shape);
                total += 1;
                if report.passed() {
                    passed += 1;
                }
                println!("{report}");
            }
            println!("fuzz: {passed}/{total} passed");
            Ok(if passed == total { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}
