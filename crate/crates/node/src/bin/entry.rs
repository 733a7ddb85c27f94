//! `entry --listen <host:port> --nodes <file> --agency <name>`

use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use relaymesh_core::routing::{parse_nodes_file, PathPolicy};
use relaymesh_core::server::ServerConfig;
use relaymesh_node::daemons::{start_entry, EntrySettings};
use relaymesh_node::host::stdout_sink;
use tokio::net::TcpListener;

/// Picks relay paths for an agency's outgoing letters.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(long)]
    listen: String,
    /// One `node_id host:port` per line.
    #[arg(long)]
    nodes: PathBuf,
    /// May be omitted when the config names it.
    #[arg(long)]
    agency: Option<String>,
    #[arg(long)]
    hops: Option<usize>,
    /// `round_robin` or `uniform_random`.
    #[arg(long)]
    policy: Option<PathPolicy>,
    /// The agency's server config; `agency`, `hops` and `path_policy` are
    /// read from it.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let config = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ServerConfig::parse(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ServerConfig::default(),
    };
    let agency = args
        .agency
        .or(config.agency)
        .context("--agency is required when the config does not name one")?;
    let text = std::fs::read_to_string(&args.nodes).with_context(|| format!("reading {}", args.nodes.display()))?;
    let settings = EntrySettings {
        agency,
        nodes: parse_nodes_file(&text)?,
        hops: args.hops.unwrap_or(config.hops),
        policy: args.policy.unwrap_or(config.path_policy),
    };
    let listener = TcpListener::bind(&args.listen)
        .await
        .with_context(|| format!("binding {}", args.listen))?;
    let mut entry = start_entry(&settings, listener, stdout_sink())?;
    entry.wait().await;
    Ok(())
}
