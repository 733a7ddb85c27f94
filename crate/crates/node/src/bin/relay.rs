//! `relay --id <NodeId> --listen <host:port> --config <file>`

use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use relaymesh_core::addr::NodeId;
use relaymesh_node::daemons::{start_relay, RelaySettings};
use relaymesh_node::host::stdout_sink;
use tokio::net::TcpListener;

/// Forwards sealed envelopes one hop along their path.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(long)]
    id: NodeId,
    #[arg(long)]
    listen: String,
    /// `agency`, `nodes` and `server.<agency>` keys.
    #[arg(long)]
    config: PathBuf,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let settings = RelaySettings::load(&args.config)?;
    let listener = TcpListener::bind(&args.listen)
        .await
        .with_context(|| format!("binding {}", args.listen))?;
    let mut relay = start_relay(args.id, &settings, listener, stdout_sink());
    relay.wait().await;
    Ok(())
}
