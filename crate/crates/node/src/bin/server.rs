//! `server --agency <name> --listen <host:port> --config <file> --data-dir <dir>`

use std::path::PathBuf;

use anyhow::Context;
use clap::Parser;
use relaymesh_core::server::ServerConfig;
use relaymesh_node::daemons::{server_keys, start_server, ServerSettings};
use relaymesh_node::host::stdout_sink;
use tokio::net::TcpListener;

/// The agency server: accounts, rosters, audit and federation.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(long)]
    agency: String,
    #[arg(long)]
    listen: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data_dir: PathBuf,
    /// Browser gateway address; overrides `gateway` in the config.
    #[arg(long)]
    gateway: Option<String>,
    /// Print the server public key (creating it if needed) and exit. Peers
    /// need it for their `peer.<agency>` lines.
    #[arg(long)]
    print_key: bool,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    if args.print_key {
        std::fs::create_dir_all(&args.data_dir)?;
        println!("{}", server_keys(&args.data_dir)?.public.to_hex());
        return Ok(());
    }
    let listen = args.listen.context("--listen is required")?;
    let config = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            ServerConfig::parse(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => ServerConfig::default(),
    };
    let listener = TcpListener::bind(&listen).await.with_context(|| format!("binding {listen}"))?;
    let gateway = match args.gateway.as_ref().or(config.gateway.as_ref()) {
        Some(addr) => Some(TcpListener::bind(addr).await.with_context(|| format!("binding gateway {addr}"))?),
        None => None,
    };
    let settings = ServerSettings {
        agency: args.agency,
        config,
        data_dir: args.data_dir,
    };
    let mut server = start_server(settings, listener, gateway, stdout_sink()).await?;
    println!("server key {}", server.public_key.to_hex());
    server.wait().await;
    Ok(())
}
