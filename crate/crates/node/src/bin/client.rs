//! `client --server <host:port> [--keystore <path>]`

use std::io::BufRead;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use relaymesh_node::cli::{run, ClientOptions};
use tokio::sync::mpsc;

/// Interactive chat client.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(long)]
    server: String,
    /// Keystore file; defaults to `<home>/<user>.skey`.
    #[arg(long)]
    keystore: Option<PathBuf>,
    /// Directory for keystores and pinned server keys.
    #[arg(long, env = "RELAYMESH_HOME")]
    home: Option<PathBuf>,
}

fn default_home() -> PathBuf {
    std::env::var_os("HOME")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
        .join(".relaymesh")
}

#[tokio::main]
async fn main() -> ExitCode {
    let args = Args::parse();
    let opts = ClientOptions {
        server: args.server,
        keystore: args.keystore,
        home: args.home.unwrap_or_else(default_home),
    };
    let (tx, rx) = mpsc::unbounded_channel();
    // Blocking stdin reads stay off the runtime.
    std::thread::spawn(move || {
        for line in std::io::stdin().lock().lines() {
            let Ok(line) = line else { break };
            if tx.send(line).is_err() {
                break;
            }
        }
    });
    let code = run(opts, rx, std::io::stdout()).await;
    ExitCode::from(code as u8)
}
