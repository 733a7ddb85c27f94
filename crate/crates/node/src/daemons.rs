//! Wiring for the three network daemons: relay, entry node and agency
//! server. The binaries parse flags and call these; the integration tests
//! call them directly on ephemeral ports.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use relaymesh_core::addr::{is_valid_agency, EndpointId, NodeId};
use relaymesh_core::config::{parse_key_values, ConfigError};
use relaymesh_core::crypto::{keystore, KeyPair, PublicKey};
use relaymesh_core::routing::{parse_nodes_file, EntryNode, NodeEntry, NodeRegistry, PathPolicy, RelayNode};
use relaymesh_core::server::{AgencyServer, ServerConfig, Storage};
use tokio::net::TcpListener;
use tokio::task::JoinHandle;

use crate::gateway;
use crate::host::{serve_tcp, Host, HostHandle, LogSink};

/// A daemon running on the current runtime. Dropping it stops it.
pub struct Running {
    pub handle: HostHandle,
    tasks: Vec<JoinHandle<()>>,
}

impl Running {
    pub fn stop(&mut self) {
        for t in &self.tasks {
            t.abort();
        }
    }

    /// Waits on the daemon's actor task; in practice, forever.
    pub async fn wait(&mut self) {
        if let Some(t) = self.tasks.pop() {
            let _ = t.await;
        }
    }
}

impl Drop for Running {
    fn drop(&mut self) {
        self.stop();
    }
}

fn launch<N: relaymesh_core::node::Node + 'static>(
    host: Host<N>,
    listener: TcpListener,
    log: LogSink,
) -> Running {
    let handle = host.handle();
    let accept = tokio::spawn(serve_tcp(listener, handle.clone(), log));
    let actor = tokio::spawn(host.run());
    Running {
        handle,
        tasks: vec![accept, actor],
    }
}

// ---- relay ---------------------------------------------------------------

/// Relay configuration.
///
/// ```text
/// agency = A
/// nodes = nodes-A.txt        # relative to this file
/// server.A = 127.0.0.1:7000
/// server.B = 127.0.0.1:7200
/// ```
///
/// `server.<agency>` entries are where last hops deliver: the own server
/// for client and server terminals, peer servers for peer terminals.
#[derive(Debug, Clone)]
pub struct RelaySettings {
    pub agency: String,
    pub nodes: Vec<NodeEntry>,
    pub servers: BTreeMap<String, String>,
}

impl RelaySettings {
    pub fn parse(text: &str, base: &Path) -> anyhow::Result<Self> {
        let mut agency = None;
        let mut nodes = Vec::new();
        let mut servers = BTreeMap::new();
        for e in parse_key_values(text)? {
            match e.key.as_str() {
                "agency" if is_valid_agency(&e.value) => agency = Some(e.value.clone()),
                "nodes" => {
                    let path = base.join(&e.value);
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("reading nodes file {}", path.display()))?;
                    nodes = parse_nodes_file(&text)?;
                }
                key => match key.strip_prefix("server.") {
                    Some(a) if is_valid_agency(a) => {
                        servers.insert(a.to_string(), e.value.clone());
                    }
                    _ => return Err(ConfigError::new(e.line, format!("unknown or invalid key {key:?}")).into()),
                },
            }
        }
        let Some(agency) = agency else {
            bail!("relay config needs `agency = <name>`");
        };
        Ok(RelaySettings { agency, nodes, servers })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn directory(&self) -> BTreeMap<EndpointId, String> {
        let mut dir: BTreeMap<EndpointId, String> =
            self.nodes.iter().map(|n| (EndpointId::from(&n.id), n.endpoint.clone())).collect();
        for (agency, addr) in &self.servers {
            dir.insert(EndpointId::server(agency), addr.clone());
        }
        dir
    }
}

pub fn start_relay(id: NodeId, settings: &RelaySettings, listener: TcpListener, log: LogSink) -> Running {
    // Over TCP a client is only reachable through its server connection.
    let node = RelayNode::new(id, settings.agency.clone()).with_client_gateway(EndpointId::server(&settings.agency));
    let host = Host::new(node, settings.directory()).with_log(log.clone());
    launch(host, listener, log)
}

// ---- entry -----------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct EntrySettings {
    pub agency: String,
    pub nodes: Vec<NodeEntry>,
    pub hops: usize,
    pub policy: PathPolicy,
}

pub fn start_entry(settings: &EntrySettings, listener: TcpListener, log: LogSink) -> anyhow::Result<Running> {
    let registry = NodeRegistry::new(settings.nodes.clone())?;
    let directory = settings
        .nodes
        .iter()
        .map(|n| (EndpointId::from(&n.id), n.endpoint.clone()))
        .collect();
    let node = EntryNode::new(settings.agency.clone(), registry, settings.hops, settings.policy);
    let host = Host::new(node, directory).with_log(log.clone());
    Ok(launch(host, listener, log))
}

// ---- server ----------------------------------------------------------------

pub const SERVER_KEY_FILE: &str = "server.skey";

/// Loads the server keypair from `data_dir`, creating it on first start.
pub fn server_keys(data_dir: &Path) -> anyhow::Result<KeyPair> {
    let path = data_dir.join(SERVER_KEY_FILE);
    if path.exists() {
        return keystore::read(&path).with_context(|| format!("reading {}", path.display()));
    }
    let kp = KeyPair::from_rng(&mut rand::rngs::OsRng);
    keystore::write(&path, &kp).with_context(|| format!("writing {}", path.display()))?;
    Ok(kp)
}

pub struct ServerSettings {
    pub agency: String,
    pub config: ServerConfig,
    pub data_dir: PathBuf,
}

pub struct RunningServer {
    pub daemon: Running,
    pub public_key: PublicKey,
    gateway: Option<JoinHandle<()>>,
}

impl Drop for RunningServer {
    fn drop(&mut self) {
        if let Some(g) = &self.gateway {
            g.abort();
        }
    }
}

impl RunningServer {
    pub async fn wait(&mut self) {
        self.daemon.wait().await;
    }
}

/// Starts the server on `listener`, plus the browser gateway on `gateway`
/// when given.
pub async fn start_server(
    settings: ServerSettings,
    listener: TcpListener,
    gateway: Option<TcpListener>,
    log: LogSink,
) -> anyhow::Result<RunningServer> {
    let ServerSettings { agency, config, data_dir } = settings;
    if let Some(a) = &config.agency {
        if a != &agency {
            bail!("config is for agency {a}, but --agency is {agency}");
        }
    }
    std::fs::create_dir_all(&data_dir).with_context(|| format!("creating {}", data_dir.display()))?;
    let keys = server_keys(&data_dir)?;
    let public_key = keys.public;
    let storage = Storage::open(&data_dir).with_context(|| format!("opening storage in {}", data_dir.display()))?;

    let mut server = AgencyServer::new(&agency, keys, storage)?.with_password_params(config.password);
    let mut directory = BTreeMap::new();
    for (peer, p) in &config.peers {
        server = server.with_peer(peer, p.pubkey);
        directory.insert(EndpointId::server(peer), p.endpoint.clone());
    }
    match &config.entry {
        Some(addr) => {
            directory.insert(EndpointId::entry(&agency), addr.clone());
        }
        None => log(&format!(
            "ts={} event=config node=server:{agency} reason=no_entry_configured letters_cannot_be_routed",
            relaymesh_core::node::iso8601(crate::host::now_ms())
        )),
    }

    let host = Host::new(server, directory).with_log(log.clone());
    let daemon = launch(host, listener, log);
    let gateway = match gateway {
        Some(l) => {
            let app = gateway::router(daemon.handle.clone());
            Some(tokio::spawn(async move {
                let _ = axum::serve(l, app).await;
            }))
        }
        None => None,
    };
    Ok(RunningServer {
        daemon,
        public_key,
        gateway,
    })
}
