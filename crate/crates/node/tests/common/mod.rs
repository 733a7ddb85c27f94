//! A two-agency mesh on loopback: per agency a server, an entry node and
//! two relays, all on ephemeral ports in this process.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use relaymesh_core::addr::NodeId;
use relaymesh_core::routing::{NodeEntry, PathPolicy};
use relaymesh_core::server::{AgencyServer, AuditRecord, ServerConfig};
use relaymesh_node::cli::{self, ClientOptions, Exit};
use relaymesh_node::daemons::{
    server_keys, start_entry, start_relay, start_server, EntrySettings, RelaySettings, Running, RunningServer,
    ServerSettings,
};
use relaymesh_node::host::LogSink;
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use tokio::task::JoinHandle;

pub const WAIT: Duration = Duration::from_secs(20);
pub const AGENCIES: [&str; 2] = ["A", "B"];

async fn bind() -> (TcpListener, String) {
    let l = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = l.local_addr().unwrap().to_string();
    (l, addr)
}

/// Collects log lines so tests can look for drops.
#[derive(Clone, Default)]
pub struct Logs(Arc<Mutex<Vec<String>>>);

impl Logs {
    pub fn sink(&self) -> LogSink {
        let inner = self.0.clone();
        Arc::new(move |line: &str| inner.lock().unwrap().push(line.to_string()))
    }

    pub fn lines(&self) -> Vec<String> {
        self.0.lock().unwrap().clone()
    }
}

pub struct Agency {
    pub name: String,
    pub server: RunningServer,
    pub server_addr: String,
    pub gateway_addr: String,
    pub data_dir: PathBuf,
    pub entry: Running,
    pub relays: Vec<Running>,
}

pub struct Mesh {
    pub agencies: BTreeMap<String, Agency>,
    pub logs: Logs,
    pub dir: tempfile::TempDir,
}

impl Mesh {
    pub async fn start() -> Mesh {
        let dir = tempfile::tempdir().unwrap();
        let logs = Logs::default();

        // Bind everything first so every directory can be written up front.
        let mut servers = BTreeMap::new();
        let mut gateways = BTreeMap::new();
        let mut entries = BTreeMap::new();
        let mut relays = BTreeMap::new();
        let mut keys = BTreeMap::new();
        for a in AGENCIES {
            servers.insert(a, bind().await);
            gateways.insert(a, bind().await);
            entries.insert(a, bind().await);
            let mut rs = Vec::new();
            for r in 1..=2 {
                let (l, addr) = bind().await;
                rs.push((format!("{a}.r{r}"), l, addr));
            }
            relays.insert(a, rs);
            let data_dir = dir.path().join(a);
            std::fs::create_dir_all(&data_dir).unwrap();
            keys.insert(a, server_keys(&data_dir).unwrap().public);
        }
        let server_dir: BTreeMap<String, String> =
            servers.iter().map(|(a, (_, addr))| (a.to_string(), addr.clone())).collect();

        let mut agencies = BTreeMap::new();
        for a in AGENCIES {
            let nodes: Vec<NodeEntry> = relays[a]
                .iter()
                .map(|(id, _, addr)| NodeEntry {
                    id: id.parse().unwrap(),
                    endpoint: addr.clone(),
                })
                .collect();

            let mut started = Vec::new();
            for (id, l, _) in relays.remove(a).unwrap() {
                let settings = RelaySettings {
                    agency: a.to_string(),
                    nodes: nodes.clone(),
                    servers: server_dir.clone(),
                };
                let id: NodeId = id.parse().unwrap();
                started.push(start_relay(id, &settings, l, logs.sink()));
            }

            let (entry_l, entry_addr) = entries.remove(a).unwrap();
            let entry = start_entry(
                &EntrySettings {
                    agency: a.to_string(),
                    nodes,
                    hops: 2,
                    policy: PathPolicy::RoundRobin,
                },
                entry_l,
                logs.sink(),
            )
            .unwrap();

            let mut text = format!(
                "agency = {a}\nentry = {entry_addr}\npassword.m_cost = 64\npassword.t_cost = 1\n"
            );
            for b in AGENCIES.iter().filter(|b| **b != a) {
                text.push_str(&format!("peer.{b} = {},{}\n", server_dir[*b], keys[b].to_hex()));
            }
            let data_dir = dir.path().join(a);
            let (server_l, server_addr) = servers.remove(a).unwrap();
            let (gateway_l, gateway_addr) = gateways.remove(a).unwrap();
            let server = start_server(
                ServerSettings {
                    agency: a.to_string(),
                    config: ServerConfig::parse(&text).unwrap(),
                    data_dir: data_dir.clone(),
                },
                server_l,
                Some(gateway_l),
                logs.sink(),
            )
            .await
            .unwrap();
            agencies.insert(
                a.to_string(),
                Agency {
                    name: a.to_string(),
                    server,
                    server_addr,
                    gateway_addr,
                    data_dir,
                    entry,
                    relays: started,
                },
            );
        }
        Mesh { agencies, logs, dir }
    }

    pub fn agency(&self, a: &str) -> &Agency {
        &self.agencies[a]
    }

    pub async fn audit(&self, a: &str) -> Vec<AuditRecord> {
        self.agencies[a]
            .server
            .daemon
            .handle
            .inspect(|s: &AgencyServer| s.audit().records().to_vec())
            .await
            .unwrap()
    }

    /// A fresh client home under the mesh's temp dir.
    pub fn home(&self, name: &str) -> PathBuf {
        self.dir.path().join("homes").join(name)
    }
}

/// Output captured from an in-process CLI.
#[derive(Clone, Default)]
pub struct Screen(Arc<Mutex<Vec<u8>>>);

impl Write for Screen {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        self.0.lock().unwrap().extend_from_slice(buf);
        Ok(buf.len())
    }
    fn flush(&mut self) -> std::io::Result<()> {
        Ok(())
    }
}

impl Screen {
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.0.lock().unwrap()).into_owned()
    }
}

/// The command-line client running in-process, typed at through a channel.
pub struct Cli {
    pub screen: Screen,
    input: Option<mpsc::UnboundedSender<String>>,
    task: JoinHandle<Exit>,
}

impl Cli {
    pub fn start(server: &str, home: &Path) -> Cli {
        let screen = Screen::default();
        let (tx, rx) = mpsc::unbounded_channel();
        let opts = ClientOptions {
            server: server.to_string(),
            keystore: None,
            home: home.to_path_buf(),
        };
        let task = tokio::spawn(cli::run(opts, rx, screen.clone()));
        Cli {
            screen,
            input: Some(tx),
            task,
        }
    }

    pub fn type_line(&self, line: &str) {
        self.input.as_ref().expect("input open").send(line.to_string()).unwrap();
    }

    /// Waits until the screen shows `needle`.
    pub async fn expect(&self, needle: &str) {
        let deadline = tokio::time::Instant::now() + WAIT;
        loop {
            if self.screen.text().contains(needle) {
                return;
            }
            if tokio::time::Instant::now() > deadline {
                panic!("timed out waiting for {needle:?}; screen:\n{}", self.screen.text());
            }
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
    }

    pub fn count(&self, needle: &str) -> usize {
        self.screen.text().matches(needle).count()
    }

    /// Closes input and waits for the exit code.
    pub async fn finish(mut self) -> (Exit, String) {
        self.input.take();
        let code = tokio::time::timeout(WAIT, self.task).await.expect("client exits").unwrap();
        (code, self.screen.text())
    }

    /// Registers and logs in, returning once the buddy list has arrived.
    pub async fn sign_up(server: &str, home: &Path, user: &str, email: &str) -> Cli {
        let c = Cli::start(server, home);
        c.type_line(&format!("register {user} {email} correct-horse"));
        c.type_line(&format!("login {user} correct-horse"));
        c.expect("logged in as").await;
        c.expect("buddy list is empty").await;
        c
    }
}
