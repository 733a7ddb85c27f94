//! The interactive command-line client.
//!
//! One task drives everything: frames from the server connection and lines
//! from the user. Lines queue while a non-SEND request is outstanding, so
//! `login` followed by `send` in a script behaves as typed.

use std::collections::{HashMap, VecDeque};
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use relaymesh_core::addr::EndpointId;
use relaymesh_core::client::{
    format_error, format_incoming, format_roster_item, parse_command, Client, ClientEvent, Command, BANNER, HELP,
};
use relaymesh_core::crypto::{envelope_ref, fingerprint, keystore, KeyPair};
use relaymesh_core::node::{iso8601, Effect, Node};
use relaymesh_core::wire::{ErrorCode, FrameDecoder, Payload};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::tcp::OwnedWriteHalf;
use tokio::net::TcpStream;
use tokio::sync::mpsc;
use tokio::time::Instant;

use crate::host::{now_ms, CONNECT_TIMEOUT};
use crate::pins::KnownServers;

/// How long the client lingers after input ends, waiting for answers to
/// requests already sent.
pub const DRAIN_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Normal = 0,
    Auth = 2,
    Connection = 3,
}

#[derive(Debug, Clone)]
pub struct ClientOptions {
    /// `host:port` of the agency server.
    pub server: String,
    /// Overrides `<home>/<user>.skey`.
    pub keystore: Option<PathBuf>,
    /// Holds keystores and `known_servers`.
    pub home: PathBuf,
}

impl ClientOptions {
    fn keystore_for(&self, user: &str) -> PathBuf {
        self.keystore
            .clone()
            .unwrap_or_else(|| self.home.join(format!("{user}.skey")))
    }
}

/// A register or login waiting for the user to type the missing fields.
struct Prompt {
    register: bool,
    fields: Vec<(&'static str, Option<String>)>,
}

impl Prompt {
    fn next_missing(&self) -> Option<&'static str> {
        self.fields.iter().find(|(_, v)| v.is_none()).map(|(n, _)| *n)
    }

    fn fill(&mut self, value: String) {
        if let Some(slot) = self.fields.iter_mut().find(|(_, v)| v.is_none()) {
            slot.1 = Some(value);
        }
    }

    fn value(&self, i: usize) -> String {
        self.fields[i].1.clone().unwrap_or_default()
    }
}

struct Repl<W: Write> {
    opts: ClientOptions,
    known: KnownServers,
    client: Client,
    out: W,
    prompt: Option<Prompt>,
    /// Bodies of SENDs not yet acknowledged, for the local echo.
    echoes: HashMap<[u8; 16], String>,
    exit: Option<Exit>,
    quit: bool,
}

impl<W: Write> Repl<W> {
    fn say(&mut self, line: &str) {
        let _ = writeln!(self.out, "{line}");
        let _ = self.out.flush();
    }

    /// Handles one line of input, returning the frames to send.
    fn line(&mut self, line: &str) -> Vec<Effect> {
        if let Some(mut p) = self.prompt.take() {
            p.fill(line.trim().to_string());
            return self.continue_prompt(p);
        }
        let cmd = match parse_command(line) {
            Ok(c) => c,
            Err(e) => {
                self.say(&format!("error: {e}"));
                return Vec::new();
            }
        };
        match cmd {
            Command::Empty => Vec::new(),
            Command::Help => {
                self.say(HELP);
                Vec::new()
            }
            Command::Quit => {
                self.quit = true;
                Vec::new()
            }
            Command::Register { user, email, password } => self.continue_prompt(Prompt {
                register: true,
                fields: vec![("user", user), ("email", email), ("password", password)],
            }),
            Command::Login { user, password } => self.continue_prompt(Prompt {
                register: false,
                fields: vec![("user", user), ("password", password)],
            }),
            Command::Buddies => self.local(|c| c.roster_get()),
            Command::Add { email } => self.local(|c| c.add_buddy(&email)),
            Command::Send { to, text } => {
                let fx = self.local(|c| c.send(&to, &text, now_ms()));
                for e in &fx {
                    if let Effect::Send {
                        payload: Payload::Send { envelope },
                        ..
                    } = e
                    {
                        self.echoes.insert(envelope_ref(envelope), text.clone());
                    }
                }
                fx
            }
        }
    }

    fn local(
        &mut self,
        f: impl FnOnce(&mut Client) -> Result<Vec<Effect>, relaymesh_core::client::ClientError>,
    ) -> Vec<Effect> {
        match f(&mut self.client) {
            Ok(fx) => fx,
            Err(e) => {
                self.say(&format!("error: {e}"));
                Vec::new()
            }
        }
    }

    fn continue_prompt(&mut self, p: Prompt) -> Vec<Effect> {
        if let Some(field) = p.next_missing() {
            self.say(&format!("{field}?"));
            self.prompt = Some(p);
            return Vec::new();
        }
        let user = p.value(0);
        let path = self.opts.keystore_for(&user);
        if p.register {
            let keys = if path.exists() {
                keystore::read(&path).map_err(|e| e.to_string())
            } else {
                let kp = KeyPair::from_rng(&mut rand::rngs::OsRng);
                keystore::write(&path, &kp).map(|_| kp).map_err(|e| e.to_string())
            };
            match keys {
                Ok(kp) => self.client.set_keys(kp),
                Err(e) => {
                    self.say(&format!("error: keystore {}: {e}", path.display()));
                    return Vec::new();
                }
            }
            let (email, password) = (p.value(1), p.value(2));
            self.local(|c| c.register(&user, &email, &password))
        } else {
            match keystore::read(&path) {
                Ok(kp) => self.client.set_keys(kp),
                Err(e) => {
                    self.say(&format!(
                        "error: cannot read keystore {}: {e}; register first or pass --keystore",
                        path.display()
                    ));
                    return Vec::new();
                }
            }
            let password = p.value(1);
            self.local(|c| c.login(&user, &password))
        }
    }

    fn events(&mut self) {
        for ev in self.client.take_events() {
            match ev {
                ClientEvent::ServerKey {
                    address,
                    pubkey,
                    first_use,
                } => {
                    if first_use {
                        if let Err(e) = self.known.pin(&self.opts.server, &pubkey) {
                            self.say(&format!("warning: could not save pin: {e}"));
                        }
                        self.say(&format!(
                            "connected to {address}; pinned server key {} (first use)",
                            fingerprint(&pubkey)
                        ));
                    } else {
                        self.say(&format!("connected to {address}; server key {} matches pin", fingerprint(&pubkey)));
                    }
                }
                ClientEvent::PinMismatch { pinned, offered } => {
                    self.say(&format!(
                        "WARNING: the key of {} changed (pinned {}, offered {}). \
                         Someone may be impersonating the server. Aborting; \
                         remove its line from {} only if the change is expected.",
                        self.opts.server,
                        fingerprint(&pinned),
                        fingerprint(&offered),
                        self.known.path().display()
                    ));
                    self.exit = Some(Exit::Auth);
                }
                ClientEvent::Registered { user } => {
                    let path = self.opts.keystore_for(&user);
                    self.say(&format!("registered {user}; keystore {}. now login", path.display()));
                }
                ClientEvent::LoggedIn { address } => self.say(&format!("logged in as {address}")),
                ClientEvent::Roster(items) => {
                    if items.is_empty() {
                        self.say("buddy list is empty; add <email> to add someone");
                    } else {
                        self.say("buddies:");
                        for item in &items {
                            self.say(&format!("  {}", format_roster_item(item)));
                        }
                    }
                }
                ClientEvent::BuddyAdded(a) => self.say(&format!("added {a}")),
                ClientEvent::SendAccepted { reference, to } => {
                    let body = self.echoes.remove(&reference).unwrap_or_default();
                    let me = self.client.address().map(|a| a.to_string()).unwrap_or_default();
                    self.say(&format!("[{}] {me} -> {to}: {body}", iso8601(now_ms())));
                }
                ClientEvent::SendFailed {
                    reference,
                    code,
                    message,
                    ..
                } => {
                    self.echoes.remove(&reference);
                    self.say(&format_error(code, &message));
                }
                ClientEvent::Received(letter) => self.say(&format_incoming(&letter)),
                ClientEvent::Undecryptable => self.say("warning: dropped a letter that did not open under your key"),
                ClientEvent::RequestFailed { request, code, message } => {
                    self.say(&format_error(code, &message));
                    if request == "LOGIN" && code == ErrorCode::BadCredentials.code() {
                        self.exit = Some(Exit::Auth);
                    }
                }
            }
        }
    }
}

async fn write_effects(wr: &mut OwnedWriteHalf, fx: Vec<Effect>) -> std::io::Result<()> {
    for e in fx {
        if let Effect::Send { payload, .. } = e {
            if let Ok(bytes) = payload.to_frame().and_then(|f| f.encode()) {
                wr.write_all(&bytes).await?;
            }
        }
    }
    Ok(())
}

enum SessionEnd {
    Exit(Exit),
    Lost,
}

/// Runs the client until the user quits, input ends, or the connection
/// fails. `lines` is the user's input; `out` receives everything printed.
pub async fn run<W: Write>(opts: ClientOptions, mut lines: mpsc::UnboundedReceiver<String>, out: W) -> Exit {
    let known = KnownServers::in_dir(&opts.home);
    let server_id = EndpointId::new("server");
    let mut repl = Repl {
        client: Client::new(EndpointId::new("client"), server_id.clone()),
        known: known.clone(),
        opts: opts.clone(),
        out,
        prompt: None,
        echoes: HashMap::new(),
        exit: None,
        quit: false,
    };
    repl.say(BANNER);
    repl.say("login or register?");
    let mut queued: VecDeque<String> = VecDeque::new();
    let mut input_done = false;

    loop {
        let stream = match tokio::time::timeout(CONNECT_TIMEOUT, TcpStream::connect(&opts.server)).await {
            Ok(Ok(s)) => s,
            Ok(Err(e)) => {
                repl.say(&format!("error: cannot connect to {}: {e}", opts.server));
                return Exit::Connection;
            }
            Err(_) => {
                repl.say(&format!("error: timed out connecting to {}", opts.server));
                return Exit::Connection;
            }
        };
        let _ = stream.set_nodelay(true);
        repl.client = Client::new(EndpointId::new("client"), server_id.clone()).with_pin(known.get(&opts.server));
        repl.prompt = None;
        repl.echoes.clear();

        match session(&mut repl, stream, &mut lines, &mut queued, &mut input_done).await {
            SessionEnd::Exit(code) => return code,
            SessionEnd::Lost => {
                repl.say("connection lost. reconnect? [y/n]");
                let answer = match queued.pop_front() {
                    Some(l) => Some(l),
                    None if input_done => None,
                    None => lines.recv().await,
                };
                match answer.as_deref().map(str::trim) {
                    Some("y") | Some("yes") => continue,
                    _ => return Exit::Connection,
                }
            }
        }
    }
}

async fn session<W: Write>(
    repl: &mut Repl<W>,
    stream: TcpStream,
    lines: &mut mpsc::UnboundedReceiver<String>,
    queued: &mut VecDeque<String>,
    input_done: &mut bool,
) -> SessionEnd {
    let (mut rd, mut wr) = stream.into_split();
    let mut dec = FrameDecoder::new();
    let mut buf = vec![0u8; 16 * 1024];
    let mut drain_deadline: Option<Instant> = None;

    let fx = repl.client.connect();
    if write_effects(&mut wr, fx).await.is_err() {
        return SessionEnd::Lost;
    }

    loop {
        if let Some(code) = repl.exit {
            return SessionEnd::Exit(code);
        }
        while repl.client.is_idle() && repl.client.server_key().is_some() && !repl.quit {
            let Some(line) = queued.pop_front() else { break };
            let fx = repl.line(&line);
            if write_effects(&mut wr, fx).await.is_err() {
                return SessionEnd::Lost;
            }
        }
        if repl.quit {
            *input_done = true;
            queued.clear();
        }
        if *input_done && queued.is_empty() {
            if !repl.client.is_busy() {
                return SessionEnd::Exit(Exit::Normal);
            }
            drain_deadline.get_or_insert_with(|| Instant::now() + DRAIN_TIMEOUT);
        }

        tokio::select! {
            read = rd.read(&mut buf) => {
                let n = match read {
                    Ok(0) | Err(_) => return SessionEnd::Lost,
                    Ok(n) => n,
                };
                dec.push(&buf[..n]);
                loop {
                    match dec.next_frame() {
                        Ok(Some(frame)) => {
                            let fx = repl.client.handle(&EndpointId::new("server"), &frame, now_ms());
                            repl.events();
                            if write_effects(&mut wr, fx).await.is_err() {
                                return SessionEnd::Lost;
                            }
                        }
                        Ok(None) => break,
                        Err(e) => {
                            repl.say(&format!("error: bad frame from server: {e}"));
                            return SessionEnd::Lost;
                        }
                    }
                }
            }
            line = lines.recv(), if !*input_done => match line {
                Some(l) => queued.push_back(l),
                None => *input_done = true,
            },
            _ = tokio::time::sleep_until(drain_deadline.unwrap_or_else(Instant::now)), if drain_deadline.is_some() => {
                repl.say("warning: exiting with requests still unanswered");
                return SessionEnd::Exit(Exit::Normal);
            }
        }
    }
}
