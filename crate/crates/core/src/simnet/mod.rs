//! A deterministic in-memory network that runs the real daemon state
//! machines: per-agency server, entry node and relays, plus clients.
//!
//! Every directed link is a FIFO. Each step the scheduler picks one
//! non-empty link with a seeded RNG and delivers its head frame, so a run is
//! a pure function of the seed and the script. Every frame is recorded in
//! the trace at the moment it is sent.

mod oracle;
mod scenario;

pub use oracle::{assert_confidentiality, check_audit, AuditMismatch, ConfidentialityViolation, PassthroughSealer};
pub use scenario::{parse_scenario, random_scenario, Action, Scenario, ScriptAction};

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::addr::{Address, EndpointId, NodeId};
use crate::client::{Client, ClientEvent};
use crate::crypto::{envelope_ref, HybridSealer, KeyPair, PlaintextLetter, Sealer};
use crate::node::{Effect, Node};
use crate::routing::{EntryNode, NodeRegistry, PathPolicy, RelayNode, DEFAULT_HOPS};
use crate::server::{AgencyServer, PasswordParams, Storage};
use crate::wire::{decode_frame, Decoded, Payload};

/// Logical time zero, in Unix milliseconds. One scheduler step is one
/// millisecond.
pub const SIM_EPOCH_MS: u64 = 1_700_000_000_000;

/// Scheduler steps a single scenario may take before it counts as stuck.
pub const DEFAULT_STEP_BUDGET: u64 = 2_000_000;

const NAME_POOL: [&str; 12] = [
    "alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi", "ivan", "judy", "mike", "nina",
];

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("deadlock at step {step}: {reason}")]
    Deadlock { step: u64, reason: String },
    #[error("unknown actor {0:?}")]
    UnknownActor(String),
    #[error("scenario line {line}: {reason}")]
    Scenario { line: usize, reason: String },
}

#[derive(Debug, Clone)]
pub struct Topology {
    pub agencies: usize,
    pub relays_per_agency: usize,
    pub clients_per_agency: usize,
    pub hops: usize,
    pub policy: PathPolicy,
    pub seed: u64,
    pub sealer: Arc<dyn Sealer>,
}

impl Topology {
    pub fn new(agencies: usize, relays_per_agency: usize, clients_per_agency: usize, seed: u64) -> Self {
        Topology {
            agencies,
            relays_per_agency,
            clients_per_agency,
            hops: DEFAULT_HOPS,
            policy: PathPolicy::RoundRobin,
            seed,
            sealer: Arc::new(HybridSealer),
        }
    }

    pub fn with_hops(mut self, hops: usize) -> Self {
        self.hops = hops;
        self
    }

    pub fn with_policy(mut self, policy: PathPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Replaces the envelope cipher in every server and client.
    pub fn with_sealer(mut self, sealer: Arc<dyn Sealer>) -> Self {
        self.sealer = sealer;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedFrame {
    pub step: u64,
    pub from: EndpointId,
    pub to: EndpointId,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct SimUser {
    pub name: String,
    pub address: Address,
    pub email: String,
    pub password: String,
    pub endpoint: EndpointId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SendStatus {
    InFlight,
    Accepted,
    Rejected { code: u16 },
    /// Refused by the client before anything was sent.
    Local(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentMessage {
    pub step: u64,
    pub letter: PlaintextLetter,
    pub reference: Option<[u8; 16]>,
    pub status: SendStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub step: u64,
    pub recipient: Address,
    pub letter: PlaintextLetter,
}

/// What the clients saw: every send attempt and every letter delivered.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Ledger {
    pub sent: Vec<SentMessage>,
    pub delivered: Vec<Delivery>,
    pub undecryptable: usize,
    /// `(step, actor, message)` for failed non-SEND requests.
    pub request_failures: Vec<(u64, String, String)>,
}

impl Ledger {
    /// Sent messages whose exact letter reached the intended recipient.
    pub fn delivered_letters(&self) -> impl Iterator<Item = &SentMessage> {
        self.sent.iter().filter(|s| {
            self.delivered
                .iter()
                .any(|d| d.recipient == s.letter.recipient && d.letter == s.letter)
        })
    }
}

#[derive(Debug)]
pub struct SimNetwork {
    seed: u64,
    clock: u64,
    sched: ChaCha20Rng,
    servers: BTreeMap<String, AgencyServer>,
    entries: BTreeMap<String, EntryNode>,
    relays: BTreeMap<EndpointId, RelayNode>,
    clients: BTreeMap<EndpointId, Client>,
    users: Vec<SimUser>,
    connected: BTreeSet<EndpointId>,
    dead: BTreeSet<EndpointId>,
    links: BTreeMap<(EndpointId, EndpointId), VecDeque<Vec<u8>>>,
    drop_rules: Vec<(Option<EndpointId>, EndpointId)>,
    trace: Vec<ObservedFrame>,
    logs: Vec<String>,
    ledger: Ledger,
    budget: u64,
}

fn agency_name(i: usize) -> String {
    let mut name = String::new();
    let mut n = i;
    loop {
        name.insert(0, (b'A' + (n % 26) as u8) as char);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    name
}

fn user_name(i: usize) -> String {
    match NAME_POOL.get(i) {
        Some(n) => n.to_string(),
        None => format!("user{i}"),
    }
}

impl SimNetwork {
    /// Builds the topology and registers every client. Keys, paths and
    /// scheduling all derive from `topo.seed`.
    pub fn spawn(topo: &Topology) -> Result<Self, SimError> {
        if topo.agencies == 0 || topo.relays_per_agency == 0 || topo.clients_per_agency == 0 {
            return Err(SimError::InvalidTopology(format!(
                "need at least one agency, relay and client (got {}, {}, {})",
                topo.agencies, topo.relays_per_agency, topo.clients_per_agency
            )));
        }
        if topo.hops == 0 {
            return Err(SimError::InvalidTopology("hops must be at least 1".into()));
        }
        let mut seeds = ChaCha20Rng::seed_from_u64(topo.seed);
        let child = |seeds: &mut ChaCha20Rng| ChaCha20Rng::seed_from_u64(seeds.gen());

        let agencies: Vec<String> = (0..topo.agencies).map(agency_name).collect();
        let server_keys: Vec<KeyPair> = agencies
            .iter()
            .map(|_| KeyPair::from_rng(&mut child(&mut seeds)))
            .collect();

        let mut net = SimNetwork {
            seed: topo.seed,
            clock: 0,
            sched: child(&mut seeds),
            servers: BTreeMap::new(),
            entries: BTreeMap::new(),
            relays: BTreeMap::new(),
            clients: BTreeMap::new(),
            users: Vec::new(),
            connected: BTreeSet::new(),
            dead: BTreeSet::new(),
            links: BTreeMap::new(),
            drop_rules: Vec::new(),
            trace: Vec::new(),
            logs: Vec::new(),
            ledger: Ledger::default(),
            budget: DEFAULT_STEP_BUDGET,
        };

        for (i, agency) in agencies.iter().enumerate() {
            let keys = KeyPair::from_private(server_keys[i].private.clone());
            let mut server = AgencyServer::new(agency, keys, Storage::in_memory())
                .map_err(|e| SimError::InvalidTopology(e.to_string()))?
                .with_rng(child(&mut seeds))
                .with_password_params(PasswordParams::insecure_fast())
                .with_sealer(topo.sealer.clone());
            for (j, peer) in agencies.iter().enumerate() {
                if j != i {
                    server = server.with_peer(peer, server_keys[j].public);
                }
            }
            net.servers.insert(agency.clone(), server);

            let ids: Vec<String> = (1..=topo.relays_per_agency).map(|r| format!("{agency}.r{r}")).collect();
            let registry =
                NodeRegistry::from_ids(&ids).map_err(|e| SimError::InvalidTopology(e.to_string()))?;
            for id in &ids {
                let node_id: NodeId = id.parse().expect("generated ids are valid");
                net.relays
                    .insert(EndpointId::from(&node_id), RelayNode::new(node_id, agency.clone()));
            }
            let entry = EntryNode::new(agency.clone(), registry, topo.hops, topo.policy).with_rng(child(&mut seeds));
            net.entries.insert(agency.clone(), entry);
        }

        let mut n = 0;
        for agency in &agencies {
            for _ in 0..topo.clients_per_agency {
                let name = user_name(n);
                n += 1;
                let address = Address::new(&name, agency).expect("pool names are valid");
                let endpoint = EndpointId::client(&address);
                let client = Client::new(endpoint.clone(), EndpointId::server(agency))
                    .with_keys(KeyPair::from_rng(&mut child(&mut seeds)))
                    .with_rng(child(&mut seeds))
                    .with_sealer(topo.sealer.clone());
                net.clients.insert(endpoint.clone(), client);
                net.users.push(SimUser {
                    email: format!("{name}@{}.mail", agency.to_lowercase()),
                    password: format!("pw-{name}-secret"),
                    name,
                    address,
                    endpoint,
                });
            }
        }

        // Fetch server keys, then register everyone.
        for user in net.users.clone() {
            net.connected.insert(user.endpoint.clone());
            let fx = net.client_mut(&user.endpoint).connect();
            net.apply(&user.endpoint, fx);
        }
        net.run_until_quiet()?;
        for user in net.users.clone() {
            let fx = net
                .client_mut(&user.endpoint)
                .register(&user.name, &user.email, &user.password)
                .map_err(|e| SimError::InvalidTopology(format!("register {}: {e}", user.name)))?;
            net.apply(&user.endpoint, fx);
        }
        net.run_until_quiet()?;
        for user in &net.users {
            if net.servers[user.address.agency()].storage().accounts.get(&user.name).is_none() {
                return Err(SimError::InvalidTopology(format!("{} failed to register", user.name)));
            }
        }
        Ok(net)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn now(&self) -> u64 {
        SIM_EPOCH_MS + self.clock
    }

    pub fn set_step_budget(&mut self, budget: u64) {
        self.budget = budget;
    }

    pub fn users(&self) -> &[SimUser] {
        &self.users
    }

    pub fn agencies(&self) -> Vec<String> {
        self.servers.keys().cloned().collect()
    }

    pub fn user(&self, actor: &str) -> Option<&SimUser> {
        self.users
            .iter()
            .find(|u| u.name == actor || u.address.to_string() == actor)
    }

    pub fn server(&self, agency: &str) -> Option<&AgencyServer> {
        self.servers.get(agency)
    }

    pub fn entry(&self, agency: &str) -> Option<&EntryNode> {
        self.entries.get(agency)
    }

    pub fn entry_mut(&mut self, agency: &str) -> Option<&mut EntryNode> {
        self.entries.get_mut(agency)
    }

    pub fn relay(&self, id: &str) -> Option<&RelayNode> {
        self.relays.get(&EndpointId::new(id))
    }

    pub fn client(&self, actor: &str) -> Option<&Client> {
        let ep = self.user(actor)?.endpoint.clone();
        self.clients.get(&ep)
    }

    fn client_mut(&mut self, ep: &EndpointId) -> &mut Client {
        self.clients.get_mut(ep).expect("client endpoint exists")
    }

    pub fn trace(&self) -> &[ObservedFrame] {
        &self.trace
    }

    pub fn logs(&self) -> &[String] {
        &self.logs
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn in_flight(&self) -> usize {
        self.links.values().map(VecDeque::len).sum()
    }

    /// Frames queued on links toward `to`.
    pub fn in_flight_to(&self, to: &EndpointId) -> usize {
        self.links
            .iter()
            .filter(|((_, t), _)| t == to)
            .map(|(_, q)| q.len())
            .sum()
    }

    pub fn is_quiescent(&self) -> bool {
        self.in_flight() == 0
    }

    pub fn audit_count(&self, agency: &str) -> usize {
        self.servers.get(agency).map_or(0, |s| s.audit().len())
    }

    // ---- faults ---------------------------------------------------------

    /// Removes a relay from its agency's registry and kills its endpoint.
    /// Frames still addressed to it are dropped and logged on arrival.
    pub fn kill_relay(&mut self, id: &str) -> bool {
        let Ok(node) = id.parse::<NodeId>() else {
            return false;
        };
        let ep = EndpointId::from(&node);
        if !self.relays.contains_key(&ep) {
            return false;
        }
        self.dead.insert(ep);
        for entry in self.entries.values_mut() {
            entry.kill_relay(&node);
        }
        true
    }

    /// Drops the next frame sent from `from` (`None` matches any sender)
    /// to `to`.
    pub fn drop_next_frame(&mut self, from: Option<EndpointId>, to: EndpointId) {
        self.drop_rules.push((from, to));
    }

    // ---- transport ------------------------------------------------------

    fn apply(&mut self, from: &EndpointId, effects: Vec<Effect>) {
        for effect in effects {
            match effect {
                Effect::Log(ev) => self.logs.push(ev.render(self.now())),
                Effect::Send { to, payload } => {
                    let bytes = match payload.to_frame().and_then(|f| f.encode()) {
                        Ok(b) => b,
                        Err(e) => {
                            self.logs.push(format!("step={} encode_error from={from} {e}", self.clock));
                            continue;
                        }
                    };
                    self.trace.push(ObservedFrame {
                        step: self.clock,
                        from: from.clone(),
                        to: to.clone(),
                        bytes: bytes.clone(),
                    });
                    let rule = self
                        .drop_rules
                        .iter()
                        .position(|(f, t)| t == &to && f.as_ref().is_none_or(|f| f == from));
                    if let Some(i) = rule {
                        self.drop_rules.remove(i);
                        self.logs.push(format!(
                            "ts={} event=drop node={to} reason=injected_fault from={from}",
                            crate::node::iso8601(self.now())
                        ));
                        continue;
                    }
                    self.links.entry((from.clone(), to)).or_default().push_back(bytes);
                }
            }
        }
    }

    /// Delivers one frame. Returns false when nothing is in flight.
    pub fn step(&mut self) -> bool {
        let live: Vec<(EndpointId, EndpointId)> = self
            .links
            .iter()
            .filter(|(_, q)| !q.is_empty())
            .map(|(k, _)| k.clone())
            .collect();
        if live.is_empty() {
            return false;
        }
        let (from, to) = live[self.sched.gen_range(0..live.len())].clone();
        let bytes = self
            .links
            .get_mut(&(from.clone(), to.clone()))
            .and_then(VecDeque::pop_front)
            .expect("link is non-empty");
        self.links.retain(|_, q| !q.is_empty());
        self.clock += 1;
        let now = self.now();

        if self.dead.contains(&to) || (self.clients.contains_key(&to) && !self.connected.contains(&to)) {
            self.logs.push(format!(
                "ts={} event=drop node={to} reason=endpoint_down from={from}",
                crate::node::iso8601(now)
            ));
            return true;
        }
        let frame = match decode_frame(&bytes) {
            Ok(Decoded::Frame(f, _)) => f,
            _ => unreachable!("the simulator only carries whole, valid frames"),
        };

        let effects = if let Some(agency) = to.server_agency().map(str::to_string) {
            match self.servers.get_mut(&agency) {
                Some(s) => s.handle(&from, &frame, now),
                None => Vec::new(),
            }
        } else if let Some(entry) = to.as_str().strip_prefix("entry:").and_then(|a| self.entries.get_mut(a)) {
            entry.handle(&from, &frame, now)
        } else if let Some(relay) = self.relays.get_mut(&to) {
            relay.handle(&from, &frame, now)
        } else if let Some(client) = self.clients.get_mut(&to) {
            let fx = client.handle(&from, &frame, now);
            self.collect_events(&to);
            fx
        } else {
            self.logs.push(format!("step={} no_such_endpoint {to}", self.clock));
            Vec::new()
        };
        self.apply(&to, effects);
        true
    }

    pub fn run_until_quiet(&mut self) -> Result<u64, SimError> {
        let start = self.clock;
        while self.step() {
            if self.clock - start > self.budget {
                return Err(SimError::Deadlock {
                    step: self.clock,
                    reason: format!("{} frames still in flight after {} steps", self.in_flight(), self.budget),
                });
            }
        }
        Ok(self.clock - start)
    }

    fn collect_events(&mut self, ep: &EndpointId) {
        let step = self.clock;
        let events = self.client_mut(ep).take_events();
        for ev in events {
            match ev {
                ClientEvent::Received(letter) => self.ledger.delivered.push(Delivery {
                    step,
                    recipient: letter.recipient.clone(),
                    letter,
                }),
                ClientEvent::Undecryptable => self.ledger.undecryptable += 1,
                ClientEvent::SendAccepted { reference, .. } => self.mark_send(reference, SendStatus::Accepted),
                ClientEvent::SendFailed { reference, code, .. } => {
                    self.mark_send(reference, SendStatus::Rejected { code })
                }
                ClientEvent::RequestFailed { request, code, message } => self.ledger.request_failures.push((
                    step,
                    ep.to_string(),
                    format!("{request}: error({code}) {message}"),
                )),
                _ => {}
            }
        }
    }

    fn mark_send(&mut self, reference: [u8; 16], status: SendStatus) {
        if let Some(s) = self
            .ledger
            .sent
            .iter_mut()
            .rev()
            .find(|s| s.reference == Some(reference))
        {
            s.status = status;
        }
    }

    // ---- client actions -------------------------------------------------

    fn endpoint_of(&self, actor: &str) -> Result<EndpointId, SimError> {
        self.user(actor)
            .map(|u| u.endpoint.clone())
            .ok_or_else(|| SimError::UnknownActor(actor.to_string()))
    }

    pub fn login(&mut self, actor: &str) -> Result<(), SimError> {
        let ep = self.endpoint_of(actor)?;
        let user = self.user(actor).cloned().expect("resolved above");
        self.connected.insert(ep.clone());
        match self.client_mut(&ep).login(&user.name, &user.password) {
            Ok(fx) => self.apply(&ep, fx),
            Err(e) => self.ledger.request_failures.push((self.clock, ep.to_string(), e.to_string())),
        }
        Ok(())
    }

    /// Closes the user's connection; the server drops the session.
    pub fn logout(&mut self, actor: &str) -> Result<(), SimError> {
        let ep = self.endpoint_of(actor)?;
        let agency = self.user(actor).expect("resolved").address.agency().to_string();
        let now = self.now();
        self.connected.remove(&ep);
        let fx = self.servers.get_mut(&agency).expect("agency exists").disconnected(&ep, now);
        self.apply(&EndpointId::server(&agency), fx);
        let server = EndpointId::server(&agency);
        self.client_mut(&ep).disconnected(&server, now);
        Ok(())
    }

    pub fn add_buddy(&mut self, actor: &str, email: &str) -> Result<(), SimError> {
        let ep = self.endpoint_of(actor)?;
        match self.client_mut(&ep).add_buddy(email) {
            Ok(fx) => self.apply(&ep, fx),
            Err(e) => self.ledger.request_failures.push((self.clock, ep.to_string(), e.to_string())),
        }
        Ok(())
    }

    /// Sends through the client. With `checked` false the buddy-list check
    /// is skipped so the server's own recipient checks can be exercised.
    pub fn send(&mut self, actor: &str, to: &Address, body: &str, checked: bool) -> Result<(), SimError> {
        let ep = self.endpoint_of(actor)?;
        let now = self.now();
        let sender = self.user(actor).expect("resolved").address.clone();
        let letter = PlaintextLetter::new(sender, to.clone(), body, now);
        let client = self.client_mut(&ep);
        let result = if checked {
            client.send(to, body, now)
        } else {
            client.send_unchecked(to, body, now)
        };
        match result {
            Ok(fx) => {
                let reference = fx.iter().find_map(|e| match e {
                    Effect::Send {
                        payload: Payload::Send { envelope },
                        ..
                    } => Some(envelope_ref(envelope)),
                    _ => None,
                });
                self.ledger.sent.push(SentMessage {
                    step: self.clock,
                    letter,
                    reference,
                    status: SendStatus::InFlight,
                });
                self.apply(&ep, fx);
            }
            Err(e) => self.ledger.sent.push(SentMessage {
                step: self.clock,
                letter,
                reference: None,
                status: SendStatus::Local(e.to_string()),
            }),
        }
        Ok(())
    }

    fn perform(&mut self, action: &ScriptAction) -> Result<(), SimError> {
        match &action.action {
            Action::Login => self.login(&action.actor),
            Action::Logout => self.logout(&action.actor),
            Action::Add { email } => self.add_buddy(&action.actor, email),
            Action::Send { to, body, checked } => self.send(&action.actor, to, body, *checked),
            Action::KillRelay { node } => {
                if !self.kill_relay(node) {
                    self.logs.push(format!("step={} kill_relay unknown node {node}", self.clock));
                }
                Ok(())
            }
            Action::DropNextFrame { from, to } => {
                self.drop_next_frame(from.clone(), to.clone());
                Ok(())
            }
        }
    }

    fn actor_idle(&self, actor: &str) -> bool {
        match self.user(actor) {
            Some(u) => self.clients.get(&u.endpoint).is_none_or(Client::is_idle),
            None => true,
        }
    }

    /// Runs a script to quiescence. An action fires once the clock reaches
    /// its step and its actor has no unanswered request; actions of one
    /// actor fire in script order. When nothing is in flight the clock jumps
    /// to the next scheduled action.
    pub fn run_scenario(&mut self, scenario: &Scenario) -> Result<(), SimError> {
        let start = self.clock;
        let mut pending: VecDeque<ScriptAction> = scenario.actions.iter().cloned().collect();
        // Stable sort keeps script order among equal steps.
        pending.make_contiguous().sort_by_key(|a| a.step);
        let base = self.clock;

        loop {
            let mut blocked: BTreeSet<String> = BTreeSet::new();
            let mut i = 0;
            while i < pending.len() {
                let a = &pending[i];
                if base + a.step > self.clock {
                    break;
                }
                let actor = a.actor.clone();
                let waits = a.action.is_client_action() && (blocked.contains(&actor) || !self.actor_idle(&actor));
                if waits {
                    blocked.insert(actor);
                    i += 1;
                    continue;
                }
                let action = pending.remove(i).expect("index in range");
                self.perform(&action)?;
                if action.action.is_client_action() && !self.actor_idle(&action.actor) {
                    blocked.insert(action.actor.clone());
                }
            }

            if self.step() {
                if self.clock - start > self.budget {
                    return Err(SimError::Deadlock {
                        step: self.clock,
                        reason: format!("{} frames still in flight", self.in_flight()),
                    });
                }
                continue;
            }
            let Some(next) = pending.front() else {
                return Ok(());
            };
            if base + next.step > self.clock {
                self.clock = base + next.step;
                continue;
            }
            if blocked.is_empty() {
                continue;
            }
            return Err(SimError::Deadlock {
                step: self.clock,
                reason: format!(
                    "no frames in flight but {} is waiting on a reply that will not come",
                    blocked.into_iter().collect::<Vec<_>>().join(", ")
                ),
            });
        }
    }

    /// One line per frame: `<step> <from> -> <to> <hex>`.
    pub fn export_trace(&self) -> String {
        let mut out = String::new();
        for f in &self.trace {
            let _ = writeln!(out, "{} {} -> {} {}", f.step, f.from, f.to, hex::encode(&f.bytes));
        }
        out
    }
}
