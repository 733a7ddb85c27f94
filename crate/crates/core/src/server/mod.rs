//! The agency server: accounts, sessions, rosters, the key directory, and
//! the open, audit, reseal pipeline that every letter passes through.

mod accounts;
mod audit;
mod config;
mod password;
mod queue;

pub use accounts::{normalize_email, Account, AccountStore, RosterEntry};
pub use audit::{escape, unescape, AuditLog, AuditRecord, Leg};
pub use config::{PeerConfig, ServerConfig};
pub use password::{
    hash_password, is_strong_enough, verify_password, PasswordParams, HASH_LEN, MIN_PASSWORD_CHARS,
    SALT_LEN,
};
pub use queue::{DeliveryQueue, Queued};

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::addr::{is_valid_username, Address, EndpointId, Terminal};
use crate::crypto::{
    envelope_ref, open_credential, CryptoError, HybridSealer, KeyPair, PlaintextLetter, PublicKey,
    SealedEnvelope, Sealer,
};
use crate::node::{Effect, LogEvent, Node};
use crate::wire::{
    encode_roster, error_ref, error_with_ref, ErrorCode, Frame, Payload, RelayHeader, RosterItem,
};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{file}: corrupt data: {reason}")]
    Corrupt { file: PathBuf, reason: String },
}

/// The server's durable state.
#[derive(Debug)]
pub struct Storage {
    pub accounts: AccountStore,
    pub audit: AuditLog,
    pub queue: DeliveryQueue,
}

impl Storage {
    pub fn in_memory() -> Self {
        Storage {
            accounts: AccountStore::in_memory(),
            audit: AuditLog::in_memory(),
            queue: DeliveryQueue::in_memory(),
        }
    }

    /// `accounts.db`, `audit.log` and `queue/` under `dir`.
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir)?;
        Ok(Storage {
            accounts: AccountStore::open(&dir.join("accounts.db"))?,
            audit: AuditLog::open(&dir.join("audit.log"))?,
            queue: DeliveryQueue::open(&dir.join("queue"))?,
        })
    }
}

#[derive(Debug, Clone)]
struct Session {
    user: String,
    token: [u8; 16],
}

/// A client SEND forwarded to the entry node and not yet seen at ingress.
#[derive(Debug, Clone)]
struct PendingSend {
    conn: EndpointId,
    user: String,
}

/// A buddy add waiting on peer agencies to resolve an email.
#[derive(Debug, Clone)]
struct Lookup {
    conn: EndpointId,
    user: String,
    email: String,
    remaining: VecDeque<String>,
}

/// FEDERATE envelopes sent to peers, remembered so an ERROR coming back can
/// be passed on to the original sender.
const FEDERATED_MEMORY: usize = 4096;

#[derive(Debug)]
pub struct AgencyServer {
    id: EndpointId,
    agency: String,
    address: Address,
    keys: KeyPair,
    entry: EndpointId,
    sealer: Arc<dyn Sealer>,
    rng: ChaCha20Rng,
    params: PasswordParams,
    dummy: Option<([u8; SALT_LEN], [u8; HASH_LEN])>,
    store: Storage,
    peers: BTreeMap<String, PublicKey>,
    sessions: HashMap<EndpointId, Session>,
    online: HashMap<String, EndpointId>,
    pending_sends: HashMap<[u8; 16], PendingSend>,
    lookups: HashMap<String, VecDeque<Lookup>>,
    federated: VecDeque<([u8; 16], String, [u8; 16])>,
}

impl AgencyServer {
    pub fn new(agency: &str, keys: KeyPair, store: Storage) -> Result<Self, crate::addr::AddrError> {
        let address = Address::server(agency)?;
        Ok(AgencyServer {
            id: EndpointId::server(agency),
            agency: agency.to_string(),
            address,
            keys,
            entry: EndpointId::entry(agency),
            sealer: Arc::new(HybridSealer),
            rng: ChaCha20Rng::from_entropy(),
            params: PasswordParams::default(),
            dummy: None,
            store,
            peers: BTreeMap::new(),
            sessions: HashMap::new(),
            online: HashMap::new(),
            pending_sends: HashMap::new(),
            lookups: HashMap::new(),
            federated: VecDeque::new(),
        })
    }

    pub fn with_rng(mut self, rng: ChaCha20Rng) -> Self {
        self.rng = rng;
        self
    }

    /// Hashing parameters for new accounts. Existing accounts keep the
    /// parameters they were created with.
    pub fn with_password_params(mut self, params: PasswordParams) -> Self {
        self.params = params;
        self.dummy = None;
        self
    }

    pub fn with_sealer(mut self, sealer: Arc<dyn Sealer>) -> Self {
        self.sealer = sealer;
        self
    }

    pub fn with_peer(mut self, agency: &str, pubkey: PublicKey) -> Self {
        if agency != self.agency {
            self.peers.insert(agency.to_string(), pubkey);
        }
        self
    }

    pub fn with_entry(mut self, entry: EndpointId) -> Self {
        self.entry = entry;
        self
    }

    /// Unknown usernames are checked against this hash so that a failed
    /// login costs the same whether or not the account exists.
    fn dummy_hash(&mut self) -> ([u8; SALT_LEN], [u8; HASH_LEN]) {
        if let Some(d) = self.dummy {
            return d;
        }
        let mut salt = [0u8; SALT_LEN];
        self.rng.fill_bytes(&mut salt);
        let d = (salt, hash_password(&self.params, "relaymesh-dummy-password", &salt));
        self.dummy = Some(d);
        d
    }

    pub fn agency(&self) -> &str {
        &self.agency
    }

    pub fn address(&self) -> &Address {
        &self.address
    }

    pub fn public_key(&self) -> PublicKey {
        self.keys.public
    }

    pub fn storage(&self) -> &Storage {
        &self.store
    }

    pub fn audit(&self) -> &AuditLog {
        &self.store.audit
    }

    /// The user and token of the session bound to `conn`, if any.
    pub fn session(&self, conn: &EndpointId) -> Option<(&str, [u8; 16])> {
        self.sessions.get(conn).map(|s| (s.user.as_str(), s.token))
    }

    pub fn is_online(&self, user: &str) -> bool {
        self.online.contains_key(user)
    }

    fn log(&self, event: &'static str, reason: impl Into<String>) -> Effect {
        Effect::Log(LogEvent::new(event, &self.id, reason))
    }

    fn error(&self, to: &EndpointId, code: ErrorCode) -> Effect {
        Effect::send(
            to.clone(),
            Payload::Error {
                code: code.code(),
                message: code.default_message().to_string(),
            },
        )
    }

    fn ack(to: &EndpointId, ref_id: Vec<u8>) -> Effect {
        Effect::send(to.clone(), Payload::Ack { ref_id })
    }

    fn session_user(&self, conn: &EndpointId) -> Option<&str> {
        self.sessions.get(conn).map(|s| s.user.as_str())
    }

    fn local_address(&self, user: &str) -> Address {
        Address::new(user, &self.agency).expect("usernames are valid address names")
    }

    // ---- accounts -------------------------------------------------------

    fn handle_register(
        &mut self,
        from: &EndpointId,
        user: String,
        email: String,
        password: Vec<u8>,
        pubkey: PublicKey,
        now: u64,
    ) -> Vec<Effect> {
        let Ok(password) = open_credential(&password, &self.keys.private) else {
            return vec![self.error(from, ErrorCode::MalformedPayload)];
        };
        if !is_valid_username(&user) {
            return vec![self.error(from, ErrorCode::MalformedPayload)];
        }
        if self.store.accounts.contains(&user) || user == self.address.name() {
            return vec![self.error(from, ErrorCode::DuplicateUser)];
        }
        let Some(email) = normalize_email(&email) else {
            return vec![self.error(from, ErrorCode::MalformedPayload)];
        };
        if self.store.accounts.by_email(&email).is_some() {
            return vec![self.error(from, ErrorCode::DuplicateEmail)];
        }
        if !is_strong_enough(&password) {
            return vec![self.error(from, ErrorCode::WeakPassword)];
        }
        let mut salt = [0u8; SALT_LEN];
        self.rng.fill_bytes(&mut salt);
        let account = Account {
            password_hash: hash_password(&self.params, &password, &salt),
            salt,
            params: self.params,
            username: user.clone(),
            email,
            pubkey,
            created_at: now,
        };
        if let Err(e) = self.store.accounts.insert(account) {
            return vec![self.log("store_error", e.to_string())];
        }
        vec![self.log("register", format!("user={user}")), Self::ack(from, Vec::new())]
    }

    fn handle_login(&mut self, from: &EndpointId, user: String, password: Vec<u8>) -> Vec<Effect> {
        let Ok(password) = open_credential(&password, &self.keys.private) else {
            return vec![self.error(from, ErrorCode::MalformedPayload)];
        };
        let ok = match self.store.accounts.get(&user) {
            Some(acc) => verify_password(&acc.params, &password, &acc.salt, &acc.password_hash),
            None => {
                let (salt, hash) = self.dummy_hash();
                verify_password(&self.params, &password, &salt, &hash);
                false
            }
        };
        if !ok {
            return vec![
                self.log("login_failed", "bad_credentials"),
                self.error(from, ErrorCode::BadCredentials),
            ];
        }

        // One live connection per user, one user per connection.
        if let Some(old) = self.sessions.remove(from) {
            self.online.remove(&old.user);
        }
        if let Some(prev) = self.online.insert(user.clone(), from.clone()) {
            self.sessions.remove(&prev);
        }
        let mut token = [0u8; 16];
        self.rng.fill_bytes(&mut token);
        self.sessions.insert(
            from.clone(),
            Session {
                user: user.clone(),
                token,
            },
        );

        let mut fx = vec![self.log("login", format!("user={user}")), Self::ack(from, token.to_vec())];
        match self.store.queue.drain(&user) {
            Ok(items) => {
                if !items.is_empty() {
                    fx.push(self.log("drain", format!("user={user} count={}", items.len())));
                }
                fx.extend(
                    items
                        .into_iter()
                        .map(|q| Effect::send(from.clone(), Payload::Deliver { envelope: q.envelope })),
                );
            }
            Err(e) => fx.push(self.log("store_error", e.to_string())),
        }
        fx
    }

    // ---- roster ---------------------------------------------------------

    fn handle_roster_get(&self, from: &EndpointId, user: &str) -> Vec<Effect> {
        let items: Vec<RosterItem> = self
            .store
            .accounts
            .roster(user)
            .iter()
            .map(|e| RosterItem {
                online: e.buddy.agency() == self.agency && self.online.contains_key(e.buddy.name()),
                address: e.buddy.clone(),
            })
            .collect();
        match encode_roster(&items) {
            Ok(bytes) => vec![Self::ack(from, bytes)],
            Err(e) => vec![self.log("drop", e.to_string())],
        }
    }

    fn add_buddy(&mut self, conn: &EndpointId, user: &str, buddy: Address, now: u64) -> Vec<Effect> {
        let entry = RosterEntry {
            owner: user.to_string(),
            buddy: buddy.clone(),
            added_at: now,
        };
        match self.store.accounts.add_roster_entry(entry) {
            Ok(_) => vec![
                self.log("roster_add", format!("owner={user} buddy={buddy}")),
                Self::ack(conn, buddy.to_string().into_bytes()),
            ],
            Err(e) => vec![self.log("store_error", e.to_string())],
        }
    }

    fn handle_roster_add(&mut self, from: &EndpointId, user: String, email: String, now: u64) -> Vec<Effect> {
        let Some(email) = normalize_email(&email) else {
            return vec![self.error(from, ErrorCode::UnknownEmail)];
        };
        if let Some(acc) = self.store.accounts.by_email(&email) {
            let buddy = self.local_address(&acc.username);
            return self.add_buddy(from, &user, buddy, now);
        }
        let lookup = Lookup {
            conn: from.clone(),
            user,
            email,
            remaining: self.peers.keys().cloned().collect(),
        };
        self.next_lookup(lookup)
    }

    /// Asks the next peer in line, or fails the add when none is left.
    fn next_lookup(&mut self, mut lookup: Lookup) -> Vec<Effect> {
        let Some(peer) = lookup.remaining.pop_front() else {
            return vec![self.error(&lookup.conn, ErrorCode::UnknownEmail)];
        };
        let address = lookup.email.clone();
        self.lookups.entry(peer.clone()).or_default().push_back(lookup);
        vec![Effect::send(EndpointId::server(&peer), Payload::PubkeyGet { address })]
    }

    fn handle_pubkey_resp(&mut self, peer: &str, address: String, now: u64) -> Vec<Effect> {
        let Some(lookup) = self.lookups.get_mut(peer).and_then(VecDeque::pop_front) else {
            return vec![self.log("drop", "unsolicited_pubkey_resp")];
        };
        match address.parse::<Address>() {
            Ok(buddy) if buddy.agency() == peer => self.add_buddy(&lookup.conn, &lookup.user, buddy, now),
            _ => {
                let mut fx = vec![self.log("drop", "peer_resolved_foreign_address")];
                fx.extend(self.next_lookup(lookup));
                fx
            }
        }
    }

    // ---- directory ------------------------------------------------------

    /// Empty address or this server's own address: the server key. A local
    /// address: the user's key. Anything else is tried as an email, which is
    /// how peer agencies resolve buddy adds.
    fn handle_pubkey_get(&self, from: &EndpointId, address: String) -> Vec<Effect> {
        if address.is_empty() || address == self.address.to_string() {
            return vec![Effect::send(
                from.clone(),
                Payload::PubkeyResp {
                    address: self.address.to_string(),
                    pubkey: self.keys.public,
                },
            )];
        }
        let by_address = address
            .parse::<Address>()
            .ok()
            .filter(|a| a.agency() == self.agency)
            .and_then(|a| self.store.accounts.get(a.name()));
        match by_address.or_else(|| self.store.accounts.by_email(&address)) {
            Some(acc) => vec![Effect::send(
                from.clone(),
                Payload::PubkeyResp {
                    address: self.local_address(&acc.username).to_string(),
                    pubkey: acc.pubkey,
                },
            )],
            None => vec![self.error(from, ErrorCode::UnknownRecipient)],
        }
    }

    // ---- letters --------------------------------------------------------

    /// A SEND from an authenticated client: remember who sent it and hand it
    /// to the entry node unopened.
    fn handle_client_send(&mut self, from: &EndpointId, user: String, envelope: SealedEnvelope) -> Vec<Effect> {
        let r = envelope_ref(&envelope);
        self.pending_sends.insert(
            r,
            PendingSend {
                conn: from.clone(),
                user,
            },
        );
        vec![Effect::send(self.entry.clone(), Payload::Send { envelope })]
    }

    /// A SEND arriving off a relay path.
    fn handle_ingress(&mut self, from: &EndpointId, envelope: SealedEnvelope, now: u64) -> Vec<Effect> {
        let r = envelope_ref(&envelope);
        let Some(pending) = self.pending_sends.remove(&r) else {
            return vec![
                self.log("drop", "unauthenticated_send"),
                Effect::send(from.clone(), error_with_ref(ErrorCode::NotAuthenticated, &r)),
            ];
        };
        let letter = match self.sealer.open_letter(&envelope, &self.keys.private) {
            Ok(l) => l,
            Err(e) => return vec![self.log("drop", crypto_reason(&e))],
        };
        let reject = |code| Effect::send(pending.conn.clone(), error_with_ref(code, &r));
        if letter.sender != self.local_address(&pending.user) {
            return vec![self.log("drop", "sender_mismatch"), reject(ErrorCode::NotAuthenticated)];
        }
        let recipient = letter.recipient.clone();
        let local = recipient.agency() == self.agency;
        if local && !self.store.accounts.contains(recipient.name()) {
            return vec![reject(ErrorCode::UnknownRecipient)];
        }
        if !local && !self.peers.contains_key(recipient.agency()) {
            return vec![reject(ErrorCode::UnknownAgency)];
        }

        let mut fx = match self.record(&letter, Leg::LocalIngress, now) {
            Ok(e) => vec![e],
            Err(e) => return vec![e],
        };
        fx.push(Self::ack(&pending.conn, r.to_vec()));
        if local {
            fx.extend(self.deliver_local(&letter, now));
        } else {
            fx.extend(self.federate(&letter, &pending.user, r));
        }
        fx
    }

    // Both arms are effects; Err only means "stop here".
    #[allow(clippy::result_large_err)]
    fn record(&mut self, letter: &PlaintextLetter, leg: Leg, now: u64) -> Result<Effect, Effect> {
        match self
            .store
            .audit
            .append(now, &letter.sender, &letter.recipient, &letter.body, leg)
        {
            Ok(rec) => Ok(Effect::Log(LogEvent::new("audit", &self.id, format!("seq={} leg={leg}", rec.seq)))),
            Err(e) => Err(self.log("store_error", e.to_string())),
        }
    }

    /// Reseals to the local recipient and either requests a relay path to
    /// them or queues the envelope until they log in.
    fn deliver_local(&mut self, letter: &PlaintextLetter, now: u64) -> Vec<Effect> {
        let user = letter.recipient.name();
        let Some(acc) = self.store.accounts.get(user) else {
            return vec![self.log("drop", "unknown_recipient")];
        };
        let envelope = match self.sealer.seal_letter(letter, &acc.pubkey, &mut self.rng) {
            Ok(env) => env,
            Err(e) => return vec![self.log("drop", crypto_reason(&e))],
        };
        if self.online.contains_key(user) {
            let request = Payload::Relay {
                header: RelayHeader {
                    ttl: 0,
                    remaining_path: Vec::new(),
                    terminal: Terminal::Client(letter.recipient.clone()),
                },
                envelope,
            };
            return vec![Effect::send(self.entry.clone(), request)];
        }
        match self.store.queue.enqueue(user, envelope, now) {
            Ok(()) => vec![self.log("enqueue", format!("user={user}"))],
            Err(e) => vec![self.log("store_error", e.to_string())],
        }
    }

    fn federate(&mut self, letter: &PlaintextLetter, user: &str, send_ref: [u8; 16]) -> Vec<Effect> {
        let peer = letter.recipient.agency().to_string();
        let pk = self.peers[&peer];
        let envelope = match self.sealer.seal_letter(letter, &pk, &mut self.rng) {
            Ok(env) => env,
            Err(e) => return vec![self.log("drop", crypto_reason(&e))],
        };
        if self.federated.len() == FEDERATED_MEMORY {
            self.federated.pop_front();
        }
        self.federated
            .push_back((envelope_ref(&envelope), user.to_string(), send_ref));
        vec![
            self.log("federate", format!("peer={peer}")),
            Effect::send(
                EndpointId::server(&peer),
                Payload::Federate {
                    origin_agency: self.agency.clone(),
                    envelope,
                },
            ),
        ]
    }

    fn handle_federate(&mut self, from: &EndpointId, origin: String, envelope: SealedEnvelope, now: u64) -> Vec<Effect> {
        if !self.peers.contains_key(&origin) {
            return vec![self.log("drop", "unknown_peer")];
        }
        let letter = match self.sealer.open_letter(&envelope, &self.keys.private) {
            Ok(l) => l,
            Err(e) => return vec![self.log("drop", crypto_reason(&e))],
        };
        if letter.sender.agency() != origin || letter.recipient.agency() != self.agency {
            return vec![self.log("drop", "federate_address_mismatch")];
        }
        if !self.store.accounts.contains(letter.recipient.name()) {
            let r = envelope_ref(&envelope);
            return vec![
                self.log("drop", "unknown_recipient"),
                // Back on the link it came in on: over TCP that is the peer's own
                // outbound connection, the only one it can attribute to us.
                Effect::send(from.clone(), error_with_ref(ErrorCode::UnknownRecipient, &r)),
            ];
        }
        let mut fx = match self.record(&letter, Leg::FederatedIngress, now) {
            Ok(e) => vec![e],
            Err(e) => return vec![e],
        };
        fx.extend(self.deliver_local(&letter, now));
        fx
    }

    /// A relay handing over the last leg of a client path (TCP deployments,
    /// where clients are only reachable through their server connection).
    fn handle_gateway_relay(&mut self, header: RelayHeader, envelope: SealedEnvelope, now: u64) -> Vec<Effect> {
        let Terminal::Client(addr) = header.terminal else {
            return vec![self.log("drop", "gateway_non_client_terminal")];
        };
        if addr.agency() != self.agency {
            return vec![self.log("drop", "gateway_foreign_client")];
        }
        if let Some(conn) = self.online.get(addr.name()) {
            return vec![
                self.log("deliver", format!("user={}", addr.name())),
                Effect::send(conn.clone(), Payload::Deliver { envelope }),
            ];
        }
        match self.store.queue.enqueue(addr.name(), envelope, now) {
            Ok(()) => vec![self.log("enqueue", format!("user={}", addr.name()))],
            Err(e) => vec![self.log("store_error", e.to_string())],
        }
    }

    /// ERRORs only arrive here from peer servers: a failed email lookup, or
    /// a FEDERATE the peer could not deliver.
    fn handle_peer_error(&mut self, peer: &str, code: u16, message: String) -> Vec<Effect> {
        if let Some(r) = error_ref(&message) {
            let Some(pos) = self.federated.iter().position(|(fr, _, _)| *fr == r) else {
                return vec![self.log("drop", "unmatched_peer_error")];
            };
            let (_, user, send_ref) = self.federated.remove(pos).expect("position is valid");
            let mut fx = vec![self.log("federate_rejected", format!("peer={peer} code={code}"))];
            if let (Some(conn), Some(code)) = (self.online.get(&user), ErrorCode::from_code(code)) {
                fx.push(Effect::send(conn.clone(), error_with_ref(code, &send_ref)));
            }
            return fx;
        }
        match self.lookups.get_mut(peer).and_then(VecDeque::pop_front) {
            Some(lookup) => self.next_lookup(lookup),
            None => vec![self.log("drop", "unsolicited_error")],
        }
    }
}

fn crypto_reason(e: &CryptoError) -> &'static str {
    match e {
        CryptoError::WrongKey => "wrong_key",
        CryptoError::TamperDetected => "tamper_detected",
        CryptoError::OversizeBody { .. } => "oversize_body",
        _ => "malformed_envelope",
    }
}

impl Node for AgencyServer {
    fn id(&self) -> &EndpointId {
        &self.id
    }

    fn handle(&mut self, from: &EndpointId, frame: &Frame, now: u64) -> Vec<Effect> {
        let payload = match Payload::from_frame(frame) {
            Ok(p) => p,
            Err(e) => {
                return vec![
                    self.log("drop", format!("malformed_{}", frame.frame_type.name())),
                    Effect::send(
                        from.clone(),
                        Payload::Error {
                            code: ErrorCode::MalformedPayload.code(),
                            message: e.to_string(),
                        },
                    ),
                ]
            }
        };
        let user = self.session_user(from).map(str::to_string);
        let peer = from.server_agency().filter(|a| self.peers.contains_key(*a)).map(str::to_string);

        match payload {
            Payload::Register {
                user,
                email,
                password,
                pubkey,
            } => self.handle_register(from, user, email, password, pubkey, now),
            Payload::Login { user, password } => self.handle_login(from, user, password),
            Payload::PubkeyGet { address } => self.handle_pubkey_get(from, address),
            Payload::RosterGet => match user {
                Some(u) => self.handle_roster_get(from, &u),
                None => vec![self.error(from, ErrorCode::NotAuthenticated)],
            },
            Payload::RosterAdd { email } => match user {
                Some(u) => self.handle_roster_add(from, u, email, now),
                None => vec![self.error(from, ErrorCode::NotAuthenticated)],
            },
            Payload::Send { envelope } => match user {
                Some(u) => self.handle_client_send(from, u, envelope),
                None => self.handle_ingress(from, envelope, now),
            },
            Payload::Relay { header, envelope } if header.remaining_path.is_empty() && user.is_none() => {
                self.handle_gateway_relay(header, envelope, now)
            }
            Payload::Federate {
                origin_agency,
                envelope,
            } => self.handle_federate(from, origin_agency, envelope, now),
            Payload::PubkeyResp { address, .. } => match peer {
                Some(p) => self.handle_pubkey_resp(&p, address, now),
                None => vec![self.log("drop", "unsolicited_pubkey_resp")],
            },
            Payload::Error { code, message } => match peer {
                Some(p) => self.handle_peer_error(&p, code, message),
                None => vec![self.log("drop", "unexpected_ERROR")],
            },
            other => vec![self.log("drop", format!("unexpected_{}", other.frame_type().name()))],
        }
    }

    fn disconnected(&mut self, peer: &EndpointId, _now: u64) -> Vec<Effect> {
        match self.sessions.remove(peer) {
            Some(s) => {
                if self.online.get(&s.user) == Some(peer) {
                    self.online.remove(&s.user);
                }
                vec![self.log("logout", format!("user={}", s.user))]
            }
            None => Vec::new(),
        }
    }
}
