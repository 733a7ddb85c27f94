//! The client side of the protocol as an I/O-free state machine. The CLI
//! and the simulator drive the same [`Client`].

mod repl;

pub use repl::{
    format_error, format_incoming, format_roster_item, parse_command, strip_ref, Command, BANNER, HELP,
};

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::addr::{Address, EndpointId};
use crate::crypto::{
    envelope_ref, seal_credential, CryptoError, HybridSealer, KeyPair, PlaintextLetter, PublicKey,
    Sealer, MAX_BODY_LEN,
};
use crate::node::{Effect, LogEvent, Node};
use crate::wire::{decode_roster, error_ref, ErrorCode, Frame, Payload, RosterItem};

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("not logged in")]
    NotLoggedIn,
    #[error("{0} is not in your buddy list")]
    NotInRoster(Address),
    #[error("message body is {len} bytes; the limit is {MAX_BODY_LEN}")]
    OversizeBody { len: usize },
    #[error("server key not known yet")]
    NoServerKey,
    #[error("no keypair loaded")]
    NoKeys,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionState {
    LoggedOut,
    LoggedIn { token: [u8; 16] },
}

/// Things the client tells its user about.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClientEvent {
    /// The server key was fetched. `first_use` is true when it was pinned
    /// just now rather than matched against an existing pin.
    ServerKey { address: Address, pubkey: PublicKey, first_use: bool },
    PinMismatch { pinned: PublicKey, offered: PublicKey },
    Registered { user: String },
    LoggedIn { address: Address },
    Roster(Vec<RosterItem>),
    BuddyAdded(Address),
    SendAccepted { reference: [u8; 16], to: Address },
    SendFailed { reference: [u8; 16], to: Option<Address>, code: u16, message: String },
    Received(PlaintextLetter),
    /// A DELIVER that did not open under our key. Nothing of it is shown.
    Undecryptable,
    RequestFailed { request: &'static str, code: u16, message: String },
}

#[derive(Debug, Clone)]
enum Request {
    ServerKey,
    Register { user: String },
    Login { user: String },
    RosterGet,
    RosterAdd,
}

impl Request {
    fn name(&self) -> &'static str {
        match self {
            Request::ServerKey => "PUBKEY_GET",
            Request::Register { .. } => "REGISTER",
            Request::Login { .. } => "LOGIN",
            Request::RosterGet => "ROSTER_GET",
            Request::RosterAdd => "ROSTER_ADD",
        }
    }
}

/// Requests other than SEND go out one at a time, because a buddy add can
/// wait on a peer agency while later requests would be answered at once.
/// SENDs are pipelined and matched by envelope reference.
#[derive(Debug)]
pub struct Client {
    id: EndpointId,
    server: EndpointId,
    keys: Option<KeyPair>,
    pinned: Option<PublicKey>,
    server_key: Option<PublicKey>,
    agency: Option<String>,
    address: Option<Address>,
    state: SessionState,
    roster: Vec<RosterItem>,
    in_flight: Option<Request>,
    waiting: VecDeque<(Request, Payload)>,
    sends: HashMap<[u8; 16], Address>,
    events: Vec<ClientEvent>,
    sealer: Arc<dyn Sealer>,
    rng: ChaCha20Rng,
    aborted: bool,
}

impl Client {
    /// `id` names this client's end of the link; `server` is where its
    /// frames go.
    pub fn new(id: EndpointId, server: EndpointId) -> Self {
        Client {
            id,
            server,
            keys: None,
            pinned: None,
            server_key: None,
            agency: None,
            address: None,
            state: SessionState::LoggedOut,
            roster: Vec::new(),
            in_flight: None,
            waiting: VecDeque::new(),
            sends: HashMap::new(),
            events: Vec::new(),
            sealer: Arc::new(HybridSealer),
            rng: ChaCha20Rng::from_entropy(),
            aborted: false,
        }
    }

    pub fn with_keys(mut self, keys: KeyPair) -> Self {
        self.keys = Some(keys);
        self
    }

    pub fn set_keys(&mut self, keys: KeyPair) {
        self.keys = Some(keys);
    }

    pub fn keys(&self) -> Option<&KeyPair> {
        self.keys.as_ref()
    }

    /// A previously pinned server key. The next fetched key must match it.
    pub fn with_pin(mut self, pinned: Option<PublicKey>) -> Self {
        self.pinned = pinned;
        self
    }

    pub fn with_rng(mut self, rng: ChaCha20Rng) -> Self {
        self.rng = rng;
        self
    }

    pub fn with_sealer(mut self, sealer: Arc<dyn Sealer>) -> Self {
        self.sealer = sealer;
        self
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn is_logged_in(&self) -> bool {
        matches!(self.state, SessionState::LoggedIn { .. })
    }

    pub fn address(&self) -> Option<&Address> {
        self.address.as_ref()
    }

    pub fn server_key(&self) -> Option<PublicKey> {
        self.server_key
    }

    pub fn agency(&self) -> Option<&str> {
        self.agency.as_deref()
    }

    pub fn roster(&self) -> &[RosterItem] {
        &self.roster
    }

    /// True while a request or SEND is still unanswered.
    pub fn is_busy(&self) -> bool {
        self.in_flight.is_some() || !self.waiting.is_empty() || !self.sends.is_empty()
    }

    /// True when no request other than SEND is outstanding.
    pub fn is_idle(&self) -> bool {
        self.in_flight.is_none() && self.waiting.is_empty()
    }

    pub fn pending_sends(&self) -> usize {
        self.sends.len()
    }

    /// True after a pin mismatch; the client refuses to do anything else.
    pub fn is_aborted(&self) -> bool {
        self.aborted
    }

    pub fn take_events(&mut self) -> Vec<ClientEvent> {
        std::mem::take(&mut self.events)
    }

    fn request(&mut self, req: Request, payload: Payload) -> Vec<Effect> {
        if self.in_flight.is_some() {
            self.waiting.push_back((req, payload));
            return Vec::new();
        }
        self.in_flight = Some(req);
        vec![Effect::send(self.server.clone(), payload)]
    }

    fn next_request(&mut self) -> Vec<Effect> {
        self.in_flight = None;
        match self.waiting.pop_front() {
            Some((req, payload)) => self.request(req, payload),
            None => Vec::new(),
        }
    }

    fn require_server_key(&self) -> Result<PublicKey, ClientError> {
        if self.aborted {
            return Err(ClientError::NoServerKey);
        }
        self.server_key.ok_or(ClientError::NoServerKey)
    }

    /// Fetches the server key. Always the first thing a client does.
    pub fn connect(&mut self) -> Vec<Effect> {
        self.request(
            Request::ServerKey,
            Payload::PubkeyGet {
                address: String::new(),
            },
        )
    }

    pub fn register(&mut self, user: &str, email: &str, password: &str) -> Result<Vec<Effect>, ClientError> {
        let server = self.require_server_key()?;
        let pubkey = self.keys.as_ref().ok_or(ClientError::NoKeys)?.public;
        let password = seal_credential(password, &server, &mut self.rng)?;
        Ok(self.request(
            Request::Register { user: user.to_string() },
            Payload::Register {
                user: user.to_string(),
                email: email.to_string(),
                password,
                pubkey,
            },
        ))
    }

    pub fn login(&mut self, user: &str, password: &str) -> Result<Vec<Effect>, ClientError> {
        let server = self.require_server_key()?;
        let password = seal_credential(password, &server, &mut self.rng)?;
        Ok(self.request(
            Request::Login { user: user.to_string() },
            Payload::Login {
                user: user.to_string(),
                password,
            },
        ))
    }

    pub fn roster_get(&mut self) -> Result<Vec<Effect>, ClientError> {
        if !self.is_logged_in() {
            return Err(ClientError::NotLoggedIn);
        }
        Ok(self.request(Request::RosterGet, Payload::RosterGet))
    }

    pub fn add_buddy(&mut self, email: &str) -> Result<Vec<Effect>, ClientError> {
        if !self.is_logged_in() {
            return Err(ClientError::NotLoggedIn);
        }
        Ok(self.request(
            Request::RosterAdd,
            Payload::RosterAdd {
                email: email.to_string(),
            },
        ))
    }

    /// Seals a letter to the server and emits SEND. Nothing goes out unless
    /// the client is logged in and `to` is on its buddy list.
    pub fn send(&mut self, to: &Address, body: &str, now: u64) -> Result<Vec<Effect>, ClientError> {
        if !self.is_logged_in() {
            return Err(ClientError::NotLoggedIn);
        }
        if !self.roster.iter().any(|r| &r.address == to) {
            return Err(ClientError::NotInRoster(to.clone()));
        }
        self.send_unchecked(to, body, now)
    }

    /// [`Client::send`] without the buddy-list check, so tests can make the
    /// server reject a recipient.
    pub fn send_unchecked(&mut self, to: &Address, body: &str, now: u64) -> Result<Vec<Effect>, ClientError> {
        let (Some(me), true) = (self.address.clone(), self.is_logged_in()) else {
            return Err(ClientError::NotLoggedIn);
        };
        if body.len() > MAX_BODY_LEN {
            return Err(ClientError::OversizeBody { len: body.len() });
        }
        let server = self.require_server_key()?;
        let letter = PlaintextLetter::new(me, to.clone(), body, now);
        let envelope = self.sealer.seal_letter(&letter, &server, &mut self.rng)?;
        self.sends.insert(envelope_ref(&envelope), to.clone());
        Ok(vec![Effect::send(self.server.clone(), Payload::Send { envelope })])
    }

    fn on_response(&mut self, payload: Payload) -> Vec<Effect> {
        let Some(req) = self.in_flight.take() else {
            return vec![Effect::Log(LogEvent::new("drop", &self.id, "unsolicited_response"))];
        };
        match (req, payload) {
            (Request::ServerKey, Payload::PubkeyResp { address, pubkey }) => {
                let Ok(address) = address.parse::<Address>() else {
                    return self.next_request();
                };
                match self.pinned {
                    Some(pinned) if pinned != pubkey => {
                        self.aborted = true;
                        self.waiting.clear();
                        self.events.push(ClientEvent::PinMismatch { pinned, offered: pubkey });
                        return Vec::new();
                    }
                    pinned => {
                        self.pinned = Some(pubkey);
                        self.server_key = Some(pubkey);
                        self.agency = Some(address.agency().to_string());
                        self.events.push(ClientEvent::ServerKey {
                            address,
                            pubkey,
                            first_use: pinned.is_none(),
                        });
                    }
                }
            }
            (Request::Register { user }, Payload::Ack { .. }) => {
                self.events.push(ClientEvent::Registered { user });
            }
            (Request::Login { user }, Payload::Ack { ref_id }) => {
                let token: [u8; 16] = ref_id.try_into().unwrap_or_default();
                let agency = self.agency.clone().unwrap_or_default();
                if let Ok(address) = Address::new(&user, &agency) {
                    self.state = SessionState::LoggedIn { token };
                    self.address = Some(address.clone());
                    self.roster.clear();
                    self.events.push(ClientEvent::LoggedIn { address });
                    // The buddy list is the first thing a user sees.
                    self.waiting.push_front((Request::RosterGet, Payload::RosterGet));
                }
            }
            (Request::RosterGet, Payload::Ack { ref_id }) => match decode_roster(&ref_id) {
                Ok(items) => {
                    self.roster = items.clone();
                    self.events.push(ClientEvent::Roster(items));
                }
                Err(e) => self.events.push(ClientEvent::RequestFailed {
                    request: "ROSTER_GET",
                    code: ErrorCode::MalformedPayload.code(),
                    message: e.to_string(),
                }),
            },
            (Request::RosterAdd, Payload::Ack { ref_id }) => {
                let parsed = std::str::from_utf8(&ref_id).ok().and_then(|s| s.parse::<Address>().ok());
                if let Some(address) = parsed {
                    if !self.roster.iter().any(|r| r.address == address) {
                        self.roster.push(RosterItem {
                            address: address.clone(),
                            online: false,
                        });
                    }
                    self.events.push(ClientEvent::BuddyAdded(address));
                }
            }
            (req, Payload::Error { code, message }) => {
                self.events.push(ClientEvent::RequestFailed {
                    request: req.name(),
                    code,
                    message,
                });
            }
            (req, other) => {
                self.events.push(ClientEvent::RequestFailed {
                    request: req.name(),
                    code: ErrorCode::MalformedPayload.code(),
                    message: format!("unexpected {} reply", other.frame_type().name()),
                });
            }
        }
        self.next_request()
    }

    fn on_deliver(&mut self, envelope: &crate::crypto::SealedEnvelope) {
        let Some(keys) = &self.keys else {
            self.events.push(ClientEvent::Undecryptable);
            return;
        };
        match self.sealer.open_letter(envelope, &keys.private) {
            Ok(letter) => self.events.push(ClientEvent::Received(letter)),
            Err(_) => self.events.push(ClientEvent::Undecryptable),
        }
    }
}

impl Node for Client {
    fn id(&self) -> &EndpointId {
        &self.id
    }

    fn handle(&mut self, _from: &EndpointId, frame: &Frame, _now: u64) -> Vec<Effect> {
        let payload = match Payload::from_frame(frame) {
            Ok(p) => p,
            Err(_) => return vec![Effect::Log(LogEvent::new("drop", &self.id, "malformed_payload"))],
        };
        match payload {
            Payload::Deliver { envelope } => {
                self.on_deliver(&envelope);
                Vec::new()
            }
            Payload::Ack { ref_id } if ref_id.len() == 16 && self.sends.contains_key(&ref_id[..]) => {
                let reference: [u8; 16] = ref_id.try_into().expect("length checked");
                let to = self.sends.remove(&reference).expect("checked");
                self.events.push(ClientEvent::SendAccepted { reference, to });
                Vec::new()
            }
            Payload::Error { code, message } if error_ref(&message).is_some() => {
                let reference = error_ref(&message).expect("checked");
                let to = self.sends.remove(&reference);
                self.events.push(ClientEvent::SendFailed {
                    reference,
                    to,
                    code,
                    message,
                });
                Vec::new()
            }
            other => self.on_response(other),
        }
    }

    fn disconnected(&mut self, _peer: &EndpointId, _now: u64) -> Vec<Effect> {
        self.state = SessionState::LoggedOut;
        self.address = None;
        self.in_flight = None;
        self.waiting.clear();
        self.sends.clear();
        Vec::new()
    }
}
