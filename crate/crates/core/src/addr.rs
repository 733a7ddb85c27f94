//! Principal addresses (`name@agency`), network endpoint identifiers and
//! relay terminals.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub const MAX_NAME_LEN: usize = 64;
pub const MAX_AGENCY_LEN: usize = 32;
pub const MAX_USERNAME_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid {what}: {input:?}")]
pub struct AddrError {
    pub what: &'static str,
    pub input: String,
}

fn addr_err(what: &'static str, input: &str) -> AddrError {
    AddrError {
        what,
        input: input.to_string(),
    }
}

pub fn is_valid_agency(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= MAX_AGENCY_LEN
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

/// Account usernames: 1 to 32 characters from `[a-z0-9_]`.
pub fn is_valid_username(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= MAX_USERNAME_LEN
        && s.bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

fn is_valid_name(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= MAX_NAME_LEN
        && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// A principal address. Users and agency servers both have one; a server's
/// name is `server<agency>`, e.g. `serverA@A`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Address {
    name: String,
    agency: String,
}

impl Address {
    pub fn new(name: &str, agency: &str) -> Result<Self, AddrError> {
        if !is_valid_name(name) {
            return Err(addr_err("address name", name));
        }
        if !is_valid_agency(agency) {
            return Err(addr_err("agency name", agency));
        }
        Ok(Address {
            name: name.to_string(),
            agency: agency.to_string(),
        })
    }

    pub fn server(agency: &str) -> Result<Self, AddrError> {
        Address::new(&format!("server{agency}"), agency)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn agency(&self) -> &str {
        &self.agency
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.agency)
    }
}

impl FromStr for Address {
    type Err = AddrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, agency) = s.split_once('@').ok_or_else(|| addr_err("address", s))?;
        Address::new(name, agency).map_err(|_| addr_err("address", s))
    }
}

/// Identifier of one end of a link: a daemon (`server:A`, `entry:A`, a relay
/// node id), a client (`client:alice@A`) or a host-assigned connection id.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EndpointId(String);

impl EndpointId {
    pub fn new(s: impl Into<String>) -> Self {
        EndpointId(s.into())
    }

    pub fn server(agency: &str) -> Self {
        EndpointId(format!("server:{agency}"))
    }

    pub fn entry(agency: &str) -> Self {
        EndpointId(format!("entry:{agency}"))
    }

    pub fn client(addr: &Address) -> Self {
        EndpointId(format!("client:{addr}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// The agency named by a `server:<agency>` endpoint.
    pub fn server_agency(&self) -> Option<&str> {
        self.0.strip_prefix("server:")
    }
}

impl fmt::Display for EndpointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&NodeId> for EndpointId {
    fn from(id: &NodeId) -> Self {
        EndpointId(id.0.clone())
    }
}

/// Relay node identifier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(s: impl Into<String>) -> Result<Self, AddrError> {
        let s = s.into();
        if s.is_empty() || s.len() > 255 || s.contains(char::is_whitespace) {
            return Err(addr_err("node id", &s));
        }
        Ok(NodeId(s))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for NodeId {
    type Err = AddrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NodeId::new(s)
    }
}

/// Where a relay path ends. The last hop re-types the frame by kind:
/// SEND for a server, DELIVER for a client, FEDERATE for a peer server.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Terminal {
    Server(String),
    Client(Address),
    Peer(String),
}

impl Terminal {
    pub fn endpoint(&self) -> EndpointId {
        match self {
            Terminal::Server(agency) | Terminal::Peer(agency) => EndpointId::server(agency),
            Terminal::Client(addr) => EndpointId::client(addr),
        }
    }
}

impl fmt::Display for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Terminal::Server(a) => write!(f, "server:{a}"),
            Terminal::Client(addr) => write!(f, "client:{addr}"),
            Terminal::Peer(a) => write!(f, "peer:{a}"),
        }
    }
}

impl FromStr for Terminal {
    type Err = AddrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| addr_err("terminal", s))?;
        match kind {
            "server" if is_valid_agency(rest) => Ok(Terminal::Server(rest.to_string())),
            "peer" if is_valid_agency(rest) => Ok(Terminal::Peer(rest.to_string())),
            "client" => rest
                .parse()
                .map(Terminal::Client)
                .map_err(|_| addr_err("terminal", s)),
            _ => Err(addr_err("terminal", s)),
        }
    }
}
