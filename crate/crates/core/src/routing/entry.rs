use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::addr::{EndpointId, NodeId, Terminal};
use crate::crypto::SealedEnvelope;
use crate::node::{Effect, LogEvent, Node};
use crate::wire::{Frame, Payload, RelayHeader};

use super::{NodeRegistry, PathPolicy, RoutingError};

pub const DEFAULT_HOPS: usize = 3;

/// The agency's ingress balancer. Accepts SEND (route to the agency server)
/// and empty-path RELAY requests (route to the named terminal); everything
/// else is dropped.
#[derive(Debug)]
pub struct EntryNode {
    id: EndpointId,
    agency: String,
    registry: NodeRegistry,
    hops: usize,
    policy: PathPolicy,
    rng: ChaCha20Rng,
    usage: BTreeMap<NodeId, u64>,
}

impl EntryNode {
    pub fn new(agency: impl Into<String>, registry: NodeRegistry, hops: usize, policy: PathPolicy) -> Self {
        let agency = agency.into();
        EntryNode {
            id: EndpointId::entry(&agency),
            agency,
            registry,
            hops,
            policy,
            rng: ChaCha20Rng::from_entropy(),
            usage: BTreeMap::new(),
        }
    }

    pub fn with_rng(mut self, rng: ChaCha20Rng) -> Self {
        self.rng = rng;
        self
    }

    pub fn registry(&self) -> &NodeRegistry {
        &self.registry
    }

    pub fn kill_relay(&mut self, id: &NodeId) -> bool {
        self.registry.remove(id)
    }

    /// How many times each relay has been drawn into a path.
    pub fn usage(&self) -> &BTreeMap<NodeId, u64> {
        &self.usage
    }

    pub fn reset_usage(&mut self) {
        self.usage.clear();
    }

    /// Builds a path of `min(hops, live relays)` nodes and wraps the envelope
    /// in a RELAY frame for the first hop. Ttl is path length + 2.
    pub fn route(
        &mut self,
        terminal: Terminal,
        envelope: SealedEnvelope,
    ) -> Result<(EndpointId, Payload), RoutingError> {
        let k = self.hops.min(self.registry.len());
        let path = self.registry.select_path(self.policy, k, &mut self.rng)?;
        for hop in &path.hops {
            *self.usage.entry(hop.clone()).or_default() += 1;
        }
        let first = EndpointId::from(&path.hops[0]);
        let ttl = u8::try_from(path.k() + 2).unwrap_or(u8::MAX);
        Ok((
            first,
            Payload::Relay {
                header: RelayHeader {
                    ttl,
                    remaining_path: path.hops,
                    terminal,
                },
                envelope,
            },
        ))
    }

    fn is_local_terminal(&self, t: &Terminal) -> bool {
        match t {
            Terminal::Server(a) => a == &self.agency,
            Terminal::Client(addr) => addr.agency() == self.agency,
            Terminal::Peer(a) => a != &self.agency,
        }
    }

    fn drop_event(&self, reason: impl Into<String>) -> Vec<Effect> {
        vec![Effect::Log(LogEvent::new("drop", &self.id, reason))]
    }
}

impl Node for EntryNode {
    fn id(&self) -> &EndpointId {
        &self.id
    }

    fn handle(&mut self, _from: &EndpointId, frame: &Frame, _now: u64) -> Vec<Effect> {
        let (terminal, envelope) = match Payload::from_frame(frame) {
            Ok(Payload::Send { envelope }) => (Terminal::Server(self.agency.clone()), envelope),
            Ok(Payload::Relay { header, envelope }) if header.remaining_path.is_empty() => {
                if !self.is_local_terminal(&header.terminal) {
                    return self.drop_event("firewall_foreign_terminal");
                }
                (header.terminal, envelope)
            }
            Ok(Payload::Relay { .. }) => return self.drop_event("firewall_routed_relay"),
            Ok(other) => {
                return self.drop_event(format!("firewall_{}", other.frame_type().name()))
            }
            Err(_) => return self.drop_event("malformed_payload"),
        };
        match self.route(terminal, envelope) {
            Ok((to, payload)) => vec![
                Effect::Log(LogEvent::new("forward", &self.id, format!("next={to}"))),
                Effect::send(to, payload),
            ],
            Err(e) => self.drop_event(e.reason()),
        }
    }
}
