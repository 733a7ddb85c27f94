use crate::addr::{EndpointId, NodeId, Terminal};
use crate::crypto::SealedEnvelope;
use crate::node::{Effect, LogEvent, Node};
use crate::wire::{Frame, Payload, RelayHeader};

use super::RoutingError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForwardAction {
    pub to: EndpointId,
    pub payload: Payload,
}

/// A forwarding-only relay. It holds no keys; envelopes are moved, never
/// opened.
#[derive(Debug)]
pub struct RelayNode {
    id: NodeId,
    endpoint: EndpointId,
    agency: String,
    client_gateway: Option<EndpointId>,
    forwarded: u64,
    dropped: u64,
}

impl RelayNode {
    pub fn new(id: NodeId, agency: impl Into<String>) -> Self {
        RelayNode {
            endpoint: EndpointId::from(&id),
            id,
            agency: agency.into(),
            client_gateway: None,
            forwarded: 0,
            dropped: 0,
        }
    }

    /// Client terminals are handed to `gateway` (the agency server) as a
    /// RELAY frame with an empty path instead of being delivered directly.
    /// TCP deployments need this because clients only hold a connection to
    /// their server.
    pub fn with_client_gateway(mut self, gateway: EndpointId) -> Self {
        self.client_gateway = Some(gateway);
        self
    }

    pub fn node_id(&self) -> &NodeId {
        &self.id
    }

    pub fn forwarded(&self) -> u64 {
        self.forwarded
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    /// Pops this node off the path and decrements the ttl. The envelope is
    /// passed through unchanged.
    pub fn forward(
        &self,
        header: RelayHeader,
        envelope: SealedEnvelope,
    ) -> Result<ForwardAction, RoutingError> {
        let mut path = header.remaining_path.into_iter();
        match path.next() {
            Some(head) if head == self.id => {}
            other => return Err(RoutingError::NotNextHop { expected: other }),
        }
        let ttl = header.ttl.checked_sub(1).ok_or(RoutingError::TtlExpired)?;
        let rest: Vec<NodeId> = path.collect();

        if let Some(next) = rest.first() {
            if ttl == 0 {
                return Err(RoutingError::TtlExpired);
            }
            return Ok(ForwardAction {
                to: EndpointId::from(next),
                payload: Payload::Relay {
                    header: RelayHeader {
                        ttl,
                        remaining_path: rest,
                        terminal: header.terminal,
                    },
                    envelope,
                },
            });
        }

        let to = header.terminal.endpoint();
        let action = match header.terminal {
            Terminal::Server(_) => ForwardAction {
                to,
                payload: Payload::Send { envelope },
            },
            Terminal::Client(_) => match &self.client_gateway {
                Some(gateway) => ForwardAction {
                    to: gateway.clone(),
                    payload: Payload::Relay {
                        header: RelayHeader {
                            ttl,
                            remaining_path: Vec::new(),
                            terminal: header.terminal,
                        },
                        envelope,
                    },
                },
                None => ForwardAction {
                    to,
                    payload: Payload::Deliver { envelope },
                },
            },
            Terminal::Peer(_) => ForwardAction {
                to,
                payload: Payload::Federate {
                    origin_agency: self.agency.clone(),
                    envelope,
                },
            },
        };
        Ok(action)
    }

    fn drop_event(&mut self, reason: impl Into<String>) -> Vec<Effect> {
        self.dropped += 1;
        vec![Effect::Log(LogEvent::new("drop", &self.id, reason))]
    }
}

impl Node for RelayNode {
    fn id(&self) -> &EndpointId {
        &self.endpoint
    }

    fn handle(&mut self, _from: &EndpointId, frame: &Frame, _now: u64) -> Vec<Effect> {
        let (header, envelope) = match Payload::from_frame(frame) {
            Ok(Payload::Relay { header, envelope }) => (header, envelope),
            Ok(other) => {
                return self.drop_event(format!("unexpected_{}", other.frame_type().name()))
            }
            Err(_) => return self.drop_event(RoutingError::MalformedPayload(String::new()).reason()),
        };
        match self.forward(header, envelope) {
            Ok(action) => {
                self.forwarded += 1;
                vec![
                    Effect::Log(LogEvent::new("forward", &self.id, format!("next={}", action.to))),
                    Effect::send(action.to, action.payload),
                ]
            }
            Err(e) => self.drop_event(e.reason()),
        }
    }
}
