//! The I/O-free daemon interface shared by the TCP hosts and the simulator.

use chrono::{DateTime, SecondsFormat, Utc};

use crate::addr::EndpointId;
use crate::wire::{Frame, Payload};

/// Something a daemon wants done after handling an input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    Send { to: EndpointId, payload: Payload },
    Log(LogEvent),
}

impl Effect {
    pub fn send(to: EndpointId, payload: Payload) -> Self {
        Effect::Send { to, payload }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEvent {
    pub event: &'static str,
    pub node: String,
    pub reason: String,
}

impl LogEvent {
    pub fn new(event: &'static str, node: impl ToString, reason: impl Into<String>) -> Self {
        LogEvent {
            event,
            node: node.to_string(),
            reason: reason.into(),
        }
    }

    /// `ts=<iso8601> event=<event> node=<id> reason=<reason>`
    pub fn render(&self, now_ms: u64) -> String {
        format!(
            "ts={} event={} node={} reason={}",
            iso8601(now_ms),
            self.event,
            self.node,
            self.reason
        )
    }
}

pub fn iso8601(ms: u64) -> String {
    DateTime::<Utc>::from_timestamp_millis(ms as i64)
        .unwrap_or_default()
        .to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// A daemon state machine. `from` identifies the link the frame arrived on:
/// a peer daemon's endpoint id, or a connection id assigned by the host.
pub trait Node: Send {
    fn id(&self) -> &EndpointId;

    fn handle(&mut self, from: &EndpointId, frame: &Frame, now: u64) -> Vec<Effect>;

    fn disconnected(&mut self, _peer: &EndpointId, _now: u64) -> Vec<Effect> {
        Vec::new()
    }
}
