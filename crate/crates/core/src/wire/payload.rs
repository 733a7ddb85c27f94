use crate::addr::{NodeId, Terminal};
use crate::codec::{self, Reader};
use crate::crypto::{PublicKey, SealedEnvelope};

use super::frame::{Frame, FrameType};
use super::WireError;

/// Source-routing header carried by RELAY frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelayHeader {
    pub ttl: u8,
    pub remaining_path: Vec<NodeId>,
    pub terminal: Terminal,
}

impl RelayHeader {
    /// `ttl`, a 16-bit hop count, each node id with a 16-bit length prefix,
    /// then the terminal string.
    pub fn to_bytes(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::new();
        codec::put_u8(&mut out, self.ttl);
        let count = u16::try_from(self.remaining_path.len())
            .map_err(|_| WireError::MalformedPayload("path too long".into()))?;
        codec::put_u16(&mut out, count);
        for hop in &self.remaining_path {
            codec::put_short(&mut out, hop.as_str().as_bytes())?;
        }
        codec::put_short(&mut out, self.terminal.to_string().as_bytes())?;
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::new(bytes);
        let ttl = r.u8()?;
        let count = r.u16()? as usize;
        let mut remaining_path: Vec<NodeId> = Vec::with_capacity(count.min(r.remaining() / 2));
        for _ in 0..count {
            let hop: NodeId = r
                .short_str()?
                .parse()
                .map_err(|e: crate::addr::AddrError| WireError::MalformedPayload(e.to_string()))?;
            if remaining_path.last() == Some(&hop) {
                return Err(WireError::MalformedPayload(format!(
                    "immediate duplicate hop {hop}"
                )));
            }
            remaining_path.push(hop);
        }
        let terminal: Terminal = r
            .short_str()?
            .parse()
            .map_err(|e: crate::addr::AddrError| WireError::MalformedPayload(e.to_string()))?;
        r.finish()?;
        Ok(RelayHeader {
            ttl,
            remaining_path,
            terminal,
        })
    }
}

/// Typed frame payloads. Field order on the wire follows the declaration
/// order here. Text and short binary fields carry a 16-bit length prefix;
/// envelopes carry a 32-bit one because a full-size letter exceeds 64 KiB
/// once sealed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Register {
        user: String,
        email: String,
        /// Password sealed to the server's public key.
        password: Vec<u8>,
        pubkey: PublicKey,
    },
    Login {
        user: String,
        password: Vec<u8>,
    },
    RosterGet,
    RosterAdd {
        email: String,
    },
    Send {
        envelope: SealedEnvelope,
    },
    Relay {
        header: RelayHeader,
        envelope: SealedEnvelope,
    },
    Deliver {
        envelope: SealedEnvelope,
    },
    Federate {
        origin_agency: String,
        envelope: SealedEnvelope,
    },
    Ack {
        ref_id: Vec<u8>,
    },
    Error {
        code: u16,
        message: String,
    },
    PubkeyGet {
        address: String,
    },
    PubkeyResp {
        address: String,
        pubkey: PublicKey,
    },
}

fn put_envelope(out: &mut Vec<u8>, env: &SealedEnvelope) -> Result<(), WireError> {
    let bytes = env.to_bytes();
    codec::put_long(out, &bytes)?;
    Ok(())
}

fn read_envelope(r: &mut Reader<'_>) -> Result<SealedEnvelope, WireError> {
    let raw = r.long()?;
    let mut inner = Reader::new(raw);
    let env = SealedEnvelope::decode_from(&mut inner)?;
    inner.finish()?;
    Ok(env)
}

fn read_pubkey(r: &mut Reader<'_>) -> Result<PublicKey, WireError> {
    PublicKey::from_bytes(r.short()?)
        .map_err(|_| WireError::MalformedPayload("public key must be 32 bytes".into()))
}

impl Payload {
    pub fn frame_type(&self) -> FrameType {
        match self {
            Payload::Register { .. } => FrameType::Register,
            Payload::Login { .. } => FrameType::Login,
            Payload::RosterGet => FrameType::RosterGet,
            Payload::RosterAdd { .. } => FrameType::RosterAdd,
            Payload::Send { .. } => FrameType::Send,
            Payload::Relay { .. } => FrameType::Relay,
            Payload::Deliver { .. } => FrameType::Deliver,
            Payload::Federate { .. } => FrameType::Federate,
            Payload::Ack { .. } => FrameType::Ack,
            Payload::Error { .. } => FrameType::Error,
            Payload::PubkeyGet { .. } => FrameType::PubkeyGet,
            Payload::PubkeyResp { .. } => FrameType::PubkeyResp,
        }
    }

    pub fn to_frame(&self) -> Result<Frame, WireError> {
        Ok(Frame::new(self.frame_type(), encode_payload(self)?))
    }

    pub fn from_frame(frame: &Frame) -> Result<Self, WireError> {
        decode_payload(frame.frame_type, &frame.payload)
    }

    /// The sealed envelope carried by SEND, RELAY, DELIVER and FEDERATE.
    pub fn envelope(&self) -> Option<&SealedEnvelope> {
        match self {
            Payload::Send { envelope }
            | Payload::Relay { envelope, .. }
            | Payload::Deliver { envelope }
            | Payload::Federate { envelope, .. } => Some(envelope),
            _ => None,
        }
    }
}

pub fn encode_payload(p: &Payload) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::new();
    match p {
        Payload::Register {
            user,
            email,
            password,
            pubkey,
        } => {
            codec::put_short(&mut out, user.as_bytes())?;
            codec::put_short(&mut out, email.as_bytes())?;
            codec::put_short(&mut out, password)?;
            codec::put_short(&mut out, pubkey.as_bytes())?;
        }
        Payload::Login { user, password } => {
            codec::put_short(&mut out, user.as_bytes())?;
            codec::put_short(&mut out, password)?;
        }
        Payload::RosterGet => {}
        Payload::RosterAdd { email } => codec::put_short(&mut out, email.as_bytes())?,
        Payload::Send { envelope } | Payload::Deliver { envelope } => {
            put_envelope(&mut out, envelope)?
        }
        Payload::Relay { header, envelope } => {
            codec::put_short(&mut out, &header.to_bytes()?)?;
            put_envelope(&mut out, envelope)?;
        }
        Payload::Federate {
            origin_agency,
            envelope,
        } => {
            codec::put_short(&mut out, origin_agency.as_bytes())?;
            put_envelope(&mut out, envelope)?;
        }
        Payload::Ack { ref_id } => codec::put_short(&mut out, ref_id)?,
        Payload::Error { code, message } => {
            codec::put_u16(&mut out, *code);
            codec::put_short(&mut out, message.as_bytes())?;
        }
        Payload::PubkeyGet { address } => codec::put_short(&mut out, address.as_bytes())?,
        Payload::PubkeyResp { address, pubkey } => {
            codec::put_short(&mut out, address.as_bytes())?;
            codec::put_short(&mut out, pubkey.as_bytes())?;
        }
    }
    Ok(out)
}

/// Strict decode: truncation and trailing bytes are both `MalformedPayload`.
pub fn decode_payload(frame_type: FrameType, bytes: &[u8]) -> Result<Payload, WireError> {
    let mut r = Reader::new(bytes);
    let p = match frame_type {
        FrameType::Register => Payload::Register {
            user: r.short_str()?.to_string(),
            email: r.short_str()?.to_string(),
            password: r.short()?.to_vec(),
            pubkey: read_pubkey(&mut r)?,
        },
        FrameType::Login => Payload::Login {
            user: r.short_str()?.to_string(),
            password: r.short()?.to_vec(),
        },
        FrameType::RosterGet => Payload::RosterGet,
        FrameType::RosterAdd => Payload::RosterAdd {
            email: r.short_str()?.to_string(),
        },
        FrameType::Send => Payload::Send {
            envelope: read_envelope(&mut r)?,
        },
        FrameType::Relay => Payload::Relay {
            header: RelayHeader::from_bytes(r.short()?)?,
            envelope: read_envelope(&mut r)?,
        },
        FrameType::Deliver => Payload::Deliver {
            envelope: read_envelope(&mut r)?,
        },
        FrameType::Federate => Payload::Federate {
            origin_agency: r.short_str()?.to_string(),
            envelope: read_envelope(&mut r)?,
        },
        FrameType::Ack => Payload::Ack {
            ref_id: r.short()?.to_vec(),
        },
        FrameType::Error => Payload::Error {
            code: r.u16()?,
            message: r.short_str()?.to_string(),
        },
        FrameType::PubkeyGet => Payload::PubkeyGet {
            address: r.short_str()?.to_string(),
        },
        FrameType::PubkeyResp => Payload::PubkeyResp {
            address: r.short_str()?.to_string(),
            pubkey: read_pubkey(&mut r)?,
        },
    };
    r.finish()?;
    Ok(p)
}
