//! JSON mapping of typed payloads, used by the browser gateway and by the
//! conformance vectors.
//!
//! Every object carries `"type": "<FRAME_TYPE_NAME>"`. Field names match the
//! payload schemas; binary fields (passwords, public keys, envelopes, ref ids)
//! are standard base64 with padding. The RELAY header is a nested object.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde_json::{json, Map, Value};

use crate::crypto::{PublicKey, SealedEnvelope};

use super::frame::FrameType;
use super::payload::{Payload, RelayHeader};
use super::WireError;

fn b64(bytes: &[u8]) -> Value {
    Value::String(STANDARD.encode(bytes))
}

pub fn to_json(p: &Payload) -> Value {
    let mut v = match p {
        Payload::Register {
            user,
            email,
            password,
            pubkey,
        } => json!({
            "user": user, "email": email,
            "password": b64(password), "pubkey": b64(pubkey.as_bytes()),
        }),
        Payload::Login { user, password } => json!({"user": user, "password": b64(password)}),
        Payload::RosterGet => json!({}),
        Payload::RosterAdd { email } => json!({"email": email}),
        Payload::Send { envelope } | Payload::Deliver { envelope } => {
            json!({"envelope": b64(&envelope.to_bytes())})
        }
        Payload::Relay { header, envelope } => json!({
            "relay_header": {
                "ttl": header.ttl,
                "remaining_path": header.remaining_path.iter().map(|h| h.as_str()).collect::<Vec<_>>(),
                "terminal": header.terminal.to_string(),
            },
            "envelope": b64(&envelope.to_bytes()),
        }),
        Payload::Federate {
            origin_agency,
            envelope,
        } => json!({"origin_agency": origin_agency, "envelope": b64(&envelope.to_bytes())}),
        Payload::Ack { ref_id } => json!({"ref_id": b64(ref_id)}),
        Payload::Error { code, message } => json!({"code": code, "message": message}),
        Payload::PubkeyGet { address } => json!({"address": address}),
        Payload::PubkeyResp { address, pubkey } => {
            json!({"address": address, "pubkey": b64(pubkey.as_bytes())})
        }
    };
    v.as_object_mut()
        .expect("object literal")
        .insert("type".into(), Value::String(p.frame_type().name().into()));
    v
}

fn malformed(msg: impl Into<String>) -> WireError {
    WireError::MalformedPayload(msg.into())
}

struct Fields<'a> {
    obj: &'a Map<String, Value>,
}

impl<'a> Fields<'a> {
    fn get(&self, name: &str) -> Result<&'a Value, WireError> {
        self.obj
            .get(name)
            .ok_or_else(|| malformed(format!("missing field {name:?}")))
    }

    fn str(&self, name: &str) -> Result<String, WireError> {
        self.get(name)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| malformed(format!("field {name:?} must be a string")))
    }

    fn bytes(&self, name: &str) -> Result<Vec<u8>, WireError> {
        STANDARD
            .decode(self.str(name)?)
            .map_err(|_| malformed(format!("field {name:?} must be base64")))
    }

    fn pubkey(&self, name: &str) -> Result<PublicKey, WireError> {
        PublicKey::from_bytes(&self.bytes(name)?).map_err(|_| malformed("public key must be 32 bytes"))
    }

    fn envelope(&self) -> Result<SealedEnvelope, WireError> {
        SealedEnvelope::from_bytes(&self.bytes("envelope")?).map_err(|e| malformed(e.to_string()))
    }

    fn expect_exactly(&self, names: &[&str]) -> Result<(), WireError> {
        for key in self.obj.keys() {
            if key != "type" && !names.contains(&key.as_str()) {
                return Err(malformed(format!("unexpected field {key:?}")));
            }
        }
        Ok(())
    }
}

pub fn from_json(v: &Value) -> Result<Payload, WireError> {
    let obj = v.as_object().ok_or_else(|| malformed("expected a JSON object"))?;
    let f = Fields { obj };
    let type_name = f.str("type")?;
    let frame_type =
        FrameType::from_name(&type_name).ok_or_else(|| malformed(format!("unknown type {type_name:?}")))?;
    let (payload, names): (Payload, &[&str]) = match frame_type {
        FrameType::Register => (
            Payload::Register {
                user: f.str("user")?,
                email: f.str("email")?,
                password: f.bytes("password")?,
                pubkey: f.pubkey("pubkey")?,
            },
            &["user", "email", "password", "pubkey"],
        ),
        FrameType::Login => (
            Payload::Login {
                user: f.str("user")?,
                password: f.bytes("password")?,
            },
            &["user", "password"],
        ),
        FrameType::RosterGet => (Payload::RosterGet, &[]),
        FrameType::RosterAdd => (Payload::RosterAdd { email: f.str("email")? }, &["email"]),
        FrameType::Send => (Payload::Send { envelope: f.envelope()? }, &["envelope"]),
        FrameType::Deliver => (Payload::Deliver { envelope: f.envelope()? }, &["envelope"]),
        FrameType::Relay => {
            let h = f
                .get("relay_header")?
                .as_object()
                .ok_or_else(|| malformed("relay_header must be an object"))?;
            let hf = Fields { obj: h };
            hf.expect_exactly(&["ttl", "remaining_path", "terminal"])?;
            let ttl = hf
                .get("ttl")?
                .as_u64()
                .and_then(|t| u8::try_from(t).ok())
                .ok_or_else(|| malformed("ttl must be 0..=255"))?;
            let path = hf
                .get("remaining_path")?
                .as_array()
                .ok_or_else(|| malformed("remaining_path must be an array"))?
                .iter()
                .map(|n| {
                    n.as_str()
                        .ok_or_else(|| malformed("node ids must be strings"))?
                        .parse()
                        .map_err(|e: crate::addr::AddrError| malformed(e.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let terminal = hf
                .str("terminal")?
                .parse()
                .map_err(|e: crate::addr::AddrError| malformed(e.to_string()))?;
            let header = RelayHeader {
                ttl,
                remaining_path: path,
                terminal,
            };
            // Same validation as the binary form.
            let header = RelayHeader::from_bytes(&header.to_bytes()?)?;
            (
                Payload::Relay {
                    header,
                    envelope: f.envelope()?,
                },
                &["relay_header", "envelope"],
            )
        }
        FrameType::Federate => (
            Payload::Federate {
                origin_agency: f.str("origin_agency")?,
                envelope: f.envelope()?,
            },
            &["origin_agency", "envelope"],
        ),
        FrameType::Ack => (Payload::Ack { ref_id: f.bytes("ref_id")? }, &["ref_id"]),
        FrameType::Error => (
            Payload::Error {
                code: f
                    .get("code")?
                    .as_u64()
                    .and_then(|c| u16::try_from(c).ok())
                    .ok_or_else(|| malformed("code must be 0..=65535"))?,
                message: f.str("message")?,
            },
            &["code", "message"],
        ),
        FrameType::PubkeyGet => (Payload::PubkeyGet { address: f.str("address")? }, &["address"]),
        FrameType::PubkeyResp => (
            Payload::PubkeyResp {
                address: f.str("address")?,
                pubkey: f.pubkey("pubkey")?,
            },
            &["address", "pubkey"],
        ),
    };
    f.expect_exactly(names)?;
    Ok(payload)
}

pub fn to_json_string(p: &Payload) -> String {
    to_json(p).to_string()
}

pub fn from_json_str(s: &str) -> Result<Payload, WireError> {
    let v: Value = serde_json::from_str(s).map_err(|e| malformed(e.to_string()))?;
    from_json(&v)
}
