//! Binary framing and typed payloads for everything exchanged among clients,
//! relays and servers.

mod frame;
pub mod json;
mod payload;
mod roster;

pub use frame::{decode_frame, Decoded, Frame, FrameDecoder, FrameType, HEADER_LEN, MAGIC, MAX_PAYLOAD, VERSION};
pub use payload::{decode_payload, encode_payload, Payload, RelayHeader};
pub use roster::{decode_roster, encode_roster, RosterItem};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unknown protocol version {0:#04x}")]
    UnknownVersion(u8),
    #[error("unknown frame type {0:#04x}")]
    UnknownFrameType(u8),
    #[error("payload of {0} bytes exceeds the 16 MiB cap")]
    PayloadTooLarge(usize),
    #[error("malformed payload: {0}")]
    MalformedPayload(String),
}

impl From<crate::codec::CodecError> for WireError {
    fn from(e: crate::codec::CodecError) -> Self {
        WireError::MalformedPayload(e.to_string())
    }
}

/// ERROR frame codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum ErrorCode {
    BadCredentials = 1,
    DuplicateUser = 2,
    UnknownRecipient = 3,
    NotAuthenticated = 4,
    MalformedPayload = 5,
    UnknownAgency = 6,
    WeakPassword = 7,
    DuplicateEmail = 8,
    UnknownEmail = 9,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 9] = [
        ErrorCode::BadCredentials,
        ErrorCode::DuplicateUser,
        ErrorCode::UnknownRecipient,
        ErrorCode::NotAuthenticated,
        ErrorCode::MalformedPayload,
        ErrorCode::UnknownAgency,
        ErrorCode::WeakPassword,
        ErrorCode::DuplicateEmail,
        ErrorCode::UnknownEmail,
    ];

    pub fn code(self) -> u16 {
        self as u16
    }

    pub fn from_code(code: u16) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.code() == code)
    }

    pub fn default_message(self) -> &'static str {
        match self {
            ErrorCode::BadCredentials => "bad credentials",
            ErrorCode::DuplicateUser => "username already registered",
            ErrorCode::UnknownRecipient => "unknown recipient",
            ErrorCode::NotAuthenticated => "not authenticated",
            ErrorCode::MalformedPayload => "malformed payload",
            ErrorCode::UnknownAgency => "unknown agency",
            ErrorCode::WeakPassword => "password must be at least 8 characters",
            ErrorCode::DuplicateEmail => "email already registered",
            ErrorCode::UnknownEmail => "no account with that email",
        }
    }
}

/// Errors about a particular SEND carry its envelope reference as a
/// `[ref=<32 hex>]` suffix so the sender can correlate them.
pub fn error_with_ref(code: ErrorCode, reference: &[u8; 16]) -> Payload {
    Payload::Error {
        code: code.code(),
        message: format!("{} [ref={}]", code.default_message(), hex::encode(reference)),
    }
}

pub fn error_ref(message: &str) -> Option<[u8; 16]> {
    let start = message.rfind("[ref=")?;
    let hex_part = message[start + 5..].strip_suffix(']')?;
    let raw = hex::decode(hex_part).ok()?;
    raw.try_into().ok()
}
