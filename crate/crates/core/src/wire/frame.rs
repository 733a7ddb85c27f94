use std::fmt;

use super::WireError;

pub const MAGIC: [u8; 2] = [0x53, 0x43];
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 8;
pub const MAX_PAYLOAD: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum FrameType {
    Register = 0x01,
    Login = 0x02,
    RosterGet = 0x03,
    RosterAdd = 0x04,
    Send = 0x05,
    Relay = 0x06,
    Deliver = 0x07,
    Federate = 0x08,
    Ack = 0x09,
    Error = 0x0A,
    PubkeyGet = 0x0B,
    PubkeyResp = 0x0C,
}

impl FrameType {
    pub const ALL: [FrameType; 12] = [
        FrameType::Register,
        FrameType::Login,
        FrameType::RosterGet,
        FrameType::RosterAdd,
        FrameType::Send,
        FrameType::Relay,
        FrameType::Deliver,
        FrameType::Federate,
        FrameType::Ack,
        FrameType::Error,
        FrameType::PubkeyGet,
        FrameType::PubkeyResp,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code.wrapping_sub(1) as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            FrameType::Register => "REGISTER",
            FrameType::Login => "LOGIN",
            FrameType::RosterGet => "ROSTER_GET",
            FrameType::RosterAdd => "ROSTER_ADD",
            FrameType::Send => "SEND",
            FrameType::Relay => "RELAY",
            FrameType::Deliver => "DELIVER",
            FrameType::Federate => "FEDERATE",
            FrameType::Ack => "ACK",
            FrameType::Error => "ERROR",
            FrameType::PubkeyGet => "PUBKEY_GET",
            FrameType::PubkeyResp => "PUBKEY_RESP",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }
}

impl fmt::Display for FrameType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub frame_type: FrameType,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(frame_type: FrameType, payload: Vec<u8>) -> Self {
        Frame {
            frame_type,
            payload,
        }
    }

    /// Emits `8 + payload_len` bytes: magic, version, type, big-endian u32
    /// length, payload.
    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        self.encode_into(&mut out)?;
        Ok(out)
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) -> Result<(), WireError> {
        if self.payload.len() > MAX_PAYLOAD {
            return Err(WireError::PayloadTooLarge(self.payload.len()));
        }
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.frame_type.code());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.payload);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decoded {
    /// A complete frame and the number of bytes it occupied.
    Frame(Frame, usize),
    NeedMoreBytes,
}

/// Decodes one frame from the front of `buf`.
///
/// Header bytes are validated as soon as they are present, so corruption is
/// reported without waiting for the rest of the frame. The declared length is
/// checked against the cap before anything is allocated.
pub fn decode_frame(buf: &[u8]) -> Result<Decoded, WireError> {
    for (i, &m) in MAGIC.iter().enumerate() {
        match buf.get(i) {
            Some(&b) if b != m => return Err(WireError::BadMagic),
            None => return Ok(Decoded::NeedMoreBytes),
            _ => {}
        }
    }
    match buf.get(2) {
        None => return Ok(Decoded::NeedMoreBytes),
        Some(&v) if v != VERSION => return Err(WireError::UnknownVersion(v)),
        _ => {}
    }
    let frame_type = match buf.get(3) {
        None => return Ok(Decoded::NeedMoreBytes),
        Some(&t) => FrameType::from_code(t).ok_or(WireError::UnknownFrameType(t))?,
    };
    if buf.len() < HEADER_LEN {
        return Ok(Decoded::NeedMoreBytes);
    }
    let len = u32::from_be_bytes([buf[4], buf[5], buf[6], buf[7]]) as usize;
    if len > MAX_PAYLOAD {
        return Err(WireError::PayloadTooLarge(len));
    }
    let total = HEADER_LEN + len;
    if buf.len() < total {
        return Ok(Decoded::NeedMoreBytes);
    }
    Ok(Decoded::Frame(
        Frame::new(frame_type, buf[HEADER_LEN..total].to_vec()),
        total,
    ))
}

/// Per-connection reassembly buffer.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Returns the next complete frame, if any. After an error the stream is
    /// unusable and the connection should be closed.
    pub fn next_frame(&mut self) -> Result<Option<Frame>, WireError> {
        match decode_frame(&self.buf)? {
            Decoded::Frame(frame, used) => {
                self.buf.drain(..used);
                Ok(Some(frame))
            }
            Decoded::NeedMoreBytes => Ok(None),
        }
    }
}
