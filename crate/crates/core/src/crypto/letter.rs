use crate::addr::Address;
use crate::codec::{self, Reader};

use super::CryptoError;

/// Maximum body size in bytes (64 KiB).
pub const MAX_BODY_LEN: usize = 64 * 1024;

/// The structured message that gets sealed: who sent it, to whom, when, and
/// what it says.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaintextLetter {
    pub sender: Address,
    pub recipient: Address,
    pub body: String,
    /// Milliseconds since the Unix epoch, UTC.
    pub sent_at: u64,
}

impl PlaintextLetter {
    pub fn new(sender: Address, recipient: Address, body: impl Into<String>, sent_at: u64) -> Self {
        PlaintextLetter {
            sender,
            recipient,
            body: body.into(),
            sent_at,
        }
    }

    /// Canonical form: sender and recipient with 16-bit length prefixes,
    /// `sent_at` as a big-endian u64, then the body with a 32-bit prefix.
    pub fn to_canonical_bytes(&self) -> Result<Vec<u8>, CryptoError> {
        if self.body.len() > MAX_BODY_LEN {
            return Err(CryptoError::OversizeBody {
                len: self.body.len(),
            });
        }
        let sender = self.sender.to_string();
        let recipient = self.recipient.to_string();
        let mut out = Vec::with_capacity(16 + sender.len() + recipient.len() + self.body.len());
        // Addresses are bounded well under u16::MAX; these cannot fail.
        codec::put_short(&mut out, sender.as_bytes()).expect("address length");
        codec::put_short(&mut out, recipient.as_bytes()).expect("address length");
        codec::put_u64(&mut out, self.sent_at);
        codec::put_long(&mut out, self.body.as_bytes()).expect("body length");
        Ok(out)
    }

    pub fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let malformed = |e: &dyn std::fmt::Display| CryptoError::MalformedLetter(e.to_string());
        let mut r = Reader::new(bytes);
        let sender = r.short_str().map_err(|e| malformed(&e))?;
        let recipient = r.short_str().map_err(|e| malformed(&e))?;
        let sent_at = r.u64().map_err(|e| malformed(&e))?;
        let body = r.long().map_err(|e| malformed(&e))?;
        r.finish().map_err(|e| malformed(&e))?;
        if body.len() > MAX_BODY_LEN {
            return Err(CryptoError::MalformedLetter("body exceeds limit".into()));
        }
        let body = std::str::from_utf8(body).map_err(|e| malformed(&e))?;
        Ok(PlaintextLetter {
            sender: sender.parse().map_err(|e| malformed(&e))?,
            recipient: recipient.parse().map_err(|e| malformed(&e))?,
            body: body.to_string(),
            sent_at,
        })
    }
}
