//! Body of the ACK that answers ROSTER_GET: a 16-bit entry count, then per
//! entry a short address field and an online byte (0 or 1).

use crate::addr::Address;
use crate::codec::{self, Reader};

use super::WireError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RosterItem {
    pub address: Address,
    pub online: bool,
}

pub fn encode_roster(items: &[RosterItem]) -> Result<Vec<u8>, WireError> {
    let count = u16::try_from(items.len())
        .map_err(|_| WireError::MalformedPayload("roster has more than 65535 entries".into()))?;
    let mut out = Vec::new();
    codec::put_u16(&mut out, count);
    for item in items {
        codec::put_short(&mut out, item.address.to_string().as_bytes())?;
        codec::put_u8(&mut out, item.online as u8);
    }
    Ok(out)
}

pub fn decode_roster(bytes: &[u8]) -> Result<Vec<RosterItem>, WireError> {
    let mut r = Reader::new(bytes);
    let count = r.u16()?;
    let mut items = Vec::with_capacity(count.min(1024) as usize);
    for _ in 0..count {
        let address = r
            .short_str()?
            .parse()
            .map_err(|e| WireError::MalformedPayload(format!("roster entry: {e}")))?;
        let online = match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(WireError::MalformedPayload(format!("online flag {b}"))),
        };
        items.push(RosterItem { address, online });
    }
    r.finish()?;
    Ok(items)
}
