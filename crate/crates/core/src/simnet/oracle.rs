//! Checks run over a finished simulation: plaintext never on the wire, and
//! one audit record per server a delivered letter passed through.

use std::collections::{BTreeMap, HashMap, HashSet};

use crate::crypto::{CryptoError, Purpose, SealedEnvelope, Sealer, SecureRng, PrivateKey, PublicKey};
use crate::server::Leg;

use super::{ObservedFrame, SendStatus, SimNetwork};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfidentialityViolation {
    pub frame_index: usize,
    pub step: u64,
    pub link: String,
    pub plaintext: String,
}

/// Fails if any plaintext occurs as a byte substring of any observed frame.
/// Empty plaintexts are ignored, so an empty list passes trivially.
pub fn assert_confidentiality<P: AsRef<[u8]>>(
    trace: &[ObservedFrame],
    plaintexts: &[P],
) -> Result<(), ConfidentialityViolation> {
    let mut by_len: BTreeMap<usize, HashSet<&[u8]>> = BTreeMap::new();
    for p in plaintexts {
        let p = p.as_ref();
        if !p.is_empty() {
            by_len.entry(p.len()).or_default().insert(p);
        }
    }
    for (i, frame) in trace.iter().enumerate() {
        for (len, set) in &by_len {
            if let Some(hit) = frame.bytes.windows(*len).find(|w| set.contains(w)) {
                return Err(ConfidentialityViolation {
                    frame_index: i,
                    step: frame.step,
                    link: format!("{} -> {}", frame.from, frame.to),
                    plaintext: String::from_utf8_lossy(hit).into_owned(),
                });
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditMismatch {
    pub agency: String,
    pub sender: String,
    pub recipient: String,
    pub body: String,
    pub expected: usize,
    pub found: usize,
}

/// Every letter the ledger shows as delivered must have exactly one
/// local-ingress record at the sender's server and, when it crossed
/// agencies, exactly one federated-ingress record at the recipient's.
/// Rejected sends must have none, and no record may exist that no send
/// accounts for. Sends that were lost in flight are only held to the
/// "at most" side.
pub fn check_audit(net: &SimNetwork) -> Result<(), Vec<AuditMismatch>> {
    type Key = (String, String, String, String, Leg);
    let mut found: HashMap<Key, usize> = HashMap::new();
    for agency in net.agencies() {
        for rec in net.server(&agency).expect("listed").audit().records() {
            let key = (
                agency.clone(),
                rec.sender.to_string(),
                rec.recipient.to_string(),
                rec.body.clone(),
                rec.leg,
            );
            *found.entry(key).or_default() += 1;
        }
    }

    let ledger = net.ledger();
    let mut expected: HashMap<Key, (usize, bool)> = HashMap::new();
    for sent in &ledger.sent {
        let l = &sent.letter;
        let delivered = ledger
            .delivered
            .iter()
            .any(|d| d.recipient == l.recipient && d.letter == *l);
        let (src, dst) = (l.sender.agency().to_string(), l.recipient.agency().to_string());
        let key = |agency: &str, leg| {
            (
                agency.to_string(),
                l.sender.to_string(),
                l.recipient.to_string(),
                l.body.clone(),
                leg,
            )
        };
        let legs: Vec<(Key, usize)> = if delivered {
            if src == dst {
                vec![(key(&src, Leg::LocalIngress), 1)]
            } else {
                vec![(key(&src, Leg::LocalIngress), 1), (key(&dst, Leg::FederatedIngress), 1)]
            }
        } else if matches!(sent.status, SendStatus::Rejected { .. } | SendStatus::Local(_)) {
            vec![(key(&src, Leg::LocalIngress), 0), (key(&dst, Leg::FederatedIngress), 0)]
        } else {
            // Lost in flight: whatever happened before the loss.
            vec![(key(&src, Leg::LocalIngress), 1), (key(&dst, Leg::FederatedIngress), 1)]
        };
        let exact = delivered || !matches!(sent.status, SendStatus::InFlight | SendStatus::Accepted);
        for (k, n) in legs {
            let e = expected.entry(k).or_insert((0, true));
            e.0 += n;
            e.1 &= exact;
        }
    }

    let mut bad = Vec::new();
    let mismatch = |k: &Key, expected: usize, found: usize| AuditMismatch {
        agency: k.0.clone(),
        sender: k.1.clone(),
        recipient: k.2.clone(),
        body: k.3.clone(),
        expected,
        found,
    };
    for (k, (n, exact)) in &expected {
        let f = found.get(k).copied().unwrap_or(0);
        if (*exact && f != *n) || f > *n {
            bad.push(mismatch(k, *n, f));
        }
    }
    for (k, f) in &found {
        if !expected.contains_key(k) {
            bad.push(mismatch(k, 0, *f));
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(bad)
    }
}

/// A sealer that does not encrypt: the "envelope" carries the plaintext
/// verbatim. It exists only as the negative control for the
/// confidentiality check and must never be used outside tests.
#[derive(Debug, Default, Clone, Copy)]
pub struct PassthroughSealer;

impl Sealer for PassthroughSealer {
    fn seal(
        &self,
        _purpose: Purpose,
        plaintext: &[u8],
        _recipient: &PublicKey,
        _rng: &mut dyn SecureRng,
    ) -> Result<SealedEnvelope, CryptoError> {
        Ok(SealedEnvelope {
            wrapped_key: vec![0; crate::crypto::WRAPPED_KEY_LEN],
            nonce: vec![0; crate::crypto::ENVELOPE_NONCE_LEN],
            ciphertext: plaintext.to_vec(),
        })
    }

    fn open(&self, _purpose: Purpose, envelope: &SealedEnvelope, _key: &PrivateKey) -> Result<Vec<u8>, CryptoError> {
        Ok(envelope.ciphertext.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::addr::EndpointId;

    fn frame(bytes: &[u8]) -> ObservedFrame {
        ObservedFrame {
            step: 3,
            from: EndpointId::new("A.r1"),
            to: EndpointId::new("server:A"),
            bytes: bytes.to_vec(),
        }
    }

    #[test]
    fn substring_scan() {
        let trace = vec![frame(b"xxxxhello worldyyyy"), frame(b"abc")];
        assert!(assert_confidentiality(&trace, &["nothing here"]).is_ok());
        assert!(assert_confidentiality::<&str>(&trace, &[]).is_ok());
        assert!(assert_confidentiality(&trace, &[""]).is_ok());
        let v = assert_confidentiality(&trace, &["zzz", "hello world"]).unwrap_err();
        assert_eq!(v.frame_index, 0);
        assert_eq!(v.link, "A.r1 -> server:A");
        assert_eq!(v.plaintext, "hello world");
        assert!(assert_confidentiality(&[], &["abc"]).is_ok());
    }
}
