//! Append-only audit log of opened letters.
//!
//! One line per record:
//! `seq ts sender recipient digest-hex leg body`, where the body escapes
//! `\`, newline and carriage return so every record stays on one line.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::addr::Address;
use crate::node::iso8601;

use super::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Leg {
    LocalIngress,
    FederatedIngress,
}

impl Leg {
    pub fn as_str(self) -> &'static str {
        match self {
            Leg::LocalIngress => "local_ingress",
            Leg::FederatedIngress => "federated_ingress",
        }
    }
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Leg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "local_ingress" => Ok(Leg::LocalIngress),
            "federated_ingress" => Ok(Leg::FederatedIngress),
            other => Err(format!("unknown leg {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRecord {
    pub seq: u64,
    /// Milliseconds since the Unix epoch.
    pub ts: u64,
    pub sender: Address,
    pub recipient: Address,
    pub body_digest: [u8; 32],
    pub body: String,
    pub leg: Leg,
}

impl AuditRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{} {} {} {} {} {} {}",
            self.seq,
            iso8601(self.ts),
            self.sender,
            self.recipient,
            hex::encode(self.body_digest),
            self.leg,
            escape(&self.body)
        )
    }

    pub fn from_line(line: &str) -> Result<Self, String> {
        let mut parts = line.splitn(7, ' ');
        let mut next = |what: &str| parts.next().ok_or_else(|| format!("missing {what}"));
        let seq = next("seq")?.parse().map_err(|_| "bad seq".to_string())?;
        let ts = chrono::DateTime::parse_from_rfc3339(next("ts")?)
            .map_err(|e| format!("bad ts: {e}"))?
            .timestamp_millis() as u64;
        let sender = next("sender")?.parse().map_err(|e| format!("bad sender: {e}"))?;
        let recipient = next("recipient")?.parse().map_err(|e| format!("bad recipient: {e}"))?;
        let digest = hex::decode(next("digest")?).map_err(|_| "bad digest".to_string())?;
        let leg = next("leg")?.parse()?;
        let body = unescape(next("body")?)?;
        Ok(AuditRecord {
            seq,
            ts,
            sender,
            recipient,
            body_digest: digest.try_into().map_err(|_| "digest must be 32 bytes".to_string())?,
            body,
            leg,
        })
    }
}

pub fn escape(body: &str) -> String {
    let mut out = String::with_capacity(body.len());
    for c in body.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(format!("bad escape \\{}", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}

/// The log keeps every record in memory as well, which the simulator and
/// tests count against.
#[derive(Debug, Default)]
pub struct AuditLog {
    records: Vec<AuditRecord>,
    next_seq: u64,
    file: Option<File>,
    path: Option<PathBuf>,
}

impl AuditLog {
    pub fn in_memory() -> Self {
        AuditLog {
            next_seq: 1,
            ..Default::default()
        }
    }

    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let mut records = Vec::new();
        if path.exists() {
            let text = std::fs::read_to_string(path)?;
            for (i, line) in text.lines().enumerate() {
                let rec = AuditRecord::from_line(line).map_err(|reason| StoreError::Corrupt {
                    file: path.to_path_buf(),
                    reason: format!("line {}: {reason}", i + 1),
                })?;
                records.push(rec);
            }
        }
        let next_seq = records.last().map_or(1, |r| r.seq + 1);
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(AuditLog {
            records,
            next_seq,
            file: Some(file),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn append(
        &mut self,
        ts: u64,
        sender: &Address,
        recipient: &Address,
        body: &str,
        leg: Leg,
    ) -> Result<&AuditRecord, StoreError> {
        let rec = AuditRecord {
            seq: self.next_seq,
            ts,
            sender: sender.clone(),
            recipient: recipient.clone(),
            body_digest: Sha256::digest(body.as_bytes()).into(),
            body: body.to_string(),
            leg,
        };
        if let Some(file) = &mut self.file {
            let mut line = rec.to_line();
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.sync_data()?;
        }
        self.next_seq += 1;
        self.records.push(rec);
        Ok(self.records.last().expect("just pushed"))
    }

    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }
}
