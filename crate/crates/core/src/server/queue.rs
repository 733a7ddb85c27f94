//! Per-recipient FIFO of envelopes waiting for their recipient to log in.
//!
//! On disk each recipient has `queue/<user>.q`: concatenated DELIVER
//! payloads. The file is removed when the queue is drained.

use std::collections::{BTreeMap, VecDeque};
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::UNIX_EPOCH;

use crate::addr::is_valid_username;
use crate::codec::Reader;
use crate::crypto::SealedEnvelope;
use crate::wire::{decode_payload, encode_payload, FrameType, Payload};

use super::StoreError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Queued {
    pub envelope: SealedEnvelope,
    /// Milliseconds since the Unix epoch. Envelopes reloaded from disk carry
    /// the queue file's modification time.
    pub enqueued_at: u64,
}

#[derive(Debug, Default)]
pub struct DeliveryQueue {
    queues: BTreeMap<String, VecDeque<Queued>>,
    dir: Option<PathBuf>,
}

impl DeliveryQueue {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        std::fs::create_dir_all(dir)?;
        let mut queues = BTreeMap::new();
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            let Some(user) = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".q"))
                .filter(|u| is_valid_username(u))
            else {
                continue;
            };
            let mtime = std::fs::metadata(&path)?
                .modified()
                .ok()
                .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
                .map_or(0, |d| d.as_millis() as u64);
            let bytes = std::fs::read(&path)?;
            let corrupt = |reason: String| StoreError::Corrupt {
                file: path.clone(),
                reason,
            };
            let mut r = Reader::new(&bytes);
            let mut q = VecDeque::new();
            while !r.is_empty() {
                // A DELIVER payload is one u32-prefixed envelope; the prefix
                // marks the record boundary.
                let len = r.u32().map_err(|e| corrupt(e.to_string()))? as usize;
                let body = r.take(len).map_err(|e| corrupt(e.to_string()))?;
                let mut rec = Vec::with_capacity(4 + len);
                rec.extend_from_slice(&(len as u32).to_be_bytes());
                rec.extend_from_slice(body);
                match decode_payload(FrameType::Deliver, &rec) {
                    Ok(Payload::Deliver { envelope }) => q.push_back(Queued {
                        envelope,
                        enqueued_at: mtime,
                    }),
                    Ok(_) => unreachable!("decoded as DELIVER"),
                    Err(e) => return Err(corrupt(e.to_string())),
                }
            }
            if !q.is_empty() {
                queues.insert(user.to_string(), q);
            }
        }
        Ok(DeliveryQueue {
            queues,
            dir: Some(dir.to_path_buf()),
        })
    }

    fn file_for(&self, user: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{user}.q")))
    }

    pub fn enqueue(&mut self, user: &str, envelope: SealedEnvelope, now: u64) -> Result<(), StoreError> {
        if let Some(path) = self.file_for(user) {
            let bytes = encode_payload(&Payload::Deliver {
                envelope: envelope.clone(),
            })
            .map_err(|e| StoreError::Corrupt {
                file: path.clone(),
                reason: e.to_string(),
            })?;
            let mut f = OpenOptions::new().create(true).append(true).open(&path)?;
            f.write_all(&bytes)?;
            f.sync_data()?;
        }
        self.queues.entry(user.to_string()).or_default().push_back(Queued {
            envelope,
            enqueued_at: now,
        });
        Ok(())
    }

    /// Removes and returns everything queued for `user`, oldest first. A
    /// second drain returns nothing.
    pub fn drain(&mut self, user: &str) -> Result<Vec<Queued>, StoreError> {
        let items: Vec<Queued> = self.queues.remove(user).map(Vec::from).unwrap_or_default();
        if let Some(path) = self.file_for(user) {
            match std::fs::remove_file(&path) {
                Ok(()) => {}
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
                Err(e) => return Err(e.into()),
            }
        }
        Ok(items)
    }

    pub fn len(&self, user: &str) -> usize {
        self.queues.get(user).map_or(0, VecDeque::len)
    }

    pub fn total(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }
}
