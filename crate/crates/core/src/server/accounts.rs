//! Accounts, email index and rosters, persisted to `accounts.db`.
//!
//! The file is a sequence of records: a tag byte (`0x01` account, `0x02`
//! roster entry), a 32-bit big-endian body length, then the body fields
//! encoded like wire payload fields.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::addr::Address;
use crate::codec::{self, CodecError, Reader};
use crate::crypto::PublicKey;

use super::password::{PasswordParams, HASH_LEN, SALT_LEN};
use super::StoreError;

const TAG_ACCOUNT: u8 = 0x01;
const TAG_ROSTER: u8 = 0x02;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Account {
    pub username: String,
    pub email: String,
    pub password_hash: [u8; HASH_LEN],
    pub salt: [u8; SALT_LEN],
    pub params: PasswordParams,
    pub pubkey: PublicKey,
    pub created_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RosterEntry {
    pub owner: String,
    pub buddy: Address,
    pub added_at: u64,
}

/// Emails compare case-insensitively.
pub fn normalize_email(email: &str) -> Option<String> {
    let e = email.trim().to_ascii_lowercase();
    let (local, domain) = e.split_once('@')?;
    let ok = !local.is_empty()
        && !domain.is_empty()
        && e.len() <= 254
        && !e.chars().any(|c| c.is_whitespace() || c.is_control());
    ok.then_some(e)
}

#[derive(Debug, Default)]
pub struct AccountStore {
    accounts: BTreeMap<String, Account>,
    by_email: HashMap<String, String>,
    rosters: BTreeMap<String, Vec<RosterEntry>>,
    file: Option<File>,
}

impl AccountStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let mut store = Self::default();
        if path.exists() {
            let bytes = std::fs::read(path)?;
            store.load(&bytes).map_err(|e| StoreError::Corrupt {
                file: PathBuf::from(path),
                reason: e.to_string(),
            })?;
        }
        store.file = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(store)
    }

    fn load(&mut self, bytes: &[u8]) -> Result<(), CodecError> {
        let mut r = Reader::new(bytes);
        while !r.is_empty() {
            let tag = r.u8()?;
            let body = r.long()?;
            let mut b = Reader::new(body);
            match tag {
                TAG_ACCOUNT => {
                    let acc = decode_account(&mut b)?;
                    b.finish()?;
                    self.index(acc);
                }
                TAG_ROSTER => {
                    let owner = b.short_str()?.to_string();
                    let buddy = b
                        .short_str()?
                        .parse()
                        .map_err(|_| CodecError::InvalidUtf8)?;
                    let added_at = b.u64()?;
                    b.finish()?;
                    self.rosters.entry(owner.clone()).or_default().push(RosterEntry {
                        owner,
                        buddy,
                        added_at,
                    });
                }
                // Unknown tags from a newer version are skipped.
                _ => {}
            }
        }
        Ok(())
    }

    fn index(&mut self, acc: Account) {
        self.by_email.insert(acc.email.clone(), acc.username.clone());
        self.accounts.insert(acc.username.clone(), acc);
    }

    fn persist(&mut self, tag: u8, body: &[u8]) -> Result<(), StoreError> {
        if let Some(file) = &mut self.file {
            let mut rec = Vec::with_capacity(5 + body.len());
            codec::put_u8(&mut rec, tag);
            codec::put_long(&mut rec, body).expect("record fits u32");
            file.write_all(&rec)?;
            file.sync_data()?;
        }
        Ok(())
    }

    pub fn get(&self, username: &str) -> Option<&Account> {
        self.accounts.get(username)
    }

    pub fn contains(&self, username: &str) -> bool {
        self.accounts.contains_key(username)
    }

    pub fn by_email(&self, email: &str) -> Option<&Account> {
        let email = normalize_email(email)?;
        self.by_email.get(&email).and_then(|u| self.accounts.get(u))
    }

    pub fn len(&self) -> usize {
        self.accounts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accounts.is_empty()
    }

    /// Caller checks uniqueness first; the email must already be normalized.
    pub fn insert(&mut self, acc: Account) -> Result<(), StoreError> {
        debug_assert!(!self.accounts.contains_key(&acc.username));
        self.persist(TAG_ACCOUNT, &encode_account(&acc))?;
        self.index(acc);
        Ok(())
    }

    pub fn roster(&self, owner: &str) -> &[RosterEntry] {
        self.rosters.get(owner).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Returns `false` when the buddy is already on the roster.
    pub fn add_roster_entry(&mut self, entry: RosterEntry) -> Result<bool, StoreError> {
        if self.roster(&entry.owner).iter().any(|e| e.buddy == entry.buddy) {
            return Ok(false);
        }
        let mut body = Vec::new();
        codec::put_short(&mut body, entry.owner.as_bytes()).expect("short");
        codec::put_short(&mut body, entry.buddy.to_string().as_bytes()).expect("short");
        codec::put_u64(&mut body, entry.added_at);
        self.persist(TAG_ROSTER, &body)?;
        self.rosters.entry(entry.owner.clone()).or_default().push(entry);
        Ok(true)
    }
}

fn encode_account(acc: &Account) -> Vec<u8> {
    let mut body = Vec::new();
    codec::put_short(&mut body, acc.username.as_bytes()).expect("short");
    codec::put_short(&mut body, acc.email.as_bytes()).expect("short");
    codec::put_short(&mut body, &acc.password_hash).expect("short");
    codec::put_short(&mut body, &acc.salt).expect("short");
    codec::put_u32(&mut body, acc.params.m_cost);
    codec::put_u32(&mut body, acc.params.t_cost);
    codec::put_u32(&mut body, acc.params.p_cost);
    codec::put_short(&mut body, acc.pubkey.as_bytes()).expect("short");
    codec::put_u64(&mut body, acc.created_at);
    body
}

fn decode_account(b: &mut Reader<'_>) -> Result<Account, CodecError> {
    let fixed = |raw: &[u8], n: usize| {
        if raw.len() == n {
            Ok(())
        } else {
            Err(CodecError::Truncated { needed: n })
        }
    };
    let username = b.short_str()?.to_string();
    let email = b.short_str()?.to_string();
    let hash = b.short()?;
    fixed(hash, HASH_LEN)?;
    let salt = b.short()?;
    fixed(salt, SALT_LEN)?;
    let params = PasswordParams {
        m_cost: b.u32()?,
        t_cost: b.u32()?,
        p_cost: b.u32()?,
    };
    let pubkey = PublicKey::from_bytes(b.short()?).map_err(|_| CodecError::Truncated { needed: 32 })?;
    Ok(Account {
        username,
        email,
        password_hash: hash.try_into().expect("checked"),
        salt: salt.try_into().expect("checked"),
        params,
        pubkey,
        created_at: b.u64()?,
    })
}
