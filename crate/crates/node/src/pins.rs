//! Trust-on-first-use pins for server keys: `~/.relaymesh/known_servers`,
//! one `host:port <pubkey-hex>` per line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use relaymesh_core::crypto::PublicKey;

pub const FILE_NAME: &str = "known_servers";

#[derive(Debug, Clone)]
pub struct KnownServers {
    path: PathBuf,
}

impl KnownServers {
    pub fn in_dir(home: &Path) -> Self {
        KnownServers {
            path: home.join(FILE_NAME),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// The pinned key for `server`, if any. Unreadable or malformed lines
    /// are skipped.
    pub fn get(&self, server: &str) -> Option<PublicKey> {
        let text = fs::read_to_string(&self.path).ok()?;
        text.lines().find_map(|line| {
            let mut parts = line.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some(s), Some(hex)) if s == server => PublicKey::from_hex(hex).ok(),
                _ => None,
            }
        })
    }

    pub fn pin(&self, server: &str, key: &PublicKey) -> std::io::Result<()> {
        if let Some(dir) = self.path.parent() {
            fs::create_dir_all(dir)?;
        }
        let mut f = fs::OpenOptions::new().create(true).append(true).open(&self.path)?;
        writeln!(f, "{server} {}", key.to_hex())
    }
}
