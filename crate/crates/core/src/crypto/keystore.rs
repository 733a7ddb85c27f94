//! On-disk key pair storage.
//!
//! Layout: magic `SKEY`, version byte `0x01`, then the private key and the
//! public key, each with a 16-bit big-endian length prefix.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::codec::{self, Reader};

use super::keys::{KeyPair, PrivateKey, PublicKey};
use super::CryptoError;

pub const MAGIC: &[u8; 4] = b"SKEY";
pub const VERSION: u8 = 0x01;

pub fn encode(kp: &KeyPair) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 1 + 2 + 32 + 2 + 32);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    codec::put_short(&mut out, &kp.private.to_bytes()).expect("32 bytes");
    codec::put_short(&mut out, kp.public.as_bytes()).expect("32 bytes");
    out
}

pub fn decode(bytes: &[u8]) -> Result<KeyPair, CryptoError> {
    let bad = |m: &str| CryptoError::Keystore(m.to_string());
    let mut r = Reader::new(bytes);
    if r.take(4).map_err(|_| bad("truncated header"))? != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = r.u8().map_err(|_| bad("truncated header"))?;
    if version != VERSION {
        return Err(CryptoError::Keystore(format!("unsupported version {version:#04x}")));
    }
    let private = PrivateKey::from_bytes(r.short().map_err(|_| bad("truncated private key"))?)?;
    let public = PublicKey::from_bytes(r.short().map_err(|_| bad("truncated public key"))?)
        .map_err(|_| bad("public key must be 32 bytes"))?;
    r.finish().map_err(|_| bad("trailing bytes"))?;
    if private.public_key() != public {
        return Err(bad("public key does not match private key"));
    }
    Ok(KeyPair { public, private })
}

/// Writes the keystore, creating parent directories. On Unix the file is
/// created with mode 0600.
pub fn write(path: &Path, kp: &KeyPair) -> Result<(), CryptoError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut opts = fs::OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut file = opts.open(path)?;
    file.write_all(&encode(kp))?;
    file.sync_all()?;
    Ok(())
}

pub fn read(path: &Path) -> Result<KeyPair, CryptoError> {
    decode(&fs::read(path)?)
}
