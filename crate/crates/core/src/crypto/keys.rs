use std::fmt;

use rand::rngs::OsRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};
use x25519_dalek::StaticSecret;

use super::CryptoError;

pub const KEY_LEN: usize = 32;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PublicKey([u8; KEY_LEN]);

impl PublicKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let raw: [u8; KEY_LEN] = bytes.try_into().map_err(|_| CryptoError::InvalidKey)?;
        Ok(PublicKey(raw))
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, CryptoError> {
        let raw = hex::decode(s.trim()).map_err(|_| CryptoError::InvalidKey)?;
        PublicKey::from_bytes(&raw)
    }

    pub(crate) fn to_dalek(self) -> x25519_dalek::PublicKey {
        x25519_dalek::PublicKey::from(self.0)
    }
}

impl fmt::Debug for PublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PublicKey({})", fingerprint(self))
    }
}

/// Decryption key. Never encoded into a frame; only the keystore writes it.
#[derive(Clone)]
pub struct PrivateKey(StaticSecret);

impl PrivateKey {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let raw: [u8; KEY_LEN] = bytes
            .try_into()
            .map_err(|_| CryptoError::Keystore("private key must be 32 bytes".into()))?;
        Ok(PrivateKey(StaticSecret::from(raw)))
    }

    pub fn public_key(&self) -> PublicKey {
        PublicKey(*x25519_dalek::PublicKey::from(&self.0).as_bytes())
    }

    pub(crate) fn secret(&self) -> &StaticSecret {
        &self.0
    }

    pub(crate) fn to_bytes(&self) -> [u8; KEY_LEN] {
        self.0.to_bytes()
    }
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("PrivateKey(..)")
    }
}

#[derive(Clone, Debug)]
pub struct KeyPair {
    pub public: PublicKey,
    pub private: PrivateKey,
}

impl KeyPair {
    pub fn from_rng(rng: &mut dyn RngCore) -> Self {
        let mut raw = [0u8; KEY_LEN];
        rng.fill_bytes(&mut raw);
        Self::from_private(PrivateKey(StaticSecret::from(raw)))
    }

    pub fn from_private(private: PrivateKey) -> Self {
        KeyPair {
            public: private.public_key(),
            private,
        }
    }
}

/// With a seed the pair is reproducible (simulation and tests only); without
/// one it comes from the operating system's CSPRNG.
pub fn generate_keypair(seed: Option<u64>) -> KeyPair {
    match seed {
        Some(seed) => KeyPair::from_rng(&mut ChaCha20Rng::seed_from_u64(seed)),
        None => KeyPair::from_rng(&mut OsRng),
    }
}

/// First 8 bytes of SHA-256 over the public key, as 16 lowercase hex digits.
pub fn fingerprint(pk: &PublicKey) -> String {
    let digest = Sha256::digest(pk.as_bytes());
    hex::encode(&digest[..8])
}
