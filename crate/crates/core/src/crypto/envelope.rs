use std::fmt;

use aes_gcm::aead::{Aead, Payload};
use aes_gcm::{Aes256Gcm, KeyInit, Nonce};
use hkdf::Hkdf;
use rand::rngs::OsRng;
use rand::{CryptoRng, RngCore};
use sha2::{Digest, Sha256};
use x25519_dalek::StaticSecret;

use crate::codec::{self, Reader};

use super::keys::{PrivateKey, PublicKey, KEY_LEN};
use super::letter::PlaintextLetter;
use super::CryptoError;

pub const ENVELOPE_NONCE_LEN: usize = 12;
const TAG_LEN: usize = 16;
/// Ephemeral public key followed by the AES-GCM-wrapped content key and tag.
pub const WRAPPED_KEY_LEN: usize = KEY_LEN + KEY_LEN + TAG_LEN;

const KEK_INFO: &[u8] = b"relaymesh/kek/v1";
const WRAP_NONCE: [u8; ENVELOPE_NONCE_LEN] = [0u8; ENVELOPE_NONCE_LEN];

/// What a sealed plaintext is for; bound into the content AAD so a sealed
/// credential can never be opened as a letter or the reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Letter,
    Credential,
}

impl Purpose {
    fn label(self) -> &'static [u8] {
        match self {
            Purpose::Letter => b"relaymesh/letter/v1",
            Purpose::Credential => b"relaymesh/credential/v1",
        }
    }
}

/// Object-safe randomness source for sealing.
pub trait SecureRng: RngCore + CryptoRng {}

impl<T: RngCore + CryptoRng> SecureRng for T {}

#[derive(Clone, PartialEq, Eq)]
pub struct SealedEnvelope {
    pub wrapped_key: Vec<u8>,
    pub nonce: Vec<u8>,
    /// AES-256-GCM ciphertext with the 16-byte tag appended.
    pub ciphertext: Vec<u8>,
}

impl fmt::Debug for SealedEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SealedEnvelope")
            .field("wrapped_key", &hex::encode(&self.wrapped_key))
            .field("nonce", &hex::encode(&self.nonce))
            .field("ciphertext_len", &self.ciphertext.len())
            .finish()
    }
}

impl SealedEnvelope {
    /// `wrapped_key` and `nonce` carry 16-bit length prefixes, `ciphertext` a
    /// 32-bit one.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(8 + self.wrapped_key.len() + self.nonce.len() + self.ciphertext.len());
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        codec::put_short(out, &self.wrapped_key).expect("wrapped key fits u16");
        codec::put_short(out, &self.nonce).expect("nonce fits u16");
        codec::put_long(out, &self.ciphertext).expect("ciphertext fits u32");
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let mut r = Reader::new(bytes);
        let env = Self::decode_from(&mut r).map_err(CryptoError::MalformedEnvelope)?;
        r.finish().map_err(CryptoError::MalformedEnvelope)?;
        Ok(env)
    }

    pub fn decode_from(r: &mut Reader<'_>) -> Result<Self, codec::CodecError> {
        Ok(SealedEnvelope {
            wrapped_key: r.short()?.to_vec(),
            nonce: r.short()?.to_vec(),
            ciphertext: r.long()?.to_vec(),
        })
    }

    pub fn encoded_len(&self) -> usize {
        8 + self.wrapped_key.len() + self.nonce.len() + self.ciphertext.len()
    }
}

/// 16-byte reference for an envelope: truncated SHA-256 of its encoding.
/// Used to correlate a SEND with its ACK or ERROR.
pub fn envelope_ref(env: &SealedEnvelope) -> [u8; 16] {
    let digest = Sha256::digest(env.to_bytes());
    let mut out = [0u8; 16];
    out.copy_from_slice(&digest[..16]);
    out
}

/// The envelope cipher used by clients and servers. The production
/// implementation is [`HybridSealer`].
pub trait Sealer: Send + Sync + fmt::Debug {
    fn seal(
        &self,
        purpose: Purpose,
        plaintext: &[u8],
        recipient: &PublicKey,
        rng: &mut dyn SecureRng,
    ) -> Result<SealedEnvelope, CryptoError>;

    fn open(
        &self,
        purpose: Purpose,
        envelope: &SealedEnvelope,
        key: &PrivateKey,
    ) -> Result<Vec<u8>, CryptoError>;

    fn seal_letter(
        &self,
        letter: &PlaintextLetter,
        recipient: &PublicKey,
        rng: &mut dyn SecureRng,
    ) -> Result<SealedEnvelope, CryptoError> {
        self.seal(Purpose::Letter, &letter.to_canonical_bytes()?, recipient, rng)
    }

    fn open_letter(
        &self,
        envelope: &SealedEnvelope,
        key: &PrivateKey,
    ) -> Result<PlaintextLetter, CryptoError> {
        PlaintextLetter::from_canonical_bytes(&self.open(Purpose::Letter, envelope, key)?)
    }
}

/// X25519 ephemeral-static agreement, HKDF-SHA256 key-encryption key,
/// AES-256-GCM for both the key wrap and the content.
#[derive(Debug, Default, Clone, Copy)]
pub struct HybridSealer;

fn derive_kek(shared: &[u8; 32], eph_pub: &[u8], recipient: &[u8]) -> [u8; 32] {
    let mut salt = [0u8; 64];
    salt[..32].copy_from_slice(eph_pub);
    salt[32..].copy_from_slice(recipient);
    let hk = Hkdf::<Sha256>::new(Some(&salt), shared);
    let mut kek = [0u8; 32];
    hk.expand(KEK_INFO, &mut kek).expect("32 bytes is a valid HKDF length");
    kek
}

fn content_aad(purpose: Purpose, wrapped_key: &[u8]) -> Vec<u8> {
    let mut aad = purpose.label().to_vec();
    aad.extend_from_slice(wrapped_key);
    aad
}

impl Sealer for HybridSealer {
    fn seal(
        &self,
        purpose: Purpose,
        plaintext: &[u8],
        recipient: &PublicKey,
        rng: &mut dyn SecureRng,
    ) -> Result<SealedEnvelope, CryptoError> {
        let mut eph_raw = [0u8; KEY_LEN];
        rng.fill_bytes(&mut eph_raw);
        let eph = StaticSecret::from(eph_raw);
        let eph_pub = x25519_dalek::PublicKey::from(&eph);
        let shared = eph.diffie_hellman(&recipient.to_dalek());
        if !shared.was_contributory() {
            return Err(CryptoError::InvalidKey);
        }
        let kek = derive_kek(shared.as_bytes(), eph_pub.as_bytes(), recipient.as_bytes());

        let mut content_key = [0u8; KEY_LEN];
        rng.fill_bytes(&mut content_key);

        let mut wrap_aad = [0u8; 64];
        wrap_aad[..32].copy_from_slice(eph_pub.as_bytes());
        wrap_aad[32..].copy_from_slice(recipient.as_bytes());
        let wrapped = Aes256Gcm::new_from_slice(&kek)
            .expect("32-byte key")
            .encrypt(
                Nonce::from_slice(&WRAP_NONCE),
                Payload {
                    msg: &content_key,
                    aad: &wrap_aad,
                },
            )
            .expect("AES-GCM encryption of 32 bytes");
        let mut wrapped_key = Vec::with_capacity(WRAPPED_KEY_LEN);
        wrapped_key.extend_from_slice(eph_pub.as_bytes());
        wrapped_key.extend_from_slice(&wrapped);

        let mut nonce = [0u8; ENVELOPE_NONCE_LEN];
        rng.fill_bytes(&mut nonce);
        let ciphertext = Aes256Gcm::new_from_slice(&content_key)
            .expect("32-byte key")
            .encrypt(
                Nonce::from_slice(&nonce),
                Payload {
                    msg: plaintext,
                    aad: &content_aad(purpose, &wrapped_key),
                },
            )
            .map_err(|_| CryptoError::OversizeBody {
                len: plaintext.len(),
            })?;

        Ok(SealedEnvelope {
            wrapped_key,
            nonce: nonce.to_vec(),
            ciphertext,
        })
    }

    fn open(
        &self,
        purpose: Purpose,
        envelope: &SealedEnvelope,
        key: &PrivateKey,
    ) -> Result<Vec<u8>, CryptoError> {
        if envelope.wrapped_key.len() != WRAPPED_KEY_LEN {
            return Err(CryptoError::WrongKey);
        }
        let (eph_pub, wrapped) = envelope.wrapped_key.split_at(KEY_LEN);
        let eph_raw: [u8; KEY_LEN] = eph_pub.try_into().expect("split at key length");
        let shared = key
            .secret()
            .diffie_hellman(&x25519_dalek::PublicKey::from(eph_raw));
        if !shared.was_contributory() {
            return Err(CryptoError::WrongKey);
        }
        let own_pub = key.public_key();
        let kek = derive_kek(shared.as_bytes(), eph_pub, own_pub.as_bytes());
        let mut wrap_aad = [0u8; 64];
        wrap_aad[..32].copy_from_slice(eph_pub);
        wrap_aad[32..].copy_from_slice(own_pub.as_bytes());
        let content_key = Aes256Gcm::new_from_slice(&kek)
            .expect("32-byte key")
            .decrypt(
                Nonce::from_slice(&WRAP_NONCE),
                Payload {
                    msg: wrapped,
                    aad: &wrap_aad,
                },
            )
            .map_err(|_| CryptoError::WrongKey)?;

        if envelope.nonce.len() != ENVELOPE_NONCE_LEN {
            return Err(CryptoError::TamperDetected);
        }
        Aes256Gcm::new_from_slice(&content_key)
            .map_err(|_| CryptoError::WrongKey)?
            .decrypt(
                Nonce::from_slice(&envelope.nonce),
                Payload {
                    msg: &envelope.ciphertext,
                    aad: &content_aad(purpose, &envelope.wrapped_key),
                },
            )
            .map_err(|_| CryptoError::TamperDetected)
    }
}

/// Seals a letter to `recipient` with OS randomness.
pub fn seal(letter: &PlaintextLetter, recipient: &PublicKey) -> Result<SealedEnvelope, CryptoError> {
    seal_with_rng(letter, recipient, &mut OsRng)
}

pub fn seal_with_rng(
    letter: &PlaintextLetter,
    recipient: &PublicKey,
    rng: &mut dyn SecureRng,
) -> Result<SealedEnvelope, CryptoError> {
    HybridSealer.seal_letter(letter, recipient, rng)
}

pub fn open(envelope: &SealedEnvelope, key: &PrivateKey) -> Result<PlaintextLetter, CryptoError> {
    HybridSealer.open_letter(envelope, key)
}

/// Seals a password so it never crosses the wire in clear.
pub fn seal_credential(
    password: &str,
    server: &PublicKey,
    rng: &mut dyn SecureRng,
) -> Result<Vec<u8>, CryptoError> {
    Ok(HybridSealer
        .seal(Purpose::Credential, password.as_bytes(), server, rng)?
        .to_bytes())
}

pub fn open_credential(sealed: &[u8], key: &PrivateKey) -> Result<String, CryptoError> {
    let env = SealedEnvelope::from_bytes(sealed)?;
    let raw = HybridSealer.open(Purpose::Credential, &env, key)?;
    String::from_utf8(raw).map_err(|_| CryptoError::MalformedLetter("credential is not UTF-8".into()))
}
