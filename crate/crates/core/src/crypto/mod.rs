//! Hybrid encryption: a fresh 256-bit AES-GCM key per message, wrapped to the
//! recipient's X25519 public key.

mod envelope;
mod keys;
pub mod keystore;
mod letter;

pub use envelope::{
    envelope_ref, open, open_credential, seal, seal_credential, seal_with_rng, HybridSealer,
    Purpose, SealedEnvelope, Sealer, SecureRng, ENVELOPE_NONCE_LEN, WRAPPED_KEY_LEN,
};
pub use keys::{fingerprint, generate_keypair, KeyPair, PrivateKey, PublicKey, KEY_LEN};
pub use letter::{PlaintextLetter, MAX_BODY_LEN};

use thiserror::Error;

use crate::codec::CodecError;

#[derive(Debug, Error)]
pub enum CryptoError {
    #[error("letter body is {len} bytes; the limit is {MAX_BODY_LEN}")]
    OversizeBody { len: usize },
    #[error("symmetric key unwrap failed: envelope not sealed to this key")]
    WrongKey,
    #[error("authentication tag mismatch")]
    TamperDetected,
    #[error("decrypted bytes are not a valid letter: {0}")]
    MalformedLetter(String),
    #[error("malformed envelope: {0}")]
    MalformedEnvelope(CodecError),
    #[error("invalid public key")]
    InvalidKey,
    #[error("keystore: {0}")]
    Keystore(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
