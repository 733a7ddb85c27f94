//! Sealed-envelope messaging between agencies.
//!
//! Clients seal letters to their agency server under a hybrid scheme
//! (X25519 key wrap, AES-256-GCM body). Envelopes travel through an entry
//! node that picks relay paths round-robin; servers open them for audit,
//! reseal toward the recipient or a peer agency's server, and push
//! deliveries back out through fresh relay paths.
//!
//! Every daemon is an I/O-free state machine implementing [`node::Node`], so
//! the same code runs under the TCP hosts and under [`simnet`].

pub mod addr;
pub mod client;
pub mod codec;
pub mod config;
pub mod crypto;
pub mod node;
pub mod routing;
pub mod server;
pub mod simnet;
pub mod wire;
