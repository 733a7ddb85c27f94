//! Network daemons and the command-line client for relaymesh. The protocol
//! logic lives in `relaymesh-core`; this crate moves its frames over TCP and
//! WebSockets.

pub mod cli;
pub mod daemons;
pub mod gateway;
pub mod host;
pub mod pins;
pub mod sim;
