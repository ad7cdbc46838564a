//! Streaming touch-event service.
//!
//! Each WebSocket connection on `/session` is one session: the client sends
//! a `config` message, then `frame` messages; every frame gets exactly one
//! `events` reply, in order.

mod protocol;
mod server;
mod session;

pub use protocol::*;
pub use server::{router, serve};
pub use session::{render_touches, Reply, SessionHandler};
