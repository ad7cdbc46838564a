//! File formats, offline replay and the streaming service around
//! [`pressense_core`].

pub mod calibration;
pub mod checkpoint;
mod error;
pub mod jsonl;
pub mod layouts;
pub mod records;
pub mod replay;
pub mod service;

pub use error::{Error, Result};
pub use pressense_core as core;
