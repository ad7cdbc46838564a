//! Pure algorithmic core for fingertip pressure estimation from weak labels.
//!
//! Everything in this crate is `no_std` with `alloc`: pressure binning, the
//! three training losses with hand-derived gradients, a desk-scale model and
//! its Adam trainer, evaluation metrics, sensor-to-image geometry, the
//! synthetic session generator and the debounced touch engine. File formats,
//! the CLI and the streaming service live in the `pressense` crate.
#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod pressure;
pub mod synth;
pub mod touch;

pub use error::{Error, Result};
pub use losses::{ContactLabel, Force, LossBreakdown, LossWeights};
pub use pressure::{BinIndexImage, BinMap, BinSpec, ContactImage, PressureImage};

/// Contact threshold used throughout evaluation and the touch engine, kPa.
pub const CONTACT_THRESHOLD_KPA: f64 = 1.0;
