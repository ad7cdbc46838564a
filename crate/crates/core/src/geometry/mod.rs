//! Sensor-to-image homography and touch-point extraction.

mod homography;
mod peaks;

pub use homography::{estimate_homography, project_pressure, Correspondence, Homography};
pub use peaks::{find_peaks, TouchPoint};
