//! Sensor-to-surface calibration files.

use std::path::Path;

use pressense_core::geometry::{estimate_homography, project_pressure, Correspondence, Homography};
use pressense_core::PressureImage;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::jsonl::{self, Versioned};

pub const CALIBRATION_VERSION: u32 = 1;

/// Homography from sensor pixels to surface (layout) pixels and the
/// correspondences it was fitted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub sensor_width: usize,
    pub sensor_height: usize,
    pub surface_width: usize,
    pub surface_height: usize,
    pub homography: Homography,
    #[serde(default)]
    pub correspondences: Vec<Correspondence>,
}

const FIELDS: &[&str] =
    &["sensor_width", "sensor_height", "surface_width", "surface_height", "homography", "correspondences"];

impl Calibration {
    pub fn fit(sensor: (usize, usize), surface: (usize, usize), correspondences: Vec<Correspondence>) -> Result<Self> {
        let homography = estimate_homography(&correspondences)?;
        Ok(Self {
            sensor_width: sensor.0,
            sensor_height: sensor.1,
            surface_width: surface.0,
            surface_height: surface.1,
            homography,
            correspondences,
        })
    }

    /// Maps a sensor frame onto the surface grid.
    pub fn project(&self, sensor: &PressureImage) -> Result<PressureImage> {
        if (sensor.width(), sensor.height()) != (self.sensor_width, self.sensor_height) {
            return Err(crate::Error::Data(format!(
                "frame is {}x{} but the calibration expects {}x{}",
                sensor.width(),
                sensor.height(),
                self.sensor_width,
                self.sensor_height
            )));
        }
        Ok(project_pressure(sensor, &self.homography, self.surface_width, self.surface_height)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        jsonl::write_document(path, &Versioned { version: CALIBRATION_VERSION, inner: self })
    }

    pub fn load(path: &Path) -> Result<Self> {
        jsonl::read_document(path, CALIBRATION_VERSION, FIELDS)
    }
}
