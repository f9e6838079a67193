use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::geometry::{Patch, SphericalCoord};
use crate::nn::Tensor;
use crate::raster::Raster;

/// Per-pixel spherical coordinates of a patch, affinely rescaled so that
/// `theta` in `[-pi/2, 3pi/2)` maps to `[-1, 1)` and `phi` in
/// `[-pi/2, pi/2]` maps to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordChannels {
    pub theta_map: Raster,
    pub phi_map: Raster,
}

pub fn scale_theta(theta: f64) -> f64 {
    (theta + FRAC_PI_2) / PI - 1.0
}

pub fn scale_phi(phi: f64) -> f64 {
    phi / FRAC_PI_2
}

impl CoordChannels {
    pub fn new(theta_map: Raster, phi_map: Raster) -> Result<Self> {
        if !theta_map.same_dims(&phi_map) || theta_map.channels() != 1 {
            return Err(Error::ShapeMismatch("coordinate maps must be equal single-channel rasters".into()));
        }
        Ok(Self { theta_map, phi_map })
    }

    pub fn from_coords(width: usize, height: usize, coords: &[SphericalCoord]) -> Result<Self> {
        if coords.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} coordinates for a {width}x{height} raster",
                coords.len()
            )));
        }
        let theta = coords.iter().map(|c| scale_theta(c.theta)).collect();
        let phi = coords.iter().map(|c| scale_phi(c.phi)).collect();
        Self::new(
            Raster::from_vec(width, height, 1, theta)?,
            Raster::from_vec(width, height, 1, phi)?,
        )
    }

    pub fn from_patch(p: &Patch) -> Self {
        Self::from_coords(p.image.width(), p.image.height(), &p.coords).expect("patch coordinates match its image")
    }

    pub fn width(&self) -> usize {
        self.theta_map.width()
    }

    pub fn height(&self) -> usize {
        self.theta_map.height()
    }

    /// `(1, 2, h, w)` tensor, theta first.
    pub fn to_tensor(&self) -> Tensor {
        let mut data = self.theta_map.data().to_vec();
        data.extend_from_slice(self.phi_map.data());
        Tensor::from_vec(&[1, 2, self.height(), self.width()], data).expect("coordinate dims")
    }

    pub fn from_tensor(t: &Tensor, b: usize) -> Result<Self> {
        let [_, c, h, w] = t.require_rank4("coordinates")?;
        if c != 2 {
            return Err(Error::ShapeMismatch(format!("coordinates need 2 channels, got {c}")));
        }
        let item = t.item(b);
        Self::new(
            Raster::from_vec(w, h, 1, item[..h * w].to_vec())?,
            Raster::from_vec(w, h, 1, item[h * w..].to_vec())?,
        )
    }
}
