//! Sphere and plane mathematics for equirectangular images.
//!
//! Longitude `theta` spans `[-pi/2, 3pi/2)` and maps linearly onto
//! `x in [0, width)`; latitude `phi` spans `[-pi/2, pi/2]` (zenith at
//! `pi/2`) and maps onto `y in [0, height]`, top row first. A continuous
//! coordinate `(x, y)` belongs to pixel `(floor(x), floor(y))`, so pixel
//! centers sit at half-integer coordinates.
//!
//! World frame used by the frustum code: `+y` is up, `+z` points at
//! `theta = pi/2, phi = 0` (the center of the equirectangular image) and `+x`
//! points at `theta = pi`.

mod blur;
mod frustum;
mod patch;
mod splat;

use std::f64::consts::{FRAC_PI_2, PI, TAU};

pub use blur::{gaussian_fill_and_smooth, gaussian_taps};
pub use frustum::{random_frustums, six_fixed_frustums, PitchSampling, ViewFrustum};
pub use patch::{extract_patch, patch_pixel_directions, Interpolation, Patch};
pub use splat::{splat_patch, MaskedMap, SplatCanvas};

use crate::error::{Error, Result};
use crate::raster::Raster;

/// A direction on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCoord {
    /// Longitude in radians, `[-pi/2, 3pi/2)`.
    pub theta: f64,
    /// Latitude in radians, `[-pi/2, pi/2]`.
    pub phi: f64,
}

impl SphericalCoord {
    /// Builds a coordinate, wrapping `theta` into its canonical range and
    /// clamping `phi` to the poles.
    pub fn new(theta: f64, phi: f64) -> Self {
        Self {
            theta: wrap_theta(theta),
            phi: phi.clamp(-FRAC_PI_2, FRAC_PI_2),
        }
    }

    pub fn is_valid(&self) -> bool {
        self.theta >= -FRAC_PI_2
            && self.theta < 3.0 * FRAC_PI_2
            && self.phi >= -FRAC_PI_2
            && self.phi <= FRAC_PI_2
    }

    /// Unit vector in the world frame.
    pub fn to_unit_vector(&self) -> [f64; 3] {
        let lambda = self.theta - FRAC_PI_2;
        let (sp, cp) = self.phi.sin_cos();
        let (sl, cl) = lambda.sin_cos();
        [cp * sl, sp, cp * cl]
    }

    /// Inverse of [`SphericalCoord::to_unit_vector`]; `v` need not be
    /// normalized but must be non-zero.
    pub fn from_vector(v: [f64; 3]) -> Self {
        let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let phi = (v[1] / norm).clamp(-1.0, 1.0).asin();
        let theta = v[0].atan2(v[2]) + FRAC_PI_2;
        Self::new(theta, phi)
    }

    /// Great-circle distance in radians.
    pub fn angle_to(&self, other: &SphericalCoord) -> f64 {
        let a = self.to_unit_vector();
        let b = other.to_unit_vector();
        let cross = [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
        let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        sin.atan2(cos)
    }
}

/// Wraps a longitude into `[-pi/2, 3pi/2)`.
pub fn wrap_theta(theta: f64) -> f64 {
    let mut t = (theta + FRAC_PI_2).rem_euclid(TAU);
    if t >= TAU {
        t -= TAU;
    }
    t - FRAC_PI_2
}

/// Maps a spherical coordinate to continuous equirectangular pixel
/// coordinates.
pub fn sphere_to_equirect(c: SphericalCoord, width: usize, height: usize) -> (f64, f64) {
    let x = width as f64 * ((c.theta + FRAC_PI_2) / TAU);
    let y = height as f64 * (1.0 - (c.phi + FRAC_PI_2) / PI);
    (x, y)
}

/// Inverse of [`sphere_to_equirect`].
pub fn equirect_to_sphere(x: f64, y: f64, width: usize, height: usize) -> Result<SphericalCoord> {
    let (w, h) = (width as f64, height as f64);
    if !(x >= 0.0 && x < w && y >= 0.0 && y <= h) {
        return Err(Error::OutOfRange {
            x,
            y,
            width,
            height,
        });
    }
    Ok(SphericalCoord {
        theta: TAU * x / w - FRAC_PI_2,
        phi: FRAC_PI_2 - PI * y / h,
    })
}

/// Spherical coordinate of the center of pixel `(i, j)`.
pub fn pixel_center_to_sphere(i: usize, j: usize, width: usize, height: usize) -> SphericalCoord {
    SphericalCoord {
        theta: TAU * (i as f64 + 0.5) / width as f64 - FRAC_PI_2,
        phi: FRAC_PI_2 - PI * (j as f64 + 0.5) / height as f64,
    }
}

/// Latitude of the centers of row `j` in an image of the given height.
pub fn row_latitude(j: usize, height: usize) -> f64 {
    FRAC_PI_2 - PI * (j as f64 + 0.5) / height as f64
}

/// Logs a warning when an image is not in the usual 2:1 equirectangular
/// aspect. Any aspect is accepted.
pub fn check_aspect(odi: &Raster) {
    if odi.width() != 2 * odi.height() {
        log::warn!(
            "equirectangular image is {}x{}, expected a 2:1 aspect",
            odi.width(),
            odi.height()
        );
    }
}
