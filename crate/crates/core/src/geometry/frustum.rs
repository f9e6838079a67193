use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SphericalCoord;
use crate::error::{Error, Result};

/// A pinhole camera looking out from the sphere center.
///
/// `yaw` rotates about the vertical axis (yaw 0 looks at `theta = pi/2`),
/// `pitch` raises the optical axis toward the zenith. `fov` is the
/// horizontal field of view; the vertical one uses the same focal length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewFrustum {
    pub yaw: f64,
    pub pitch: f64,
    pub fov: f64,
    pub out_w: usize,
    pub out_h: usize,
}

impl ViewFrustum {
    pub fn new(yaw: f64, pitch: f64, fov: f64, out_w: usize, out_h: usize) -> Result<Self> {
        let f = Self {
            yaw,
            pitch,
            fov,
            out_w,
            out_h,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov > 0.0 && self.fov < PI) {
            return Err(Error::InvalidFrustum(format!(
                "fov {} must lie in (0, pi)",
                self.fov
            )));
        }
        if self.out_w < 2 || self.out_h < 2 {
            return Err(Error::InvalidFrustum(format!(
                "patch resolution {}x{} must be at least 2x2",
                self.out_w, self.out_h
            )));
        }
        if !self.yaw.is_finite() || !self.pitch.is_finite() {
            return Err(Error::InvalidFrustum("non-finite orientation".into()));
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        (self.out_w as f64 / 2.0) / (self.fov / 2.0).tan()
    }

    /// Rotates a camera-frame vector (x right, y up, z forward) into the
    /// world frame: pitch about the camera x axis, then yaw about world y.
    pub fn camera_to_world(&self, d: [f64; 3]) -> [f64; 3] {
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        let y1 = d[1] * cp + d[2] * sp;
        let z1 = -d[1] * sp + d[2] * cp;
        let x2 = d[0] * cy + z1 * sy;
        let z2 = -d[0] * sy + z1 * cy;
        [x2, y1, z2]
    }

    pub fn world_to_camera(&self, w: [f64; 3]) -> [f64; 3] {
        let (sp, cp) = self.pitch.sin_cos();
        let (sy, cy) = self.yaw.sin_cos();
        let x1 = w[0] * cy - w[2] * sy;
        let z1 = w[0] * sy + w[2] * cy;
        let y = w[1] * cp - z1 * sp;
        let z = w[1] * sp + z1 * cp;
        [x1, y, z]
    }

    /// Direction through the continuous image-plane point `(px, py)`;
    /// pixel `(u, v)` has its center at `(u + 0.5, v + 0.5)`.
    pub fn ray_through(&self, px: f64, py: f64) -> SphericalCoord {
        let f = self.focal();
        let a = (px - self.out_w as f64 / 2.0) / f;
        let b = -(py - self.out_h as f64 / 2.0) / f;
        let n = (a * a + b * b + 1.0).sqrt();
        SphericalCoord::from_vector(self.camera_to_world([a / n, b / n, 1.0 / n]))
    }

    /// Direction through the center of pixel `(u, v)`.
    pub fn pixel_direction(&self, u: usize, v: usize) -> SphericalCoord {
        self.ray_through(u as f64 + 0.5, v as f64 + 0.5)
    }

    /// Projects a direction onto the image plane. Returns `None` for
    /// directions behind the camera.
    pub fn project(&self, c: SphericalCoord) -> Option<(f64, f64)> {
        let cam = self.world_to_camera(c.to_unit_vector());
        if cam[2] <= 0.0 {
            return None;
        }
        let f = self.focal();
        let px = cam[0] / cam[2] * f + self.out_w as f64 / 2.0;
        let py = -cam[1] / cam[2] * f + self.out_h as f64 / 2.0;
        Some((px, py))
    }

    /// Whether the direction falls on the image plane, borders included.
    pub fn contains(&self, c: SphericalCoord) -> bool {
        const TOL: f64 = 1e-9;
        match self.project(c) {
            Some((px, py)) => {
                px >= -TOL
                    && px <= self.out_w as f64 + TOL
                    && py >= -TOL
                    && py <= self.out_h as f64 + TOL
            }
            None => false,
        }
    }

    /// Direction of the optical axis.
    pub fn center(&self) -> SphericalCoord {
        SphericalCoord::from_vector(self.camera_to_world([0.0, 0.0, 1.0]))
    }
}

/// Four horizon views 90 degrees apart plus zenith and nadir.
pub fn six_fixed_frustums(fov: f64, out_w: usize, out_h: usize) -> Result<Vec<ViewFrustum>> {
    if fov < FRAC_PI_2 {
        return Err(Error::FovTooSmall { fov });
    }
    [
        (0.0, 0.0),
        (FRAC_PI_2, 0.0),
        (PI, 0.0),
        (3.0 * FRAC_PI_2, 0.0),
        (0.0, FRAC_PI_2),
        (0.0, -FRAC_PI_2),
    ]
    .into_iter()
    .map(|(yaw, pitch)| ViewFrustum::new(yaw, pitch, fov, out_w, out_h))
    .collect()
}

/// How random view centers are distributed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PitchSampling {
    /// Uniform over the sphere surface: `pitch = asin(u)`, `u ~ U[-1, 1]`.
    #[default]
    SphereUniform,
    /// Uniform in the pitch angle itself, denser toward the poles.
    AngleUniform,
}

/// `n` frustums with random orientation, deterministic for a given seed.
pub fn random_frustums(
    n: usize,
    fov: f64,
    out_w: usize,
    out_h: usize,
    seed: u64,
    sampling: PitchSampling,
) -> Result<Vec<ViewFrustum>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one frustum".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let yaw = rng.gen::<f64>() * TAU;
            let pitch = match sampling {
                PitchSampling::SphereUniform => rng.gen_range(-1.0f64..=1.0).asin(),
                PitchSampling::AngleUniform => rng.gen_range(-FRAC_PI_2..=FRAC_PI_2),
            };
            ViewFrustum::new(yaw, pitch, fov, out_w, out_h)
        })
        .collect()
}
