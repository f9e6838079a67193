use super::{sphere_to_equirect, SphericalCoord, ViewFrustum};
use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    Nearest,
    #[default]
    Bilinear,
}

/// A resampled view of the sphere together with the direction of each of
/// its pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub image: Raster,
    /// Row-major, `out_h * out_w` entries.
    pub coords: Vec<SphericalCoord>,
    pub frustum: ViewFrustum,
}

impl Patch {
    pub fn new(image: Raster, coords: Vec<SphericalCoord>, frustum: ViewFrustum) -> Result<Self> {
        if image.width() != frustum.out_w
            || image.height() != frustum.out_h
            || coords.len() != image.width() * image.height()
        {
            return Err(Error::ShapeMismatch(format!(
                "patch image {}x{} with {} coords for a {}x{} frustum",
                image.width(),
                image.height(),
                coords.len(),
                frustum.out_w,
                frustum.out_h
            )));
        }
        Ok(Self {
            image,
            coords,
            frustum,
        })
    }

    /// Same geometry, different pixel values.
    pub fn with_image(&self, image: Raster) -> Result<Self> {
        Self::new(image, self.coords.clone(), self.frustum)
    }

    pub fn theta_raster(&self) -> Raster {
        Raster::from_vec(
            self.frustum.out_w,
            self.frustum.out_h,
            1,
            self.coords.iter().map(|c| c.theta).collect(),
        )
        .expect("coords match frustum")
    }

    pub fn phi_raster(&self) -> Raster {
        Raster::from_vec(
            self.frustum.out_w,
            self.frustum.out_h,
            1,
            self.coords.iter().map(|c| c.phi).collect(),
        )
        .expect("coords match frustum")
    }
}

/// Direction of every pixel center of the frustum, row-major.
pub fn patch_pixel_directions(f: &ViewFrustum) -> Vec<SphericalCoord> {
    let mut out = Vec::with_capacity(f.out_w * f.out_h);
    for v in 0..f.out_h {
        for u in 0..f.out_w {
            out.push(f.pixel_direction(u, v));
        }
    }
    out
}

/// Renders the frustum's view of an equirectangular image.
pub fn extract_patch(odi: &Raster, f: &ViewFrustum, interp: Interpolation) -> Result<Patch> {
    f.validate()?;
    let coords = patch_pixel_directions(f);
    let mut image = Raster::new(f.out_w, f.out_h, odi.channels());
    let (w, h) = (odi.width(), odi.height());
    for (i, c) in coords.iter().enumerate() {
        let (x, y) = sphere_to_equirect(*c, w, h);
        let (u, v) = (i % f.out_w, i / f.out_w);
        for ch in 0..odi.channels() {
            let s = match interp {
                Interpolation::Nearest => odi.sample_nearest(ch, x, y),
                Interpolation::Bilinear => odi.sample_bilinear(ch, x, y),
            };
            image.set(ch, u, v, s);
        }
    }
    Patch::new(image, coords, *f)
}
