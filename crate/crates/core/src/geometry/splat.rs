use super::{sphere_to_equirect, Patch};
use crate::error::{Error, Result};
use crate::raster::{clamp_index, wrap_index, Raster};

/// Accumulates per-patch values back onto the equirectangular grid by
/// nearest-neighbour forward projection.
#[derive(Debug, Clone)]
pub struct SplatCanvas {
    width: usize,
    height: usize,
    sum: Vec<f64>,
    count: Vec<u32>,
}

/// A single-channel map where some pixels carry no value.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMap {
    pub values: Raster,
    pub valid: Vec<bool>,
}

impl MaskedMap {
    pub fn from_raster(values: Raster) -> Self {
        let valid = vec![true; values.width() * values.height()];
        Self { values, valid }
    }

    pub fn hole_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }
}

impl SplatCanvas {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            sum: vec![0.0; width * height],
            count: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn counts(&self) -> &[u32] {
        &self.count
    }

    /// Adds channel 0 of the patch image to the canvas.
    pub fn splat(&mut self, patch: &Patch) {
        let values = patch.image.plane(0);
        for (c, &v) in patch.coords.iter().zip(values) {
            let (x, y) = sphere_to_equirect(*c, self.width, self.height);
            let xi = wrap_index(x.floor() as i64, self.width);
            let yi = clamp_index(y.floor() as i64, self.height);
            let k = yi * self.width + xi;
            self.sum[k] += v;
            self.count[k] += 1;
        }
    }

    /// Per-pixel average of everything splatted so far; pixels that received
    /// nothing are holes.
    pub fn finish(&self) -> MaskedMap {
        let data = self
            .sum
            .iter()
            .zip(&self.count)
            .map(|(&s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
            .collect();
        MaskedMap {
            values: Raster::from_vec(self.width, self.height, 1, data).expect("canvas dims"),
            valid: self.count.iter().map(|&n| n > 0).collect(),
        }
    }
}

/// Free-function form of [`SplatCanvas::splat`] for callers holding the
/// accumulator and count rasters separately.
pub fn splat_patch(canvas: &mut Raster, weights: &mut Raster, patch: &Patch) -> Result<()> {
    if !canvas.same_dims(weights) || canvas.channels() != 1 || weights.channels() != 1 {
        return Err(Error::ShapeMismatch(
            "canvas and weight rasters must be single-channel with equal dims".into(),
        ));
    }
    let (w, h) = (canvas.width(), canvas.height());
    for (c, &v) in patch.coords.iter().zip(patch.image.plane(0)) {
        let (x, y) = sphere_to_equirect(*c, w, h);
        let xi = wrap_index(x.floor() as i64, w);
        let yi = clamp_index(y.floor() as i64, h);
        canvas.data_mut()[yi * w + xi] += v;
        weights.data_mut()[yi * w + xi] += 1.0;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        extract_patch, patch_pixel_directions, row_latitude, six_fixed_frustums, Interpolation,
        ViewFrustum,
    };
    use std::f64::consts::FRAC_PI_2;

    fn valued_patch(f: &ViewFrustum, v: f64) -> Patch {
        Patch::new(
            Raster::filled(f.out_w, f.out_h, 1, v),
            patch_pixel_directions(f),
            *f,
        )
        .unwrap()
    }

    #[test]
    fn single_patch_covers_its_region_only() {
        let f = ViewFrustum::new(0.0, 0.0, FRAC_PI_2, 64, 64).unwrap();
        let mut canvas = SplatCanvas::new(64, 32);
        canvas.splat(&valued_patch(&f, 1.0));
        let m = canvas.finish();
        assert!(m.hole_count() > 0);
        for (k, &ok) in m.valid.iter().enumerate() {
            if ok {
                assert_eq!(m.values.data()[k], 1.0);
            }
        }
        // the back of the sphere is untouched
        assert!(!m.valid[16 * 64]);
    }

    #[test]
    fn overlapping_patches_average() {
        let f = ViewFrustum::new(0.0, 0.0, FRAC_PI_2, 32, 32).unwrap();
        let mut canvas = SplatCanvas::new(64, 32);
        canvas.splat(&valued_patch(&f, 0.0));
        canvas.splat(&valued_patch(&f, 1.0));
        let m = canvas.finish();
        for (k, &ok) in m.valid.iter().enumerate() {
            if ok {
                assert_eq!(m.values.data()[k], 0.5);
            }
        }
    }

    #[test]
    fn free_function_matches_canvas() {
        let f = ViewFrustum::new(0.7, 0.3, 1.4, 16, 12).unwrap();
        let odi = Raster::from_fn(40, 20, 1, |_, x, y| (x * 3 + y) as f64);
        let p = extract_patch(&odi, &f, Interpolation::Bilinear).unwrap();
        let mut canvas = SplatCanvas::new(40, 20);
        canvas.splat(&p);
        let mut sum = Raster::new(40, 20, 1);
        let mut weights = Raster::new(40, 20, 1);
        splat_patch(&mut sum, &mut weights, &p).unwrap();
        let m = canvas.finish();
        for k in 0..800 {
            assert_eq!(weights.data()[k], canvas.counts()[k] as f64);
            if m.valid[k] {
                assert_eq!(m.values.data()[k], sum.data()[k] / weights.data()[k]);
            }
        }
        let mut bad = Raster::new(41, 20, 1);
        assert!(splat_patch(&mut bad, &mut weights, &p).is_err());
    }

    /// Forward splatting of six dense views leaves no holes away from the
    /// poles; the polar rows of the equirect grid are oversampled
    /// horizontally, so a nearest-neighbour splat cannot reach every column
    /// there at any finite patch resolution.
    #[test]
    fn six_views_cover_all_but_polar_rows() {
        let (w, h) = (512, 256);
        let mut canvas = SplatCanvas::new(w, h);
        for f in six_fixed_frustums(FRAC_PI_2, 512, 512).unwrap() {
            canvas.splat(&valued_patch(&f, 1.0));
        }
        let m = canvas.finish();
        for j in 0..h {
            let holes = (0..w).filter(|&i| !m.valid[j * w + i]).count();
            if row_latitude(j, h).abs() < 75f64.to_radians() {
                assert_eq!(holes, 0, "row {j}");
            }
        }
        // the rows touching the poles always have gaps
        assert!((0..w).any(|i| !m.valid[i]));
    }
}
