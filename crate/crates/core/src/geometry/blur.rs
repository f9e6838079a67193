use super::MaskedMap;
use crate::error::{Error, Result};
use crate::raster::Raster;

/// Normalized taps of a Gaussian with `sigma = kernel_px / 6`, truncated to
/// `kernel_px / 2` on each side (`kernel_px + 1` taps for even sizes).
pub fn gaussian_taps(kernel_px: usize) -> Vec<f64> {
    let radius = (kernel_px / 2) as i64;
    let sigma = kernel_px as f64 / 6.0;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Half-sample symmetric reflection into `[0, n)`.
#[inline]
fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m >= n { 2 * n - 1 - m } else { m }) as usize
}

/// Separable blur: wraps horizontally, reflects vertically. With both
/// boundary rules the operator is symmetric, so it conserves total mass.
fn blur(src: &[f64], width: usize, height: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as i64;
    let mut tmp = vec![0.0; src.len()];
    for y in 0..height {
        let row = &src[y * width..(y + 1) * width];
        for x in 0..width {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let xi = (x as i64 + k as i64 - r).rem_euclid(width as i64) as usize;
                acc += t * row[xi];
            }
            tmp[y * width + x] = acc;
        }
    }
    let mut out = vec![0.0; src.len()];
    for y in 0..height {
        for (k, t) in taps.iter().enumerate() {
            let yi = reflect(y as i64 + k as i64 - r, height);
            let src_row = &tmp[yi * width..(yi + 1) * width];
            let dst = &mut out[y * width..(y + 1) * width];
            for (d, s) in dst.iter_mut().zip(src_row) {
                *d += t * s;
            }
        }
    }
    out
}

/// Fills holes and smooths by normalized convolution,
/// `blur(value * mask) / blur(mask)`.
///
/// Pixels farther than the kernel radius from every valid sample are filled
/// by repeating the pass on the partially filled map until none remain.
pub fn gaussian_fill_and_smooth(m: &MaskedMap, kernel_px: usize) -> Result<Raster> {
    let (w, h) = (m.values.width(), m.values.height());
    if m.values.channels() != 1 || m.valid.len() != w * h {
        return Err(Error::ShapeMismatch("masked map must be single-channel".into()));
    }
    if kernel_px < 2 {
        return Err(Error::InvalidArgument(format!(
            "blur kernel must be at least 2 pixels, got {kernel_px}"
        )));
    }
    if !m.valid.iter().any(|&v| v) {
        return Err(Error::AllHoles);
    }
    let taps = gaussian_taps(kernel_px);

    let mut values: Vec<f64> = m
        .values
        .data()
        .iter()
        .zip(&m.valid)
        .map(|(&v, &ok)| if ok { v } else { 0.0 })
        .collect();
    let mut mask: Vec<f64> = m.valid.iter().map(|&ok| if ok { 1.0 } else { 0.0 }).collect();

    let weighted: Vec<f64> = values.iter().zip(&mask).map(|(v, k)| v * k).collect();
    let num = blur(&weighted, w, h, &taps);
    let den = blur(&mask, w, h, &taps);
    let mut out = vec![0.0; w * h];
    let mut filled = vec![false; w * h];
    for k in 0..w * h {
        if den[k] > 0.0 {
            out[k] = num[k] / den[k];
            filled[k] = true;
        }
    }

    while filled.iter().any(|f| !f) {
        values.copy_from_slice(&out);
        for (k, f) in filled.iter().enumerate() {
            mask[k] = if *f { 1.0 } else { 0.0 };
        }
        let weighted: Vec<f64> = values.iter().zip(&mask).map(|(v, k)| v * k).collect();
        let num = blur(&weighted, w, h, &taps);
        let den = blur(&mask, w, h, &taps);
        let mut progressed = false;
        for k in 0..w * h {
            if !filled[k] && den[k] > 0.0 {
                out[k] = num[k] / den[k];
                filled[k] = true;
                progressed = true;
            }
        }
        debug_assert!(progressed);
        if !progressed {
            break;
        }
    }
    Raster::from_vec(w, h, 1, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn taps_shape() {
        let t = gaussian_taps(64);
        assert_eq!(t.len(), 65);
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(t[32] > t[31] && (t[0] - t[64]).abs() < 1e-18);
    }

    #[test]
    fn constant_map_unchanged() {
        let m = MaskedMap::from_raster(Raster::filled(48, 24, 1, 0.3));
        let out = gaussian_fill_and_smooth(&m, 64).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn single_sample_fills_everything() {
        let mut values = Raster::new(300, 150, 1);
        values.set(0, 10, 140, 0.7);
        let mut valid = vec![false; 300 * 150];
        valid[140 * 300 + 10] = true;
        let out = gaussian_fill_and_smooth(&MaskedMap { values, valid }, 16).unwrap();
        assert!(out.data().iter().all(|&v| (v - 0.7).abs() < 1e-12));
    }

    #[test]
    fn impulse_mass_is_conserved() {
        let mut r = Raster::new(128, 64, 1);
        r.set(0, 3, 1, 1.0);
        let out = gaussian_fill_and_smooth(&MaskedMap::from_raster(r), 64).unwrap();
        let total: f64 = out.data().iter().sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
        assert!(out.data().iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn all_holes_rejected() {
        let m = MaskedMap {
            values: Raster::new(4, 4, 1),
            valid: vec![false; 16],
        };
        assert!(matches!(gaussian_fill_and_smooth(&m, 8), Err(Error::AllHoles)));
    }

    #[test]
    fn holes_take_neighbouring_values_without_dimming() {
        // left half 1, right half holes: holes inherit 1 instead of being
        // darkened toward zero as a plain blur would
        let values = Raster::from_fn(32, 16, 1, |_, x, _| if x < 16 { 1.0 } else { 0.0 });
        let valid = (0..32 * 16).map(|k| k % 32 < 16).collect();
        let out = gaussian_fill_and_smooth(&MaskedMap { values, valid }, 8).unwrap();
        assert!(out.data().iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    proptest! {
        #[test]
        fn hole_free_blur_is_mass_neutral(
            seed in proptest::collection::vec(0.0f64..10.0, 24 * 12),
            kernel in 2usize..40,
        ) {
            let r = Raster::from_vec(24, 12, 1, seed).unwrap();
            let out = gaussian_fill_and_smooth(&MaskedMap::from_raster(r.clone()), kernel).unwrap();
            let a: f64 = r.data().iter().sum();
            let b: f64 = out.data().iter().sum();
            prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1e-12));
        }
    }
}
