//! Whole-image inference: six views through the network, forward splat
//! back onto the equirectangular grid, Gaussian hole filling.

use std::thread;

use crate::data::{max_normalize, normalize};
use crate::error::{Error, Result};
use crate::geometry::{
    check_aspect, extract_patch, gaussian_fill_and_smooth, six_fixed_frustums, Interpolation, Patch, SplatCanvas,
};
use crate::model::{CoordChannels, SalNet};
use crate::nn::Tensor;
use crate::raster::Raster;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Field of view of each view, radians.
    pub fov: f64,
    pub patch_w: usize,
    pub patch_h: usize,
    /// Gaussian kernel size for hole filling, pixels.
    pub blur_kernel: usize,
    pub interpolation: Interpolation,
    /// Resolution the whole image is scaled to when it goes through the
    /// base network in one piece.
    pub whole_w: usize,
    pub whole_h: usize,
    /// Worker threads for per-view inference.
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fov: std::f64::consts::FRAC_PI_2,
            patch_w: 256,
            patch_h: 256,
            blur_kernel: 64,
            interpolation: Interpolation::Bilinear,
            whole_w: 800,
            whole_h: 400,
            threads: 1,
        }
    }
}

/// Which part of the network scores each view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewModel {
    /// Base network only.
    Base,
    /// Base network plus the coordinate-aware refinement.
    Full,
}

/// The six fixed views of `odi` (samples in `[0, 255]`).
pub fn extract_views(odi: &Raster, cfg: &PipelineConfig) -> Result<Vec<Patch>> {
    check_aspect(odi);
    six_fixed_frustums(cfg.fov, cfg.patch_w, cfg.patch_h)?
        .iter()
        .map(|f| extract_patch(odi, f, cfg.interpolation))
        .collect()
}

/// Splats single-channel view maps onto a `width x height` grid, fills the
/// holes and scales the result to a maximum of one.
pub fn recombine(views: &[Patch], width: usize, height: usize, blur_kernel: usize) -> Result<Raster> {
    let mut canvas = SplatCanvas::new(width, height);
    for v in views {
        canvas.splat(v);
    }
    let filled = gaussian_fill_and_smooth(&canvas.finish(), blur_kernel)?;
    Ok(max_normalize(&filled.map(|v| v.max(0.0))))
}

fn score_view(net: &SalNet, view: &Patch, model: ViewModel) -> Result<Patch> {
    let x = Tensor::from_raster(&normalize(&view.image.to_rgb(), &net.norm_mean));
    let y = match model {
        ViewModel::Base => net.forward_base(&x)?,
        ViewModel::Full => net.forward_full(&x, &CoordChannels::from_patch(view).to_tensor())?,
    };
    view.with_image(y.to_raster(0))
}

/// Scores every view, in order, on up to `threads` workers.
fn score_views(net: &SalNet, views: &[Patch], model: ViewModel, threads: usize) -> Result<Vec<Patch>> {
    let threads = threads.clamp(1, views.len().max(1));
    if threads == 1 {
        return views.iter().map(|v| score_view(net, v, model)).collect();
    }
    let chunk = views.len().div_ceil(threads);
    thread::scope(|s| {
        let handles: Vec<_> = views
            .chunks(chunk)
            .map(|part| s.spawn(move || part.iter().map(|v| score_view(net, v, model)).collect::<Result<Vec<_>>>()))
            .collect();
        let mut out = Vec::with_capacity(views.len());
        for h in handles {
            out.extend(h.join().map_err(|_| Error::InvalidArgument("inference worker panicked".into()))??);
        }
        Ok(out)
    })
}

/// Saliency of a whole image from its six views.
pub fn predict_views(net: &SalNet, odi: &Raster, cfg: &PipelineConfig, model: ViewModel) -> Result<Raster> {
    let views = extract_views(&odi.to_rgb(), cfg)?;
    let scored = score_views(net, &views, model, cfg.threads)?;
    recombine(&scored, odi.width(), odi.height(), cfg.blur_kernel)
}

/// The full pipeline: views, base plus refinement, recombination.
pub fn predict_odi(net: &SalNet, odi: &Raster, cfg: &PipelineConfig) -> Result<Raster> {
    predict_views(net, odi, cfg, ViewModel::Full)
}

/// The whole image scaled to `whole_w x whole_h`, through the base network,
/// scaled back; no views and no blur.
pub fn predict_whole(net: &SalNet, odi: &Raster, cfg: &PipelineConfig) -> Result<Raster> {
    let small = odi.to_rgb().resize_bilinear(cfg.whole_w, cfg.whole_h);
    let x = Tensor::from_raster(&normalize(&small, &net.norm_mean));
    let y = net.forward_base(&x)?.to_raster(0);
    Ok(max_normalize(&y.resize_bilinear(odi.width(), odi.height()).map(|v| v.max(0.0))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_network;

    fn small_cfg() -> PipelineConfig {
        PipelineConfig {
            patch_w: 32,
            patch_h: 32,
            blur_kernel: 8,
            whole_w: 64,
            whole_h: 32,
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn constant_views_recombine_to_constant() {
        let cfg = small_cfg();
        let odi = Raster::filled(64, 32, 3, 90.0);
        let views: Vec<Patch> = extract_views(&odi, &cfg)
            .unwrap()
            .into_iter()
            .map(|v| v.with_image(Raster::filled(32, 32, 1, 0.4)).unwrap())
            .collect();
        let m = recombine(&views, 64, 32, cfg.blur_kernel).unwrap();
        assert!(m.data().iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn predictions_are_finite_normalized_and_thread_independent() {
        let net = build_network(2);
        let odi = crate::data::synth_corpus(1, 64, 32, 1).remove(0).image;
        let cfg = small_cfg();
        let a = predict_odi(&net, &odi, &cfg).unwrap();
        let b = predict_odi(&net, &odi, &PipelineConfig { threads: 3, ..cfg.clone() }).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.width(), a.height()), (64, 32));
        assert!(a.data().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        let w = predict_whole(&net, &odi, &cfg).unwrap();
        assert!(w.data().iter().all(|v| v.is_finite() && *v >= 0.0));
        let base = predict_views(&net, &odi, &cfg, ViewModel::Base).unwrap();
        assert!(base.is_finite());
    }
}
