//! Dataset preparation: image/saliency pairs, normalization, patch
//! datasets, source-level splitting and a synthetic corpus.

mod manifest;
mod patches;
mod split;
mod synth;

pub use manifest::{load_pairs, read_manifest, write_corpus, ManifestEntry};
pub use patches::{build_patch_dataset, FrustumMode, PatchDatasetConfig, PatchSample};
pub use split::{split, split_by_source};
pub use synth::{render_blobs, synth_corpus, synth_corpus_with_blobs, SynthBlob};

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Default intensity mean; maps `[0, 255]` onto `[-1, 1]`.
pub const DEFAULT_MEAN: f64 = 127.5;

/// A color image (samples in `[0, 255]`) and its saliency map.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub id: String,
    pub image: Raster,
    pub saliency: Raster,
}

impl SamplePair {
    /// Gray images are expanded to three channels.
    pub fn new(id: impl Into<String>, image: Raster, saliency: Raster) -> Result<Self> {
        let id = id.into();
        let image = image.to_rgb();
        if (image.width(), image.height()) != (saliency.width(), saliency.height()) {
            return Err(Error::ShapeMismatch(format!(
                "{id}: image {}x{} vs saliency {}x{}",
                image.width(),
                image.height(),
                saliency.width(),
                saliency.height()
            )));
        }
        if saliency.channels() != 1 {
            return Err(Error::ShapeMismatch(format!("{id}: saliency must be single-channel")));
        }
        if saliency.data().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidArgument(format!("{id}: saliency must be finite and non-negative")));
        }
        Ok(Self { id, image, saliency })
    }
}

fn channel_mean(mean: &[f64], c: usize) -> f64 {
    if mean.len() == 1 {
        mean[0]
    } else {
        mean[c]
    }
}

fn check_mean(r: &Raster, mean: &[f64]) {
    assert!(
        mean.len() == 1 || mean.len() == r.channels(),
        "need one mean or one per channel"
    );
}

/// `(v - mean) / 127.5`; `mean` holds a single value or one per channel.
pub fn normalize(r: &Raster, mean: &[f64]) -> Raster {
    check_mean(r, mean);
    Raster::from_fn(r.width(), r.height(), r.channels(), |c, x, y| {
        (r.get(c, x, y) - channel_mean(mean, c)) / 127.5
    })
}

pub fn denormalize(r: &Raster, mean: &[f64]) -> Raster {
    check_mean(r, mean);
    Raster::from_fn(r.width(), r.height(), r.channels(), |c, x, y| {
        r.get(c, x, y) * 127.5 + channel_mean(mean, c)
    })
}

/// Per-channel intensity means over the images of `pairs`.
pub fn channel_means(pairs: &[SamplePair]) -> Result<[f64; 3]> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut sum = [0.0; 3];
    let mut count = 0usize;
    for p in pairs {
        for (c, s) in sum.iter_mut().enumerate() {
            *s += p.image.plane(c).iter().sum::<f64>();
        }
        count += p.image.width() * p.image.height();
    }
    Ok(sum.map(|s| s / count as f64))
}

/// Scales to a maximum of one; all-zero rasters are returned unchanged.
pub fn max_normalize(r: &Raster) -> Raster {
    let m = r.data().iter().cloned().fold(0.0, f64::max);
    if m > 0.0 {
        r.map(|v| v / m)
    } else {
        r.clone()
    }
}
