use super::{max_normalize, normalize, SamplePair};
use crate::error::{Error, Result};
use crate::geometry::{extract_patch, random_frustums, six_fixed_frustums, Interpolation, PitchSampling, ViewFrustum};
use crate::model::CoordChannels;
use crate::raster::Raster;

/// Where patches are cut from each image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrustumMode {
    Random(PitchSampling),
    /// The six inference views; `n_per_odi` is ignored.
    #[default]
    SixFixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchDatasetConfig {
    pub n_per_odi: usize,
    pub fov: f64,
    pub out_w: usize,
    pub out_h: usize,
    pub seed: u64,
    pub mode: FrustumMode,
    pub mean: Vec<f64>,
    pub interpolation: Interpolation,
}

impl Default for PatchDatasetConfig {
    fn default() -> Self {
        Self {
            n_per_odi: 100,
            fov: std::f64::consts::FRAC_PI_2,
            out_w: 256,
            out_h: 256,
            seed: 0,
            mode: FrustumMode::Random(PitchSampling::SphereUniform),
            mean: vec![super::DEFAULT_MEAN],
            interpolation: Interpolation::Bilinear,
        }
    }
}

/// One training patch with its coordinates and target.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSample {
    pub source_id: String,
    /// Normalized three-channel patch.
    pub image: Raster,
    pub coords: CoordChannels,
    /// Ground-truth patch scaled to a maximum of one.
    pub saliency: Raster,
    pub frustum: ViewFrustum,
}

/// Per-image seed so that adding images does not reshuffle earlier ones.
fn image_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub fn build_patch_dataset(pairs: &[SamplePair], cfg: &PatchDatasetConfig) -> Result<Vec<PatchSample>> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut out = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        let frustums = match cfg.mode {
            FrustumMode::SixFixed => six_fixed_frustums(cfg.fov, cfg.out_w, cfg.out_h)?,
            FrustumMode::Random(sampling) => random_frustums(
                cfg.n_per_odi,
                cfg.fov,
                cfg.out_w,
                cfg.out_h,
                image_seed(cfg.seed, i),
                sampling,
            )?,
        };
        let normalized = normalize(&pair.image, &cfg.mean);
        for f in frustums {
            let img = extract_patch(&normalized, &f, cfg.interpolation)?;
            let sal = extract_patch(&pair.saliency, &f, cfg.interpolation)?;
            out.push(PatchSample {
                source_id: pair.id.clone(),
                coords: CoordChannels::from_patch(&img),
                image: img.image,
                saliency: max_normalize(&sal.image),
                frustum: f,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_corpus;

    fn small() -> PatchDatasetConfig {
        PatchDatasetConfig {
            n_per_odi: 5,
            out_w: 12,
            out_h: 10,
            seed: 9,
            ..PatchDatasetConfig::default()
        }
    }

    #[test]
    fn counts_and_determinism() {
        let pairs = synth_corpus(3, 64, 32, 1);
        let a = build_patch_dataset(&pairs, &small()).unwrap();
        assert_eq!(a.len(), 15);
        assert_eq!(a, build_patch_dataset(&pairs, &small()).unwrap());
        assert_eq!(a[5].source_id, pairs[1].id);
        for s in &a {
            assert_eq!((s.image.width(), s.image.height(), s.image.channels()), (12, 10, 3));
            assert_eq!(s.coords.width(), 12);
            let m = s.saliency.data().iter().cloned().fold(0.0, f64::max);
            assert!(m == 0.0 || (m - 1.0).abs() < 1e-12);
            assert!(s.image.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        }
        assert!(matches!(build_patch_dataset(&[], &small()), Err(Error::EmptyDataset)));
    }

    #[test]
    fn fixed_mode_reproduces_inference_views() {
        let pairs = synth_corpus(1, 64, 32, 2);
        let cfg = PatchDatasetConfig {
            mode: FrustumMode::SixFixed,
            ..small()
        };
        let d = build_patch_dataset(&pairs, &cfg).unwrap();
        let views = six_fixed_frustums(cfg.fov, 12, 10).unwrap();
        assert_eq!(d.iter().map(|s| s.frustum).collect::<Vec<_>>(), views);
    }

    #[test]
    fn stored_frustum_regenerates_the_target() {
        let pairs = synth_corpus(2, 64, 32, 3);
        for s in build_patch_dataset(&pairs, &small()).unwrap() {
            let src = pairs.iter().find(|p| p.id == s.source_id).unwrap();
            let again = extract_patch(&src.saliency, &s.frustum, Interpolation::Bilinear).unwrap();
            assert_eq!(max_normalize(&again.image), s.saliency);
        }
    }
}
