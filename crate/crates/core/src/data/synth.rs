use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SamplePair;
use crate::geometry::{pixel_center_to_sphere, SphericalCoord};
use crate::raster::Raster;

/// A Gaussian bump on the sphere: `amplitude * exp(-d^2 / (2 sigma^2))`
/// with `d` the great-circle distance to `center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthBlob {
    pub center: SphericalCoord,
    pub sigma: f64,
    pub amplitude: f64,
    pub color: [f64; 3],
}

impl SynthBlob {
    pub fn intensity(&self, c: &SphericalCoord) -> f64 {
        let d = self.center.angle_to(c);
        self.amplitude * (-d * d / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Renders an image with a gradient and checker background plus colored
/// blobs, and the matching saliency map (sum of blob intensities).
pub fn render_blobs(blobs: &[SynthBlob], width: usize, height: usize) -> (Raster, Raster) {
    let mut image = Raster::new(width, height, 3);
    let mut saliency = Raster::new(width, height, 1);
    for y in 0..height {
        for x in 0..width {
            let c = pixel_center_to_sphere(x, y, width, height);
            let checker = if ((c.theta * 4.0 / PI).floor() + (c.phi * 4.0 / PI).floor()) as i64 % 2 == 0 {
                12.0
            } else {
                0.0
            };
            let grad = 40.0 + 30.0 * (c.theta + FRAC_PI_2) / (2.0 * PI) + 20.0 * (c.phi / FRAC_PI_2);
            let mut px = [grad + checker, grad * 0.9 + checker, grad * 0.8 + checker];
            let mut s = 0.0;
            for b in blobs {
                let v = b.intensity(&c);
                s += v;
                for (p, col) in px.iter_mut().zip(b.color) {
                    *p += v * col;
                }
            }
            for (ch, p) in px.iter().enumerate() {
                image.set(ch, x, y, p.clamp(0.0, 255.0));
            }
            saliency.set(0, x, y, s);
        }
    }
    (image, saliency)
}

fn random_blob(rng: &mut ChaCha8Rng) -> SynthBlob {
    let theta = rng.gen_range(-FRAC_PI_2..1.5 * PI);
    let phi = rng.gen_range(-0.8f64..=0.8).asin();
    let hue = rng.gen_range(0..3);
    let mut color = [60.0; 3];
    color[hue] = 180.0;
    SynthBlob {
        center: SphericalCoord::new(theta, phi),
        sigma: rng.gen_range(0.3..0.6),
        amplitude: rng.gen_range(0.6..1.0),
        color,
    }
}

/// `n` procedurally generated images with two to four blobs each,
/// returned together with their blobs.
pub fn synth_corpus_with_blobs(n: usize, width: usize, height: usize, seed: u64) -> Vec<(SamplePair, Vec<SynthBlob>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let k = rng.gen_range(2..=4);
            let blobs: Vec<SynthBlob> = (0..k).map(|_| random_blob(&mut rng)).collect();
            let (image, saliency) = render_blobs(&blobs, width, height);
            let pair = SamplePair::new(format!("synth_{i:03}"), image, saliency).expect("rendered rasters agree");
            (pair, blobs)
        })
        .collect()
}

pub fn synth_corpus(n: usize, width: usize, height: usize, seed: u64) -> Vec<SamplePair> {
    synth_corpus_with_blobs(n, width, height, seed)
        .into_iter()
        .map(|(p, _)| p)
        .collect()
}
