use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::arch::SalNetArchitecture;
use super::coords::CoordChannels;
use crate::error::{Error, Result};
use crate::nn::{
    euclidean_loss, read_tensor, relu, relu_backward, resize_bilinear, resize_bilinear_backward, Differentiable, Stack,
    Tensor,
};

/// Layers that may be replaced by externally pretrained weights.
pub const PRETRAINED_LAYERS: [&str; 3] = ["conv1", "conv2", "conv3"];

/// The base network followed by the coordinate-aware refinement stage.
#[derive(Debug, Clone)]
pub struct SalNet {
    arch: SalNetArchitecture,
    base: Stack,
    refine: Stack,
    /// Intensity mean subtracted from input images before scaling; one
    /// value or one per channel.
    pub norm_mean: Vec<f64>,
}

/// He-uniform initialized network, deterministic under `seed`.
pub fn build_network(seed: u64) -> SalNet {
    let mut net = SalNet::zeroed();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    net.base.init_he_uniform(&mut rng);
    net.refine.init_he_uniform(&mut rng);
    net
}

impl SalNet {
    pub fn zeroed() -> Self {
        let arch = SalNetArchitecture::table();
        let base = Stack::new(arch.base_layers.clone()).expect("table layers are valid");
        let refine = Stack::new(arch.refine_stack_layers()).expect("table layers are valid");
        Self {
            arch,
            base,
            refine,
            norm_mean: vec![crate::data::DEFAULT_MEAN],
        }
    }

    pub fn architecture(&self) -> &SalNetArchitecture {
        &self.arch
    }

    pub fn base(&self) -> &Stack {
        &self.base
    }

    pub fn base_mut(&mut self) -> &mut Stack {
        &mut self.base
    }

    pub fn refine(&self) -> &Stack {
        &self.refine
    }

    pub fn refine_mut(&mut self) -> &mut Stack {
        &mut self.refine
    }

    /// Base parameters followed by refinement parameters.
    pub fn parameters(&self) -> Vec<&Tensor> {
        let mut p = self.base.parameters();
        p.extend(self.refine.parameters());
        p
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.base.parameters_mut();
        p.extend(self.refine.parameters_mut());
        p
    }

    /// Loads `<layer>.weight.ten` and `<layer>.bias.ten` for conv1..conv3
    /// from `dir`, replacing the current values.
    pub fn load_pretrained_front(&mut self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        for name in PRETRAINED_LAYERS {
            let w = read_tensor(dir.join(format!("{name}.weight.ten")))?;
            let b = read_tensor(dir.join(format!("{name}.bias.ten")))?;
            let layer = self.base.layer_mut(name).expect("front layer exists");
            for (slot, t, what) in [(&mut layer.weight, w, "weight"), (&mut layer.bias, b, "bias")] {
                let cur = slot.as_mut().expect("weighted layer");
                if cur.shape() != t.shape() {
                    return Err(Error::ArchitectureMismatch(format!(
                        "pretrained {name} {what} has shape {:?}, expected {:?}",
                        t.shape(),
                        cur.shape()
                    )));
                }
                *cur = t;
            }
        }
        Ok(())
    }

    fn check_image(x: &Tensor) -> Result<[usize; 4]> {
        let d = x.require_rank4("image")?;
        if d[1] != 3 {
            return Err(Error::ShapeMismatch(format!("image needs 3 channels, got {}", d[1])));
        }
        Ok(d)
    }

    /// Base output resized to the input size, before the clamp.
    pub fn base_raw(&self, x: &Tensor) -> Result<Tensor> {
        let [_, _, h, w] = Self::check_image(x)?;
        resize_bilinear(&self.base.forward(x)?, h, w)
    }

    /// Coarse saliency, `(n, 1, h, w)`, clamped at zero.
    pub fn forward_base(&self, x: &Tensor) -> Result<Tensor> {
        Ok(relu(&self.base_raw(x)?))
    }

    /// Input of the refinement stack: the clamped base map, theta, phi.
    pub fn refine_input(&self, base_out: &Tensor, coords: &Tensor) -> Result<Tensor> {
        let [n, c, h, w] = base_out.require_rank4("base output")?;
        let [cn, cc, ch, cw] = coords.require_rank4("coordinates")?;
        if c != 1 || cc != 2 || (n, h, w) != (cn, ch, cw) {
            return Err(Error::ShapeMismatch(format!(
                "merge: base {:?} with coordinates {:?}",
                base_out.shape(),
                coords.shape()
            )));
        }
        Tensor::concat_channels(&[base_out, coords])
    }

    /// Refinement output resized to the input size, before the clamp.
    pub fn full_raw(&self, x: &Tensor, coords: &Tensor) -> Result<Tensor> {
        let [_, _, h, w] = Self::check_image(x)?;
        let merged = self.refine_input(&self.forward_base(x)?, coords)?;
        resize_bilinear(&self.refine.forward(&merged)?, h, w)
    }

    /// Patch saliency clamped at zero and scaled to a maximum of one per
    /// batch item (all-zero items stay zero).
    pub fn forward_full(&self, x: &Tensor, coords: &Tensor) -> Result<Tensor> {
        let mut y = relu(&self.full_raw(x, coords)?);
        for b in 0..y.shape()[0] {
            let item = y.item_mut(b);
            let m = item.iter().cloned().fold(0.0, f64::max);
            if m > 0.0 {
                item.iter_mut().for_each(|v| *v /= m);
            }
        }
        Ok(y)
    }

    pub fn forward_full_patch(&self, x: &Tensor, coords: &CoordChannels) -> Result<Tensor> {
        self.forward_full(x, &coords.to_tensor())
    }

    /// Stage-1 objective: loss directly after the (resized) base output.
    /// Gradients cover the base parameters only.
    pub fn base_loss_and_gradients(&self, x: &Tensor, target: &Tensor) -> Result<(f64, Vec<Tensor>)> {
        let [_, _, h, w] = Self::check_image(x)?;
        let (d1, tape) = self.base.forward_with_tape(x)?;
        let [_, _, dh, dw] = d1.dims4();
        let pred = resize_bilinear(&d1, h, w)?;
        let (loss, g) = euclidean_loss(&pred, target)?;
        let g = resize_bilinear_backward(&g, dh, dw)?;
        Ok((loss, self.base.backward(&tape, &g)?.1))
    }

    pub fn base_loss(&self, x: &Tensor, target: &Tensor) -> Result<f64> {
        Ok(euclidean_loss(&self.base_raw(x)?, target)?.0)
    }

    /// End-to-end objective at the (resized) refinement output. Gradients
    /// in [`SalNet::parameters`] order.
    pub fn full_loss_and_gradients(&self, x: &Tensor, coords: &Tensor, target: &Tensor) -> Result<(f64, Vec<Tensor>)> {
        let [_, _, h, w] = Self::check_image(x)?;
        let (d1, base_tape) = self.base.forward_with_tape(x)?;
        let [_, _, h1, w1] = d1.dims4();
        let r1 = resize_bilinear(&d1, h, w)?;
        let merged = self.refine_input(&relu(&r1), coords)?;
        let (d2, refine_tape) = self.refine.forward_with_tape(&merged)?;
        let [_, _, h2, w2] = d2.dims4();
        let pred = resize_bilinear(&d2, h, w)?;
        let (loss, g) = euclidean_loss(&pred, target)?;

        let g = resize_bilinear_backward(&g, h2, w2)?;
        let (g_merged, refine_grads) = self.refine.backward(&refine_tape, &g)?;
        let g = relu_backward(&r1, &g_merged.channel_slice(0, 1))?;
        let g = resize_bilinear_backward(&g, h1, w1)?;
        let (_, mut grads) = self.base.backward(&base_tape, &g)?;
        grads.extend(refine_grads);
        Ok((loss, grads))
    }

    pub fn full_loss(&self, x: &Tensor, coords: &Tensor, target: &Tensor) -> Result<f64> {
        Ok(euclidean_loss(&self.full_raw(x, coords)?, target)?.0)
    }
}

/// Stage-1 objective over the base parameters.
pub struct BaseObjective<'a>(pub &'a mut SalNet);

impl Differentiable for BaseObjective<'_> {
    fn parameters(&self) -> Vec<&Tensor> {
        self.0.base.parameters()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.0.base.parameters_mut()
    }

    fn loss(&self, input: &Tensor, target: &Tensor) -> Result<f64> {
        self.0.base_loss(input, target)
    }

    fn loss_and_gradients(&self, input: &Tensor, target: &Tensor) -> Result<(f64, Vec<Tensor>)> {
        self.0.base_loss_and_gradients(input, target)
    }
}

/// End-to-end objective with fixed coordinate channels.
pub struct FullObjective<'a> {
    pub net: &'a mut SalNet,
    pub coords: Tensor,
}

impl Differentiable for FullObjective<'_> {
    fn parameters(&self) -> Vec<&Tensor> {
        self.net.parameters()
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.net.parameters_mut()
    }

    fn loss(&self, input: &Tensor, target: &Tensor) -> Result<f64> {
        self.net.full_loss(input, &self.coords, target)
    }

    fn loss_and_gradients(&self, input: &Tensor, target: &Tensor) -> Result<(f64, Vec<Tensor>)> {
        self.net.full_loss_and_gradients(input, &self.coords, target)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testutil::random_tensor;

    fn coords(n: usize, h: usize, w: usize, seed: u64) -> Tensor {
        random_tensor(&[n, 2, h, w], seed)
    }

    #[test]
    fn same_seed_same_weights() {
        let a = build_network(5);
        let b = build_network(5);
        let c = build_network(6);
        assert!(a.parameters().iter().zip(b.parameters()).all(|(x, y)| *x == y));
        assert!(a.parameters()[0] != c.parameters()[0]);
        assert_eq!(a.parameters().len(), 26);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = SalNet::zeroed();
        let x = random_tensor(&[1, 3, 16, 16], 1);
        assert!(net.forward_base(&x).unwrap().data().iter().all(|&v| v == 0.0));
        let y = net.forward_full(&x, &coords(1, 16, 16, 2)).unwrap();
        assert_eq!(y.shape(), &[1, 1, 16, 16]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_shapes_and_range() {
        let net = build_network(3);
        for (h, w) in [(16, 16), (32, 48)] {
            let x = random_tensor(&[2, 3, h, w], 4);
            assert_eq!(net.forward_base(&x).unwrap().shape(), &[2, 1, h, w]);
            let y = net.forward_full(&x, &coords(2, h, w, 5)).unwrap();
            assert_eq!(y.shape(), &[2, 1, h, w]);
            assert!(y.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        let x = random_tensor(&[1, 3, 16, 16], 4);
        assert!(net.forward_full(&x, &coords(1, 16, 12, 5)).is_err());
        assert!(net.forward_base(&random_tensor(&[1, 2, 16, 16], 1)).is_err());
    }

    #[test]
    fn theta_perturbation_touches_only_channel_one() {
        let net = build_network(3);
        let base = net.forward_base(&random_tensor(&[1, 3, 16, 16], 4)).unwrap();
        let c = coords(1, 16, 16, 5);
        let mut c2 = c.clone();
        c2.data_mut()[7] += 0.25;
        let a = net.refine_input(&base, &c).unwrap();
        let b = net.refine_input(&base, &c2).unwrap();
        let changed: Vec<usize> = (0..a.len()).filter(|&i| a.data()[i] != b.data()[i]).collect();
        assert_eq!(changed, vec![256 + 7]);
    }

    #[test]
    fn pretrained_front_shape_checked() {
        let dir = tempfile::tempdir().unwrap();
        let net = build_network(1);
        for l in net.base().layers().iter().take(5) {
            if let (Some(w), Some(b)) = (&l.weight, &l.bias) {
                crate::nn::write_tensor(dir.path().join(format!("{}.weight.ten", l.spec.name)), w).unwrap();
                crate::nn::write_tensor(dir.path().join(format!("{}.bias.ten", l.spec.name)), b).unwrap();
            }
        }
        let mut other = build_network(2);
        other.load_pretrained_front(dir.path()).unwrap();
        let w1 = other.base().layers()[0].weight.as_ref().unwrap();
        let orig = net.base().layers()[0].weight.as_ref().unwrap();
        assert!(w1.max_abs_diff(orig) < 1e-6);
        crate::nn::write_tensor(dir.path().join("conv2.bias.ten"), &Tensor::zeros(&[3])).unwrap();
        assert!(matches!(
            other.load_pretrained_front(dir.path()),
            Err(Error::ArchitectureMismatch(_))
        ));
    }
}
