use rand::Rng;

use super::conv::{
    conv2d_backward, conv2d_forward, conv_output_size, deconv2d_backward, deconv2d_forward,
    deconv_output_size,
};
use super::ops::{relu, relu_backward};
use super::pool::{maxpool_backward, maxpool_forward};
use super::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Conv,
    MaxPool,
    Deconv,
    Relu,
    /// Channel concatenation of the coarse map with coordinate channels.
    Merge,
}

impl LayerKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::MaxPool => "maxpool",
            LayerKind::Deconv => "deconv",
            LayerKind::Relu => "relu",
            LayerKind::Merge => "merge",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "conv" => LayerKind::Conv,
            "maxpool" => LayerKind::MaxPool,
            "deconv" => LayerKind::Deconv,
            "relu" => LayerKind::Relu,
            "merge" => LayerKind::Merge,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

/// One row of a layer table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub in_depth: usize,
    pub out_depth: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn conv(name: &str, in_depth: usize, out_depth: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            name: name.into(),
            kind: LayerKind::Conv,
            in_depth,
            out_depth,
            kernel,
            stride,
            padding,
            activation: Activation::Relu,
        }
    }

    pub fn pool(name: &str, depth: usize, kernel: usize, stride: usize) -> Self {
        Self {
            name: name.into(),
            kind: LayerKind::MaxPool,
            in_depth: depth,
            out_depth: depth,
            kernel,
            stride,
            padding: 0,
            activation: Activation::None,
        }
    }

    pub fn deconv(name: &str, in_depth: usize, out_depth: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            name: name.into(),
            kind: LayerKind::Deconv,
            in_depth,
            out_depth,
            kernel,
            stride,
            padding,
            activation: Activation::None,
        }
    }

    pub fn merge(name: &str, in_depth: usize, out_depth: usize) -> Self {
        Self {
            name: name.into(),
            kind: LayerKind::Merge,
            in_depth,
            out_depth,
            kernel: 1,
            stride: 1,
            padding: 0,
            activation: Activation::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel == 0 || self.stride == 0 {
            return Err(Error::InvalidArgument(format!(
                "layer {}: kernel and stride must be at least 1",
                self.name
            )));
        }
        if matches!(self.kind, LayerKind::MaxPool | LayerKind::Relu) && self.in_depth != self.out_depth {
            return Err(Error::InvalidArgument(format!(
                "layer {}: {} must preserve depth",
                self.name,
                self.kind.as_str()
            )));
        }
        Ok(())
    }

    pub fn has_weights(&self) -> bool {
        matches!(self.kind, LayerKind::Conv | LayerKind::Deconv)
    }

    /// `(out, in, k, k)` for weight-bearing layers.
    pub fn weight_shape(&self) -> Option<[usize; 4]> {
        self.has_weights()
            .then_some([self.out_depth, self.in_depth, self.kernel, self.kernel])
    }

    pub fn parameter_count(&self) -> usize {
        self.weight_shape()
            .map(|s| s.iter().product::<usize>() + self.out_depth)
            .unwrap_or(0)
    }

    /// Spatial output size for an `h x w` input.
    pub fn output_size(&self, h: usize, w: usize) -> Option<(usize, usize)> {
        let (k, s, p) = (self.kernel, self.stride, self.padding);
        match self.kind {
            LayerKind::Conv | LayerKind::MaxPool => {
                Some((conv_output_size(h, k, s, p)?, conv_output_size(w, k, s, p)?))
            }
            LayerKind::Deconv => Some((deconv_output_size(h, k, s, p)?, deconv_output_size(w, k, s, p)?)),
            LayerKind::Relu | LayerKind::Merge => Some((h, w)),
        }
    }
}

/// A layer with its parameters, if it has any.
#[derive(Debug, Clone)]
pub struct Layer {
    pub spec: LayerSpec,
    pub weight: Option<Tensor>,
    pub bias: Option<Tensor>,
}

enum TapeEntry {
    /// Input and, when an activation follows, the pre-activation output.
    Weighted { input: Tensor, pre_act: Option<Tensor> },
    Pool { input_shape: Vec<usize>, argmax: Vec<usize> },
    Relu { input: Tensor },
}

/// Intermediate values recorded by [`Stack::forward_with_tape`].
pub struct Tape {
    entries: Vec<TapeEntry>,
}

/// A feed-forward chain of layers.
#[derive(Debug, Clone)]
pub struct Stack {
    layers: Vec<Layer>,
}

impl Stack {
    /// Builds the stack with zeroed parameters.
    pub fn new(specs: Vec<LayerSpec>) -> Result<Self> {
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            spec.validate()?;
            if spec.kind == LayerKind::Merge {
                return Err(Error::InvalidArgument(format!(
                    "layer {}: merge is not a stack layer",
                    spec.name
                )));
            }
            let (weight, bias) = match spec.weight_shape() {
                Some(ws) => (Some(Tensor::zeros(&ws)), Some(Tensor::zeros(&[spec.out_depth]))),
                None => (None, None),
            };
            layers.push(Layer { spec, weight, bias });
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer_mut(&mut self, name: &str) -> Option<&mut Layer> {
        self.layers.iter_mut().find(|l| l.spec.name == name)
    }

    /// He-uniform weights, `U(-b, b)` with `b = sqrt(6 / fan_in)` and
    /// `fan_in = in_depth * k * k`; zero biases.
    pub fn init_he_uniform(&mut self, rng: &mut impl Rng) {
        for layer in &mut self.layers {
            if let (Some(w), Some(b)) = (layer.weight.as_mut(), layer.bias.as_mut()) {
                let s = &layer.spec;
                let bound = (6.0 / (s.in_depth * s.kernel * s.kernel) as f64).sqrt();
                for v in w.data_mut() {
                    *v = rng.gen_range(-bound..bound);
                }
                b.data_mut().fill(0.0);
            }
        }
    }

    /// Weight then bias of every weight-bearing layer, in layer order.
    pub fn parameters(&self) -> Vec<&Tensor> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weight.iter_mut().chain(l.bias.iter_mut()))
            .collect()
    }

    fn check_depth(spec: &LayerSpec, x: &Tensor) -> Result<()> {
        let [_, c, _, _] = x.require_rank4(&spec.name)?;
        if c != spec.in_depth {
            return Err(Error::ShapeMismatch(format!(
                "layer {} expects {} input channels, got {c}",
                spec.name, spec.in_depth
            )));
        }
        Ok(())
    }

    fn run(&self, x: &Tensor, mut tape: Option<&mut Vec<TapeEntry>>) -> Result<Tensor> {
        let mut cur = x.clone();
        for layer in &self.layers {
            let s = &layer.spec;
            Self::check_depth(s, &cur)?;
            cur = match s.kind {
                LayerKind::Conv | LayerKind::Deconv => {
                    let w = layer.weight.as_ref().expect("weighted layer");
                    let b = layer.bias.as_ref().expect("weighted layer");
                    let y = if s.kind == LayerKind::Conv {
                        conv2d_forward(&cur, w, b, s.stride, s.padding)?
                    } else {
                        deconv2d_forward(&cur, w, b, s.stride, s.padding)?
                    };
                    let (out, pre_act) = match s.activation {
                        Activation::Relu => (relu(&y), Some(y)),
                        Activation::None => (y, None),
                    };
                    if let Some(t) = tape.as_deref_mut() {
                        t.push(TapeEntry::Weighted { input: cur, pre_act });
                    }
                    out
                }
                LayerKind::MaxPool => {
                    let p = maxpool_forward(&cur, s.kernel, s.stride)?;
                    if let Some(t) = tape.as_deref_mut() {
                        t.push(TapeEntry::Pool {
                            input_shape: p.input_shape,
                            argmax: p.argmax,
                        });
                    }
                    p.output
                }
                LayerKind::Relu => {
                    let y = relu(&cur);
                    if let Some(t) = tape.as_deref_mut() {
                        t.push(TapeEntry::Relu { input: cur });
                    }
                    y
                }
                LayerKind::Merge => unreachable!("rejected at construction"),
            };
        }
        Ok(cur)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.run(x, None)
    }

    pub fn forward_with_tape(&self, x: &Tensor) -> Result<(Tensor, Tape)> {
        let mut entries = Vec::with_capacity(self.layers.len());
        let y = self.run(x, Some(&mut entries))?;
        Ok((y, Tape { entries }))
    }

    /// Returns the gradient with respect to the stack input and the
    /// parameter gradients in [`Stack::parameters`] order.
    pub fn backward(&self, tape: &Tape, grad_out: &Tensor) -> Result<(Tensor, Vec<Tensor>)> {
        if tape.entries.len() != self.layers.len() {
            return Err(Error::ShapeMismatch("tape does not belong to this stack".into()));
        }
        let mut g = grad_out.clone();
        let mut param_grads: Vec<Tensor> = Vec::new();
        for (layer, entry) in self.layers.iter().zip(&tape.entries).rev() {
            let s = &layer.spec;
            g = match entry {
                TapeEntry::Weighted { input, pre_act } => {
                    if let Some(pre) = pre_act {
                        g = relu_backward(pre, &g)?;
                    }
                    let w = layer.weight.as_ref().expect("weighted layer");
                    let grads = if s.kind == LayerKind::Conv {
                        conv2d_backward(input, w, s.stride, s.padding, &g)?
                    } else {
                        deconv2d_backward(input, w, s.stride, s.padding, &g)?
                    };
                    // pushed in reverse; flipped below
                    param_grads.push(grads.grad_b);
                    param_grads.push(grads.grad_w);
                    grads.grad_x
                }
                TapeEntry::Pool { input_shape, argmax } => maxpool_backward(input_shape, argmax, &g)?,
                TapeEntry::Relu { input } => relu_backward(input, &g)?,
            };
        }
        param_grads.reverse();
        Ok((g, param_grads))
    }
}
