use crate::error::{Error, Result};
use crate::nn::{LayerKind, LayerSpec};

/// Layer tables of the two network stages.
///
/// Two entries differ from the published table: pooling layers keep the
/// depth of their actual input (the table lists `3 -> 3` for pool1), and
/// conv9 uses padding 1 so that it preserves spatial size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SalNetArchitecture {
    /// conv1 .. deconv1.
    pub base_layers: Vec<LayerSpec>,
    /// merge, conv8 .. deconv2. The merge row concatenates the coarse map
    /// with the two coordinate channels.
    pub refine_layers: Vec<LayerSpec>,
}

/// One step of the activation shape chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeStep {
    pub layer: String,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Default for SalNetArchitecture {
    fn default() -> Self {
        Self::table()
    }
}

impl SalNetArchitecture {
    pub fn table() -> Self {
        let base_layers = vec![
            LayerSpec::conv("conv1", 3, 96, 7, 1, 3),
            LayerSpec::pool("pool1", 96, 3, 2),
            LayerSpec::conv("conv2", 96, 256, 5, 1, 2),
            LayerSpec::pool("pool2", 256, 3, 2),
            LayerSpec::conv("conv3", 256, 512, 3, 1, 1),
            LayerSpec::conv("conv4", 512, 256, 5, 1, 2),
            LayerSpec::conv("conv5", 256, 128, 7, 1, 3),
            LayerSpec::conv("conv6", 128, 32, 11, 1, 5),
            LayerSpec::conv("conv7", 32, 1, 13, 1, 6),
            LayerSpec::deconv("deconv1", 1, 1, 8, 4, 2),
        ];
        let refine_layers = vec![
            LayerSpec::merge("merge", 3, 3),
            LayerSpec::conv("conv8", 3, 32, 5, 1, 2),
            LayerSpec::pool("pool3", 32, 3, 2),
            LayerSpec::conv("conv9", 32, 64, 3, 1, 1),
            LayerSpec::conv("conv10", 64, 32, 5, 1, 2),
            LayerSpec::conv("conv11", 32, 1, 7, 1, 3),
            LayerSpec::deconv("deconv2", 1, 1, 4, 2, 1),
        ];
        Self {
            base_layers,
            refine_layers,
        }
    }

    /// Layers of the refinement stage that run as a plain stack, i.e.
    /// without the merge row.
    pub fn refine_stack_layers(&self) -> Vec<LayerSpec> {
        self.refine_layers
            .iter()
            .filter(|l| l.kind != LayerKind::Merge)
            .cloned()
            .collect()
    }

    pub fn all_layers(&self) -> impl Iterator<Item = &LayerSpec> {
        self.base_layers.iter().chain(&self.refine_layers)
    }

    pub fn layer(&self, name: &str) -> Option<&LayerSpec> {
        self.all_layers().find(|l| l.name == name)
    }

    pub fn weight_tensor_count(&self) -> usize {
        2 * self.all_layers().filter(|l| l.has_weights()).count()
    }

    pub fn parameter_count(&self) -> usize {
        self.all_layers().map(|l| l.parameter_count()).sum()
    }

    /// Activation shapes for an `h x w` input, including the raw
    /// (pre-resize) deconvolution outputs. Resizes back to the input size
    /// appear as `resize1` and `resize2`.
    pub fn shape_chain(&self, h: usize, w: usize) -> Result<Vec<ShapeStep>> {
        let mut steps = Vec::new();
        let (mut ch, mut cw) = (h, w);
        let push = |steps: &mut Vec<ShapeStep>, l: &LayerSpec, c, hh, ww| {
            steps.push(ShapeStep {
                layer: l.name.clone(),
                channels: c,
                height: hh,
                width: ww,
            })
        };
        for l in &self.base_layers {
            let (nh, nw) = l.output_size(ch, cw).ok_or_else(|| too_small(l, ch, cw))?;
            push(&mut steps, l, l.out_depth, nh, nw);
            (ch, cw) = (nh, nw);
        }
        steps.push(ShapeStep {
            layer: "resize1".into(),
            channels: 1,
            height: h,
            width: w,
        });
        (ch, cw) = (h, w);
        for l in &self.refine_layers {
            let (nh, nw) = l.output_size(ch, cw).ok_or_else(|| too_small(l, ch, cw))?;
            push(&mut steps, l, l.out_depth, nh, nw);
            (ch, cw) = (nh, nw);
        }
        steps.push(ShapeStep {
            layer: "resize2".into(),
            channels: 1,
            height: h,
            width: w,
        });
        Ok(steps)
    }
}

fn too_small(l: &LayerSpec, h: usize, w: usize) -> Error {
    Error::ShapeMismatch(format!("input too small: {h}x{w} does not fit layer {}", l.name))
}
