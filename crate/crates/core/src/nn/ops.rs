//! Elementwise activation, loss and resampling layers.

use super::Tensor;
use crate::error::{Error, Result};

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Gradient of [`relu`]; the derivative at zero is taken as zero.
pub fn relu_backward(x: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    if x.shape() != grad_out.shape() {
        return Err(Error::ShapeMismatch(format!(
            "relu backward: input {:?} vs grad {:?}",
            x.shape(),
            grad_out.shape()
        )));
    }
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::from_vec(x.shape(), data)
}

/// Half squared error averaged over the elements of each batch item and
/// over the batch: `sum((p - t)^2) / (2 N B)`. Returns the loss and its
/// gradient with respect to `pred`.
pub fn euclidean_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch(format!(
            "loss: prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let total = pred.len() as f64;
    let mut loss = 0.0;
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            loss += d * d;
            d / total
        })
        .collect();
    Ok((loss / (2.0 * total), Tensor::from_vec(pred.shape(), grad)?))
}

/// Bilinear interpolation weights along one axis: for each output index the
/// two source indices and the weight of the second.
fn axis_weights(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let f = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let i0 = f.floor() as usize;
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, f - i0 as f64)
        })
        .collect()
}

/// Bilinear resize of every plane with half-pixel centers and edge
/// clamping. Identity when the size already matches.
pub fn resize_bilinear(x: &Tensor, out_h: usize, out_w: usize) -> Result<Tensor> {
    let [n, c, h, w] = x.require_rank4("resize")?;
    if out_h == 0 || out_w == 0 {
        return Err(Error::ShapeMismatch("resize to an empty raster".into()));
    }
    if (h, w) == (out_h, out_w) {
        return Ok(x.clone());
    }
    let ys = axis_weights(h, out_h);
    let xs = axis_weights(w, out_w);
    let mut out = Tensor::zeros(&[n, c, out_h, out_w]);
    for p in 0..n * c {
        let src = &x.data()[p * h * w..(p + 1) * h * w];
        let dst = &mut out.data_mut()[p * out_h * out_w..(p + 1) * out_h * out_w];
        for (oy, &(y0, y1, ty)) in ys.iter().enumerate() {
            for (ox, &(x0, x1, tx)) in xs.iter().enumerate() {
                let top = src[y0 * w + x0] * (1.0 - tx) + src[y0 * w + x1] * tx;
                let bot = src[y1 * w + x0] * (1.0 - tx) + src[y1 * w + x1] * tx;
                dst[oy * out_w + ox] = top * (1.0 - ty) + bot * ty;
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`resize_bilinear`] for an input of spatial size `in_h x in_w`.
pub fn resize_bilinear_backward(grad_out: &Tensor, in_h: usize, in_w: usize) -> Result<Tensor> {
    let [n, c, oh, ow] = grad_out.require_rank4("resize backward")?;
    if (in_h, in_w) == (oh, ow) {
        return Ok(grad_out.clone());
    }
    let ys = axis_weights(in_h, oh);
    let xs = axis_weights(in_w, ow);
    let mut gx = Tensor::zeros(&[n, c, in_h, in_w]);
    for p in 0..n * c {
        let g = &grad_out.data()[p * oh * ow..(p + 1) * oh * ow];
        let dst = &mut gx.data_mut()[p * in_h * in_w..(p + 1) * in_h * in_w];
        for (oy, &(y0, y1, ty)) in ys.iter().enumerate() {
            for (ox, &(x0, x1, tx)) in xs.iter().enumerate() {
                let v = g[oy * ow + ox];
                dst[y0 * in_w + x0] += v * (1.0 - ty) * (1.0 - tx);
                dst[y0 * in_w + x1] += v * (1.0 - ty) * tx;
                dst[y1 * in_w + x0] += v * ty * (1.0 - tx);
                dst[y1 * in_w + x1] += v * ty * tx;
            }
        }
    }
    Ok(gx)
}
