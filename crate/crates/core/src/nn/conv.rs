//! Convolution (cross-correlation, no kernel flip) and transposed
//! convolution.

use super::im2col::{gemm, Window, COL_BUDGET};
use super::Tensor;
use crate::error::{Error, Result};

/// Spatial output size of a convolution or pooling window.
pub fn conv_output_size(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    if stride == 0 || input + 2 * pad < kernel {
        return None;
    }
    Some((input + 2 * pad - kernel) / stride + 1)
}

/// Spatial output size of a transposed convolution.
pub fn deconv_output_size(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    if input == 0 || stride == 0 {
        return None;
    }
    ((input - 1) * stride + kernel).checked_sub(2 * pad).filter(|&o| o > 0)
}

/// Gradients of a convolution-like layer.
#[derive(Debug, Clone)]
pub struct ConvGrads {
    pub grad_x: Tensor,
    pub grad_w: Tensor,
    pub grad_b: Tensor,
}

fn check_params(x: &Tensor, w: &Tensor, b: &Tensor, in_axis: usize, what: &str) -> Result<[usize; 4]> {
    let [_, c, _, _] = x.require_rank4(what)?;
    let ws = w.require_rank4(what)?;
    if ws[2] != ws[3] || ws[2] == 0 {
        return Err(Error::ShapeMismatch(format!("{what}: kernel must be square, got {ws:?}")));
    }
    if ws[in_axis] != c {
        return Err(Error::ShapeMismatch(format!(
            "{what}: input has {c} channels, weights {ws:?} expect {}",
            ws[in_axis]
        )));
    }
    if b.shape() != [ws[0]] {
        return Err(Error::ShapeMismatch(format!(
            "{what}: bias shape {:?} does not match {} output channels",
            b.shape(),
            ws[0]
        )));
    }
    Ok(ws)
}

fn conv_window(x: &Tensor, w: &Tensor, stride: usize, pad: usize) -> Result<Window> {
    let [_, c, h, wd] = x.dims4();
    let k = w.shape()[2];
    let bad = || {
        Error::ShapeMismatch(format!(
            "conv: input {h}x{wd} with pad {pad} is smaller than kernel {k} (stride {stride})"
        ))
    };
    let out_h = conv_output_size(h, k, stride, pad).ok_or_else(bad)?;
    let out_w = conv_output_size(wd, k, stride, pad).ok_or_else(bad)?;
    Ok(Window {
        channels: c,
        height: h,
        width: wd,
        kernel: k,
        stride,
        pad,
        out_h,
        out_w,
    })
}

/// `out[o] = b[o] + sum_c w[o, c] (*) x[c]` with the given stride and zero
/// padding. Weights are `(out, in, k, k)`.
pub fn conv2d_forward(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    let ws = check_params(x, w, b, 1, "conv2d")?;
    let win = conv_window(x, w, stride, pad)?;
    let [n, _, _, _] = x.dims4();
    let out_c = ws[0];
    let kk = win.patch_len();
    let plane = win.out_h * win.out_w;
    let mut out = Tensor::zeros(&[n, out_c, win.out_h, win.out_w]);
    let rows = win.rows_per_chunk(COL_BUDGET);
    let mut col = Vec::new();
    for bi in 0..n {
        let img = x.item(bi);
        let dst = out.item_mut(bi);
        for (o, chunk) in dst.chunks_mut(plane).enumerate() {
            chunk.fill(b.data()[o]);
        }
        let mut r0 = 0;
        while r0 < win.out_h {
            let r1 = (r0 + rows).min(win.out_h);
            let cols = (r1 - r0) * win.out_w;
            col.resize(kk * cols, 0.0);
            win.im2col(img, r0, r1, &mut col);
            gemm(
                out_c,
                kk,
                cols,
                1.0,
                w.data(),
                (kk, 1),
                &col,
                (cols, 1),
                1.0,
                &mut dst[r0 * win.out_w..],
                (plane, 1),
            );
            r0 = r1;
        }
    }
    Ok(out)
}

pub fn conv2d_backward(
    x: &Tensor,
    w: &Tensor,
    stride: usize,
    pad: usize,
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    let ws = w.require_rank4("conv2d backward")?;
    let b = Tensor::zeros(&[ws[0]]);
    check_params(x, w, &b, 1, "conv2d backward")?;
    let win = conv_window(x, w, stride, pad)?;
    let [n, _, _, _] = x.dims4();
    let out_c = ws[0];
    if grad_out.shape() != [n, out_c, win.out_h, win.out_w] {
        return Err(Error::ShapeMismatch(format!(
            "conv2d backward: grad_out {:?}, expected {:?}",
            grad_out.shape(),
            [n, out_c, win.out_h, win.out_w]
        )));
    }
    let kk = win.patch_len();
    let plane = win.out_h * win.out_w;
    let mut grad_x = Tensor::zeros(x.shape());
    let mut grad_w = Tensor::zeros(w.shape());
    let mut grad_b = Tensor::zeros(&[out_c]);
    let rows = win.rows_per_chunk(COL_BUDGET);
    let mut col = Vec::new();
    let mut gcol = Vec::new();
    for bi in 0..n {
        let g = grad_out.item(bi);
        for (o, chunk) in g.chunks(plane).enumerate() {
            grad_b.data_mut()[o] += chunk.iter().sum::<f64>();
        }
        let mut r0 = 0;
        while r0 < win.out_h {
            let r1 = (r0 + rows).min(win.out_h);
            let cols = (r1 - r0) * win.out_w;
            let g_chunk = &g[r0 * win.out_w..];
            col.resize(kk * cols, 0.0);
            win.im2col(x.item(bi), r0, r1, &mut col);
            // dW += G * col^T
            gemm(
                out_c,
                cols,
                kk,
                1.0,
                g_chunk,
                (plane, 1),
                &col,
                (1, cols),
                1.0,
                grad_w.data_mut(),
                (kk, 1),
            );
            // dcol = W^T * G
            gcol.resize(kk * cols, 0.0);
            gemm(
                kk,
                out_c,
                cols,
                1.0,
                w.data(),
                (1, kk),
                g_chunk,
                (plane, 1),
                0.0,
                &mut gcol,
                (cols, 1),
            );
            win.col2im(&gcol, r0, r1, grad_x.item_mut(bi));
            r0 = r1;
        }
    }
    Ok(ConvGrads {
        grad_x,
        grad_w,
        grad_b,
    })
}

/// Reorders `(out, in, k, k)` deconvolution weights into the
/// `(out * k * k) x in` matrix that maps input pixels to output patches.
fn deconv_matrix(w: &Tensor) -> Vec<f64> {
    let [o, i, k, _] = w.dims4();
    let mut m = vec![0.0; o * k * k * i];
    for oc in 0..o {
        for ic in 0..i {
            for t in 0..k * k {
                m[(oc * k * k + t) * i + ic] = w.data()[(oc * i + ic) * k * k + t];
            }
        }
    }
    m
}

fn deconv_window(x: &Tensor, w: &Tensor, stride: usize, pad: usize) -> Result<Window> {
    let [_, _, h, wd] = x.dims4();
    let [o, _, k, _] = w.dims4();
    let bad = || {
        Error::ShapeMismatch(format!(
            "deconv: input {h}x{wd}, kernel {k}, stride {stride}, pad {pad} gives an empty output"
        ))
    };
    let out_h = deconv_output_size(h, k, stride, pad).ok_or_else(bad)?;
    let out_w = deconv_output_size(wd, k, stride, pad).ok_or_else(bad)?;
    // the window slides over the deconvolution output; its positions are the
    // input pixels
    Ok(Window {
        channels: o,
        height: out_h,
        width: out_w,
        kernel: k,
        stride,
        pad,
        out_h: h,
        out_w: wd,
    })
}

/// Transposed convolution: every input pixel scatters `w[o, i]` scaled by
/// its value into the output, at `stride` spacing, cropped by `pad`.
/// Weights are `(out, in, k, k)`.
pub fn deconv2d_forward(x: &Tensor, w: &Tensor, b: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    let ws = check_params(x, w, b, 1, "deconv2d")?;
    let win = deconv_window(x, w, stride, pad)?;
    let [n, in_c, h, wd] = x.dims4();
    let m = deconv_matrix(w);
    let rows = ws[0] * ws[2] * ws[3];
    let cols = h * wd;
    let mut col = vec![0.0; rows * cols];
    let mut out = Tensor::zeros(&[n, ws[0], win.height, win.width]);
    let plane = win.height * win.width;
    for bi in 0..n {
        gemm(rows, in_c, cols, 1.0, &m, (in_c, 1), x.item(bi), (cols, 1), 0.0, &mut col, (cols, 1));
        let dst = out.item_mut(bi);
        for (o, chunk) in dst.chunks_mut(plane).enumerate() {
            chunk.fill(b.data()[o]);
        }
        win.col2im(&col, 0, h, dst);
    }
    Ok(out)
}

pub fn deconv2d_backward(
    x: &Tensor,
    w: &Tensor,
    stride: usize,
    pad: usize,
    grad_out: &Tensor,
) -> Result<ConvGrads> {
    let ws = w.require_rank4("deconv2d backward")?;
    check_params(x, w, &Tensor::zeros(&[ws[0]]), 1, "deconv2d backward")?;
    let win = deconv_window(x, w, stride, pad)?;
    let [n, in_c, h, wd] = x.dims4();
    if grad_out.shape() != [n, ws[0], win.height, win.width] {
        return Err(Error::ShapeMismatch(format!(
            "deconv2d backward: grad_out {:?}, expected {:?}",
            grad_out.shape(),
            [n, ws[0], win.height, win.width]
        )));
    }
    let m = deconv_matrix(w);
    let rows = ws[0] * ws[2] * ws[3];
    let cols = h * wd;
    let plane = win.height * win.width;
    let mut gcol = vec![0.0; rows * cols];
    let mut grad_x = Tensor::zeros(x.shape());
    let mut gm = vec![0.0; rows * in_c];
    let mut grad_b = Tensor::zeros(&[ws[0]]);
    for bi in 0..n {
        let g = grad_out.item(bi);
        for (o, chunk) in g.chunks(plane).enumerate() {
            grad_b.data_mut()[o] += chunk.iter().sum::<f64>();
        }
        // gradient w.r.t. the input is an ordinary convolution of grad_out
        win.im2col(g, 0, h, &mut gcol);
        gemm(in_c, rows, cols, 1.0, &m, (1, in_c), &gcol, (cols, 1), 0.0, grad_x.item_mut(bi), (cols, 1));
        gemm(rows, cols, in_c, 1.0, &gcol, (cols, 1), x.item(bi), (1, cols), 1.0, &mut gm, (in_c, 1));
    }
    let [o, i, k, _] = w.dims4();
    let mut grad_w = Tensor::zeros(w.shape());
    for oc in 0..o {
        for ic in 0..i {
            for t in 0..k * k {
                grad_w.data_mut()[(oc * i + ic) * k * k + t] = gm[(oc * k * k + t) * i + ic];
            }
        }
    }
    Ok(ConvGrads {
        grad_x,
        grad_w,
        grad_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testutil::{random_tensor, sum_weighted};

    /// Direct nested-loop cross-correlation.
    fn conv_oracle(x: &Tensor, w: &Tensor, b: &Tensor, s: usize, p: usize) -> Tensor {
        let [n, c, h, wd] = x.dims4();
        let [o, _, k, _] = w.dims4();
        let oh = (h + 2 * p - k) / s + 1;
        let ow = (wd + 2 * p - k) / s + 1;
        let mut out = Tensor::zeros(&[n, o, oh, ow]);
        for bi in 0..n {
            for oc in 0..o {
                for y in 0..oh {
                    for xx in 0..ow {
                        let mut acc = b.data()[oc];
                        for ic in 0..c {
                            for ky in 0..k {
                                for kx in 0..k {
                                    let iy = (y * s + ky) as isize - p as isize;
                                    let ix = (xx * s + kx) as isize - p as isize;
                                    if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < wd {
                                        acc += w.data()[((oc * c + ic) * k + ky) * k + kx]
                                            * x.data()[((bi * c + ic) * h + iy as usize) * wd + ix as usize];
                                    }
                                }
                            }
                        }
                        out.data_mut()[((bi * o + oc) * oh + y) * ow + xx] = acc;
                    }
                }
            }
        }
        out
    }

    /// Direct scatter form of the transposed convolution.
    fn deconv_oracle(x: &Tensor, w: &Tensor, b: &Tensor, s: usize, p: usize) -> Tensor {
        let [n, c, h, wd] = x.dims4();
        let [o, _, k, _] = w.dims4();
        let oh = (h - 1) * s + k - 2 * p;
        let ow = (wd - 1) * s + k - 2 * p;
        let mut out = Tensor::zeros(&[n, o, oh, ow]);
        for bi in 0..n {
            for oc in 0..o {
                for v in out.item_mut(bi)[oc * oh * ow..(oc + 1) * oh * ow].iter_mut() {
                    *v = b.data()[oc];
                }
                for ic in 0..c {
                    for y in 0..h {
                        for xx in 0..wd {
                            let v = x.data()[((bi * c + ic) * h + y) * wd + xx];
                            for ky in 0..k {
                                for kx in 0..k {
                                    let oy = (y * s + ky) as isize - p as isize;
                                    let ox = (xx * s + kx) as isize - p as isize;
                                    if oy >= 0 && ox >= 0 && (oy as usize) < oh && (ox as usize) < ow {
                                        out.data_mut()[((bi * o + oc) * oh + oy as usize) * ow + ox as usize] +=
                                            v * w.data()[((oc * c + ic) * k + ky) * k + kx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn output_sizes() {
        assert_eq!(conv_output_size(240, 7, 1, 3), Some(240));
        assert_eq!(conv_output_size(240, 3, 2, 0), Some(119));
        assert_eq!(conv_output_size(2, 3, 1, 0), None);
        assert_eq!(deconv_output_size(59, 8, 4, 2), Some(236));
        assert_eq!(deconv_output_size(89, 8, 4, 2), Some(356));
        assert_eq!(deconv_output_size(10, 4, 2, 1), Some(20));
    }

    #[test]
    fn conv1_shape() {
        let x = Tensor::zeros(&[1, 3, 240, 360]);
        let w = Tensor::zeros(&[96, 3, 7, 7]);
        let b = Tensor::zeros(&[96]);
        let y = conv2d_forward(&x, &w, &b, 1, 3).unwrap();
        assert_eq!(y.shape(), [1, 96, 240, 360]);
    }

    #[test]
    fn identity_kernel() {
        let x = random_tensor(&[1, 1, 3, 3], 1);
        let y = conv2d_forward(&x, &Tensor::filled(&[1, 1, 1, 1], 1.0), &Tensor::zeros(&[1]), 1, 0).unwrap();
        assert_eq!(y, x);
        let g = conv2d_backward(&x, &Tensor::filled(&[1, 1, 1, 1], 1.0), 1, 0, &Tensor::filled(&[1, 1, 3, 3], 1.0)).unwrap();
        assert!(g.grad_x.data().iter().all(|&v| v == 1.0));
        let d = deconv2d_forward(&x, &Tensor::filled(&[1, 1, 1, 1], 1.0), &Tensor::zeros(&[1]), 1, 0).unwrap();
        assert_eq!(d, x);
    }

    #[test]
    fn conv_matches_oracle() {
        for (shape, wshape, s, p) in [
            ([1, 2, 5, 5], [3, 2, 3, 3], 1, 0),
            ([2, 3, 7, 6], [4, 3, 3, 3], 2, 1),
            ([1, 2, 9, 8], [2, 2, 5, 5], 1, 2),
        ] {
            let x = random_tensor(&shape, 2);
            let w = random_tensor(&wshape, 3);
            let b = random_tensor(&[wshape[0]], 4);
            let y = conv2d_forward(&x, &w, &b, s, p).unwrap();
            assert!(y.max_abs_diff(&conv_oracle(&x, &w, &b, s, p)) < 1e-12);
        }
    }

    #[test]
    fn chunked_unfolding_matches_oracle() {
        // wide enough that the unfolded matrix is split into row chunks
        let x = random_tensor(&[1, 16, 40, 1100], 5);
        let w = random_tensor(&[2, 16, 7, 7], 6);
        let b = random_tensor(&[2], 7);
        let win = conv_window(&x, &w, 1, 3).unwrap();
        assert!(win.rows_per_chunk(COL_BUDGET) < win.out_h);
        let y = conv2d_forward(&x, &w, &b, 1, 3).unwrap();
        assert!(y.max_abs_diff(&conv_oracle(&x, &w, &b, 1, 3)) < 1e-10);
    }

    #[test]
    fn deconv_matches_oracle() {
        for (shape, wshape, s, p) in [
            ([1, 1, 5, 4], [1, 1, 8, 8], 4, 2),
            ([2, 2, 3, 3], [3, 2, 4, 4], 2, 1),
            ([1, 3, 4, 2], [2, 3, 3, 3], 1, 0),
        ] {
            let x = random_tensor(&shape, 8);
            let w = random_tensor(&wshape, 9);
            let b = random_tensor(&[wshape[0]], 10);
            let y = deconv2d_forward(&x, &w, &b, s, p).unwrap();
            assert!(y.max_abs_diff(&deconv_oracle(&x, &w, &b, s, p)) < 1e-12);
        }
    }

    #[test]
    fn zero_grad_out_gives_zero_gradients() {
        let x = random_tensor(&[1, 2, 6, 6], 11);
        let w = random_tensor(&[3, 2, 3, 3], 12);
        let g = conv2d_backward(&x, &w, 1, 1, &Tensor::zeros(&[1, 3, 6, 6])).unwrap();
        assert!(g.grad_x.data().iter().chain(g.grad_w.data()).chain(g.grad_b.data()).all(|&v| v == 0.0));
        let wd = random_tensor(&[2, 2, 4, 4], 13);
        let g = deconv2d_backward(&x, &wd, 2, 1, &Tensor::zeros(&[1, 2, 12, 12])).unwrap();
        assert!(g.grad_x.data().iter().chain(g.grad_w.data()).chain(g.grad_b.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn shape_errors() {
        let x = Tensor::zeros(&[1, 2, 2, 2]);
        let w = Tensor::zeros(&[1, 2, 3, 3]);
        let b = Tensor::zeros(&[1]);
        assert!(matches!(conv2d_forward(&x, &w, &b, 1, 0), Err(Error::ShapeMismatch(_))));
        let w3 = Tensor::zeros(&[1, 3, 1, 1]);
        assert!(matches!(conv2d_forward(&x, &w3, &b, 1, 0), Err(Error::ShapeMismatch(_))));
        let w1 = Tensor::zeros(&[1, 2, 1, 1]);
        assert!(matches!(conv2d_forward(&x, &w1, &Tensor::zeros(&[2]), 1, 0), Err(Error::ShapeMismatch(_))));
        assert!(matches!(
            conv2d_backward(&x, &w1, 1, 0, &Tensor::zeros(&[1, 1, 3, 3])),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn conv_is_linear_in_input() {
        let x = random_tensor(&[1, 2, 6, 5], 14);
        let y = random_tensor(&[1, 2, 6, 5], 15);
        let w = random_tensor(&[3, 2, 3, 3], 16);
        let b = Tensor::zeros(&[3]);
        let (a, c) = (1.7, -0.4);
        let mut mix = x.map(|v| v * a);
        mix.add_assign(&y.map(|v| v * c)).unwrap();
        let lhs = conv2d_forward(&mix, &w, &b, 1, 1).unwrap();
        let mut rhs = conv2d_forward(&x, &w, &b, 1, 1).unwrap().map(|v| v * a);
        rhs.add_assign(&conv2d_forward(&y, &w, &b, 1, 1).unwrap().map(|v| v * c)).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-6);
    }

    /// Central differences of `L = sum(probe * f(x))`.
    fn fd_check(
        f: &dyn Fn(&Tensor, &Tensor, &Tensor) -> Tensor,
        x: &Tensor,
        w: &Tensor,
        b: &Tensor,
        probe: &Tensor,
        analytic: &ConvGrads,
    ) {
        let eps = 1e-6;
        let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
        let loss = |x: &Tensor, w: &Tensor, b: &Tensor| sum_weighted(&f(x, w, b), probe);
        let mut worst: f64 = 0.0;
        for (which, t, g) in [(0, x, &analytic.grad_x), (1, w, &analytic.grad_w), (2, b, &analytic.grad_b)] {
            for i in 0..t.len() {
                let mut plus = t.clone();
                plus.data_mut()[i] += eps;
                let mut minus = t.clone();
                minus.data_mut()[i] -= eps;
                let (lp, lm) = match which {
                    0 => (loss(&plus, w, b), loss(&minus, w, b)),
                    1 => (loss(x, &plus, b), loss(x, &minus, b)),
                    _ => (loss(x, w, &plus), loss(x, w, &minus)),
                };
                worst = worst.max(rel(g.data()[i], (lp - lm) / (2.0 * eps)));
            }
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        for (s, p) in [(1, 0), (2, 1), (1, 2)] {
            let x = random_tensor(&[2, 2, 6, 5], 20);
            let w = random_tensor(&[3, 2, 3, 3], 21);
            let b = random_tensor(&[3], 22);
            let y = conv2d_forward(&x, &w, &b, s, p).unwrap();
            let probe = random_tensor(y.shape(), 23);
            let g = conv2d_backward(&x, &w, s, p, &probe).unwrap();
            fd_check(&|x, w, b| conv2d_forward(x, w, b, s, p).unwrap(), &x, &w, &b, &probe, &g);
        }
    }

    #[test]
    fn deconv_backward_matches_finite_differences() {
        for (k, s, p) in [(8, 4, 2), (4, 2, 1), (3, 1, 1)] {
            let x = random_tensor(&[2, 2, 4, 3], 30);
            let w = random_tensor(&[2, 2, k, k], 31);
            let b = random_tensor(&[2], 32);
            let y = deconv2d_forward(&x, &w, &b, s, p).unwrap();
            let probe = random_tensor(y.shape(), 33);
            let g = deconv2d_backward(&x, &w, s, p, &probe).unwrap();
            fd_check(&|x, w, b| deconv2d_forward(x, w, b, s, p).unwrap(), &x, &w, &b, &probe, &g);
        }
    }
}
