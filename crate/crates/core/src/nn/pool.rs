use super::conv::conv_output_size;
use super::Tensor;
use crate::error::{Error, Result};

/// Max pooling result with the flat input index of each selected maximum.
#[derive(Debug, Clone)]
pub struct PoolOutput {
    pub output: Tensor,
    pub argmax: Vec<usize>,
    pub input_shape: Vec<usize>,
}

/// Max pooling without padding. Ties go to the first index in row-major
/// window order.
pub fn maxpool_forward(x: &Tensor, kernel: usize, stride: usize) -> Result<PoolOutput> {
    let [n, c, h, w] = x.require_rank4("maxpool")?;
    let bad = || Error::ShapeMismatch(format!("maxpool: input {h}x{w} smaller than window {kernel}"));
    if kernel == 0 {
        return Err(Error::ShapeMismatch("maxpool: kernel must be positive".into()));
    }
    let oh = conv_output_size(h, kernel, stride, 0).ok_or_else(bad)?;
    let ow = conv_output_size(w, kernel, stride, 0).ok_or_else(bad)?;
    let mut out = Tensor::zeros(&[n, c, oh, ow]);
    let mut argmax = vec![0; n * c * oh * ow];
    let src = x.data();
    let dst = out.data_mut();
    for plane in 0..n * c {
        let base = plane * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = base + oy * stride * w + ox * stride;
                for ky in 0..kernel {
                    let row = base + (oy * stride + ky) * w + ox * stride;
                    for kx in 0..kernel {
                        let v = src[row + kx];
                        if v > best {
                            best = v;
                            best_i = row + kx;
                        }
                    }
                }
                let o = (plane * oh + oy) * ow + ox;
                dst[o] = best;
                argmax[o] = best_i;
            }
        }
    }
    Ok(PoolOutput {
        output: out,
        argmax,
        input_shape: x.shape().to_vec(),
    })
}

/// Routes each output gradient to its recorded maximum, accumulating where
/// windows overlap.
pub fn maxpool_backward(input_shape: &[usize], argmax: &[usize], grad_out: &Tensor) -> Result<Tensor> {
    if grad_out.len() != argmax.len() {
        return Err(Error::ShapeMismatch(format!(
            "maxpool backward: {} gradients for {} pooled outputs",
            grad_out.len(),
            argmax.len()
        )));
    }
    let mut grad_x = Tensor::zeros(input_shape);
    let gx = grad_x.data_mut();
    for (&i, &g) in argmax.iter().zip(grad_out.data()) {
        if i >= gx.len() {
            return Err(Error::ShapeMismatch("maxpool backward: argmax outside input".into()));
        }
        gx[i] += g;
    }
    Ok(grad_x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::testutil::{random_tensor, sum_weighted};

    fn pool_oracle(x: &Tensor, k: usize, s: usize) -> Tensor {
        let [n, c, h, w] = x.dims4();
        let oh = (h - k) / s + 1;
        let ow = (w - k) / s + 1;
        let mut out = Tensor::zeros(&[n, c, oh, ow]);
        for p in 0..n * c {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut m = f64::NEG_INFINITY;
                    for ky in 0..k {
                        for kx in 0..k {
                            m = m.max(x.data()[p * h * w + (y * s + ky) * w + xx * s + kx]);
                        }
                    }
                    out.data_mut()[(p * oh + y) * ow + xx] = m;
                }
            }
        }
        out
    }

    #[test]
    fn table_pool_shape() {
        let p = maxpool_forward(&Tensor::zeros(&[1, 1, 240, 360]), 3, 2).unwrap();
        assert_eq!(p.output.shape(), [1, 1, 119, 179]);
    }

    #[test]
    fn matches_oracle() {
        let x = random_tensor(&[1, 1, 6, 6], 3);
        let p = maxpool_forward(&x, 3, 2).unwrap();
        assert_eq!(p.output, pool_oracle(&x, 3, 2));
        let x = random_tensor(&[2, 3, 9, 7], 4);
        assert_eq!(maxpool_forward(&x, 3, 2).unwrap().output, pool_oracle(&x, 3, 2));
    }

    #[test]
    fn constant_input_and_tie_break() {
        let x = Tensor::filled(&[1, 1, 5, 5], 2.0);
        let p = maxpool_forward(&x, 3, 2).unwrap();
        assert!(p.output.data().iter().all(|&v| v == 2.0));
        // first element of each window wins a tie
        assert_eq!(p.argmax, vec![0, 2, 10, 12]);
    }

    #[test]
    fn backward_scatters_to_maxima() {
        let x = Tensor::from_vec(&[1, 1, 2, 4], vec![1.0, 5.0, 2.0, 0.0, 3.0, 4.0, 8.0, 1.0]).unwrap();
        let p = maxpool_forward(&x, 2, 2).unwrap();
        let g = Tensor::from_vec(&[1, 1, 1, 2], vec![0.3, -2.0]).unwrap();
        let gx = maxpool_backward(&p.input_shape, &p.argmax, &g).unwrap();
        assert_eq!(gx.data(), &[0.0, 0.3, 0.0, 0.0, 0.0, 0.0, -2.0, 0.0]);
        let z = maxpool_backward(&p.input_shape, &p.argmax, &Tensor::zeros(&[1, 1, 1, 2])).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn overlapping_windows_accumulate_and_match_finite_differences() {
        let x = random_tensor(&[1, 2, 5, 5], 9);
        let p = maxpool_forward(&x, 3, 2).unwrap();
        let probe = random_tensor(p.output.shape(), 10);
        let gx = maxpool_backward(&p.input_shape, &p.argmax, &probe).unwrap();
        let eps = 1e-6;
        for i in 0..x.len() {
            let mut a = x.clone();
            a.data_mut()[i] += eps;
            let mut b = x.clone();
            b.data_mut()[i] -= eps;
            let fd = (sum_weighted(&maxpool_forward(&a, 3, 2).unwrap().output, &probe)
                - sum_weighted(&maxpool_forward(&b, 3, 2).unwrap().output, &probe))
                / (2.0 * eps);
            let rel = (fd - gx.data()[i]).abs() / fd.abs().max(gx.data()[i].abs()).max(1e-8);
            assert!(rel < 1e-4, "index {i}: fd {fd} analytic {}", gx.data()[i]);
        }
    }

    #[test]
    fn too_small_input_rejected() {
        assert!(maxpool_forward(&Tensor::zeros(&[1, 1, 2, 5]), 3, 2).is_err());
        assert!(maxpool_backward(&[1, 1, 4, 4], &[0, 1], &Tensor::zeros(&[1, 1, 1, 1])).is_err());
    }
}
