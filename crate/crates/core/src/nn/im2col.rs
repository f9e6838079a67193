//! Patch unfolding and the dense matrix product behind the convolutions.

/// Geometry of one strided, padded sliding window pass over a single image.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Window {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl Window {
    /// Rows of the unfolded matrix.
    pub fn patch_len(&self) -> usize {
        self.channels * self.kernel * self.kernel
    }

    /// Unfolds output rows `[r0, r1)` into `col`, laid out
    /// `patch_len x ((r1 - r0) * out_w)`.
    pub fn im2col(&self, img: &[f64], r0: usize, r1: usize, col: &mut [f64]) {
        let n = (r1 - r0) * self.out_w;
        debug_assert_eq!(col.len(), self.patch_len() * n);
        let k = self.kernel;
        for c in 0..self.channels {
            let plane = &img[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let dst = &mut col[row * n..(row + 1) * n];
                    for oy in r0..r1 {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        let out = &mut dst[(oy - r0) * self.out_w..(oy - r0 + 1) * self.out_w];
                        if iy < 0 || iy >= self.height as isize {
                            out.fill(0.0);
                            continue;
                        }
                        let src = &plane[iy as usize * self.width..(iy as usize + 1) * self.width];
                        for (ox, o) in out.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            *o = if ix < 0 || ix >= self.width as isize {
                                0.0
                            } else {
                                src[ix as usize]
                            };
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of [`Window::im2col`]: scatters-adds `col` back into `img`.
    pub fn col2im(&self, col: &[f64], r0: usize, r1: usize, img: &mut [f64]) {
        let n = (r1 - r0) * self.out_w;
        debug_assert_eq!(col.len(), self.patch_len() * n);
        let k = self.kernel;
        for c in 0..self.channels {
            let plane = &mut img[c * self.height * self.width..(c + 1) * self.height * self.width];
            for ky in 0..k {
                for kx in 0..k {
                    let row = (c * k + ky) * k + kx;
                    let src = &col[row * n..(row + 1) * n];
                    for oy in r0..r1 {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.height as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * self.width..(iy as usize + 1) * self.width];
                        let s = &src[(oy - r0) * self.out_w..(oy - r0 + 1) * self.out_w];
                        for (ox, v) in s.iter().enumerate() {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix >= 0 && ix < self.width as isize {
                                dst[ix as usize] += v;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Output rows per unfolding chunk so that a chunk holds at most
    /// `budget` values.
    pub fn rows_per_chunk(&self, budget: usize) -> usize {
        let per_row = self.patch_len() * self.out_w;
        (budget / per_row.max(1)).clamp(1, self.out_h.max(1))
    }
}

/// Upper bound on the number of values in one unfolded chunk.
pub(crate) const COL_BUDGET: usize = 1 << 23;

/// `C = alpha * A * B + beta * C` for strided row/column-major views.
///
/// `A` is `m x k`, `B` is `k x n`, `C` is `m x n`; each matrix is given by
/// its slice plus row and column strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
    (rsc, csc): (usize, usize),
) {
    if m == 0 || n == 0 {
        return;
    }
    let last = |r: usize, cc: usize, rs: usize, cs: usize| (r - 1) * rs + (cc - 1) * cs;
    if k > 0 {
        assert!(last(m, k, rsa, csa) < a.len(), "gemm: A out of bounds");
        assert!(last(k, n, rsb, csb) < b.len(), "gemm: B out of bounds");
    }
    assert!(last(m, n, rsc, csc) < c.len(), "gemm: C out of bounds");
    // SAFETY: every element addressed through the strides lies inside the
    // slices, checked above; `c` is exclusively borrowed.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            rsc as isize,
            csc as isize,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_naive() {
        let (m, k, n) = (3, 4, 5);
        let a: Vec<f64> = (0..m * k).map(|i| i as f64 * 0.5 - 2.0).collect();
        let b: Vec<f64> = (0..k * n).map(|i| (i as f64).sin()).collect();
        let mut c = vec![1.0; m * n];
        gemm(m, k, n, 2.0, &a, (k, 1), &b, (n, 1), 0.5, &mut c, (n, 1));
        for i in 0..m {
            for j in 0..n {
                let dot: f64 = (0..k).map(|p| a[i * k + p] * b[p * n + j]).sum();
                assert!((c[i * n + j] - (2.0 * dot + 0.5)).abs() < 1e-12);
            }
        }
        // transposed view of A
        let mut ct = vec![0.0; k * n];
        gemm(k, m, n, 1.0, &a, (1, k), &c, (n, 1), 0.0, &mut ct, (n, 1));
        let dot: f64 = (0..m).map(|p| a[p * k + 1] * c[p * n + 2]).sum();
        assert!((ct[n + 2] - dot).abs() < 1e-12);
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let w = Window {
            channels: 2,
            height: 5,
            width: 6,
            kernel: 3,
            stride: 2,
            pad: 1,
            out_h: 3,
            out_w: 3,
        };
        let img: Vec<f64> = (0..60).map(|i| (i as f64 * 0.37).cos()).collect();
        let mut col = vec![0.0; w.patch_len() * 9];
        w.im2col(&img, 0, 3, &mut col);
        let probe: Vec<f64> = (0..col.len()).map(|i| (i as f64 * 0.11).sin()).collect();
        let mut back = vec![0.0; 60];
        w.col2im(&probe, 0, 3, &mut back);
        let lhs: f64 = col.iter().zip(&probe).map(|(a, b)| a * b).sum();
        let rhs: f64 = img.iter().zip(&back).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
