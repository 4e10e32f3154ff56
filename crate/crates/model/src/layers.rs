//! Conv1d and dense kernels over a flat parameter vector.
//!
//! Trunk activations are channel-major, `[C][N][L]`, so one convolution over
//! the whole batch is a single GEMM against the im2col matrix
//! `[C_in·K][N·L_out]`. Head activations are batch-major, `[N][F]`.

/// `C ← alpha·A·B + beta·C` for `A: m×k`, `B: k×n` given by strides and `C`
/// row-major `m×n`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    (rsa, csa): (usize, usize),
    b: &[f64],
    (rsb, csb): (usize, usize),
    beta: f64,
    c: &mut [f64],
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n);
    if k > 0 {
        assert!(a.len() > (m - 1) * rsa + (k - 1) * csa);
        assert!(b.len() > (k - 1) * rsb + (n - 1) * csb);
    }
    // SAFETY: the asserts above keep every index the kernel touches in bounds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Conv1d {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub w: usize,
    pub b: usize,
}

impl Conv1d {
    pub fn new(cin: usize, cout: usize, k: usize, stride: usize, offset: &mut usize) -> Self {
        let w = *offset;
        let b = w + cout * cin * k;
        *offset = b + cout;
        Conv1d { cin, cout, k, stride, pad: k / 2, w, b }
    }

    pub fn out_len(&self, lin: usize) -> usize {
        (lin + 2 * self.pad - self.k) / self.stride + 1
    }

    pub fn fan_in(&self) -> usize {
        self.cin * self.k
    }

    fn im2col(&self, x: &[f64], n: usize, lin: usize, lout: usize) -> Vec<f64> {
        let cols = n * lout;
        let mut col = vec![0.0; self.cin * self.k * cols];
        for ci in 0..self.cin {
            for kk in 0..self.k {
                let row = &mut col[(ci * self.k + kk) * cols..][..cols];
                for b in 0..n {
                    let src = &x[(ci * n + b) * lin..][..lin];
                    let dst = &mut row[b * lout..][..lout];
                    for (t, d) in dst.iter_mut().enumerate() {
                        let pos = (t * self.stride + kk) as isize - self.pad as isize;
                        if pos >= 0 && (pos as usize) < lin {
                            *d = src[pos as usize];
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im(&self, col: &[f64], n: usize, lin: usize, lout: usize) -> Vec<f64> {
        let cols = n * lout;
        let mut x = vec![0.0; self.cin * n * lin];
        for ci in 0..self.cin {
            for kk in 0..self.k {
                let row = &col[(ci * self.k + kk) * cols..][..cols];
                for b in 0..n {
                    let dst = &mut x[(ci * n + b) * lin..][..lin];
                    let src = &row[b * lout..][..lout];
                    for (t, s) in src.iter().enumerate() {
                        let pos = (t * self.stride + kk) as isize - self.pad as isize;
                        if pos >= 0 && (pos as usize) < lin {
                            dst[pos as usize] += s;
                        }
                    }
                }
            }
        }
        x
    }

    /// `x: [cin][n][lin]` → `[cout][n][lout]`.
    pub fn forward(&self, params: &[f64], x: &[f64], n: usize, lin: usize) -> Vec<f64> {
        let lout = self.out_len(lin);
        let cols = n * lout;
        let ck = self.cin * self.k;
        let mut y = vec![0.0; self.cout * cols];
        for (co, row) in y.chunks_exact_mut(cols).enumerate() {
            row.fill(params[self.b + co]);
        }
        let w = &params[self.w..self.w + self.cout * ck];
        if self.k == 1 && self.stride == 1 {
            gemm(self.cout, ck, cols, w, (ck, 1), x, (cols, 1), 1.0, &mut y);
        } else {
            let col = self.im2col(x, n, lin, lout);
            gemm(self.cout, ck, cols, w, (ck, 1), &col, (cols, 1), 1.0, &mut y);
        }
        y
    }

    /// Accumulates parameter gradients and returns `dL/dx` when asked.
    pub fn backward(
        &self,
        params: &[f64],
        grads: &mut [f64],
        x: &[f64],
        n: usize,
        lin: usize,
        dy: &[f64],
        need_dx: bool,
    ) -> Option<Vec<f64>> {
        let lout = self.out_len(lin);
        let cols = n * lout;
        let ck = self.cin * self.k;
        let direct = self.k == 1 && self.stride == 1;
        let col = if direct { None } else { Some(self.im2col(x, n, lin, lout)) };
        let col_ref = col.as_deref().unwrap_or(x);

        gemm(self.cout, cols, ck, dy, (cols, 1), col_ref, (1, cols), 1.0, &mut grads[self.w..self.w + self.cout * ck]);
        for (co, row) in dy.chunks_exact(cols).enumerate() {
            grads[self.b + co] += row.iter().sum::<f64>();
        }
        if !need_dx {
            return None;
        }
        let w = &params[self.w..self.w + self.cout * ck];
        let mut dcol = vec![0.0; ck * cols];
        gemm(ck, self.cout, cols, w, (1, ck), dy, (cols, 1), 0.0, &mut dcol);
        Some(if direct { dcol } else { self.col2im(&dcol, n, lin, lout) })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Linear {
    pub fan_in: usize,
    pub fan_out: usize,
    pub w: usize,
    pub b: usize,
}

impl Linear {
    pub fn new(fan_in: usize, fan_out: usize, offset: &mut usize) -> Self {
        let w = *offset;
        let b = w + fan_in * fan_out;
        *offset = b + fan_out;
        Linear { fan_in, fan_out, w, b }
    }

    /// `x: [n][in]` → `[n][out]`.
    pub fn forward(&self, params: &[f64], x: &[f64], n: usize) -> Vec<f64> {
        let bias = &params[self.b..self.b + self.fan_out];
        let mut y: Vec<f64> = bias.iter().copied().cycle().take(n * self.fan_out).collect();
        let w = &params[self.w..self.w + self.fan_in * self.fan_out];
        gemm(n, self.fan_in, self.fan_out, x, (self.fan_in, 1), w, (1, self.fan_in), 1.0, &mut y);
        y
    }

    pub fn backward(
        &self,
        params: &[f64],
        grads: &mut [f64],
        x: &[f64],
        n: usize,
        dy: &[f64],
        need_dx: bool,
    ) -> Option<Vec<f64>> {
        let (fi, fo) = (self.fan_in, self.fan_out);
        gemm(fo, n, fi, dy, (1, fo), x, (fi, 1), 1.0, &mut grads[self.w..self.w + fi * fo]);
        for row in dy.chunks_exact(fo) {
            for (g, d) in grads[self.b..self.b + fo].iter_mut().zip(row) {
                *g += d;
            }
        }
        if !need_dx {
            return None;
        }
        let mut dx = vec![0.0; n * fi];
        gemm(n, fo, fi, dy, (fo, 1), &params[self.w..self.w + fi * fo], (fi, 1), 0.0, &mut dx);
        Some(dx)
    }
}

pub(crate) fn relu_in_place(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}

/// Zeroes `grad` wherever the ReLU output was not positive.
pub(crate) fn relu_mask(grad: &mut [f64], out: &[f64]) {
    for (g, &o) in grad.iter_mut().zip(out) {
        if o <= 0.0 {
            *g = 0.0;
        }
    }
}
