//! Convolution and transposed convolution via im2col / col2im and a single
//! large matrix multiply per layer.

use ndarray::{Array2, Array4};
use rand::Rng;

use super::{normal_init, Param, T4};

/// Output spatial size of a convolution.
fn conv_out(size: usize, k: usize, stride: usize, pad: usize) -> usize {
    (size + 2 * pad - k) / stride + 1
}

/// Gather convolution patches: (N, C, H, W) -> (N*OH*OW, C*K*K).
fn im2col(x: &T4, k: usize, stride: usize, pad: usize) -> Array2<f32> {
    let (n, c, h, w) = x.dim();
    let oh = conv_out(h, k, stride, pad);
    let ow = conv_out(w, k, stride, pad);
    let mut cols = Array2::<f32>::zeros((n * oh * ow, c * k * k));
    for ni in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = (ni * oh + oy) * ow + ox;
                let mut col_idx = 0usize;
                for ci in 0..c {
                    for ky in 0..k {
                        let iy = (oy * stride + ky) as i64 - pad as i64;
                        if iy < 0 || iy >= h as i64 {
                            col_idx += k;
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * stride + kx) as i64 - pad as i64;
                            if ix >= 0 && ix < w as i64 {
                                cols[[row, col_idx]] =
                                    x[[ni, ci, iy as usize, ix as usize]];
                            }
                            col_idx += 1;
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Scatter-add patches back: adjoint of [`im2col`].
fn col2im(
    cols: &Array2<f32>,
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
) -> T4 {
    let oh = conv_out(h, k, stride, pad);
    let ow = conv_out(w, k, stride, pad);
    let mut x = Array4::<f32>::zeros((n, c, h, w));
    for ni in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = (ni * oh + oy) * ow + ox;
                let mut col_idx = 0usize;
                for ci in 0..c {
                    for ky in 0..k {
                        let iy = (oy * stride + ky) as i64 - pad as i64;
                        if iy < 0 || iy >= h as i64 {
                            col_idx += k;
                            continue;
                        }
                        for kx in 0..k {
                            let ix = (ox * stride + kx) as i64 - pad as i64;
                            if ix >= 0 && ix < w as i64 {
                                x[[ni, ci, iy as usize, ix as usize]] +=
                                    cols[[row, col_idx]];
                            }
                            col_idx += 1;
                        }
                    }
                }
            }
        }
    }
    x
}

/// (N, C, H, W) -> (N*H*W, C) and back, the layout used on the matmul side.
fn to_rows(x: &T4) -> Array2<f32> {
    let (n, c, h, w) = x.dim();
    let mut out = Array2::<f32>::zeros((n * h * w, c));
    for ni in 0..n {
        for ci in 0..c {
            for y in 0..h {
                for xi in 0..w {
                    out[[(ni * h + y) * w + xi, ci]] = x[[ni, ci, y, xi]];
                }
            }
        }
    }
    out
}

fn from_rows(rows: &Array2<f32>, n: usize, c: usize, h: usize, w: usize) -> T4 {
    let mut out = Array4::<f32>::zeros((n, c, h, w));
    for ni in 0..n {
        for ci in 0..c {
            for y in 0..h {
                for xi in 0..w {
                    out[[ni, ci, y, xi]] = rows[[(ni * h + y) * w + xi, ci]];
                }
            }
        }
    }
    out
}

/// 2D convolution. Weight layout: (C_in*K*K, C_out).
#[derive(Debug, Clone)]
pub struct Conv2d {
    pub w: Param,
    pub b: Param,
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    cache_cols: Option<Array2<f32>>,
    cache_in: (usize, usize, usize, usize),
}

impl Conv2d {
    pub fn new(
        rng: &mut impl Rng,
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        Self {
            w: Param::new(normal_init(rng, &[in_c * k * k, out_c], 0.02)),
            b: Param::new(ndarray::ArrayD::zeros(ndarray::IxDyn(&[out_c]))),
            in_c,
            out_c,
            k,
            stride,
            pad,
            cache_cols: None,
            cache_in: (0, 0, 0, 0),
        }
    }

    pub fn forward(&mut self, x: &T4, train: bool) -> T4 {
        let (n, c, h, w) = x.dim();
        debug_assert_eq!(c, self.in_c);
        let oh = conv_out(h, self.k, self.stride, self.pad);
        let ow = conv_out(w, self.k, self.stride, self.pad);
        let cols = im2col(x, self.k, self.stride, self.pad);
        let w2 = self
            .w
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("conv weight is 2-d");
        let mut y = cols.dot(&w2);
        for mut row in y.rows_mut() {
            for (o, v) in row.iter_mut().enumerate() {
                *v += self.b.value[[o]];
            }
        }
        if train {
            self.cache_cols = Some(cols);
            self.cache_in = (n, c, h, w);
        }
        from_rows(&y, n, self.out_c, oh, ow)
    }

    pub fn backward(&mut self, dy: &T4) -> T4 {
        let cols = self.cache_cols.take().expect("forward(train) before backward");
        let (n, c, h, w) = self.cache_in;
        let dy2 = to_rows(dy);
        let w2 = self
            .w
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("conv weight is 2-d");
        let dw = cols.t().dot(&dy2);
        self.w.grad.iter_mut().zip(dw.iter()).for_each(|(g, d)| *g += d);
        for row in dy2.rows() {
            for (o, v) in row.iter().enumerate() {
                self.b.grad[[o]] += v;
            }
        }
        let dcols = dy2.dot(&w2.t());
        col2im(&dcols, n, c, h, w, self.k, self.stride, self.pad)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.b]
    }
}

/// 2D transposed convolution (fractionally-strided): the adjoint of a
/// convolution with the same (k, stride, pad). Output spatial size is
/// (in - 1) * stride - 2*pad + k. Weight layout: (C_in, C_out*K*K).
#[derive(Debug, Clone)]
pub struct ConvTranspose2d {
    pub w: Param,
    pub b: Param,
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    cache_rows: Option<Array2<f32>>,
    cache_in: (usize, usize, usize, usize),
}

impl ConvTranspose2d {
    pub fn new(
        rng: &mut impl Rng,
        in_c: usize,
        out_c: usize,
        k: usize,
        stride: usize,
        pad: usize,
    ) -> Self {
        Self {
            w: Param::new(normal_init(rng, &[in_c, out_c * k * k], 0.02)),
            b: Param::new(ndarray::ArrayD::zeros(ndarray::IxDyn(&[out_c]))),
            in_c,
            out_c,
            k,
            stride,
            pad,
            cache_rows: None,
            cache_in: (0, 0, 0, 0),
        }
    }

    pub fn out_size(&self, in_size: usize) -> usize {
        (in_size - 1) * self.stride + self.k - 2 * self.pad
    }

    pub fn forward(&mut self, x: &T4, train: bool) -> T4 {
        let (n, c, h, w) = x.dim();
        debug_assert_eq!(c, self.in_c);
        let oh = self.out_size(h);
        let ow = self.out_size(w);
        let rows = to_rows(x);
        let w2 = self
            .w
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("deconv weight is 2-d");
        let cols = rows.dot(&w2);
        let mut y = col2im(&cols, n, self.out_c, oh, ow, self.k, self.stride, self.pad);
        for ni in 0..n {
            for o in 0..self.out_c {
                let bias = self.b.value[[o]];
                y.slice_mut(ndarray::s![ni, o, .., ..]).mapv_inplace(|v| v + bias);
            }
        }
        if train {
            self.cache_rows = Some(rows);
            self.cache_in = (n, c, h, w);
        }
        y
    }

    pub fn backward(&mut self, dy: &T4) -> T4 {
        let rows = self.cache_rows.take().expect("forward(train) before backward");
        let (n, c, h, w) = self.cache_in;
        let dcols = im2col(dy, self.k, self.stride, self.pad);
        let w2 = self
            .w
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("deconv weight is 2-d");
        let dw = rows.t().dot(&dcols);
        self.w.grad.iter_mut().zip(dw.iter()).for_each(|(g, d)| *g += d);
        let (_, _, dh, dw_) = dy.dim();
        for ni in 0..n {
            for o in 0..self.out_c {
                let mut acc = 0.0;
                for y in 0..dh {
                    for xi in 0..dw_ {
                        acc += dy[[ni, o, y, xi]];
                    }
                }
                self.b.grad[[o]] += acc;
            }
        }
        let drows = dcols.dot(&w2.t());
        from_rows(&drows, n, c, h, w)
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.b]
    }
}
