//! Non-convolutional layers: batch norm, fully-connected, and activations.

use ndarray::{Array1, Array4, ArrayD, IxDyn};
use rand::Rng;

use super::{normal_init, Param, T2, T4};

/// Per-channel batch normalization over (N, H, W) with running statistics
/// for eval mode.
#[derive(Debug, Clone)]
pub struct BatchNorm2d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Array1<f32>,
    pub running_var: Array1<f32>,
    pub momentum: f32,
    pub eps: f32,
    cache: Option<BnCache>,
}

#[derive(Debug, Clone)]
struct BnCache {
    x_hat: T4,
    inv_std: Array1<f32>,
}

impl BatchNorm2d {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Param::new(ArrayD::from_elem(IxDyn(&[channels]), 1.0)),
            beta: Param::new(ArrayD::zeros(IxDyn(&[channels]))),
            running_mean: Array1::zeros(channels),
            running_var: Array1::from_elem(channels, 1.0),
            momentum: 0.1,
            eps: 1e-5,
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &T4, train: bool) -> T4 {
        let (n, c, h, w) = x.dim();
        let count = (n * h * w) as f32;
        let mut y = Array4::zeros((n, c, h, w));
        if train {
            let mut inv_std = Array1::zeros(c);
            let mut x_hat = Array4::zeros((n, c, h, w));
            for ci in 0..c {
                let slice = x.slice(ndarray::s![.., ci, .., ..]);
                let mean = slice.sum() / count;
                let var = slice.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / count;
                let is = 1.0 / (var + self.eps).sqrt();
                inv_std[ci] = is;
                self.running_mean[ci] =
                    (1.0 - self.momentum) * self.running_mean[ci] + self.momentum * mean;
                self.running_var[ci] =
                    (1.0 - self.momentum) * self.running_var[ci] + self.momentum * var;
                let g = self.gamma.value[[ci]];
                let b = self.beta.value[[ci]];
                for ni in 0..n {
                    for yy in 0..h {
                        for xx in 0..w {
                            let xh = (x[[ni, ci, yy, xx]] - mean) * is;
                            x_hat[[ni, ci, yy, xx]] = xh;
                            y[[ni, ci, yy, xx]] = g * xh + b;
                        }
                    }
                }
            }
            self.cache = Some(BnCache { x_hat, inv_std });
        } else {
            for ci in 0..c {
                let mean = self.running_mean[ci];
                let is = 1.0 / (self.running_var[ci] + self.eps).sqrt();
                let g = self.gamma.value[[ci]];
                let b = self.beta.value[[ci]];
                for ni in 0..n {
                    for yy in 0..h {
                        for xx in 0..w {
                            y[[ni, ci, yy, xx]] = g * (x[[ni, ci, yy, xx]] - mean) * is + b;
                        }
                    }
                }
            }
        }
        y
    }

    pub fn backward(&mut self, dy: &T4) -> T4 {
        let cache = self.cache.take().expect("forward(train) before backward");
        let (n, c, h, w) = dy.dim();
        let count = (n * h * w) as f32;
        let mut dx = Array4::zeros((n, c, h, w));
        for ci in 0..c {
            let g = self.gamma.value[[ci]];
            let is = cache.inv_std[ci];
            let mut sum_dy = 0.0f32;
            let mut sum_dy_xhat = 0.0f32;
            for ni in 0..n {
                for yy in 0..h {
                    for xx in 0..w {
                        let d = dy[[ni, ci, yy, xx]];
                        sum_dy += d;
                        sum_dy_xhat += d * cache.x_hat[[ni, ci, yy, xx]];
                    }
                }
            }
            self.gamma.grad[[ci]] += sum_dy_xhat;
            self.beta.grad[[ci]] += sum_dy;
            for ni in 0..n {
                for yy in 0..h {
                    for xx in 0..w {
                        let d = dy[[ni, ci, yy, xx]];
                        let xh = cache.x_hat[[ni, ci, yy, xx]];
                        dx[[ni, ci, yy, xx]] = g * is / count
                            * (count * d - sum_dy - xh * sum_dy_xhat);
                    }
                }
            }
        }
        dx
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.gamma, &mut self.beta]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.gamma, &self.beta]
    }
}

/// Fully-connected layer: y = x W + b with W of shape (in, out).
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Param,
    pub b: Param,
    cache_x: Option<T2>,
}

impl Linear {
    pub fn new(rng: &mut impl Rng, input: usize, output: usize) -> Self {
        Self {
            w: Param::new(normal_init(rng, &[input, output], 0.02)),
            b: Param::new(ArrayD::zeros(IxDyn(&[output]))),
            cache_x: None,
        }
    }

    pub fn forward(&mut self, x: &T2, train: bool) -> T2 {
        let w2 = self
            .w
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("linear weight is 2-d");
        let mut y = x.dot(&w2);
        for mut row in y.rows_mut() {
            for (o, v) in row.iter_mut().enumerate() {
                *v += self.b.value[[o]];
            }
        }
        if train {
            self.cache_x = Some(x.clone());
        }
        y
    }

    pub fn backward(&mut self, dy: &T2) -> T2 {
        let x = self.cache_x.take().expect("forward(train) before backward");
        let w2 = self
            .w
            .value
            .view()
            .into_dimensionality::<ndarray::Ix2>()
            .expect("linear weight is 2-d");
        let dw = x.t().dot(dy);
        self.w.grad.iter_mut().zip(dw.iter()).for_each(|(g, d)| *g += d);
        for row in dy.rows() {
            for (o, v) in row.iter().enumerate() {
                self.b.grad[[o]] += v;
            }
        }
        dy.dot(&w2.t())
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.w, &mut self.b]
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.w, &self.b]
    }
}

/// Leaky ReLU with configurable negative slope (0.2 is the GAN default).
#[derive(Debug, Clone)]
pub struct LeakyRelu {
    pub slope: f32,
    mask: Option<ArrayD<f32>>,
}

impl LeakyRelu {
    pub fn new(slope: f32) -> Self {
        Self { slope, mask: None }
    }

    pub fn forward4(&mut self, x: &T4, train: bool) -> T4 {
        let y = x.mapv(|v| if v >= 0.0 { v } else { self.slope * v });
        if train {
            self.mask =
                Some(x.mapv(|v| if v >= 0.0 { 1.0 } else { self.slope }).into_dyn());
        }
        y
    }

    pub fn backward4(&mut self, dy: &T4) -> T4 {
        let mask = self.mask.take().expect("forward(train) before backward");
        let m = mask.into_dimensionality::<ndarray::Ix4>().expect("4-d mask");
        dy * &m
    }
}

/// Standard ReLU; works on both 2-d and 4-d tensors.
#[derive(Debug, Clone)]
pub struct Relu {
    mask: Option<ArrayD<f32>>,
}

impl Relu {
    pub fn new() -> Self {
        Self { mask: None }
    }

    pub fn forward2(&mut self, x: &T2, train: bool) -> T2 {
        let y = x.mapv(|v| v.max(0.0));
        if train {
            self.mask = Some(x.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }).into_dyn());
        }
        y
    }

    pub fn backward2(&mut self, dy: &T2) -> T2 {
        let mask = self.mask.take().expect("forward(train) before backward");
        let m = mask.into_dimensionality::<ndarray::Ix2>().expect("2-d mask");
        dy * &m
    }

    pub fn forward4(&mut self, x: &T4, train: bool) -> T4 {
        let y = x.mapv(|v| v.max(0.0));
        if train {
            self.mask = Some(x.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }).into_dyn());
        }
        y
    }

    pub fn backward4(&mut self, dy: &T4) -> T4 {
        let mask = self.mask.take().expect("forward(train) before backward");
        let m = mask.into_dimensionality::<ndarray::Ix4>().expect("4-d mask");
        dy * &m
    }
}

impl Default for Relu {
    fn default() -> Self {
        Self::new()
    }
}

/// Elementwise sigmoid on 4-d tensors.
#[derive(Debug, Clone)]
pub struct Sigmoid {
    out: Option<T4>,
}

impl Sigmoid {
    pub fn new() -> Self {
        Self { out: None }
    }

    pub fn forward4(&mut self, x: &T4, train: bool) -> T4 {
        let y = x.mapv(|v| 1.0 / (1.0 + (-v).exp()));
        if train {
            self.out = Some(y.clone());
        }
        y
    }

    pub fn backward4(&mut self, dy: &T4) -> T4 {
        let y = self.out.take().expect("forward(train) before backward");
        dy * &y.mapv(|s| s * (1.0 - s))
    }
}

impl Default for Sigmoid {
    fn default() -> Self {
        Self::new()
    }
}
