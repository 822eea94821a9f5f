//! Minimal CPU neural-network stack: conv / transposed-conv / batch-norm /
//! linear layers with explicit backward passes, Adam, and flat parameter
//! serialization. Heavy lifting goes through `ndarray`'s matrix multiply.

mod conv;
mod layers;
mod store;

pub use conv::{Conv2d, ConvTranspose2d};
pub use layers::{BatchNorm2d, LeakyRelu, Linear, Relu, Sigmoid};
pub use store::TensorStore;

use ndarray::{Array2, Array4, ArrayD, IxDyn};
use rand::Rng;

/// Batched image tensor (N, C, H, W).
pub type T4 = Array4<f32>;
/// Batched feature matrix (N, F).
pub type T2 = Array2<f32>;

/// One learnable tensor with gradient and Adam state.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: ArrayD<f32>,
    pub grad: ArrayD<f32>,
    m: ArrayD<f32>,
    v: ArrayD<f32>,
}

impl Param {
    pub fn new(value: ArrayD<f32>) -> Self {
        let zeros = ArrayD::zeros(value.raw_dim());
        Self { grad: zeros.clone(), m: zeros.clone(), v: zeros, value }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Adam with the usual bias correction. `t` counts optimizer steps.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    t: i32,
}

impl Adam {
    pub fn new(lr: f32) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0 }
    }

    pub fn step(&mut self, params: &mut [&mut Param]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for p in params.iter_mut() {
            for ((m, v), (g, x)) in p
                .m
                .iter_mut()
                .zip(p.v.iter_mut())
                .zip(p.grad.iter().zip(p.value.iter_mut()))
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let mh = *m / bc1;
                let vh = *v / bc2;
                *x -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

/// Gaussian init (Box-Muller) with the DCGAN-style std of 0.02 by default.
pub fn normal_init(rng: &mut impl Rng, shape: &[usize], std: f32) -> ArrayD<f32> {
    let n = shape.iter().product();
    let mut data = Vec::with_capacity(n);
    while data.len() < n {
        let u1: f64 = rng.random::<f64>().max(1e-12);
        let u2: f64 = rng.random();
        let r = (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * u2;
        data.push((r * th.cos()) as f32 * std);
        if data.len() < n {
            data.push((r * th.sin()) as f32 * std);
        }
    }
    ArrayD::from_shape_vec(IxDyn(shape), data).expect("shape matches length")
}

/// Flatten (N, C, H, W) to (N, C*H*W) preserving channel-major order.
pub fn flatten(x: &T4) -> T2 {
    let (n, c, h, w) = x.dim();
    let v: Vec<f32> = x.iter().cloned().collect();
    Array2::from_shape_vec((n, c * h * w), v).expect("contiguous")
}

/// Inverse of [`flatten`].
pub fn unflatten(x: &T2, c: usize, h: usize, w: usize) -> T4 {
    let n = x.nrows();
    let v: Vec<f32> = x.iter().cloned().collect();
    Array4::from_shape_vec((n, c, h, w), v).expect("contiguous")
}

/// Concatenate two tensors along the channel axis.
pub fn concat_channels(a: &T4, b: &T4) -> T4 {
    ndarray::concatenate(ndarray::Axis(1), &[a.view(), b.view()]).expect("matching dims")
}

/// Split a channel-concatenated gradient back into its two parts.
pub fn split_channels(x: &T4, c_first: usize) -> (T4, T4) {
    let a = x.slice(ndarray::s![.., ..c_first, .., ..]).to_owned();
    let b = x.slice(ndarray::s![.., c_first.., .., ..]).to_owned();
    (a, b)
}
