//! PatchGAN discriminator over (sim, candidate) image pairs.
//!
//! Three stride-2 4x4 convolutions (2 -> 8 -> 16 -> 32) followed by a
//! stride-1 3x3 head produce an 8 x 8 grid of patch scores for a 64 px
//! input: image_size / 2^3 per side. Least-squares GAN, so no output
//! nonlinearity.

use ndarray::ArrayD;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{BatchNorm2d, Conv2d, LeakyRelu, Param, TensorStore, T4};

pub struct Discriminator {
    c1: Conv2d,
    c2: Conv2d,
    c3: Conv2d,
    head: Conv2d,
    bn2: BatchNorm2d,
    bn3: BatchNorm2d,
    a1: LeakyRelu,
    a2: LeakyRelu,
    a3: LeakyRelu,
}

impl Discriminator {
    pub fn new(rng: &mut impl Rng) -> Self {
        Self {
            c1: Conv2d::new(rng, 2, 8, 4, 2, 1),
            c2: Conv2d::new(rng, 8, 16, 4, 2, 1),
            c3: Conv2d::new(rng, 16, 32, 4, 2, 1),
            head: Conv2d::new(rng, 32, 1, 3, 1, 1),
            bn2: BatchNorm2d::new(16),
            bn3: BatchNorm2d::new(32),
            a1: LeakyRelu::new(0.2),
            a2: LeakyRelu::new(0.2),
            a3: LeakyRelu::new(0.2),
        }
    }

    /// Patch scores for a batch of channel-concatenated (sim, candidate)
    /// pairs: (N, 2, S, S) -> (N, 1, S/8, S/8).
    pub fn forward(&mut self, pair: &T4, train: bool) -> T4 {
        let h1 = self.a1.forward4(&self.c1.forward(pair, train), train);
        let h2 = self
            .a2
            .forward4(&self.bn2.forward(&self.c2.forward(&h1, train), train), train);
        let h3 = self
            .a3
            .forward4(&self.bn3.forward(&self.c3.forward(&h2, train), train), train);
        self.head.forward(&h3, train)
    }

    /// Accumulate parameter gradients; returns the gradient with respect to
    /// the input pair (the candidate channel feeds the generator).
    pub fn backward(&mut self, dscores: &T4) -> T4 {
        let dh3 = self.head.backward(dscores);
        let dh2 = self
            .c3
            .backward(&self.bn3.backward(&self.a3.backward4(&dh3)));
        let dh1 = self
            .c2
            .backward(&self.bn2.backward(&self.a2.backward4(&dh2)));
        self.c1.backward(&self.a1.backward4(&dh1))
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut ps = Vec::new();
        ps.extend(self.c1.params_mut());
        ps.extend(self.c2.params_mut());
        ps.extend(self.c3.params_mut());
        ps.extend(self.head.params_mut());
        ps.extend(self.bn2.params_mut());
        ps.extend(self.bn3.params_mut());
        ps
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn export_state(&mut self, store: &mut TensorStore, prefix: &str) {
        let names = Self::param_names();
        let values: Vec<ArrayD<f32>> =
            self.params_mut().iter().map(|p| p.value.clone()).collect();
        for (name, value) in names.iter().zip(values) {
            store.insert(&format!("{prefix}.{name}"), value);
        }
        for (name, bn) in [("bn2", &self.bn2), ("bn3", &self.bn3)] {
            store.insert(&format!("{prefix}.{name}.running_mean"), bn.running_mean.clone().into_dyn());
            store.insert(&format!("{prefix}.{name}.running_var"), bn.running_var.clone().into_dyn());
        }
    }

    pub fn import_state(&mut self, store: &TensorStore, prefix: &str) -> Result<()> {
        let names = Self::param_names();
        for (name, p) in names.iter().zip(self.params_mut()) {
            let t = store.get(&format!("{prefix}.{name}"))?;
            if t.shape() != p.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {prefix}.{name}: shape {:?} != expected {:?}",
                    t.shape(),
                    p.value.shape()
                )));
            }
            p.value = t.clone();
        }
        for (name, bn) in [("bn2", &mut self.bn2), ("bn3", &mut self.bn3)] {
            bn.running_mean = store
                .get(&format!("{prefix}.{name}.running_mean"))?
                .clone()
                .into_dimensionality()
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
            bn.running_var = store
                .get(&format!("{prefix}.{name}.running_var"))?
                .clone()
                .into_dimensionality()
                .map_err(|e| Error::Checkpoint(e.to_string()))?;
        }
        Ok(())
    }

    fn param_names() -> Vec<String> {
        let mut names = Vec::new();
        for layer in ["c1", "c2", "c3", "head"] {
            names.push(format!("{layer}.w"));
            names.push(format!("{layer}.b"));
        }
        for layer in ["bn2", "bn3"] {
            names.push(format!("{layer}.gamma"));
            names.push(format!("{layer}.beta"));
        }
        names
    }
}
