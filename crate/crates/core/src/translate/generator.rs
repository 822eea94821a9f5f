//! U-Net generator with optional shear conditioning.
//!
//! Encoder: four stride-2 4x4 convolutions (1 -> 8 -> 16 -> 32 -> 64), so a
//! 64 px input reaches a 64 x 4 x 4 bottleneck. The shear-conditioned variant
//! injects the 4-dim shear code twice: broadcast as constant input planes, so
//! the skip connections carry shear-aware features, and concatenated to the
//! flattened bottleneck through a fully-connected layer. The unconditioned
//! variant sees the image alone. Decoder mirrors the encoder with skip
//! connections and a sigmoid output.

use ndarray::ArrayD;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{
    concat_channels, flatten, split_channels, unflatten, BatchNorm2d, Conv2d, ConvTranspose2d,
    LeakyRelu, Linear, Param, Relu, Sigmoid, TensorStore, T2, T4,
};

/// Encoder channel widths; index 0 is the input image.
const CH: [usize; 5] = [1, 8, 16, 32, 64];
/// Bottleneck spatial size for a 64 px input.
const BOTTLENECK: usize = 4;

pub struct Generator {
    /// Whether the bottleneck is conditioned on the shear code.
    pub conditioned: bool,
    pub image_size: usize,
    enc1: Conv2d,
    enc2: Conv2d,
    enc3: Conv2d,
    enc4: Conv2d,
    ebn2: BatchNorm2d,
    ebn3: BatchNorm2d,
    ebn4: BatchNorm2d,
    eact1: LeakyRelu,
    eact2: LeakyRelu,
    eact3: LeakyRelu,
    eact4: LeakyRelu,
    fc: Option<Linear>,
    fcact: Relu,
    dec1: ConvTranspose2d,
    dec2: ConvTranspose2d,
    dec3: ConvTranspose2d,
    dec4: ConvTranspose2d,
    dbn1: BatchNorm2d,
    dbn2: BatchNorm2d,
    dbn3: BatchNorm2d,
    dact1: Relu,
    dact2: Relu,
    dact3: Relu,
    out: Sigmoid,
    /// Set by forward(train); consumed by backward.
    ready: bool,
}

/// Dimension of the shear conditioning code.
pub const COND_DIM: usize = 4;

/// Append the conditioning code to the image as constant channels.
fn broadcast_cond_planes(x: &T4, cond: &T2) -> T4 {
    let (b, c, h, w) = x.dim();
    let mut out = ndarray::Array4::zeros((b, c + COND_DIM, h, w));
    out.slice_mut(ndarray::s![.., ..c, .., ..]).assign(x);
    for i in 0..b {
        for k in 0..COND_DIM {
            out.slice_mut(ndarray::s![i, c + k, .., ..]).fill(cond[[i, k]]);
        }
    }
    out
}

impl Generator {
    pub fn new(rng: &mut impl Rng, conditioned: bool, image_size: usize) -> Result<Self> {
        if image_size != 64 {
            return Err(Error::InvalidParameter {
                what: "Generator",
                why: format!("image_size must be 64 for this architecture, got {image_size}"),
            });
        }
        let flat = CH[4] * BOTTLENECK * BOTTLENECK;
        let in_ch = CH[0] + if conditioned { COND_DIM } else { 0 };
        Ok(Self {
            conditioned,
            image_size,
            enc1: Conv2d::new(rng, in_ch, CH[1], 4, 2, 1),
            enc2: Conv2d::new(rng, CH[1], CH[2], 4, 2, 1),
            enc3: Conv2d::new(rng, CH[2], CH[3], 4, 2, 1),
            enc4: Conv2d::new(rng, CH[3], CH[4], 4, 2, 1),
            ebn2: BatchNorm2d::new(CH[2]),
            ebn3: BatchNorm2d::new(CH[3]),
            ebn4: BatchNorm2d::new(CH[4]),
            eact1: LeakyRelu::new(0.2),
            eact2: LeakyRelu::new(0.2),
            eact3: LeakyRelu::new(0.2),
            eact4: LeakyRelu::new(0.2),
            fc: conditioned.then(|| Linear::new(rng, flat + COND_DIM, flat)),
            fcact: Relu::new(),
            dec1: ConvTranspose2d::new(rng, CH[4], CH[3], 4, 2, 1),
            dec2: ConvTranspose2d::new(rng, CH[3] * 2, CH[2], 4, 2, 1),
            dec3: ConvTranspose2d::new(rng, CH[2] * 2, CH[1], 4, 2, 1),
            dec4: ConvTranspose2d::new(rng, CH[1] * 2, CH[0], 4, 2, 1),
            dbn1: BatchNorm2d::new(CH[3]),
            dbn2: BatchNorm2d::new(CH[2]),
            dbn3: BatchNorm2d::new(CH[1]),
            dact1: Relu::new(),
            dact2: Relu::new(),
            dact3: Relu::new(),
            out: Sigmoid::new(),
            ready: false,
        })
    }

    /// Translate a batch of sim images. `cond` is the normalized shear code,
    /// ignored by the unconditioned variant.
    pub fn forward(&mut self, x: &T4, cond: &T2, train: bool) -> T4 {
        let x_in = if self.conditioned {
            broadcast_cond_planes(x, cond)
        } else {
            x.clone()
        };
        let h1 = self.eact1.forward4(&self.enc1.forward(&x_in, train), train);
        let h2 = self
            .eact2
            .forward4(&self.ebn2.forward(&self.enc2.forward(&h1, train), train), train);
        let h3 = self
            .eact3
            .forward4(&self.ebn3.forward(&self.enc3.forward(&h2, train), train), train);
        let h4 = self
            .eact4
            .forward4(&self.ebn4.forward(&self.enc4.forward(&h3, train), train), train);

        let b = if let Some(fc) = self.fc.as_mut() {
            let flat = flatten(&h4);
            let joined = ndarray::concatenate(
                ndarray::Axis(1),
                &[flat.view(), cond.view()],
            )
            .expect("batch sizes match");
            let z = self.fcact.forward2(&fc.forward(&joined, train), train);
            unflatten(&z, CH[4], BOTTLENECK, BOTTLENECK)
        } else {
            h4
        };

        let u1 = self
            .dact1
            .forward4(&self.dbn1.forward(&self.dec1.forward(&b, train), train), train);
        let c1 = concat_channels(&u1, &h3);
        let u2 = self
            .dact2
            .forward4(&self.dbn2.forward(&self.dec2.forward(&c1, train), train), train);
        let c2 = concat_channels(&u2, &h2);
        let u3 = self
            .dact3
            .forward4(&self.dbn3.forward(&self.dec3.forward(&c2, train), train), train);
        let c3 = concat_channels(&u3, &h1);
        let y = self.out.forward4(&self.dec4.forward(&c3, train), train);

        if train {
            self.ready = true;
        }
        y
    }

    /// Accumulate parameter gradients and return the input-image gradient.
    pub fn backward(&mut self, dy: &T4) -> T4 {
        assert!(
            std::mem::take(&mut self.ready),
            "forward(train) before backward"
        );
        let dc3 = self.dec4.backward(&self.out.backward4(dy));
        let (du3, dh1_skip) = split_channels(&dc3, CH[1]);
        let dc2 = self
            .dec3
            .backward(&self.dbn3.backward(&self.dact3.backward4(&du3)));
        let (du2, dh2_skip) = split_channels(&dc2, CH[2]);
        let dc1 = self
            .dec2
            .backward(&self.dbn2.backward(&self.dact2.backward4(&du2)));
        let (du1, dh3_skip) = split_channels(&dc1, CH[3]);
        let db = self
            .dec1
            .backward(&self.dbn1.backward(&self.dact1.backward4(&du1)));

        let dh4 = if let Some(fc) = self.fc.as_mut() {
            let dz = flatten(&db);
            let djoined = fc.backward(&self.fcact.backward2(&dz));
            let flat = CH[4] * BOTTLENECK * BOTTLENECK;
            let dflat = djoined.slice(ndarray::s![.., ..flat]).to_owned();
            unflatten(&dflat, CH[4], BOTTLENECK, BOTTLENECK)
        } else {
            db
        };

        let dh3 = self
            .enc4
            .backward(&self.ebn4.backward(&self.eact4.backward4(&dh4)))
            + dh3_skip;
        let dh2 = self
            .enc3
            .backward(&self.ebn3.backward(&self.eact3.backward4(&dh3)))
            + dh2_skip;
        let dh1 = self
            .enc2
            .backward(&self.ebn2.backward(&self.eact2.backward4(&dh2)))
            + dh1_skip;
        let dx_in = self.enc1.backward(&self.eact1.backward4(&dh1));
        // Drop the gradients of the broadcast conditioning planes.
        dx_in.slice(ndarray::s![.., ..CH[0], .., ..]).to_owned()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut ps = Vec::new();
        ps.extend(self.enc1.params_mut());
        ps.extend(self.enc2.params_mut());
        ps.extend(self.enc3.params_mut());
        ps.extend(self.enc4.params_mut());
        ps.extend(self.ebn2.params_mut());
        ps.extend(self.ebn3.params_mut());
        ps.extend(self.ebn4.params_mut());
        if let Some(fc) = self.fc.as_mut() {
            ps.extend(fc.params_mut());
        }
        ps.extend(self.dec1.params_mut());
        ps.extend(self.dec2.params_mut());
        ps.extend(self.dec3.params_mut());
        ps.extend(self.dec4.params_mut());
        ps.extend(self.dbn1.params_mut());
        ps.extend(self.dbn2.params_mut());
        ps.extend(self.dbn3.params_mut());
        ps
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn bn_fields(&mut self) -> Vec<(&'static str, &mut BatchNorm2d)> {
        vec![
            ("ebn2", &mut self.ebn2),
            ("ebn3", &mut self.ebn3),
            ("ebn4", &mut self.ebn4),
            ("dbn1", &mut self.dbn1),
            ("dbn2", &mut self.dbn2),
            ("dbn3", &mut self.dbn3),
        ]
    }

    /// Copy all learned state (weights plus batch-norm running statistics)
    /// into `store`, each tensor prefixed with `prefix`.
    pub fn export_state(&mut self, store: &mut TensorStore, prefix: &str) {
        let names = self.param_names();
        let values: Vec<ArrayD<f32>> =
            self.params_mut().iter().map(|p| p.value.clone()).collect();
        for (name, value) in names.iter().zip(values) {
            store.insert(&format!("{prefix}.{name}"), value);
        }
        for (name, bn) in self.bn_fields() {
            store.insert(&format!("{prefix}.{name}.running_mean"), bn.running_mean.clone().into_dyn());
            store.insert(&format!("{prefix}.{name}.running_var"), bn.running_var.clone().into_dyn());
        }
    }

    pub fn import_state(&mut self, store: &TensorStore, prefix: &str) -> Result<()> {
        let names = self.param_names();
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
        for (name, bn) in self.bn_fields() {
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

    fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for layer in ["enc1", "enc2", "enc3", "enc4"] {
            names.push(format!("{layer}.w"));
            names.push(format!("{layer}.b"));
        }
        for layer in ["ebn2", "ebn3", "ebn4"] {
            names.push(format!("{layer}.gamma"));
            names.push(format!("{layer}.beta"));
        }
        if self.conditioned {
            names.push("fc.w".into());
            names.push("fc.b".into());
        }
        for layer in ["dec1", "dec2", "dec3", "dec4"] {
            names.push(format!("{layer}.w"));
            names.push(format!("{layer}.b"));
        }
        for layer in ["dbn1", "dbn2", "dbn3"] {
            names.push(format!("{layer}.gamma"));
            names.push(format!("{layer}.beta"));
        }
        names
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array2, Array4};
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn batch(n: usize) -> (T4, T2) {
        let x = Array4::from_shape_fn((n, 1, 64, 64), |(b, _, h, w)| {
            ((b * 31 + h * 7 + w * 3) % 17) as f32 / 17.0
        });
        let cond = Array2::from_shape_fn((n, COND_DIM), |(b, k)| {
            (b as f32 + 1.0) * 0.1 * (k as f32 - 1.5)
        });
        (x, cond)
    }

    #[test]
    fn output_shape_and_range() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for conditioned in [false, true] {
            let mut g = Generator::new(&mut rng, conditioned, 64).unwrap();
            let (x, cond) = batch(2);
            let y = g.forward(&x, &cond, false);
            assert_eq!(y.dim(), (2, 1, 64, 64));
            assert!(y.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn conditioned_output_depends_on_the_code() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut g = Generator::new(&mut rng, true, 64).unwrap();
        let (x, cond) = batch(1);
        let y1 = g.forward(&x, &cond, false);
        let y2 = g.forward(&x, &(cond.clone() + 1.0), false);
        assert_ne!(y1, y2);

        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let mut plain = Generator::new(&mut rng, false, 64).unwrap();
        let y1 = plain.forward(&x, &cond, false);
        let y2 = plain.forward(&x, &(cond + 1.0), false);
        assert_eq!(y1, y2, "unconditioned generator must ignore the code");
    }

    #[test]
    fn backward_shrinks_reconstruction_loss() {
        // A few gradient steps on a single batch must reduce the L1 loss;
        // this exercises the full backward graph including skips and the
        // conditioned bottleneck.
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for conditioned in [false, true] {
            let mut g = Generator::new(&mut rng, conditioned, 64).unwrap();
            let (x, cond) = batch(2);
            let target = x.clone();
            let mut opt = crate::nn::Adam::new(2e-3);
            let mut first = None;
            let mut last = 0.0;
            for _ in 0..8 {
                g.zero_grad();
                let y = g.forward(&x, &cond, true);
                let n = y.len() as f32;
                let loss: f32 = y
                    .iter()
                    .zip(target.iter())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f32>()
                    / n;
                let dy = ndarray::Zip::from(&y)
                    .and(&target)
                    .map_collect(|a, b| (a - b).signum() / n);
                g.backward(&dy);
                opt.step(&mut g.params_mut());
                first.get_or_insert(loss);
                last = loss;
            }
            assert!(
                last < first.unwrap() * 0.95,
                "conditioned={conditioned}: {first:?} -> {last}"
            );
        }
    }

    #[test]
    fn state_roundtrips_bit_exactly_through_a_store() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gen.bin");
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let mut g = Generator::new(&mut rng, true, 64).unwrap();
        let (x, cond) = batch(1);
        // Populate batch-norm running stats.
        g.forward(&x, &cond, true);
        let y = g.forward(&x, &cond, false);

        let mut store = TensorStore::new(serde_json::json!({}));
        g.export_state(&mut store, "gen");
        store.save(&path).unwrap();

        let mut rng2 = ChaCha12Rng::seed_from_u64(99);
        let mut g2 = Generator::new(&mut rng2, true, 64).unwrap();
        g2.import_state(&TensorStore::load(&path).unwrap(), "gen").unwrap();
        let y2 = g2.forward(&x, &cond, false);
        for (a, b) in y.iter().zip(y2.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
