//! Gaussian-density contact estimation.
//!
//! A small convolutional network maps a tactile image to a diagonal Gaussian
//! over the contact label (pose depth, pose angle, and shear components),
//! trained by negative log-likelihood. Labels are standardized by training
//! statistics; predictions are reported back in physical units.

use ndarray::{Array2, Array4, ArrayD};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use crate::contact::ContactLabel;
use crate::dataset::{label_vec6, LoadedSample};
use crate::error::{Error, Result};
use crate::image_types::TactileImage;
use crate::nn::{
    flatten, unflatten, Adam, Conv2d, LeakyRelu, Linear, Param, Relu, TensorStore, T2, T4,
};

/// Variance floor in standardized units. Besides keeping the NLL finite it
/// bounds the 1/var factor in the mean gradient: without it the variance
/// head collapses on the training set and the amplified mean gradients
/// destabilize the whole network.
const VAR_FLOOR: f32 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// 4 for (pose_depth, pose_angle, shear_x, shear_y); 6 adds
    /// (shear_z, shear_yaw).
    pub label_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub patience: usize,
    pub seed: u64,
    pub image_size: usize,
    /// Amplitude of uniform per-pixel noise added to training images.
    /// Regularizes against pixel-level artifacts of the image source (e.g.
    /// GAN textures) that do not carry over to the deployment domain.
    pub input_noise: f64,
    /// Maximum pixel shift applied to the marker-scale residual band during
    /// training (the smooth band stays put). Decorrelates texture position
    /// from contact geometry, which is exactly what differs between image
    /// sources.
    pub texture_jitter: usize,
    /// Amount by which the residual band may be attenuated during training
    /// (1.0 allows full removal). Forces a pose pathway that works from the
    /// smooth intensity structure alone.
    pub texture_fade: f64,
}

impl EstimatorConfig {
    pub fn desk(label_dim: usize) -> Self {
        Self {
            label_dim,
            epochs: 400,
            batch_size: 64,
            lr: 1e-3,
            patience: 60,
            seed: 13,
            image_size: 64,
            input_noise: 0.05,
            texture_jitter: 3,
            texture_fade: 1.0,
        }
    }

    /// Full-scale protocol (50 epochs, batch 64).
    pub fn paper_scale(label_dim: usize) -> Self {
        Self { epochs: 50, lr: 1e-4, ..Self::desk(label_dim) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.label_dim != 4 && self.label_dim != 6 {
            return Err(Error::Config(format!(
                "label_dim must be 4 or 6, got {}",
                self.label_dim
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 || !(self.lr > 0.0) {
            return Err(Error::Config("epochs, batch_size, lr must be > 0".into()));
        }
        if self.image_size != 64 {
            return Err(Error::Config("image_size must be 64".into()));
        }
        if !(0.0..1.0).contains(&self.input_noise) {
            return Err(Error::Config("input_noise must be in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.texture_fade) {
            return Err(Error::Config("texture_fade must be in [0, 1]".into()));
        }
        if self.texture_jitter >= self.image_size {
            return Err(Error::Config("texture_jitter must be smaller than the image".into()));
        }
        Ok(())
    }
}

/// One training example: an image with its regression target in physical
/// units.
#[derive(Debug, Clone)]
pub struct LabeledImage {
    pub image: TactileImage,
    pub target: Vec<f64>,
}

/// Slice the stored 6-dim label down to the estimator's target.
pub fn estimator_target(label: &ContactLabel, label_dim: usize) -> Vec<f64> {
    let v6 = label_vec6(label);
    v6[..label_dim].to_vec()
}

/// Pair dataset samples with targets, selecting the image domain through
/// `pick` (e.g. the synthetic-real image or a translated one).
pub fn labeled_images<'a>(
    samples: &'a [LoadedSample],
    label_dim: usize,
    mut pick: impl FnMut(&'a LoadedSample) -> TactileImage,
) -> Vec<LabeledImage> {
    samples
        .iter()
        .map(|s| LabeledImage { image: pick(s), target: estimator_target(&s.label, label_dim) })
        .collect()
}

/// Per-dimension standardization statistics from the training targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl LabelStats {
    pub fn fit(targets: &[Vec<f64>]) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::EmptySplit("label statistics".into()));
        }
        let dim = targets[0].len();
        let n = targets.len() as f64;
        let mut mean = vec![0.0; dim];
        for t in targets {
            for (m, v) in mean.iter_mut().zip(t.iter()) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; dim];
        for t in targets {
            for ((s, m), v) in std.iter_mut().zip(mean.iter()).zip(t.iter()) {
                *s += (v - m) * (v - m) / n;
            }
        }
        for s in std.iter_mut() {
            // Degenerate dimensions standardize to zero rather than blow up.
            *s = s.sqrt().max(1e-9);
        }
        Ok(Self { mean, std })
    }

    fn standardize(&self, t: &[f64]) -> Vec<f32> {
        t.iter()
            .zip(self.mean.iter().zip(self.std.iter()))
            .map(|(v, (m, s))| ((v - m) / s) as f32)
            .collect()
    }
}

/// The network: four stride-2 convolutions, one hidden FC layer, then mean
/// and variance heads (softplus-floored variance).
///
/// Deliberately normalization-free: batch-norm running statistics fitted on
/// one image source (e.g. translator outputs) do not match another (the
/// sensor domain) at inference, which wrecks cross-domain transfer.
pub struct Gdnn {
    c1: Conv2d,
    c2: Conv2d,
    c3: Conv2d,
    c4: Conv2d,
    a1: LeakyRelu,
    a2: LeakyRelu,
    a3: LeakyRelu,
    a4: LeakyRelu,
    fc: Linear,
    fcact: Relu,
    mean_head: Linear,
    var_head: Linear,
    cache_vraw: Option<T2>,
}

const TRUNK: [usize; 5] = [1, 8, 16, 32, 32];
const FLAT: usize = 32 * 4 * 4;
const HIDDEN: usize = 128;

fn softplus(x: f32) -> f32 {
    if x > 20.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

impl Gdnn {
    pub fn new(rng: &mut impl Rng, label_dim: usize) -> Self {
        Self {
            c1: Conv2d::new(rng, TRUNK[0], TRUNK[1], 4, 2, 1),
            c2: Conv2d::new(rng, TRUNK[1], TRUNK[2], 4, 2, 1),
            c3: Conv2d::new(rng, TRUNK[2], TRUNK[3], 4, 2, 1),
            c4: Conv2d::new(rng, TRUNK[3], TRUNK[4], 4, 2, 1),
            a1: LeakyRelu::new(0.2),
            a2: LeakyRelu::new(0.2),
            a3: LeakyRelu::new(0.2),
            a4: LeakyRelu::new(0.2),
            fc: Linear::new(rng, FLAT, HIDDEN),
            fcact: Relu::new(),
            mean_head: Linear::new(rng, HIDDEN, label_dim),
            var_head: Linear::new(rng, HIDDEN, label_dim),
            cache_vraw: None,
        }
    }

    /// Forward pass: (standardized mean, variance) per batch row.
    pub fn forward(&mut self, x: &T4, train: bool) -> (T2, T2) {
        let h1 = self.a1.forward4(&self.c1.forward(x, train), train);
        let h2 = self.a2.forward4(&self.c2.forward(&h1, train), train);
        let h3 = self.a3.forward4(&self.c3.forward(&h2, train), train);
        let h4 = self.a4.forward4(&self.c4.forward(&h3, train), train);
        let h = self.fcact.forward2(&self.fc.forward(&flatten(&h4), train), train);
        let mu = self.mean_head.forward(&h, train);
        let vraw = self.var_head.forward(&h, train);
        let var = vraw.mapv(|v| softplus(v) + VAR_FLOOR);
        if train {
            self.cache_vraw = Some(vraw);
        }
        (mu, var)
    }

    /// Backward from gradients on (mean, variance).
    pub fn backward(&mut self, dmu: &T2, dvar: &T2) {
        let vraw = self.cache_vraw.take().expect("forward(train) before backward");
        // d softplus(x) = sigmoid(x)
        let dvraw = ndarray::Zip::from(dvar)
            .and(&vraw)
            .map_collect(|dv, &x| dv * (1.0 / (1.0 + (-x).exp())));
        let dh = self.mean_head.backward(dmu) + self.var_head.backward(&dvraw);
        let dflat = self.fc.backward(&self.fcact.backward2(&dh));
        let dh4 = unflatten(&dflat, TRUNK[4], 4, 4);
        let dh3 = self.c4.backward(&self.a4.backward4(&dh4));
        let dh2 = self.c3.backward(&self.a3.backward4(&dh3));
        let dh1 = self.c2.backward(&self.a2.backward4(&dh2));
        self.c1.backward(&self.a1.backward4(&dh1));
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut ps = Vec::new();
        ps.extend(self.c1.params_mut());
        ps.extend(self.c2.params_mut());
        ps.extend(self.c3.params_mut());
        ps.extend(self.c4.params_mut());
        ps.extend(self.fc.params_mut());
        ps.extend(self.mean_head.params_mut());
        ps.extend(self.var_head.params_mut());
        ps
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn param_names() -> Vec<String> {
        let mut names = Vec::new();
        for layer in ["c1", "c2", "c3", "c4"] {
            names.push(format!("{layer}.w"));
            names.push(format!("{layer}.b"));
        }
        for layer in ["fc", "mean_head", "var_head"] {
            names.push(format!("{layer}.w"));
            names.push(format!("{layer}.b"));
        }
        names
    }

    pub fn export_state(&mut self, store: &mut TensorStore, prefix: &str) {
        let names = Self::param_names();
        let values: Vec<ArrayD<f32>> =
            self.params_mut().iter().map(|p| p.value.clone()).collect();
        for (name, value) in names.iter().zip(values) {
            store.insert(&format!("{prefix}.{name}"), value);
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
        Ok(())
    }
}

/// A trained estimator with its label normalization.
pub struct Estimator {
    pub config: EstimatorConfig,
    pub stats: LabelStats,
    /// Mean training image, subtracted from every input (shifted back to
    /// mid-gray). Removes the static marker grid so the network sees only
    /// contact-induced change — the tactile equivalent of subtracting the
    /// sensor's no-contact reference frame.
    reference: ndarray::Array2<f32>,
    net: Gdnn,
}

impl Estimator {
    /// Predict (mean, variance) in physical units for one image.
    pub fn predict(&mut self, image: &TactileImage) -> (Vec<f64>, Vec<f64>) {
        let mut x = batch_images(std::slice::from_ref(image), self.config.image_size);
        apply_reference(&mut x, &self.reference);
        let (mu, var) = self.net.forward(&x, false);
        let mut mean = Vec::with_capacity(self.config.label_dim);
        let mut variance = Vec::with_capacity(self.config.label_dim);
        for d in 0..self.config.label_dim {
            mean.push(mu[[0, d]] as f64 * self.stats.std[d] + self.stats.mean[d]);
            variance.push(var[[0, d]] as f64 * self.stats.std[d] * self.stats.std[d]);
        }
        (mean, variance)
    }

    pub fn save(&mut self, path: &Path) -> Result<()> {
        let mut store = TensorStore::new(serde_json::json!({
            "artifact": "estimator",
            "config": self.config,
            "stats": self.stats,
        }));
        store.insert("reference", self.reference.clone().into_dyn());
        self.net.export_state(&mut store, "gdnn");
        store.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let store = TensorStore::load(path)?;
        if store.meta["artifact"] != "estimator" {
            return Err(Error::Checkpoint("not an estimator checkpoint".into()));
        }
        let config: EstimatorConfig = serde_json::from_value(store.meta["config"].clone())?;
        let stats: LabelStats = serde_json::from_value(store.meta["stats"].clone())?;
        let reference = store
            .get("reference")?
            .clone()
            .into_dimensionality::<ndarray::Ix2>()
            .map_err(|_| Error::Checkpoint("reference image is not 2-d".into()))?;
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut net = Gdnn::new(&mut rng, config.label_dim);
        net.import_state(&store, "gdnn")?;
        Ok(Self { config, stats, reference, net })
    }
}

/// Subtract the reference frame from a batch, re-centered at mid-gray.
fn apply_reference(x: &mut T4, reference: &ndarray::Array2<f32>) {
    for mut img in x.outer_iter_mut() {
        let mut plane = img.index_axis_mut(ndarray::Axis(0), 0);
        plane -= reference;
        plane.mapv_inplace(|v| (v + 0.5).clamp(0.0, 1.0));
    }
}

/// Separable 3-tap blur with edge weight `b` in [0, 1/3], in place.
fn blur3_inplace(img: &mut ndarray::ArrayViewMut2<f32>, b: f32) {
    if b <= 0.0 {
        return;
    }
    let (h, w) = img.dim();
    let c = 1.0 - 2.0 * b;
    let mut row = vec![0.0f32; w.max(h)];
    for i in 0..h {
        for j in 0..w {
            let l = img[[i, j.saturating_sub(1)]];
            let r = img[[i, (j + 1).min(w - 1)]];
            row[j] = b * l + c * img[[i, j]] + b * r;
        }
        for j in 0..w {
            img[[i, j]] = row[j];
        }
    }
    for j in 0..w {
        for i in 0..h {
            let u = img[[i.saturating_sub(1), j]];
            let d = img[[(i + 1).min(h - 1), j]];
            row[i] = b * u + c * img[[i, j]] + b * d;
        }
        for i in 0..h {
            img[[i, j]] = row[i];
        }
    }
}

/// Split `img` into a smooth band (six heavy blur passes) and the
/// marker-scale residual, then recombine with the residual scaled by `keep`
/// and shifted by (`dx`, `dy`) pixels (zero-filled at the borders).
fn texture_augment_inplace(img: &mut ndarray::ArrayViewMut2<f32>, dx: i32, dy: i32, keep: f32) {
    let (h, w) = img.dim();
    let mut smooth = img.to_owned();
    for _ in 0..6 {
        blur3_inplace(&mut smooth.view_mut(), 1.0 / 3.0);
    }
    let residual = &img.view() - &smooth;
    for i in 0..h as i32 {
        for j in 0..w as i32 {
            let (si, sj) = (i - dy, j - dx);
            let r = if (0..h as i32).contains(&si) && (0..w as i32).contains(&sj) {
                residual[[si as usize, sj as usize]]
            } else {
                0.0
            };
            img[[i as usize, j as usize]] = (smooth[[i as usize, j as usize]] + keep * r).clamp(0.0, 1.0);
        }
    }
}

fn batch_images(images: &[TactileImage], size: usize) -> T4 {
    let mut x = Array4::zeros((images.len(), 1, size, size));
    for (i, img) in images.iter().enumerate() {
        x.slice_mut(ndarray::s![i, 0, .., ..]).assign(&img.values);
    }
    x
}

fn batch_targets(targets: &[Vec<f32>], dim: usize) -> T2 {
    let mut y = Array2::zeros((targets.len(), dim));
    for (i, t) in targets.iter().enumerate() {
        for (j, v) in t.iter().enumerate() {
            y[[i, j]] = *v;
        }
    }
    y
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EstimatorEpoch {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_nll: f64,
    /// Mean absolute error of the predictive mean on the validation split,
    /// in standardized units. Drives model selection: the NLL is dominated
    /// by the variance head late in training and is a poor proxy for the
    /// mean accuracy the estimator is used for downstream.
    pub val_mae: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EstimatorCurves(pub Vec<EstimatorEpoch>);

impl EstimatorCurves {
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("epoch,train_nll,val_nll,val_mae\n");
        for e in &self.0 {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.epoch, e.train_nll, e.val_nll, e.val_mae
            ));
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// NLL of a batch in standardized units.
fn batch_nll(mu: &T2, var: &T2, y: &T2) -> f64 {
    let batch = mu.nrows() as f64;
    let mut acc = 0.0;
    for ((m, v), t) in mu.iter().zip(var.iter()).zip(y.iter()) {
        let (m, v, t) = (*m as f64, *v as f64, *t as f64);
        acc += 0.5 * (2.0 * std::f64::consts::PI * v).ln() + (t - m) * (t - m) / (2.0 * v);
    }
    acc / batch
}

/// Train an estimator by NLL with early stopping on validation MAE.
pub fn train_estimator(
    train: &[LabeledImage],
    val: &[LabeledImage],
    config: &EstimatorConfig,
) -> Result<(Estimator, EstimatorCurves)> {
    train_estimator_aug(train, val, &[], config)
}

/// Like [`train_estimator`], but additionally mixes a randomly drawn member
/// of `residuals` into every training image each epoch. When the training
/// images come from a translator and the residuals are `real - translated`
/// differences of the paired training set, this exposes the network to the
/// exact texture by which the two image sources differ — decorrelated from
/// the labels — so it cannot lean on source-specific texture to decode pose.
pub fn train_estimator_aug(
    train: &[LabeledImage],
    val: &[LabeledImage],
    residuals: &[ndarray::Array2<f32>],
    config: &EstimatorConfig,
) -> Result<(Estimator, EstimatorCurves)> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptySplit("estimator training".into()));
    }
    for s in train.iter().chain(val.iter()) {
        if s.target.len() != config.label_dim {
            return Err(Error::Config(format!(
                "target dim {} != label_dim {}",
                s.target.len(),
                config.label_dim
            )));
        }
    }
    let stats = LabelStats::fit(&train.iter().map(|s| s.target.clone()).collect::<Vec<_>>())?;
    let std_train: Vec<Vec<f32>> = train.iter().map(|s| stats.standardize(&s.target)).collect();
    let std_val: Vec<Vec<f32>> = val.iter().map(|s| stats.standardize(&s.target)).collect();

    let mut reference =
        ndarray::Array2::<f32>::zeros((config.image_size, config.image_size));
    for s in train {
        reference += &s.image.values;
    }
    reference /= train.len() as f32;

    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut net = Gdnn::new(&mut rng, config.label_dim);
    let mut opt = Adam::new(config.lr as f32);
    let mut curves = EstimatorCurves::default();
    let mut best: Option<(f64, TensorStore)> = None;
    let mut wait = 0usize;
    let mut indices: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..config.epochs {
        indices.shuffle(&mut rng);
        let mut train_nll = 0.0;
        let mut batches = 0usize;
        for batch_idx in indices.chunks(config.batch_size) {
            let images: Vec<TactileImage> =
                batch_idx.iter().map(|&i| train[i].image.clone()).collect();
            let targets: Vec<Vec<f32>> =
                batch_idx.iter().map(|&i| std_train[i].clone()).collect();
            let mut x = batch_images(&images, config.image_size);
            for mut img in x.outer_iter_mut() {
                {
                    let mut plane = img.index_axis_mut(ndarray::Axis(0), 0);
                    // Source-gap noise: add another pair's real-minus-
                    // translated difference, so the texture the sources
                    // disagree on appears with random, label-independent
                    // content.
                    if !residuals.is_empty() {
                        let r = &residuals[rng.random_range(0..residuals.len())];
                        plane += r;
                        plane.mapv_inplace(|v| v.clamp(0.0, 1.0));
                    }
                    // Reference-frame subtraction, as applied at inference.
                    plane -= &reference;
                    plane.mapv_inplace(|v| (v + 0.5).clamp(0.0, 1.0));
                    // Shift and attenuate the marker-scale residual band
                    // while the smooth band stays put: texture position and
                    // contrast are exactly what differ between image
                    // sources, so the network is denied them as pose cues.
                    if config.texture_jitter > 0 || config.texture_fade > 0.0 {
                        let j = config.texture_jitter as i32;
                        let dx = rng.random_range(-j..=j);
                        let dy = rng.random_range(-j..=j);
                        let keep = 1.0 - rng.random_range(0.0..=config.texture_fade) as f32;
                        texture_augment_inplace(&mut plane, dx, dy, keep);
                    }
                    if config.input_noise > 0.0 {
                        // Random blur passes wash out residual pixel-level
                        // artifacts of the image source.
                        let passes = rng.random_range(0..=4u32);
                        for _ in 0..passes {
                            let b = rng.random_range(0.1..=0.33f32);
                            blur3_inplace(&mut plane, b);
                        }
                    }
                }
                if config.input_noise > 0.0 {
                    // Gain/offset jitter and per-pixel noise train out
                    // global intensity shifts between image sources.
                    let a = config.input_noise as f32;
                    let gain = 1.0 + rng.random_range(-2.0 * a..=2.0 * a);
                    let offset = rng.random_range(-a..=a);
                    img.mapv_inplace(|v| {
                        (gain * v + offset + rng.random_range(-a..=a)).clamp(0.0, 1.0)
                    });
                }
            }
            let y = batch_targets(&targets, config.label_dim);

            net.zero_grad();
            let (mu, var) = net.forward(&x, true);
            let loss = batch_nll(&mu, &var, &y);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            let batch = mu.nrows() as f32;
            let dmu = ndarray::Zip::from(&mu)
                .and(&var)
                .and(&y)
                .map_collect(|&m, &v, &t| (m - t) / v / batch);
            let dvar = ndarray::Zip::from(&mu)
                .and(&var)
                .and(&y)
                .map_collect(|&m, &v, &t| (0.5 / v - (t - m) * (t - m) / (2.0 * v * v)) / batch);
            net.backward(&dmu, &dvar);
            opt.step(&mut net.params_mut());
            train_nll += loss;
            batches += 1;
        }
        let (val_nll, val_mae) = eval_metrics(&mut net, &reference, val, &std_val, config);
        if !val_nll.is_finite() || !val_mae.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        curves.0.push(EstimatorEpoch {
            epoch,
            train_nll: train_nll / batches as f64,
            val_nll,
            val_mae,
        });
        if best.as_ref().map_or(true, |(b, _)| val_mae < *b) {
            let mut snap = TensorStore::new(serde_json::Value::Null);
            net.export_state(&mut snap, "gdnn");
            best = Some((val_mae, snap));
            wait = 0;
        } else {
            wait += 1;
            if wait >= config.patience {
                break;
            }
        }
    }
    let (_, snap) = best.expect("at least one epoch ran");
    net.import_state(&snap, "gdnn")?;
    Ok((Estimator { config: *config, stats, reference, net }, curves))
}

/// Validation (NLL, standardized MAE of the predictive mean).
fn eval_metrics(
    net: &mut Gdnn,
    reference: &ndarray::Array2<f32>,
    val: &[LabeledImage],
    std_val: &[Vec<f32>],
    config: &EstimatorConfig,
) -> (f64, f64) {
    let mut nll_acc = 0.0;
    let mut mae_acc = 0.0;
    let mut count = 0usize;
    for (chunk, tchunk) in val.chunks(64).zip(std_val.chunks(64)) {
        let images: Vec<TactileImage> = chunk.iter().map(|s| s.image.clone()).collect();
        let mut x = batch_images(&images, config.image_size);
        apply_reference(&mut x, reference);
        let y = batch_targets(tchunk, config.label_dim);
        let (mu, var) = net.forward(&x, false);
        nll_acc += batch_nll(&mu, &var, &y) * chunk.len() as f64;
        let abs_sum: f64 = mu
            .iter()
            .zip(y.iter())
            .map(|(m, t)| (*m as f64 - *t as f64).abs())
            .sum();
        mae_acc += abs_sum / config.label_dim as f64;
        count += chunk.len();
    }
    (nll_acc / count as f64, mae_acc / count as f64)
}

/// Evaluation summary: per-dimension mean absolute error of the predictive
/// mean, average NLL, and the predict-the-training-mean baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorEval {
    pub count: usize,
    pub mae: Vec<f64>,
    pub nll: f64,
    /// MAE of always predicting the training-set mean label.
    pub baseline_mae: Vec<f64>,
}

pub fn eval_estimator(est: &mut Estimator, val: &[LabeledImage]) -> Result<EstimatorEval> {
    if val.is_empty() {
        return Err(Error::EmptySplit("estimator eval".into()));
    }
    let dim = est.config.label_dim;
    let std_val: Vec<Vec<f32>> = val.iter().map(|s| est.stats.standardize(&s.target)).collect();
    let mut mae = vec![0.0; dim];
    let mut baseline = vec![0.0; dim];
    for s in val {
        let (mean, _) = est.predict(&s.image);
        for d in 0..dim {
            mae[d] += (mean[d] - s.target[d]).abs();
            baseline[d] += (est.stats.mean[d] - s.target[d]).abs();
        }
    }
    let n = val.len() as f64;
    for d in 0..dim {
        mae[d] /= n;
        baseline[d] /= n;
    }
    let (nll, _) = eval_metrics(&mut est.net, &est.reference, val, &std_val, &est.config);
    Ok(EstimatorEval { count: val.len(), mae, nll, baseline_mae: baseline })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{collect_dataset, load_dataset, CollectionConfig, Split};

    fn tiny_labeled(label_dim: usize) -> (Vec<LabeledImage>, Vec<LabeledImage>) {
        let dir = tempfile::tempdir().unwrap();
        let config = CollectionConfig {
            train_samples: 24,
            val_samples: 8,
            ..CollectionConfig::desk()
        };
        let manifest = collect_dataset(&config, dir.path()).unwrap();
        let train = load_dataset(dir.path(), &manifest, Split::Train).unwrap();
        let val = load_dataset(dir.path(), &manifest, Split::Val).unwrap();
        (
            labeled_images(&train, label_dim, |s| s.real.clone()),
            labeled_images(&val, label_dim, |s| s.real.clone()),
        )
    }

    #[test]
    fn label_stats_standardize_to_zero_mean_unit_std() {
        let targets = vec![vec![1.0, 10.0], vec![3.0, 30.0], vec![5.0, 50.0]];
        let stats = LabelStats::fit(&targets).unwrap();
        assert_eq!(stats.mean, vec![3.0, 30.0]);
        let mut acc = vec![0.0f64; 2];
        for t in &targets {
            for (a, v) in acc.iter_mut().zip(stats.standardize(t)) {
                *a += v as f64;
            }
        }
        assert!(acc.iter().all(|v| v.abs() < 1e-6));
        let z = stats.standardize(&targets[2]);
        for v in z {
            assert!((v.abs() - (2.0f32 / 3.0).sqrt() * 1.5).abs() < 1e-5);
        }
    }

    #[test]
    fn estimator_target_slices_the_six_dim_label() {
        let label = ContactLabel {
            pose_depth: 1.0,
            pose_angle: 20.0,
            shear: crate::pose::ShearVector::new(0.5, -0.5, 0.1, 3.0),
        };
        assert_eq!(estimator_target(&label, 4), vec![1.0, 20.0, 0.5, -0.5]);
        assert_eq!(estimator_target(&label, 6), vec![1.0, 20.0, 0.5, -0.5, 0.1, 3.0]);
    }

    #[test]
    fn texture_augment_splits_the_bands() {
        // A lone bright pixel on a smooth ramp: with keep = 1 and no shift
        // the image is unchanged; with keep = 0 the spike is removed while
        // the smooth ramp survives; a shift moves the spike, not the ramp.
        let mut base = ndarray::Array2::from_shape_fn((32, 32), |(i, _)| i as f32 / 64.0);
        base[[16, 16]] = 1.0;
        let mut img = base.clone();
        texture_augment_inplace(&mut img.view_mut(), 0, 0, 1.0);
        let diff = (&img - &base).mapv(f32::abs);
        assert!(diff.iter().cloned().fold(0.0, f32::max) < 1e-5);

        let mut faded = base.clone();
        texture_augment_inplace(&mut faded.view_mut(), 0, 0, 0.0);
        assert!(faded[[16, 16]] < 0.5, "spike not removed: {}", faded[[16, 16]]);
        assert!((faded[[28, 5]] - base[[28, 5]]).abs() < 0.02, "ramp not preserved");

        let mut shifted = base.clone();
        texture_augment_inplace(&mut shifted.view_mut(), 3, -2, 1.0);
        assert!(shifted[[14, 19]] > 0.6, "spike did not move with the shift");
        assert!(shifted[[16, 16]] < 0.5, "spike left at the old position");
    }

    #[test]
    fn short_training_reduces_validation_nll() {
        let (train, val) = tiny_labeled(4);
        let config = EstimatorConfig { epochs: 8, batch_size: 8, ..EstimatorConfig::desk(4) };
        let (_est, curves) = train_estimator(&train, &val, &config).unwrap();
        let first = curves.0[0].val_nll;
        let best = curves.0.iter().map(|e| e.val_nll).fold(f64::INFINITY, f64::min);
        assert!(best < first, "val NLL never improved: {first} -> {best}");
    }

    #[test]
    fn predictions_are_in_physical_units() {
        let (train, val) = tiny_labeled(4);
        let config = EstimatorConfig { epochs: 3, batch_size: 8, ..EstimatorConfig::desk(4) };
        let (mut est, _) = train_estimator(&train, &val, &config).unwrap();
        let (mean, var) = est.predict(&val[0].image);
        assert_eq!(mean.len(), 4);
        assert_eq!(var.len(), 4);
        assert!(var.iter().all(|&v| v > 0.0));
        // Depth prediction lands near the sampled indent range, not in
        // standardized units.
        assert!(mean[0] > -1.0 && mean[0] < 4.0, "depth mean {}", mean[0]);
    }

    #[test]
    fn eval_includes_mean_baseline() {
        let (train, val) = tiny_labeled(6);
        let config = EstimatorConfig { epochs: 2, batch_size: 8, ..EstimatorConfig::desk(6) };
        let (mut est, _) = train_estimator(&train, &val, &config).unwrap();
        let eval = eval_estimator(&mut est, &val).unwrap();
        assert_eq!(eval.mae.len(), 6);
        assert_eq!(eval.baseline_mae.len(), 6);
        assert!(eval.nll.is_finite());
        assert!(eval.baseline_mae.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_exact() {
        let (train, val) = tiny_labeled(4);
        let config = EstimatorConfig { epochs: 2, batch_size: 8, ..EstimatorConfig::desk(4) };
        let (mut est, _) = train_estimator(&train, &val, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("est.ckpt");
        est.save(&path).unwrap();
        let mut back = Estimator::load(&path).unwrap();
        assert_eq!(back.config, est.config);
        assert_eq!(back.stats, est.stats);
        let (m1, v1) = est.predict(&val[0].image);
        let (m2, v2) = back.predict(&val[0].image);
        assert_eq!(m1, m2);
        assert_eq!(v1, v2);
    }

    #[test]
    fn mismatched_label_dim_is_rejected() {
        let (train, val) = tiny_labeled(4);
        let config = EstimatorConfig::desk(6);
        assert!(matches!(
            train_estimator(&train, &val, &config),
            Err(Error::Config(_))
        ));
        let bad = EstimatorConfig { label_dim: 5, ..EstimatorConfig::desk(4) };
        assert!(bad.validate().is_err());
    }
}
