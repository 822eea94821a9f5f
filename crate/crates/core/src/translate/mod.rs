//! Sim-to-real image translation.
//!
//! Two translator variants share one U-Net backbone: the plain conditional
//! GAN translates the sim image alone, while the shear-conditioned variant
//! additionally injects the shear vector at the bottleneck. Both train with
//! an L1 reconstruction term plus a least-squares PatchGAN adversary.

mod discriminator;
mod generator;

pub use discriminator::Discriminator;
pub use generator::{Generator, COND_DIM};

use ndarray::{Array2, Array4};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use crate::contact::ContactType;
use crate::dataset::LoadedSample;
use crate::error::{Error, Result};
use crate::image_types::{DomainTag, TactileImage};
use crate::metrics::{mape, ssim};
use crate::nn::{concat_channels, split_channels, Adam, TensorStore, T2, T4};
use crate::pose::ShearVector;

/// Normalization applied to the shear code before conditioning: the
/// collection-time sampling bounds (mm, mm, mm, degrees).
pub const COND_SCALE: [f64; 4] = [3.0, 3.0, 0.5, 10.0];

/// Normalized 4-dim conditioning code for a shear vector.
pub fn cond_code(shear: &ShearVector) -> [f32; 4] {
    let s = shear.as_array();
    [
        (s[0] / COND_SCALE[0]) as f32,
        (s[1] / COND_SCALE[1]) as f32,
        (s[2] / COND_SCALE[2]) as f32,
        (s[3] / COND_SCALE[3]) as f32,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslatorKind {
    /// Unconditioned image-to-image baseline.
    Pix2pix,
    /// Shear-conditioned variant.
    ShPix2pix,
}

impl TranslatorKind {
    pub fn conditioned(&self) -> bool {
        matches!(self, TranslatorKind::ShPix2pix)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslatorConfig {
    pub kind: TranslatorKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub lambda_rec: f64,
    pub lambda_adv: f64,
    /// Early-stopping patience in epochs without validation improvement.
    pub patience: usize,
    pub seed: u64,
    pub image_size: usize,
}

impl TranslatorConfig {
    /// Desk-scale defaults: small enough to train on one CPU core in
    /// minutes.
    pub fn desk(kind: TranslatorKind) -> Self {
        Self {
            kind,
            epochs: 80,
            batch_size: 16,
            lr: 2e-4,
            lambda_rec: 100.0,
            lambda_adv: 1.0,
            patience: 15,
            seed: 11,
            image_size: 64,
        }
    }

    /// Full-scale protocol (100 epochs, Adam 1e-4).
    pub fn paper_scale(kind: TranslatorKind) -> Self {
        Self { epochs: 100, lr: 1e-4, ..Self::desk(kind) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be > 0".into()));
        }
        if !(self.lr > 0.0) || self.lambda_rec < 0.0 || self.lambda_adv < 0.0 {
            return Err(Error::Config("lr must be > 0, lambdas >= 0".into()));
        }
        Ok(())
    }
}

/// Per-epoch training diagnostics.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub gen_loss: f64,
    pub disc_loss: f64,
    pub val_mape: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainingCurves(pub Vec<EpochStats>);

impl TrainingCurves {
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("epoch,gen_loss,disc_loss,val_mape\n");
        for e in &self.0 {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.epoch, e.gen_loss, e.disc_loss, e.val_mape
            ));
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn best_val_mape(&self) -> Option<f64> {
        self.0.iter().map(|e| e.val_mape).fold(None, |acc, v| {
            Some(acc.map_or(v, |a: f64| a.min(v)))
        })
    }
}

/// A trained translator: the generator plus the config it was trained with.
pub struct Translator {
    pub config: TranslatorConfig,
    pub gen: Generator,
}

impl Translator {
    /// Translate one sim image given the shear measured by the sensor.
    pub fn translate(&mut self, sim: &TactileImage, shear: &ShearVector) -> TactileImage {
        let x = images_to_t4(std::slice::from_ref(sim));
        let cond = conds_to_t2(&[cond_code(shear)]);
        let y = self.gen.forward(&x, &cond, false);
        let values = y.index_axis(ndarray::Axis(0), 0).index_axis(ndarray::Axis(0), 0).to_owned();
        TactileImage { values, domain: DomainTag::Generated }
    }

    /// Batched translation of dataset samples.
    pub fn translate_samples(&mut self, samples: &[LoadedSample]) -> Vec<TactileImage> {
        let mut out = Vec::with_capacity(samples.len());
        for chunk in samples.chunks(32) {
            let x = images_to_t4_iter(chunk.iter().map(|s| &s.sim), self.config.image_size);
            let cond =
                conds_to_t2(&chunk.iter().map(|s| cond_code(&s.label.shear)).collect::<Vec<_>>());
            let y = self.gen.forward(&x, &cond, false);
            for i in 0..chunk.len() {
                let values = y
                    .index_axis(ndarray::Axis(0), i)
                    .index_axis(ndarray::Axis(0), 0)
                    .to_owned();
                out.push(TactileImage { values, domain: DomainTag::Generated });
            }
        }
        out
    }

    pub fn save(&mut self, path: &Path) -> Result<()> {
        let mut store = TensorStore::new(serde_json::json!({
            "artifact": "translator",
            "config": self.config,
        }));
        self.gen.export_state(&mut store, "gen");
        store.save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let store = TensorStore::load(path)?;
        if store.meta["artifact"] != "translator" {
            return Err(Error::Checkpoint("not a translator checkpoint".into()));
        }
        let config: TranslatorConfig = serde_json::from_value(store.meta["config"].clone())?;
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let mut gen = Generator::new(&mut rng, config.kind.conditioned(), config.image_size)?;
        gen.import_state(&store, "gen")?;
        Ok(Self { config, gen })
    }
}

fn images_to_t4(images: &[TactileImage]) -> T4 {
    images_to_t4_iter(images.iter(), images[0].shape().0)
}

fn images_to_t4_iter<'a>(images: impl Iterator<Item = &'a TactileImage> + Clone, size: usize) -> T4 {
    let n = images.clone().count();
    let mut x = Array4::zeros((n, 1, size, size));
    for (i, img) in images.enumerate() {
        x.slice_mut(ndarray::s![i, 0, .., ..]).assign(&img.values);
    }
    x
}

fn conds_to_t2(codes: &[[f32; 4]]) -> T2 {
    let mut c = Array2::zeros((codes.len(), COND_DIM));
    for (i, code) in codes.iter().enumerate() {
        for (j, v) in code.iter().enumerate() {
            c[[i, j]] = *v;
        }
    }
    c
}

/// Train a translator against the paired dataset. Returns the generator
/// restored to its best-validation epoch together with the loss curves.
pub fn train_translator(
    train: &[LoadedSample],
    val: &[LoadedSample],
    config: &TranslatorConfig,
) -> Result<(Translator, TrainingCurves)> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::EmptySplit("translator training".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
    let mut gen = Generator::new(&mut rng, config.kind.conditioned(), config.image_size)?;
    let mut disc = Discriminator::new(&mut rng);
    let mut opt_g = Adam::new(config.lr as f32);
    let mut opt_d = Adam::new(config.lr as f32);

    let mut curves = TrainingCurves::default();
    let mut best: Option<(f64, TensorStore)> = None;
    let mut wait = 0usize;
    let mut indices: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..config.epochs {
        indices.shuffle(&mut rng);
        let mut gen_loss_acc = 0.0;
        let mut disc_loss_acc = 0.0;
        let mut batches = 0usize;
        for batch_idx in indices.chunks(config.batch_size) {
            let samples: Vec<&LoadedSample> = batch_idx.iter().map(|&i| &train[i]).collect();
            let x = images_to_t4_iter(samples.iter().map(|s| &s.sim), config.image_size);
            let y = images_to_t4_iter(samples.iter().map(|s| &s.real), config.image_size);
            let cond = conds_to_t2(
                &samples.iter().map(|s| cond_code(&s.label.shear)).collect::<Vec<_>>(),
            );

            // Generator step. The discriminator accumulates spurious grads
            // here; they are zeroed before its own step.
            gen.zero_grad();
            disc.zero_grad();
            let fake = gen.forward(&x, &cond, true);
            let npix = fake.len() as f32;
            let rec_loss: f32 = fake
                .iter()
                .zip(y.iter())
                .map(|(a, b)| (a - b).abs())
                .sum::<f32>()
                / npix;
            let pair_fake = concat_channels(&x, &fake);
            let s_fake = disc.forward(&pair_fake, true);
            let ns = s_fake.len() as f32;
            let adv_loss: f32 =
                s_fake.iter().map(|s| (s - 1.0) * (s - 1.0)).sum::<f32>() / ns;
            let g_loss =
                config.lambda_rec as f32 * rec_loss + config.lambda_adv as f32 * adv_loss;
            let dscores = s_fake.mapv(|s| config.lambda_adv as f32 * 2.0 * (s - 1.0) / ns);
            let dpair = disc.backward(&dscores);
            let (_, dfake_adv) = split_channels(&dpair, 1);
            let lam = config.lambda_rec as f32;
            let dfake = ndarray::Zip::from(&fake)
                .and(&y)
                .and(&dfake_adv)
                .map_collect(|a, b, adv| lam * (a - b).signum() / npix + adv);
            gen.backward(&dfake);
            opt_g.step(&mut gen.params_mut());

            // Discriminator step on real and detached fake pairs.
            disc.zero_grad();
            let pair_real = concat_channels(&x, &y);
            let s_real = disc.forward(&pair_real, true);
            let nr = s_real.len() as f32;
            let dr = s_real.mapv(|s| (s - 1.0) / nr);
            disc.backward(&dr);
            let s_fake2 = disc.forward(&pair_fake, true);
            let nf = s_fake2.len() as f32;
            let df = s_fake2.mapv(|s| s / nf);
            disc.backward(&df);
            opt_d.step(&mut disc.params_mut());
            let d_loss = 0.5 * s_real.iter().map(|s| (s - 1.0) * (s - 1.0)).sum::<f32>() / nr
                + 0.5 * s_fake2.iter().map(|s| s * s).sum::<f32>() / nf;

            if !g_loss.is_finite() || !d_loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            gen_loss_acc += g_loss as f64;
            disc_loss_acc += d_loss as f64;
            batches += 1;
        }

        let val_mape = validation_mape(&mut gen, val, config)?;
        if !val_mape.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        curves.0.push(EpochStats {
            epoch,
            gen_loss: gen_loss_acc / batches as f64,
            disc_loss: disc_loss_acc / batches as f64,
            val_mape,
        });

        if best.as_ref().map_or(true, |(b, _)| val_mape < *b) {
            let mut snap = TensorStore::new(serde_json::Value::Null);
            gen.export_state(&mut snap, "gen");
            best = Some((val_mape, snap));
            wait = 0;
        } else {
            wait += 1;
            if wait >= config.patience {
                break;
            }
        }
    }

    // Restore the best-validation generator.
    let (_, snap) = best.expect("at least one epoch ran");
    gen.import_state(&snap, "gen")?;
    Ok((Translator { config: *config, gen }, curves))
}

fn validation_mape(
    gen: &mut Generator,
    val: &[LoadedSample],
    config: &TranslatorConfig,
) -> Result<f64> {
    let mut acc = 0.0;
    for chunk in val.chunks(32) {
        let x = images_to_t4_iter(chunk.iter().map(|s| &s.sim), config.image_size);
        let cond =
            conds_to_t2(&chunk.iter().map(|s| cond_code(&s.label.shear)).collect::<Vec<_>>());
        let y = gen.forward(&x, &cond, false);
        for (i, s) in chunk.iter().enumerate() {
            let pred = y.index_axis(ndarray::Axis(0), i);
            let n = s.real.values.len() as f64;
            let e: f64 = pred
                .iter()
                .zip(s.real.values.iter())
                .map(|(a, b)| (*a as f64 - *b as f64).abs())
                .sum::<f64>()
                / n;
            acc += e;
        }
    }
    Ok(acc / val.len() as f64)
}

/// Image-quality metrics of a translator on one evaluation split, overall
/// and per contact type.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranslationEval {
    pub kind: TranslatorKind,
    pub count: usize,
    pub mape_overall: f64,
    pub ssim_overall: f64,
    pub surface_mape: f64,
    pub surface_ssim: f64,
    pub edge_mape: f64,
    pub edge_ssim: f64,
}

/// Evaluate translated images against the real-domain ground truth.
pub fn eval_translation(
    translator: &mut Translator,
    samples: &[LoadedSample],
) -> Result<TranslationEval> {
    if samples.is_empty() {
        return Err(Error::EmptySplit("translation eval".into()));
    }
    let generated = translator.translate_samples(samples);
    let mut acc: std::collections::HashMap<ContactType, (f64, f64, usize)> = Default::default();
    let mut overall = (0.0, 0.0);
    for (sample, gen_img) in samples.iter().zip(generated.iter()) {
        let m = mape(gen_img, &sample.real)?;
        let s = ssim(gen_img, &sample.real)?;
        let entry = acc.entry(sample.contact_type).or_insert((0.0, 0.0, 0));
        entry.0 += m;
        entry.1 += s;
        entry.2 += 1;
        overall.0 += m;
        overall.1 += s;
    }
    let n = samples.len() as f64;
    let fetch = |ct: ContactType| -> (f64, f64) {
        acc.get(&ct)
            .map(|(m, s, c)| (m / *c as f64, s / *c as f64))
            .unwrap_or((f64::NAN, f64::NAN))
    };
    let (surface_mape, surface_ssim) = fetch(ContactType::Surface);
    let (edge_mape, edge_ssim) = fetch(ContactType::Edge);
    Ok(TranslationEval {
        kind: translator.config.kind,
        count: samples.len(),
        mape_overall: overall.0 / n,
        ssim_overall: overall.1 / n,
        surface_mape,
        surface_ssim,
        edge_mape,
        edge_ssim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{collect_dataset, load_dataset, CollectionConfig, Split};

    fn tiny_dataset() -> (tempfile::TempDir, Vec<LoadedSample>, Vec<LoadedSample>) {
        let dir = tempfile::tempdir().unwrap();
        let config = CollectionConfig {
            train_samples: 16,
            val_samples: 8,
            ..CollectionConfig::desk()
        };
        let manifest = collect_dataset(&config, dir.path()).unwrap();
        let train = load_dataset(dir.path(), &manifest, Split::Train).unwrap();
        let val = load_dataset(dir.path(), &manifest, Split::Val).unwrap();
        (dir, train, val)
    }

    #[test]
    fn short_training_run_improves_validation_mape() {
        let (_dir, train, val) = tiny_dataset();
        let config = TranslatorConfig {
            epochs: 6,
            batch_size: 8,
            ..TranslatorConfig::desk(TranslatorKind::ShPix2pix)
        };
        let (_t, curves) = train_translator(&train, &val, &config).unwrap();
        assert!(!curves.0.is_empty());
        let first = curves.0[0].val_mape;
        let best = curves.best_val_mape().unwrap();
        assert!(best <= first, "val mape never improved: {first} -> {best}");
        assert!(best.is_finite());
    }

    #[test]
    fn eval_reports_both_contact_types() {
        let (_dir, train, val) = tiny_dataset();
        let config = TranslatorConfig {
            epochs: 1,
            batch_size: 8,
            ..TranslatorConfig::desk(TranslatorKind::Pix2pix)
        };
        let (mut t, _) = train_translator(&train, &val, &config).unwrap();
        let eval = eval_translation(&mut t, &val).unwrap();
        assert_eq!(eval.count, 8);
        assert!(eval.surface_mape.is_finite());
        assert!(eval.edge_mape.is_finite());
        assert!(eval.ssim_overall <= 1.0);
    }

    #[test]
    fn checkpoint_roundtrip_preserves_outputs_exactly() {
        let (_dir, train, val) = tiny_dataset();
        let config = TranslatorConfig {
            epochs: 1,
            batch_size: 8,
            ..TranslatorConfig::desk(TranslatorKind::ShPix2pix)
        };
        let (mut t, _) = train_translator(&train, &val, &config).unwrap();
        let out = tempfile::tempdir().unwrap();
        let path = out.path().join("translator.ckpt");
        t.save(&path).unwrap();
        let mut back = Translator::load(&path).unwrap();
        assert_eq!(back.config, t.config);
        let a = t.translate(&val[0].sim, &val[0].label.shear);
        let b = back.translate(&val[0].sim, &val[0].label.shear);
        for (x, y) in a.values.iter().zip(b.values.iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.domain, DomainTag::Generated);
    }

    #[test]
    fn training_is_deterministic_for_a_seed() {
        let (_dir, train, val) = tiny_dataset();
        let config = TranslatorConfig {
            epochs: 2,
            batch_size: 8,
            ..TranslatorConfig::desk(TranslatorKind::Pix2pix)
        };
        let (_, c1) = train_translator(&train, &val, &config).unwrap();
        let (_, c2) = train_translator(&train, &val, &config).unwrap();
        for (a, b) in c1.0.iter().zip(c2.0.iter()) {
            assert_eq!(a.val_mape, b.val_mape);
            assert_eq!(a.gen_loss, b.gen_loss);
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let mut c = TranslatorConfig::desk(TranslatorKind::Pix2pix);
        c.epochs = 0;
        assert!(c.validate().is_err());
        let (_dir, train, val) = tiny_dataset();
        assert!(train_translator(&train, &val, &c).is_err());
        let c2 = TranslatorConfig::desk(TranslatorKind::Pix2pix);
        assert!(train_translator(&[], &val, &c2).is_err());
    }
}
