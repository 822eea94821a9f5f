//! Paired-image dataset collection and loading.
//!
//! Each sample is a (sim, real) image pair with its contact label: the sim
//! image is the shear-free depth render at the current pose, the real image
//! is the marker-sensor oracle driven by the same depth plus the accumulated
//! shear. Samples are written as 8-bit PNGs with a JSON manifest carrying
//! labels and content checksums.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

use crate::contact::{sample_contact, ContactLabel, ContactScenario, ContactType, SampleRanges};
use crate::error::{Error, Result};
use crate::image_types::{sim_tactile_image, DomainTag, TactileImage};
use crate::markers::{add_uniform_noise, MarkerGrid, MembraneParams, SensorModel};
use crate::sensor::{render_depth, SensorGeometry};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn dir_name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }

    fn stream_id(&self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Val => 2,
        }
    }
}

/// Everything needed to reproduce a collection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionConfig {
    pub seed: u64,
    pub train_samples: usize,
    pub val_samples: usize,
    pub geom: SensorGeometry,
    pub ranges: SampleRanges,
    pub membrane: MembraneParams,
    /// Hexagonal marker grid: (rings, spacing mm, blob sigma mm).
    pub marker_rings: usize,
    pub marker_spacing: f64,
    pub marker_sigma: f64,
}

impl CollectionConfig {
    /// Desk-scale preset sized to train on a single CPU core.
    pub fn desk() -> Self {
        let grid = MarkerGrid::default_desk();
        Self {
            seed: 7,
            train_samples: 2000,
            val_samples: 500,
            geom: SensorGeometry::default_desk(),
            ranges: SampleRanges::default(),
            membrane: MembraneParams::default(),
            marker_rings: 10,
            marker_spacing: grid.spacing,
            marker_sigma: grid.blob_sigma,
        }
    }

    /// Full-scale preset matching the original experimental protocol.
    pub fn paper_scale() -> Self {
        Self { train_samples: 5000, val_samples: 2000, ..Self::desk() }
    }

    pub fn sensor_model(&self) -> Result<SensorModel> {
        SensorModel::new(
            MarkerGrid::hexagonal(self.marker_rings, self.marker_spacing, self.marker_sigma)?,
            self.membrane,
            self.geom,
        )
    }
}

/// One collected sample: file-relative image paths, checksums, and label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: usize,
    pub object_id: String,
    pub contact_type: ContactType,
    pub label: ContactLabel,
    pub sim_path: String,
    pub real_path: String,
    pub sim_sha256: String,
    pub real_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub config: CollectionConfig,
    pub train: Vec<SampleRecord>,
    pub val: Vec<SampleRecord>,
}

impl DatasetManifest {
    pub fn records(&self, split: Split) -> &[SampleRecord] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = fs::read_to_string(path)?;
        let m: Self = serde_json::from_str(&json)?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported manifest version {} (expected {MANIFEST_VERSION})",
                m.version
            )));
        }
        Ok(m)
    }
}

/// A sample loaded back into memory, checksums verified.
#[derive(Debug, Clone)]
pub struct LoadedSample {
    pub sim: TactileImage,
    pub real: TactileImage,
    pub label: ContactLabel,
    pub contact_type: ContactType,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// SplitMix64: decorrelates per-sample RNG streams from a single seed.
fn mix_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0xA24BAED4963EE407) ^ index.wrapping_mul(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// The fixed pool of objects the sensor interacts with: one flat surface and
/// one edge feature, alternated across samples.
pub fn scenario_pool() -> Vec<ContactScenario> {
    vec![ContactScenario::flat_plate("plate"), ContactScenario::edge_bar("bar")]
}

/// Generate the (sim, real) image pair and label for one sample seed.
pub fn generate_sample(
    scenario: &ContactScenario,
    config: &CollectionConfig,
    sensor: &SensorModel,
    sample_seed: u64,
) -> Result<(TactileImage, TactileImage, ContactLabel)> {
    let (_, sheared, label) =
        sample_contact(scenario, &config.ranges, &config.geom, sample_seed)?;
    let depth = render_depth(&sheared, &scenario.shape, &config.geom)?;
    let sim = sim_tactile_image(&depth);
    let real = sensor.real_image(&depth, &label.shear);
    let real = if config.membrane.noise_amplitude > 0.0 {
        add_uniform_noise(&real, config.membrane.noise_amplitude, sample_seed ^ 0x5EED)
    } else {
        real
    };
    Ok((sim, real, label))
}

/// Collect a full dataset under `out_dir` and write `manifest.json`.
/// Deterministic for a given config, including across thread counts.
pub fn collect_dataset(config: &CollectionConfig, out_dir: &Path) -> Result<DatasetManifest> {
    let sensor = config.sensor_model()?;
    let scenarios = scenario_pool();
    let mut manifest = DatasetManifest {
        version: MANIFEST_VERSION,
        config: config.clone(),
        train: Vec::new(),
        val: Vec::new(),
    };
    for (split, count) in [(Split::Train, config.train_samples), (Split::Val, config.val_samples)]
    {
        if count == 0 {
            return Err(Error::EmptySplit(split.dir_name().to_string()));
        }
        let dir = out_dir.join(split.dir_name());
        fs::create_dir_all(&dir)?;
        let records: Result<Vec<SampleRecord>> = (0..count)
            .into_par_iter()
            .map(|index| {
                let scenario = &scenarios[index % scenarios.len()];
                let seed = mix_seed(config.seed, split.stream_id(), index as u64);
                let (sim, real, label) =
                    generate_sample(scenario, config, &sensor, seed).map_err(|e| {
                        Error::Record { index, why: e.to_string() }
                    })?;
                let sim_rel = format!("{}/sim_{index:05}.png", split.dir_name());
                let real_rel = format!("{}/real_{index:05}.png", split.dir_name());
                sim.save_png(&out_dir.join(&sim_rel))?;
                real.save_png(&out_dir.join(&real_rel))?;
                Ok(SampleRecord {
                    index,
                    object_id: scenario.object_id.clone(),
                    contact_type: scenario.contact_type,
                    label,
                    sim_sha256: sha256_hex(&fs::read(out_dir.join(&sim_rel))?),
                    real_sha256: sha256_hex(&fs::read(out_dir.join(&real_rel))?),
                    sim_path: sim_rel,
                    real_path: real_rel,
                })
            })
            .collect();
        match split {
            Split::Train => manifest.train = records?,
            Split::Val => manifest.val = records?,
        }
    }
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

/// Load one split back into memory, verifying checksums.
pub fn load_dataset(root: &Path, manifest: &DatasetManifest, split: Split) -> Result<Vec<LoadedSample>> {
    let records = manifest.records(split);
    if records.is_empty() {
        return Err(Error::EmptySplit(split.dir_name().to_string()));
    }
    records
        .par_iter()
        .map(|rec| {
            let check = |rel: &str, expect: &str| -> Result<()> {
                let bytes = fs::read(root.join(rel))?;
                let got = sha256_hex(&bytes);
                if got != expect {
                    return Err(Error::Record {
                        index: rec.index,
                        why: format!("checksum mismatch for {rel}"),
                    });
                }
                Ok(())
            };
            check(&rec.sim_path, &rec.sim_sha256)?;
            check(&rec.real_path, &rec.real_sha256)?;
            let sim = TactileImage::load_png(&root.join(&rec.sim_path), DomainTag::Sim)?;
            let real =
                TactileImage::load_png(&root.join(&rec.real_path), DomainTag::RealSynthetic)?;
            Ok(LoadedSample {
                sim,
                real,
                label: rec.label,
                contact_type: rec.contact_type,
            })
        })
        .collect()
}

/// The 6-dim regression target stored with every sample:
/// (pose_depth, pose_angle, shear_x, shear_y, shear_z, shear_yaw).
pub fn label_vec6(label: &ContactLabel) -> [f64; 6] {
    [
        label.pose_depth,
        label.pose_angle,
        label.shear.x,
        label.shear.y,
        label.shear.z,
        label.shear.yaw,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> CollectionConfig {
        CollectionConfig {
            train_samples: 6,
            val_samples: 4,
            ..CollectionConfig::desk()
        }
    }

    #[test]
    fn collect_writes_images_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config();
        let manifest = collect_dataset(&config, dir.path()).unwrap();
        assert_eq!(manifest.train.len(), 6);
        assert_eq!(manifest.val.len(), 4);
        assert!(dir.path().join("manifest.json").exists());
        for rec in manifest.train.iter().chain(manifest.val.iter()) {
            assert!(dir.path().join(&rec.sim_path).exists());
            assert!(dir.path().join(&rec.real_path).exists());
            assert_eq!(rec.sim_sha256.len(), 64);
        }
        // Both contact types appear.
        assert!(manifest.train.iter().any(|r| r.contact_type == ContactType::Surface));
        assert!(manifest.train.iter().any(|r| r.contact_type == ContactType::Edge));
    }

    #[test]
    fn collection_is_reproducible_byte_for_byte() {
        let config = tiny_config();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = collect_dataset(&config, a.path()).unwrap();
        let mb = collect_dataset(&config, b.path()).unwrap();
        assert_eq!(ma, mb);
        assert_eq!(
            fs::read(a.path().join("manifest.json")).unwrap(),
            fs::read(b.path().join("manifest.json")).unwrap()
        );
    }

    #[test]
    fn splits_use_disjoint_random_streams() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = collect_dataset(&tiny_config(), dir.path()).unwrap();
        // Same index, same scenario, different split: labels must differ.
        for (t, v) in manifest.train.iter().zip(manifest.val.iter()) {
            assert_ne!(t.label, v.label, "index {}", t.index);
        }
    }

    #[test]
    fn load_roundtrip_verifies_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config();
        let manifest = collect_dataset(&config, dir.path()).unwrap();
        let train = load_dataset(dir.path(), &manifest, Split::Train).unwrap();
        assert_eq!(train.len(), 6);
        for s in &train {
            assert_eq!(s.sim.shape(), (64, 64));
            assert_eq!(s.real.shape(), (64, 64));
            assert_eq!(s.sim.domain, DomainTag::Sim);
            assert_eq!(s.real.domain, DomainTag::RealSynthetic);
        }

        // Corrupt one image: loading must fail with a record error.
        let victim = &manifest.train[0].real_path;
        let mut bytes = fs::read(dir.path().join(victim)).unwrap();
        let n = bytes.len();
        bytes[n - 20] ^= 0xFF;
        fs::write(dir.path().join(victim), bytes).unwrap();
        let err = load_dataset(dir.path(), &manifest, Split::Train);
        assert!(matches!(err, Err(Error::Record { index: 0, .. })), "{err:?}");
    }

    #[test]
    fn real_images_vary_with_shear_but_sim_images_do_not_encode_it() {
        // Two samples with identical depth but different shear produce
        // identical sim images and different real images.
        let config = tiny_config();
        let sensor = config.sensor_model().unwrap();
        let scenario = ContactScenario::flat_plate("p");
        let pose = crate::pose::Pose4::new(0.0, 0.0, config.geom.tip_radius - 1.0, 0.0).unwrap();
        let depth = render_depth(&pose, &scenario.shape, &config.geom).unwrap();
        let sim = sim_tactile_image(&depth);
        let r1 = sensor.real_image(&depth, &crate::pose::ShearVector::new(2.0, 0.0, 0.0, 0.0));
        let r2 = sensor.real_image(&depth, &crate::pose::ShearVector::new(-2.0, 1.0, 0.0, 0.0));
        assert_ne!(r1, r2);
        assert_eq!(sim, sim_tactile_image(&depth));
    }

    #[test]
    fn label_vec6_ordering() {
        let label = ContactLabel {
            pose_depth: 1.5,
            pose_angle: -30.0,
            shear: crate::pose::ShearVector::new(0.1, 0.2, 0.3, 4.0),
        };
        assert_eq!(label_vec6(&label), [1.5, -30.0, 0.1, 0.2, 0.3, 4.0]);
    }
}
