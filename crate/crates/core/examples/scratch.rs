use std::path::Path;
use tacshear::dataset::{load_dataset, DatasetManifest, Split};
use tacshear::estimate::*;
use tacshear::translate::Translator;

fn main() {
    let data = Path::new("/tmp/rep5/dataset");
    let manifest = DatasetManifest::load(&data.join("manifest.json")).unwrap();
    let train = load_dataset(data, &manifest, Split::Train).unwrap();
    let val = load_dataset(data, &manifest, Split::Val).unwrap();
    let real_val = labeled_images(&val, 4, |s| s.real.clone());
    let models: Vec<String> = std::env::var("MODELS")
        .unwrap_or("pix2pix,shpix2pix".into())
        .split(',')
        .map(str::to_string)
        .collect();
    for name in &models {
        let mut t =
            Translator::load(Path::new(&format!("/tmp/rep5/translator_{name}/translator.ckpt")))
                .unwrap();
        let images = t.translate_samples(&train);
        let residuals: Vec<ndarray::Array2<f32>> = train
            .iter()
            .zip(images.iter())
            .map(|(s, g)| &s.real.values - &g.values)
            .collect();
        let gen_train: Vec<LabeledImage> = train
            .iter()
            .zip(images)
            .map(|(s, image)| LabeledImage { image, target: estimator_target(&s.label, 4) })
            .collect();
        let config = EstimatorConfig {
            epochs: std::env::var("EPOCHS").map(|v| v.parse().unwrap()).unwrap_or(400),
            patience: std::env::var("PAT").map(|v| v.parse().unwrap()).unwrap_or(60),
            ..EstimatorConfig::desk(4)
        };
        let (mut est, curves) =
            train_estimator_aug(&gen_train, &real_val, &residuals, &config).unwrap();
        for e in curves.0.iter().step_by(25) {
            println!("ep {} train_nll {:.3} val_mae {:.4}", e.epoch, e.train_nll, e.val_mae);
        }
        let xfer = eval_estimator(&mut est, &real_val).unwrap();
        let ratios: Vec<f64> = xfer
            .mae
            .iter()
            .zip(&xfer.baseline_mae)
            .map(|(m, b)| (b / m * 100.0).round() / 100.0)
            .collect();
        println!("{name}: transfer mae={:?}", xfer.mae);
        println!("{name}: ratios {ratios:?}");
    }
}
