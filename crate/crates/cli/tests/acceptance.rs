//! Acceptance gate for the full pipeline. Each test prints one
//! `criterion N ...: PASS` / `FAIL` line.
//!
//! Criteria 1, 2, and 7 read the artifacts of two complete desk-scale
//! `reproduce` runs (built once, shared across tests). Criteria 3 and 4
//! re-run the servo tasks through the binary with the trained task
//! estimator so their wall time can be checked. Criteria 5 and 6 are
//! self-contained.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ndarray::ArrayD;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use tacshear::contact::tip_penetration;
use tacshear::image_types::{DomainTag, TactileImage};
use tacshear::losses;
use tacshear::markers::SensorModel;
use tacshear::metrics::{mape, ssim};
use tacshear::pose::{compute_shear_pose, Pose4};
use tacshear::sensor::render_depth;
use tacshear::servo::{run_task, ShearSource, TaskConfig, TrajectorySpec};
use tacshear::shape::{sdf_eval, ObjectShape, ShapeKind};

struct Artifacts {
    _dir: tempfile::TempDir,
    run_a: PathBuf,
    run_b: PathBuf,
}

static ARTIFACTS: OnceLock<Artifacts> = OnceLock::new();

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_tacshear")
}

fn run_reproduce(out: &Path) {
    let status = Command::new(bin())
        .args(["reproduce", "--preset", "desk", "--out"])
        .arg(out)
        .status()
        .expect("spawning tacshear");
    assert!(status.success(), "reproduce into {} failed", out.display());
}

/// Two complete desk-scale pipeline runs, trained once per test binary.
fn artifacts() -> &'static Artifacts {
    ARTIFACTS.get_or_init(|| {
        let dir = tempfile::Builder::new().prefix("tacshear-acceptance").tempdir().unwrap();
        let run_a = dir.path().join("run_a");
        let run_b = dir.path().join("run_b");
        run_reproduce(&run_a);
        run_reproduce(&run_b);
        Artifacts { _dir: dir, run_a, run_b }
    })
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn f(v: &serde_json::Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("missing field {key} in {v}"))
}

fn farr(v: &serde_json::Value, key: &str) -> Vec<f64> {
    v[key]
        .as_array()
        .unwrap_or_else(|| panic!("missing array {key}"))
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

/// Collects failure messages, prints the single pass/fail line, then
/// panics on failure.
struct Criterion {
    number: usize,
    name: &'static str,
    failures: Vec<String>,
}

impl Criterion {
    fn new(number: usize, name: &'static str) -> Self {
        Self { number, name, failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, msg: impl Into<String>) {
        if !ok {
            self.failures.push(msg.into());
        }
    }

    fn finish(self) {
        if self.failures.is_empty() {
            println!("criterion {} ({}): PASS", self.number, self.name);
        } else {
            println!(
                "criterion {} ({}): FAIL — {}",
                self.number,
                self.name,
                self.failures.join("; ")
            );
            panic!("criterion {} failed: {}", self.number, self.failures.join("; "));
        }
    }
}

// ---------------------------------------------------------------------------

#[test]
fn acceptance_1_translation_ordering() {
    let art = artifacts();
    let sh = read_json(&art.run_a.join("translator_shpix2pix/translation_eval.json"));
    let px = read_json(&art.run_a.join("translator_pix2pix/translation_eval.json"));

    let mut c = Criterion::new(1, "translation ordering per contact type");
    for contact in ["edge", "surface"] {
        let (sm, pm) = (f(&sh, &format!("{contact}_mape")), f(&px, &format!("{contact}_mape")));
        let (ss, ps) = (f(&sh, &format!("{contact}_ssim")), f(&px, &format!("{contact}_ssim")));
        c.check(
            sm <= 0.5 * pm,
            format!("{contact}: shpix2pix MAPE {sm:.5} > 0.5 x pix2pix {pm:.5}"),
        );
        c.check(
            ss > ps,
            format!("{contact}: shpix2pix SSIM {ss:.5} not above pix2pix {ps:.5}"),
        );
    }
    c.finish();
}

#[test]
fn acceptance_2_shear_decodability_contrast() {
    let art = artifacts();
    let sh = read_json(&art.run_a.join("estimator_shpix2pix/estimator_eval.json"));
    let px = read_json(&art.run_a.join("estimator_pix2pix/estimator_eval.json"));

    let mut c = Criterion::new(2, "shear decodability contrast");
    // Dimensions: 0 pose_depth, 1 pose_angle, 2 shear_x, 3 shear_y.
    let sh_mae = farr(&sh, "mae");
    let sh_base = farr(&sh, "baseline_mae");
    let px_mae = farr(&px, "mae");
    let px_base = farr(&px, "baseline_mae");

    for d in [2, 3] {
        c.check(
            sh_mae[d] <= 0.5,
            format!("shpix2pix shear dim {d} MAE {:.3} mm > 0.5 mm", sh_mae[d]),
        );
        // Labels are uniform over ±3 mm, so predicting the mean gives an
        // expected MAE of 1.5 mm; the pix2pix-fed model should do no
        // better than that.
        c.check(
            (px_mae[d] - px_base[d]).abs() <= 0.1 * px_base[d],
            format!(
                "pix2pix shear dim {d} MAE {:.3} not within ±10% of baseline {:.3}",
                px_mae[d], px_base[d]
            ),
        );
        c.check(
            (px_base[d] - 1.5).abs() < 0.15,
            format!("shear baseline {:.3} far from the 1.5 mm analytic value", px_base[d]),
        );
    }
    for (name, mae, base) in [
        ("shpix2pix", &sh_mae, &sh_base),
        ("pix2pix", &px_mae, &px_base),
    ] {
        for d in [0, 1] {
            c.check(
                mae[d] * 2.0 <= base[d],
                format!(
                    "{name} pose dim {d} MAE {:.4} not 2x better than baseline {:.4}",
                    mae[d], base[d]
                ),
            );
        }
    }
    c.finish();
}

/// Run a task through the binary with the trained task estimator and
/// return (summary, elapsed).
fn timed_task(out: &Path, extra: &[&str]) -> (serde_json::Value, Duration) {
    let estimator = artifacts().run_a.join("estimator_task/estimator.ckpt");
    let start = Instant::now();
    let status = Command::new(bin())
        .args(["run-task", "--estimator"])
        .arg(&estimator)
        .arg("--out")
        .arg(out)
        .args(extra)
        .status()
        .expect("spawning tacshear");
    let elapsed = start.elapsed();
    assert!(status.success(), "run-task {extra:?} failed");
    let text = fs::read_to_string(out.join("task.jsonl")).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(text.lines().next().unwrap()).unwrap();
    (summary, elapsed)
}

#[test]
fn acceptance_3_tracking_regime() {
    let art = artifacts();
    let dir = tempfile::tempdir().unwrap();
    let mut c = Criterion::new(3, "tracking error regime");
    let mut means = std::collections::HashMap::new();
    for name in ["circle", "square", "spiral", "loop"] {
        let (summary, elapsed) =
            timed_task(&dir.path().join(name), &["--trajectory", name]);
        let mean = f(&summary, "mean_error");
        let limit = if name == "loop" { 3.0 } else { 2.0 };
        c.check(
            summary["first_contact_loss"].is_null(),
            format!("{name}: lost contact at {}", summary["first_contact_loss"]),
        );
        c.check(mean <= limit, format!("{name}: mean error {mean:.3} mm > {limit} mm"));
        c.check(
            elapsed <= Duration::from_secs(120),
            format!("{name}: took {elapsed:.1?} > 2 min"),
        );
        means.insert(name, mean);
    }
    c.check(
        means["loop"] >= means["circle"],
        format!(
            "loop mean {:.3} below circle mean {:.3}",
            means["loop"], means["circle"]
        ),
    );
    let _ = art;
    c.finish();
}

#[test]
fn acceptance_4_colift_regime() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = Criterion::new(4, "co-lift error regime");
    for name in ["wave", "star"] {
        let (summary, elapsed) = timed_task(
            &dir.path().join(name),
            &["--trajectory", name, "--mount", "horizontal", "--gravity-bias", "0.3"],
        );
        let mean = f(&summary, "mean_error");
        c.check(
            summary["first_contact_loss"].is_null(),
            format!("{name}: lost contact at {}", summary["first_contact_loss"]),
        );
        c.check(mean <= 2.5, format!("{name}: mean error {mean:.3} mm > 2.5 mm"));
        c.check(
            elapsed <= Duration::from_secs(120),
            format!("{name}: took {elapsed:.1?} > 2 min"),
        );
    }
    c.finish();
}

#[test]
fn acceptance_5_shear_necessity_ablation() {
    // With the lateral shear gain zeroed, the follower must lose contact
    // within the first quarter period in at least 9 of 10 seeded runs.
    let mut c = Criterion::new(5, "shear-necessity ablation");
    let model = SensorModel::default_desk();
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    let mut losses_within_quarter = 0;
    for run in 0..10 {
        let mut config = TaskConfig::tracking(TrajectorySpec::Circle { radius: 25.0 });
        config.gains.k_shear_xy = 0.0;
        config.initial_offset =
            [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        let quarter = config.steps / 4;
        let lost = match run_task(&config, &model, ShearSource::Oracle) {
            Ok(log) => log.first_contact_loss.is_some_and(|s| s < quarter),
            // Contact never recovered at all: an immediate loss.
            Err(tacshear::Error::ContactLost { .. }) => true,
            Err(e) => panic!("run {run}: unexpected error {e}"),
        };
        if lost {
            losses_within_quarter += 1;
        }
    }
    c.check(
        losses_within_quarter >= 9,
        format!("only {losses_within_quarter}/10 runs lost contact within a quarter period"),
    );
    c.finish();
}

#[test]
fn acceptance_6_numeric_property_suite() {
    let start = Instant::now();
    let mut c = Criterion::new(6, "numeric property suite");

    // MAPE / SSIM identities.
    let pattern = {
        let values = ndarray::Array2::from_shape_fn((64, 64), |(r, col)| {
            (0.5 + 0.4 * ((r as f32 / 5.0).sin() * (col as f32 / 7.0).cos())).clamp(0.0, 1.0)
        });
        TactileImage::new(values, DomainTag::Sim).unwrap()
    };
    c.check(mape(&pattern, &pattern).unwrap() == 0.0, "mape(a,a) != 0");
    let self_ssim = ssim(&pattern, &pattern).unwrap();
    c.check((self_ssim - 1.0).abs() < 1e-9, format!("ssim(a,a) = {self_ssim}"));
    let zeros = TactileImage::zeros(64, DomainTag::Sim);
    let ones =
        TactileImage::new(ndarray::Array2::ones((64, 64)), DomainTag::Sim).unwrap();
    let const_ssim = ssim(&zeros, &ones).unwrap();
    c.check(
        (const_ssim - 1e-4).abs() < 2e-5,
        format!("constant-image SSIM {const_ssim:.2e} not ≈ 1e-4"),
    );

    // Gaussian NLL closed forms.
    let scalar = |v: f64| ArrayD::from_elem(ndarray::IxDyn(&[1]), v);
    let at_mode = losses::gaussian_nll(
        &scalar(0.7),
        &scalar(1.0 / (2.0 * std::f64::consts::PI)),
        &scalar(0.7),
    );
    c.check(at_mode.abs() < 1e-12, format!("NLL at mode with var 1/(2π) = {at_mode}"));
    let unit = losses::gaussian_nll(&scalar(0.0), &scalar(1.0), &scalar(1.0));
    c.check((unit - 1.41894).abs() < 1e-4, format!("unit-var NLL {unit}"));

    // Loss gradients against central finite differences.
    let mut rng = ChaCha12Rng::seed_from_u64(9);
    let rand_arr = |rng: &mut ChaCha12Rng, lo: f64, hi: f64| -> ArrayD<f64> {
        ArrayD::from_shape_fn(ndarray::IxDyn(&[2, 3]), |_| rng.random_range(lo..hi))
    };
    let fd_check = |c: &mut Criterion,
                    name: &str,
                    x: &ArrayD<f64>,
                    grad: &ArrayD<f64>,
                    loss: &mut dyn FnMut(&ArrayD<f64>) -> f64| {
        let eps = 1e-6;
        for idx in 0..x.len() {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus.as_slice_mut().unwrap()[idx] += eps;
            minus.as_slice_mut().unwrap()[idx] -= eps;
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * eps);
            let g = grad.as_slice().unwrap()[idx];
            let rel = (g - fd).abs() / fd.abs().max(1e-8);
            c.check(rel <= 1e-4, format!("{name} grad[{idx}]: analytic {g} vs FD {fd}"));
        }
    };

    let pred = rand_arr(&mut rng, 0.0, 1.0);
    let target = pred.mapv(|v| v + 0.3); // offset keeps |.| away from its kink
    let g = losses::mean_abs_error_grad(&pred, &target);
    fd_check(&mut c, "mean_abs_error", &pred, &g, &mut |p| {
        losses::mean_abs_error(p, &target)
    });

    let scores = rand_arr(&mut rng, -0.5, 1.5);
    let g = losses::lsgan_generator_grad(&scores);
    fd_check(&mut c, "lsgan_generator", &scores, &g, &mut |s| {
        losses::lsgan_generator_loss(s)
    });

    let real = rand_arr(&mut rng, -0.5, 1.5);
    let fake = rand_arr(&mut rng, -0.5, 1.5);
    let (g_real, g_fake) = losses::lsgan_discriminator_grads(&real, &fake);
    fd_check(&mut c, "lsgan_disc/real", &real, &g_real, &mut |r| {
        losses::lsgan_discriminator_loss(r, &fake)
    });
    fd_check(&mut c, "lsgan_disc/fake", &fake, &g_fake, &mut |f| {
        losses::lsgan_discriminator_loss(&real, f)
    });

    let mean = rand_arr(&mut rng, -1.0, 1.0);
    let var = rand_arr(&mut rng, 0.5, 2.0);
    let y = rand_arr(&mut rng, -1.0, 1.0);
    let (g_mean, g_var) = losses::gaussian_nll_grads(&mean, &var, &y);
    fd_check(&mut c, "gaussian_nll/mean", &mean, &g_mean, &mut |m| {
        losses::gaussian_nll(m, &var, &y)
    });
    fd_check(&mut c, "gaussian_nll/var", &var, &g_var, &mut |v| {
        losses::gaussian_nll(&mean, v, &y)
    });

    // SDF is 1-Lipschitz: |sdf(p) - sdf(q)| <= |p - q| for random pairs.
    let shapes = [
        ObjectShape::new(
            ShapeKind::Box { half_extents: [8.0, 5.0, 3.0] },
            Pose4 { x: 1.0, y: -2.0, z: 0.5, yaw: 30.0 },
        )
        .unwrap(),
        ObjectShape::new(
            ShapeKind::Ellipsoid { semi_axes: [6.0, 4.0, 2.0] },
            Pose4 { x: -1.0, y: 0.0, z: 1.0, yaw: -45.0 },
        )
        .unwrap(),
        ObjectShape::half_space(Pose4 { x: 0.0, y: 0.0, z: -1.0, yaw: 10.0 }),
    ];
    for (si, shape) in shapes.iter().enumerate() {
        for _ in 0..500 {
            let p: [f64; 3] = [
                rng.random_range(-15.0..15.0),
                rng.random_range(-15.0..15.0),
                rng.random_range(-15.0..15.0),
            ];
            let q: [f64; 3] = [
                rng.random_range(-15.0..15.0),
                rng.random_range(-15.0..15.0),
                rng.random_range(-15.0..15.0),
            ];
            let dist = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2))
                .sqrt();
            let diff = (sdf_eval(shape, p) - sdf_eval(shape, q)).abs();
            // Tiny slack for the ellipsoid's iterative projection.
            c.check(
                diff <= dist + 1e-7,
                format!("shape {si}: |Δsdf| {diff} > |Δp| {dist}"),
            );
        }
    }

    // Shear pose is invariant under a common rigid transform of both poses.
    for _ in 0..200 {
        let rand_pose = |rng: &mut ChaCha12Rng| Pose4 {
            x: rng.random_range(-20.0..20.0),
            y: rng.random_range(-20.0..20.0),
            z: rng.random_range(-20.0..20.0),
            yaw: rng.random_range(-170.0..170.0),
        };
        let a = rand_pose(&mut rng);
        let b = rand_pose(&mut rng);
        let g = rand_pose(&mut rng);
        let s1 = compute_shear_pose(&a, &b);
        let s2 = compute_shear_pose(&g.compose(&a), &g.compose(&b));
        for (v1, v2) in s1.as_array().iter().zip(s2.as_array().iter()) {
            c.check(
                (v1 - v2).abs() <= 1e-9,
                format!("shear equivariance broke: {v1} vs {v2}"),
            );
        }
    }

    // Oracle determinism: re-rendering the same contact is byte-identical.
    let model = SensorModel::default_desk();
    let shape = ObjectShape::half_space(Pose4::identity());
    let pose = Pose4 { x: 0.4, y: -0.2, z: model.geom.tip_radius - 1.2, yaw: 5.0 };
    assert!(tip_penetration(&shape, &pose, &model.geom) > 0.0);
    let depth = render_depth(&pose, &shape, &model.geom).unwrap();
    let shear = tacshear::pose::ShearVector::new(1.0, -0.5, 0.1, 3.0);
    let img1 = model.real_image(&depth, &shear);
    let img2 = model.real_image(&depth, &shear);
    c.check(img1 == img2, "oracle re-render differs in memory");
    let dir = tempfile::tempdir().unwrap();
    img1.save_png(&dir.path().join("a.png")).unwrap();
    img2.save_png(&dir.path().join("b.png")).unwrap();
    c.check(
        fs::read(dir.path().join("a.png")).unwrap() == fs::read(dir.path().join("b.png")).unwrap(),
        "oracle PNG bytes differ",
    );

    let elapsed = start.elapsed();
    c.check(
        elapsed <= Duration::from_secs(60),
        format!("property suite took {elapsed:.1?} > 1 min"),
    );
    c.finish();
}

#[test]
fn acceptance_7_end_to_end_reproducibility() {
    let art = artifacts();
    let mut c = Criterion::new(7, "end-to-end reproducibility");
    let reports = [
        "dataset/manifest.json",
        "translator_shpix2pix/translation_eval.json",
        "translator_pix2pix/translation_eval.json",
        "estimator_shpix2pix/estimator_eval.json",
        "estimator_pix2pix/estimator_eval.json",
        "estimator_task/estimator_eval.json",
        "summary.json",
    ];
    for rel in reports {
        let a = fs::read(art.run_a.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"));
        let b = fs::read(art.run_b.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"));
        c.check(a == b, format!("{rel} differs between runs"));
    }
    c.finish();
}
