//! Image comparison metrics: mean absolute pixel error and SSIM.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::image_types::TactileImage;

/// Mean absolute pixel error on the [0, 1] intensity scale.
pub fn mape(a: &TactileImage, b: &TactileImage) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch { a: a.shape(), b: b.shape() });
    }
    let n = a.values.len() as f64;
    let sum: f64 = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum();
    Ok(sum / n)
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01; // (K1 * L)^2 with L = 1
const SSIM_C2: f64 = 0.03 * 0.03; // (K2 * L)^2

/// Structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// averaged over all fully-valid windows.
pub fn ssim(a: &TactileImage, b: &TactileImage) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch { a: a.shape(), b: b.shape() });
    }
    let (h, w) = a.shape();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::WindowTooLarge { size: h.min(w), window: SSIM_WINDOW });
    }

    let kernel = gaussian_kernel();
    let x = a.values.mapv(|v| v as f64);
    let y = b.values.mapv(|v| v as f64);
    let xx = &x * &x;
    let yy = &y * &y;
    let xy = &x * &y;

    let mu_x = filter_valid(&x, &kernel);
    let mu_y = filter_valid(&y, &kernel);
    let e_xx = filter_valid(&xx, &kernel);
    let e_yy = filter_valid(&yy, &kernel);
    let e_xy = filter_valid(&xy, &kernel);

    let mut acc = 0.0;
    let mut count = 0usize;
    for ((r, c), &mx) in mu_x.indexed_iter() {
        let my = mu_y[[r, c]];
        let var_x = e_xx[[r, c]] - mx * mx;
        let var_y = e_yy[[r, c]] - my * my;
        let cov = e_xy[[r, c]] - mx * my;
        let v = ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2))
            / ((mx * mx + my * my + SSIM_C1) * (var_x + var_y + SSIM_C2));
        acc += v;
        count += 1;
    }
    Ok(acc / count as f64)
}

fn gaussian_kernel() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut k: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - half).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    for v in k.iter_mut() {
        *v /= s;
    }
    k
}

/// Separable valid-region filtering (no padding): output is
/// (h - win + 1) x (w - win + 1).
fn filter_valid(src: &Array2<f64>, kernel: &[f64]) -> Array2<f64> {
    let (h, w) = src.dim();
    let win = kernel.len();
    let ow = w - win + 1;
    let oh = h - win + 1;
    let mut tmp = Array2::zeros((h, ow));
    for r in 0..h {
        for c in 0..ow {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                acc += kv * src[[r, c + k]];
            }
            tmp[[r, c]] = acc;
        }
    }
    let mut out = Array2::zeros((oh, ow));
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                acc += kv * tmp[[r + k, c]];
            }
            out[[r, c]] = acc;
        }
    }
    out
}
