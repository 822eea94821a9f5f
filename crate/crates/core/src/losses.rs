//! Training objectives in f64 with analytic gradients.
//!
//! These are the reference definitions used by both the learning code and
//! the numeric test suite; the f32 training path mirrors them exactly.

use ndarray::ArrayD;

/// Mean absolute pixel error (the reconstruction term).
pub fn mean_abs_error(pred: &ArrayD<f64>, target: &ArrayD<f64>) -> f64 {
    let n = pred.len() as f64;
    pred.iter().zip(target.iter()).map(|(p, t)| (p - t).abs()).sum::<f64>() / n
}

/// d(mean_abs_error)/d(pred).
pub fn mean_abs_error_grad(pred: &ArrayD<f64>, target: &ArrayD<f64>) -> ArrayD<f64> {
    let n = pred.len() as f64;
    let mut g = pred.clone();
    for (g, t) in g.iter_mut().zip(target.iter()) {
        *g = (*g - t).signum() / n;
    }
    g
}

/// Least-squares GAN generator term: mean((s - 1)^2) over patch scores of
/// the generated image.
pub fn lsgan_generator_loss(scores: &ArrayD<f64>) -> f64 {
    let n = scores.len() as f64;
    scores.iter().map(|s| (s - 1.0) * (s - 1.0)).sum::<f64>() / n
}

pub fn lsgan_generator_grad(scores: &ArrayD<f64>) -> ArrayD<f64> {
    let n = scores.len() as f64;
    scores.mapv(|s| 2.0 * (s - 1.0) / n)
}

/// Least-squares GAN discriminator term:
/// 0.5 * mean((s_real - 1)^2) + 0.5 * mean(s_fake^2).
pub fn lsgan_discriminator_loss(real: &ArrayD<f64>, fake: &ArrayD<f64>) -> f64 {
    let nr = real.len() as f64;
    let nf = fake.len() as f64;
    0.5 * real.iter().map(|s| (s - 1.0) * (s - 1.0)).sum::<f64>() / nr
        + 0.5 * fake.iter().map(|s| s * s).sum::<f64>() / nf
}

pub fn lsgan_discriminator_grads(
    real: &ArrayD<f64>,
    fake: &ArrayD<f64>,
) -> (ArrayD<f64>, ArrayD<f64>) {
    let nr = real.len() as f64;
    let nf = fake.len() as f64;
    (real.mapv(|s| (s - 1.0) / nr), fake.mapv(|s| s / nf))
}

/// Gaussian negative log-likelihood, summed over output dimensions and
/// averaged over the batch:
///
/// ```text
/// L = mean_batch sum_dims [ 0.5 ln(2 pi var) + (y - mu)^2 / (2 var) ]
/// ```
pub fn gaussian_nll(mean: &ArrayD<f64>, var: &ArrayD<f64>, target: &ArrayD<f64>) -> f64 {
    let batch = mean.shape()[0] as f64;
    let mut acc = 0.0;
    for ((m, v), y) in mean.iter().zip(var.iter()).zip(target.iter()) {
        acc += 0.5 * (2.0 * std::f64::consts::PI * v).ln() + (y - m) * (y - m) / (2.0 * v);
    }
    acc / batch
}

/// Gradients of [`gaussian_nll`] with respect to (mean, var).
pub fn gaussian_nll_grads(
    mean: &ArrayD<f64>,
    var: &ArrayD<f64>,
    target: &ArrayD<f64>,
) -> (ArrayD<f64>, ArrayD<f64>) {
    let batch = mean.shape()[0] as f64;
    let mut dmean = mean.clone();
    let mut dvar = var.clone();
    for ((dm, dv), (m, (v, y))) in dmean
        .iter_mut()
        .zip(dvar.iter_mut())
        .zip(mean.iter().zip(var.iter().zip(target.iter())))
    {
        *dm = (m - y) / v / batch;
        *dv = (0.5 / v - (y - m) * (y - m) / (2.0 * v * v)) / batch;
    }
    (dmean, dvar)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    fn arr(shape: &[usize], f: impl Fn(usize) -> f64) -> ArrayD<f64> {
        let n: usize = shape.iter().product();
        ArrayD::from_shape_vec(IxDyn(shape), (0..n).map(f).collect()).unwrap()
    }

    fn check_grad(
        f: &dyn Fn(&ArrayD<f64>) -> f64,
        x: &ArrayD<f64>,
        analytic: &ArrayD<f64>,
        rel_tol: f64,
    ) {
        let eps = 1e-6;
        let mut xp = x.clone();
        for (idx, &g) in analytic.indexed_iter() {
            let orig = xp[&idx];
            xp[&idx] = orig + eps;
            let fp = f(&xp);
            xp[&idx] = orig - eps;
            let fm = f(&xp);
            xp[&idx] = orig;
            let fd = (fp - fm) / (2.0 * eps);
            let denom = fd.abs().max(g.abs()).max(1e-8);
            assert!(
                ((g - fd) / denom).abs() < rel_tol,
                "{idx:?}: analytic {g} vs fd {fd}"
            );
        }
    }

    #[test]
    fn mae_gradient_matches_finite_differences() {
        let pred = arr(&[2, 6], |i| (i as f64) * 0.31 - 1.0);
        let target = arr(&[2, 6], |i| ((i * 7 % 5) as f64) * 0.22);
        let g = mean_abs_error_grad(&pred, &target);
        check_grad(&|p| mean_abs_error(p, &target), &pred, &g, 1e-4);
    }

    #[test]
    fn lsgan_gradients_match_finite_differences() {
        let s = arr(&[3, 4], |i| (i as f64) * 0.17 - 0.8);
        let g = lsgan_generator_grad(&s);
        check_grad(&|x| lsgan_generator_loss(x), &s, &g, 1e-4);

        let real = arr(&[3, 4], |i| (i as f64) * 0.13 - 0.2);
        let fake = arr(&[3, 4], |i| (i as f64) * -0.09 + 0.4);
        let (dr, df) = lsgan_discriminator_grads(&real, &fake);
        check_grad(&|x| lsgan_discriminator_loss(x, &fake), &real, &dr, 1e-4);
        check_grad(&|x| lsgan_discriminator_loss(&real, x), &fake, &df, 1e-4);
    }

    #[test]
    fn nll_gradients_match_finite_differences() {
        let mean = arr(&[4, 3], |i| (i as f64) * 0.21 - 1.0);
        let var = arr(&[4, 3], |i| 0.3 + (i as f64) * 0.05);
        let target = arr(&[4, 3], |i| ((i * 5 % 7) as f64) * 0.3 - 0.9);
        let (dm, dv) = gaussian_nll_grads(&mean, &var, &target);
        check_grad(&|m| gaussian_nll(m, &var, &target), &mean, &dm, 1e-4);
        check_grad(&|v| gaussian_nll(&mean, v, &target), &var, &dv, 1e-4);
    }

    #[test]
    fn nll_closed_forms() {
        // Perfect mean with var = 1 / (2 pi): each term is 0.5 ln(1) = 0.
        let y = arr(&[2, 3], |i| i as f64 * 0.4);
        let var = ArrayD::from_elem(IxDyn(&[2, 3]), 1.0 / (2.0 * std::f64::consts::PI));
        assert!(gaussian_nll(&y, &var, &y).abs() < 1e-12);

        // mu = 0, var = 1, y = 1: 0.5 ln(2 pi) + 0.5 = 1.41894 per dim.
        let mu = ArrayD::zeros(IxDyn(&[1, 1]));
        let var = ArrayD::from_elem(IxDyn(&[1, 1]), 1.0);
        let y = ArrayD::from_elem(IxDyn(&[1, 1]), 1.0);
        let expect = 0.5 * (2.0 * std::f64::consts::PI).ln() + 0.5;
        assert!((gaussian_nll(&mu, &var, &y) - expect).abs() < 1e-12);
        assert!((expect - 1.41894).abs() < 1e-5);
    }

    #[test]
    fn perfect_reconstruction_and_fooled_discriminator_cost_nothing() {
        let x = arr(&[2, 5], |i| i as f64 * 0.1);
        assert_eq!(mean_abs_error(&x, &x), 0.0);
        let ones = ArrayD::from_elem(IxDyn(&[2, 5]), 1.0);
        assert_eq!(lsgan_generator_loss(&ones), 0.0);
        let zeros = ArrayD::zeros(IxDyn(&[2, 5]));
        assert_eq!(lsgan_discriminator_loss(&ones, &zeros), 0.0);
    }
}
