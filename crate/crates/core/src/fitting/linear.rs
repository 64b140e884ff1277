use super::{FitFlag, FitInput, ModelFit};
use crate::error::Result;
use crate::models::{ModelKind, ModelParams};
use crate::scalar::Real;

/// Ordinary least squares `S = a + bD` with textbook standard errors and
/// Pearson R. A constant response still yields a fit, flagged
/// [`FitFlag::UndefinedCorrelation`].
pub fn fit_linear<T: Real>(input: &FitInput<T>) -> Result<ModelFit<T>> {
    input.check(ModelKind::Linear)?;
    let n = T::from_len(input.n());
    let mx = input.d.iter().fold(T::zero(), |a, &v| a + v) / n;
    let my = input.s.iter().fold(T::zero(), |a, &v| a + v) / n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in input.d.iter().zip(&input.s) {
        let (dx, dy) = (x - mx, y - my);
        sxx = sxx + dx * dx;
        sxy = sxy + dx * dy;
        syy = syy + dy * dy;
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let params = ModelParams::Linear { a, b };
    let rss = input.residual_ss(&params);
    let s2 = rss / (n - T::lit(2.0));
    let se_b = (s2 / sxx).sqrt();
    let se_a = (s2 * (T::one() / n + mx * mx / sxx)).sqrt();

    let mut flags = Vec::new();
    let pearson_r = if syy > T::zero() {
        Some((sxy / (sxx.sqrt() * syy.sqrt())).max(-T::one()).min(T::one()))
    } else {
        flags.push(FitFlag::UndefinedCorrelation);
        None
    };
    let mut fit = ModelFit::assemble(input, params, vec![se_a, se_b], true, 0, flags);
    fit.pearson_r = pearson_r;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::std_errors_from_jacobian;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn line(a: f64, b: f64, xs: &[f64]) -> FitInput<f64> {
        FitInput::new(xs.to_vec(), xs.iter().map(|x| a + b * x).collect()).unwrap()
    }

    #[test]
    fn recovers_noise_free_line() {
        let xs: Vec<f64> = (0..28).map(|i| 10.0 + i as f64 * 1.7).collect();
        let fit = fit_linear(&line(1.551, -0.033, &xs)).unwrap();
        match fit.params {
            ModelParams::Linear { a, b } => {
                assert!((a - 1.551).abs() < 1e-9);
                assert!((b + 0.033).abs() < 1e-9);
            }
            _ => unreachable!(),
        }
        assert_relative_eq!(fit.pearson_r.unwrap(), -1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.r2.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn flat_response_keeps_fit_and_flags_r() {
        let fit = fit_linear(&line(1.0, 0.0, &[10.0, 20.0, 30.0])).unwrap();
        assert_eq!(fit.params, ModelParams::Linear { a: 1.0, b: 0.0 });
        assert_eq!(fit.pearson_r, None);
        assert!(fit.has_flag(&FitFlag::UndefinedCorrelation));
    }

    #[test]
    fn textbook_errors_match_information_matrix() {
        let xs = [1.0, 2.5, 3.0, 4.5, 7.0, 8.0, 11.0];
        let ys = [2.0, 1.0, 3.5, 2.0, 5.0, 4.0, 7.5];
        let inp = FitInput::new(xs.to_vec(), ys.to_vec()).unwrap();
        let fit = fit_linear(&inp).unwrap();
        let jac: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x]).collect();
        let se = std_errors_from_jacobian(&jac, fit.residual_ss).unwrap();
        for (a, b) in fit.std_errors.iter().zip(&se) {
            assert_relative_eq!(*a, *b, max_relative = 1e-10);
        }
    }

    #[test]
    fn slope_recovery_under_noise() {
        let xs: Vec<f64> = (0..28).map(|i| 20.0 + i as f64 * 2.0).collect();
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(405);
        let mut hits = 0;
        for _ in 0..200 {
            let ys: Vec<f64> = xs.iter().map(|x| 1.551 - 0.033 * x + noise.sample(&mut rng)).collect();
            let fit = fit_linear(&FitInput::new(xs.clone(), ys).unwrap()).unwrap();
            if let ModelParams::Linear { b, .. } = fit.params {
                if (b + 0.033).abs() < 0.01 {
                    hits += 1;
                }
            }
        }
        assert!(hits >= 190, "{hits}/200");
    }
}
