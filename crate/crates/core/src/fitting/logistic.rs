use super::{infinite_errors, std_errors_from_jacobian, FitFlag, FitInput, ModelFit};
use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{ModelKind, ModelParams};
use crate::scalar::Real;

/// Multi-start configuration for the logistic kinds.
///
/// The fixed grid crosses `K ∈ ±k_factors·max|S|`, `r ∈ ±r_factors/range(D)`
/// and `a ∈ a_values`. On top of it, `profile_seeds` starts are taken from a
/// coarse scan over `(r, a)` with `K` solved in closed form, which also
/// covers negative `a` (a pole outside the data range).
#[derive(Debug, Clone, PartialEq)]
pub struct StartGrid {
    pub k_factors: Vec<f64>,
    pub r_factors: Vec<f64>,
    pub a_values: Vec<f64>,
    pub profile_seeds: usize,
}

impl Default for StartGrid {
    fn default() -> Self {
        StartGrid {
            k_factors: vec![1.0, 2.0],
            r_factors: vec![0.01, 0.1, 1.0],
            a_values: vec![1e-4, 1.0, 1e4],
            profile_seeds: 12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative SS decrease and relative step size below which the search
    /// stops.
    pub tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 500,
            tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone)]
struct Attempt<T> {
    params: [T; 3],
    ss: T,
    converged: bool,
    iterations: usize,
}

fn model<T: Real>(kind: ModelKind, p: [T; 3]) -> ModelParams<T> {
    match kind {
        ModelKind::Logistic => ModelParams::Logistic {
            k: p[0],
            a: p[1],
            r: p[2],
        },
        _ => ModelParams::LogisticSine {
            k: p[0],
            a: p[1],
            r: p[2],
        },
    }
}

fn sum_sq<T: Real>(kind: ModelKind, p: [T; 3], input: &FitInput<T>) -> T {
    let m = model(kind, p);
    input.d.iter().zip(&input.s).fold(T::zero(), |acc, (&x, &y)| {
        let r = y - m.value(x);
        acc + r * r
    })
}

/// Levenberg-Marquardt from one start. SS never increases across accepted
/// steps.
fn levenberg_marquardt<T: Real>(
    kind: ModelKind,
    input: &FitInput<T>,
    start: [T; 3],
    opts: &LmOptions,
) -> Attempt<T> {
    let tol = T::lit(opts.tolerance);
    let scale = input.s.iter().fold(T::zero(), |a, &y| a + y * y);
    let negligible = T::lit(1e-30) * (T::one() + scale);
    let mut p = start;
    let mut ss = sum_sq(kind, p, input);
    let mut lambda = T::lit(1e-3);
    let mut iterations = 0;
    if !ss.is_finite() {
        return Attempt {
            params: p,
            ss: T::infinity(),
            converged: false,
            iterations,
        };
    }
    while iterations < opts.max_iterations {
        if ss <= negligible {
            return Attempt {
                params: p,
                ss,
                converged: true,
                iterations,
            };
        }
        iterations += 1;
        let m = model(kind, p);
        let jac: Vec<Vec<T>> = input.d.iter().map(|&x| m.gradient(x)).collect();
        let resid: Vec<T> = input.d.iter().zip(&input.s).map(|(&x, &y)| y - m.value(x)).collect();
        if jac.iter().flatten().any(|v| !v.is_finite()) {
            break;
        }
        let g = linalg::gram(&jac);
        let rhs: Vec<T> = (0..3)
            .map(|j| jac.iter().zip(&resid).fold(T::zero(), |a, (row, &r)| a + row[j] * r))
            .collect();
        let diag_max = (0..3).fold(T::zero(), |a, i| a.max(g[i][i]));
        let floor = diag_max * T::lit(1e-12) + T::min_positive_value();
        loop {
            let mut damped = g.clone();
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] = row[i] + lambda * g[i][i].max(floor);
            }
            let step = linalg::solve_spd(&damped, &rhs);
            let Some(step) = step else {
                lambda = lambda * T::lit(10.0);
                if lambda > T::lit(1e20) {
                    return Attempt {
                        params: p,
                        ss,
                        converged: false,
                        iterations,
                    };
                }
                continue;
            };
            let step_norm = linalg::dot(&step, &step).sqrt();
            let p_norm = p.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
            let small_step = step_norm < tol * (p_norm + tol);
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            let trial_ss = sum_sq(kind, trial, input);
            if trial_ss.is_finite() && trial_ss < ss {
                let decrease = (ss - trial_ss) / ss;
                p = trial;
                ss = trial_ss;
                lambda = (lambda / T::lit(10.0)).max(T::lit(1e-15));
                if decrease < tol || small_step {
                    return Attempt {
                        params: p,
                        ss,
                        converged: true,
                        iterations,
                    };
                }
                break;
            }
            if small_step {
                // no descent left along ever shorter steps: a local minimum
                return Attempt {
                    params: p,
                    ss,
                    converged: true,
                    iterations,
                };
            }
            lambda = lambda * T::lit(10.0);
            if lambda > T::lit(1e20) {
                return Attempt {
                    params: p,
                    ss,
                    converged: true,
                    iterations,
                };
            }
        }
    }
    Attempt {
        params: p,
        ss,
        converged: false,
        iterations,
    }
}

/// Least-squares `K` for fixed `(a, r)` and its SS, or `None` when the
/// shape is unusable on the data.
fn profile_k<T: Real>(kind: ModelKind, a: T, r: T, input: &FitInput<T>) -> Option<(T, T)> {
    let shape = model(kind, [T::one(), a, r]);
    let g: Vec<T> = input.d.iter().map(|&x| shape.value(x)).collect();
    if g.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let gg = linalg::dot(&g, &g);
    if !(gg > T::zero()) {
        return None;
    }
    let k = linalg::dot(&g, &input.s) / gg;
    let ss = input
        .s
        .iter()
        .zip(&g)
        .fold(T::zero(), |acc, (&y, &gi)| acc + (y - k * gi) * (y - k * gi));
    Some((k, ss))
}

fn starts<T: Real>(kind: ModelKind, input: &FitInput<T>, grid: &StartGrid) -> Vec<[T; 3]> {
    let (lo, hi) = input.d_range().expect("checked");
    let range = hi - lo;
    let smax = input.s.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    let mut out = Vec::new();
    for &kf in &grid.k_factors {
        for ks in [T::one(), -T::one()] {
            for &rf in &grid.r_factors {
                for rs in [T::one(), -T::one()] {
                    for &a in &grid.a_values {
                        out.push([ks * T::lit(kf) * smax, T::lit(a), rs * T::lit(rf) / range]);
                    }
                }
            }
        }
    }
    if grid.profile_seeds == 0 {
        return out;
    }
    // (r, midpoint) scan: a·e^{−rD₀} = 1 puts the logistic's midpoint (or,
    // for a < 0, its pole) at D₀
    let mut scanned: Vec<(T, [T; 3])> = Vec::new();
    let steps = 24;
    let mids = 28;
    for i in 0..steps {
        let mag = T::lit(10f64.powf(-2.0 + 4.0 * i as f64 / (steps - 1) as f64)) / range;
        for rs in [T::one(), -T::one()] {
            let r = rs * mag;
            for j in 0..mids {
                let d0 = lo - range + T::lit(3.0 * j as f64 / (mids - 1) as f64) * range;
                let base = (r * d0).exp();
                for sign in [T::one(), -T::one()] {
                    if sign < T::zero() && d0 >= lo && d0 <= hi {
                        continue;
                    }
                    let a = sign * base;
                    if !a.is_finite() || a.is_zero() {
                        continue;
                    }
                    if let Some((k, ss)) = profile_k(kind, a, r, input) {
                        if ss.is_finite() {
                            scanned.push((ss, [k, a, r]));
                        }
                    }
                }
            }
        }
    }
    scanned.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite"));
    out.extend(scanned.into_iter().take(grid.profile_seeds).map(|(_, p)| p));
    out
}

fn lexicographic<T: Real>(a: &[T; 3], b: &[T; 3]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    std::cmp::Ordering::Equal
}

/// Fits `Logistic` or `LogisticSine` by multi-start Levenberg-Marquardt and
/// returns the converged attempt with the smallest SS.
pub fn fit_logistic_family<T: Real>(
    kind: ModelKind,
    input: &FitInput<T>,
    grid: &StartGrid,
    opts: &LmOptions,
) -> Result<ModelFit<T>> {
    if !kind.is_logistic() {
        return Err(Error::Kind {
            expected: "a logistic-family model",
            found: kind,
        });
    }
    input.check(kind)?;
    if input.s.iter().all(|v| v.is_zero()) {
        let params = model(kind, [T::zero(), T::one(), T::zero()]);
        return Ok(ModelFit::assemble(
            input,
            params,
            infinite_errors(3),
            true,
            0,
            vec![FitFlag::DegenerateResponse, FitFlag::SingularInformation],
        ));
    }
    let starts = starts(kind, input, grid);
    if starts.is_empty() {
        return Err(Error::Precondition("empty start grid".into()));
    }
    let attempts: Vec<Attempt<T>> = starts
        .iter()
        .map(|&s| levenberg_marquardt(kind, input, s, opts))
        .collect();
    let pick = |converged: bool| {
        attempts
            .iter()
            .filter(|a| a.converged == converged && a.ss.is_finite())
            .min_by(|x, y| {
                x.ss.partial_cmp(&y.ss)
                    .expect("finite")
                    .then_with(|| lexicographic(&x.params, &y.params))
            })
    };
    let Some(best) = pick(true) else {
        let fallback = pick(false);
        return Err(Error::NonConvergence {
            kind,
            best_ss: fallback.map_or(f64::INFINITY, |a| a.ss.to_f64_lossy()),
            best_params: fallback.map_or_else(Vec::new, |a| {
                a.params.iter().map(|v| v.to_f64_lossy()).collect()
            }),
        });
    };
    let params = model(kind, best.params);
    let jac: Vec<Vec<T>> = input.d.iter().map(|&x| params.gradient(x)).collect();
    let mut flags = Vec::new();
    let std_errors = std_errors_from_jacobian(&jac, best.ss).unwrap_or_else(|| {
        flags.push(FitFlag::SingularInformation);
        infinite_errors(3)
    });
    Ok(ModelFit::assemble(input, params, std_errors, true, best.iterations, flags))
}
