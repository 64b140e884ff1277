use std::cmp::Ordering;

use super::{FitFlag, FitInput, ModelFit};
use crate::error::{Error, Result};
use crate::linalg::{self, LeastSquares};
use crate::models::{lq_design_row, qq_design_row, ModelKind, ModelParams, Quadratic};
use crate::scalar::Real;

/// Distinct dominance values required strictly on each side of a joint.
const MIN_SIDE: usize = 3;

/// Golden-section iterations per interval; shrinks the bracket by 0.618^n.
const GOLDEN_STEPS: usize = 60;

/// Relative SS difference treated as a tie between joint candidates.
const TIE_TOL: f64 = 1e-12;

fn design<T: Real>(kind: ModelKind, x: T, d: T) -> Vec<T> {
    match kind {
        ModelKind::LinearQuadratic => lq_design_row(x, d).to_vec(),
        _ => qq_design_row(x, d).to_vec(),
    }
}

#[derive(Debug, Clone)]
struct Candidate<T> {
    d: T,
    params: Vec<T>,
    ls: LeastSquares<T>,
}

impl<T: Real> Candidate<T> {
    fn ss(&self) -> T {
        self.ls.rss
    }
}

fn solve_at<T: Real>(kind: ModelKind, input: &FitInput<T>, d: T) -> Candidate<T> {
    let rows: Vec<Vec<T>> = input.d.iter().map(|&x| design(kind, x, d)).collect();
    let ls = linalg::least_squares(&rows, &input.s);
    let mut params = ls.coef.clone();
    params.insert(3, d);
    Candidate { d, params, ls }
}

/// Residual SS of the best piecewise fit with the joint held at `d`.
pub fn profile_ss<T: Real>(kind: ModelKind, input: &FitInput<T>, d: T) -> T {
    solve_at(kind, input, d).ss()
}

fn distinct_sorted<T: Real>(xs: &[T]) -> Vec<T> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    v.dedup();
    v
}

/// Unconstrained polynomial fit of `degree` on the given points.
fn poly_fit<T: Real>(pts: &[(T, T)], degree: usize) -> Option<Quadratic<T>> {
    let rows: Vec<Vec<T>> = pts
        .iter()
        .map(|&(x, _)| (0..=degree).map(|k| x.powi(k as i32)).collect())
        .collect();
    let y: Vec<T> = pts.iter().map(|p| p.1).collect();
    let ls = linalg::least_squares(&rows, &y);
    if ls.rank() <= degree {
        return None;
    }
    let mut c = ls.coef;
    c.resize(3, T::zero());
    Some(Quadratic {
        c0: c[0],
        c1: c[1],
        c2: c[2],
    })
}

/// Real roots of `q` inside `[lo, hi]`.
fn roots_in<T: Real>(q: &Quadratic<T>, lo: T, hi: T) -> Vec<T> {
    let mut out = Vec::new();
    let tiny = T::lit(1e-14) * (q.c1.abs() + q.c0.abs());
    if q.c2.abs() <= tiny {
        if !q.c1.is_zero() {
            out.push(-q.c0 / q.c1);
        }
    } else {
        let disc = q.c1 * q.c1 - T::lit(4.0) * q.c2 * q.c0;
        if disc >= T::zero() {
            // numerically stable pair
            let s = disc.sqrt();
            let t = -(q.c1 + if q.c1 >= T::zero() { s } else { -s }) / T::lit(2.0);
            if !t.is_zero() {
                out.push(q.c0 / t);
            }
            out.push(t / q.c2);
        }
    }
    out.retain(|&r| r.is_finite() && r >= lo && r <= hi);
    out
}

/// Joints where separately fitted branches already meet: for a fixed
/// split of the points these are exact minimizers of the profile.
fn analytic_joints<T: Real>(kind: ModelKind, input: &FitInput<T>, lo: T, hi: T) -> Vec<T> {
    let left_degree = if kind == ModelKind::LinearQuadratic { 1 } else { 2 };
    let pts: Vec<(T, T)> = input.d.iter().copied().zip(input.s.iter().copied()).collect();
    let left: Vec<(T, T)> = pts.iter().copied().filter(|p| p.0 <= lo).collect();
    let right: Vec<(T, T)> = pts.iter().copied().filter(|p| p.0 >= hi).collect();
    let (Some(l), Some(r)) = (poly_fit(&left, left_degree), poly_fit(&right, 2)) else {
        return Vec::new();
    };
    let diff = Quadratic {
        c0: l.c0 - r.c0,
        c1: l.c1 - r.c1,
        c2: l.c2 - r.c2,
    };
    roots_in(&diff, lo, hi)
}

fn golden<T: Real>(f: impl Fn(T) -> T, mut lo: T, mut hi: T) -> T {
    let phi = T::lit(0.618_033_988_749_894_8);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_STEPS {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

fn lexicographic<T: Real>(a: &[T], b: &[T]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// Best candidate: smallest SS, near-ties broken by smaller `d` and then
/// the parameter vector.
fn better<T: Real>(a: &Candidate<T>, b: &Candidate<T>, tie: T) -> bool {
    let (sa, sb) = (a.ss(), b.ss());
    if (sa - sb).abs() > tie {
        return sa < sb;
    }
    match a.d.partial_cmp(&b.d).unwrap_or(Ordering::Equal) {
        Ordering::Less => true,
        Ordering::Greater => false,
        Ordering::Equal => lexicographic(&a.params, &b.params) == Ordering::Less,
    }
}

/// Fits L-Q or Q-Q by profiling the joint `d` and solving the remaining
/// coefficients exactly by linear least squares.
///
/// Candidate joints are every distinct `D` value and the golden-section
/// optimum of each gap between them (where at least three distinct `D`
/// values lie strictly on either side), the analytic joints of each gap,
/// and one joint beyond each end of the data, which reduces the model to a
/// single branch. `SE(d)` is half the width of the gap holding `d̂`; the
/// other standard errors are conditional on `d̂`.
pub fn fit_piecewise<T: Real>(kind: ModelKind, input: &FitInput<T>) -> Result<ModelFit<T>> {
    fit_piecewise_seeded(kind, input, None)
}

/// As [`fit_piecewise`] with an extra joint candidate, typically the L-Q
/// joint when fitting Q-Q (Q-Q contains L-Q at equal `d`).
pub(crate) fn fit_piecewise_seeded<T: Real>(
    kind: ModelKind,
    input: &FitInput<T>,
    seed: Option<T>,
) -> Result<ModelFit<T>> {
    if !kind.is_piecewise() {
        return Err(Error::Kind {
            expected: "a piecewise (L-Q or Q-Q) model",
            found: kind,
        });
    }
    input.check(kind)?;
    let xs = distinct_sorted(&input.d);
    let m = xs.len();
    // gaps (xs[k], xs[k+1]) with ≥ MIN_SIDE distinct values on each side
    let gaps: Vec<usize> = (MIN_SIDE - 1..m.saturating_sub(MIN_SIDE)).collect();
    if gaps.is_empty() {
        return Err(Error::InsufficientSupport { kind });
    }

    let mut ds: Vec<T> = Vec::new();
    // data points themselves, where the point sits on both branches
    for k in MIN_SIDE..m.saturating_sub(MIN_SIDE) {
        ds.push(xs[k]);
    }
    let profile = |d: T| profile_ss(kind, input, d);
    for &k in &gaps {
        let (lo, hi) = (xs[k], xs[k + 1]);
        ds.push((lo + hi) / T::lit(2.0));
        ds.push(golden(profile, lo, hi));
        ds.extend(analytic_joints(kind, input, lo, hi));
    }
    let (dmin, dmax) = (xs[0], xs[m - 1]);
    let span = dmax - dmin;
    let outside_lo = (dmin - span).max(T::zero());
    if outside_lo < dmin {
        ds.push(outside_lo);
    }
    ds.push(dmax + span);
    let seed_used = seed.filter(|s| s.is_finite() && *s >= T::zero());
    ds.extend(seed_used);
    ds.retain(|d| *d >= T::zero());

    let tie = T::lit(TIE_TOL) * (input.total_ss() + T::min_positive_value());
    let mut best: Option<Candidate<T>> = None;
    for d in ds {
        let c = solve_at(kind, input, d);
        if !c.ss().is_finite() {
            continue;
        }
        if best.as_ref().is_none_or(|b| better(&c, b, tie)) {
            best = Some(c);
        }
    }
    let best = best.ok_or(Error::InsufficientSupport { kind })?;

    let mut flags = Vec::new();
    let outside = best.d < dmin || best.d > dmax;
    if outside {
        flags.push(FitFlag::JointOutsideData);
    }
    let names = kind.param_names();
    let coef_names: Vec<&'static str> = names.iter().copied().filter(|n| *n != "d").collect();
    let dropped: Vec<&'static str> = best
        .ls
        .active
        .iter()
        .zip(&coef_names)
        .filter(|(a, _)| !**a)
        .map(|(_, n)| *n)
        .collect();
    if !dropped.is_empty() {
        flags.push(FitFlag::DroppedParameters(dropped));
    }

    let n = input.n();
    let arity = kind.arity();
    let cov = best.ls.unscaled_covariance();
    let s2 = best.ss() / T::from_len(n - arity);
    let mut std_errors: Vec<T> = (0..arity - 1)
        .map(|j| {
            if best.ls.active[j] {
                (s2 * cov[j][j]).max(T::zero()).sqrt()
            } else {
                T::infinity()
            }
        })
        .collect();
    let d_se = if outside {
        T::infinity()
    } else {
        // gap holding d̂; a joint on a data point takes the gap above it
        let k = xs.partition_point(|x| *x <= best.d).clamp(1, m - 1);
        let width = xs[k] - xs[k - 1];
        width / T::lit(2.0)
    };
    std_errors.insert(3, d_se);
    if std_errors.iter().any(|s| s.is_infinite()) && !outside {
        flags.push(FitFlag::SingularInformation);
    }
    let params = ModelParams::from_slice(kind, &best.params)?;
    Ok(ModelFit::assemble(input, params, std_errors, true, 0, flags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::{fit_all, fit_linear};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const LQ_402: ModelParams<f64> = ModelParams::LinearQuadratic {
        a: 0.331,
        b: 0.014,
        c: 0.00033,
        d: 28.341,
        e: -0.108,
    };
    const QQ_446: ModelParams<f64> = ModelParams::QuadraticQuadratic {
        a: -12.71,
        b: 0.572,
        c: -0.0066,
        d: 43.061,
        e: -0.0027,
        f: 0.333,
    };

    fn generate(p: &ModelParams<f64>, lo: f64, hi: f64, n: usize) -> FitInput<f64> {
        let d: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let s = d.iter().map(|&x| p.value(x)).collect();
        FitInput::new(d, s).unwrap()
    }

    fn assert_recovered(fit: &ModelFit<f64>, want: &ModelParams<f64>, tol: f64) {
        for (got, want) in fit.params.to_vec().iter().zip(want.to_vec()) {
            assert!(
                (got - want).abs() <= tol * want.abs().max(1e-3),
                "{:?} vs {:?}",
                fit.params,
                want
            );
        }
    }

    #[test]
    fn lq_recovery_and_zero_ss_at_truth() {
        let inp = generate(&LQ_402, 10.0, 60.0, 28);
        assert!(profile_ss(ModelKind::LinearQuadratic, &inp, 28.341) < 1e-18);
        let fit = fit_piecewise(ModelKind::LinearQuadratic, &inp).unwrap();
        assert_recovered(&fit, &LQ_402, 1e-6);
    }

    #[test]
    fn qq_recovery() {
        let inp = generate(&QQ_446, 20.0, 58.0, 28);
        let fit = fit_piecewise(ModelKind::QuadraticQuadratic, &inp).unwrap();
        assert_recovered(&fit, &QQ_446, 1e-6);
    }

    #[test]
    fn affine_data_matches_linear() {
        let inp = generate(&ModelParams::Linear { a: 2.0, b: -0.05 }, 5.0, 50.0, 20);
        let lin = fit_linear(&inp).unwrap();
        let fit = fit_piecewise(ModelKind::LinearQuadratic, &inp).unwrap();
        let p = fit.params.to_vec();
        assert!(p[2].abs() < 1e-9 && p[4].abs() < 1e-9, "{p:?}");
        assert_relative_eq!(fit.residual_ss, lin.residual_ss, epsilon = 1e-18);
    }

    #[test]
    fn too_few_points() {
        let inp = generate(&QQ_446, 20.0, 58.0, 5);
        assert!(matches!(
            fit_piecewise(ModelKind::QuadraticQuadratic, &inp),
            Err(Error::Precondition(_))
        ));
        // enough points but only five distinct D values
        let d = vec![1.0, 1.0, 2.0, 3.0, 4.0, 5.0, 5.0, 5.0];
        let s = vec![0.0, 1.0, 0.0, 2.0, 0.0, 1.0, 3.0, 0.0];
        let inp = FitInput::new(d, s).unwrap();
        assert!(matches!(
            fit_piecewise(ModelKind::LinearQuadratic, &inp),
            Err(Error::InsufficientSupport { .. })
        ));
    }

    #[test]
    fn quadratic_roots() {
        let q = Quadratic {
            c0: 2.0,
            c1: -3.0,
            c2: 1.0,
        };
        let mut r = roots_in(&q, 0.0, 10.0);
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(r, vec![1.0, 2.0]);
        assert_eq!(roots_in(&q, 1.5, 10.0), vec![2.0]);
    }

    fn noisy_input() -> impl Strategy<Value = FitInput<f64>> {
        (prop::collection::vec(0.0..60.0f64, 12..30), prop::collection::vec(-1.0..1.0f64, 30)).prop_map(
            |(d, noise)| {
                let s = d.iter().zip(&noise).map(|(x, e)| 0.5 - 0.01 * x + e).collect();
                FitInput::new(d, s).unwrap()
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn nested_models_never_fit_worse(inp in noisy_input()) {
            let kinds = [ModelKind::Linear, ModelKind::LinearQuadratic, ModelKind::QuadraticQuadratic];
            let fits = fit_all(&kinds, &inp);
            let ss: Vec<Option<f64>> = fits.iter().map(|(_, f)| f.as_ref().ok().map(|f| f.residual_ss)).collect();
            if let (Some(lin), Some(lq)) = (ss[0], ss[1]) {
                prop_assert!(lq <= lin + 1e-9);
            }
            if let (Some(lq), Some(qq)) = (ss[1], ss[2]) {
                prop_assert!(qq <= lq + 1e-9);
            }
        }

        #[test]
        fn inner_solve_is_first_order_optimal(inp in noisy_input()) {
            let Ok(fit) = fit_piecewise(ModelKind::QuadraticQuadratic, &inp) else { return Ok(()); };
            let base = fit.residual_ss;
            let p = fit.params.to_vec();
            // Large cancelling coefficients make the SS itself noisy at
            // the level of the biggest term times machine epsilon.
            let x = inp.d.iter().cloned().fold(0.0, f64::max);
            let scale = p[0].abs() + p[1].abs() * x + p[2].abs() * x * x + p[4].abs() * 2.0 * x * x + p[5].abs() * x;
            let abs_resid: f64 = inp.d.iter().zip(&inp.s).map(|(&d, &y)| (y - fit.params.value(d)).abs()).sum();
            let tol = 1e-12 * (1.0 + base) + 1e-15 * scale * abs_resid;
            for j in [0usize, 1, 2, 4, 5] {
                for h in [1e-6, -1e-6] {
                    let mut q = p.clone();
                    q[j] += h;
                    let m = ModelParams::from_slice(ModelKind::QuadraticQuadratic, &q).unwrap();
                    let ss: f64 = inp.d.iter().zip(&inp.s).map(|(&x, &y)| (y - m.value(x)).powi(2)).sum();
                    prop_assert!(ss >= base - tol);
                }
            }
        }
    }
}
