//! The dominance map `D(t+1) = D(t)·(1 + S(D(t)))`: trajectories, numeric
//! fixed points and their stability.

use crate::error::{Error, Result};
use crate::fitting::ModelFit;
use crate::models::{qualitative_equilibria, regime_at, ModelParams, QualitativeEquilibrium, RegimeAt};
use crate::scalar::Real;

/// Step size below which a trajectory counts as converged.
pub const CONVERGENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryStatus<T> {
    Converged(T),
    /// Period-2 cycle.
    Oscillating,
    /// First step with `D ≤ 0`.
    Collapsed(usize),
    MaxSteps,
}

impl<T> TrajectoryStatus<T> {
    pub fn label(&self) -> &'static str {
        match self {
            TrajectoryStatus::Converged(_) => "converged",
            TrajectoryStatus::Oscillating => "oscillating",
            TrajectoryStatus::Collapsed(_) => "collapsed",
            TrajectoryStatus::MaxSteps => "max-steps",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub d0: T,
    /// `values[0] = d0`.
    pub values: Vec<T>,
    pub status: TrajectoryStatus<T>,
}

/// One application of the map.
pub fn step<T: Real>(params: &ModelParams<T>, d: T) -> T {
    d * (T::one() + params.value(d))
}

/// Iterates the map for at most `max_steps` steps.
pub fn iterate<T: Real>(params: &ModelParams<T>, d0: T, max_steps: usize) -> Result<Trajectory<T>> {
    if !(d0 > T::zero()) || !d0.is_finite() {
        return Err(Error::Precondition(format!("initial dominance must be positive, got {d0}")));
    }
    if max_steps == 0 {
        return Err(Error::Precondition("max_steps must be at least 1".into()));
    }
    let tol = T::lit(CONVERGENCE_TOL);
    let mut values = vec![d0];
    let mut status = TrajectoryStatus::MaxSteps;
    for t in 1..=max_steps {
        let prev = values[t - 1];
        let next = step(params, prev);
        if !next.is_finite() {
            return Err(Error::Divergence { step: t });
        }
        values.push(next);
        if next <= T::zero() {
            status = TrajectoryStatus::Collapsed(t);
            break;
        }
        if (next - prev).abs() < tol {
            status = TrajectoryStatus::Converged(next);
            break;
        }
        // A damped alternation also returns close to `values[t - 2]`; a
        // cycle needs a step that stays well clear of zero.
        if t >= 2 && (next - values[t - 2]).abs() < tol && (next - prev).abs() > tol.sqrt() {
            status = TrajectoryStatus::Oscillating;
            break;
        }
    }
    Ok(Trajectory { d0, values, status })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointVerdict {
    Stable,
    Unstable,
    Marginal,
}

impl FixedPointVerdict {
    pub fn label(self) -> &'static str {
        match self {
            FixedPointVerdict::Stable => "stable",
            FixedPointVerdict::Unstable => "unstable",
            FixedPointVerdict::Marginal => "marginal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint<T> {
    pub d_star: T,
    /// `g'(D*) = 1 + S(D*) + D*·S'(D*)`.
    pub multiplier: T,
    pub verdict: FixedPointVerdict,
}

/// Grid points of the sign scan.
pub const SCAN_POINTS: usize = 10_000;

const ROOT_TOL: f64 = 1e-10;
const RESIDUAL_TOL: f64 = 1e-9;
const MARGINAL_TOL: f64 = 1e-9;

fn classify<T: Real>(multiplier: T) -> FixedPointVerdict {
    let m = multiplier.abs();
    let tol = T::lit(MARGINAL_TOL);
    if m < T::one() - tol {
        FixedPointVerdict::Stable
    } else if m > T::one() + tol {
        FixedPointVerdict::Unstable
    } else {
        FixedPointVerdict::Marginal
    }
}

fn bisect<T: Real>(params: &ModelParams<T>, mut lo: T, mut hi: T, mut flo: T) -> T {
    let tol = T::lit(ROOT_TOL);
    while hi - lo > tol {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = params.value(mid);
        if fm.is_zero() {
            return mid;
        }
        if (fm < T::zero()) == (flo < T::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    let (fl, fh) = (params.value(lo).abs(), params.value(hi).abs());
    if fl <= fh {
        lo
    } else {
        hi
    }
}

/// Roots of `S` on `[lo, hi]` (non-zero roots of the map's fixed-point
/// equation) with their map multipliers. Sign changes across poles are
/// discarded by the residual check.
pub fn fixed_points<T: Real>(params: &ModelParams<T>, lo: T, hi: T) -> Result<Vec<FixedPoint<T>>> {
    if !(lo >= T::zero()) || !(hi > lo) || !hi.is_finite() {
        return Err(Error::Precondition(format!("invalid domain [{lo}, {hi}]")));
    }
    let n = SCAN_POINTS;
    let h = (hi - lo) / T::from_len(n - 1);
    let xs: Vec<T> = (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + h * T::from_len(i) })
        .collect();
    let fs: Vec<T> = xs.iter().map(|&x| params.value(x)).collect();
    let mut roots: Vec<T> = Vec::new();
    for i in 0..n {
        let f = fs[i];
        if !f.is_finite() {
            continue;
        }
        if f.is_zero() {
            roots.push(xs[i]);
            continue;
        }
        if i + 1 < n {
            let g = fs[i + 1];
            if g.is_finite() && !g.is_zero() && (f < T::zero()) != (g < T::zero()) {
                roots.push(bisect(params, xs[i], xs[i + 1], f));
            }
        }
    }
    let residual = T::lit(RESIDUAL_TOL);
    let dedupe = T::lit(ROOT_TOL * 10.0);
    let mut out: Vec<FixedPoint<T>> = Vec::new();
    for r in roots {
        let s = params.value(r);
        if !(s.abs() < residual) {
            continue;
        }
        if out.last().is_some_and(|p| (p.d_star - r).abs() <= dedupe) {
            continue;
        }
        let Ok(slope) = params.derivative(r) else { continue };
        let multiplier = T::one() + s + r * slope;
        out.push(FixedPoint {
            d_star: r,
            multiplier,
            verdict: classify(multiplier),
        });
    }
    Ok(out)
}

/// Community resilience of a linear fit: the slope `b` and its magnitude.
/// A steeper negative slope means a faster return to equilibrium.
pub fn resilience<T: Real>(fit: &ModelFit<T>) -> Result<(T, T)> {
    match fit.params {
        ModelParams::Linear { b, .. } => Ok((b, b.abs())),
        _ => Err(Error::Kind {
            expected: "a linear model",
            found: fit.kind(),
        }),
    }
}

/// Everything known about a fitted curve's equilibria over a dominance
/// range: sampled regimes, sign-rule equilibria (piecewise kinds only) and
/// numeric fixed points of the map.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeProfile<T> {
    pub samples: Vec<(T, RegimeAt)>,
    pub qualitative: Vec<QualitativeEquilibrium<T>>,
    pub fixed_points: Vec<FixedPoint<T>>,
}

pub fn regime_profile<T: Real>(
    params: &ModelParams<T>,
    lo: T,
    hi: T,
    samples: usize,
) -> Result<RegimeProfile<T>> {
    let fixed_points = fixed_points(params, lo, hi)?;
    let samples = samples.max(2);
    let h = (hi - lo) / T::from_len(samples - 1);
    let samples = (0..samples)
        .filter_map(|i| {
            let x = lo + h * T::from_len(i);
            regime_at(params, x).ok().map(|r| (x, r))
        })
        .collect();
    let qualitative = if params.kind().is_piecewise() {
        qualitative_equilibria(params)?
    } else {
        Vec::new()
    };
    Ok(RegimeProfile {
        samples,
        qualitative,
        fixed_points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    const LIN_405: ModelParams<f64> = ModelParams::Linear { a: 1.551, b: -0.033 };

    #[test]
    fn linear_converges_to_root() {
        let tr = iterate(&LIN_405, 30.0, 200).unwrap();
        match tr.status {
            TrajectoryStatus::Converged(d) => assert!((d - 47.0).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
        assert_eq!(tr.values[0], 30.0);
    }

    #[test]
    fn damped_alternation_converges() {
        let tr = iterate(&LIN_405, 60.0, 500).unwrap();
        match tr.status {
            TrajectoryStatus::Converged(d) => assert!((d - 47.0).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn flat_map_converges_immediately() {
        let tr = iterate(&ModelParams::Linear { a: 0.0, b: 0.0 }, 12.5, 10).unwrap();
        assert_eq!(tr.values, vec![12.5, 12.5]);
        assert_eq!(tr.status, TrajectoryStatus::Converged(12.5));
    }

    #[test]
    fn collapse_is_reported() {
        let tr = iterate(&ModelParams::Linear { a: -2.0, b: 0.0 }, 10.0, 10).unwrap();
        assert_eq!(tr.status, TrajectoryStatus::Collapsed(1));
        assert_eq!(tr.values, vec![10.0, -10.0]);
    }

    #[test]
    fn period_two_cycle() {
        // S(2) = 1 and S(4) = −0.5, so 2 ↦ 4 ↦ 2
        let cyc = ModelParams::Linear { a: 2.5, b: -0.75 };
        let tr = iterate(&cyc, 2.0, 10).unwrap();
        assert_eq!(tr.values, vec![2.0, 4.0, 2.0]);
        assert_eq!(tr.status, TrajectoryStatus::Oscillating);
    }

    #[test]
    fn invalid_inputs() {
        assert!(iterate(&LIN_405, 0.0, 10).is_err());
        assert!(iterate(&LIN_405, 1.0, 0).is_err());
        assert!(fixed_points(&LIN_405, 5.0, 5.0).is_err());
        let blow = ModelParams::Linear { a: 1e300, b: 0.0 };
        assert!(matches!(iterate(&blow, 1e10, 5), Err(Error::Divergence { step: 1 })));
    }

    #[test]
    fn linear_fixed_point() {
        let fps = fixed_points(&LIN_405, 0.0, 100.0).unwrap();
        assert_eq!(fps.len(), 1);
        assert_relative_eq!(fps[0].d_star, 47.0, epsilon = 1e-8);
        assert_relative_eq!(fps[0].multiplier, -0.551, epsilon = 1e-8);
        assert_eq!(fps[0].verdict, FixedPointVerdict::Stable);
    }

    #[test]
    fn positive_logistic_has_no_root() {
        let p = ModelParams::Logistic {
            k: 4.741,
            a: 0.026,
            r: -0.206,
        };
        assert!(fixed_points(&p, 0.0, 100.0).unwrap().is_empty());
    }

    #[test]
    fn sine_zeros() {
        let p = ModelParams::LogisticSine {
            k: 1.0,
            a: 1.0,
            r: 0.1,
        };
        let fps = fixed_points(&p, 1.0, 25.0).unwrap();
        let roots: Vec<f64> = fps.iter().map(|f| f.d_star).collect();
        assert_eq!(roots.len(), 2, "{roots:?}");
        assert!((roots[0] - PI * PI).abs() < 1e-9);
        assert!((roots[1] - 2.0 * PI * PI).abs() < 1e-9);
    }

    #[test]
    fn poles_are_not_roots() {
        // 1 + a·e^{−rD} crosses zero at D = ln 2 / 0.1 ≈ 6.93
        let p = ModelParams::Logistic { k: 1.0, a: -2.0, r: 0.1 };
        assert!(fixed_points(&p, 0.0, 20.0).unwrap().is_empty());
    }

    #[test]
    fn profile_of_piecewise_fit() {
        let p = ModelParams::LinearQuadratic {
            a: 0.331,
            b: 0.014,
            c: 0.00033,
            d: 28.341,
            e: -0.108,
        };
        let prof = regime_profile(&p, 10.0, 60.0, 51).unwrap();
        assert_eq!(prof.samples.len(), 51);
        assert_eq!(prof.qualitative.len(), 2);
        assert_eq!(prof.samples[0].1, RegimeAt::Regime(crate::models::Regime::Did));
        let lin = regime_profile(&LIN_405, 0.0, 100.0, 11).unwrap();
        assert!(lin.qualitative.is_empty());
        assert_eq!(lin.fixed_points.len(), 1);
    }

    #[test]
    fn resilience_of_linear_only() {
        let lin = ModelFit::reported(LIN_405, vec![0.182, 0.004], 0.72, 30).unwrap();
        assert_eq!(resilience(&lin).unwrap(), (-0.033, 0.033));
        let lq = ModelFit::reported(
            ModelParams::LinearQuadratic {
                a: 0.0,
                b: 0.0,
                c: 0.0,
                d: 1.0,
                e: 0.0,
            },
            vec![0.0; 5],
            0.5,
            10,
        )
        .unwrap();
        assert!(matches!(resilience(&lq), Err(Error::Kind { .. })));
    }

    proptest! {
        #[test]
        fn map_consistency(a in 0.1..2.0f64, b in -0.1..-0.001f64, d0 in 1.0..80.0f64) {
            let p = ModelParams::Linear { a, b };
            let tr = iterate(&p, d0, 50).unwrap();
            for w in tr.values.windows(2) {
                prop_assert_eq!(w[1], w[0] * (1.0 + p.value(w[0])));
            }
        }

        #[test]
        fn fixed_points_are_roots_and_attract_when_stable(a in 0.1..2.0f64, b in -0.1..-0.01f64) {
            let p = ModelParams::Linear { a, b };
            for fp in fixed_points(&p, 0.0, 500.0).unwrap() {
                prop_assert!(p.value(fp.d_star).abs() < 1e-9);
                prop_assert!((step(&p, fp.d_star) - fp.d_star).abs() < 1e-8);
                if fp.verdict == FixedPointVerdict::Stable {
                    for f in [0.99, 1.01] {
                        let tr = iterate(&p, fp.d_star * f, 5000).unwrap();
                        let last = *tr.values.last().unwrap();
                        prop_assert!((last - fp.d_star).abs() < 1e-6);
                    }
                }
            }
        }
    }
}
