//! The five dominance-stability model families.
//!
//! Piecewise kinds are written in the joint-point form
//!
//! ```text
//! L-Q: S = a + bD + cD² + |D − d|·[c(D + d) + e]
//! Q-Q: S = a + bD + cD² + |D − d|·[e(D + d) + f]
//! ```
//!
//! (`(D − d)·Sign(D − d)` with `Sign(0) = 0`). Expanding each side gives
//!
//! ```text
//! L-Q  D < d: (a + cd² + ed) + (b − e)D
//!      D > d: (a − cd² − ed) + (b + e)D + 2cD²
//! Q-Q  D < d: (a + ed² + fd) + (b − f)D + (c − e)D²
//!      D > d: (a − ed² − fd) + (b + f)D + (c + e)D²
//! ```
//!
//! and both sides meet at `a + bd + cd²`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Linear,
    Logistic,
    LogisticSine,
    LinearQuadratic,
    QuadraticQuadratic,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Logistic,
        ModelKind::LogisticSine,
        ModelKind::Linear,
        ModelKind::LinearQuadratic,
        ModelKind::QuadraticQuadratic,
    ];

    pub fn arity(self) -> usize {
        self.param_names().len()
    }

    /// Parameter order used by [`ModelParams::to_vec`] and `from_slice`.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Linear => &["a", "b"],
            ModelKind::Logistic | ModelKind::LogisticSine => &["K", "a", "r"],
            ModelKind::LinearQuadratic => &["a", "b", "c", "d", "e"],
            ModelKind::QuadraticQuadratic => &["a", "b", "c", "d", "e", "f"],
        }
    }

    /// Short machine name, also accepted by `FromStr`.
    pub fn slug(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Logistic => "logistic",
            ModelKind::LogisticSine => "logistic-sine",
            ModelKind::LinearQuadratic => "l-q",
            ModelKind::QuadraticQuadratic => "q-q",
        }
    }

    pub fn is_piecewise(self) -> bool {
        matches!(self, ModelKind::LinearQuadratic | ModelKind::QuadraticQuadratic)
    }

    pub fn is_logistic(self) -> bool {
        matches!(self, ModelKind::Logistic | ModelKind::LogisticSine)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Linear => "Linear",
            ModelKind::Logistic => "Logistic",
            ModelKind::LogisticSine => "Logistic-Sine",
            ModelKind::LinearQuadratic => "L-Q",
            ModelKind::QuadraticQuadratic => "Q-Q",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "linear" => Ok(ModelKind::Linear),
            "logistic" => Ok(ModelKind::Logistic),
            "logistic-sine" | "logsine" | "sine" => Ok(ModelKind::LogisticSine),
            "l-q" | "lq" | "linear-quadratic" => Ok(ModelKind::LinearQuadratic),
            "q-q" | "qq" | "quadratic-quadratic" => Ok(ModelKind::QuadraticQuadratic),
            other => Err(format!("unknown model kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelParams<T> {
    Linear { a: T, b: T },
    Logistic { k: T, a: T, r: T },
    LogisticSine { k: T, a: T, r: T },
    LinearQuadratic { a: T, b: T, c: T, d: T, e: T },
    QuadraticQuadratic { a: T, b: T, c: T, d: T, e: T, f: T },
}

/// `c0 + c1·x + c2·x²`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadratic<T> {
    pub c0: T,
    pub c1: T,
    pub c2: T,
}

impl<T: Real> Quadratic<T> {
    pub fn eval(&self, x: T) -> T {
        self.c0 + x * (self.c1 + x * self.c2)
    }

    pub fn slope(&self, x: T) -> T {
        self.c1 + (self.c2 + self.c2) * x
    }

    /// Stationary point, `None` for a straight line.
    pub fn vertex(&self) -> Option<T> {
        if self.c2.is_zero() {
            None
        } else {
            Some(-self.c1 / (self.c2 + self.c2))
        }
    }
}

fn sign<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

impl<T: Real> ModelParams<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Linear { .. } => ModelKind::Linear,
            ModelParams::Logistic { .. } => ModelKind::Logistic,
            ModelParams::LogisticSine { .. } => ModelKind::LogisticSine,
            ModelParams::LinearQuadratic { .. } => ModelKind::LinearQuadratic,
            ModelParams::QuadraticQuadratic { .. } => ModelKind::QuadraticQuadratic,
        }
    }

    pub fn to_vec(&self) -> Vec<T> {
        match *self {
            ModelParams::Linear { a, b } => vec![a, b],
            ModelParams::Logistic { k, a, r } | ModelParams::LogisticSine { k, a, r } => {
                vec![k, a, r]
            }
            ModelParams::LinearQuadratic { a, b, c, d, e } => vec![a, b, c, d, e],
            ModelParams::QuadraticQuadratic { a, b, c, d, e, f } => vec![a, b, c, d, e, f],
        }
    }

    pub fn from_slice(kind: ModelKind, p: &[T]) -> Result<Self> {
        if p.len() != kind.arity() {
            return Err(Error::Arity {
                kind,
                expected: kind.arity(),
                found: p.len(),
            });
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams(format!("{kind}: non-finite parameter")));
        }
        let params = match kind {
            ModelKind::Linear => ModelParams::Linear { a: p[0], b: p[1] },
            ModelKind::Logistic => ModelParams::Logistic {
                k: p[0],
                a: p[1],
                r: p[2],
            },
            ModelKind::LogisticSine => ModelParams::LogisticSine {
                k: p[0],
                a: p[1],
                r: p[2],
            },
            ModelKind::LinearQuadratic => ModelParams::LinearQuadratic {
                a: p[0],
                b: p[1],
                c: p[2],
                d: p[3],
                e: p[4],
            },
            ModelKind::QuadraticQuadratic => ModelParams::QuadraticQuadratic {
                a: p[0],
                b: p[1],
                c: p[2],
                d: p[3],
                e: p[4],
                f: p[5],
            },
        };
        params.validate()?;
        Ok(params)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ModelParams::LinearQuadratic { d, .. } | ModelParams::QuadraticQuadratic { d, .. }
                if d < T::zero() =>
            {
                Err(Error::InvalidParams(format!(
                    "joint point d = {d} is negative"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Joint point of piecewise kinds.
    pub fn joint(&self) -> Option<T> {
        match *self {
            ModelParams::LinearQuadratic { d, .. } | ModelParams::QuadraticQuadratic { d, .. } => {
                Some(d)
            }
            _ => None,
        }
    }

    /// `(left, right)` branch polynomials of piecewise kinds.
    pub fn branches(&self) -> Option<(Quadratic<T>, Quadratic<T>)> {
        match *self {
            ModelParams::LinearQuadratic { a, b, c, d, e } => {
                let shift = c * d * d + e * d;
                Some((
                    Quadratic {
                        c0: a + shift,
                        c1: b - e,
                        c2: T::zero(),
                    },
                    Quadratic {
                        c0: a - shift,
                        c1: b + e,
                        c2: c + c,
                    },
                ))
            }
            ModelParams::QuadraticQuadratic { a, b, c, d, e, f } => {
                let shift = e * d * d + f * d;
                Some((
                    Quadratic {
                        c0: a + shift,
                        c1: b - f,
                        c2: c - e,
                    },
                    Quadratic {
                        c0: a - shift,
                        c1: b + f,
                        c2: c + e,
                    },
                ))
            }
            _ => None,
        }
    }

    /// Logistic factor `K / (1 + a·e^{−rD})`.
    fn logistic(k: T, a: T, r: T, x: T) -> T {
        k / (T::one() + a * (-r * x).exp())
    }

    /// Model value without the finiteness check.
    pub fn value(&self, x: T) -> T {
        match *self {
            ModelParams::Linear { a, b } => a + b * x,
            ModelParams::Logistic { k, a, r } => Self::logistic(k, a, r, x),
            ModelParams::LogisticSine { k, a, r } => {
                Self::logistic(k, a, r, x) * (x / T::pi()).sin()
            }
            ModelParams::LinearQuadratic { a, b, c, d, e } => {
                a + b * x + c * x * x + (x - d) * sign(x - d) * (c * (x + d) + e)
            }
            ModelParams::QuadraticQuadratic { a, b, c, d, e, f } => {
                a + b * x + c * x * x + (x - d) * sign(x - d) * (e * (x + d) + f)
            }
        }
    }

    /// Stability predicted at dominance `x`.
    pub fn eval(&self, x: T) -> Result<T> {
        let y = self.value(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::Eval(x.to_f64_lossy()))
        }
    }

    /// Left and right derivatives; equal except at a piecewise joint.
    pub fn one_sided_derivatives(&self, x: T) -> Result<(T, T)> {
        let (left, right) = match (self.branches(), self.joint()) {
            (Some((l, r)), Some(d)) => {
                if x < d {
                    (l.slope(x), l.slope(x))
                } else if x > d {
                    (r.slope(x), r.slope(x))
                } else {
                    (l.slope(x), r.slope(x))
                }
            }
            _ => {
                let g = self.smooth_derivative(x);
                (g, g)
            }
        };
        if left.is_finite() && right.is_finite() {
            Ok((left, right))
        } else {
            Err(Error::Eval(x.to_f64_lossy()))
        }
    }

    /// `dS/dD`. At a piecewise joint this is the right-hand derivative; use
    /// [`Self::one_sided_derivatives`] to see both sides.
    pub fn derivative(&self, x: T) -> Result<T> {
        self.one_sided_derivatives(x).map(|(_, r)| r)
    }

    fn smooth_derivative(&self, x: T) -> T {
        match *self {
            ModelParams::Linear { b, .. } => b,
            ModelParams::Logistic { k, a, r } => {
                let u = a * (-r * x).exp();
                let den = T::one() + u;
                k * r * u / (den * den)
            }
            ModelParams::LogisticSine { k, a, r } => {
                let u = a * (-r * x).exp();
                let den = T::one() + u;
                let lf = k / den;
                let dl = k * r * u / (den * den);
                let w = x / T::pi();
                dl * w.sin() + lf * w.cos() / T::pi()
            }
            _ => unreachable!("piecewise kinds use branches"),
        }
    }

    /// Partial derivatives of the model value with respect to every parameter
    /// except a piecewise joint `d` (the model is linear in those once the
    /// sign pattern is fixed).
    pub fn gradient(&self, x: T) -> Vec<T> {
        match *self {
            ModelParams::Linear { .. } => vec![T::one(), x],
            ModelParams::Logistic { k, a, r } | ModelParams::LogisticSine { k, a, r } => {
                let ex = (-r * x).exp();
                let den = T::one() + a * ex;
                let w = if self.kind() == ModelKind::LogisticSine {
                    (x / T::pi()).sin()
                } else {
                    T::one()
                };
                vec![
                    w / den,
                    -w * k * ex / (den * den),
                    w * k * x * a * ex / (den * den),
                ]
            }
            ModelParams::LinearQuadratic { d, .. } => lq_design_row(x, d).to_vec(),
            ModelParams::QuadraticQuadratic { d, .. } => qq_design_row(x, d).to_vec(),
        }
    }
}

/// Regressors of `(a, b, c, e)` in the L-Q model at fixed joint `d`.
pub fn lq_design_row<T: Real>(x: T, d: T) -> [T; 4] {
    let s = sign(x - d);
    [T::one(), x, x * x + s * (x * x - d * d), s * (x - d)]
}

/// Regressors of `(a, b, c, e, f)` in the Q-Q model at fixed joint `d`.
pub fn qq_design_row<T: Real>(x: T, d: T) -> [T; 5] {
    let s = sign(x - d);
    [T::one(), x, x * x, s * (x * x - d * d), s * (x - d)]
}

/// Interpretable combinations of piecewise parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivedParams<T> {
    LinearQuadratic {
        /// Slope of the linear branch, `b − e`.
        b1: T,
        /// Curvature of the quadratic branch, `2c`.
        c2: T,
        joint: T,
        /// Intercept of the linear branch, `a + cd² + ed`.
        a1: T,
    },
    QuadraticQuadratic {
        /// Left curvature, `c − e`.
        c1: T,
        /// Right curvature, `c + e`.
        c2: T,
        /// Left linear coefficient, `b − f`.
        b1: T,
        joint: T,
        /// Left intercept, `a + ed² + fd`.
        a1: T,
    },
}

pub fn derived_params<T: Real>(params: &ModelParams<T>) -> Result<DerivedParams<T>> {
    match *params {
        ModelParams::LinearQuadratic { a, b, c, d, e } => Ok(DerivedParams::LinearQuadratic {
            b1: b - e,
            c2: c + c,
            joint: d,
            a1: a + c * d * d + e * d,
        }),
        ModelParams::QuadraticQuadratic { a, b, c, d, e, f } => {
            Ok(DerivedParams::QuadraticQuadratic {
                c1: c - e,
                c2: c + e,
                b1: b - f,
                joint: d,
                a1: a + e * d * d + f * d,
            })
        }
        _ => Err(Error::Kind {
            expected: "a piecewise (L-Q or Q-Q) model",
            found: params.kind(),
        }),
    }
}

/// Local dominance-stability relationship from the sign of `dS/dD`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `dS/dD < 0`: stability rises with dominance.
    Dds,
    /// `dS/dD > 0`.
    Did,
    /// `dS/dD = 0`.
    Dis,
}

impl Regime {
    pub fn from_slope<T: Real>(slope: T, tau: T) -> Self {
        if slope.abs() <= tau {
            Regime::Dis
        } else if slope < T::zero() {
            Regime::Dds
        } else {
            Regime::Did
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::Dds => "DDS",
            Regime::Did => "DID",
            Regime::Dis => "DIS",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeAt {
    Regime(Regime),
    /// At a piecewise joint whose one-sided slopes disagree.
    JointAmbiguous { left: Regime, right: Regime },
}

/// Absolute slope tolerance for DIS.
pub const DIS_TOLERANCE: f64 = 1e-9;

pub fn regime_at<T: Real>(params: &ModelParams<T>, x: T) -> Result<RegimeAt> {
    let tau = T::lit(DIS_TOLERANCE);
    let (l, r) = params.one_sided_derivatives(x)?;
    let (left, right) = (Regime::from_slope(l, tau), Regime::from_slope(r, tau));
    Ok(if left == right {
        RegimeAt::Regime(left)
    } else {
        RegimeAt::JointAmbiguous { left, right }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    /// Stationary point of a quadratic branch (the DIS tipping point).
    Vertex(Branch),
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Unstable,
    /// Linear phase is dominance-dependent; the joint's fate follows the
    /// curvature of the quadratic branch.
    DependsOnCurvature,
    Uncertain,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::DependsOnCurvature => "depends on c2",
            Verdict::Uncertain => "uncertain",
        }
    }

    fn from_curvature<T: Real>(c: T) -> Self {
        if c > T::zero() {
            Verdict::Stable
        } else if c < T::zero() {
            Verdict::Unstable
        } else {
            Verdict::Uncertain
        }
    }
}

/// Equilibrium read off the sign rules of the piecewise parameters, as
/// opposed to a numeric fixed point of the dominance map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualitativeEquilibrium<T> {
    pub location: T,
    pub kind: PointKind,
    pub verdict: Verdict,
    /// The vertex lies on the side of the joint where its branch applies.
    pub on_branch: bool,
}

pub fn qualitative_equilibria<T: Real>(
    params: &ModelParams<T>,
) -> Result<Vec<QualitativeEquilibrium<T>>> {
    let derived = derived_params(params)?;
    let (left, right) = params.branches().expect("piecewise");
    let mut out = Vec::new();
    match derived {
        DerivedParams::LinearQuadratic { b1, c2, joint, .. } => {
            let verdict = if b1 > T::zero() {
                Verdict::Unstable
            } else if b1 < T::zero() {
                Verdict::DependsOnCurvature
            } else {
                Verdict::Uncertain
            };
            out.push(QualitativeEquilibrium {
                location: joint,
                kind: PointKind::Joint,
                verdict,
                on_branch: true,
            });
            if let Some(v) = right.vertex() {
                out.push(QualitativeEquilibrium {
                    location: v,
                    kind: PointKind::Vertex(Branch::Right),
                    verdict: Verdict::from_curvature(c2),
                    on_branch: v > joint,
                });
            }
        }
        DerivedParams::QuadraticQuadratic { c1, c2, joint, .. } => {
            if let Some(v) = left.vertex() {
                out.push(QualitativeEquilibrium {
                    location: v,
                    kind: PointKind::Vertex(Branch::Left),
                    verdict: Verdict::from_curvature(c1),
                    on_branch: v < joint,
                });
            }
            out.push(QualitativeEquilibrium {
                location: joint,
                kind: PointKind::Joint,
                verdict: Verdict::Uncertain,
                on_branch: true,
            });
            if let Some(v) = right.vertex() {
                out.push(QualitativeEquilibrium {
                    location: v,
                    kind: PointKind::Vertex(Branch::Right),
                    verdict: Verdict::from_curvature(c2),
                    on_branch: v > joint,
                });
            }
        }
    }
    Ok(out)
}
