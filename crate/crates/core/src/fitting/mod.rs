//! Parameter estimation for the five model kinds.
//!
//! Linear fits are closed-form OLS, the logistic kinds use a damped
//! Gauss-Newton (Levenberg-Marquardt) search from many starts, and the
//! piecewise kinds profile the joint `d` with an exact linear solve for the
//! remaining coefficients.

mod linear;
mod logistic;
mod piecewise;

pub use linear::fit_linear;
pub use logistic::{fit_logistic_family, LmOptions, StartGrid};
pub use piecewise::{fit_piecewise, profile_ss};

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{derived_params, DerivedParams, ModelKind, ModelParams};
use crate::scalar::Real;
use crate::stability::StabilitySeries;

/// `(D, S)` points for one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitInput<T> {
    pub d: Vec<T>,
    pub s: Vec<T>,
}

impl<T: Real> FitInput<T> {
    pub fn new(d: Vec<T>, s: Vec<T>) -> Result<Self> {
        if d.len() != s.len() {
            return Err(Error::Precondition(format!(
                "{} dominance values but {} stability values",
                d.len(),
                s.len()
            )));
        }
        if d.iter().chain(&s).any(|v| !v.is_finite()) {
            return Err(Error::Precondition("non-finite fit input".into()));
        }
        Ok(FitInput { d, s })
    }

    pub fn from_pairs(pairs: &[(T, T)]) -> Result<Self> {
        Self::new(
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1).collect(),
        )
    }

    /// Points of a stability series with zero-denominator steps dropped.
    pub fn from_series(series: &StabilitySeries<T>) -> Result<Self> {
        Self::from_pairs(&series.pairs())
    }

    pub fn n(&self) -> usize {
        self.d.len()
    }

    pub fn d_range(&self) -> Option<(T, T)> {
        let lo = self.d.iter().copied().reduce(T::min)?;
        let hi = self.d.iter().copied().reduce(T::max)?;
        Some((lo, hi))
    }

    fn check(&self, kind: ModelKind) -> Result<()> {
        if self.n() < kind.arity() + 1 {
            return Err(Error::Precondition(format!(
                "{kind} needs at least {} points, got {}",
                kind.arity() + 1,
                self.n()
            )));
        }
        let (lo, hi) = self.d_range().expect("non-empty");
        if lo == hi {
            return Err(Error::DegenerateFit(format!(
                "{kind}: all dominance values equal {lo}"
            )));
        }
        Ok(())
    }

    fn total_ss(&self) -> T {
        let n = T::from_len(self.n());
        let mean = self.s.iter().fold(T::zero(), |a, &v| a + v) / n;
        self.s.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean))
    }

    fn residual_ss(&self, params: &ModelParams<T>) -> T {
        self.d
            .iter()
            .zip(&self.s)
            .fold(T::zero(), |acc, (&x, &y)| {
                let r = y - params.value(x);
                acc + r * r
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FitFlag {
    /// Pearson R is undefined (constant stability values).
    UndefinedCorrelation,
    /// `JᵀJ` is singular; standard errors are reported as +∞.
    SingularInformation,
    /// Stability values are constant, so R² is undefined.
    DegenerateResponse,
    /// Fewer points than `arity + 1`, so adjusted R² is undefined.
    AdjustedR2Undefined,
    /// Linearly dependent coefficients fixed at zero.
    DroppedParameters(Vec<&'static str>),
    /// The best joint lies outside the observed dominance range, so the fit
    /// is the nested single-branch form.
    JointOutsideData,
    /// Values transcribed from a published table rather than estimated.
    Reported,
}

impl fmt::Display for FitFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FitFlag::UndefinedCorrelation => f.write_str("undefined-correlation"),
            FitFlag::SingularInformation => f.write_str("singular-information"),
            FitFlag::DegenerateResponse => f.write_str("degenerate-response"),
            FitFlag::AdjustedR2Undefined => f.write_str("adjusted-r2-undefined"),
            FitFlag::DroppedParameters(names) => write!(f, "dropped({})", names.join(" ")),
            FitFlag::JointOutsideData => f.write_str("joint-outside-data"),
            FitFlag::Reported => f.write_str("reported"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFit<T> {
    pub params: ModelParams<T>,
    pub std_errors: Vec<T>,
    pub r2: Option<T>,
    pub r2_adj: Option<T>,
    pub residual_ss: T,
    pub n: usize,
    pub derived: Option<DerivedParams<T>>,
    pub converged: bool,
    pub iterations: usize,
    /// Pearson correlation of D and S, reported for linear fits.
    pub pearson_r: Option<T>,
    pub flags: Vec<FitFlag>,
}

impl<T: Real> ModelFit<T> {
    pub fn kind(&self) -> ModelKind {
        self.params.kind()
    }

    pub fn has_flag(&self, flag: &FitFlag) -> bool {
        self.flags.contains(flag)
    }

    /// A fit known only through its published summary (parameters, standard
    /// errors, R² and point count).
    pub fn reported(params: ModelParams<T>, std_errors: Vec<T>, r2: T, n: usize) -> Result<Self> {
        let kind = params.kind();
        if std_errors.len() != kind.arity() {
            return Err(Error::Arity {
                kind,
                expected: kind.arity(),
                found: std_errors.len(),
            });
        }
        Ok(ModelFit {
            derived: derived_params(&params).ok(),
            params,
            std_errors,
            r2: Some(r2),
            r2_adj: adjusted_r2(r2, n, kind.arity()),
            residual_ss: T::nan(),
            n,
            converged: true,
            iterations: 0,
            pearson_r: None,
            flags: vec![FitFlag::Reported],
        })
    }

    /// Builds a fit from estimated parameters, filling in goodness-of-fit.
    fn assemble(
        input: &FitInput<T>,
        params: ModelParams<T>,
        std_errors: Vec<T>,
        converged: bool,
        iterations: usize,
        mut flags: Vec<FitFlag>,
    ) -> Self {
        let residual_ss = input.residual_ss(&params);
        let (r2, r2_adj) = goodness(input, residual_ss, params.kind().arity());
        if r2.is_none() && !flags.contains(&FitFlag::DegenerateResponse) {
            flags.push(FitFlag::DegenerateResponse);
        }
        if r2.is_some() && r2_adj.is_none() {
            flags.push(FitFlag::AdjustedR2Undefined);
        }
        ModelFit {
            derived: derived_params(&params).ok(),
            params,
            std_errors,
            r2,
            r2_adj,
            residual_ss,
            n: input.n(),
            converged,
            iterations,
            pearson_r: None,
            flags,
        }
    }
}

fn adjusted_r2<T: Real>(r2: T, n: usize, arity: usize) -> Option<T> {
    // predictors exclude the intercept-like leading parameter
    let p = arity - 1;
    if n <= p + 1 {
        return None;
    }
    let (n, p) = (T::from_len(n), T::from_len(p));
    Some(T::one() - (T::one() - r2) * (n - T::one()) / (n - p - T::one()))
}

/// `(R², adjusted R²)` for a residual sum of squares on `input`. `R²` is
/// undefined when the stability values are constant.
pub fn goodness<T: Real>(input: &FitInput<T>, residual_ss: T, arity: usize) -> (Option<T>, Option<T>) {
    let tot = input.total_ss();
    if !(tot > T::zero()) {
        return (None, None);
    }
    let r2 = T::one() - residual_ss / tot;
    (Some(r2), adjusted_r2(r2, input.n(), arity))
}

/// Asymptotic standard errors `sqrt(diag(s²(JᵀJ)⁻¹))`, `s² = SS/(n − p)`.
/// `None` when `JᵀJ` is numerically singular.
pub fn std_errors_from_jacobian<T: Real>(jac: &[Vec<T>], residual_ss: T) -> Option<Vec<T>> {
    let n = jac.len();
    let p = jac.first().map_or(0, |r| r.len());
    if n <= p {
        return None;
    }
    let g = linalg::gram(jac);
    let scale: Vec<T> = (0..p).map(|i| g[i][i].sqrt()).collect();
    if scale.iter().any(|s| !(*s > T::zero()) || !s.is_finite()) {
        return None;
    }
    let scaled: Vec<Vec<T>> = (0..p)
        .map(|i| (0..p).map(|j| g[i][j] / (scale[i] * scale[j])).collect())
        .collect();
    let inv = linalg::inverse_spd(&scaled)?;
    // a condition number beyond this leaves no meaningful digits
    if inv.iter().enumerate().any(|(i, row)| !(row[i] > T::zero()) || row[i] > T::lit(1e14)) {
        return None;
    }
    let s2 = residual_ss / T::from_len(n - p);
    Some(
        (0..p)
            .map(|i| (s2 * inv[i][i]).sqrt() / scale[i])
            .collect(),
    )
}

fn infinite_errors<T: Real>(p: usize) -> Vec<T> {
    vec![T::infinity(); p]
}

/// Fits one model kind with default options.
pub fn fit_model<T: Real>(kind: ModelKind, input: &FitInput<T>) -> Result<ModelFit<T>> {
    match kind {
        ModelKind::Linear => fit_linear(input),
        ModelKind::Logistic | ModelKind::LogisticSine => {
            fit_logistic_family(kind, input, &StartGrid::default(), &LmOptions::default())
        }
        ModelKind::LinearQuadratic | ModelKind::QuadraticQuadratic => fit_piecewise(kind, input),
    }
}

/// Fits every requested kind. Each kind fails independently.
pub fn fit_all<T: Real>(kinds: &[ModelKind], input: &FitInput<T>) -> Vec<(ModelKind, Result<ModelFit<T>>)> {
    let mut out: Vec<(ModelKind, Result<ModelFit<T>>)> = Vec::with_capacity(kinds.len());
    let mut lq_joint = None;
    for &kind in kinds {
        let fit = match kind {
            ModelKind::QuadraticQuadratic => piecewise::fit_piecewise_seeded(kind, input, lq_joint),
            _ => fit_model(kind, input),
        };
        if let (ModelKind::LinearQuadratic, Ok(f)) = (kind, &fit) {
            lq_joint = f.params.joint();
        }
        out.push((kind, fit));
    }
    out
}
