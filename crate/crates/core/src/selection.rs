//! Validity screening of fitted models and the parsimony-ordered choice of
//! one primary model per subject.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::fitting::ModelFit;
use crate::models::{
    qualitative_equilibria, regime_at, DerivedParams, ModelKind, ModelParams, PointKind, Regime,
    RegimeAt,
};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPolicy {
    pub r2_min: f64,
    /// Largest accepted `SE/|param|`.
    pub ratio_max: f64,
    /// Largest accepted `|param|`.
    pub mag_max: f64,
    pub priority: [ModelKind; 5],
}

impl SelectionPolicy {
    pub const PRIORITY: [ModelKind; 5] = [
        ModelKind::Logistic,
        ModelKind::LogisticSine,
        ModelKind::LinearQuadratic,
        ModelKind::QuadraticQuadratic,
        ModelKind::Linear,
    ];

    pub fn new(r2_min: f64, ratio_max: f64, mag_max: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&r2_min) {
            return Err(Error::Precondition(format!("r2_min must lie in [0, 1], got {r2_min}")));
        }
        for (name, v) in [("ratio_max", ratio_max), ("mag_max", mag_max)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Precondition(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(SelectionPolicy {
            r2_min,
            ratio_max,
            mag_max,
            priority: Self::PRIORITY,
        })
    }

    fn rank(&self, kind: ModelKind) -> usize {
        self.priority.iter().position(|k| *k == kind).unwrap_or(usize::MAX)
    }
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy {
            r2_min: 0.30,
            ratio_max: 20.0,
            mag_max: 1e6,
            priority: Self::PRIORITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    pub kind: ModelKind,
    pub r2_ok: bool,
    pub se_ok: bool,
    pub magnitude_ok: bool,
    pub valid: bool,
    pub reasons: Vec<String>,
}

/// Short form of a number for validity reasons.
fn brief(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-3..1e4).contains(&a) {
        format!("{x:.3e}")
    } else {
        let s = format!("{x:.4}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    }
}

/// Parameters skipped by the standard-error check: the logistic shape
/// parameter `a` mostly reflects where sampling started.
fn se_exempt(kind: ModelKind, name: &str) -> bool {
    kind.is_logistic() && name == "a"
}

pub fn validate<T: Real>(fit: &ModelFit<T>, policy: &SelectionPolicy) -> ValidityReport {
    let kind = fit.kind();
    let mut reasons = Vec::new();

    let r2_ok = match fit.r2 {
        Some(r2) if r2.to_f64_lossy() >= policy.r2_min => true,
        Some(r2) => {
            reasons.push(format!("R² {:.3} below {}", r2.to_f64_lossy(), policy.r2_min));
            false
        }
        None => {
            reasons.push("R² undefined".to_string());
            false
        }
    };

    let params = fit.params.to_vec();
    let names = kind.param_names();
    let mut se_ok = true;
    let mut magnitude_ok = true;
    for ((&p, &se), &name) in params.iter().zip(&fit.std_errors).zip(names) {
        let (p, se) = (p.to_f64_lossy(), se.to_f64_lossy());
        if p.abs() > policy.mag_max {
            magnitude_ok = false;
            reasons.push(format!("|{name}| = {} exceeds {}", brief(p.abs()), brief(policy.mag_max)));
        }
        if se_exempt(kind, name) {
            continue;
        }
        let ok = if !se.is_finite() {
            false
        } else if p == 0.0 {
            se == 0.0
        } else {
            se / p.abs() <= policy.ratio_max
        };
        if !ok {
            se_ok = false;
            let ratio = se / p.abs();
            reasons.push(format!(
                "SE({name}) = {} is {} times |{name}| (limit {})",
                brief(se),
                brief(ratio),
                brief(policy.ratio_max)
            ));
        }
    }
    ValidityReport {
        kind,
        r2_ok,
        se_ok,
        magnitude_ok,
        valid: r2_ok && se_ok && magnitude_ok,
        reasons,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rationale {
    /// Highest-priority valid model.
    Priority,
    /// Only the linear model passed.
    Backup,
    /// Nothing passed; the linear fit is reported anyway.
    BackupInvalid,
}

impl Rationale {
    pub fn label(self) -> &'static str {
        match self {
            Rationale::Priority => "priority",
            Rationale::Backup => "backup",
            Rationale::BackupInvalid => "backup-invalid",
        }
    }
}

impl fmt::Display for Rationale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectedModel<T> {
    pub fit: ModelFit<T>,
    pub rationale: Rationale,
    pub report: ValidityReport,
}

impl<T: Real> SelectedModel<T> {
    pub fn kind(&self) -> ModelKind {
        self.fit.kind()
    }
}

fn lexicographic<T: Real>(a: &[T], b: &[T]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// Orders fits by priority, then higher R², then parameter vector, so the
/// outcome does not depend on the order of `fits`.
fn preference<T: Real>(policy: &SelectionPolicy, a: &ModelFit<T>, b: &ModelFit<T>) -> Ordering {
    policy
        .rank(a.kind())
        .cmp(&policy.rank(b.kind()))
        .then_with(|| {
            let (ra, rb) = (a.r2.unwrap_or(T::neg_infinity()), b.r2.unwrap_or(T::neg_infinity()));
            rb.partial_cmp(&ra).unwrap_or(Ordering::Equal)
        })
        .then_with(|| lexicographic(&a.params.to_vec(), &b.params.to_vec()))
}

/// Picks the first valid fit in priority order, falling back to the linear
/// fit (flagged) when nothing is valid.
pub fn select<T: Real>(fits: &[ModelFit<T>], policy: &SelectionPolicy) -> Result<SelectedModel<T>> {
    if fits.is_empty() {
        return Err(Error::Selection);
    }
    let mut ordered: Vec<&ModelFit<T>> = fits.iter().collect();
    ordered.sort_by(|a, b| preference(policy, a, b));
    for fit in &ordered {
        let report = validate(fit, policy);
        if report.valid {
            let rationale = if fit.kind() == ModelKind::Linear {
                Rationale::Backup
            } else {
                Rationale::Priority
            };
            return Ok(SelectedModel {
                fit: (*fit).clone(),
                rationale,
                report,
            });
        }
    }
    let linear = ordered
        .iter()
        .find(|f| f.kind() == ModelKind::Linear)
        .ok_or(Error::Selection)?;
    Ok(SelectedModel {
        fit: (*linear).clone(),
        rationale: Rationale::BackupInvalid,
        report: validate(linear, policy),
    })
}

/// One row of the per-subject model summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub subject: String,
    pub kind: ModelKind,
    /// e.g. `Logistic (0.91)`, `L-Q [0.85; b1 < 0, c2 > 0]`, `Linear (R=0.53)`.
    pub quality: String,
    /// Sign annotations of the piecewise shape parameters, empty otherwise.
    pub signs: String,
    /// Stock description of the dominance-stability pattern for this shape.
    pub pattern: String,
    /// Regimes sampled over the observed dominance range plus equilibria.
    pub narrative: String,
    pub rationale: Rationale,
}

fn sign_symbol<T: Real>(x: T) -> &'static str {
    if x > T::zero() {
        ">"
    } else if x < T::zero() {
        "<"
    } else {
        "="
    }
}

fn sign_annotation<T: Real>(derived: &DerivedParams<T>) -> String {
    match *derived {
        DerivedParams::LinearQuadratic { b1, c2, .. } => {
            format!("b1 {} 0, c2 {} 0", sign_symbol(b1), sign_symbol(c2))
        }
        DerivedParams::QuadraticQuadratic { c1, c2, .. } => {
            format!("c1 {} 0, c2 {} 0", sign_symbol(c1), sign_symbol(c2))
        }
    }
}

fn quality<T: Real>(fit: &ModelFit<T>, signs: &str) -> String {
    let r2 = fit
        .r2
        .map_or_else(|| "n/a".to_string(), |v| format!("{:.2}", v.to_f64_lossy()));
    match fit.kind() {
        ModelKind::Linear => {
            let r = fit
                .pearson_r
                .map(|r| r.abs())
                .or_else(|| fit.r2.filter(|v| *v >= T::zero()).map(|v| v.sqrt()));
            let r = r.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}", v.to_f64_lossy()));
            format!("Linear (R={r})")
        }
        ModelKind::LinearQuadratic | ModelKind::QuadraticQuadratic => {
            format!("{} [{r2}; {signs}]", fit.kind())
        }
        kind => format!("{kind} ({r2})"),
    }
}

fn pattern<T: Real>(params: &ModelParams<T>, derived: Option<&DerivedParams<T>>) -> String {
    let zero = T::zero();
    match *params {
        ModelParams::Linear { b, .. } => {
            let regime = Regime::from_slope(b, T::lit(crate::models::DIS_TOLERANCE));
            format!("Globally {regime}, but the mechanism may be complex locally.")
        }
        ModelParams::Logistic { k, a, r } => {
            let regime = Regime::from_slope(k * a * r, zero);
            if r < zero {
                format!("{regime} with an asymptotic equilibrium line when D_c → ∞")
            } else {
                format!("{regime} levelling off at S = K when D_c → ∞")
            }
        }
        ModelParams::LogisticSine { .. } => "DDS and DIS alternate periodically".to_string(),
        ModelParams::LinearQuadratic { .. } => match derived {
            Some(&DerivedParams::LinearQuadratic { b1, c2, .. }) => {
                match (b1.partial_cmp(&zero), c2.partial_cmp(&zero)) {
                    (Some(Ordering::Greater), Some(Ordering::Greater)) => {
                        "DIS followed by DDS, a possible stable equilibrium and DIS".to_string()
                    }
                    (Some(Ordering::Less), Some(Ordering::Greater)) => {
                        "DDS followed by a possible equilibrium and DIS".to_string()
                    }
                    (Some(Ordering::Less), Some(Ordering::Less)) => {
                        "DDS followed by possibly two equilibriums and DDS".to_string()
                    }
                    (Some(Ordering::Greater), Some(Ordering::Less)) => {
                        "DID followed by a possible unstable equilibrium and DDS".to_string()
                    }
                    _ => "Piecewise pattern with a degenerate branch".to_string(),
                }
            }
            _ => String::new(),
        },
        ModelParams::QuadraticQuadratic { d, .. } => format!(
            "DDS and DIS alternate, two parabolas connected at D_c = d ≈ {:.0}, stability of equilibriums is uncertain.",
            d.to_f64_lossy()
        ),
    }
}

fn fmt_d<T: Real>(x: T) -> String {
    format!("{:.2}", x.to_f64_lossy())
}

/// Regime runs over `[lo, hi]` from `samples` evenly spaced points, e.g.
/// `DID (10.00–28.34) → DDS (28.34–60.00)`.
pub fn regime_runs<T: Real>(params: &ModelParams<T>, lo: T, hi: T, samples: usize) -> String {
    let samples = samples.max(2);
    let mut runs: Vec<(Regime, T, T)> = Vec::new();
    let step = (hi - lo) / T::from_len(samples - 1);
    for i in 0..samples {
        let x = if i + 1 == samples { hi } else { lo + step * T::from_len(i) };
        let regime = match regime_at(params, x) {
            Ok(RegimeAt::Regime(r)) => r,
            Ok(RegimeAt::JointAmbiguous { right, .. }) => right,
            Err(_) => continue,
        };
        match runs.last_mut() {
            Some(last) if last.0 == regime => last.2 = x,
            Some(last) => {
                // boundary at the midpoint between samples
                let b = (last.2 + x) / T::lit(2.0);
                last.2 = b;
                runs.push((regime, b, x));
            }
            None => runs.push((regime, x, x)),
        }
    }
    runs.iter()
        .map(|(r, a, b)| format!("{r} ({}–{})", fmt_d(*a), fmt_d(*b)))
        .collect::<Vec<_>>()
        .join(" → ")
}

fn equilibria_note<T: Real>(params: &ModelParams<T>, lo: T, hi: T) -> String {
    match *params {
        ModelParams::Linear { a, b } => {
            if b.is_zero() {
                "no equilibrium".to_string()
            } else {
                format!("equilibrium at D* = {}", fmt_d(-a / b))
            }
        }
        ModelParams::Logistic { k, r, .. } => {
            if r < T::zero() {
                "no finite fixed point; S → 0 asymptote".to_string()
            } else {
                format!("no finite fixed point; S → {} asymptote", fmt_d(k))
            }
        }
        ModelParams::LogisticSine { .. } => {
            let period = T::pi() * T::pi();
            let first = (lo / period).ceil().max(T::one());
            let mut pts = Vec::new();
            let mut kk = first;
            while kk * period <= hi && pts.len() < 10 {
                pts.push(fmt_d(kk * period));
                kk = kk + T::one();
            }
            if pts.is_empty() {
                "no sine zero in the observed range".to_string()
            } else {
                format!("DIS points at D = kπ²: {}", pts.join(", "))
            }
        }
        _ => qualitative_equilibria(params)
            .map(|eqs| {
                eqs.iter()
                    .map(|q| {
                        let what = match q.kind {
                            PointKind::Joint => "joint".to_string(),
                            PointKind::Vertex(b) => format!("{} vertex", match b {
                                crate::models::Branch::Left => "left",
                                crate::models::Branch::Right => "right",
                            }),
                        };
                        let off = if q.on_branch { "" } else { ", off-branch" };
                        format!("{what} {} ({}{off})", fmt_d(q.location), q.verdict.label())
                    })
                    .collect::<Vec<_>>()
                    .join("; ")
            })
            .unwrap_or_default(),
    }
}

/// Summary row for a subject. `d_range` is the observed dominance range;
/// without it the narrative carries only the equilibria.
pub fn summarize<T: Real>(subject: &str, selected: &SelectedModel<T>, d_range: Option<(T, T)>) -> SummaryRow {
    let fit = &selected.fit;
    let signs = fit.derived.as_ref().map(sign_annotation).unwrap_or_default();
    let mut narrative = String::new();
    let (lo, hi) = d_range.unwrap_or((T::zero(), T::zero()));
    if d_range.is_some() && hi > lo {
        narrative = regime_runs(&fit.params, lo, hi, 201);
    }
    let eq = equilibria_note(&fit.params, lo, hi);
    if !eq.is_empty() {
        if !narrative.is_empty() {
            narrative.push_str("; ");
        }
        narrative.push_str(&eq);
    }
    SummaryRow {
        subject: subject.to_string(),
        kind: fit.kind(),
        quality: quality(fit, &signs),
        pattern: pattern(&fit.params, fit.derived.as_ref()),
        signs,
        narrative,
        rationale: selected.rationale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logistic(k: f64, se_k: f64, a: f64, se_a: f64, r: f64, se_r: f64, r2: f64) -> ModelFit<f64> {
        ModelFit::reported(ModelParams::Logistic { k, a, r }, vec![se_k, se_a, se_r], r2, 28).unwrap()
    }

    fn linear(a: f64, se_a: f64, b: f64, se_b: f64, r: f64) -> ModelFit<f64> {
        let mut f = ModelFit::reported(ModelParams::Linear { a, b }, vec![se_a, se_b], r * r, 28).unwrap();
        f.pearson_r = Some(-r);
        f
    }

    #[test]
    fn large_k_error_is_invalid() {
        let f = logistic(22.644, 2602.6, 0.0, 0.0022, -1.813, 2.562, 0.78);
        let rep = validate(&f, &SelectionPolicy::default());
        assert!(!rep.se_ok && !rep.valid);
        assert!(rep.r2_ok && rep.magnitude_ok);
    }

    #[test]
    fn huge_k_fails_magnitude() {
        let f = logistic(15152070.0, 1.0, 1.0, 1.0, -0.1, 0.01, 0.9);
        assert!(!validate(&f, &SelectionPolicy::default()).magnitude_ok);
    }

    #[test]
    fn low_r2_fails() {
        let f = linear(1.0, 0.1, -0.03, 0.001, 0.5);
        assert!(!validate(&f, &SelectionPolicy::default()).r2_ok);
    }

    #[test]
    fn shape_parameter_is_exempt_from_error_ratio() {
        let f = logistic(4.168, 1.010, 0.00002, 0.0056, -0.647, 9.893, 0.99);
        let rep = validate(&f, &SelectionPolicy::default());
        assert!(rep.valid, "{:?}", rep.reasons);
    }

    #[test]
    fn zero_parameter_needs_zero_error() {
        let ok = linear(0.0, 0.0, -0.03, 0.001, 0.9);
        assert!(validate(&ok, &SelectionPolicy::default()).se_ok);
        let bad = linear(0.0, 0.1, -0.03, 0.001, 0.9);
        assert!(!validate(&bad, &SelectionPolicy::default()).se_ok);
        let inf = linear(1.0, f64::INFINITY, -0.03, 0.001, 0.9);
        assert!(!validate(&inf, &SelectionPolicy::default()).se_ok);
    }

    #[test]
    fn selection_order_and_fallbacks() {
        let policy = SelectionPolicy::default();
        let good_logistic = logistic(4.741, 1.540, 0.026, 0.0506, -0.206, 0.059, 0.91);
        let lin = linear(2.974, 0.407, -0.061, 0.009, 0.81);
        let sel = select(&[lin.clone(), good_logistic.clone()], &policy).unwrap();
        assert_eq!(sel.kind(), ModelKind::Logistic);
        assert_eq!(sel.rationale, Rationale::Priority);

        let bad_logistic = logistic(22.644, 2602.6, 0.0, 0.0022, -1.813, 2.562, 0.78);
        let sel = select(&[bad_logistic.clone(), lin.clone()], &policy).unwrap();
        assert_eq!((sel.kind(), sel.rationale), (ModelKind::Linear, Rationale::Backup));

        let weak = linear(1.0, 0.5, -0.01, 0.5, 0.2);
        let sel = select(&[bad_logistic.clone(), weak], &policy).unwrap();
        assert_eq!(sel.rationale, Rationale::BackupInvalid);

        assert!(matches!(select::<f64>(&[], &policy), Err(Error::Selection)));
        assert!(matches!(select(&[bad_logistic], &policy), Err(Error::Selection)));
    }

    #[test]
    fn policy_thresholds_must_be_positive() {
        assert!(SelectionPolicy::new(1.5, 20.0, 1e6).is_err());
        assert!(SelectionPolicy::new(0.0, 0.0, 1e6).is_err());
        assert!(SelectionPolicy::new(0.3, f64::NAN, 1e6).is_err());
        assert!(SelectionPolicy::new(0.3, 20.0, 1e6).is_ok());
    }

    #[test]
    fn summary_wording() {
        let policy = SelectionPolicy::default();
        let sel = select(&[logistic(4.741, 1.540, 0.026, 0.0506, -0.206, 0.059, 0.91)], &policy).unwrap();
        let row = summarize("400", &sel, Some((11.0, 60.0)));
        assert_eq!(row.quality, "Logistic (0.91)");
        assert_eq!(row.pattern, "DDS with an asymptotic equilibrium line when D_c → ∞");
        assert!(row.narrative.starts_with("DDS (11.00–60.00)"), "{}", row.narrative);

        let lq = ModelFit::reported(
            ModelParams::LinearQuadratic {
                a: 49.023,
                b: -5.947,
                c: 0.00067,
                d: 8.187,
                e: 5.862,
            },
            vec![21.883, 2.738, 0.00087, 0.095, 2.738],
            0.85,
            28,
        )
        .unwrap();
        let sel = select(&[lq], &policy).unwrap();
        let row = summarize("408", &sel, Some((5.0, 40.0)));
        assert_eq!(row.quality, "L-Q [0.85; b1 < 0, c2 > 0]");
        assert_eq!(row.pattern, "DDS followed by a possible equilibrium and DIS");

        let sel = select(&[linear(1.551, 0.182, -0.033, 0.004, 0.84)], &policy).unwrap();
        let row = summarize("405", &sel, Some((20.0, 60.0)));
        assert_eq!(row.quality, "Linear (R=0.84)");
        assert_eq!(row.pattern, "Globally DDS, but the mechanism may be complex locally.");
        assert!(row.narrative.contains("D* = 47.00"));
    }

    #[test]
    fn regime_runs_split_at_joint() {
        let p = ModelParams::LinearQuadratic {
            a: 0.331,
            b: 0.014,
            c: 0.00033,
            d: 28.341,
            e: -0.108,
        };
        let runs = regime_runs(&p, 10.0, 60.0, 501);
        assert!(runs.starts_with("DID (10.00–28.3"), "{runs}");
        assert!(runs.contains("→ DDS (28.3"), "{runs}");
    }
}
