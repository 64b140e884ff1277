//! Mean crowding, community and species dominance, and the comparison
//! diversity indices for a single abundance vector.
//!
//! All community quantities are computed from the two power sums
//! `S = Σm` and `Q = Σm²`:
//!
//! ```text
//! m*  = m_c + V/m_c − 1 = (Q − S)/S
//! D_c = m*/m_c          = n(Q − S)/S²
//! D_sd(i) = m*/m_i      = (Q − S)/(S·m_i)
//! D_s(i)  = D_c − D_sd  = (Q − S)(n·m_i − S)/(S²·m_i)
//! ```
//!
//! with `V` the divisor-`n` variance. For integer counts every numerator and
//! denominator is an exact integer in `f64` up to 2⁵³, so each metric carries
//! a single rounding.

use crate::error::{Error, Result};
use crate::ingest::SubjectSeries;
use crate::scalar::{Field, Real};

/// Per-species abundances over a fixed roster.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceVector<T> {
    values: Vec<T>,
}

impl<T: Field> AbundanceVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidAbundance("empty roster".into()));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite_value() || *v < T::zero() {
                return Err(Error::InvalidAbundance(format!(
                    "species {i} has abundance {v:?}"
                )));
            }
        }
        if values.iter().all(|v| v.is_zero()) {
            return Err(Error::ZeroCommunity);
        }
        Ok(Self { values })
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        Self::new(counts.iter().map(|&c| T::from_count(c)).collect())
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> T {
        self.values
            .iter()
            .cloned()
            .fold(T::zero(), |acc, v| acc + v)
    }

    fn sum_sq(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, v| acc + v.clone() * v.clone())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.values.len() {
            return Err(Error::Index {
                index: i,
                len: self.values.len(),
            });
        }
        Ok(())
    }
}

impl<T: Real> AbundanceVector<T> {
    /// Rescales to relative abundances (sum 1).
    pub fn normalized(&self) -> Self {
        let total = self.total();
        Self {
            values: self.values.iter().map(|&v| v / total).collect(),
        }
    }
}

/// Community-level summary of one abundance vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityStats<T> {
    pub n: usize,
    pub total: T,
    /// Mean abundance per species.
    pub mean: T,
    /// Population variance (divisor n).
    pub variance: T,
    pub mean_crowding: T,
    pub dominance: T,
}

pub fn community_stats<T: Field>(v: &AbundanceVector<T>) -> CommunityStats<T> {
    let n = T::from_len(v.len());
    let s = v.total();
    let q = v.sum_sq();
    let excess = q.clone() - s.clone();
    CommunityStats {
        n: v.len(),
        total: s.clone(),
        mean: s.clone() / n.clone(),
        variance: (n.clone() * q - s.clone() * s.clone()) / (n.clone() * n.clone()),
        mean_crowding: excess.clone() / s.clone(),
        dominance: n * excess / (s.clone() * s),
    }
}

pub fn mean_crowding<T: Field>(v: &AbundanceVector<T>) -> T {
    community_stats(v).mean_crowding
}

/// Community dominance `D_c = m*/m_c`.
pub fn community_dominance<T: Field>(v: &AbundanceVector<T>) -> T {
    let n = T::from_len(v.len());
    let s = v.total();
    n * (v.sum_sq() - s.clone()) / (s.clone() * s)
}

/// Species dominance distance `D_sd = m*/m_i`; `+∞` for an absent species.
pub fn species_dominance_distance<T: Real>(v: &AbundanceVector<T>, i: usize) -> Result<T> {
    v.check_index(i)?;
    let m = v.values[i];
    if m.is_zero() {
        return Ok(T::infinity());
    }
    let s = v.total();
    Ok((v.sum_sq() - s) / (s * m))
}

/// Species dominance `D_s = D_c − D_sd`; `−∞` for an absent species.
pub fn species_dominance<T: Real>(v: &AbundanceVector<T>, i: usize) -> Result<T> {
    v.check_index(i)?;
    let m = v.values[i];
    if m.is_zero() {
        return Ok(T::neg_infinity());
    }
    let n = T::from_len(v.len());
    let s = v.total();
    Ok((v.sum_sq() - s) * (n * m - s) / (s * s * m))
}

/// `(D_sd, D_s)` for every species, sharing the power sums.
pub fn species_pairs<T: Real>(v: &AbundanceVector<T>) -> Vec<(T, T)> {
    let n = T::from_len(v.len());
    let s = v.total();
    let excess = v.sum_sq() - s;
    v.values
        .iter()
        .map(|&m| {
            if m.is_zero() {
                (T::infinity(), T::neg_infinity())
            } else {
                (excess / (s * m), excess * (n * m - s) / (s * s * m))
            }
        })
        .collect()
}

/// Simpson's `D = Σp²` computed from proportions.
pub fn simpson_index<T: Field>(v: &AbundanceVector<T>) -> T {
    let s = v.total();
    v.values.iter().fold(T::zero(), |acc, m| {
        let p = m.clone() / s.clone();
        acc + p.clone() * p
    })
}

/// `D_c − (n·D − n/Σm)`, zero up to rounding for every valid vector and
/// exactly zero over the rationals.
pub fn simpson_identity_residual<T: Field>(v: &AbundanceVector<T>) -> T {
    let n = T::from_len(v.len());
    let linear = n.clone() * simpson_index(v) - n / v.total();
    community_dominance(v) - linear
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

/// The comparison indices, all over proportions of the same roster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexSet<T> {
    pub simpson: T,
    /// Nats unless computed with [`LogBase::Two`].
    pub shannon: T,
    /// `H / ln n`; NaN for a single-species roster.
    pub shannon_evenness: T,
    pub berger_parker: T,
    /// `D / n`, the literal "diversity over richness" ratio.
    pub simpson_evenness: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndexKind {
    BergerParker,
    Shannon,
    ShannonEvenness,
    Simpson,
    SimpsonEvenness,
}

impl IndexKind {
    pub const ALL: [IndexKind; 5] = [
        IndexKind::BergerParker,
        IndexKind::Shannon,
        IndexKind::ShannonEvenness,
        IndexKind::Simpson,
        IndexKind::SimpsonEvenness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IndexKind::BergerParker => "berger_parker",
            IndexKind::Shannon => "shannon",
            IndexKind::ShannonEvenness => "shannon_evenness",
            IndexKind::Simpson => "simpson",
            IndexKind::SimpsonEvenness => "simpson_evenness",
        }
    }

    pub fn pick<T: Copy>(self, set: &IndexSet<T>) -> T {
        match self {
            IndexKind::BergerParker => set.berger_parker,
            IndexKind::Shannon => set.shannon,
            IndexKind::ShannonEvenness => set.shannon_evenness,
            IndexKind::Simpson => set.simpson,
            IndexKind::SimpsonEvenness => set.simpson_evenness,
        }
    }
}

pub fn diversity_indices<T: Real>(v: &AbundanceVector<T>, base: LogBase) -> IndexSet<T> {
    let s = v.total();
    let n = T::from_len(v.len());
    let log = |x: T| match base {
        LogBase::Natural => x.ln(),
        LogBase::Two => x.log2(),
    };
    let mut shannon = T::zero();
    let mut max_p = T::zero();
    for &m in &v.values {
        if m > T::zero() {
            let p = m / s;
            shannon = shannon - p * log(p);
            max_p = max_p.max(p);
        }
    }
    // -0.0 for a single species
    let shannon = shannon.abs();
    let simpson = simpson_index(v);
    IndexSet {
        simpson,
        shannon,
        shannon_evenness: if v.len() > 1 {
            shannon / log(n)
        } else {
            T::nan()
        },
        berger_parker: max_p,
        simpson_evenness: simpson / n,
    }
}

/// Ordinary least-squares line with Pearson correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRegression<T> {
    pub slope: T,
    pub intercept: T,
    pub r: T,
    pub n: usize,
}

/// OLS of `y` on `x`.
pub fn ols<T: Real>(x: &[T], y: &[T]) -> Result<LinearRegression<T>> {
    if x.len() != y.len() {
        return Err(Error::Precondition("x and y lengths differ".into()));
    }
    if x.len() < 3 {
        return Err(Error::Precondition(format!(
            "regression needs at least 3 points, got {}",
            x.len()
        )));
    }
    let n = T::from_len(x.len());
    let mx = x.iter().fold(T::zero(), |a, &v| a + v) / n;
    let my = y.iter().fold(T::zero(), |a, &v| a + v) / n;
    let (mut sxx, mut syy, mut sxy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx = sxx + dx * dx;
        syy = syy + dy * dy;
        sxy = sxy + dx * dy;
    }
    let scale_x = x.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    let scale_y = y.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
    let tiny = T::epsilon() * T::lit(16.0);
    if sxx <= tiny * tiny * scale_x * scale_x * n {
        return Err(Error::DegenerateRegression("predictor has zero variance".into()));
    }
    if syy <= tiny * tiny * scale_y * scale_y * n {
        return Err(Error::DegenerateRegression("response has zero variance".into()));
    }
    let slope = sxy / sxx;
    Ok(LinearRegression {
        slope,
        intercept: my - slope * mx,
        r: (sxy / (sxx.sqrt() * syy.sqrt())).max(-T::one()).min(T::one()),
        n: x.len(),
    })
}

/// Abundance vectors of a subject, one per sample, over its roster.
pub fn sample_vectors<T: Real>(
    series: &SubjectSeries,
    normalize: bool,
) -> Vec<Result<AbundanceVector<T>>> {
    (0..series.n_samples())
        .map(|t| {
            let v = AbundanceVector::from_counts(&series.sample_counts(t))?;
            Ok(if normalize { v.normalized() } else { v })
        })
        .collect()
}

/// Regresses `D_c` on one of the comparison indices across a subject's
/// samples.
pub fn regress_dominance_vs_index<T: Real>(
    series: &SubjectSeries,
    which: IndexKind,
    base: LogBase,
) -> Result<LinearRegression<T>> {
    if series.n_samples() < 3 {
        return Err(Error::Precondition(format!(
            "subject {} has {} samples; index regression needs 3",
            series.subject_id,
            series.n_samples()
        )));
    }
    let mut dc = Vec::with_capacity(series.n_samples());
    let mut idx = Vec::with_capacity(series.n_samples());
    for v in sample_vectors::<T>(series, false) {
        let v = v?;
        dc.push(community_dominance(&v));
        idx.push(which.pick(&diversity_indices(&v, base)));
    }
    if idx.iter().any(|x| !x.is_finite()) {
        return Err(Error::DegenerateRegression(format!(
            "{} is undefined for this roster",
            which.name()
        )));
    }
    ols(&idx, &dc)
}
