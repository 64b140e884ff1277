//! Dominance records per sample and the relative-change stability series
//! derived from them.

use crate::error::{Error, Result};
use crate::ingest::SubjectSeries;
use crate::metrics::{community_dominance, sample_vectors, species_pairs};
use crate::scalar::Real;

/// Denominators below this magnitude are excluded instead of producing huge
/// ratios.
pub const DEFAULT_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesDominance<T> {
    pub species_id: String,
    pub abundance: T,
    /// `D_sd`, `+∞` when the species is absent.
    pub distance: T,
    /// `D_s`, `−∞` when absent until [`apply_sentinel`] replaces it.
    pub dominance: T,
    /// Set when `dominance` holds the subject-wide sentinel.
    pub sentinel: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceRecord<T> {
    pub sample_id: String,
    pub community: T,
    pub species: Vec<SpeciesDominance<T>>,
}

/// Computes one record per sample of the subject, over its full roster.
pub fn subject_records<T: Real>(
    series: &SubjectSeries,
    normalize: bool,
) -> Result<Vec<DominanceRecord<T>>> {
    sample_vectors::<T>(series, normalize)
        .into_iter()
        .enumerate()
        .map(|(t, v)| {
            let v = v?;
            let species = species_pairs(&v)
                .into_iter()
                .zip(v.values())
                .zip(&series.species_ids)
                .map(|(((distance, dominance), &abundance), id)| SpeciesDominance {
                    species_id: id.clone(),
                    abundance,
                    distance,
                    dominance,
                    sentinel: false,
                })
                .collect();
            Ok(DominanceRecord {
                sample_id: series.sample_ids[t].clone(),
                community: community_dominance(&v),
                species,
            })
        })
        .collect()
}

/// Replaces every `D_s = −∞` by the smallest finite `D_s` over all species
/// and samples of the subject. `D_sd = +∞` is left untouched.
pub fn apply_sentinel<T: Real>(mut records: Vec<DominanceRecord<T>>) -> Result<Vec<DominanceRecord<T>>> {
    let floor = records
        .iter()
        .flat_map(|r| r.species.iter())
        .filter(|s| s.dominance.is_finite())
        .map(|s| s.dominance)
        .fold(None, |acc: Option<T>, x| Some(acc.map_or(x, |a| a.min(x))));
    let has_gap = records
        .iter()
        .flat_map(|r| r.species.iter())
        .any(|s| s.dominance == T::neg_infinity());
    let floor = match floor {
        Some(f) => f,
        None if !has_gap => return Ok(records),
        None => return Err(Error::Sentinel),
    };
    for sp in records.iter_mut().flat_map(|r| r.species.iter_mut()) {
        if sp.dominance == T::neg_infinity() {
            sp.dominance = floor;
            sp.sentinel = true;
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    Community,
    Species(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exclusion {
    ZeroDenominator,
}

impl Exclusion {
    pub fn reason(self) -> &'static str {
        match self {
            Exclusion::ZeroDenominator => "zero denominator",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityPoint<T> {
    pub t: usize,
    /// Dominance at `t`.
    pub dominance: T,
    /// Relative change from `t` to `t + 1`; `None` when excluded.
    pub stability: Option<T>,
    pub exclusion: Option<Exclusion>,
    /// The denominator was negative, so the sign of the ratio is inverted
    /// relative to the direction of change.
    pub negative_base: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilitySeries<T> {
    pub subject_id: String,
    pub scope: Scope,
    pub points: Vec<StabilityPoint<T>>,
}

impl<T: Real> StabilitySeries<T> {
    /// `(D, S)` pairs of retained points.
    pub fn pairs(&self) -> Vec<(T, T)> {
        self.points
            .iter()
            .filter_map(|p| p.stability.map(|s| (p.dominance, s)))
            .collect()
    }

    pub fn excluded(&self) -> impl Iterator<Item = &StabilityPoint<T>> {
        self.points.iter().filter(|p| p.exclusion.is_some())
    }
}

/// `S(t) = [D(t+1) − D(t)] / D(t)` for `t = 0..T−1`.
pub fn relative_changes<T: Real>(values: &[T], eps: T) -> Result<Vec<StabilityPoint<T>>> {
    if values.len() < 2 {
        return Err(Error::Precondition(format!(
            "stability needs at least 2 samples, got {}",
            values.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Precondition(format!(
            "dominance at t = {i} is not finite"
        )));
    }
    Ok(values
        .windows(2)
        .enumerate()
        .map(|(t, w)| {
            let (d, next) = (w[0], w[1]);
            if d.abs() < eps {
                StabilityPoint {
                    t,
                    dominance: d,
                    stability: None,
                    exclusion: Some(Exclusion::ZeroDenominator),
                    negative_base: false,
                }
            } else {
                StabilityPoint {
                    t,
                    dominance: d,
                    stability: Some((next - d) / d),
                    exclusion: None,
                    negative_base: d < T::zero(),
                }
            }
        })
        .collect())
}

pub fn community_stability<T: Real>(subject_id: &str, dc: &[T]) -> Result<StabilitySeries<T>> {
    Ok(StabilitySeries {
        subject_id: subject_id.to_owned(),
        scope: Scope::Community,
        points: relative_changes(dc, T::lit(DEFAULT_EPSILON))?,
    })
}

/// Expects sentinel-replaced values; a remaining `−∞` is a precondition
/// failure.
pub fn species_stability<T: Real>(
    subject_id: &str,
    species_id: &str,
    ds: &[T],
) -> Result<StabilitySeries<T>> {
    Ok(StabilitySeries {
        subject_id: subject_id.to_owned(),
        scope: Scope::Species(species_id.to_owned()),
        points: relative_changes(ds, T::lit(DEFAULT_EPSILON))?,
    })
}

/// Community stability straight from a subject's records.
pub fn community_series<T: Real>(
    subject_id: &str,
    records: &[DominanceRecord<T>],
) -> Result<StabilitySeries<T>> {
    let dc: Vec<T> = records.iter().map(|r| r.community).collect();
    community_stability(subject_id, &dc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn record(ds: &[f64]) -> DominanceRecord<f64> {
        DominanceRecord {
            sample_id: "s".into(),
            community: 1.0,
            species: ds
                .iter()
                .enumerate()
                .map(|(i, &d)| SpeciesDominance {
                    species_id: format!("sp{i}"),
                    abundance: if d.is_finite() { 1.0 } else { 0.0 },
                    distance: if d.is_finite() { 1.0 - d } else { f64::INFINITY },
                    dominance: d,
                    sentinel: false,
                })
                .collect(),
        }
    }

    #[test]
    fn sentinel_is_subject_wide_minimum() {
        let recs = vec![record(&[5.0, f64::NEG_INFINITY]), record(&[-10.0, 2.0])];
        let out = apply_sentinel(recs).unwrap();
        assert_eq!(out[0].species[1].dominance, -10.0);
        assert!(out[0].species[1].sentinel);
        assert_eq!(out[0].species[1].distance, f64::INFINITY);
        assert!(!out[1].species[0].sentinel);
        assert_eq!(out[1].species[0].dominance, -10.0);
    }

    #[test]
    fn sentinel_value_from_table_is_copied_verbatim() {
        let recs = vec![
            record(&[31.05, f64::NEG_INFINITY]),
            record(&[-3688.829, f64::NEG_INFINITY]),
        ];
        let out = apply_sentinel(recs).unwrap();
        assert_eq!(out[0].species[1].dominance, -3688.829);
        assert_eq!(out[1].species[1].dominance, -3688.829);
    }

    #[test]
    fn sentinel_needs_a_finite_value() {
        let recs = vec![record(&[f64::NEG_INFINITY]), record(&[f64::NEG_INFINITY])];
        assert_eq!(apply_sentinel(recs).unwrap_err(), Error::Sentinel);
    }

    #[test]
    fn sentinel_is_idempotent() {
        let recs = vec![record(&[5.0, f64::NEG_INFINITY, 3.0]), record(&[-2.0, 7.0, f64::NEG_INFINITY])];
        let once = apply_sentinel(recs).unwrap();
        let twice = apply_sentinel(once.clone()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn community_stability_from_table_values() {
        let s = community_stability("400", &[31.824, 46.355]).unwrap();
        assert_relative_eq!(s.points[0].stability.unwrap(), 14.531 / 31.824, max_relative = 1e-12);
        assert_relative_eq!(s.points[0].stability.unwrap(), 0.456605, epsilon = 5e-7);
    }

    #[test]
    fn species_stability_from_table_values() {
        let s = species_stability("400", "OTU#1", &[31.050, 45.471]).unwrap();
        assert_relative_eq!(s.points[0].stability.unwrap(), 0.46444, epsilon = 5e-6);
        let flat = species_stability("400", "x", &[-10.0, -10.0]).unwrap();
        assert_eq!(flat.points[0].stability, Some(0.0));
        assert!(flat.points[0].negative_base);
    }

    #[test]
    fn zero_denominator_is_excluded_with_reason() {
        let s = community_stability("x", &[2.0, 0.0, 3.0]).unwrap();
        assert_eq!(s.points.len(), 2);
        assert_eq!(s.points[0].stability, Some(-1.0));
        assert_eq!(s.points[1].exclusion, Some(Exclusion::ZeroDenominator));
        assert_eq!(s.points[1].exclusion.unwrap().reason(), "zero denominator");
        assert_eq!(s.pairs(), vec![(2.0, -1.0)]);
        assert_eq!(s.excluded().count(), 1);
    }

    #[test]
    fn constant_series_is_perfectly_stable() {
        let s = community_stability("x", &[4.0; 6]).unwrap();
        assert!(s.points.iter().all(|p| p.stability == Some(0.0)));
    }

    #[test]
    fn short_or_infinite_series_rejected() {
        assert!(matches!(
            community_stability("x", &[1.0]),
            Err(Error::Precondition(_))
        ));
        assert!(matches!(
            species_stability("x", "y", &[1.0, f64::NEG_INFINITY]),
            Err(Error::Precondition(_))
        ));
    }

    proptest! {
        #[test]
        fn reconstructs_next_value(values in prop::collection::vec(0.5f64..100.0, 2..40)) {
            let s = community_stability("x", &values).unwrap();
            prop_assert_eq!(s.points.len(), values.len() - 1);
            for p in &s.points {
                let next = p.dominance * (1.0 + p.stability.unwrap());
                prop_assert!((next - values[p.t + 1]).abs() <= 1e-12 * values[p.t + 1].abs());
            }
        }

        #[test]
        fn invariant_under_scaling(values in prop::collection::vec(0.5f64..100.0, 2..40), k in 0.01f64..100.0) {
            let a = community_stability("x", &values).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * k).collect();
            let b = community_stability("x", &scaled).unwrap();
            for (p, q) in a.points.iter().zip(&b.points) {
                let (s, t) = (p.stability.unwrap(), q.stability.unwrap());
                prop_assert!((s - t).abs() <= 1e-12 * s.abs().max(1.0));
            }
        }

        #[test]
        fn sentinel_never_touches_finite_values(
            rows in prop::collection::vec(prop::collection::vec(prop::option::of(-1e3f64..1e3), 1..6), 1..6)
        ) {
            let width = rows[0].len();
            let recs: Vec<_> = rows.iter().map(|r| {
                let ds: Vec<f64> = (0..width).map(|i| r.get(i).copied().flatten().unwrap_or(f64::NEG_INFINITY)).collect();
                record(&ds)
            }).collect();
            if let Ok(out) = apply_sentinel(recs.clone()) {
                for (a, b) in recs.iter().zip(&out) {
                    for (x, y) in a.species.iter().zip(&b.species) {
                        if x.dominance.is_finite() {
                            prop_assert_eq!(x.dominance, y.dominance);
                        } else {
                            prop_assert!(y.dominance.is_finite() && y.sentinel);
                        }
                    }
                }
            }
        }
    }
}
