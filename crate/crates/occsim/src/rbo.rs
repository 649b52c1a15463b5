//! Rank-Biased Overlap between ranked lists.
//!
//! RBO walks both lists depth by depth, measuring the proportion of shared
//! elements in the two prefixes, and discounts deeper agreement
//! geometrically with a persistence parameter `p`. The evaluation here is
//! truncated at the shorter list (or an explicit depth cap) and reports the
//! residual tail mass `p^D` alongside the value, so the bound
//! `value <= value + residual <= 1` stays visible for short lists.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::hash::Hash;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::projections::MatrixIoError;

#[derive(Debug, Error)]
pub enum RboError {
    #[error("persistence parameter p must lie strictly between 0 and 1 (got {0})")]
    InvalidPersistence(f64),
    #[error("ranked lists must not be empty")]
    EmptyList,
    #[error("ranked lists must not contain duplicates")]
    DuplicatesInList,
    #[error("depth must be at least 1")]
    InvalidDepth,
    #[error("the two ranking sets share no source")]
    EmptySourceIntersection,
}

/// RBO evaluation parameters.
#[derive(Debug, Clone, Copy)]
pub struct RboConfig {
    /// Persistence: the weight of depth d is proportional to p^(d-1).
    pub p: f64,
    /// Optional truncation depth; the effective depth is the minimum of
    /// both list lengths and this cap.
    pub max_depth: Option<usize>,
}

impl RboConfig {
    pub fn new(p: f64) -> Result<Self, RboError> {
        let cfg = RboConfig { p, max_depth: None };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_max_depth(mut self, depth: usize) -> Result<Self, RboError> {
        if depth < 1 {
            return Err(RboError::InvalidDepth);
        }
        self.max_depth = Some(depth);
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), RboError> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(RboError::InvalidPersistence(self.p));
        }
        if let Some(d) = self.max_depth {
            if d < 1 {
                return Err(RboError::InvalidDepth);
            }
        }
        Ok(())
    }
}

/// A truncated RBO evaluation: the value accumulated down to depth D and
/// the residual tail mass p^D not seen by the truncation.
#[derive(Debug, Clone, Copy)]
pub struct RboResult {
    pub value: f64,
    pub residual: f64,
}

fn has_duplicates<T: Eq + Hash>(list: &[T]) -> bool {
    let mut seen = HashSet::with_capacity(list.len());
    !list.iter().all(|item| seen.insert(item))
}

/// Rank-Biased Overlap of two duplicate-free ranked lists.
pub fn rbo<T: Eq + Hash>(l1: &[T], l2: &[T], cfg: &RboConfig) -> Result<RboResult, RboError> {
    cfg.validate()?;
    if l1.is_empty() || l2.is_empty() {
        return Err(RboError::EmptyList);
    }
    if has_duplicates(l1) || has_duplicates(l2) {
        return Err(RboError::DuplicatesInList);
    }
    let depth = l1.len().min(l2.len()).min(cfg.max_depth.unwrap_or(usize::MAX));
    let mut seen1: HashSet<&T> = HashSet::with_capacity(depth);
    let mut seen2: HashSet<&T> = HashSet::with_capacity(depth);
    let mut overlap = 0usize;
    let mut weight = 1.0; // p^(d-1)
    let mut sum = 0.0;
    for d in 1..=depth {
        let a = &l1[d - 1];
        let b = &l2[d - 1];
        if a == b {
            overlap += 1;
        } else {
            if seen2.contains(a) {
                overlap += 1;
            }
            if seen1.contains(b) {
                overlap += 1;
            }
        }
        seen1.insert(a);
        seen2.insert(b);
        sum += weight * (overlap as f64 / d as f64);
        weight *= cfg.p;
    }
    Ok(RboResult {
        value: (1.0 - cfg.p) * sum,
        residual: weight,
    })
}

/// Contribution of the first `depth` ranks to the full RBO value:
///
/// `W(p, d) = 1 - p^(d-1) + (d (1-p)/p) (ln(1/(1-p)) - sum_{i=1}^{d-1} p^i/i)`
///
/// Monotone nondecreasing in `d` with limit 1.
pub fn rbo_weight(p: f64, depth: usize) -> Result<f64, RboError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(RboError::InvalidPersistence(p));
    }
    if depth < 1 {
        return Err(RboError::InvalidDepth);
    }
    let mut inner = 0.0;
    let mut p_pow = p; // p^i
    for i in 1..depth {
        inner += p_pow / i as f64;
        p_pow *= p;
    }
    let head = 1.0 - p.powi(depth as i32 - 1);
    let tail = depth as f64 * (1.0 - p) / p * ((1.0 / (1.0 - p)).ln() - inner);
    Ok(head + tail)
}

/// Per-source RBO values between two ranking sets, over the sources they
/// share. Sources present on one side only are counted, not an error; an
/// empty intersection is.
#[derive(Debug, Clone)]
pub struct RboDistribution {
    /// `(source_id, rbo_value)`, sorted by source id.
    pub values: Vec<(String, f64)>,
    pub only_in_a: usize,
    pub only_in_b: usize,
}

pub fn rbo_distribution(
    set_a: &BTreeMap<String, Vec<String>>,
    set_b: &BTreeMap<String, Vec<String>>,
    cfg: &RboConfig,
) -> Result<RboDistribution, RboError> {
    cfg.validate()?;
    let shared: Vec<&String> = set_a.keys().filter(|k| set_b.contains_key(*k)).collect();
    if shared.is_empty() {
        return Err(RboError::EmptySourceIntersection);
    }
    let only_in_a = set_a.len() - shared.len();
    let only_in_b = set_b.len() - shared.len();
    let values: Result<Vec<(String, f64)>, RboError> = shared
        .par_iter()
        .map(|source| {
            let result = rbo(&set_a[*source], &set_b[*source], cfg)?;
            Ok(((*source).clone(), result.value))
        })
        .collect();
    Ok(RboDistribution {
        values: values?,
        only_in_a,
        only_in_b,
    })
}

impl RboDistribution {
    pub fn write_csv(&self, path: &Path) -> Result<(), MatrixIoError> {
        let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        writer.write_record(["source_id", "rbo"])?;
        for (source, value) in &self.values {
            writer.write_record([source.as_str(), &format!("{value}")])?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Equal-width density histogram of the RBO values over [0, 1].
    pub fn histogram(&self, bins: usize) -> crate::validation::Histogram {
        let weighted: Vec<(f64, u64)> = self.values.iter().map(|&(_, v)| (v, 1)).collect();
        histogram_over_unit_interval(&weighted, bins)
    }
}

fn histogram_over_unit_interval(
    values: &[(f64, u64)],
    bins: usize,
) -> crate::validation::Histogram {
    use crate::validation::{Histogram, HistogramBin};
    let total: u64 = values.iter().map(|&(_, w)| w).sum();
    let width = 1.0 / bins as f64;
    let mut weights = vec![0u64; bins];
    for &(v, w) in values {
        let idx = ((v / width) as usize).min(bins - 1);
        weights[idx] += w;
    }
    Histogram {
        bins: (0..bins)
            .map(|b| HistogramBin {
                bin_left: b as f64 * width,
                bin_right: (b + 1) as f64 * width,
                density: if total == 0 {
                    0.0
                } else {
                    weights[b] as f64 / (total as f64 * width)
                },
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn list(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn identical_lists_leave_only_residual() {
        let l = list(&["a", "b", "c", "d"]);
        for p in [0.5, 0.9, 0.99] {
            let r = rbo(&l, &l, &RboConfig::new(p).unwrap()).unwrap();
            let expect = 1.0 - p.powi(4);
            assert!((r.value - expect).abs() < 1e-15, "p = {p}");
            assert!((r.residual - p.powi(4)).abs() < 1e-15);
        }
    }

    #[test]
    fn disjoint_lists_are_exactly_zero() {
        let r = rbo(
            &list(&["a", "b", "c"]),
            &list(&["x", "y", "z"]),
            &RboConfig::new(0.9).unwrap(),
        )
        .unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn hand_case_is_exact() {
        // prefixes agree 1, 1/2, 1 at depths 1..3
        let r = rbo(
            &list(&["a", "b", "c"]),
            &list(&["a", "c", "b"]),
            &RboConfig::new(0.5).unwrap(),
        )
        .unwrap();
        assert_eq!(r.value, 0.75);
        assert_eq!(r.residual, 0.125);
    }

    #[test]
    fn truncation_depth_caps_evaluation() {
        let l1 = list(&["a", "b", "c", "d", "e"]);
        let l2 = list(&["a", "b", "x", "y", "z"]);
        let cfg = RboConfig::new(0.9).unwrap().with_max_depth(2).unwrap();
        let r = rbo(&l1, &l2, &cfg).unwrap();
        // agreement is 1 at both depths
        assert!((r.value - (1.0 - 0.9f64.powi(2))).abs() < 1e-15);
        assert!((r.residual - 0.81).abs() < 1e-15);
    }

    #[test]
    fn symmetry_and_input_validation() {
        let l1 = list(&["a", "b", "c", "d"]);
        let l2 = list(&["b", "a", "e", "c"]);
        let cfg = RboConfig::new(0.8).unwrap();
        let fwd = rbo(&l1, &l2, &cfg).unwrap();
        let rev = rbo(&l2, &l1, &cfg).unwrap();
        assert_eq!(fwd.value, rev.value);

        assert!(matches!(
            rbo(&Vec::<String>::new(), &l2, &cfg),
            Err(RboError::EmptyList)
        ));
        assert!(matches!(
            rbo(&list(&["a", "a"]), &l2, &cfg),
            Err(RboError::DuplicatesInList)
        ));
        assert!(matches!(RboConfig::new(1.0), Err(RboError::InvalidPersistence(_))));
        assert!(matches!(RboConfig::new(0.0), Err(RboError::InvalidPersistence(_))));
    }

    #[test]
    fn weight_closed_form_anchors() {
        // W(p, 1) reduces to ((1-p)/p) ln(1/(1-p))
        for p in [0.3f64, 0.5, 0.9] {
            let expect = (1.0 - p) / p * (1.0 / (1.0 - p)).ln();
            assert!((rbo_weight(p, 1).unwrap() - expect).abs() < 1e-15);
        }
        // nondecreasing in depth, approaching 1
        let mut prev = 0.0;
        for d in 1..=50 {
            let w = rbo_weight(0.5, d).unwrap();
            assert!(w >= prev - 1e-12, "W(0.5, {d}) decreased: {prev} -> {w}");
            prev = w;
        }
        assert!((prev - 1.0).abs() < 1e-9);
        assert!(rbo_weight(0.9, 0).is_err());
        assert!(rbo_weight(1.0, 5).is_err());
    }

    #[test]
    fn distribution_over_shared_sources() {
        let mut a = BTreeMap::new();
        a.insert("s1".to_string(), list(&["a", "b"]));
        a.insert("s2".to_string(), list(&["c", "d"]));
        a.insert("only_a".to_string(), list(&["x"]));
        let mut b = BTreeMap::new();
        b.insert("s1".to_string(), list(&["a", "b"]));
        b.insert("s2".to_string(), list(&["d", "c"]));
        b.insert("only_b".to_string(), list(&["y"]));

        let cfg = RboConfig::new(0.9).unwrap();
        let dist = rbo_distribution(&a, &b, &cfg).unwrap();
        assert_eq!(dist.values.len(), 2);
        assert_eq!(dist.only_in_a, 1);
        assert_eq!(dist.only_in_b, 1);
        assert_eq!(dist.values[0].0, "s1");
        assert!((dist.values[0].1 - (1.0 - 0.9f64.powi(2))).abs() < 1e-15);
        assert!(dist.values[1].1 < dist.values[0].1);

        let empty: BTreeMap<String, Vec<String>> = BTreeMap::new();
        assert!(matches!(
            rbo_distribution(&a, &empty, &cfg),
            Err(RboError::EmptySourceIntersection)
        ));
    }

    #[test]
    fn self_distribution_is_identity_value() {
        let mut a = BTreeMap::new();
        for s in 0..5 {
            a.insert(
                format!("s{s}"),
                (0..20).map(|i| format!("t{s}_{i}")).collect::<Vec<_>>(),
            );
        }
        let cfg = RboConfig::new(0.9).unwrap();
        let dist = rbo_distribution(&a, &a, &cfg).unwrap();
        assert_eq!(dist.values.len(), 5);
        let expect = 1.0 - 0.9f64.powi(20);
        for (_, v) in &dist.values {
            assert!((v - expect).abs() < 1e-15);
        }
    }
}
