//! Validation of similarity measures against observed job transitions.
//!
//! Observed ordered ISCO pairs are split into a rare (negative) and a
//! common (positive) class by transfer count. Similarity values are
//! normalized so everything up to a chosen percentile maps into [0,1] with
//! the tail clamped at 1, a threshold is picked to hit a target true
//! negative rate on the rare class, and a full ROC sweep with trapezoidal
//! AUC quantifies how well the measure separates the classes.
//!
//! Two evaluation modes exist: `transfers` weights every observed pair by
//! its transfer count; `pairs` counts each ordered distinct-code pair once,
//! treating pairs without any observed transfer as rare.
//!
//! A seeded synthetic generator stands in for confidential micro-data.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::crosswalk::IscoSimilarityMatrix;
use crate::graph::IscoCode;
use crate::projections::MatrixIoError;

pub const DEFAULT_RARE_THRESHOLD: u64 = 20;
pub const DEFAULT_NORM_PERCENTILE: f64 = 98.0;
pub const DEFAULT_TARGET_TNR: f64 = 0.65;
pub const DEFAULT_BINS: usize = 50;

/// Counts of observed job transfers between ordered ISCO code pairs.
#[derive(Debug, Clone, Default)]
pub struct TransitionTable {
    counts: BTreeMap<(IscoCode, IscoCode), u64>,
}

impl TransitionTable {
    /// Add transfers for an ordered pair, summing with any existing count.
    pub fn add(&mut self, source: IscoCode, target: IscoCode, count: u64) {
        *self.counts.entry((source, target)).or_insert(0) += count;
    }

    pub fn get(&self, source: &IscoCode, target: &IscoCode) -> u64 {
        self.counts
            .get(&(source.clone(), target.clone()))
            .copied()
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&IscoCode, &IscoCode, u64)> {
        self.counts.iter().map(|((s, t), &n)| (s, t, n))
    }

    /// Number of distinct ordered pairs.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Total transfers across all pairs.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// Pairs whose source equals their target. Retained in the table but
    /// excluded from evaluation.
    pub fn self_transition_pairs(&self) -> usize {
        self.counts.keys().filter(|(s, t)| s == t).count()
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), MatrixIoError> {
        let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        writer.write_record(["source_isco", "target_isco", "count"])?;
        for ((source, target), count) in &self.counts {
            writer.write_record([source.as_str(), target.as_str(), &count.to_string()])?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Which population the evaluation counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Each observed pair contributes its transfer count of observations.
    Transfers,
    /// Each ordered distinct-code pair contributes one observation.
    Pairs,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::Transfers => "transfers",
            EvalMode::Pairs => "pairs",
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("unknown mode `{0}` (expected transfers or pairs)")]
pub struct ParseModeError(pub String);

impl FromStr for EvalMode {
    type Err = ParseModeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transfers" => Ok(EvalMode::Transfers),
            "pairs" => Ok(EvalMode::Pairs),
            other => Err(ParseModeError(other.to_string())),
        }
    }
}

/// Evaluation parameters.
#[derive(Debug, Clone)]
pub struct ValidationConfig {
    /// Pairs with fewer observed transfers than this are rare.
    pub rare_threshold: u64,
    /// Percentile used to normalize similarity values into [0,1].
    pub norm_percentile: f64,
    /// Desired fraction of rare observations below the selected threshold.
    pub target_tnr: f64,
    /// Histogram bin count (reporting only; the ROC sweep uses raw values).
    pub bins: usize,
    pub mode: EvalMode,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            rare_threshold: DEFAULT_RARE_THRESHOLD,
            norm_percentile: DEFAULT_NORM_PERCENTILE,
            target_tnr: DEFAULT_TARGET_TNR,
            bins: DEFAULT_BINS,
            mode: EvalMode::Transfers,
        }
    }
}

impl ValidationConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.rare_threshold < 1 {
            return Err(ValidationError::InvalidConfig(
                "rare_threshold must be at least 1".into(),
            ));
        }
        if !(self.norm_percentile > 0.0 && self.norm_percentile < 100.0) {
            return Err(ValidationError::InvalidPercentile(self.norm_percentile));
        }
        if !(self.target_tnr > 0.0 && self.target_tnr < 1.0) {
            return Err(ValidationError::InvalidTargetTnr(self.target_tnr));
        }
        if self.bins < 2 {
            return Err(ValidationError::InvalidConfig("bins must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("cannot normalize an empty value list")]
    EmptyValues,
    #[error("values must be finite and non-negative (found {0})")]
    InvalidValue(f64),
    #[error("percentile must lie strictly between 0 and 100 (got {0})")]
    InvalidPercentile(f64),
    #[error("target TNR must lie strictly between 0 and 1 (got {0})")]
    InvalidTargetTnr(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("rare class is empty")]
    EmptyRareClass,
    #[error("the {0} class is empty; ROC is undefined")]
    EmptyClass(&'static str),
    #[error("matrix holds no off-diagonal similarity values")]
    NoObservations,
    #[error("all sampling weights are zero; no valid transition distribution")]
    DegenerateDistribution,
}

/// One histogram bin over normalized values.
#[derive(Debug, Clone, Serialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub density: f64,
}

/// An equal-width density histogram over [0, 1].
#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    fn from_weighted(values: &[(f64, u64)], bins: usize) -> Histogram {
        let total: u64 = values.iter().map(|&(_, w)| w).sum();
        let width = 1.0 / bins as f64;
        let mut weights = vec![0u64; bins];
        for &(v, w) in values {
            let idx = ((v / width) as usize).min(bins - 1);
            weights[idx] += w;
        }
        let bins = (0..bins)
            .map(|b| HistogramBin {
                bin_left: b as f64 * width,
                bin_right: (b + 1) as f64 * width,
                density: if total == 0 {
                    0.0
                } else {
                    weights[b] as f64 / (total as f64 * width)
                },
            })
            .collect();
        Histogram { bins }
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), MatrixIoError> {
        let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        writer.write_record(["bin_left", "bin_right", "density"])?;
        for bin in &self.bins {
            writer.write_record([
                format!("{}", bin.bin_left),
                format!("{}", bin.bin_right),
                format!("{}", bin.density),
            ])?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// One point of the ROC sweep.
#[derive(Debug, Clone, Serialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

pub fn write_roc_csv(points: &[RocPoint], path: &Path) -> Result<(), MatrixIoError> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    writer.write_record(["fpr", "tpr", "threshold"])?;
    for p in points {
        writer.write_record([
            format!("{}", p.fpr),
            format!("{}", p.tpr),
            format!("{}", p.threshold),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// The full outcome of one evaluation run.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub measure: String,
    pub mode: String,
    pub rare_threshold: u64,
    pub norm_percentile: f64,
    pub target_tnr: f64,
    pub bins: usize,
    /// The percentile value the normalization divided by.
    pub normalization_quantile: f64,
    pub threshold: f64,
    pub tnr: f64,
    pub tpr: f64,
    pub auc: f64,
    /// Weighted observation counts per class.
    pub rare_observations: u64,
    pub common_observations: u64,
    pub observation_count: u64,
    /// Transition pairs whose codes or cells are absent from the matrix.
    pub excluded_pairs: u64,
    /// Transition pairs with source == target, never evaluated.
    pub excluded_self_transitions: u64,
    /// Absent ordered distinct-code cells in the matrix.
    pub missing_cells: u64,
    pub rare_histogram: Histogram,
    pub common_histogram: Histogram,
    pub roc: Vec<RocPoint>,
}

impl ValidationReport {
    pub fn write_json(&self, path: &Path) -> Result<(), MatrixIoError> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| MatrixIoError::Format(e.to_string()))?;
        std::fs::write(path, json + "\n")?;
        Ok(())
    }
}

/// Nearest-rank empirical quantile: the value at 1-based rank
/// `ceil(percentile/100 * n)` of the sorted list.
fn nearest_rank_quantile(values: &[f64], percentile: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let rank = ((percentile / 100.0) * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Map values into [0,1]: everything up to the percentile-th quantile `q`
/// scales by `1/q`, values above clamp to 1. A zero quantile sends positive
/// values to 1 and zeros to 0, so an all-zero input stays all zero.
pub fn normalize_values(values: &[f64], percentile: f64) -> Result<Vec<f64>, ValidationError> {
    Ok(normalize_with_quantile(values, percentile)?.0)
}

fn normalize_with_quantile(
    values: &[f64],
    percentile: f64,
) -> Result<(Vec<f64>, f64), ValidationError> {
    if values.is_empty() {
        return Err(ValidationError::EmptyValues);
    }
    if !(percentile > 0.0 && percentile < 100.0) {
        return Err(ValidationError::InvalidPercentile(percentile));
    }
    if let Some(&bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(ValidationError::InvalidValue(bad));
    }
    let q = nearest_rank_quantile(values, percentile);
    let normalized = values
        .iter()
        .map(|&v| {
            if q > 0.0 {
                (v / q).min(1.0)
            } else if v > 0.0 {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Ok((normalized, q))
}

/// A selected threshold and the true negative rate it realizes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThresholdSelection {
    pub threshold: f64,
    pub realized_tnr: f64,
}

/// Pick the smallest observed value `t` such that the fraction of rare
/// observations strictly below `t` reaches the target. When even the
/// largest value fails (all mass at the top value), `t` lands just above
/// the maximum and the realized rate is 1.
pub fn select_threshold(
    rare_values: &[f64],
    target_tnr: f64,
) -> Result<ThresholdSelection, ValidationError> {
    let weighted: Vec<(f64, u64)> = rare_values.iter().map(|&v| (v, 1)).collect();
    select_threshold_weighted(&weighted, target_tnr)
}

fn select_threshold_weighted(
    rare: &[(f64, u64)],
    target_tnr: f64,
) -> Result<ThresholdSelection, ValidationError> {
    if !(target_tnr > 0.0 && target_tnr < 1.0) {
        return Err(ValidationError::InvalidTargetTnr(target_tnr));
    }
    let total: u64 = rare.iter().map(|&(_, w)| w).sum();
    if total == 0 {
        return Err(ValidationError::EmptyRareClass);
    }
    let mut sorted: Vec<(f64, u64)> = rare.iter().filter(|&&(_, w)| w > 0).cloned().collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    // collapse equal values
    let mut grouped: Vec<(f64, u64)> = Vec::new();
    for (v, w) in sorted {
        match grouped.last_mut() {
            Some((gv, gw)) if *gv == v => *gw += w,
            _ => grouped.push((v, w)),
        }
    }
    let mut below = 0u64;
    for &(v, w) in &grouped {
        let tnr = below as f64 / total as f64;
        if tnr >= target_tnr {
            return Ok(ThresholdSelection { threshold: v, realized_tnr: tnr });
        }
        below += w;
    }
    let max = grouped.last().expect("nonempty rare class").0;
    Ok(ThresholdSelection { threshold: max.next_up(), realized_tnr: 1.0 })
}

/// One class-labeled observation: normalized value, weight, positivity.
#[derive(Debug, Clone, Copy)]
struct Observation {
    value: f64,
    weight: u64,
    positive: bool,
}

/// Evaluate a similarity matrix against a transition table.
pub fn evaluate(
    sim: &IscoSimilarityMatrix,
    trans: &TransitionTable,
    cfg: &ValidationConfig,
) -> Result<ValidationReport, ValidationError> {
    cfg.validate()?;
    let cells = sim.present_off_diagonal();
    if cells.is_empty() {
        return Err(ValidationError::NoObservations);
    }
    let raw: Vec<f64> = cells.iter().map(|&(_, _, v)| v).collect();
    let (normalized, quantile) = normalize_with_quantile(&raw, cfg.norm_percentile)?;
    let n_codes = sim.size();
    let missing_cells = (n_codes * n_codes.saturating_sub(1) - cells.len()) as u64;

    let mut cell_value: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (&(i, j, _), &norm) in cells.iter().zip(normalized.iter()) {
        cell_value.insert((i, j), norm);
    }

    let code_index: std::collections::HashMap<&IscoCode, usize> = sim
        .codes()
        .iter()
        .enumerate()
        .map(|(i, c)| (c, i))
        .collect();
    let mut excluded_pairs = 0u64;
    let mut excluded_self = 0u64;
    let mut observations: Vec<Observation> = Vec::new();
    match cfg.mode {
        EvalMode::Transfers => {
            for (source, target, count) in trans.iter() {
                if source == target {
                    excluded_self += 1;
                    continue;
                }
                let cell = code_index
                    .get(source)
                    .zip(code_index.get(target))
                    .and_then(|(&i, &j)| cell_value.get(&(i, j)));
                match cell {
                    Some(&value) => {
                        if count > 0 {
                            observations.push(Observation {
                                value,
                                weight: count,
                                positive: count >= cfg.rare_threshold,
                            });
                        }
                    }
                    None => excluded_pairs += 1,
                }
            }
        }
        EvalMode::Pairs => {
            for (&(i, j), &value) in &cell_value {
                let count = trans.get(&sim.codes()[i], &sim.codes()[j]);
                observations.push(Observation {
                    value,
                    weight: 1,
                    positive: count >= cfg.rare_threshold,
                });
            }
            // bookkeeping for pairs the matrix cannot serve
            for (source, target, _) in trans.iter() {
                if source == target {
                    excluded_self += 1;
                    continue;
                }
                let present = code_index
                    .get(source)
                    .zip(code_index.get(target))
                    .map(|(&i, &j)| cell_value.contains_key(&(i, j)))
                    .unwrap_or(false);
                if !present {
                    excluded_pairs += 1;
                }
            }
        }
    }

    let rare: Vec<(f64, u64)> = observations
        .iter()
        .filter(|o| !o.positive)
        .map(|o| (o.value, o.weight))
        .collect();
    let common: Vec<(f64, u64)> = observations
        .iter()
        .filter(|o| o.positive)
        .map(|o| (o.value, o.weight))
        .collect();
    let rare_total: u64 = rare.iter().map(|&(_, w)| w).sum();
    let common_total: u64 = common.iter().map(|&(_, w)| w).sum();
    if rare_total == 0 {
        return Err(ValidationError::EmptyClass("rare"));
    }
    if common_total == 0 {
        return Err(ValidationError::EmptyClass("common"));
    }

    let selection = select_threshold_weighted(&rare, cfg.target_tnr)?;
    let tpr_weight: u64 = common
        .iter()
        .filter(|&&(v, _)| v >= selection.threshold)
        .map(|&(_, w)| w)
        .sum();

    let (roc, auc) = roc_sweep(&observations, rare_total, common_total);

    Ok(ValidationReport {
        measure: sim.measure().to_string(),
        mode: cfg.mode.to_string(),
        rare_threshold: cfg.rare_threshold,
        norm_percentile: cfg.norm_percentile,
        target_tnr: cfg.target_tnr,
        bins: cfg.bins,
        normalization_quantile: quantile,
        threshold: selection.threshold,
        tnr: selection.realized_tnr,
        tpr: tpr_weight as f64 / common_total as f64,
        auc,
        rare_observations: rare_total,
        common_observations: common_total,
        observation_count: rare_total + common_total,
        excluded_pairs,
        excluded_self_transitions: excluded_self,
        missing_cells,
        rare_histogram: Histogram::from_weighted(&rare, cfg.bins),
        common_histogram: Histogram::from_weighted(&common, cfg.bins),
        roc,
    })
}

/// Threshold sweep over the distinct observed values, descending. Both
/// rates count observations at or above the threshold; the curve runs from
/// (0,0) just above the maximum down to (1,1) at the minimum. The AUC
/// trapezoid is evaluated in integer arithmetic, so structurally exact
/// cases (identical class multisets, full separation) come out exact.
fn roc_sweep(
    observations: &[Observation],
    rare_total: u64,
    common_total: u64,
) -> (Vec<RocPoint>, f64) {
    let mut by_value: BTreeMap<u64, (u64, u64)> = BTreeMap::new();
    for o in observations {
        let entry = by_value.entry(o.value.to_bits()).or_insert((0, 0));
        if o.positive {
            entry.1 += o.weight;
        } else {
            entry.0 += o.weight;
        }
    }
    // normalized values are non-negative, so bit order equals value order
    let descending: Vec<(f64, u64, u64)> = by_value
        .into_iter()
        .rev()
        .map(|(bits, (neg, pos))| (f64::from_bits(bits), neg, pos))
        .collect();

    let mut points = Vec::with_capacity(descending.len() + 1);
    let max_value = descending.first().map(|&(v, _, _)| v).unwrap_or(0.0);
    points.push(RocPoint { fpr: 0.0, tpr: 0.0, threshold: max_value.next_up() });
    let mut neg_cum = 0u64;
    let mut pos_cum = 0u64;
    let mut auc_numerator: u128 = 0;
    let mut prev = (0u64, 0u64);
    for (value, neg, pos) in descending {
        neg_cum += neg;
        pos_cum += pos;
        auc_numerator +=
            (neg_cum - prev.0) as u128 * (pos_cum + prev.1) as u128;
        prev = (neg_cum, pos_cum);
        points.push(RocPoint {
            fpr: neg_cum as f64 / rare_total as f64,
            tpr: pos_cum as f64 / common_total as f64,
            threshold: value,
        });
    }
    let auc = auc_numerator as f64 / (2.0 * rare_total as f64 * common_total as f64);
    (points, auc)
}

/// Monotone link from normalized similarity to sampling weight:
/// `x^power + epsilon`.
#[derive(Debug, Clone, Copy)]
pub struct LinkSpec {
    pub power: f64,
    pub epsilon: f64,
}

impl Default for LinkSpec {
    fn default() -> Self {
        LinkSpec { power: 2.0, epsilon: 1e-3 }
    }
}

impl LinkSpec {
    pub fn apply(&self, x: f64) -> f64 {
        x.powf(self.power) + self.epsilon
    }
}

/// Sample `total` transitions over the ordered distinct-code pairs of the
/// matrix, with probability proportional to the link of the normalized
/// similarity. Deterministic for a fixed seed.
pub fn generate_transitions(
    sim: &IscoSimilarityMatrix,
    total: u64,
    seed: u64,
    link: &LinkSpec,
) -> Result<TransitionTable, ValidationError> {
    if total < 1 {
        return Err(ValidationError::InvalidConfig("total must be at least 1".into()));
    }
    if !(link.power > 0.0) || !(link.epsilon >= 0.0) {
        return Err(ValidationError::InvalidConfig(
            "link power must be positive and epsilon non-negative".into(),
        ));
    }
    let cells = sim.present_off_diagonal();
    if cells.is_empty() {
        return Err(ValidationError::NoObservations);
    }
    let raw: Vec<f64> = cells.iter().map(|&(_, _, v)| v).collect();
    let normalized = normalize_values(&raw, DEFAULT_NORM_PERCENTILE)?;
    let mut cumulative = Vec::with_capacity(cells.len());
    let mut running = 0.0f64;
    for &v in &normalized {
        running += link.apply(v);
        cumulative.push(running);
    }
    if !(running > 0.0) {
        return Err(ValidationError::DegenerateDistribution);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = TransitionTable::default();
    for _ in 0..total {
        let u: f64 = rng.gen::<f64>() * running;
        let idx = cumulative.partition_point(|&c| c <= u).min(cells.len() - 1);
        let (i, j, _) = cells[idx];
        table.add(sim.codes()[i].clone(), sim.codes()[j].clone(), 1);
    }
    Ok(table)
}

/// A synthetic ISCO matrix with uniform random off-diagonal values, handy
/// as a stand-in when no taxonomy is around. Codes are 1000, 1001, ...
pub fn random_isco_matrix(codes: usize, seed: u64) -> IscoSimilarityMatrix {
    assert!(codes >= 1 && codes <= 9000, "code count must fit 4-digit codes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let code_list: Vec<IscoCode> = (0..codes)
        .map(|i| IscoCode::new(&format!("{}", 1000 + i)).expect("generated codes are 4 digits"))
        .collect();
    let mut values = vec![None; codes * codes];
    for i in 0..codes {
        for j in 0..codes {
            if i != j {
                values[i * codes + j] = Some(rng.gen::<f64>());
            }
        }
    }
    IscoSimilarityMatrix::new("synthetic".into(), code_list, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(s: &str) -> IscoCode {
        IscoCode::new(s).unwrap()
    }

    #[test]
    fn normalize_matches_quantile_examples() {
        let values: Vec<f64> = (0..=100).map(|v| v as f64).collect();
        let normalized = normalize_values(&values, 98.0).unwrap();
        assert_eq!(normalized[49], 49.0 / 98.0);
        assert_eq!(normalized[99], 1.0);
        assert_eq!(normalized[98], 1.0);
        assert_eq!(normalized[97], 97.0 / 98.0);
    }

    #[test]
    fn normalize_degenerate_inputs() {
        // constant positive values map to 1
        let normalized = normalize_values(&[3.5, 3.5, 3.5], 98.0).unwrap();
        assert_eq!(normalized, vec![1.0, 1.0, 1.0]);
        // all zeros stay zero
        let normalized = normalize_values(&[0.0, 0.0], 98.0).unwrap();
        assert_eq!(normalized, vec![0.0, 0.0]);
        assert!(matches!(
            normalize_values(&[], 98.0),
            Err(ValidationError::EmptyValues)
        ));
        assert!(matches!(
            normalize_values(&[1.0], 0.0),
            Err(ValidationError::InvalidPercentile(_))
        ));
        assert!(matches!(
            normalize_values(&[-1.0], 98.0),
            Err(ValidationError::InvalidValue(_))
        ));
    }

    #[test]
    fn threshold_selection_examples() {
        let mut rare = vec![0.1; 20];
        rare.extend(vec![0.9; 10]);
        let sel = select_threshold(&rare, 0.65).unwrap();
        assert_eq!(sel.threshold, 0.9);
        assert!((sel.realized_tnr - 20.0 / 30.0).abs() < 1e-12);

        let values: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let sel = select_threshold(&values, 0.5).unwrap();
        assert_eq!(sel.threshold, 51.0);
        assert!((sel.realized_tnr - 0.5).abs() < 1e-12);
    }

    #[test]
    fn threshold_on_identical_values_goes_above() {
        let sel = select_threshold(&[0.5; 8], 0.65).unwrap();
        assert!(sel.threshold > 0.5);
        assert_eq!(sel.realized_tnr, 1.0);
        assert!(matches!(
            select_threshold(&[], 0.65),
            Err(ValidationError::EmptyRareClass)
        ));
    }

    fn two_code_matrix() -> IscoSimilarityMatrix {
        IscoSimilarityMatrix::new(
            "test".into(),
            vec![code("1000"), code("2000")],
            vec![None, Some(1.0), Some(0.0), None],
        )
    }

    #[test]
    fn generator_is_deterministic_and_degenerate_cases_hold() {
        let sim = two_code_matrix();
        // epsilon 0: all mass on the (1000, 2000) pair with value 1
        let link = LinkSpec { power: 2.0, epsilon: 0.0 };
        let table = generate_transitions(&sim, 1000, 7, &link).unwrap();
        assert_eq!(table.get(&code("1000"), &code("2000")), 1000);
        assert_eq!(table.get(&code("2000"), &code("1000")), 0);

        let again = generate_transitions(&sim, 1000, 7, &link).unwrap();
        assert_eq!(
            table.iter().collect::<Vec<_>>(),
            again.iter().collect::<Vec<_>>()
        );

        // all-zero similarity with epsilon 0 has no distribution
        let zeros = IscoSimilarityMatrix::new(
            "test".into(),
            vec![code("1000"), code("2000")],
            vec![None, Some(0.0), Some(0.0), None],
        );
        assert!(matches!(
            generate_transitions(&zeros, 10, 1, &link),
            Err(ValidationError::DegenerateDistribution)
        ));
    }

    #[test]
    fn generator_uniform_similarity_is_uniform() {
        // chi-square goodness of fit at 10k samples over 6 ordered pairs
        let n = 3;
        let codes: Vec<IscoCode> = vec![code("1000"), code("1001"), code("1002")];
        let mut values = vec![None; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    values[i * n + j] = Some(0.5);
                }
            }
        }
        let sim = IscoSimilarityMatrix::new("uniform".into(), codes, values);
        let table = generate_transitions(&sim, 10_000, 3, &LinkSpec::default()).unwrap();
        let expected = 10_000.0 / 6.0;
        let mut chi2 = 0.0;
        for (_, _, count) in table.iter() {
            let d = count as f64 - expected;
            chi2 += d * d / expected;
        }
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let dist = ChiSquared::new(5.0).unwrap();
        let p = 1.0 - dist.cdf(chi2);
        assert!(p > 0.001, "chi2 = {chi2}, p = {p}");
    }

    fn eval_fixture(
        rare: &[(f64, u64)],
        common: &[(f64, u64)],
        cfg: &ValidationConfig,
    ) -> ValidationReport {
        // build a matrix/table pair realizing the requested classes: one
        // code pair per observation
        let total = rare.len() + common.len();
        let n = total + 1;
        let codes: Vec<IscoCode> = (0..n)
            .map(|i| code(&format!("{}", 1000 + i)))
            .collect();
        let mut values = vec![None; n * n];
        let mut table = TransitionTable::default();
        for (k, &(v, w)) in rare.iter().chain(common.iter()).enumerate() {
            let (i, j) = (k + 1, 0);
            values[i * n + j] = Some(v);
            let count = if k < rare.len() {
                w.min(cfg.rare_threshold - 1)
            } else {
                w.max(cfg.rare_threshold)
            };
            table.add(codes[i].clone(), codes[j].clone(), count);
        }
        let sim = IscoSimilarityMatrix::new("fixture".into(), codes, values);
        evaluate(&sim, &table, cfg).unwrap()
    }

    #[test]
    fn identical_distributions_give_half_auc() {
        let cfg = ValidationConfig { norm_percentile: 99.0, ..Default::default() };
        // same multiset in both classes; weights chosen to keep class labels
        let rare: Vec<(f64, u64)> = vec![(10.0, 1), (20.0, 1), (30.0, 1)];
        let common: Vec<(f64, u64)> = vec![(10.0, 1), (20.0, 1), (30.0, 1)];
        let report = eval_fixture(&rare, &common, &cfg);
        assert_eq!(report.auc, 0.5);
    }

    #[test]
    fn separated_distributions_give_full_auc() {
        let cfg = ValidationConfig::default();
        let rare: Vec<(f64, u64)> = vec![(1.0, 1), (2.0, 1)];
        let common: Vec<(f64, u64)> = vec![(50.0, 1), (60.0, 1)];
        let report = eval_fixture(&rare, &common, &cfg);
        assert_eq!(report.auc, 1.0);
        assert!(report.roc.first().map(|p| p.fpr == 0.0 && p.tpr == 0.0).unwrap());
        assert!(report.roc.last().map(|p| p.fpr == 1.0 && p.tpr == 1.0).unwrap());
    }

    #[test]
    fn transfers_mode_weights_by_count_and_pairs_mode_counts_pairs() {
        let n = 3;
        let codes: Vec<IscoCode> = vec![code("1000"), code("1001"), code("1002")];
        let mut values = vec![None; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    values[i * n + j] = Some((i * n + j) as f64);
                }
            }
        }
        let sim = IscoSimilarityMatrix::new("t".into(), codes.clone(), values);
        let mut table = TransitionTable::default();
        table.add(codes[0].clone(), codes[1].clone(), 100); // common
        table.add(codes[1].clone(), codes[0].clone(), 3); // rare
        table.add(codes[0].clone(), codes[0].clone(), 9); // self, excluded
        table.add(code("9999"), codes[0].clone(), 4); // unknown code

        let cfg = ValidationConfig::default();
        let report = evaluate(&sim, &table, &cfg).unwrap();
        assert_eq!(report.common_observations, 100);
        assert_eq!(report.rare_observations, 3);
        assert_eq!(report.excluded_self_transitions, 1);
        assert_eq!(report.excluded_pairs, 1);

        let cfg = ValidationConfig { mode: EvalMode::Pairs, ..Default::default() };
        let report = evaluate(&sim, &table, &cfg).unwrap();
        // 6 ordered distinct pairs, one of them common
        assert_eq!(report.observation_count, 6);
        assert_eq!(report.common_observations, 1);
        assert_eq!(report.rare_observations, 5);
        assert_eq!(report.missing_cells, 0);
    }

    #[test]
    fn empty_class_is_an_error_not_half() {
        let sim = two_code_matrix();
        let mut table = TransitionTable::default();
        table.add(code("1000"), code("2000"), 100);
        table.add(code("2000"), code("1000"), 50);
        // everything common
        let err = evaluate(&sim, &table, &ValidationConfig::default()).unwrap_err();
        assert!(matches!(err, ValidationError::EmptyClass("rare")));
    }

    #[test]
    fn histogram_mass_accounts_for_every_observation() {
        let cfg = ValidationConfig::default();
        let rare: Vec<(f64, u64)> = vec![(5.0, 3), (15.0, 2)];
        let common: Vec<(f64, u64)> = vec![(80.0, 30), (90.0, 25)];
        let report = eval_fixture(&rare, &common, &cfg);
        assert_eq!(
            report.observation_count,
            report.rare_observations + report.common_observations
        );
        let width = 1.0 / cfg.bins as f64;
        let mass = |h: &Histogram| -> f64 { h.bins.iter().map(|b| b.density * width).sum() };
        assert!((mass(&report.rare_histogram) - 1.0).abs() < 1e-9);
        assert!((mass(&report.common_histogram) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn random_isco_matrix_shape() {
        let sim = random_isco_matrix(5, 3);
        assert_eq!(sim.size(), 5);
        assert_eq!(sim.present_off_diagonal().len(), 20);
        for i in 0..5 {
            assert_eq!(sim.get(i, i), None);
        }
        // deterministic
        let again = random_isco_matrix(5, 3);
        assert_eq!(sim.present_off_diagonal(), again.present_off_diagonal());
    }
}
