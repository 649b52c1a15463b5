//! Bipartite-graph projections onto the occupation set.
//!
//! Ten measures are available: the Jaccard overlap family, the
//! collaboration (inverse skill prevalence) family, the generalised Jaccard
//! family on block weights, and the collaborative-filtering family on block
//! weights. Each family has a symmetric-input form that reads a single edge
//! relation and a multigraph form that reads all edges for the source
//! occupation but only essential edges for the target.
//!
//! [`project`] computes full similarity matrices row by row in parallel;
//! the per-pair functions are the readable reference surface and the unit
//! of the oracle tests.

use std::fmt;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{BlockWeightedGraph, EdgeKind, Taxonomy};

/// Identifier of one projection measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MeasureId {
    /// Set Jaccard over all edges.
    JaccSym,
    /// Jaccard with union denominator, all edges for the source and
    /// essential edges for the target.
    JaccMultiSym,
    /// Overlap divided by the target's neighbor count, all edges.
    JaccAsym,
    /// Overlap of source all-edges with target essential edges, divided by
    /// the target's essential count.
    Jacc,
    /// Shared skills weighted inversely to their prevalence, all edges.
    CollSym,
    /// Collaboration weighting with essential-edge prevalence for targets.
    Coll,
    /// Min/max ratio of block-weight rows, all edges.
    GjaccSym,
    /// Min/max ratio of source all-weights against target essential weights.
    Gjacc,
    /// Doubly normalized block-weight projection; rows sum to one.
    ColfSym,
    /// Collaborative filtering with essential weights on the target side.
    Colf,
}

impl MeasureId {
    pub const ALL: [MeasureId; 10] = [
        MeasureId::JaccSym,
        MeasureId::JaccMultiSym,
        MeasureId::JaccAsym,
        MeasureId::Jacc,
        MeasureId::CollSym,
        MeasureId::Coll,
        MeasureId::GjaccSym,
        MeasureId::Gjacc,
        MeasureId::ColfSym,
        MeasureId::Colf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MeasureId::JaccSym => "jacc_sym",
            MeasureId::JaccMultiSym => "jacc_multi_sym",
            MeasureId::JaccAsym => "jacc_asym",
            MeasureId::Jacc => "jacc",
            MeasureId::CollSym => "coll_sym",
            MeasureId::Coll => "coll",
            MeasureId::GjaccSym => "gjacc_sym",
            MeasureId::Gjacc => "gjacc",
            MeasureId::ColfSym => "colf_sym",
            MeasureId::Colf => "colf",
        }
    }

    /// Whether the resulting matrix equals its transpose.
    pub fn is_symmetric(self) -> bool {
        matches!(self, MeasureId::JaccSym | MeasureId::CollSym | MeasureId::GjaccSym)
    }

    /// Whether the measure reads block weights rather than raw edges.
    pub fn uses_blocks(self) -> bool {
        matches!(
            self,
            MeasureId::GjaccSym | MeasureId::Gjacc | MeasureId::ColfSym | MeasureId::Colf
        )
    }

    /// Whether values are bounded by 1 (the Jaccard families).
    pub fn is_unit_bounded(self) -> bool {
        matches!(
            self,
            MeasureId::JaccSym
                | MeasureId::JaccMultiSym
                | MeasureId::JaccAsym
                | MeasureId::Jacc
                | MeasureId::GjaccSym
                | MeasureId::Gjacc
        )
    }
}

impl fmt::Display for MeasureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("unknown measure `{0}`")]
pub struct ParseMeasureError(pub String);

impl FromStr for MeasureId {
    type Err = ParseMeasureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MeasureId::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| ParseMeasureError(s.to_string()))
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn intersection_count(a: &[u32], b: &[u32]) -> usize {
    let mut count = 0;
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                x += 1;
                y += 1;
            }
        }
    }
    count
}

/// Set Jaccard of the all-edge neighbor sets. Empty union yields 0.
pub fn jaccard_symmetric(t: &Taxonomy, i: usize, j: usize) -> f64 {
    let a = t.neighbor_sets(i, EdgeKind::All);
    let b = t.neighbor_sets(j, EdgeKind::All);
    let inter = intersection_count(a, b) as f64;
    ratio(inter, a.len() as f64 + b.len() as f64 - inter)
}

/// Union-denominator Jaccard mixing the source's all edges with the
/// target's essential edges. Empty union yields 0.
pub fn jaccard_multi_symmetric(t: &Taxonomy, i: usize, j: usize) -> f64 {
    let a = t.neighbor_sets(i, EdgeKind::All);
    let b = t.neighbor_sets(j, EdgeKind::Essential);
    let inter = intersection_count(a, b) as f64;
    ratio(inter, a.len() as f64 + b.len() as f64 - inter)
}

/// Overlap of all-edge neighbor sets divided by the target's count.
pub fn jaccard_asym(t: &Taxonomy, i: usize, j: usize) -> f64 {
    let a = t.neighbor_sets(i, EdgeKind::All);
    let b = t.neighbor_sets(j, EdgeKind::All);
    ratio(intersection_count(a, b) as f64, b.len() as f64)
}

/// Overlap of the source's all edges with the target's essential edges,
/// divided by the target's essential count. Empty essential set yields 0.
pub fn jaccard_final(t: &Taxonomy, i: usize, j: usize) -> f64 {
    let a = t.neighbor_sets(i, EdgeKind::All);
    let b = t.neighbor_sets(j, EdgeKind::Essential);
    ratio(intersection_count(a, b) as f64, b.len() as f64)
}

/// Sum over shared skills of the inverse number of *other* occupations
/// holding the skill.
///
/// For distinct occupations a shared skill always has degree at least 2; on
/// the diagonal an exclusive skill would divide by zero, so the denominator
/// is clamped to at least 1, giving such a skill the maximum weight.
pub fn collaboration_symmetric(t: &Taxonomy, i: usize, j: usize) -> f64 {
    let a = t.neighbor_sets(i, EdgeKind::All);
    let b = t.neighbor_sets(j, EdgeKind::All);
    shared_skill_sum(a, b, |k| t.skill_degree(k, EdgeKind::All))
}

/// Collaboration weighting of skills shared between the source's all edges
/// and the target's essential edges, with essential-edge prevalence.
///
/// A skill essential only for the target but reachable optionally from the
/// source would divide by zero; the denominator clamp assigns it weight 1.
pub fn collaboration(t: &Taxonomy, i: usize, j: usize) -> f64 {
    let a = t.neighbor_sets(i, EdgeKind::All);
    let b = t.neighbor_sets(j, EdgeKind::Essential);
    shared_skill_sum(a, b, |k| t.skill_degree(k, EdgeKind::Essential))
}

fn shared_skill_sum(a: &[u32], b: &[u32], degree: impl Fn(usize) -> usize) -> f64 {
    let mut sum = 0.0;
    let (mut x, mut y) = (0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                sum += 1.0 / f64::max(degree(a[x] as usize) as f64 - 1.0, 1.0);
                x += 1;
                y += 1;
            }
        }
    }
    sum
}

/// Min-sum over max-sum of two all-weight rows. 0/0 yields 0.
pub fn gjaccard_symmetric(w: &BlockWeightedGraph, i: usize, j: usize) -> f64 {
    min_max_ratio(w.row_all(i), w.row_all(j))
}

/// Min-sum over max-sum of the source all-weight row against the target
/// essential-weight row. 0/0 yields 0.
pub fn gjaccard(w: &BlockWeightedGraph, i: usize, j: usize) -> f64 {
    min_max_ratio(w.row_all(i), w.row_ess(j))
}

fn min_max_ratio(row_i: &[u32], row_j: &[u32]) -> f64 {
    let mut min_sum = 0u64;
    let mut max_sum = 0u64;
    for (&a, &b) in row_i.iter().zip(row_j) {
        min_sum += a.min(b) as u64;
        max_sum += a.max(b) as u64;
    }
    ratio(min_sum as f64, max_sum as f64)
}

/// Doubly normalized projection on all-edge block weights: the source row is
/// scaled by its weighted order and every block term by the block's total
/// adjacency weight. A source with zero weighted order yields 0.
pub fn colf_symmetric(w: &BlockWeightedGraph, i: usize, j: usize) -> f64 {
    colf_pair(w, i, j, EdgeKind::All)
}

/// Collaborative filtering with essential weights for the target row and
/// essential-based weighted orders. Zero essential order for the source
/// yields 0.
pub fn colf(w: &BlockWeightedGraph, i: usize, j: usize) -> f64 {
    colf_pair(w, i, j, EdgeKind::Essential)
}

fn colf_pair(w: &BlockWeightedGraph, i: usize, j: usize, order_kind: EdgeKind) -> f64 {
    let order_row = |o: usize| match order_kind {
        EdgeKind::All => w.row_all(o),
        EdgeKind::Essential => w.row_ess(o),
    };
    let order_i: u64 = order_row(i).iter().map(|&v| v as u64).sum();
    if order_i == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for k in 0..w.block_count() {
        let mut block_order = 0u64;
        for l in 0..w.occupation_count() {
            block_order += order_row(l)[k] as u64;
        }
        if block_order == 0 {
            continue;
        }
        sum += w.row_all(i)[k] as f64 * order_row(j)[k] as f64 / block_order as f64;
    }
    sum / order_i as f64
}

/// Dense occupation-by-occupation similarity values for one measure.
///
/// Diagonal entries are computed and stored but never enter rankings, and
/// the CSV export omits them.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    measure: MeasureId,
    ids: Vec<String>,
    values: Vec<f64>,
    degenerate_rows: Vec<u32>,
}

#[derive(Debug, Error)]
pub enum MatrixIoError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("matrix file is malformed: {0}")]
    Format(String),
}

#[derive(Debug, Error)]
pub enum RankError {
    #[error("unknown source occupation `{0}`")]
    UnknownSource(String),
}

impl SimilarityMatrix {
    fn new(
        measure: MeasureId,
        ids: Vec<String>,
        values: Vec<f64>,
        degenerate_rows: Vec<u32>,
    ) -> Self {
        debug_assert_eq!(values.len(), ids.len() * ids.len());
        SimilarityMatrix { measure, ids, values, degenerate_rows }
    }

    /// Build a matrix from raw row-major values, validating shape and the
    /// finite, non-negative value invariant.
    pub fn from_values(
        measure: MeasureId,
        ids: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self, MatrixIoError> {
        if values.len() != ids.len() * ids.len() {
            return Err(MatrixIoError::Format(format!(
                "{} ids need {} values, got {}",
                ids.len(),
                ids.len() * ids.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(MatrixIoError::Format(format!("invalid value {v}")));
        }
        Ok(SimilarityMatrix::new(measure, ids, values, Vec::new()))
    }

    pub fn measure(&self) -> MeasureId {
        self.measure
    }

    pub fn size(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ids.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.ids.len()..(i + 1) * self.ids.len()]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Rows whose weighted order was zero (collaborative-filtering measures
    /// only); their values are all zero.
    pub fn degenerate_rows(&self) -> &[u32] {
        &self.degenerate_rows
    }

    /// Write `source_id,target_id,value` rows, diagonal omitted.
    pub fn write_csv(&self, path: &Path) -> Result<(), MatrixIoError> {
        let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        writer.write_record(["source_id", "target_id", "value"])?;
        let m = self.ids.len();
        let mut buf = String::new();
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                buf.clear();
                fmt::Write::write_fmt(&mut buf, format_args!("{}", self.get(i, j)))
                    .expect("formatting into a String cannot fail");
                writer.write_record([&self.ids[i], &self.ids[j], &buf])?;
            }
        }
        writer.flush()?;
        Ok(())
    }

    /// Binary cache: magic, version, measure name, id manifest, then
    /// row-major little-endian f64 values.
    pub fn write_binary(&self, path: &Path) -> Result<(), MatrixIoError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(b"OSIM")?;
        w.write_all(&1u32.to_le_bytes())?;
        let name = self.measure.name().as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(self.ids.len() as u32).to_le_bytes())?;
        for id in &self.ids {
            w.write_all(&(id.len() as u32).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self, MatrixIoError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"OSIM" {
            return Err(MatrixIoError::Format("bad magic".into()));
        }
        if read_u32(&mut r)? != 1 {
            return Err(MatrixIoError::Format("unsupported version".into()));
        }
        let name = read_string(&mut r)?;
        let measure = MeasureId::from_str(&name)
            .map_err(|e| MatrixIoError::Format(e.to_string()))?;
        let m = read_u32(&mut r)? as usize;
        let mut ids = Vec::with_capacity(m);
        for _ in 0..m {
            ids.push(read_string(&mut r)?);
        }
        let mut values = vec![0f64; m * m];
        let mut buf = [0u8; 8];
        for v in values.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
            if !v.is_finite() || *v < 0.0 {
                return Err(MatrixIoError::Format(format!("invalid value {v}")));
            }
        }
        Ok(SimilarityMatrix::new(measure, ids, values, Vec::new()))
    }
}

fn read_u32(r: &mut impl Read) -> io::Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_string(r: &mut impl Read) -> Result<String, MatrixIoError> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(MatrixIoError::Format("string length out of bounds".into()));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| MatrixIoError::Format("invalid utf-8".into()))
}

/// Compute the full similarity matrix for one measure.
///
/// Rows are computed independently and in parallel; the result is
/// deterministic regardless of the worker count. `w` must come from
/// [`crate::graph::aggregate_blocks`] on the same taxonomy.
pub fn project(t: &Taxonomy, w: &BlockWeightedGraph, measure: MeasureId) -> SimilarityMatrix {
    assert_eq!(
        t.occupation_count(),
        w.occupation_count(),
        "block weights do not match the taxonomy"
    );
    let m = t.occupation_count();
    let mut values = vec![0f64; m * m];
    let mut degenerate_rows = Vec::new();
    match measure {
        MeasureId::JaccSym => {
            let deg: Vec<u32> = (0..m).map(|i| t.degree(i, EdgeKind::All) as u32).collect();
            fill_count_rows(&mut values, t, EdgeKind::All, |i, j, c| {
                ratio(c as f64, deg[i] as f64 + deg[j] as f64 - c as f64)
            });
        }
        MeasureId::JaccMultiSym => {
            let deg_all: Vec<u32> = (0..m).map(|i| t.degree(i, EdgeKind::All) as u32).collect();
            let deg_ess: Vec<u32> =
                (0..m).map(|i| t.degree(i, EdgeKind::Essential) as u32).collect();
            fill_count_rows(&mut values, t, EdgeKind::Essential, |i, j, c| {
                ratio(c as f64, deg_all[i] as f64 + deg_ess[j] as f64 - c as f64)
            });
        }
        MeasureId::JaccAsym => {
            let deg: Vec<u32> = (0..m).map(|i| t.degree(i, EdgeKind::All) as u32).collect();
            fill_count_rows(&mut values, t, EdgeKind::All, |_, j, c| {
                ratio(c as f64, deg[j] as f64)
            });
        }
        MeasureId::Jacc => {
            let deg_ess: Vec<u32> =
                (0..m).map(|i| t.degree(i, EdgeKind::Essential) as u32).collect();
            fill_count_rows(&mut values, t, EdgeKind::Essential, |_, j, c| {
                ratio(c as f64, deg_ess[j] as f64)
            });
        }
        MeasureId::CollSym => fill_collaboration_rows(&mut values, t, EdgeKind::All),
        MeasureId::Coll => fill_collaboration_rows(&mut values, t, EdgeKind::Essential),
        MeasureId::GjaccSym => fill_gjaccard_rows(&mut values, w, EdgeKind::All),
        MeasureId::Gjacc => fill_gjaccard_rows(&mut values, w, EdgeKind::Essential),
        MeasureId::ColfSym => {
            degenerate_rows = fill_colf_rows(&mut values, w, EdgeKind::All);
        }
        MeasureId::Colf => {
            degenerate_rows = fill_colf_rows(&mut values, w, EdgeKind::Essential);
        }
    }
    SimilarityMatrix::new(measure, t.occupation_ids(), values, degenerate_rows)
}

/// Shared-neighbor counting: for every row `i`, count skills reachable from
/// `i` over all edges that reach `j` over `target_kind` edges, then map the
/// count through `finish(i, j, count)`. Untouched cells keep value 0.
fn fill_count_rows(
    values: &mut [f64],
    t: &Taxonomy,
    target_kind: EdgeKind,
    finish: impl Fn(usize, usize, u32) -> f64 + Sync,
) {
    let m = t.occupation_count();
    values
        .par_chunks_mut(m)
        .enumerate()
        .for_each_init(
            || (vec![0u32; m], Vec::<u32>::new()),
            |(counts, touched), (i, row)| {
                for &k in t.neighbor_sets(i, EdgeKind::All) {
                    for &j in t.skill_neighbors(k as usize, target_kind) {
                        if counts[j as usize] == 0 {
                            touched.push(j);
                        }
                        counts[j as usize] += 1;
                    }
                }
                for &j in touched.iter() {
                    row[j as usize] = finish(i, j as usize, counts[j as usize]);
                    counts[j as usize] = 0;
                }
                touched.clear();
            },
        );
}

fn fill_collaboration_rows(values: &mut [f64], t: &Taxonomy, target_kind: EdgeKind) {
    let m = t.occupation_count();
    let contribution: Vec<f64> = (0..t.skill_count())
        .map(|k| {
            let d = t.skill_degree(k, target_kind);
            if d == 0 {
                0.0
            } else {
                1.0 / f64::max(d as f64 - 1.0, 1.0)
            }
        })
        .collect();
    values.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        for &k in t.neighbor_sets(i, EdgeKind::All) {
            let c = contribution[k as usize];
            for &j in t.skill_neighbors(k as usize, target_kind) {
                row[j as usize] += c;
            }
        }
    });
}

fn fill_gjaccard_rows(values: &mut [f64], w: &BlockWeightedGraph, target_kind: EdgeKind) {
    let m = w.occupation_count();
    let sparse = |row: &[u32]| -> Vec<(u32, u32)> {
        row.iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .map(|(k, &v)| (k as u32, v))
            .collect()
    };
    let src: Vec<Vec<(u32, u32)>> = (0..m).map(|i| sparse(w.row_all(i))).collect();
    let tgt: Vec<Vec<(u32, u32)>> = (0..m)
        .map(|j| match target_kind {
            EdgeKind::All => sparse(w.row_all(j)),
            EdgeKind::Essential => sparse(w.row_ess(j)),
        })
        .collect();
    let sum = |rows: &[Vec<(u32, u32)>]| -> Vec<u64> {
        rows.iter()
            .map(|r| r.iter().map(|&(_, v)| v as u64).sum())
            .collect()
    };
    let src_sum = sum(&src);
    let tgt_sum = sum(&tgt);
    values.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        for (j, out) in row.iter_mut().enumerate() {
            let mut min_sum = 0u64;
            let (a, b) = (&src[i], &tgt[j]);
            let (mut x, mut y) = (0, 0);
            while x < a.len() && y < b.len() {
                match a[x].0.cmp(&b[y].0) {
                    std::cmp::Ordering::Less => x += 1,
                    std::cmp::Ordering::Greater => y += 1,
                    std::cmp::Ordering::Equal => {
                        min_sum += a[x].1.min(b[y].1) as u64;
                        x += 1;
                        y += 1;
                    }
                }
            }
            *out = ratio(
                min_sum as f64,
                (src_sum[i] + tgt_sum[j] - min_sum) as f64,
            );
        }
    });
}

/// Collaborative-filtering rows. Returns the indices of rows whose weighted
/// order is zero (left all-zero).
fn fill_colf_rows(values: &mut [f64], w: &BlockWeightedGraph, order_kind: EdgeKind) -> Vec<u32> {
    let m = w.occupation_count();
    let b = w.block_count();
    let order_row = |o: usize| match order_kind {
        EdgeKind::All => w.row_all(o),
        EdgeKind::Essential => w.row_ess(o),
    };
    let occupation_order: Vec<u64> = (0..m)
        .map(|i| order_row(i).iter().map(|&v| v as u64).sum())
        .collect();
    let mut block_order = vec![0u64; b];
    for l in 0..m {
        for (k, &v) in order_row(l).iter().enumerate() {
            block_order[k] += v as u64;
        }
    }
    // target rows normalized by block order, laid out block-major so row
    // computation is a sparse sequence of axpy passes
    let mut normalized = vec![0f64; b * m];
    for j in 0..m {
        for (k, &v) in order_row(j).iter().enumerate() {
            if v > 0 {
                normalized[k * m + j] = v as f64 / block_order[k] as f64;
            }
        }
    }
    let degenerate: Vec<u32> = (0..m as u32)
        .filter(|&i| occupation_order[i as usize] == 0)
        .collect();
    values.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        if occupation_order[i] == 0 {
            return;
        }
        for (k, &v) in w.row_all(i).iter().enumerate() {
            if v == 0 || block_order[k] == 0 {
                continue;
            }
            let weight = v as f64;
            let col = &normalized[k * m..(k + 1) * m];
            for (out, nv) in row.iter_mut().zip(col) {
                *out += weight * nv;
            }
        }
        let scale = 1.0 / occupation_order[i] as f64;
        for out in row.iter_mut() {
            *out *= scale;
        }
    });
    degenerate
}

/// Top-`k` target occupations for `source_id` by descending similarity,
/// diagonal excluded, ties broken by ascending occupation id. `k` larger
/// than the number of candidates is clamped.
pub fn rank_from_matrix(
    sim: &SimilarityMatrix,
    source_id: &str,
    k: usize,
) -> Result<Vec<String>, RankError> {
    let source = sim
        .index_of(source_id)
        .ok_or_else(|| RankError::UnknownSource(source_id.to_string()))?;
    let row = sim.row(source);
    let mut candidates: Vec<usize> = (0..sim.size()).filter(|&j| j != source).collect();
    candidates.sort_by(|&a, &b| {
        row[b]
            .total_cmp(&row[a])
            .then_with(|| sim.ids()[a].cmp(&sim.ids()[b]))
    });
    candidates.truncate(k.min(sim.size().saturating_sub(1)));
    Ok(candidates.into_iter().map(|j| sim.ids()[j].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{self, small_taxonomy, FixtureSpec};
    use crate::graph::aggregate_blocks;

    const EPS: f64 = 1e-12;

    #[test]
    fn worked_fixture_pair_values() {
        let t = small_taxonomy();
        let w = aggregate_blocks(&t);

        assert!((jaccard_symmetric(&t, 0, 1) - 2.0 / 3.0).abs() < EPS);
        assert!((jaccard_multi_symmetric(&t, 0, 1) - 2.0 / 3.0).abs() < EPS);
        assert!((jaccard_asym(&t, 0, 1) - 1.0).abs() < EPS);
        assert!((jaccard_asym(&t, 1, 0) - 2.0 / 3.0).abs() < EPS);
        assert!((jaccard_final(&t, 0, 1) - 1.0).abs() < EPS);
        assert!((jaccard_final(&t, 1, 0) - 0.5).abs() < EPS);
        assert!((collaboration_symmetric(&t, 0, 1) - 1.5).abs() < EPS);
        assert!((collaboration(&t, 0, 1) - 2.0).abs() < EPS);
        assert!((gjaccard_symmetric(&w, 0, 1) - 2.0 / 3.0).abs() < EPS);
        assert!((gjaccard(&w, 0, 1) - 2.0 / 3.0).abs() < EPS);
        assert!((colf_symmetric(&w, 0, 1) - 11.0 / 36.0).abs() < EPS);
    }

    #[test]
    fn identity_and_zero_cases() {
        let t = small_taxonomy();
        assert!((jaccard_symmetric(&t, 0, 0) - 1.0).abs() < EPS);
        // o3 and o1 share only s3
        assert!((jaccard_symmetric(&t, 0, 2) - 0.25).abs() < EPS);
        // empty neighbor sets
        let empty = fixtures::random_taxonomy(&FixtureSpec {
            occupations: 2,
            skills: 3,
            blocks: 1,
            edge_probability: 0.0,
            essential_probability: 0.0,
            seed: 0,
        });
        assert_eq!(jaccard_symmetric(&empty, 0, 1), 0.0);
        assert_eq!(jaccard_asym(&empty, 0, 1), 0.0);
        assert_eq!(jaccard_final(&empty, 0, 1), 0.0);
        assert_eq!(collaboration_symmetric(&empty, 0, 1), 0.0);
        let we = aggregate_blocks(&empty);
        assert_eq!(gjaccard_symmetric(&we, 0, 1), 0.0);
        assert_eq!(colf_symmetric(&we, 0, 1), 0.0);
    }

    #[test]
    fn colf_row_sums_to_one() {
        let t = small_taxonomy();
        let w = aggregate_blocks(&t);
        let sum: f64 = (0..3).map(|j| colf_symmetric(&w, 0, j)).sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!((colf_symmetric(&w, 0, 0) - 19.0 / 36.0).abs() < EPS);
        assert!((colf_symmetric(&w, 0, 2) - 6.0 / 36.0).abs() < EPS);
    }

    #[test]
    fn equal_relations_reduce_multigraph_measures() {
        let t = fixtures::random_taxonomy(&FixtureSpec {
            occupations: 6,
            skills: 10,
            blocks: 3,
            edge_probability: 0.5,
            essential_probability: 1.0,
            seed: 3,
        });
        let w = aggregate_blocks(&t);
        for i in 0..6 {
            for j in 0..6 {
                assert!(
                    (jaccard_multi_symmetric(&t, i, j) - jaccard_symmetric(&t, i, j)).abs() < EPS
                );
                assert!((jaccard_final(&t, i, j) - jaccard_asym(&t, i, j)).abs() < EPS);
                assert!((gjaccard(&w, i, j) - gjaccard_symmetric(&w, i, j)).abs() < EPS);
                assert!((colf(&w, i, j) - colf_symmetric(&w, i, j)).abs() < EPS);
            }
        }
    }

    #[test]
    fn project_matches_pair_functions_on_fixture() {
        let t = small_taxonomy();
        let w = aggregate_blocks(&t);
        let checks: [(MeasureId, fn(&Taxonomy, &BlockWeightedGraph, usize, usize) -> f64); 10] = [
            (MeasureId::JaccSym, |t, _, i, j| jaccard_symmetric(t, i, j)),
            (MeasureId::JaccMultiSym, |t, _, i, j| jaccard_multi_symmetric(t, i, j)),
            (MeasureId::JaccAsym, |t, _, i, j| jaccard_asym(t, i, j)),
            (MeasureId::Jacc, |t, _, i, j| jaccard_final(t, i, j)),
            (MeasureId::CollSym, |t, _, i, j| collaboration_symmetric(t, i, j)),
            (MeasureId::Coll, |t, _, i, j| collaboration(t, i, j)),
            (MeasureId::GjaccSym, |_, w, i, j| gjaccard_symmetric(w, i, j)),
            (MeasureId::Gjacc, |_, w, i, j| gjaccard(w, i, j)),
            (MeasureId::ColfSym, |_, w, i, j| colf_symmetric(w, i, j)),
            (MeasureId::Colf, |_, w, i, j| colf(w, i, j)),
        ];
        for (measure, pair_fn) in checks {
            let sim = project(&t, &w, measure);
            for i in 0..3 {
                for j in 0..3 {
                    assert!(
                        (sim.get(i, j) - pair_fn(&t, &w, i, j)).abs() < EPS,
                        "{measure} mismatch at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn symmetric_measures_equal_their_transpose_exactly() {
        let t = fixtures::random_taxonomy(&FixtureSpec {
            occupations: 9,
            skills: 18,
            blocks: 4,
            edge_probability: 0.35,
            essential_probability: 0.6,
            seed: 11,
        });
        let w = aggregate_blocks(&t);
        for measure in MeasureId::ALL.into_iter().filter(|m| m.is_symmetric()) {
            let sim = project(&t, &w, measure);
            for i in 0..9 {
                for j in 0..9 {
                    assert_eq!(sim.get(i, j), sim.get(j, i), "{measure} at ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn single_occupation_matrix() {
        let t = fixtures::random_taxonomy(&FixtureSpec {
            occupations: 1,
            skills: 4,
            blocks: 2,
            edge_probability: 0.8,
            essential_probability: 0.5,
            seed: 5,
        });
        let w = aggregate_blocks(&t);
        let sim = project(&t, &w, MeasureId::Jacc);
        assert_eq!(sim.size(), 1);
        assert_eq!(rank_from_matrix(&sim, "o0", 5).unwrap(), Vec::<String>::new());
    }

    #[test]
    fn rank_orders_and_breaks_ties_by_id() {
        let ids = vec!["a".to_string(), "b".to_string(), "c".to_string(), "d".to_string()];
        #[rustfmt::skip]
        let values = vec![
            0.0, 0.9, 0.1, 0.9,
            0.9, 0.0, 0.5, 0.5,
            0.1, 0.5, 0.0, 0.2,
            0.9, 0.5, 0.2, 0.0,
        ];
        let sim = SimilarityMatrix::new(MeasureId::JaccSym, ids, values, Vec::new());
        assert_eq!(rank_from_matrix(&sim, "a", 2).unwrap(), vec!["b", "d"]);
        // b's row ties c and d at 0.5: lexicographically smaller id first
        assert_eq!(rank_from_matrix(&sim, "b", 3).unwrap(), vec!["a", "c", "d"]);
        // k clamps to m - 1
        assert_eq!(rank_from_matrix(&sim, "a", 99).unwrap().len(), 3);
        assert!(matches!(
            rank_from_matrix(&sim, "nope", 1),
            Err(RankError::UnknownSource(_))
        ));
    }

    #[test]
    fn matrix_binary_round_trip() {
        let t = small_taxonomy();
        let w = aggregate_blocks(&t);
        let sim = project(&t, &w, MeasureId::Colf);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        sim.write_binary(&path).unwrap();
        let back = SimilarityMatrix::read_binary(&path).unwrap();
        assert_eq!(back.measure(), MeasureId::Colf);
        assert_eq!(back.ids(), sim.ids());
        assert_eq!(back.values(), sim.values());
    }

    #[test]
    fn matrix_csv_omits_diagonal() {
        let t = small_taxonomy();
        let w = aggregate_blocks(&t);
        let sim = project(&t, &w, MeasureId::JaccSym);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        sim.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "source_id,target_id,value");
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| {
            let mut parts = r.split(',');
            parts.next().unwrap() != parts.next().unwrap()
        }));
    }
}
