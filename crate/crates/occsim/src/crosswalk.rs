//! Occupation-to-ISCO mapping and max-aggregation of similarity matrices
//! onto the coarser ISCO code space.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{IscoCode, Taxonomy};
use crate::ingest::{expect_headers, read_csv_table, IngestError};
use crate::projections::{MatrixIoError, SimilarityMatrix};

/// A total function from occupation ids to 4-digit ISCO codes. Multiple
/// occupations may share a code; every listed code has at least one
/// occupation.
#[derive(Debug, Clone)]
pub struct Crosswalk {
    map: HashMap<String, IscoCode>,
    codes: Vec<IscoCode>,
}

#[derive(Debug, Error)]
pub enum CrosswalkError {
    #[error("occupation `{occupation}` is mapped to both {first} and {second}")]
    DuplicateMapping {
        occupation: String,
        first: IscoCode,
        second: IscoCode,
    },
    #[error("no occupation pair contributed to any ISCO cell (crosswalk disjoint from matrix ids)")]
    NoContributingPairs,
}

impl Crosswalk {
    /// Build from `(occupation_id, code)` pairs. Exact duplicates are
    /// accepted; two different codes for one occupation are an error.
    pub fn new(pairs: Vec<(String, IscoCode)>) -> Result<Self, CrosswalkError> {
        let mut map = HashMap::with_capacity(pairs.len());
        for (occupation, code) in pairs {
            match map.get(&occupation) {
                None => {
                    map.insert(occupation, code);
                }
                Some(existing) if *existing == code => {}
                Some(existing) => {
                    return Err(CrosswalkError::DuplicateMapping {
                        first: existing.clone(),
                        second: code,
                        occupation,
                    })
                }
            }
        }
        let mut codes: Vec<IscoCode> = map.values().cloned().collect();
        codes.sort();
        codes.dedup();
        Ok(Crosswalk { map, codes })
    }

    /// Distinct codes, sorted ascending.
    pub fn codes(&self) -> &[IscoCode] {
        &self.codes
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn map_occupation(&self, id: &str) -> Option<&IscoCode> {
        self.map.get(id)
    }
}

/// A loaded crosswalk plus what the loader had to set aside.
#[derive(Debug, Clone)]
pub struct CrosswalkLoad {
    pub crosswalk: Crosswalk,
    /// Taxonomy occupations absent from the crosswalk file; they are
    /// excluded from aggregation.
    pub unmapped_occupations: Vec<String>,
    /// File rows referencing occupations outside the taxonomy.
    pub unknown_rows: usize,
}

/// Read `occupation_id,isco_code` rows and validate them against a taxonomy.
pub fn load_crosswalk(path: &Path, taxonomy: &Taxonomy) -> Result<CrosswalkLoad, IngestError> {
    let table = read_csv_table(path)?;
    expect_headers(path, &table, &["occupation_id", "isco_code"], &[])?;
    let mut pairs = Vec::new();
    let mut unknown_rows = 0usize;
    for (line, fields) in &table.rows {
        if fields.len() != 2 {
            return Err(IngestError::MalformedRow {
                path: path.to_path_buf(),
                line: *line,
                reason: format!("expected 2 fields, found {}", fields.len()),
            });
        }
        let code = IscoCode::new(&fields[1]).map_err(|e| IngestError::MalformedRow {
            path: path.to_path_buf(),
            line: *line,
            reason: e.to_string(),
        })?;
        if taxonomy.occupation_index(&fields[0]).is_none() {
            unknown_rows += 1;
            continue;
        }
        pairs.push((fields[0].clone(), code));
    }
    let crosswalk = Crosswalk::new(pairs).map_err(|e| IngestError::MalformedRow {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    })?;
    let unmapped_occupations = taxonomy
        .occupations()
        .iter()
        .filter(|o| !crosswalk.map.contains_key(&o.id))
        .map(|o| o.id.clone())
        .collect();
    Ok(CrosswalkLoad {
        crosswalk,
        unmapped_occupations,
        unknown_rows,
    })
}

/// Dense ISCO-by-ISCO similarity values; cells with no contributing
/// occupation pair are absent rather than zero.
#[derive(Debug, Clone)]
pub struct IscoSimilarityMatrix {
    measure: String,
    codes: Vec<IscoCode>,
    values: Vec<Option<f64>>,
}

impl IscoSimilarityMatrix {
    pub fn new(measure: String, codes: Vec<IscoCode>, values: Vec<Option<f64>>) -> Self {
        assert_eq!(values.len(), codes.len() * codes.len());
        IscoSimilarityMatrix { measure, codes, values }
    }

    pub fn measure(&self) -> &str {
        &self.measure
    }

    pub fn codes(&self) -> &[IscoCode] {
        &self.codes
    }

    pub fn size(&self) -> usize {
        self.codes.len()
    }

    pub fn code_index(&self, code: &IscoCode) -> Option<usize> {
        self.codes.iter().position(|c| c == code)
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i * self.codes.len() + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let n = self.codes.len();
        self.values[i * n + j] = Some(value);
    }

    /// Present off-diagonal cells as `(source_index, target_index, value)`.
    pub fn present_off_diagonal(&self) -> Vec<(usize, usize, f64)> {
        let n = self.codes.len();
        let mut cells = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                if let Some(v) = self.values[i * n + j] {
                    cells.push((i, j, v));
                }
            }
        }
        cells
    }

    /// Write `source_id,target_id,value` rows with codes as ids. Unlike the
    /// occupation-level export, diagonal cells are kept when present: a
    /// within-code cell aggregates distinct occupations and carries data.
    pub fn write_csv(&self, path: &Path) -> Result<(), MatrixIoError> {
        let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
        writer.write_record(["source_id", "target_id", "value"])?;
        let n = self.codes.len();
        for i in 0..n {
            for j in 0..n {
                if let Some(v) = self.values[i * n + j] {
                    writer.write_record([
                        self.codes[i].as_str(),
                        self.codes[j].as_str(),
                        &format!("{v}"),
                    ])?;
                }
            }
        }
        writer.flush()?;
        Ok(())
    }

    /// Read a matrix written by [`write_csv`](Self::write_csv). Codes are
    /// kept in first-appearance order; unlisted cells stay absent.
    pub fn read_csv(path: &Path, measure: &str) -> Result<Self, MatrixIoError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| MatrixIoError::Format(e.to_string()))?;
        let mut codes: Vec<IscoCode> = Vec::new();
        let mut index: HashMap<IscoCode, usize> = HashMap::new();
        let mut cells: Vec<(usize, usize, f64)> = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| MatrixIoError::Format(e.to_string()))?;
            if record.len() != 3 {
                return Err(MatrixIoError::Format(format!(
                    "expected 3 fields, found {}",
                    record.len()
                )));
            }
            let mut code_at = |field: &str| -> Result<usize, MatrixIoError> {
                let code =
                    IscoCode::new(field).map_err(|e| MatrixIoError::Format(e.to_string()))?;
                Ok(*index.entry(code.clone()).or_insert_with(|| {
                    codes.push(code);
                    codes.len() - 1
                }))
            };
            let i = code_at(&record[0])?;
            let j = code_at(&record[1])?;
            let v: f64 = record[2]
                .parse()
                .map_err(|_| MatrixIoError::Format(format!("invalid value `{}`", &record[2])))?;
            if !v.is_finite() || v < 0.0 {
                return Err(MatrixIoError::Format(format!("invalid value {v}")));
            }
            cells.push((i, j, v));
        }
        let n = codes.len();
        let mut values = vec![None; n * n];
        for (i, j, v) in cells {
            if values[i * n + j].is_some() {
                return Err(MatrixIoError::Format(format!(
                    "duplicate cell ({}, {})",
                    codes[i], codes[j]
                )));
            }
            values[i * n + j] = Some(v);
        }
        Ok(IscoSimilarityMatrix {
            measure: measure.to_string(),
            codes,
            values,
        })
    }
}

/// Aggregate an occupation-level matrix onto ISCO codes: each cell takes
/// the maximum over all mapped occupation pairs, with same-occupation pairs
/// excluded so self-similarity never leaks into within-code cells.
pub fn aggregate_to_isco(
    sim: &SimilarityMatrix,
    crosswalk: &Crosswalk,
) -> Result<IscoSimilarityMatrix, CrosswalkError> {
    let codes = crosswalk.codes().to_vec();
    let code_index: HashMap<&IscoCode, usize> =
        codes.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); codes.len()];
    for (i, id) in sim.ids().iter().enumerate() {
        if let Some(code) = crosswalk.map_occupation(id) {
            groups[code_index[code]].push(i);
        }
    }

    let n = codes.len();
    let rows: Vec<Vec<Option<f64>>> = (0..n)
        .into_par_iter()
        .map(|cm| {
            let mut row = vec![None; n];
            for &i in &groups[cm] {
                let sim_row = sim.row(i);
                for (cn, group) in groups.iter().enumerate() {
                    for &j in group {
                        if i == j {
                            continue;
                        }
                        let v = sim_row[j];
                        row[cn] = Some(match row[cn] {
                            None => v,
                            Some(current) => f64::max(current, v),
                        });
                    }
                }
            }
            row
        })
        .collect();

    let mut values = Vec::with_capacity(n * n);
    let mut any = false;
    for row in rows {
        any |= row.iter().any(Option::is_some);
        values.extend(row);
    }
    if !any {
        return Err(CrosswalkError::NoContributingPairs);
    }
    Ok(IscoSimilarityMatrix {
        measure: sim.measure().name().to_string(),
        codes,
        values,
    })
}
