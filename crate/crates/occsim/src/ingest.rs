//! CSV ingestion for the canonical file schemas.
//!
//! All files are UTF-8, comma-separated, with a mandatory header row:
//!
//! * `occupations.csv` — `occupation_id,label,isco_code?` (the third column
//!   is optional; 4 digits when present)
//! * `skills.csv` — `skill_id,label,skill_type` with skill_type one of
//!   core, knowledge, attitude, language
//! * `relations.csv` — `occupation_id,skill_id,relation` with relation
//!   essential or optional
//! * `blocks.csv` — `skill_id,block_id`
//! * `transitions.csv` — `source_isco,target_isco,count`
//! * `rankings.csv` — `source_id,rank,target_id`
//!
//! Exact duplicate rows in the taxonomy files are deduplicated. A pair
//! related as both essential and optional collapses to essential, the
//! stricter claim. Skills missing from `blocks.csv` land in a synthetic
//! `unassigned-<type>` block so the partition always covers the skill set.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::graph::{
    Block, IscoCode, Occupation, Skill, SkillType, Taxonomy, TaxonomyError,
};
use crate::validation::TransitionTable;

/// Paths of the four canonical taxonomy CSVs.
#[derive(Debug, Clone)]
pub struct TaxonomyFiles {
    pub occupations_path: PathBuf,
    pub skills_path: PathBuf,
    pub relations_path: PathBuf,
    pub blocks_path: PathBuf,
}

impl TaxonomyFiles {
    /// The canonical file names inside one directory.
    pub fn in_dir(dir: &Path) -> Self {
        TaxonomyFiles {
            occupations_path: dir.join("occupations.csv"),
            skills_path: dir.join("skills.csv"),
            relations_path: dir.join("relations.csv"),
            blocks_path: dir.join("blocks.csv"),
        }
    }

    pub fn paths(&self) -> [&Path; 4] {
        [
            &self.occupations_path,
            &self.skills_path,
            &self.relations_path,
            &self.blocks_path,
        ]
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}:{line}: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },
    #[error("{path}:{line}: reference to unknown id `{id}`")]
    DanglingReference {
        path: PathBuf,
        line: u64,
        id: String,
    },
    #[error("{path}:{line}: conflicting duplicate rows for id `{id}`")]
    DuplicateConflict {
        path: PathBuf,
        line: u64,
        id: String,
    },
    #[error("skill `{skill}` is assigned to multiple blocks (`{first}` and `{second}`)")]
    SkillInMultipleBlocks {
        skill: String,
        first: String,
        second: String,
    },
    #[error("block `{block}` mixes skill types ({first} and {second})")]
    BlockMixesTypes {
        block: String,
        first: SkillType,
        second: SkillType,
    },
    #[error("occupation set is empty")]
    EmptyOccupations,
    #[error("source `{source_id}`: duplicate rank {rank}")]
    DuplicateRank { source_id: String, rank: u32 },
    #[error("source `{source_id}`: rank gap (expected {expected}, found {found})")]
    RankGap {
        source_id: String,
        expected: u32,
        found: u32,
    },
    #[error("source `{source_id}`: duplicate target `{target}` in ranking")]
    DuplicateTarget { source_id: String, target: String },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

/// Counts of non-fatal observations made while loading a taxonomy.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadWarnings {
    /// Occupations with no relation rows at all.
    pub isolated_occupations: usize,
    /// Exact duplicate relation rows dropped.
    pub duplicate_relations: usize,
    /// Pairs related as both essential and optional, collapsed to essential.
    pub essential_overrides: usize,
    /// Skills missing from blocks.csv, assigned to a synthetic block.
    pub unassigned_block_skills: usize,
}

/// A loaded taxonomy together with the loader's warnings.
#[derive(Debug, Clone)]
pub struct TaxonomyLoad {
    pub taxonomy: Taxonomy,
    pub warnings: LoadWarnings,
}

pub(crate) struct CsvTable {
    pub headers: Vec<String>,
    /// (1-based line number, fields)
    pub rows: Vec<(u64, Vec<String>)>,
}

pub(crate) fn read_csv_table(path: &Path) -> Result<CsvTable, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|source| IngestError::Csv { path: path.to_path_buf(), source })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|source| IngestError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(CsvTable { headers, rows })
}

/// Check the header row: `required` columns in order, then optionally the
/// `optional` columns (all or a prefix).
pub(crate) fn expect_headers(
    path: &Path,
    table: &CsvTable,
    required: &[&str],
    optional: &[&str],
) -> Result<(), IngestError> {
    let ok = table.headers.len() >= required.len()
        && table.headers.len() <= required.len() + optional.len()
        && table.headers.iter().zip(required.iter()).all(|(h, r)| h == r)
        && table.headers[required.len()..]
            .iter()
            .zip(optional.iter())
            .all(|(h, o)| h == o);
    if ok {
        Ok(())
    } else {
        let mut expected: Vec<&str> = required.to_vec();
        expected.extend(optional.iter().map(|o| *o));
        Err(IngestError::Header {
            path: path.to_path_buf(),
            expected: expected.join(","),
            found: table.headers.join(","),
        })
    }
}

fn malformed(path: &Path, line: u64, reason: impl Into<String>) -> IngestError {
    IngestError::MalformedRow {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

fn check_width(path: &Path, line: u64, fields: &[String], want: usize) -> Result<(), IngestError> {
    if fields.len() == want {
        Ok(())
    } else {
        Err(malformed(
            path,
            line,
            format!("expected {want} fields, found {}", fields.len()),
        ))
    }
}

/// Parse the four taxonomy CSVs into a validated [`Taxonomy`].
pub fn load_taxonomy(files: &TaxonomyFiles) -> Result<TaxonomyLoad, IngestError> {
    let mut warnings = LoadWarnings::default();

    // occupations
    let path = &files.occupations_path;
    let table = read_csv_table(path)?;
    expect_headers(path, &table, &["occupation_id", "label"], &["isco_code"])?;
    let has_isco = table.headers.len() == 3;
    let mut occupations: Vec<Occupation> = Vec::new();
    let mut occupation_ids: HashMap<String, usize> = HashMap::new();
    for (line, fields) in &table.rows {
        check_width(path, *line, fields, table.headers.len())?;
        let isco_code = if has_isco && !fields[2].is_empty() {
            Some(
                IscoCode::new(&fields[2])
                    .map_err(|e| malformed(path, *line, e.to_string()))?,
            )
        } else {
            None
        };
        let occ = Occupation {
            id: fields[0].clone(),
            label: fields[1].clone(),
            isco_code,
        };
        match occupation_ids.get(&occ.id) {
            None => {
                occupation_ids.insert(occ.id.clone(), occupations.len());
                occupations.push(occ);
            }
            Some(&idx) => {
                let prev = &occupations[idx];
                if prev.label != occ.label || prev.isco_code != occ.isco_code {
                    return Err(IngestError::DuplicateConflict {
                        path: path.clone(),
                        line: *line,
                        id: occ.id,
                    });
                }
            }
        }
    }
    if occupations.is_empty() {
        return Err(IngestError::EmptyOccupations);
    }

    // skills (block assignment filled in below)
    let path = &files.skills_path;
    let table = read_csv_table(path)?;
    expect_headers(path, &table, &["skill_id", "label", "skill_type"], &[])?;
    let mut raw_skills: Vec<(String, String, SkillType)> = Vec::new();
    let mut skill_ids: HashMap<String, usize> = HashMap::new();
    for (line, fields) in &table.rows {
        check_width(path, *line, fields, 3)?;
        let skill_type: SkillType = fields[2]
            .parse()
            .map_err(|e: crate::graph::ParseSkillTypeError| malformed(path, *line, e.to_string()))?;
        match skill_ids.get(&fields[0]) {
            None => {
                skill_ids.insert(fields[0].clone(), raw_skills.len());
                raw_skills.push((fields[0].clone(), fields[1].clone(), skill_type));
            }
            Some(&idx) => {
                let prev = &raw_skills[idx];
                if prev.1 != fields[1] || prev.2 != skill_type {
                    return Err(IngestError::DuplicateConflict {
                        path: path.clone(),
                        line: *line,
                        id: fields[0].clone(),
                    });
                }
            }
        }
    }

    // block assignments
    let path = &files.blocks_path;
    let table = read_csv_table(path)?;
    expect_headers(path, &table, &["skill_id", "block_id"], &[])?;
    let mut assignment: HashMap<usize, String> = HashMap::new();
    let mut block_order: Vec<String> = Vec::new();
    let mut block_types: HashMap<String, SkillType> = HashMap::new();
    for (line, fields) in &table.rows {
        check_width(path, *line, fields, 2)?;
        let skill_idx = *skill_ids.get(&fields[0]).ok_or_else(|| {
            IngestError::DanglingReference {
                path: path.clone(),
                line: *line,
                id: fields[0].clone(),
            }
        })?;
        match assignment.get(&skill_idx) {
            None => {
                assignment.insert(skill_idx, fields[1].clone());
            }
            Some(existing) if *existing == fields[1] => continue,
            Some(existing) => {
                return Err(IngestError::SkillInMultipleBlocks {
                    skill: fields[0].clone(),
                    first: existing.clone(),
                    second: fields[1].clone(),
                })
            }
        }
        let skill_type = raw_skills[skill_idx].2;
        match block_types.get(&fields[1]) {
            None => {
                block_types.insert(fields[1].clone(), skill_type);
                block_order.push(fields[1].clone());
            }
            Some(&existing) if existing == skill_type => {}
            Some(&existing) => {
                return Err(IngestError::BlockMixesTypes {
                    block: fields[1].clone(),
                    first: existing,
                    second: skill_type,
                })
            }
        }
    }
    // synthetic blocks for unassigned skills, one per skill type in use
    for (idx, (_, _, skill_type)) in raw_skills.iter().enumerate() {
        if !assignment.contains_key(&idx) {
            warnings.unassigned_block_skills += 1;
            let block_id = format!("unassigned-{skill_type}");
            if !block_types.contains_key(&block_id) {
                block_types.insert(block_id.clone(), *skill_type);
                block_order.push(block_id.clone());
            }
            assignment.insert(idx, block_id);
        }
    }
    let block_indices: HashMap<&String, u32> = block_order
        .iter()
        .enumerate()
        .map(|(i, id)| (id, i as u32))
        .collect();
    let blocks: Vec<Block> = block_order
        .iter()
        .map(|id| Block {
            id: id.clone(),
            skill_type: block_types[id],
        })
        .collect();
    let skills: Vec<Skill> = raw_skills
        .iter()
        .enumerate()
        .map(|(idx, (id, label, skill_type))| Skill {
            id: id.clone(),
            label: label.clone(),
            skill_type: *skill_type,
            block: block_indices[&assignment[&idx]],
        })
        .collect();

    // relations
    let path = &files.relations_path;
    let table = read_csv_table(path)?;
    expect_headers(path, &table, &["occupation_id", "skill_id", "relation"], &[])?;
    let mut relation_map: BTreeMap<(u32, u32), bool> = BTreeMap::new();
    for (line, fields) in &table.rows {
        check_width(path, *line, fields, 3)?;
        let occ = *occupation_ids.get(&fields[0]).ok_or_else(|| {
            IngestError::DanglingReference {
                path: path.clone(),
                line: *line,
                id: fields[0].clone(),
            }
        })? as u32;
        let skill = *skill_ids.get(&fields[1]).ok_or_else(|| {
            IngestError::DanglingReference {
                path: path.clone(),
                line: *line,
                id: fields[1].clone(),
            }
        })? as u32;
        let essential = match fields[2].as_str() {
            "essential" => true,
            "optional" => false,
            other => {
                return Err(malformed(
                    path,
                    *line,
                    format!("unknown relation `{other}` (expected essential or optional)"),
                ))
            }
        };
        match relation_map.get_mut(&(occ, skill)) {
            None => {
                relation_map.insert((occ, skill), essential);
            }
            Some(existing) => {
                if *existing == essential {
                    warnings.duplicate_relations += 1;
                } else {
                    // essential is the stricter claim and wins
                    warnings.essential_overrides += 1;
                    *existing = true;
                }
            }
        }
    }

    let edges_all: Vec<(u32, u32)> = relation_map.keys().copied().collect();
    let edges_ess: Vec<(u32, u32)> = relation_map
        .iter()
        .filter(|(_, &essential)| essential)
        .map(|(&pair, _)| pair)
        .collect();
    let mut degree = vec![0usize; occupations.len()];
    for &(occ, _) in &edges_all {
        degree[occ as usize] += 1;
    }
    warnings.isolated_occupations = degree.iter().filter(|&&d| d == 0).count();

    let taxonomy = Taxonomy::new(occupations, skills, blocks, edges_all, edges_ess)?;
    Ok(TaxonomyLoad { taxonomy, warnings })
}

/// Write a taxonomy back out as the four canonical CSVs.
///
/// Reloading the written files yields a structurally identical taxonomy;
/// synthetic block assignments become explicit rows.
pub fn write_taxonomy(taxonomy: &Taxonomy, dir: &Path) -> Result<(), IngestError> {
    let files = TaxonomyFiles::in_dir(dir);
    let open = |path: &Path| -> Result<csv::Writer<BufWriter<File>>, IngestError> {
        Ok(csv::Writer::from_writer(BufWriter::new(
            File::create(path).map_err(|source| IngestError::Io {
                path: path.to_path_buf(),
                source,
            })?,
        )))
    };
    let finish = |mut w: csv::Writer<BufWriter<File>>, path: &Path| -> Result<(), IngestError> {
        w.flush().map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })
    };
    let csv_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source: csv::Error| IngestError::Csv { path, source }
    };

    let path = &files.occupations_path;
    let mut w = open(path)?;
    w.write_record(["occupation_id", "label", "isco_code"])
        .map_err(csv_err(path))?;
    for occ in taxonomy.occupations() {
        let isco = occ.isco_code.as_ref().map(|c| c.as_str()).unwrap_or("");
        w.write_record([occ.id.as_str(), occ.label.as_str(), isco])
            .map_err(csv_err(path))?;
    }
    finish(w, path)?;

    let path = &files.skills_path;
    let mut w = open(path)?;
    w.write_record(["skill_id", "label", "skill_type"])
        .map_err(csv_err(path))?;
    for skill in taxonomy.skills() {
        w.write_record([skill.id.as_str(), skill.label.as_str(), skill.skill_type.as_str()])
            .map_err(csv_err(path))?;
    }
    finish(w, path)?;

    let path = &files.blocks_path;
    let mut w = open(path)?;
    w.write_record(["skill_id", "block_id"]).map_err(csv_err(path))?;
    for skill in taxonomy.skills() {
        let block = &taxonomy.blocks()[skill.block as usize];
        w.write_record([skill.id.as_str(), block.id.as_str()])
            .map_err(csv_err(path))?;
    }
    finish(w, path)?;

    let path = &files.relations_path;
    let mut w = open(path)?;
    w.write_record(["occupation_id", "skill_id", "relation"])
        .map_err(csv_err(path))?;
    for i in 0..taxonomy.occupation_count() {
        let ess = taxonomy.neighbor_sets(i, crate::graph::EdgeKind::Essential);
        for &s in taxonomy.neighbor_sets(i, crate::graph::EdgeKind::All) {
            let relation = if ess.binary_search(&s).is_ok() {
                "essential"
            } else {
                "optional"
            };
            w.write_record([
                taxonomy.occupations()[i].id.as_str(),
                taxonomy.skills()[s as usize].id.as_str(),
                relation,
            ])
            .map_err(csv_err(path))?;
        }
    }
    finish(w, path)?;
    Ok(())
}

/// Load a transition table. Rows with the same ordered pair are summed;
/// self-transitions are retained (query them via
/// [`TransitionTable::self_transition_pairs`]).
pub fn load_transitions(path: &Path) -> Result<TransitionTable, IngestError> {
    let table = read_csv_table(path)?;
    expect_headers(path, &table, &["source_isco", "target_isco", "count"], &[])?;
    let mut result = TransitionTable::default();
    for (line, fields) in &table.rows {
        check_width(path, *line, fields, 3)?;
        let source = IscoCode::new(&fields[0])
            .map_err(|e| malformed(path, *line, e.to_string()))?;
        let target = IscoCode::new(&fields[1])
            .map_err(|e| malformed(path, *line, e.to_string()))?;
        let raw = fields[2].trim();
        if raw.starts_with('-') {
            return Err(malformed(path, *line, format!("negative count `{raw}`")));
        }
        let count: u64 = raw
            .parse()
            .map_err(|_| malformed(path, *line, format!("non-numeric count `{raw}`")))?;
        result.add(source, target, count);
    }
    Ok(result)
}

/// Per-source ranked lists of occupation ids.
#[derive(Debug, Clone, Default)]
pub struct ExternalRankingSet {
    lists: BTreeMap<String, Vec<String>>,
}

/// Ids dropped by [`ExternalRankingSet::resolve_against`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResolutionReport {
    pub dropped_sources: usize,
    pub dropped_targets: usize,
}

impl ExternalRankingSet {
    pub fn from_lists(lists: BTreeMap<String, Vec<String>>) -> Self {
        ExternalRankingSet { lists }
    }

    pub fn lists(&self) -> &BTreeMap<String, Vec<String>> {
        &self.lists
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn get(&self, source: &str) -> Option<&[String]> {
        self.lists.get(source).map(|v| v.as_slice())
    }

    /// Drop sources and targets that do not resolve against the taxonomy,
    /// reporting how many were rejected.
    pub fn resolve_against(&self, taxonomy: &Taxonomy) -> (ExternalRankingSet, ResolutionReport) {
        let mut report = ResolutionReport::default();
        let mut lists = BTreeMap::new();
        for (source, targets) in &self.lists {
            if taxonomy.occupation_index(source).is_none() {
                report.dropped_sources += 1;
                continue;
            }
            let kept: Vec<String> = targets
                .iter()
                .filter(|t| {
                    let known = taxonomy.occupation_index(t).is_some();
                    if !known {
                        report.dropped_targets += 1;
                    }
                    known
                })
                .cloned()
                .collect();
            lists.insert(source.clone(), kept);
        }
        (ExternalRankingSet { lists }, report)
    }
}

/// Load per-source rankings; ranks must be dense 1..k per source.
pub fn load_external_rankings(path: &Path) -> Result<ExternalRankingSet, IngestError> {
    let table = read_csv_table(path)?;
    expect_headers(path, &table, &["source_id", "rank", "target_id"], &[])?;
    let mut raw: BTreeMap<String, Vec<(u32, String)>> = BTreeMap::new();
    for (line, fields) in &table.rows {
        check_width(path, *line, fields, 3)?;
        let rank: u32 = fields[1]
            .parse()
            .map_err(|_| malformed(path, *line, format!("invalid rank `{}`", fields[1])))?;
        if rank == 0 {
            return Err(malformed(path, *line, "rank must start at 1"));
        }
        raw.entry(fields[0].clone())
            .or_default()
            .push((rank, fields[2].clone()));
    }
    let mut lists = BTreeMap::new();
    for (source, mut entries) in raw {
        entries.sort_by_key(|(rank, _)| *rank);
        let mut targets = Vec::with_capacity(entries.len());
        for (expected, (rank, target)) in entries.into_iter().enumerate() {
            let expected = expected as u32 + 1;
            match rank.cmp(&expected) {
                std::cmp::Ordering::Less => {
                    return Err(IngestError::DuplicateRank { source_id: source, rank })
                }
                std::cmp::Ordering::Greater => {
                    return Err(IngestError::RankGap {
                        source_id: source,
                        expected,
                        found: rank,
                    })
                }
                std::cmp::Ordering::Equal => {
                    if targets.contains(&target) {
                        return Err(IngestError::DuplicateTarget { source_id: source, target });
                    }
                    targets.push(target);
                }
            }
        }
        lists.insert(source, targets);
    }
    Ok(ExternalRankingSet { lists })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::EdgeKind;
    use std::collections::BTreeSet;
    use std::fs;

    fn write(dir: &Path, name: &str, content: &str) -> PathBuf {
        let path = dir.join(name);
        fs::write(&path, content).unwrap();
        path
    }

    fn fixture_files(dir: &Path) -> TaxonomyFiles {
        write(
            dir,
            "occupations.csv",
            "occupation_id,label,isco_code\no1,plasterer,7123\no2,tiler,\no3,roofer,7121\n",
        );
        write(
            dir,
            "skills.csv",
            "skill_id,label,skill_type\ns1,mix plaster,core\ns2,apply plaster,core\ns3,read plans,knowledge\ns4,install tiles,knowledge\n",
        );
        write(
            dir,
            "relations.csv",
            "occupation_id,skill_id,relation\n\
             o1,s1,essential\no1,s2,essential\no1,s3,optional\n\
             o2,s2,essential\no2,s3,essential\n\
             o3,s3,optional\no3,s4,essential\n",
        );
        write(dir, "blocks.csv", "skill_id,block_id\ns1,P1\ns2,P1\ns3,P2\ns4,P2\n");
        TaxonomyFiles::in_dir(dir)
    }

    #[test]
    fn loads_fixture_taxonomy() {
        let dir = tempfile::tempdir().unwrap();
        let load = load_taxonomy(&fixture_files(dir.path())).unwrap();
        let t = &load.taxonomy;
        assert_eq!(t.occupation_count(), 3);
        assert_eq!(t.skill_count(), 4);
        assert_eq!(t.block_count(), 2);
        assert_eq!(t.edge_count(EdgeKind::All), 7);
        assert_eq!(t.edge_count(EdgeKind::Essential), 5);
        assert_eq!(load.warnings, LoadWarnings::default());
        assert_eq!(t.occupations()[0].isco_code.as_ref().unwrap().as_str(), "7123");
        assert!(t.occupations()[1].isco_code.is_none());
    }

    #[test]
    fn duplicated_rows_load_identically() {
        let dir_a = tempfile::tempdir().unwrap();
        let files_a = fixture_files(dir_a.path());
        let a = load_taxonomy(&files_a).unwrap().taxonomy;

        let dir_b = tempfile::tempdir().unwrap();
        for path in files_a.paths() {
            let content = fs::read_to_string(path).unwrap();
            let mut lines = content.lines();
            let header = lines.next().unwrap();
            let mut doubled = format!("{header}\n");
            for row in lines {
                doubled.push_str(row);
                doubled.push('\n');
                doubled.push_str(row);
                doubled.push('\n');
            }
            fs::write(dir_b.path().join(path.file_name().unwrap()), doubled).unwrap();
        }
        let b = load_taxonomy(&TaxonomyFiles::in_dir(dir_b.path()))
            .unwrap()
            .taxonomy;
        assert_taxonomy_eq(&a, &b);
    }

    #[test]
    fn round_trips_through_write_taxonomy() {
        let dir = tempfile::tempdir().unwrap();
        let a = load_taxonomy(&fixture_files(dir.path())).unwrap().taxonomy;
        let out = tempfile::tempdir().unwrap();
        write_taxonomy(&a, out.path()).unwrap();
        let b = load_taxonomy(&TaxonomyFiles::in_dir(out.path()))
            .unwrap()
            .taxonomy;
        assert_taxonomy_eq(&a, &b);
    }

    fn assert_taxonomy_eq(a: &Taxonomy, b: &Taxonomy) {
        assert_eq!(a.occupation_ids(), b.occupation_ids());
        let skill_ids = |t: &Taxonomy| -> Vec<String> {
            t.skills().iter().map(|s| s.id.clone()).collect()
        };
        assert_eq!(skill_ids(a), skill_ids(b));
        for kind in [EdgeKind::All, EdgeKind::Essential] {
            let ea: BTreeSet<_> = a.edge_pairs(kind).collect();
            let eb: BTreeSet<_> = b.edge_pairs(kind).collect();
            assert_eq!(ea, eb);
        }
        let block_of = |t: &Taxonomy| -> Vec<(String, String)> {
            t.skills()
                .iter()
                .map(|s| (s.id.clone(), t.blocks()[s.block as usize].id.clone()))
                .collect()
        };
        assert_eq!(block_of(a), block_of(b));
    }

    #[test]
    fn essential_beats_optional_on_conflict() {
        let dir = tempfile::tempdir().unwrap();
        let files = fixture_files(dir.path());
        write(
            dir.path(),
            "relations.csv",
            "occupation_id,skill_id,relation\no1,s1,optional\no1,s1,essential\no1,s1,optional\n",
        );
        let load = load_taxonomy(&files).unwrap();
        assert_eq!(load.taxonomy.edge_count(EdgeKind::Essential), 1);
        assert_eq!(load.taxonomy.edge_count(EdgeKind::All), 1);
        assert_eq!(load.warnings.essential_overrides, 2);
    }

    #[test]
    fn skill_in_two_blocks_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let files = fixture_files(dir.path());
        write(dir.path(), "blocks.csv", "skill_id,block_id\ns1,P1\ns1,P2\n");
        assert!(matches!(
            load_taxonomy(&files).unwrap_err(),
            IngestError::SkillInMultipleBlocks { .. }
        ));
    }

    #[test]
    fn unassigned_skills_get_synthetic_blocks() {
        let dir = tempfile::tempdir().unwrap();
        let files = fixture_files(dir.path());
        write(dir.path(), "blocks.csv", "skill_id,block_id\ns1,P1\ns2,P1\n");
        let load = load_taxonomy(&files).unwrap();
        assert_eq!(load.warnings.unassigned_block_skills, 2);
        let t = &load.taxonomy;
        let block_ids: Vec<&str> = t.blocks().iter().map(|b| b.id.as_str()).collect();
        assert_eq!(block_ids, vec!["P1", "unassigned-knowledge"]);
    }

    #[test]
    fn empty_relations_warn_isolated_for_every_occupation() {
        let dir = tempfile::tempdir().unwrap();
        let files = fixture_files(dir.path());
        write(dir.path(), "relations.csv", "occupation_id,skill_id,relation\n");
        let load = load_taxonomy(&files).unwrap();
        assert_eq!(load.warnings.isolated_occupations, 3);
        for i in 0..3 {
            assert_eq!(load.taxonomy.degree(i, EdgeKind::All), 0);
        }
    }

    #[test]
    fn reports_line_numbers_for_malformed_rows() {
        let dir = tempfile::tempdir().unwrap();
        let files = fixture_files(dir.path());
        write(
            dir.path(),
            "skills.csv",
            "skill_id,label,skill_type\ns1,x,core\ns2,y,unknown_type\n",
        );
        match load_taxonomy(&files).unwrap_err() {
            IngestError::MalformedRow { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn dangling_relation_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let files = fixture_files(dir.path());
        write(
            dir.path(),
            "relations.csv",
            "occupation_id,skill_id,relation\no9,s1,essential\n",
        );
        assert!(matches!(
            load_taxonomy(&files).unwrap_err(),
            IngestError::DanglingReference { .. }
        ));
    }

    #[test]
    fn empty_occupations_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let files = fixture_files(dir.path());
        write(dir.path(), "occupations.csv", "occupation_id,label,isco_code\n");
        assert!(matches!(
            load_taxonomy(&files).unwrap_err(),
            IngestError::EmptyOccupations
        ));
    }

    #[test]
    fn transitions_sum_duplicates_and_reject_bad_counts() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(
            dir.path(),
            "transitions.csv",
            "source_isco,target_isco,count\n2411,2412,5\n2411,2412,3\n2411,2411,2\n",
        );
        let table = load_transitions(&path).unwrap();
        assert_eq!(table.get(&IscoCode::new("2411").unwrap(), &IscoCode::new("2412").unwrap()), 8);
        assert_eq!(table.self_transition_pairs(), 1);
        assert_eq!(table.total(), 10);

        let bad = write(
            dir.path(),
            "bad.csv",
            "source_isco,target_isco,count\n2411,2412,-1\n",
        );
        let err = load_transitions(&bad).unwrap_err();
        assert!(err.to_string().contains("negative count"));

        let nonnum = write(
            dir.path(),
            "nonnum.csv",
            "source_isco,target_isco,count\n2411,2412,many\n",
        );
        assert!(load_transitions(&nonnum).is_err());

        let badcode = write(
            dir.path(),
            "badcode.csv",
            "source_isco,target_isco,count\n24,2412,1\n",
        );
        assert!(load_transitions(&badcode).is_err());
    }

    #[test]
    fn rankings_require_dense_ranks() {
        let dir = tempfile::tempdir().unwrap();
        let good = write(
            dir.path(),
            "r.csv",
            "source_id,rank,target_id\na,1,b\na,2,c\nz,1,a\n",
        );
        let set = load_external_rankings(&good).unwrap();
        assert_eq!(set.get("a").unwrap(), &["b".to_string(), "c".to_string()]);
        assert_eq!(set.len(), 2);

        let gap = write(dir.path(), "gap.csv", "source_id,rank,target_id\na,1,b\na,3,c\n");
        assert!(matches!(
            load_external_rankings(&gap).unwrap_err(),
            IngestError::RankGap { expected: 2, found: 3, .. }
        ));

        let dup = write(dir.path(), "dup.csv", "source_id,rank,target_id\na,1,b\na,1,c\n");
        assert!(matches!(
            load_external_rankings(&dup).unwrap_err(),
            IngestError::DuplicateRank { rank: 1, .. }
        ));

        let dup_target =
            write(dir.path(), "dt.csv", "source_id,rank,target_id\na,1,b\na,2,b\n");
        assert!(matches!(
            load_external_rankings(&dup_target).unwrap_err(),
            IngestError::DuplicateTarget { .. }
        ));
    }

    #[test]
    fn rankings_resolve_against_taxonomy() {
        let dir = tempfile::tempdir().unwrap();
        let t = load_taxonomy(&fixture_files(dir.path())).unwrap().taxonomy;
        let path = write(
            dir.path(),
            "rank.csv",
            "source_id,rank,target_id\no1,1,o2\no1,2,ghost\nghost,1,o1\n",
        );
        let set = load_external_rankings(&path).unwrap();
        let (resolved, report) = set.resolve_against(&t);
        assert_eq!(report.dropped_sources, 1);
        assert_eq!(report.dropped_targets, 1);
        assert_eq!(resolved.get("o1").unwrap(), &["o2".to_string()]);
    }
}
