//! Bipartite occupation-skill graph representations.
//!
//! A [`Taxonomy`] carries both edge relations of the occupation-skill
//! multigraph: *all* edges (a skill is essential or optional for an
//! occupation) and *essential* edges only. Skills are partitioned into
//! blocks of related skills; [`aggregate_blocks`] collapses the skill side
//! of the graph onto that partition, producing per-occupation, per-block
//! edge counts ([`BlockWeightedGraph`]).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// The four skill categories a taxonomy distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SkillType {
    Core,
    Knowledge,
    Attitude,
    Language,
}

impl SkillType {
    pub const ALL: [SkillType; 4] = [
        SkillType::Core,
        SkillType::Knowledge,
        SkillType::Attitude,
        SkillType::Language,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SkillType::Core => "core",
            SkillType::Knowledge => "knowledge",
            SkillType::Attitude => "attitude",
            SkillType::Language => "language",
        }
    }
}

impl fmt::Display for SkillType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("unknown skill type `{0}` (expected core, knowledge, attitude or language)")]
pub struct ParseSkillTypeError(pub String);

impl FromStr for SkillType {
    type Err = ParseSkillTypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "core" => Ok(SkillType::Core),
            "knowledge" => Ok(SkillType::Knowledge),
            "attitude" => Ok(SkillType::Attitude),
            "language" => Ok(SkillType::Language),
            other => Err(ParseSkillTypeError(other.to_string())),
        }
    }
}

/// A 4-digit ISCO occupation code.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IscoCode(String);

#[derive(Debug, Error)]
#[error("invalid ISCO code `{0}` (expected exactly 4 digits)")]
pub struct ParseIscoError(pub String);

impl IscoCode {
    pub fn new(code: &str) -> Result<Self, ParseIscoError> {
        if code.len() == 4 && code.bytes().all(|b| b.is_ascii_digit()) {
            Ok(IscoCode(code.to_string()))
        } else {
            Err(ParseIscoError(code.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for IscoCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for IscoCode {
    type Err = ParseIscoError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        IscoCode::new(s)
    }
}

/// One occupation node.
#[derive(Debug, Clone)]
pub struct Occupation {
    pub id: String,
    pub label: String,
    pub isco_code: Option<IscoCode>,
}

/// One skill node, already assigned to its block.
#[derive(Debug, Clone)]
pub struct Skill {
    pub id: String,
    pub label: String,
    pub skill_type: SkillType,
    /// Index into [`Taxonomy::blocks`].
    pub block: u32,
}

/// One cell of the skill partition.
#[derive(Debug, Clone)]
pub struct Block {
    pub id: String,
    pub skill_type: SkillType,
}

/// Which edge relation of the multigraph to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    /// Essential and optional edges.
    All,
    /// Essential edges only.
    Essential,
}

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("duplicate occupation id `{0}`")]
    DuplicateOccupationId(String),
    #[error("duplicate skill id `{0}`")]
    DuplicateSkillId(String),
    #[error("duplicate block id `{0}`")]
    DuplicateBlockId(String),
    #[error("skill `{skill}` references block index {block} but only {blocks} blocks exist")]
    BlockOutOfRange { skill: String, block: u32, blocks: usize },
    #[error("skill `{skill}` has type {skill_type} but its block `{block}` holds {block_type} skills")]
    BlockTypeMismatch {
        skill: String,
        skill_type: SkillType,
        block: String,
        block_type: SkillType,
    },
    #[error("edge ({occupation}, {skill}) is out of range")]
    EdgeOutOfRange { occupation: u32, skill: u32 },
    #[error("essential edge ({occupation}, {skill}) is missing from the all-edge relation")]
    EssentialNotInAll { occupation: u32, skill: u32 },
}

/// Compressed adjacency: `row(i)` is the sorted, duplicate-free list of
/// opposite-side indices adjacent to node `i`.
#[derive(Debug, Clone, Default)]
struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Adjacency {
    /// `pairs` must be sorted by `(row, target)` and duplicate-free.
    fn from_sorted_pairs(rows: usize, pairs: &[(u32, u32)]) -> Self {
        let mut offsets = Vec::with_capacity(rows + 1);
        let mut targets = Vec::with_capacity(pairs.len());
        let mut cursor = 0usize;
        offsets.push(0);
        for row in 0..rows as u32 {
            while cursor < pairs.len() && pairs[cursor].0 == row {
                targets.push(pairs[cursor].1);
                cursor += 1;
            }
            offsets.push(targets.len());
        }
        Adjacency { offsets, targets }
    }

    fn row(&self, i: usize) -> &[u32] {
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }

    fn edge_count(&self) -> usize {
        self.targets.len()
    }
}

/// The occupation-skill multigraph together with the skill partition.
///
/// Immutable after construction; all accessors are read-only and safe to
/// share across parallel workers.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    occupations: Vec<Occupation>,
    skills: Vec<Skill>,
    blocks: Vec<Block>,
    adj_all: Adjacency,
    adj_ess: Adjacency,
    inv_all: Adjacency,
    inv_ess: Adjacency,
    occupation_ids: HashMap<String, usize>,
    skill_ids: HashMap<String, usize>,
}

impl Taxonomy {
    /// Build a taxonomy from node lists and `(occupation, skill)` edge pairs.
    ///
    /// Edge lists are deduplicated; both must index into the node lists and
    /// the essential relation must be a subset of the all relation. Every
    /// skill must point at an existing block of its own type.
    pub fn new(
        occupations: Vec<Occupation>,
        skills: Vec<Skill>,
        blocks: Vec<Block>,
        edges_all: Vec<(u32, u32)>,
        edges_ess: Vec<(u32, u32)>,
    ) -> Result<Self, TaxonomyError> {
        let mut occupation_ids = HashMap::with_capacity(occupations.len());
        for (i, occ) in occupations.iter().enumerate() {
            if occupation_ids.insert(occ.id.clone(), i).is_some() {
                return Err(TaxonomyError::DuplicateOccupationId(occ.id.clone()));
            }
        }
        let mut skill_ids = HashMap::with_capacity(skills.len());
        for (i, skill) in skills.iter().enumerate() {
            if skill_ids.insert(skill.id.clone(), i).is_some() {
                return Err(TaxonomyError::DuplicateSkillId(skill.id.clone()));
            }
        }
        let mut block_ids = HashMap::with_capacity(blocks.len());
        for (i, block) in blocks.iter().enumerate() {
            if block_ids.insert(block.id.clone(), i).is_some() {
                return Err(TaxonomyError::DuplicateBlockId(block.id.clone()));
            }
        }
        for skill in &skills {
            let block = blocks.get(skill.block as usize).ok_or_else(|| {
                TaxonomyError::BlockOutOfRange {
                    skill: skill.id.clone(),
                    block: skill.block,
                    blocks: blocks.len(),
                }
            })?;
            if block.skill_type != skill.skill_type {
                return Err(TaxonomyError::BlockTypeMismatch {
                    skill: skill.id.clone(),
                    skill_type: skill.skill_type,
                    block: block.id.clone(),
                    block_type: block.skill_type,
                });
            }
        }

        let m = occupations.len() as u32;
        let n = skills.len() as u32;
        let mut all = edges_all;
        let mut ess = edges_ess;
        for &(o, s) in all.iter().chain(ess.iter()) {
            if o >= m || s >= n {
                return Err(TaxonomyError::EdgeOutOfRange { occupation: o, skill: s });
            }
        }
        all.sort_unstable();
        all.dedup();
        ess.sort_unstable();
        ess.dedup();
        for &(o, s) in &ess {
            if all.binary_search(&(o, s)).is_err() {
                return Err(TaxonomyError::EssentialNotInAll { occupation: o, skill: s });
            }
        }

        let adj_all = Adjacency::from_sorted_pairs(occupations.len(), &all);
        let adj_ess = Adjacency::from_sorted_pairs(occupations.len(), &ess);
        let invert = |pairs: &[(u32, u32)]| {
            let mut flipped: Vec<(u32, u32)> = pairs.iter().map(|&(o, s)| (s, o)).collect();
            flipped.sort_unstable();
            Adjacency::from_sorted_pairs(skills.len(), &flipped)
        };
        let inv_all = invert(&all);
        let inv_ess = invert(&ess);

        Ok(Taxonomy {
            occupations,
            skills,
            blocks,
            adj_all,
            adj_ess,
            inv_all,
            inv_ess,
            occupation_ids,
            skill_ids,
        })
    }

    pub fn occupation_count(&self) -> usize {
        self.occupations.len()
    }

    pub fn skill_count(&self) -> usize {
        self.skills.len()
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn occupations(&self) -> &[Occupation] {
        &self.occupations
    }

    pub fn skills(&self) -> &[Skill] {
        &self.skills
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn occupation_index(&self, id: &str) -> Option<usize> {
        self.occupation_ids.get(id).copied()
    }

    pub fn skill_index(&self, id: &str) -> Option<usize> {
        self.skill_ids.get(id).copied()
    }

    /// Occupation ids in index order.
    pub fn occupation_ids(&self) -> Vec<String> {
        self.occupations.iter().map(|o| o.id.clone()).collect()
    }

    fn adjacency(&self, kind: EdgeKind) -> &Adjacency {
        match kind {
            EdgeKind::All => &self.adj_all,
            EdgeKind::Essential => &self.adj_ess,
        }
    }

    fn inverted(&self, kind: EdgeKind) -> &Adjacency {
        match kind {
            EdgeKind::All => &self.inv_all,
            EdgeKind::Essential => &self.inv_ess,
        }
    }

    /// The set of skill indices adjacent to `occupation` under the requested
    /// edge relation, as a sorted duplicate-free slice.
    ///
    /// Panics if `occupation` is out of range.
    pub fn neighbor_sets(&self, occupation: usize, kind: EdgeKind) -> &[u32] {
        assert!(
            occupation < self.occupations.len(),
            "occupation index {occupation} out of range ({} occupations)",
            self.occupations.len()
        );
        self.adjacency(kind).row(occupation)
    }

    /// The occupations adjacent to `skill`, sorted and duplicate-free.
    pub fn skill_neighbors(&self, skill: usize, kind: EdgeKind) -> &[u32] {
        assert!(
            skill < self.skills.len(),
            "skill index {skill} out of range ({} skills)",
            self.skills.len()
        );
        self.inverted(kind).row(skill)
    }

    pub fn degree(&self, occupation: usize, kind: EdgeKind) -> usize {
        self.neighbor_sets(occupation, kind).len()
    }

    pub fn skill_degree(&self, skill: usize, kind: EdgeKind) -> usize {
        self.skill_neighbors(skill, kind).len()
    }

    pub fn edge_count(&self, kind: EdgeKind) -> usize {
        self.adjacency(kind).edge_count()
    }

    /// All `(occupation, skill)` pairs of the requested relation, sorted.
    pub fn edge_pairs(&self, kind: EdgeKind) -> impl Iterator<Item = (u32, u32)> + '_ {
        let adj = self.adjacency(kind);
        (0..self.occupations.len()).flat_map(move |o| {
            adj.row(o).iter().map(move |&s| (o as u32, s))
        })
    }
}

/// Per-occupation, per-block edge counts for both relations.
#[derive(Debug, Clone)]
pub struct BlockWeightedGraph {
    occupations: usize,
    blocks: usize,
    weights_all: Vec<u32>,
    weights_ess: Vec<u32>,
}

impl BlockWeightedGraph {
    pub fn occupation_count(&self) -> usize {
        self.occupations
    }

    pub fn block_count(&self) -> usize {
        self.blocks
    }

    /// Row of all-edge counts for one occupation, one entry per block.
    pub fn row_all(&self, occupation: usize) -> &[u32] {
        &self.weights_all[occupation * self.blocks..(occupation + 1) * self.blocks]
    }

    pub fn row_ess(&self, occupation: usize) -> &[u32] {
        &self.weights_ess[occupation * self.blocks..(occupation + 1) * self.blocks]
    }

    pub fn weight_all(&self, occupation: usize, block: usize) -> u32 {
        self.weights_all[occupation * self.blocks + block]
    }

    pub fn weight_ess(&self, occupation: usize, block: usize) -> u32 {
        self.weights_ess[occupation * self.blocks + block]
    }

    pub fn total_all(&self) -> u64 {
        self.weights_all.iter().map(|&w| w as u64).sum()
    }

    pub fn total_ess(&self) -> u64 {
        self.weights_ess.iter().map(|&w| w as u64).sum()
    }
}

/// Count, for every occupation and block, the edges from the occupation into
/// skills of that block, separately for the all and essential relations.
pub fn aggregate_blocks(taxonomy: &Taxonomy) -> BlockWeightedGraph {
    let m = taxonomy.occupation_count();
    let b = taxonomy.block_count();
    let mut weights_all = vec![0u32; m * b];
    let mut weights_ess = vec![0u32; m * b];
    for (kind, weights) in [
        (EdgeKind::All, &mut weights_all),
        (EdgeKind::Essential, &mut weights_ess),
    ] {
        for i in 0..m {
            for &s in taxonomy.neighbor_sets(i, kind) {
                let block = taxonomy.skills()[s as usize].block as usize;
                weights[i * b + block] += 1;
            }
        }
    }
    BlockWeightedGraph {
        occupations: m,
        blocks: b,
        weights_all,
        weights_ess,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn fixture_neighbor_sets() {
        let t = fixtures::small_taxonomy();
        assert_eq!(t.occupation_count(), 3);
        assert_eq!(t.skill_count(), 4);
        assert_eq!(t.block_count(), 2);
        assert_eq!(t.neighbor_sets(0, EdgeKind::All), &[0, 1, 2]);
        assert_eq!(t.neighbor_sets(1, EdgeKind::All), &[1, 2]);
        assert_eq!(t.neighbor_sets(2, EdgeKind::All), &[2, 3]);
        assert_eq!(t.neighbor_sets(0, EdgeKind::Essential), &[0, 1]);
        assert_eq!(t.neighbor_sets(2, EdgeKind::Essential), &[3]);
    }

    #[test]
    fn isolated_occupation_has_empty_neighbor_set() {
        let t = Taxonomy::new(
            vec![occ("o1"), occ("o2")],
            vec![skill("s1", 0)],
            vec![Block { id: "b1".into(), skill_type: SkillType::Core }],
            vec![(0, 0)],
            vec![],
        )
        .unwrap();
        assert!(t.neighbor_sets(1, EdgeKind::All).is_empty());
        // all edges optional: essential set is empty
        assert!(t.neighbor_sets(0, EdgeKind::Essential).is_empty());
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn neighbor_sets_panics_out_of_range() {
        let t = fixtures::small_taxonomy();
        t.neighbor_sets(3, EdgeKind::All);
    }

    #[test]
    fn aggregate_blocks_fixture_rows() {
        let t = fixtures::small_taxonomy();
        let w = aggregate_blocks(&t);
        assert_eq!(w.row_all(0), &[2, 1]);
        assert_eq!(w.row_all(1), &[1, 1]);
        assert_eq!(w.row_all(2), &[0, 2]);
        assert_eq!(w.row_ess(0), &[2, 0]);
        assert_eq!(w.row_ess(1), &[1, 1]);
        assert_eq!(w.row_ess(2), &[0, 1]);
        // conservation
        assert_eq!(w.total_all(), t.edge_count(EdgeKind::All) as u64);
        assert_eq!(w.total_ess(), t.edge_count(EdgeKind::Essential) as u64);
    }

    #[test]
    fn single_block_collapses_to_degree_vector() {
        let t = Taxonomy::new(
            vec![occ("o1"), occ("o2")],
            vec![skill("s1", 0), skill("s2", 0), skill("s3", 0)],
            vec![Block { id: "b1".into(), skill_type: SkillType::Core }],
            vec![(0, 0), (0, 1), (1, 2)],
            vec![(0, 0)],
        )
        .unwrap();
        let w = aggregate_blocks(&t);
        for i in 0..2 {
            assert_eq!(w.row_all(i), &[t.degree(i, EdgeKind::All) as u32]);
        }
    }

    #[test]
    fn equal_relations_give_equal_weights() {
        let edges = vec![(0, 0), (0, 1), (1, 1)];
        let t = Taxonomy::new(
            vec![occ("o1"), occ("o2")],
            vec![skill("s1", 0), skill("s2", 0)],
            vec![Block { id: "b1".into(), skill_type: SkillType::Core }],
            edges.clone(),
            edges,
        )
        .unwrap();
        let w = aggregate_blocks(&t);
        assert_eq!(w.row_all(0), w.row_ess(0));
        assert_eq!(w.row_all(1), w.row_ess(1));
    }

    #[test]
    fn essential_outside_all_is_rejected() {
        let err = Taxonomy::new(
            vec![occ("o1")],
            vec![skill("s1", 0), skill("s2", 0)],
            vec![Block { id: "b1".into(), skill_type: SkillType::Core }],
            vec![(0, 0)],
            vec![(0, 1)],
        )
        .unwrap_err();
        assert!(matches!(err, TaxonomyError::EssentialNotInAll { .. }));
    }

    #[test]
    fn block_type_mismatch_is_rejected() {
        let err = Taxonomy::new(
            vec![occ("o1")],
            vec![Skill {
                id: "s1".into(),
                label: String::new(),
                skill_type: SkillType::Language,
                block: 0,
            }],
            vec![Block { id: "b1".into(), skill_type: SkillType::Core }],
            vec![],
            vec![],
        )
        .unwrap_err();
        assert!(matches!(err, TaxonomyError::BlockTypeMismatch { .. }));
    }

    #[test]
    fn partition_soundness_on_random_fixtures() {
        // brute-force double loop over (occupation, skill) pairs
        for seed in 0..20 {
            let t = fixtures::random_taxonomy(&fixtures::FixtureSpec {
                occupations: 8,
                skills: 15,
                blocks: 4,
                edge_probability: 0.4,
                essential_probability: 0.5,
                seed,
            });
            let w = aggregate_blocks(&t);
            let b = t.block_count();
            let mut expect_all = vec![0u32; t.occupation_count() * b];
            let mut expect_ess = vec![0u32; t.occupation_count() * b];
            for (o, s) in t.edge_pairs(EdgeKind::All) {
                expect_all[o as usize * b + t.skills()[s as usize].block as usize] += 1;
            }
            for (o, s) in t.edge_pairs(EdgeKind::Essential) {
                expect_ess[o as usize * b + t.skills()[s as usize].block as usize] += 1;
            }
            for i in 0..t.occupation_count() {
                assert_eq!(w.row_all(i), &expect_all[i * b..(i + 1) * b]);
                assert_eq!(w.row_ess(i), &expect_ess[i * b..(i + 1) * b]);
            }
        }
    }

    #[test]
    fn isco_code_validation() {
        assert!(IscoCode::new("2411").is_ok());
        assert!(IscoCode::new("241").is_err());
        assert!(IscoCode::new("24111").is_err());
        assert!(IscoCode::new("24a1").is_err());
    }

    fn occ(id: &str) -> Occupation {
        Occupation { id: id.into(), label: String::new(), isco_code: None }
    }

    fn skill(id: &str, block: u32) -> Skill {
        Skill { id: id.into(), label: String::new(), skill_type: SkillType::Core, block }
    }
}
