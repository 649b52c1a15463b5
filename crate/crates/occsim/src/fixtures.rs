//! Small deterministic taxonomies and the brute-force oracle used by the
//! test suites.
//!
//! The oracle evaluates every measure with explicit set constructions and
//! naive loops over the raw edge lists. It deliberately shares no code with
//! the optimized projection path; agreement between the two on random
//! fixtures is what the equivalence suite checks.

use std::collections::{HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Block, EdgeKind, Occupation, Skill, SkillType, Taxonomy};
use crate::projections::MeasureId;

/// Parameters for [`random_taxonomy`].
#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub occupations: usize,
    pub skills: usize,
    pub blocks: usize,
    /// Probability of an (occupation, skill) all-edge.
    pub edge_probability: f64,
    /// Probability that an existing all-edge is also essential.
    pub essential_probability: f64,
    pub seed: u64,
}

/// Generate a random taxonomy. Deterministic per seed; the essential
/// relation is a subset of the all relation by construction.
pub fn random_taxonomy(spec: &FixtureSpec) -> Taxonomy {
    assert!((0.0..=1.0).contains(&spec.edge_probability));
    assert!((0.0..=1.0).contains(&spec.essential_probability));
    assert!(spec.blocks >= 1, "need at least one block");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let occupations: Vec<Occupation> = (0..spec.occupations)
        .map(|i| Occupation {
            id: format!("o{i}"),
            label: format!("occupation {i}"),
            isco_code: None,
        })
        .collect();
    let blocks: Vec<Block> = (0..spec.blocks)
        .map(|j| Block {
            id: format!("b{j}"),
            skill_type: SkillType::ALL[j % SkillType::ALL.len()],
        })
        .collect();
    let skills: Vec<Skill> = (0..spec.skills)
        .map(|j| {
            let block = rng.gen_range(0..spec.blocks) as u32;
            Skill {
                id: format!("s{j}"),
                label: format!("skill {j}"),
                skill_type: blocks[block as usize].skill_type,
                block,
            }
        })
        .collect();

    let mut edges_all = Vec::new();
    let mut edges_ess = Vec::new();
    for i in 0..spec.occupations as u32 {
        for j in 0..spec.skills as u32 {
            if rng.gen_bool(spec.edge_probability) {
                edges_all.push((i, j));
                if rng.gen_bool(spec.essential_probability) {
                    edges_ess.push((i, j));
                }
            }
        }
    }

    Taxonomy::new(occupations, skills, blocks, edges_all, edges_ess)
        .expect("random fixture satisfies taxonomy invariants by construction")
}

/// The worked 3-occupation / 4-skill / 2-block fixture shared by the unit
/// suites:
///
/// * all edges: o1 {s1,s2,s3}, o2 {s2,s3}, o3 {s3,s4}
/// * essential: o1 {s1,s2},    o2 {s2,s3}, o3 {s4}
/// * blocks:    P1 {s1,s2},    P2 {s3,s4}
pub fn small_taxonomy() -> Taxonomy {
    let occupations = ["o1", "o2", "o3"]
        .iter()
        .map(|id| Occupation {
            id: (*id).into(),
            label: format!("occupation {id}"),
            isco_code: None,
        })
        .collect();
    let blocks = vec![
        Block { id: "P1".into(), skill_type: SkillType::Core },
        Block { id: "P2".into(), skill_type: SkillType::Knowledge },
    ];
    let skills = (1..=4)
        .map(|j| Skill {
            id: format!("s{j}"),
            label: format!("skill {j}"),
            skill_type: if j <= 2 { SkillType::Core } else { SkillType::Knowledge },
            block: if j <= 2 { 0 } else { 1 },
        })
        .collect();
    let edges_all = vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2), (2, 3)];
    let edges_ess = vec![(0, 0), (0, 1), (1, 1), (1, 2), (2, 3)];
    Taxonomy::new(occupations, skills, blocks, edges_all, edges_ess).unwrap()
}

/// Naive reference evaluation of one measure for one occupation pair.
///
/// Works entirely from [`Taxonomy::edge_pairs`]; degrees, neighbor sets and
/// block weights are all rebuilt here with plain loops.
pub fn oracle_measure(taxonomy: &Taxonomy, measure: MeasureId, i: usize, j: usize) -> f64 {
    let sets_all = naive_neighbor_sets(taxonomy, EdgeKind::All);
    let sets_ess = naive_neighbor_sets(taxonomy, EdgeKind::Essential);
    match measure {
        MeasureId::JaccSym => {
            let inter = sets_all[i].intersection(&sets_all[j]).count() as f64;
            let union = sets_all[i].union(&sets_all[j]).count() as f64;
            ratio(inter, union)
        }
        MeasureId::JaccMultiSym => {
            let inter = sets_all[i].intersection(&sets_ess[j]).count() as f64;
            let union = sets_all[i].union(&sets_ess[j]).count() as f64;
            ratio(inter, union)
        }
        MeasureId::JaccAsym => {
            let inter = sets_all[i].intersection(&sets_all[j]).count() as f64;
            ratio(inter, sets_all[j].len() as f64)
        }
        MeasureId::Jacc => {
            let inter = sets_all[i].intersection(&sets_ess[j]).count() as f64;
            ratio(inter, sets_ess[j].len() as f64)
        }
        MeasureId::CollSym => {
            let degree = naive_skill_degrees(taxonomy, EdgeKind::All);
            let mut sum = 0.0;
            for skill in 0..taxonomy.skill_count() as u32 {
                if sets_all[i].contains(&skill) && sets_all[j].contains(&skill) {
                    sum += 1.0 / f64::max(degree[skill as usize] as f64 - 1.0, 1.0);
                }
            }
            sum
        }
        MeasureId::Coll => {
            let degree = naive_skill_degrees(taxonomy, EdgeKind::Essential);
            let mut sum = 0.0;
            for skill in 0..taxonomy.skill_count() as u32 {
                if sets_all[i].contains(&skill) && sets_ess[j].contains(&skill) {
                    sum += 1.0 / f64::max(degree[skill as usize] as f64 - 1.0, 1.0);
                }
            }
            sum
        }
        MeasureId::GjaccSym => {
            let weights = naive_block_weights(taxonomy, EdgeKind::All);
            generalized_jaccard(&weights[i], &weights[j], taxonomy.block_count())
        }
        MeasureId::Gjacc => {
            let all = naive_block_weights(taxonomy, EdgeKind::All);
            let ess = naive_block_weights(taxonomy, EdgeKind::Essential);
            generalized_jaccard(&all[i], &ess[j], taxonomy.block_count())
        }
        MeasureId::ColfSym => {
            let weights = naive_block_weights(taxonomy, EdgeKind::All);
            collaborative_filtering(&weights, &weights, i, j, taxonomy.block_count())
        }
        MeasureId::Colf => {
            let all = naive_block_weights(taxonomy, EdgeKind::All);
            let ess = naive_block_weights(taxonomy, EdgeKind::Essential);
            collaborative_filtering(&all, &ess, i, j, taxonomy.block_count())
        }
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn naive_neighbor_sets(taxonomy: &Taxonomy, kind: EdgeKind) -> Vec<HashSet<u32>> {
    let mut sets = vec![HashSet::new(); taxonomy.occupation_count()];
    for (o, s) in taxonomy.edge_pairs(kind) {
        sets[o as usize].insert(s);
    }
    sets
}

fn naive_skill_degrees(taxonomy: &Taxonomy, kind: EdgeKind) -> Vec<usize> {
    let mut degree = vec![0usize; taxonomy.skill_count()];
    for (_, s) in taxonomy.edge_pairs(kind) {
        degree[s as usize] += 1;
    }
    degree
}

fn naive_block_weights(taxonomy: &Taxonomy, kind: EdgeKind) -> Vec<HashMap<usize, u64>> {
    let mut weights = vec![HashMap::new(); taxonomy.occupation_count()];
    for (o, s) in taxonomy.edge_pairs(kind) {
        let block = taxonomy.skills()[s as usize].block as usize;
        *weights[o as usize].entry(block).or_insert(0) += 1;
    }
    weights
}

fn generalized_jaccard(
    row_i: &HashMap<usize, u64>,
    row_j: &HashMap<usize, u64>,
    blocks: usize,
) -> f64 {
    let mut min_sum = 0.0;
    let mut max_sum = 0.0;
    for block in 0..blocks {
        let a = *row_i.get(&block).unwrap_or(&0) as f64;
        let b = *row_j.get(&block).unwrap_or(&0) as f64;
        min_sum += a.min(b);
        max_sum += a.max(b);
    }
    ratio(min_sum, max_sum)
}

/// Eq.-style doubly normalized projection: source row from `source_weights`,
/// target row and both weighted orders from `order_weights`.
fn collaborative_filtering(
    source_weights: &[HashMap<usize, u64>],
    order_weights: &[HashMap<usize, u64>],
    i: usize,
    j: usize,
    blocks: usize,
) -> f64 {
    let order_i: u64 = (0..blocks)
        .map(|k| *order_weights[i].get(&k).unwrap_or(&0))
        .sum();
    if order_i == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for k in 0..blocks {
        let mut block_order = 0u64;
        for row in order_weights {
            block_order += *row.get(&k).unwrap_or(&0);
        }
        if block_order == 0 {
            continue;
        }
        let a = *source_weights[i].get(&k).unwrap_or(&0) as f64;
        let b = *order_weights[j].get(&k).unwrap_or(&0) as f64;
        sum += a * b / block_order as f64;
    }
    sum / order_i as f64
}
