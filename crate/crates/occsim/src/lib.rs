//! Explainable occupation-similarity measures from bipartite
//! occupation-skill graphs.
//!
//! The pipeline: ingest an occupation-skill taxonomy from CSV
//! ([`ingest`]), represent it as a bipartite multigraph with a skill-block
//! partition ([`graph`]), project it onto the occupation set under one of
//! ten similarity measures ([`projections`]), compare the resulting
//! rankings with Rank-Biased Overlap ([`rbo`]), map occupation-level
//! similarities onto ISCO codes ([`crosswalk`]), and validate measures
//! against observed (or synthetic) job-transition tables with a
//! rare/common ROC protocol ([`validation`]).
//!
//! The `occsim` binary exposes all of it as subcommands; see [`cli`].

pub mod charts;
pub mod cli;
pub mod crosswalk;
pub mod fixtures;
pub mod graph;
pub mod ingest;
pub mod projections;
pub mod rbo;
pub mod validation;

pub use crosswalk::{aggregate_to_isco, Crosswalk, IscoSimilarityMatrix};
pub use graph::{aggregate_blocks, BlockWeightedGraph, EdgeKind, IscoCode, SkillType, Taxonomy};
pub use ingest::{load_external_rankings, load_taxonomy, load_transitions, TaxonomyFiles};
pub use projections::{project, rank_from_matrix, MeasureId, SimilarityMatrix};
pub use rbo::{rbo, rbo_distribution, rbo_weight, RboConfig, RboResult};
pub use validation::{
    evaluate, generate_transitions, normalize_values, select_threshold, EvalMode, LinkSpec,
    TransitionTable, ValidationConfig, ValidationReport,
};
