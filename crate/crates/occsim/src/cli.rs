//! The `occsim` command-line front end.
//!
//! Five subcommands drive the pipeline: `project` (similarity matrices),
//! `rank` (top-k tables), `rbo` (ranking comparison), `validate`
//! (transition-based ROC evaluation) and `synth` (synthetic transition
//! generation). A `--config` file of `key=value` lines supplies defaults;
//! flags override it. Every run lands in its own directory under the
//! output root (`--out`, the `OCCSIM_OUT` environment variable, or the
//! working directory), named by timestamp plus a digest of the effective
//! parameters, with a `manifest.json` recording inputs and outputs.
//!
//! Exit codes are stable for scripting: 0 success, 1 runtime data error,
//! 2 usage error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use crate::charts;
use crate::crosswalk::{aggregate_to_isco, load_crosswalk, IscoSimilarityMatrix};
use crate::graph::{aggregate_blocks, Taxonomy};
use crate::ingest::{
    load_external_rankings, load_taxonomy, load_transitions, ExternalRankingSet, TaxonomyFiles,
};
use crate::projections::{project, rank_from_matrix, MeasureId, SimilarityMatrix};
use crate::rbo::{rbo_distribution, RboConfig};
use crate::validation::{
    evaluate, generate_transitions, random_isco_matrix, write_roc_csv, EvalMode, LinkSpec,
    ValidationConfig,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "occsim",
    version,
    about = "Occupation similarity from bipartite occupation-skill graphs"
)]
pub struct Cli {
    /// Configuration file of key=value lines; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Number of parallel worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Output root; runs land in per-run subdirectories. Defaults to
    /// $OCCSIM_OUT, then the working directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute one similarity matrix per selected measure.
    Project(ProjectArgs),
    /// Print top-k similar occupations, one column per measure.
    Rank(RankArgs),
    /// Compare rankings with rank-biased overlap.
    Rbo(RboArgs),
    /// Validate measures against a transition table.
    Validate(ValidateArgs),
    /// Generate a synthetic transition table from a similarity matrix.
    Synth(SynthArgs),
}

#[derive(Debug, Args, Default)]
pub struct ProjectArgs {
    /// Directory holding occupations.csv, skills.csv, relations.csv, blocks.csv.
    #[arg(long)]
    pub taxonomy_dir: Option<PathBuf>,
    /// Comma-separated measure names (e.g. jacc,colf); `all` selects every measure.
    #[arg(long, value_delimiter = ',')]
    pub measures: Vec<String>,
}

#[derive(Debug, Args, Default)]
pub struct RankArgs {
    #[arg(long)]
    pub taxonomy_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub measures: Vec<String>,
    /// Number of rows per ranking table.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Source occupations, by id or exact label.
    #[arg(required = true)]
    pub sources: Vec<String>,
}

#[derive(Debug, Args, Default)]
pub struct RboArgs {
    #[arg(long)]
    pub taxonomy_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub measures: Vec<String>,
    /// External ranking set (source_id,rank,target_id).
    #[arg(long)]
    pub rankings: Option<PathBuf>,
    /// Second ranking set: compare it directly against --rankings.
    #[arg(long)]
    pub rankings_b: Option<PathBuf>,
    /// Persistence parameter.
    #[arg(long)]
    pub p: Option<f64>,
    /// Truncation depth for the comparison.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Histogram bin count.
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct ValidateArgs {
    #[arg(long)]
    pub taxonomy_dir: Option<PathBuf>,
    /// Occupation-to-ISCO crosswalk (occupation_id,isco_code).
    #[arg(long)]
    pub crosswalk: Option<PathBuf>,
    /// Transition table (source_isco,target_isco,count).
    #[arg(long)]
    pub transitions: Option<PathBuf>,
    /// Pre-aggregated ISCO similarity matrix CSV; replaces
    /// taxonomy/crosswalk projection.
    #[arg(long)]
    pub isco_matrix: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub measures: Vec<String>,
    /// Transfer count below which a pair is rare.
    #[arg(long)]
    pub rare_threshold: Option<u64>,
    /// Normalization percentile.
    #[arg(long)]
    pub percentile: Option<f64>,
    /// Target true negative rate for threshold selection.
    #[arg(long)]
    pub target_tnr: Option<f64>,
    /// Evaluation mode: transfers or pairs.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub bins: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct SynthArgs {
    /// Generate over a random matrix with this many synthetic ISCO codes.
    #[arg(long)]
    pub codes: Option<usize>,
    /// Or project a measure over a taxonomy and aggregate via a crosswalk.
    #[arg(long)]
    pub taxonomy_dir: Option<PathBuf>,
    #[arg(long)]
    pub crosswalk: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub measures: Vec<String>,
    /// Number of transitions to sample.
    #[arg(long)]
    pub total: Option<u64>,
    /// RNG seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Errors split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(anyhow::Error),
}

impl CliError {
    fn usage(msg: impl Into<String>) -> CliError {
        CliError::Usage(msg.into())
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Data(e.into())
    }
}

type CliResult<T> = Result<T, CliError>;

/// Parse a `key=value` configuration file.
#[derive(Debug, Default)]
struct FileConfig(BTreeMap<String, String>);

const CONFIG_KEYS: &[&str] = &[
    "taxonomy_dir",
    "crosswalk",
    "transitions",
    "rankings",
    "rankings_b",
    "isco_matrix",
    "measures",
    "p",
    "depth",
    "rare_threshold",
    "percentile",
    "target_tnr",
    "mode",
    "bins",
    "top_k",
    "seed",
    "total",
    "codes",
    "workers",
    "out",
];

impl FileConfig {
    fn load(path: Option<&Path>) -> CliResult<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut map = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "{}:{}: expected key=value",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(CliError::usage(format!(
                    "{}:{}: unknown configuration key `{key}`",
                    path.display(),
                    lineno + 1
                )));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(FileConfig(map))
    }

    fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.0.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse::<T>().map(Some).map_err(|e| {
                CliError::usage(format!("config key `{key}`: invalid value `{raw}`: {e}"))
            }),
        }
    }

    fn get_list(&self, key: &str) -> Vec<String> {
        self.0
            .get(key)
            .map(|raw| raw.split(',').map(|s| s.trim().to_string()).collect())
            .unwrap_or_default()
    }
}

fn resolve<T: FromStr>(flag: Option<T>, cfg: &FileConfig, key: &str, default: T) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    Ok(flag.or(cfg.get(key)?).unwrap_or(default))
}

fn resolve_opt<T: FromStr>(flag: Option<T>, cfg: &FileConfig, key: &str) -> CliResult<Option<T>>
where
    T::Err: std::fmt::Display,
{
    Ok(flag.or(cfg.get(key)?))
}

fn resolve_required<T: FromStr>(
    flag: Option<T>,
    cfg: &FileConfig,
    key: &str,
    what: &str,
) -> CliResult<T>
where
    T::Err: std::fmt::Display,
{
    resolve_opt(flag, cfg, key)?
        .ok_or_else(|| CliError::usage(format!("{what} is required (--{})", key.replace('_', "-"))))
}

fn parse_measures(names: &[String]) -> CliResult<Vec<MeasureId>> {
    if names.len() == 1 && names[0] == "all" {
        return Ok(MeasureId::ALL.to_vec());
    }
    let mut measures = Vec::with_capacity(names.len());
    for name in names {
        let measure = MeasureId::from_str(name).map_err(|e| CliError::usage(e.to_string()))?;
        if !measures.contains(&measure) {
            measures.push(measure);
        }
    }
    Ok(measures)
}

fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(format!("file not found: {}", path.display())))
    }
}

fn require_taxonomy_files(files: &TaxonomyFiles) -> CliResult<()> {
    for path in files.paths() {
        require_file(path)?;
    }
    Ok(())
}

fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// One run's output directory plus its manifest under construction.
struct Run {
    dir: PathBuf,
    manifest: Manifest,
}

#[derive(serde::Serialize)]
struct Manifest {
    command: String,
    created_utc: String,
    workers: Option<usize>,
    params: BTreeMap<String, String>,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl Run {
    fn create(
        out_root: &Path,
        command: &str,
        workers: Option<usize>,
        params: BTreeMap<String, String>,
        input_paths: &[&Path],
    ) -> CliResult<Run> {
        let mut inputs = BTreeMap::new();
        for path in input_paths {
            inputs.insert(path.display().to_string(), file_digest(path)?);
        }
        let mut hasher = Sha256::new();
        hasher.update(command.as_bytes());
        for (k, v) in &params {
            hasher.update(k.as_bytes());
            hasher.update(b"=");
            hasher.update(v.as_bytes());
            hasher.update(b"\n");
        }
        for (k, v) in &inputs {
            hasher.update(k.as_bytes());
            hasher.update(v.as_bytes());
        }
        let digest = hex::encode(&hasher.finalize()[..4]);
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
        std::fs::create_dir_all(out_root)
            .with_context(|| format!("cannot create {}", out_root.display()))?;
        let mut dir = out_root.join(format!("{command}-{stamp}-{digest}"));
        let mut suffix = 0;
        while dir.exists() {
            suffix += 1;
            dir = out_root.join(format!("{command}-{stamp}-{digest}-{suffix}"));
        }
        std::fs::create_dir(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
        Ok(Run {
            dir,
            manifest: Manifest {
                command: command.to_string(),
                created_utc: stamp.to_string(),
                workers,
                params,
                inputs,
                outputs: Vec::new(),
            },
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.dir.join(name)
    }

    fn finish(mut self) -> CliResult<PathBuf> {
        self.manifest.outputs.sort();
        let json = serde_json::to_string_pretty(&self.manifest).map_err(anyhow::Error::from)?;
        std::fs::write(self.dir.join("manifest.json"), json + "\n")
            .map_err(anyhow::Error::from)?;
        Ok(self.dir)
    }
}

fn out_root(cli_out: Option<PathBuf>, cfg: &FileConfig) -> CliResult<PathBuf> {
    if let Some(path) = cli_out {
        return Ok(path);
    }
    if let Some(path) = cfg.get::<PathBuf>("out")? {
        return Ok(path);
    }
    if let Ok(env) = std::env::var("OCCSIM_OUT") {
        if !env.is_empty() {
            return Ok(PathBuf::from(env));
        }
    }
    Ok(PathBuf::from("."))
}

/// Entry point behind `main`; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match try_run(cli) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Data(err)) => {
            eprintln!("error: {err:#}");
            EXIT_DATA
        }
    }
}

fn try_run(cli: Cli) -> CliResult<()> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    let workers = resolve_opt(cli.workers, &cfg, "workers")?;
    if workers == Some(0) {
        return Err(CliError::usage("--workers must be at least 1"));
    }
    let root = out_root(cli.out, &cfg)?;
    let body = || -> CliResult<()> {
        match cli.command {
            Command::Project(args) => cmd_project(args, &cfg, &root, workers),
            Command::Rank(args) => cmd_rank(args, &cfg, &root, workers),
            Command::Rbo(args) => cmd_rbo(args, &cfg, &root, workers),
            Command::Validate(args) => cmd_validate(args, &cfg, &root, workers),
            Command::Synth(args) => cmd_synth(args, &cfg, &root, workers),
        }
    };
    match workers {
        None => body(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(anyhow::Error::from)?;
            pool.install(body)
        }
    }
}

fn load_taxonomy_checked(dir: &Path) -> CliResult<crate::ingest::TaxonomyLoad> {
    let files = TaxonomyFiles::in_dir(dir);
    require_taxonomy_files(&files)?;
    Ok(load_taxonomy(&files)?)
}

fn report_taxonomy(load: &crate::ingest::TaxonomyLoad) {
    let t = &load.taxonomy;
    println!(
        "taxonomy: {} occupations, {} skills, {} blocks, {} edges ({} essential)",
        t.occupation_count(),
        t.skill_count(),
        t.block_count(),
        t.edge_count(crate::graph::EdgeKind::All),
        t.edge_count(crate::graph::EdgeKind::Essential),
    );
    let w = &load.warnings;
    if w.isolated_occupations > 0 {
        println!("warning: {} isolated occupations", w.isolated_occupations);
    }
    if w.essential_overrides > 0 {
        println!(
            "warning: {} essential/optional conflicts collapsed to essential",
            w.essential_overrides
        );
    }
    if w.unassigned_block_skills > 0 {
        println!(
            "warning: {} skills without a block, assigned to synthetic blocks",
            w.unassigned_block_skills
        );
    }
}

fn measure_params(measures: &[MeasureId]) -> String {
    measures.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")
}

fn cmd_project(
    args: ProjectArgs,
    cfg: &FileConfig,
    root: &Path,
    workers: Option<usize>,
) -> CliResult<()> {
    let dir = resolve_required(args.taxonomy_dir, cfg, "taxonomy_dir", "taxonomy directory")?;
    let names = if args.measures.is_empty() { cfg.get_list("measures") } else { args.measures };
    if names.is_empty() {
        return Err(CliError::usage("at least one measure is required (--measures)"));
    }
    let measures = parse_measures(&names)?;
    let files = TaxonomyFiles::in_dir(&dir);
    require_taxonomy_files(&files)?;

    let params = BTreeMap::from([("measures".to_string(), measure_params(&measures))]);
    let inputs: Vec<&Path> = files.paths().to_vec();
    let mut run = Run::create(root, "project", workers, params, &inputs)?;

    let load = load_taxonomy(&files)?;
    report_taxonomy(&load);
    let taxonomy = load.taxonomy;
    let weights = aggregate_blocks(&taxonomy);
    for measure in measures {
        let sim = project(&taxonomy, &weights, measure);
        if !sim.degenerate_rows().is_empty() {
            println!(
                "warning: {}: {} degenerate rows with zero weighted order",
                measure,
                sim.degenerate_rows().len()
            );
        }
        let csv_path = run.path(&format!("occ_{measure}.csv"));
        sim.write_csv(&csv_path)?;
        let bin_path = run.path(&format!("occ_{measure}.bin"));
        sim.write_binary(&bin_path)?;
        println!("wrote {}", csv_path.display());
        println!("wrote {}", bin_path.display());
    }
    let dir = run.finish()?;
    println!("run directory: {}", dir.display());
    Ok(())
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut current = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        current[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            current[j + 1] = (prev[j + 1] + 1).min(current[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut current);
    }
    prev[b.len()]
}

/// Find an occupation by id, then by exact label, then case-insensitively.
fn find_occupation(taxonomy: &Taxonomy, query: &str) -> Option<usize> {
    taxonomy.occupation_index(query).or_else(|| {
        taxonomy
            .occupations()
            .iter()
            .position(|o| o.label == query)
            .or_else(|| {
                let lower = query.to_lowercase();
                taxonomy
                    .occupations()
                    .iter()
                    .position(|o| o.label.to_lowercase() == lower)
            })
    })
}

fn nearest_labels(taxonomy: &Taxonomy, query: &str, n: usize) -> Vec<String> {
    let mut scored: Vec<(usize, &str)> = taxonomy
        .occupations()
        .iter()
        .map(|o| {
            let label_distance = levenshtein(&o.label.to_lowercase(), &query.to_lowercase());
            let id_distance = levenshtein(&o.id, query);
            (label_distance.min(id_distance), o.label.as_str())
        })
        .collect();
    scored.sort_by_key(|&(d, label)| (d, label.to_string()));
    scored.into_iter().take(n).map(|(_, label)| label.to_string()).collect()
}

fn sanitize_tag(raw: &str) -> String {
    let mut tag: String = raw
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' { c } else { '-' })
        .collect();
    tag.truncate(64);
    if tag.is_empty() {
        tag.push('x');
    }
    tag
}

fn cmd_rank(
    args: RankArgs,
    cfg: &FileConfig,
    root: &Path,
    workers: Option<usize>,
) -> CliResult<()> {
    let dir = resolve_required(args.taxonomy_dir, cfg, "taxonomy_dir", "taxonomy directory")?;
    let names = if args.measures.is_empty() { cfg.get_list("measures") } else { args.measures };
    if names.is_empty() {
        return Err(CliError::usage("at least one measure is required (--measures)"));
    }
    let measures = parse_measures(&names)?;
    let top_k = resolve(args.top_k, cfg, "top_k", 7usize)?;
    let load = load_taxonomy_checked(&dir)?;
    let taxonomy = load.taxonomy;

    // resolve sources before doing any heavy work
    let mut sources = Vec::with_capacity(args.sources.len());
    for query in &args.sources {
        match find_occupation(&taxonomy, query) {
            Some(idx) => sources.push(idx),
            None => {
                let suggestions = nearest_labels(&taxonomy, query, 3);
                return Err(CliError::usage(format!(
                    "unknown occupation `{query}`; closest labels: {}",
                    suggestions.join(", ")
                )));
            }
        }
    }

    let params = BTreeMap::from([
        ("measures".to_string(), measure_params(&measures)),
        ("top_k".to_string(), top_k.to_string()),
        ("sources".to_string(), args.sources.join(",")),
    ]);
    let files = TaxonomyFiles::in_dir(&dir);
    let mut run = Run::create(root, "rank", workers, params, &files.paths())?;

    let weights = aggregate_blocks(&taxonomy);
    let matrices: Vec<SimilarityMatrix> = measures
        .iter()
        .map(|&m| project(&taxonomy, &weights, m))
        .collect();

    for (&source_idx, query) in sources.iter().zip(&args.sources) {
        let source_id = &taxonomy.occupations()[source_idx].id;
        let mut columns: Vec<Vec<String>> = Vec::new();
        for sim in &matrices {
            let ranked = rank_from_matrix(sim, source_id, top_k)
                .expect("source id comes from the taxonomy");
            let labels = ranked
                .iter()
                .map(|id| {
                    let idx = taxonomy.occupation_index(id).expect("ranked ids are known");
                    let label = &taxonomy.occupations()[idx].label;
                    if label.is_empty() { id.clone() } else { label.clone() }
                })
                .collect();
            columns.push(labels);
        }

        let path = run.path(&format!("rank_{}.csv", sanitize_tag(query)));
        let mut writer = csv::Writer::from_path(&path).map_err(anyhow::Error::from)?;
        let mut header = vec!["rank".to_string()];
        header.extend(measures.iter().map(|m| m.name().to_string()));
        writer.write_record(&header).map_err(anyhow::Error::from)?;
        let rows = columns.iter().map(Vec::len).max().unwrap_or(0);
        for r in 0..rows {
            let mut record = vec![(r + 1).to_string()];
            for column in &columns {
                record.push(column.get(r).cloned().unwrap_or_default());
            }
            writer.write_record(&record).map_err(anyhow::Error::from)?;
        }
        writer.flush().map_err(anyhow::Error::from)?;

        println!("top {top_k} for `{query}`:");
        let widths: Vec<usize> = measures
            .iter()
            .enumerate()
            .map(|(c, m)| {
                columns[c]
                    .iter()
                    .map(String::len)
                    .chain([m.name().len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut line = String::from("rank");
        for (c, m) in measures.iter().enumerate() {
            let _ = write!(line, "  {:<width$}", m.name(), width = widths[c]);
        }
        println!("{line}");
        for r in 0..rows {
            let mut line = format!("{:<4}", r + 1);
            for (c, column) in columns.iter().enumerate() {
                let cell = column.get(r).map(String::as_str).unwrap_or("");
                let _ = write!(line, "  {:<width$}", cell, width = widths[c]);
            }
            println!("{line}");
        }
        println!("wrote {}", path.display());
    }
    let dir = run.finish()?;
    println!("run directory: {}", dir.display());
    Ok(())
}

fn projection_ranking_set(
    taxonomy: &Taxonomy,
    sim: &SimilarityMatrix,
    sources: &ExternalRankingSet,
    depth: usize,
) -> BTreeMap<String, Vec<String>> {
    let mut lists = BTreeMap::new();
    for source in sources.lists().keys() {
        if taxonomy.occupation_index(source).is_some() {
            let ranked = rank_from_matrix(sim, source, depth)
                .expect("source resolved against the taxonomy");
            lists.insert(source.clone(), ranked);
        }
    }
    lists
}

fn cmd_rbo(args: RboArgs, cfg: &FileConfig, root: &Path, workers: Option<usize>) -> CliResult<()> {
    let p = resolve(args.p, cfg, "p", 0.9f64)?;
    let depth = resolve(args.depth, cfg, "depth", 20usize)?;
    let bins = resolve(args.bins, cfg, "bins", crate::validation::DEFAULT_BINS)?;
    let rankings = resolve_required(args.rankings, cfg, "rankings", "a ranking file")?;
    require_file(&rankings)?;
    let rbo_cfg = RboConfig::new(p)
        .and_then(|c| c.with_max_depth(depth))
        .map_err(|e| CliError::usage(e.to_string()))?;

    let rankings_b = resolve_opt(args.rankings_b, cfg, "rankings_b")?;
    let mut params = BTreeMap::from([
        ("p".to_string(), p.to_string()),
        ("depth".to_string(), depth.to_string()),
        ("bins".to_string(), bins.to_string()),
    ]);

    if let Some(rankings_b) = rankings_b {
        // direct comparison of two external sets
        require_file(&rankings_b)?;
        params.insert("mode".to_string(), "external".to_string());
        let mut run = Run::create(
            root,
            "rbo",
            workers,
            params,
            &[rankings.as_path(), rankings_b.as_path()],
        )?;
        let set_a = load_external_rankings(&rankings)?;
        let set_b = load_external_rankings(&rankings_b)?;
        let tag_a = sanitize_tag(&rankings.file_stem().unwrap_or_default().to_string_lossy());
        let tag_b = sanitize_tag(&rankings_b.file_stem().unwrap_or_default().to_string_lossy());
        let dist = rbo_distribution(set_a.lists(), set_b.lists(), &rbo_cfg)?;
        write_rbo_outputs(&mut run, &format!("{tag_a}_vs_{tag_b}"), &dist, bins)?;
        let dir = run.finish()?;
        println!("run directory: {}", dir.display());
        return Ok(());
    }

    let dir = resolve_required(args.taxonomy_dir, cfg, "taxonomy_dir", "taxonomy directory")?;
    let names = if args.measures.is_empty() { cfg.get_list("measures") } else { args.measures };
    if names.is_empty() {
        return Err(CliError::usage(
            "either --rankings-b or --measures with --taxonomy-dir is required",
        ));
    }
    let measures = parse_measures(&names)?;
    params.insert("measures".to_string(), measure_params(&measures));
    let files = TaxonomyFiles::in_dir(&dir);
    require_taxonomy_files(&files)?;
    let mut inputs: Vec<&Path> = files.paths().to_vec();
    inputs.push(&rankings);
    let mut run = Run::create(root, "rbo", workers, params, &inputs)?;

    let load = load_taxonomy(&files)?;
    report_taxonomy(&load);
    let taxonomy = load.taxonomy;
    let external = load_external_rankings(&rankings)?;
    let (resolved, report) = external.resolve_against(&taxonomy);
    if report.dropped_sources + report.dropped_targets > 0 {
        println!(
            "warning: dropped {} unresolvable sources and {} targets from {}",
            report.dropped_sources,
            report.dropped_targets,
            rankings.display()
        );
    }
    let weights = aggregate_blocks(&taxonomy);
    for measure in measures {
        let sim = project(&taxonomy, &weights, measure);
        let ours = projection_ranking_set(&taxonomy, &sim, &resolved, depth);
        let dist = rbo_distribution(&ours, resolved.lists(), &rbo_cfg)?;
        write_rbo_outputs(&mut run, measure.name(), &dist, bins)?;
    }
    let dir = run.finish()?;
    println!("run directory: {}", dir.display());
    Ok(())
}

fn write_rbo_outputs(
    run: &mut Run,
    tag: &str,
    dist: &crate::rbo::RboDistribution,
    bins: usize,
) -> CliResult<()> {
    let csv_path = run.path(&format!("rbo_{tag}.csv"));
    dist.write_csv(&csv_path)?;
    let hist_path = run.path(&format!("rbo_{tag}_hist.csv"));
    dist.histogram(bins).write_csv(&hist_path)?;
    let mean = dist.values.iter().map(|&(_, v)| v).sum::<f64>() / dist.values.len() as f64;
    println!(
        "rbo {tag}: {} sources, mean {:.4} (skipped: {} only in A, {} only in B)",
        dist.values.len(),
        mean,
        dist.only_in_a,
        dist.only_in_b
    );
    println!("wrote {}", csv_path.display());
    println!("wrote {}", hist_path.display());
    Ok(())
}

fn validation_config(
    args: &ValidateArgs,
    cfg: &FileConfig,
) -> CliResult<ValidationConfig> {
    let mode_name: Option<String> = resolve_opt(args.mode.clone(), cfg, "mode")?;
    let mode = match mode_name {
        None => EvalMode::Transfers,
        Some(name) => EvalMode::from_str(&name).map_err(|e| CliError::usage(e.to_string()))?,
    };
    let config = ValidationConfig {
        rare_threshold: resolve(
            args.rare_threshold,
            cfg,
            "rare_threshold",
            crate::validation::DEFAULT_RARE_THRESHOLD,
        )?,
        norm_percentile: resolve(
            args.percentile,
            cfg,
            "percentile",
            crate::validation::DEFAULT_NORM_PERCENTILE,
        )?,
        target_tnr: resolve(args.target_tnr, cfg, "target_tnr", crate::validation::DEFAULT_TARGET_TNR)?,
        bins: resolve(args.bins, cfg, "bins", crate::validation::DEFAULT_BINS)?,
        mode,
    };
    config.validate().map_err(|e| CliError::usage(e.to_string()))?;
    Ok(config)
}

fn cmd_validate(
    args: ValidateArgs,
    cfg: &FileConfig,
    root: &Path,
    workers: Option<usize>,
) -> CliResult<()> {
    let vcfg = validation_config(&args, cfg)?;
    let transitions = resolve_required(
        args.transitions.clone(),
        cfg,
        "transitions",
        "a transition table",
    )?;
    require_file(&transitions)?;

    let mut params = BTreeMap::from([
        ("rare_threshold".to_string(), vcfg.rare_threshold.to_string()),
        ("percentile".to_string(), vcfg.norm_percentile.to_string()),
        ("target_tnr".to_string(), vcfg.target_tnr.to_string()),
        ("bins".to_string(), vcfg.bins.to_string()),
        ("mode".to_string(), vcfg.mode.to_string()),
    ]);

    let isco_matrix = resolve_opt(args.isco_matrix.clone(), cfg, "isco_matrix")?;
    let mut jobs: Vec<IscoSimilarityMatrix> = Vec::new();
    let run = if let Some(matrix_path) = isco_matrix {
        require_file(&matrix_path)?;
        params.insert("isco_matrix".to_string(), matrix_path.display().to_string());
        let run = Run::create(
            root,
            "validate",
            workers,
            params,
            &[matrix_path.as_path(), transitions.as_path()],
        )?;
        let tag = sanitize_tag(&matrix_path.file_stem().unwrap_or_default().to_string_lossy());
        jobs.push(IscoSimilarityMatrix::read_csv(&matrix_path, &tag)?);
        run
    } else {
        let dir = resolve_required(
            args.taxonomy_dir.clone(),
            cfg,
            "taxonomy_dir",
            "a taxonomy directory (or --isco-matrix)",
        )?;
        let crosswalk_path =
            resolve_required(args.crosswalk.clone(), cfg, "crosswalk", "a crosswalk file")?;
        require_file(&crosswalk_path)?;
        let names = if args.measures.is_empty() { cfg.get_list("measures") } else { args.measures };
        if names.is_empty() {
            return Err(CliError::usage("at least one measure is required (--measures)"));
        }
        let measures = parse_measures(&names)?;
        params.insert("measures".to_string(), measure_params(&measures));
        let files = TaxonomyFiles::in_dir(&dir);
        require_taxonomy_files(&files)?;
        let mut inputs: Vec<&Path> = files.paths().to_vec();
        inputs.push(&crosswalk_path);
        inputs.push(&transitions);
        let run = Run::create(root, "validate", workers, params, &inputs)?;

        let load = load_taxonomy(&files)?;
        report_taxonomy(&load);
        let taxonomy = load.taxonomy;
        let cw = load_crosswalk(&crosswalk_path, &taxonomy)?;
        if !cw.unmapped_occupations.is_empty() {
            println!(
                "warning: {} occupations missing from the crosswalk are excluded",
                cw.unmapped_occupations.len()
            );
        }
        if cw.unknown_rows > 0 {
            println!("warning: {} crosswalk rows reference unknown occupations", cw.unknown_rows);
        }
        let weights = aggregate_blocks(&taxonomy);
        for measure in measures {
            let sim = project(&taxonomy, &weights, measure);
            jobs.push(aggregate_to_isco(&sim, &cw.crosswalk)?);
        }
        run
    };
    let mut run = run;

    let table = load_transitions(&transitions)?;
    if table.self_transition_pairs() > 0 {
        println!(
            "note: {} self-transition pairs retained in the table, excluded from evaluation",
            table.self_transition_pairs()
        );
    }
    for sim in &jobs {
        let report = evaluate(sim, &table, &vcfg)?;
        let tag = sanitize_tag(&report.measure);
        let report_path = run.path(&format!("report_{tag}.json"));
        report.write_json(&report_path)?;
        report
            .rare_histogram
            .write_csv(&run.path(&format!("hist_rare_{tag}.csv")))?;
        report
            .common_histogram
            .write_csv(&run.path(&format!("hist_common_{tag}.csv")))?;
        write_roc_csv(&report.roc, &run.path(&format!("roc_{tag}.csv")))?;
        charts::write_svg(
            &charts::histogram_svg(&report, &format!("{tag}: rare vs common ({})", report.mode)),
            &run.path(&format!("hist_{tag}.svg")),
        )
        .map_err(anyhow::Error::from)?;
        charts::write_svg(
            &charts::roc_svg(&report.roc, report.auc, &format!("{tag} ROC ({})", report.mode)),
            &run.path(&format!("roc_{tag}.svg")),
        )
        .map_err(anyhow::Error::from)?;
        println!(
            "validate {tag} [{}]: AUC {:.4}, threshold {:.4}, TNR {:.4}, TPR {:.4}, \
             observations {} ({} rare / {} common), excluded pairs {}",
            report.mode,
            report.auc,
            report.threshold,
            report.tnr,
            report.tpr,
            report.observation_count,
            report.rare_observations,
            report.common_observations,
            report.excluded_pairs,
        );
        println!("wrote {}", report_path.display());
    }
    let dir = run.finish()?;
    println!("run directory: {}", dir.display());
    Ok(())
}

fn cmd_synth(
    args: SynthArgs,
    cfg: &FileConfig,
    root: &Path,
    workers: Option<usize>,
) -> CliResult<()> {
    let total = resolve(args.total, cfg, "total", 100_000u64)?;
    let seed = resolve(args.seed, cfg, "seed", 0u64)?;
    let codes = resolve_opt(args.codes, cfg, "codes")?;
    let mut params = BTreeMap::from([
        ("total".to_string(), total.to_string()),
        ("seed".to_string(), seed.to_string()),
    ]);

    let (mut run, sim) = if let Some(codes) = codes {
        if args.taxonomy_dir.is_some() || args.crosswalk.is_some() {
            return Err(CliError::usage(
                "--codes and --taxonomy-dir/--crosswalk are mutually exclusive",
            ));
        }
        if codes == 0 {
            return Err(CliError::usage("--codes must be at least 1"));
        }
        params.insert("codes".to_string(), codes.to_string());
        let run = Run::create(root, "synth", workers, params, &[])?;
        (run, random_isco_matrix(codes, seed))
    } else {
        let dir = resolve_required(
            args.taxonomy_dir,
            cfg,
            "taxonomy_dir",
            "a taxonomy directory (or --codes)",
        )?;
        let crosswalk_path =
            resolve_required(args.crosswalk, cfg, "crosswalk", "a crosswalk file")?;
        require_file(&crosswalk_path)?;
        let names = if args.measures.is_empty() { cfg.get_list("measures") } else { args.measures };
        if names.is_empty() {
            return Err(CliError::usage("one measure is required (--measures)"));
        }
        let measures = parse_measures(&names)?;
        if measures.len() != 1 {
            return Err(CliError::usage("synth uses exactly one measure"));
        }
        params.insert("measures".to_string(), measures[0].name().to_string());
        let files = TaxonomyFiles::in_dir(&dir);
        require_taxonomy_files(&files)?;
        let mut inputs: Vec<&Path> = files.paths().to_vec();
        inputs.push(&crosswalk_path);
        let run = Run::create(root, "synth", workers, params, &inputs)?;

        let load = load_taxonomy(&files)?;
        report_taxonomy(&load);
        let taxonomy = load.taxonomy;
        let cw = load_crosswalk(&crosswalk_path, &taxonomy)?;
        let weights = aggregate_blocks(&taxonomy);
        let sim = project(&taxonomy, &weights, measures[0]);
        (run, aggregate_to_isco(&sim, &cw.crosswalk)?)
    };

    let matrix_path = run.path(&format!("isco_{}.csv", sanitize_tag(sim.measure())));
    sim.write_csv(&matrix_path)?;
    let table = generate_transitions(&sim, total, seed, &LinkSpec::default())?;
    let transitions_path = run.path("transitions.csv");
    table.write_csv(&transitions_path)?;
    println!(
        "synth: {} codes, {} transitions over {} pairs",
        sim.size(),
        table.total(),
        table.len()
    );
    println!("wrote {}", matrix_path.display());
    println!("wrote {}", transitions_path.display());
    let dir = run.finish()?;
    println!("run directory: {}", dir.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_parses_subcommands() {
        let cli = Cli::parse_from([
            "occsim", "project", "--taxonomy-dir", "/tmp/t", "--measures", "jacc,colf",
        ]);
        match cli.command {
            Command::Project(args) => {
                assert_eq!(args.measures, vec!["jacc", "colf"]);
                assert_eq!(args.taxonomy_dir.unwrap(), PathBuf::from("/tmp/t"));
            }
            _ => panic!("wrong subcommand"),
        }
    }

    #[test]
    fn measure_parsing_rejects_unknown_names() {
        assert!(parse_measures(&["jacc".into()]).is_ok());
        assert_eq!(parse_measures(&["all".into()]).unwrap().len(), 10);
        assert!(matches!(
            parse_measures(&["nope".into()]),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn config_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\nmeasures = jacc , coll\np=0.8\ntop_k=5\n").unwrap();
        let cfg = FileConfig::load(Some(&path)).unwrap();
        assert_eq!(cfg.get_list("measures"), vec!["jacc", "coll"]);
        assert_eq!(cfg.get::<f64>("p").unwrap(), Some(0.8));
        assert_eq!(resolve(None, &cfg, "top_k", 7usize).unwrap(), 5);
        assert_eq!(resolve(Some(9usize), &cfg, "top_k", 7).unwrap(), 9);

        std::fs::write(&path, "unknown_key=1\n").unwrap();
        assert!(matches!(
            FileConfig::load(Some(&path)),
            Err(CliError::Usage(_))
        ));
    }

    #[test]
    fn levenshtein_small_cases() {
        assert_eq!(levenshtein("plaster", "plaster"), 0);
        assert_eq!(levenshtein("plasterer", "plaster"), 2);
        assert_eq!(levenshtein("", "abc"), 3);
    }

    #[test]
    fn sanitize_tags() {
        assert_eq!(sanitize_tag("jacc"), "jacc");
        assert_eq!(sanitize_tag("http://x/y z"), "http---x-y-z");
        assert_eq!(sanitize_tag(""), "x");
    }
}
