//! Command-line front end: `generate`, `discover`, `bench` and `trace`.
//!
//! Every verb reads one JSON config file (`--config`) holding a mandatory
//! `seed` and a block named after the verb. Exit codes: 0 success, 1 runtime
//! failure, 2 configuration error.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bench::{generate_dataset, run_bench, summary_csv, BenchConfig, DatasetSpec, GenMode};
use crate::data::{load_csv, load_table, write_csv, DataMatrix, Domain};
use crate::discovery::{discover, marginal_pvalues, model_file_name, train_models, DiscoveryConfig, DiscoveryReport};
use crate::error::ScslError;
use crate::io::{write_atomic, write_json};
use crate::model::TrainConfig;
use crate::rng::RngHandle;
use crate::search::{search_with, EdgeEvaluator, SearchConfig, SearchMode};
use crate::synthgen::GenConfig;

/// Exhaustive search is refused above this many subsets per edge unless forced.
pub const EXHAUSTIVE_LIMIT: u64 = 1024;

#[derive(Debug, Parser)]
#[command(name = "scsl", version, about = "Subset-searching causal discovery for bipartite X -> Y graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub verb: Verb,
}

#[derive(Debug, Subcommand)]
pub enum Verb {
    /// Write a semi-synthetic dataset (X.csv, Y.csv, truth.json).
    Generate(CommonArgs),
    /// Test every candidate edge of a dataset.
    Discover(CommonArgs),
    /// Sweep a grid of generated datasets and summarize accuracy.
    Bench(CommonArgs),
    /// Export per-evaluation search traces for several search modes.
    Trace(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Allow exhaustive searches above the subset limit.
    #[arg(long)]
    pub force: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<ScslError> for CliError {
    fn from(e: ScslError) -> Self {
        match e {
            ScslError::Config(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub generate: Option<GenerateBlock>,
    pub discover: Option<DiscoverBlock>,
    pub bench: Option<BenchBlock>,
    pub trace: Option<TraceBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateBlock {
    pub mode: GenMode,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub k_parents: usize,
    pub conf_p: f64,
    pub coef_mean: f64,
    pub coef_sd: f64,
    pub noise_sd: f64,
    pub fixed_coef: Option<f64>,
    pub source_conf_p: f64,
    pub x_input: Option<PathBuf>,
    pub y_input: Option<PathBuf>,
}

impl Default for GenerateBlock {
    fn default() -> Self {
        let g = GenConfig::default();
        Self {
            mode: GenMode::Synthetic,
            n: 2000,
            p: 5,
            m: 5,
            k_parents: g.k_parents,
            conf_p: g.conf_p,
            coef_mean: g.coef_mean,
            coef_sd: g.coef_sd,
            noise_sd: g.noise_sd,
            fixed_coef: g.fixed_coef,
            source_conf_p: 0.5,
            x_input: None,
            y_input: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoverBlock {
    pub x_input: Option<PathBuf>,
    pub y_input: Option<PathBuf>,
    pub domain: Domain,
    pub train: TrainConfig,
    pub search: SearchConfig,
    pub fdr_q: f64,
    pub edge_filter: Option<Vec<(usize, usize)>>,
    /// Also write marginal chi-square p-values (binary data only).
    pub marginal: bool,
    pub save_models: bool,
}

impl Default for DiscoverBlock {
    fn default() -> Self {
        Self {
            x_input: None,
            y_input: None,
            domain: Domain::Binary,
            train: TrainConfig::default(),
            search: SearchConfig::default(),
            fdr_q: 0.05,
            edge_filter: None,
            marginal: false,
            save_models: true,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchBlock {
    pub mode: GenMode,
    pub n: Vec<usize>,
    pub sizes: Vec<(usize, usize)>,
    pub conf_p: Vec<f64>,
    pub seeds: Vec<u64>,
    pub k_parents: usize,
    pub coef_mean: f64,
    pub coef_sd: f64,
    pub noise_sd: f64,
    pub source_conf_p: f64,
    pub train: TrainConfig,
    pub search: SearchConfig,
    pub fdr_q: f64,
    pub thresholds: Option<Vec<f64>>,
    pub x_input: Option<PathBuf>,
    pub y_input: Option<PathBuf>,
}

impl Default for BenchBlock {
    fn default() -> Self {
        let b = BenchConfig::default();
        Self {
            mode: b.mode,
            n: b.n,
            sizes: b.sizes,
            conf_p: b.conf_p,
            seeds: b.seeds,
            k_parents: b.gen.k_parents,
            coef_mean: b.gen.coef_mean,
            coef_sd: b.gen.coef_sd,
            noise_sd: b.gen.noise_sd,
            source_conf_p: b.source_conf_p,
            train: TrainConfig::default(),
            search: SearchConfig::default(),
            fdr_q: 0.05,
            thresholds: None,
            x_input: None,
            y_input: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceBlock {
    pub x_input: Option<PathBuf>,
    pub y_input: Option<PathBuf>,
    pub domain: Domain,
    pub train: TrainConfig,
    pub search: SearchConfig,
    pub modes: Vec<SearchMode>,
    pub edge_filter: Option<Vec<(usize, usize)>>,
}

impl Default for TraceBlock {
    fn default() -> Self {
        Self {
            x_input: None,
            y_input: None,
            domain: Domain::Binary,
            train: TrainConfig::default(),
            search: SearchConfig {
                alpha_stop: None,
                ..SearchConfig::default()
            },
            modes: vec![SearchMode::Gso, SearchMode::Hybrid, SearchMode::NaiveRandom],
            edge_filter: None,
        }
    }
}

/// 1-based line of `"key"` inside `block` of the raw config text, if found.
fn locate(text: &str, block: &str, key: &str) -> Option<usize> {
    let block_pat = format!("\"{block}\"");
    let key_pat = format!("\"{key}\"");
    let start = text.lines().position(|l| l.contains(&block_pat)).unwrap_or(0);
    text.lines()
        .enumerate()
        .skip(start)
        .find(|(_, l)| l.contains(&key_pat))
        .map(|(i, _)| i + 1)
}

struct Checker<'a> {
    text: &'a str,
    block: &'a str,
}

impl Checker<'_> {
    fn fail(&self, key: &str, msg: impl fmt::Display) -> CliError {
        match locate(self.text, self.block, key) {
            Some(line) => CliError::Config(format!("line {line}: {}.{key}: {msg}", self.block)),
            None => CliError::Config(format!("{}.{key}: {msg}", self.block)),
        }
    }

    fn unit(&self, key: &str, v: f64) -> CliResult<()> {
        if !(0.0..=1.0).contains(&v) {
            return Err(self.fail(key, format!("must be in [0, 1], got {v}")));
        }
        Ok(())
    }

    fn open_unit(&self, key: &str, v: f64) -> CliResult<()> {
        if !(v > 0.0 && v < 1.0) {
            return Err(self.fail(key, format!("must be in (0, 1), got {v}")));
        }
        Ok(())
    }

    fn positive(&self, key: &str, v: usize) -> CliResult<()> {
        if v == 0 {
            return Err(self.fail(key, "must be positive"));
        }
        Ok(())
    }

    fn train(&self, t: &TrainConfig) -> CliResult<()> {
        self.positive("batch_size", t.batch_size)?;
        self.unit("p_mask", t.p_mask)?;
        if !(t.learning_rate > 0.0) {
            return Err(self.fail("learning_rate", "must be positive"));
        }
        if !(t.l2_lambda >= 0.0) {
            return Err(self.fail("l2_lambda", "must be non-negative"));
        }
        t.validate().map_err(|e| self.fail("train", e))
    }

    fn search(&self, s: &SearchConfig) -> CliResult<()> {
        if let Some(a) = s.alpha_stop {
            if !(a > 0.0 && a <= 1.0) {
                return Err(self.fail("alpha_stop", format!("must be in (0, 1], got {a}")));
            }
        }
        if !(s.tau_min > 0.0) {
            return Err(self.fail("tau_min", "must be positive"));
        }
        if s.tau0 < s.tau_min {
            return Err(self.fail("tau0", "must be at least tau_min"));
        }
        if !(s.tau_decay > 0.0 && s.tau_decay <= 1.0) {
            return Err(self.fail("tau_decay", "must be in (0, 1]"));
        }
        if !(s.theta_lr > 0.0) {
            return Err(self.fail("theta_lr", "must be positive"));
        }
        s.validate().map_err(|e| self.fail("search", e))
    }
}

/// Parses and schema-checks the config file; `block` names the verb's block.
pub fn load_config(path: &Path) -> CliResult<(RunConfig, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: RunConfig =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok((cfg, text))
}

fn missing_block(name: &str) -> CliError {
    CliError::Config(format!("config has no `{name}` block"))
}

fn require_path(c: &Checker<'_>, p: &Option<PathBuf>, key: &str) -> CliResult<PathBuf> {
    p.clone().ok_or_else(|| c.fail(key, "is required"))
}

pub fn check_generate(b: &GenerateBlock, text: &str) -> CliResult<()> {
    let c = Checker { text, block: "generate" };
    c.unit("conf_p", b.conf_p)?;
    c.unit("source_conf_p", b.source_conf_p)?;
    c.positive("p", b.p)?;
    c.positive("m", b.m)?;
    if b.n < 2 {
        return Err(c.fail("n", "must be at least 2"));
    }
    if b.k_parents == 0 || b.k_parents > b.p {
        return Err(c.fail("k_parents", format!("must be in 1..={}", b.p)));
    }
    if !(b.coef_sd > 0.0) {
        return Err(c.fail("coef_sd", "must be positive"));
    }
    if !(b.noise_sd >= 0.0) {
        return Err(c.fail("noise_sd", "must be non-negative"));
    }
    if b.mode.needs_source() && b.y_input.is_none() {
        return Err(c.fail(
            "mode",
            format!("{} resamples observed Y rows and needs `y_input`", b.mode.as_str()),
        ));
    }
    Ok(())
}

fn gen_config(b: &GenerateBlock, seed: u64) -> GenConfig {
    GenConfig {
        k_parents: b.k_parents,
        conf_p: b.conf_p,
        coef_mean: b.coef_mean,
        coef_sd: b.coef_sd,
        m_targets: b.m,
        noise_sd: b.noise_sd,
        fixed_coef: b.fixed_coef,
        seed,
    }
}

fn source_domain(mode: GenMode) -> Domain {
    match mode {
        GenMode::Synthetic | GenMode::RealConfounding => Domain::Binary,
        GenMode::ContinuousSynthetic | GenMode::ContinuousReal => Domain::Continuous,
    }
}

/// Observed rows handed to a generator. Real modes need Y; X may be absent,
/// in which case the synthetic-mode generators draw their own.
fn load_source(mode: GenMode, x: &Option<PathBuf>, y: &Option<PathBuf>, p: usize, rng: &mut RngHandle) -> CliResult<Option<DataMatrix>> {
    match (x, y) {
        (Some(x), Some(y)) => {
            // X is always binary; Y follows the generator's domain.
            let (xn, xm) = load_table(x, Domain::Binary)?;
            let (yn, ym) = load_table(y, source_domain(mode))?;
            if xm.nrows() != ym.nrows() {
                return Err(ScslError::MismatchedRows {
                    x_rows: xm.nrows(),
                    y_rows: ym.nrows(),
                }
                .into());
            }
            Ok(Some(DataMatrix::new(xm, ym, source_domain(mode), xn, yn)?))
        }
        (None, Some(y)) => {
            let (yn, ym) = load_table(y, source_domain(mode))?;
            let xm = crate::synthgen::synthetic_x(ym.nrows(), p, rng);
            Ok(Some(DataMatrix::new(xm, ym, source_domain(mode), crate::synthgen::default_x_names(p), yn)?))
        }
        (Some(x), None) => {
            let (xn, xm) = load_table(x, Domain::Binary)?;
            let ym = ndarray::Array2::zeros((xm.nrows(), 1));
            Ok(Some(DataMatrix::new(xm, ym, Domain::Continuous, xn, vec!["unused".into()])?))
        }
        (None, None) => Ok(None),
    }
}

pub fn cmd_generate(cfg: &RunConfig, text: &str, args: &CommonArgs) -> CliResult<()> {
    let b = cfg.generate.as_ref().ok_or_else(|| missing_block("generate"))?;
    check_generate(b, text)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let mut rng = RngHandle::new(seed);
    let source = load_source(b.mode, &b.x_input, &b.y_input, b.p, &mut rng.derive(&[1]))?;
    let spec = DatasetSpec {
        mode: b.mode,
        n: b.n,
        p: source.as_ref().filter(|_| b.x_input.is_some()).map_or(b.p, DataMatrix::p),
        m: b.m,
        gen: gen_config(b, seed),
        source_conf_p: b.source_conf_p,
    };
    let out = generate_dataset(&spec, source.as_ref(), &mut rng)?;
    write_csv(&out.data, &args.out.join("X.csv"), &args.out.join("Y.csv"))?;
    let block = serde_json::to_value(b).map_err(ScslError::from)?;
    write_json(&args.out.join("truth.json"), &out.sidecar(block, seed))?;
    log::info!("wrote {} rows to {}", out.data.n(), args.out.display());
    Ok(())
}

fn load_inputs(c: &Checker<'_>, x: &Option<PathBuf>, y: &Option<PathBuf>, domain: Domain) -> CliResult<DataMatrix> {
    let x = require_path(c, x, "x_input")?;
    let y = require_path(c, y, "y_input")?;
    Ok(load_csv(&x, &y, domain)?)
}

fn exhaustive_guard(mode: SearchMode, m: usize, n_edges: usize, force: bool) -> CliResult<()> {
    if mode != SearchMode::Exhaustive || m == 0 {
        return Ok(());
    }
    let d = m - 1;
    let per_edge = if d >= 64 { u64::MAX } else { 1u64 << d };
    if per_edge > EXHAUSTIVE_LIMIT && !force {
        let total = per_edge.saturating_mul(n_edges as u64);
        return Err(CliError::Config(format!(
            "exhaustive search needs 2^{d} = {per_edge} GCM evaluations per edge ({total} for {n_edges} edges); \
             use a sampling mode or pass --force"
        )));
    }
    Ok(())
}

fn pool_size(args: &CommonArgs) -> CliResult<usize> {
    match args.workers {
        Some(0) => Err(CliError::Config("--workers must be at least 1".into())),
        Some(w) => Ok(w),
        None => Ok(1),
    }
}

pub fn cmd_discover(cfg: &RunConfig, text: &str, args: &CommonArgs) -> CliResult<DiscoveryReport> {
    let b = cfg.discover.as_ref().ok_or_else(|| missing_block("discover"))?;
    let c = Checker { text, block: "discover" };
    c.open_unit("fdr_q", b.fdr_q)?;
    c.train(&b.train)?;
    c.search(&b.search)?;
    let workers = pool_size(args)?;
    let data = load_inputs(&c, &b.x_input, &b.y_input, b.domain)?;
    if let Some(edges) = &b.edge_filter {
        if let Some((j, k)) = edges.iter().find(|(j, k)| *j >= data.p() || *k >= data.m()) {
            return Err(c.fail("edge_filter", format!("edge ({j}, {k}) outside {}x{}", data.p(), data.m())));
        }
    }
    let n_edges = b.edge_filter.as_ref().map_or(data.p() * data.m(), Vec::len);
    exhaustive_guard(b.search.mode, data.m(), n_edges, args.force)?;
    let dcfg = DiscoveryConfig {
        train: b.train.clone(),
        search: b.search.clone(),
        fdr_q: b.fdr_q,
        edge_filter: b.edge_filter.clone(),
        parallelism: workers,
        seed: args.seed.unwrap_or(cfg.seed),
    };

    let report = if b.save_models {
        let start = std::time::Instant::now();
        let models = train_models(&data.model_view()?, &dcfg)?;
        let train_seconds = start.elapsed().as_secs_f64();
        for mdl in models.y_models.iter().chain(&models.x_models) {
            write_json(&args.out.join("models").join(model_file_name(mdl.target, &data)), mdl)?;
        }
        let mut r = crate::discovery::discover_with_models(&data, &models, &dcfg)?;
        r.timing.train_seconds = train_seconds;
        r.timing.total_seconds = start.elapsed().as_secs_f64();
        r
    } else {
        discover(&data, &dcfg)?
    };

    write_json(&args.out.join("report.json"), &report)?;
    write_atomic(&args.out.join("p_matrix.csv"), report.p_matrix_csv().as_bytes())?;
    write_json(&args.out.join("timing.json"), &report.timing)?;
    if b.search.trace {
        let mut lines = String::new();
        for e in &report.edge_results {
            for rec in e.result.iter().flat_map(|r| r.trace.iter().flatten()) {
                let line = serde_json::json!({
                    "j": e.j, "k": e.k, "iter": rec.iter, "subset": rec.subset, "T": rec.statistic, "p": rec.p,
                });
                lines.push_str(&line.to_string());
                lines.push('\n');
            }
        }
        write_atomic(&args.out.join("traces.jsonl"), lines.as_bytes())?;
    }
    if b.marginal {
        let pm = marginal_pvalues(&data)?;
        let marginal = DiscoveryReport {
            p_matrix: pm.into_iter().map(|r| r.into_iter().map(Some).collect()).collect(),
            ..report.clone()
        };
        write_atomic(&args.out.join("marginal_p_matrix.csv"), marginal.p_matrix_csv().as_bytes())?;
    }

    let failed: Vec<String> = report
        .failed_edges()
        .map(|e| format!("({} -> {}): {}", e.x_name, e.y_name, e.error.as_deref().unwrap_or("")))
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Runtime(format!("{} edge(s) failed: {}", failed.len(), failed.join("; "))));
    }
    log::info!(
        "{} edges tested, {} rejected at FDR {}",
        report.edge_results.len(),
        report.rejections.len(),
        report.fdr_q
    );
    Ok(report)
}

pub fn cmd_bench(cfg: &RunConfig, text: &str, args: &CommonArgs) -> CliResult<()> {
    let b = cfg.bench.as_ref().ok_or_else(|| missing_block("bench"))?;
    let c = Checker { text, block: "bench" };
    let mut seen = std::collections::HashSet::new();
    if let Some(s) = b.seeds.iter().find(|s| !seen.insert(**s)) {
        return Err(c.fail("seeds", format!("seed {s} listed more than once")));
    }
    for &v in &b.conf_p {
        c.unit("conf_p", v)?;
    }
    c.unit("source_conf_p", b.source_conf_p)?;
    c.open_unit("fdr_q", b.fdr_q)?;
    c.train(&b.train)?;
    c.search(&b.search)?;
    if b.mode.needs_source() && b.x_input.is_some() != b.y_input.is_some() {
        return Err(c.fail("y_input", "x_input and y_input must be given together"));
    }
    let workers = pool_size(args)?;
    let seed = args.seed.unwrap_or(cfg.seed);
    let source = match (&b.x_input, &b.y_input) {
        (Some(x), Some(y)) => Some(load_csv(x, y, source_domain(b.mode))?),
        _ => None,
    };
    if let Some(m) = b.sizes.iter().map(|s| s.1).max() {
        exhaustive_guard(b.search.mode, m, b.sizes.iter().map(|s| s.0 * s.1).max().unwrap_or(0), args.force)?;
    }
    let bench = BenchConfig {
        mode: b.mode,
        n: b.n.clone(),
        sizes: b.sizes.clone(),
        conf_p: b.conf_p.clone(),
        seeds: b.seeds.clone(),
        gen: GenConfig {
            k_parents: b.k_parents,
            coef_mean: b.coef_mean,
            coef_sd: b.coef_sd,
            noise_sd: b.noise_sd,
            ..GenConfig::default()
        },
        source_conf_p: b.source_conf_p,
        discover: DiscoveryConfig {
            train: b.train.clone(),
            search: b.search.clone(),
            fdr_q: b.fdr_q,
            edge_filter: None,
            parallelism: 1,
            seed,
        },
        thresholds: b.thresholds.clone(),
    };
    bench.validate()?;
    let (cells, summary) = run_bench(&bench, source.as_ref(), workers)?;
    let mut lines = String::new();
    for cell in &cells {
        lines.push_str(&serde_json::to_string(cell).map_err(ScslError::from)?);
        lines.push('\n');
    }
    write_atomic(&args.out.join("metrics.jsonl"), lines.as_bytes())?;
    write_atomic(&args.out.join("summary.csv"), summary_csv(&summary).as_bytes())?;
    let failed = cells.iter().filter(|c| c.error.is_some()).count();
    if failed > 0 {
        log::warn!("{failed} of {} cells failed; see metrics.jsonl", cells.len());
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct TraceLine<'a> {
    mode: &'a str,
    j: usize,
    k: usize,
    iter: usize,
    subset: &'a str,
    #[serde(rename = "T")]
    statistic: f64,
    p: f64,
    /// Rank of |T| among all subsets (1 = smallest), when enumerable.
    rank: Option<usize>,
}

/// Largest |Y_{-k}| for which trace export also ranks every subset.
const RANK_LIMIT: usize = 12;

pub fn cmd_trace(cfg: &RunConfig, text: &str, args: &CommonArgs) -> CliResult<()> {
    let b = cfg.trace.as_ref().ok_or_else(|| missing_block("trace"))?;
    let c = Checker { text, block: "trace" };
    c.train(&b.train)?;
    c.search(&b.search)?;
    if b.modes.is_empty() {
        return Err(c.fail("modes", "needs at least one search mode"));
    }
    let workers = pool_size(args)?;
    let data = load_inputs(&c, &b.x_input, &b.y_input, b.domain)?;
    let edges: Vec<(usize, usize)> = match &b.edge_filter {
        Some(e) => e.clone(),
        None => (0..data.p()).flat_map(|j| (0..data.m()).map(move |k| (j, k))).collect(),
    };
    if let Some((j, k)) = edges.iter().find(|(j, k)| *j >= data.p() || *k >= data.m()) {
        return Err(c.fail("edge_filter", format!("edge ({j}, {k}) outside {}x{}", data.p(), data.m())));
    }
    for &mode in &b.modes {
        exhaustive_guard(mode, data.m(), edges.len(), args.force)?;
    }
    let seed = args.seed.unwrap_or(cfg.seed);
    let dcfg = DiscoveryConfig {
        train: b.train.clone(),
        parallelism: workers,
        seed,
        ..DiscoveryConfig::default()
    };
    let inputs = data.model_view()?;
    let models = train_models(&inputs, &dcfg)?;
    let mut out = String::new();
    for &(j, k) in &edges {
        let eval = EdgeEvaluator::new(&data, &inputs, j, k, &models.y_models[k], &models.x_models[j])?;
        let d = eval.dim();
        let ranks: Option<std::collections::HashMap<String, usize>> = (d <= RANK_LIMIT)
            .then(|| -> CliResult<_> {
                let mut all: Vec<(f64, String)> = (0..(1u64 << d))
                    .map(|mask| {
                        let s: Vec<bool> = (0..d).map(|i| (mask >> i) & 1 == 1).collect();
                        eval.hard(&s).map(|(t, _)| (t.abs(), crate::search::subset_bits(&s)))
                    })
                    .collect::<Result<_, _>>()?;
                all.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
                Ok(all.into_iter().enumerate().map(|(r, (_, s))| (s, r + 1)).collect())
            })
            .transpose()?;
        for &mode in &b.modes {
            let scfg = SearchConfig {
                mode,
                trace: true,
                ..b.search.clone()
            };
            let mut rng = RngHandle::new(seed).derive(&[0x5452, j as u64, k as u64]);
            let res = search_with(&eval, &scfg, &mut rng)?;
            for rec in res.trace.iter().flatten() {
                let line = TraceLine {
                    mode: mode.as_str(),
                    j,
                    k,
                    iter: rec.iter,
                    subset: &rec.subset,
                    statistic: rec.statistic,
                    p: rec.p,
                    rank: ranks.as_ref().and_then(|r| r.get(&rec.subset).copied()),
                };
                out.push_str(&serde_json::to_string(&line).map_err(ScslError::from)?);
                out.push('\n');
            }
        }
    }
    write_atomic(&args.out.join("traces.jsonl"), out.as_bytes())?;
    Ok(())
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let (verb, args) = match &cli.verb {
        Verb::Generate(a) => ("generate", a),
        Verb::Discover(a) => ("discover", a),
        Verb::Bench(a) => ("bench", a),
        Verb::Trace(a) => ("trace", a),
    };
    let (cfg, text) = load_config(&args.config)?;
    log::debug!("running {verb} with config {}", args.config.display());
    match &cli.verb {
        Verb::Generate(_) => cmd_generate(&cfg, &text, args),
        Verb::Discover(_) => cmd_discover(&cfg, &text, args).map(|_| ()),
        Verb::Bench(_) => cmd_bench(&cfg, &text, args),
        Verb::Trace(_) => cmd_trace(&cfg, &text, args),
    }
}

/// Parses `argv`, runs the verb and returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
