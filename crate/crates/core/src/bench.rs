//! Benchmark harness: dataset recipes, error-rate metrics and grid sweeps.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Domain, GroundTruthGraph};
use crate::discovery::{discover, DiscoveryConfig};
use crate::error::{Result, ScslError};
use crate::rng::RngHandle;
use crate::synthgen::{
    default_x_names, gen_continuous_real, gen_continuous_synth, gen_real_confounding, gen_synth_confounding,
    synthetic_source, synthetic_x, GenConfig, SemiSynthOutput,
};

/// Edges are drawn at p-values at or below this level when computing F1.
pub const F1_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenMode {
    /// Sequential generator; Y-internal edges with probability `conf_p`.
    Synthetic,
    /// Row resampling of observed Y, keeping its confounding.
    RealConfounding,
    ContinuousSynthetic,
    ContinuousReal,
}

impl GenMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            GenMode::Synthetic => "synthetic",
            GenMode::RealConfounding => "real_confounding",
            GenMode::ContinuousSynthetic => "continuous_synthetic",
            GenMode::ContinuousReal => "continuous_real",
        }
    }

    pub fn needs_source(&self) -> bool {
        matches!(self, GenMode::RealConfounding | GenMode::ContinuousReal)
    }
}

/// Everything needed to produce one semi-synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub mode: GenMode,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub gen: GenConfig,
    /// Confounding level of the stand-in source when no observed data is given.
    pub source_conf_p: f64,
}

/// Builds a dataset. `source` supplies observed rows (real modes) or X rows
/// (synthetic modes); without it a synthetic stand-in of size `n × p` is drawn.
pub fn generate_dataset(spec: &DatasetSpec, source: Option<&DataMatrix>, rng: &mut RngHandle) -> Result<SemiSynthOutput> {
    let gen = GenConfig {
        m_targets: spec.m,
        ..spec.gen.clone()
    };
    match spec.mode {
        GenMode::Synthetic | GenMode::ContinuousSynthetic => {
            let (x, names) = match source {
                Some(s) => {
                    let s = match s.coding() {
                        crate::data::Coding::ZeroOne => s.clone(),
                        crate::data::Coding::PlusMinus => crate::data::decode_binary(s)?,
                    };
                    (s.x().to_owned(), s.x_names().to_vec())
                }
                None => (synthetic_x(spec.n, spec.p, rng), default_x_names(spec.p)),
            };
            if spec.mode == GenMode::Synthetic {
                gen_synth_confounding(x.view(), &names, &gen, rng)
            } else {
                gen_continuous_synth(x.view(), &names, &gen, rng)
            }
        }
        GenMode::RealConfounding => {
            let owned;
            let src = match source {
                Some(s) => s,
                None => {
                    owned = synthetic_source(spec.n, spec.p, spec.m, spec.source_conf_p, rng)?;
                    &owned
                }
            };
            gen_real_confounding(src, &gen, rng)
        }
        GenMode::ContinuousReal => {
            let owned;
            let src = match source {
                Some(s) => s,
                None => {
                    let x = synthetic_x(spec.n, spec.p, rng);
                    let cfg = GenConfig {
                        conf_p: spec.source_conf_p,
                        k_parents: spec.p.min(2),
                        m_targets: spec.m,
                        ..GenConfig::default()
                    };
                    owned = gen_continuous_synth(x.view(), &default_x_names(spec.p), &cfg, rng)?.data;
                    &owned
                }
            };
            gen_continuous_real(src, &gen, rng)
        }
    }
}

/// 50 log-spaced thresholds from 1e-4 to 0.5.
pub fn default_thresholds() -> Vec<f64> {
    let (lo, hi) = (1e-4f64.ln(), 0.5f64.ln());
    (0..50).map(|i| (lo + (hi - lo) * i as f64 / 49.0).exp()).collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn add(&mut self, other: Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
    }

    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn check_shape(p_matrix: &[Vec<Option<f64>>], truth: &GroundTruthGraph) -> Result<()> {
    let ok = p_matrix.len() == truth.p() && p_matrix.iter().all(|r| r.len() == truth.m());
    if !ok {
        return Err(ScslError::ShapeMismatch(format!(
            "p-value matrix is {}x{}, truth is {}x{}",
            p_matrix.len(),
            p_matrix.first().map_or(0, Vec::len),
            truth.p(),
            truth.m()
        )));
    }
    Ok(())
}

/// Confusion counts with an edge drawn when its p-value is `<= threshold`.
/// Untested edges are never drawn.
pub fn confusion(p_matrix: &[Vec<Option<f64>>], truth: &GroundTruthGraph, threshold: f64) -> Result<Confusion> {
    check_shape(p_matrix, truth)?;
    let mut c = Confusion::default();
    for (j, row) in p_matrix.iter().enumerate() {
        for (k, p) in row.iter().enumerate() {
            let drawn = p.is_some_and(|p| p <= threshold);
            match (truth.has_edge(j, k), drawn) {
                (true, true) => c.tp += 1,
                (true, false) => c.fn_ += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
            }
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchMetrics {
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
    pub f1_at_threshold: f64,
    pub fpr_ratio: Vec<f64>,
    pub wall_seconds: f64,
}

pub fn compute_metrics(p_matrix: &[Vec<Option<f64>>], truth: &GroundTruthGraph, thresholds: &[f64]) -> Result<BenchMetrics> {
    check_shape(p_matrix, truth)?;
    if thresholds.windows(2).any(|w| !(w[0] < w[1])) || thresholds.iter().any(|t| !(*t > 0.0)) {
        return Err(ScslError::config("thresholds must be positive and strictly increasing"));
    }
    let mut tpr = Vec::with_capacity(thresholds.len());
    let mut fpr = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let c = confusion(p_matrix, truth, t)?;
        tpr.push(c.tpr());
        fpr.push(c.fpr());
    }
    let fpr_ratio = fpr.iter().zip(thresholds).map(|(f, t)| f / t).collect();
    Ok(BenchMetrics {
        thresholds: thresholds.to_vec(),
        tpr,
        fpr,
        f1_at_threshold: confusion(p_matrix, truth, F1_THRESHOLD)?.f1(),
        fpr_ratio,
        wall_seconds: 0.0,
    })
}

/// A grid sweep over sample sizes, node-set sizes, confounding levels and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub mode: GenMode,
    pub n: Vec<usize>,
    /// (|X|, |Y|) pairs.
    pub sizes: Vec<(usize, usize)>,
    pub conf_p: Vec<f64>,
    pub seeds: Vec<u64>,
    pub gen: GenConfig,
    pub source_conf_p: f64,
    pub discover: DiscoveryConfig,
    pub thresholds: Option<Vec<f64>>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            mode: GenMode::Synthetic,
            n: vec![],
            sizes: vec![],
            conf_p: vec![0.0],
            seeds: vec![],
            gen: GenConfig::default(),
            source_conf_p: 0.5,
            discover: DiscoveryConfig::default(),
            thresholds: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        if let Some(s) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(ScslError::config(format!("seed {s} listed more than once")));
        }
        if let Some(c) = self.conf_p.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(ScslError::config(format!("conf_p must be in [0,1], got {c}")));
        }
        if !(0.0..=1.0).contains(&self.source_conf_p) {
            return Err(ScslError::config("source_conf_p must be in [0,1]"));
        }
        if self.n.iter().any(|&n| n < 2) {
            return Err(ScslError::config("every n must be at least 2"));
        }
        if let Some((p, m)) = self.sizes.iter().find(|(p, m)| *p == 0 || *m == 0) {
            return Err(ScslError::config(format!("size ({p}, {m}) has an empty node set")));
        }
        if let Some(t) = &self.thresholds {
            if t.windows(2).any(|w| !(w[0] < w[1])) || t.iter().any(|v| !(*v > 0.0)) {
                return Err(ScslError::config("thresholds must be positive and strictly increasing"));
            }
        }
        Ok(())
    }

    /// All (n, p, m, conf_p, seed) combinations in a fixed order.
    pub fn cells(&self) -> Vec<(usize, usize, usize, f64, u64)> {
        let mut out = Vec::new();
        for &n in &self.n {
            for &(p, m) in &self.sizes {
                for &c in &self.conf_p {
                    for &s in &self.seeds {
                        out.push((n, p, m, c, s));
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub mode: GenMode,
    pub n: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub conf_p: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub metrics: Option<BenchMetrics>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mode: GenMode,
    pub conf_p: f64,
    pub n: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub f1: f64,
    pub wall_seconds: f64,
    pub failed_seeds: usize,
}

/// Generates and analyses one cell.
pub fn run_cell(
    cfg: &BenchConfig,
    cell: (usize, usize, usize, f64, u64),
    source: Option<&DataMatrix>,
) -> Result<(SemiSynthOutput, crate::discovery::DiscoveryReport, BenchMetrics)> {
    let (n, p, m, conf_p, seed) = cell;
    let spec = DatasetSpec {
        mode: cfg.mode,
        n,
        p,
        m,
        gen: GenConfig {
            conf_p,
            k_parents: cfg.gen.k_parents.min(p),
            ..cfg.gen.clone()
        },
        source_conf_p: cfg.source_conf_p,
    };
    let mut rng = RngHandle::new(seed).derive(&[n as u64, p as u64, m as u64, conf_p.to_bits()]);
    let out = generate_dataset(&spec, source, &mut rng)?;
    let dcfg = DiscoveryConfig {
        seed: crate::rng::derive_seed(cfg.discover.seed, &[seed]),
        ..cfg.discover.clone()
    };
    let start = Instant::now();
    let report = discover(&out.data, &dcfg)?;
    let thresholds = cfg.thresholds.clone().unwrap_or_else(default_thresholds);
    let mut metrics = compute_metrics(&report.p_matrix, &out.truth, &thresholds)?;
    metrics.wall_seconds = start.elapsed().as_secs_f64();
    Ok((out, report, metrics))
}

/// Runs every cell (in parallel over `workers`) and aggregates per
/// (n, size, conf_p) group. Failing cells are recorded and skipped.
pub fn run_bench(cfg: &BenchConfig, source: Option<&DataMatrix>, workers: usize) -> Result<(Vec<CellResult>, Vec<SummaryRow>)> {
    cfg.validate()?;
    if let Some(s) = source {
        if cfg.mode.needs_source() && (s.domain() == Domain::Continuous) != (cfg.mode == GenMode::ContinuousReal) {
            return Err(ScslError::config("source data domain does not match the generator mode"));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ScslError::config(format!("cannot start worker pool: {e}")))?;
    let cells = cfg.cells();
    let results: Vec<CellResult> = pool.install(|| {
        cells
            .par_iter()
            .map(|&cell| {
                let (n, p, m, conf_p, seed) = cell;
                let (metrics, error) = match run_cell(cfg, cell, source) {
                    Ok((_, _, metrics)) => (Some(metrics), None),
                    Err(e) => {
                        log::warn!("cell n={n} size={p}x{m} conf_p={conf_p} seed={seed} failed: {e}");
                        (None, Some(e.to_string()))
                    }
                };
                CellResult {
                    mode: cfg.mode,
                    n,
                    n_x: p,
                    n_y: m,
                    conf_p,
                    seed,
                    metrics,
                    error,
                }
            })
            .collect()
    });

    let mut summary: Vec<SummaryRow> = Vec::new();
    for chunk in results.chunk_by(|a, b| (a.n, a.n_x, a.n_y, a.conf_p.to_bits()) == (b.n, b.n_x, b.n_y, b.conf_p.to_bits())) {
        let ok: Vec<&BenchMetrics> = chunk.iter().filter_map(|c| c.metrics.as_ref()).collect();
        let mean = |f: &dyn Fn(&BenchMetrics) -> f64| {
            if ok.is_empty() {
                f64::NAN
            } else {
                ok.iter().map(|m| f(m)).sum::<f64>() / ok.len() as f64
            }
        };
        summary.push(SummaryRow {
            mode: cfg.mode,
            conf_p: chunk[0].conf_p,
            n: chunk[0].n,
            n_x: chunk[0].n_x,
            n_y: chunk[0].n_y,
            f1: mean(&|m| m.f1_at_threshold),
            wall_seconds: mean(&|m| m.wall_seconds),
            failed_seeds: chunk.len() - ok.len(),
        });
    }
    Ok((results, summary))
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("mode,conf_p,n,n_x,n_y,f1,wall_seconds,failed_seeds\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{:.4},{:.3},{}\n",
            r.mode.as_str(),
            r.conf_p,
            r.n,
            r.n_x,
            r.n_y,
            r.f1,
            r.wall_seconds,
            r.failed_seeds
        ));
    }
    out
}
