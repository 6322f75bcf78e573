//! Full pipeline: train every amortized model once, search each candidate
//! edge, assemble the p-value matrix and apply Benjamini-Hochberg.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Domain};
use crate::error::{Result, ScslError};
use crate::model::{train_x_model, train_y_model, AmortizedModel, Target, TrainConfig};
use crate::rng::RngHandle;
use crate::search::{search_with, EdgeEvaluator, EdgeResult, SearchConfig};

const TAG_TRAIN_Y: u64 = 0x7931;
const TAG_TRAIN_X: u64 = 0x7832;
const TAG_SEARCH: u64 = 0x5345;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoveryConfig {
    pub train: TrainConfig,
    pub search: SearchConfig,
    pub fdr_q: f64,
    /// Edges (j, k) to test; `None` tests all p×m pairs.
    pub edge_filter: Option<Vec<(usize, usize)>>,
    pub parallelism: usize,
    pub seed: u64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            search: SearchConfig::default(),
            fdr_q: 0.05,
            edge_filter: None,
            parallelism: 1,
            seed: 0,
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self, p: usize, m: usize) -> Result<()> {
        if !(self.fdr_q > 0.0 && self.fdr_q < 1.0) {
            return Err(ScslError::config(format!("fdr_q must be in (0, 1), got {}", self.fdr_q)));
        }
        if self.parallelism == 0 {
            return Err(ScslError::config("parallelism must be at least 1"));
        }
        if let Some(edges) = &self.edge_filter {
            if let Some((j, k)) = edges.iter().find(|(j, k)| *j >= p || *k >= m) {
                return Err(ScslError::config(format!("edge ({j}, {k}) outside {p}x{m}")));
            }
        }
        self.train.validate()?;
        self.search.validate()
    }

    fn edges(&self, p: usize, m: usize) -> Vec<(usize, usize)> {
        match &self.edge_filter {
            Some(e) => {
                let mut e = e.clone();
                e.sort_unstable();
                e.dedup();
                e
            }
            None => (0..p).flat_map(|j| (0..m).map(move |k| (j, k))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub j: usize,
    pub k: usize,
    pub x_name: String,
    pub y_name: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub result: Option<EdgeResult>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub target: Target,
    pub name: String,
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub train_seconds: f64,
    pub search_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryReport {
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    /// `None` marks an untested (or failed) edge.
    pub p_matrix: Vec<Vec<Option<f64>>>,
    pub edge_results: Vec<EdgeReport>,
    pub rejections: Vec<(usize, usize)>,
    pub fdr_q: f64,
    pub models_meta: Vec<ModelMeta>,
    pub n_trainings: usize,
    /// Kept out of the JSON report so that it stays reproducible.
    #[serde(skip)]
    pub timing: Timing,
}

impl DiscoveryReport {
    pub fn failed_edges(&self) -> impl Iterator<Item = &EdgeReport> {
        self.edge_results.iter().filter(|e| e.error.is_some())
    }

    /// Rows labelled by X names, columns by Y names, `NA` for untested edges.
    pub fn p_matrix_csv(&self) -> String {
        let mut out = String::new();
        out.push('x');
        for name in &self.y_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for (name, row) in self.x_names.iter().zip(&self.p_matrix) {
            out.push_str(name);
            for v in row {
                out.push(',');
                match v {
                    Some(p) => out.push_str(&format!("{p:e}")),
                    None => out.push_str("NA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// One fitted model per X column and per Y column.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub y_models: Vec<AmortizedModel>,
    pub x_models: Vec<AmortizedModel>,
    pub n_trainings: usize,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ScslError::config(format!("cannot start worker pool: {e}")))
}

/// Trains the m Y-models and p X-models. `inputs` must be in model coding.
pub fn train_models(inputs: &DataMatrix, cfg: &DiscoveryConfig) -> Result<TrainedModels> {
    let (p, m) = (inputs.p(), inputs.m());
    let counter = AtomicUsize::new(0);
    let targets: Vec<Target> = (0..m).map(Target::Y).chain((0..p).map(Target::X)).collect();
    let fitted: Vec<Result<AmortizedModel>> = pool(cfg.parallelism.min(p + m).max(1))?.install(|| {
        targets
            .par_iter()
            .map(|t| {
                counter.fetch_add(1, AtomicOrdering::Relaxed);
                let (tag, idx) = match *t {
                    Target::Y(k) => (TAG_TRAIN_Y, k),
                    Target::X(j) => (TAG_TRAIN_X, j),
                };
                let mut rng = RngHandle::new(cfg.seed).derive(&[tag, cfg.train.seed, idx as u64]);
                match *t {
                    Target::Y(k) => train_y_model(inputs, k, &cfg.train, &mut rng),
                    Target::X(j) => train_x_model(inputs, j, &cfg.train, &mut rng),
                }
            })
            .collect()
    });
    let mut fitted = fitted.into_iter().collect::<Result<Vec<_>>>()?;
    let x_models = fitted.split_off(m);
    Ok(TrainedModels {
        y_models: fitted,
        x_models,
        n_trainings: counter.into_inner(),
    })
}

/// Runs the edge searches and BH with already trained models.
pub fn discover_with_models(data: &DataMatrix, models: &TrainedModels, cfg: &DiscoveryConfig) -> Result<DiscoveryReport> {
    let (p, m) = (data.p(), data.m());
    cfg.validate(p, m)?;
    if models.y_models.len() != m || models.x_models.len() != p {
        return Err(ScslError::ShapeMismatch(format!(
            "expected {m} Y-models and {p} X-models, got {} and {}",
            models.y_models.len(),
            models.x_models.len()
        )));
    }
    let start = Instant::now();
    let inputs = data.model_view()?;
    let edges = cfg.edges(p, m);
    let results: Vec<Result<EdgeResult>> = pool(cfg.parallelism)?.install(|| {
        edges
            .par_iter()
            .map(|&(j, k)| {
                let mut rng = RngHandle::new(cfg.seed).derive(&[TAG_SEARCH, cfg.search.seed, j as u64, k as u64]);
                let eval = EdgeEvaluator::new(data, &inputs, j, k, &models.y_models[k], &models.x_models[j])?;
                search_with(&eval, &cfg.search, &mut rng)
            })
            .collect()
    });

    let mut p_matrix = vec![vec![None; m]; p];
    let mut edge_results = Vec::with_capacity(edges.len());
    for (&(j, k), res) in edges.iter().zip(results) {
        let (result, error) = match res {
            Ok(r) => {
                p_matrix[j][k] = Some(r.p_value);
                (Some(r), None)
            }
            Err(e) => {
                log::warn!("edge ({}, {}) failed: {e}", data.x_names()[j], data.y_names()[k]);
                (None, Some(e.to_string()))
            }
        };
        edge_results.push(EdgeReport {
            j,
            k,
            x_name: data.x_names()[j].clone(),
            y_name: data.y_names()[k].clone(),
            result,
            error,
        });
    }

    let tested: Vec<(usize, usize, f64)> = edge_results
        .iter()
        .filter_map(|e| e.result.as_ref().map(|r| (e.j, e.k, r.p_value)))
        .collect();
    let pv: Vec<f64> = tested.iter().map(|t| t.2).collect();
    let mut rejections: Vec<(usize, usize)> = bh_procedure(&pv, cfg.fdr_q)?
        .into_iter()
        .map(|i| (tested[i].0, tested[i].1))
        .collect();
    rejections.sort_unstable();

    let models_meta = models
        .y_models
        .iter()
        .chain(&models.x_models)
        .map(|mdl| ModelMeta {
            target: mdl.target,
            name: model_file_name(mdl.target, data),
            final_loss: mdl.training_meta.epoch_losses.last().copied(),
        })
        .collect();

    let search_seconds = start.elapsed().as_secs_f64();
    Ok(DiscoveryReport {
        x_names: data.x_names().to_vec(),
        y_names: data.y_names().to_vec(),
        p_matrix,
        edge_results,
        rejections,
        fdr_q: cfg.fdr_q,
        models_meta,
        n_trainings: models.n_trainings,
        timing: Timing {
            train_seconds: 0.0,
            search_seconds,
            total_seconds: search_seconds,
        },
    })
}

/// File name used when a model is cached next to a report.
pub fn model_file_name(target: Target, data: &DataMatrix) -> String {
    match target {
        Target::Y(k) => format!("model_y_{}.json", data.y_names()[k]),
        Target::X(j) => format!("model_x_{}.json", data.x_names()[j]),
    }
}

pub fn discover(data: &DataMatrix, cfg: &DiscoveryConfig) -> Result<DiscoveryReport> {
    cfg.validate(data.p(), data.m())?;
    let start = Instant::now();
    let inputs = data.model_view()?;
    let models = train_models(&inputs, cfg)?;
    let train_seconds = start.elapsed().as_secs_f64();
    log::info!("trained {} models in {train_seconds:.2}s", models.n_trainings);
    let mut report = discover_with_models(data, &models, cfg)?;
    report.timing.train_seconds = train_seconds;
    report.timing.total_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Benjamini-Hochberg step-up procedure. Returns the rejected indices in
/// ascending order.
pub fn bh_procedure(p_values: &[f64], q: f64) -> Result<Vec<usize>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(ScslError::config(format!("FDR level must be in (0, 1), got {q}")));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(ScslError::DomainViolation(format!("p-value {p} outside [0, 1]")));
    }
    let total = p_values.len() as f64;
    let mut order: Vec<usize> = (0..p_values.len()).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).unwrap_or(Ordering::Equal));
    let cutoff = order
        .iter()
        .enumerate()
        .rev()
        .find(|(r, &i)| p_values[i] <= (*r as f64 + 1.0) * q / total)
        .map_or(0, |(r, _)| r + 1);
    let mut rejected = order[..cutoff].to_vec();
    rejected.sort_unstable();
    Ok(rejected)
}

fn chi_square_yates(x: &[f64], y: &[f64]) -> f64 {
    let mut counts = [[0.0f64; 2]; 2];
    for (&a, &b) in x.iter().zip(y) {
        counts[(a > 0.5) as usize][(b > 0.5) as usize] += 1.0;
    }
    let n = x.len() as f64;
    let rows = [counts[0][0] + counts[0][1], counts[1][0] + counts[1][1]];
    let cols = [counts[0][0] + counts[1][0], counts[0][1] + counts[1][1]];
    if rows.contains(&0.0) || cols.contains(&0.0) {
        return 1.0;
    }
    let mut stat = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let e = rows[a] * cols[b] / n;
            let dev = (counts[a][b] - e).abs();
            let adj = dev - dev.min(0.5);
            stat += adj * adj / e;
        }
    }
    libm::erfc((stat / 2.0).sqrt()).clamp(0.0, 1.0)
}

/// Marginal chi-square independence test (Yates-corrected) for every pair.
pub fn marginal_pvalues(data: &DataMatrix) -> Result<Vec<Vec<f64>>> {
    if data.domain() != Domain::Binary {
        return Err(ScslError::DomainViolation("marginal tests need binary data".into()));
    }
    let ys: Vec<Vec<f64>> = (0..data.m()).map(|k| data.y_response(k)).collect();
    Ok((0..data.p())
        .map(|j| {
            let x = data.x_response(j);
            ys.iter().map(|y| chi_square_yates(&x, y)).collect()
        })
        .collect())
}
