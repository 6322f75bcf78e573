//! Conditioning-subset search for a single candidate edge (X_j, Y_k).
//!
//! The edge p-value is the largest GCM p-value over the conditioning subsets
//! S ⊆ Y_{-k} that were evaluated. Subsets are proposed by one of four
//! strategies:
//!
//! * `Gso`: gradient descent on Bernoulli inclusion probabilities θ through a
//!   Gumbel-Softmax (binary concrete) relaxation, minimizing |T|; every
//!   iteration also evaluates the hard subset implied by the relaxed sample,
//!   and the final thresholded subset `{i : θ_i > 0.5}` is evaluated last.
//! * `Hybrid`: `q1` such iterations, then `q2` unvisited subsets drawn without
//!   replacement with probability proportional to
//!   `w_S = Π θ_i^[i∈S] (1-θ_i)^[i∉S]`.
//! * `NaiveRandom`: `q2` subsets drawn uniformly without replacement.
//! * `Exhaustive`: every subset, in bitmask order.
//!
//! In every mode the search stops as soon as an evaluated p-value exceeds
//! `alpha_stop`, reporting an edge p-value of 1.

use std::cmp::Ordering;
use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Result, ScslError};
use crate::gcm::{full_y_mask, gcm_pvalue, gcm_statistic, ResidualProducts};
use crate::model::{AmortizedModel, Target};
use crate::rng::RngHandle;
use rand::Rng;

/// θ is kept inside `[THETA_FLOOR, 1 - THETA_FLOOR]`.
pub const THETA_FLOOR: f64 = 1e-3;

/// Above this many conditioning candidates, weighted sampling falls back to
/// independent Bernoulli draws with duplicate rejection.
pub const ENUMERATION_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    Gso,
    Hybrid,
    NaiveRandom,
    Exhaustive,
}

impl SearchMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SearchMode::Gso => "gso",
            SearchMode::Hybrid => "hybrid",
            SearchMode::NaiveRandom => "naive_random",
            SearchMode::Exhaustive => "exhaustive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Relaxed-gradient iterations before weighted sampling (hybrid).
    pub q1: usize,
    /// Subsets sampled without replacement (hybrid stage 2, naive random).
    pub q2: usize,
    /// Relaxed-gradient iterations for pure GSO.
    pub q: usize,
    pub tau0: f64,
    pub tau_min: f64,
    pub tau_decay: f64,
    pub theta_lr: f64,
    /// Early-stopping level; `None` disables early stopping.
    pub alpha_stop: Option<f64>,
    pub mode: SearchMode,
    pub seed: u64,
    /// Keep a per-evaluation trace in the result.
    pub trace: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            q1: 200,
            q2: 200,
            q: 400,
            tau0: 1.0,
            tau_min: 0.1,
            tau_decay: 0.99,
            theta_lr: 0.05,
            alpha_stop: Some(0.3),
            mode: SearchMode::Hybrid,
            seed: 0,
            trace: false,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_min > 0.0 && self.tau0 >= self.tau_min && self.tau0.is_finite()) {
            return Err(ScslError::config("temperatures must satisfy tau0 >= tau_min > 0"));
        }
        if !(self.tau_decay > 0.0 && self.tau_decay <= 1.0) {
            return Err(ScslError::config("tau_decay must be in (0, 1]"));
        }
        if !(self.theta_lr > 0.0 && self.theta_lr.is_finite()) {
            return Err(ScslError::config("theta_lr must be positive"));
        }
        if let Some(a) = self.alpha_stop {
            if !(a > 0.0 && a <= 1.0) {
                return Err(ScslError::config("alpha_stop must be in (0, 1]"));
            }
        }
        Ok(())
    }

    /// Temperature used at iteration `t` (0-based).
    pub fn temperature(&self, t: usize) -> f64 {
        (self.tau0 * self.tau_decay.powi(t.min(i32::MAX as usize) as i32)).max(self.tau_min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub subset: String,
    #[serde(rename = "T")]
    pub statistic: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeResult {
    pub p_value: f64,
    pub best_subset: Option<Vec<bool>>,
    pub early_stopped: bool,
    pub n_evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<TraceRecord>>,
}

/// Mutable state of one edge search.
#[derive(Debug, Clone)]
pub struct SearchState {
    pub theta: Vec<f64>,
    pub tau: f64,
    /// Evaluated subsets with their (T, p), in evaluation order.
    pub visited: Vec<(Vec<bool>, f64, f64)>,
    index: HashMap<Vec<bool>, usize>,
    pub iteration: usize,
}

impl SearchState {
    pub fn new(d: usize, tau0: f64) -> Self {
        Self {
            theta: vec![0.5; d],
            tau: tau0,
            visited: Vec::new(),
            index: HashMap::new(),
            iteration: 0,
        }
    }

    pub fn is_visited(&self, subset: &[bool]) -> bool {
        self.index.contains_key(subset)
    }

    fn record(&mut self, subset: Vec<bool>, t: f64, p: f64) {
        self.index.insert(subset.clone(), self.visited.len());
        self.visited.push((subset, t, p));
    }
}

pub fn subset_bits(subset: &[bool]) -> String {
    subset.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn mask_to_subset(mask: u64, d: usize) -> Vec<bool> {
    (0..d).map(|i| (mask >> i) & 1 == 1).collect()
}

/// Binary-concrete relaxation with the temperature applied to both logits:
/// `S̃_i = σ((ln θ_i + g1_i - ln(1-θ_i) - g2_i) / τ)`.
pub fn gumbel_relax(theta: &[f64], g1: &[f64], g2: &[f64], tau: f64) -> Result<Vec<f64>> {
    let d = theta.len();
    for len in [g1.len(), g2.len()] {
        if len != d {
            return Err(ScslError::LengthMismatch { expected: d, got: len });
        }
    }
    if !(tau > 0.0) {
        return Err(ScslError::DomainViolation(format!("temperature must be positive, got {tau}")));
    }
    if let Some(t) = theta.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(ScslError::DomainViolation(format!("theta entry {t} not in (0,1)")));
    }
    Ok(theta
        .iter()
        .zip(g1.iter().zip(g2))
        .map(|(&t, (&a, &b))| crate::synthgen::sigmoid(((t.ln() + a) - ((1.0 - t).ln() + b)) / tau))
        .collect())
}

/// `∂S̃_i/∂θ_i` for the relaxation in [`gumbel_relax`], given its output.
pub fn gumbel_relax_jacobian(theta: &[f64], relaxed: &[f64], tau: f64) -> Vec<f64> {
    theta
        .iter()
        .zip(relaxed)
        .map(|(&t, &s)| s * (1.0 - s) / tau * (1.0 / t + 1.0 / (1.0 - t)))
        .collect()
}

/// `w_S = Π θ_i^[i∈S] (1-θ_i)^[i∉S]`, accumulated in log space.
pub fn subset_weight(theta: &[f64], subset: &[bool]) -> Result<f64> {
    log_subset_weight(theta, subset).map(f64::exp)
}

fn log_subset_weight(theta: &[f64], subset: &[bool]) -> Result<f64> {
    if theta.len() != subset.len() {
        return Err(ScslError::LengthMismatch {
            expected: theta.len(),
            got: subset.len(),
        });
    }
    Ok(theta
        .iter()
        .zip(subset)
        .map(|(&t, &s)| if s { t.ln() } else { (1.0 - t).ln() })
        .sum())
}

/// Cached linear predictors for both regressions of one edge, so that
/// evaluating a subset costs O(n·|Y_{-k}|).
#[derive(Debug, Clone)]
pub struct EdgeEvaluator {
    x_resp: Vec<f64>,
    y_resp: Vec<f64>,
    x_model: AmortizedModel,
    y_model: AmortizedModel,
    x_base: Vec<f64>,
    y_base: Vec<f64>,
    /// n × d contributions of Y_{-k} (column k of the X-model block removed).
    x_contrib: Array2<f64>,
    y_contrib: Array2<f64>,
}

impl EdgeEvaluator {
    /// `inputs` must be in model coding; `data` provides response-scale columns
    /// (it may be the same matrix).
    pub fn new(
        data: &DataMatrix,
        inputs: &DataMatrix,
        j: usize,
        k: usize,
        y_model: &AmortizedModel,
        x_model: &AmortizedModel,
    ) -> Result<Self> {
        if y_model.target != Target::Y(k) || x_model.target != Target::X(j) {
            return Err(ScslError::config(format!(
                "models ({:?}, {:?}) do not match edge (x{j}, y{k})",
                x_model.target, y_model.target
            )));
        }
        if data.n() != inputs.n() || data.p() != inputs.p() || data.m() != inputs.m() {
            return Err(ScslError::ShapeMismatch("data and model inputs differ in shape".into()));
        }
        let xd = x_model.decompose(inputs, None)?;
        let yd = y_model.decompose(inputs, Some(j))?;
        let x_cols = x_model.y_inputs();
        let keep: Vec<usize> = (0..x_cols.len()).filter(|&s| x_cols[s] != k).collect();
        let x_contrib = xd.contrib.select(ndarray::Axis(1), &keep);
        if x_contrib.ncols() != yd.contrib.ncols() {
            return Err(ScslError::ShapeMismatch("X- and Y-model masks disagree".into()));
        }
        Ok(Self {
            x_resp: data.x_response(j),
            y_resp: data.y_response(k),
            x_model: x_model.clone(),
            y_model: y_model.clone(),
            x_base: xd.base,
            y_base: yd.base,
            x_contrib,
            y_contrib: yd.contrib,
        })
    }

    pub fn n(&self) -> usize {
        self.x_resp.len()
    }

    /// Number of conditioning candidates, |Y_{-k}|.
    pub fn dim(&self) -> usize {
        self.y_contrib.ncols()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(ScslError::MaskShape {
                expected: self.dim(),
                got: len,
            });
        }
        Ok(())
    }

    fn residuals(&self, mask: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n();
        let (mut rx, mut ry, mut dx, mut dy) = (
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
            Vec::with_capacity(n),
        );
        for i in 0..n {
            let mut zx = self.x_base[i];
            let mut zy = self.y_base[i];
            let cx = self.x_contrib.row(i);
            let cy = self.y_contrib.row(i);
            for (s, &w) in mask.iter().enumerate() {
                zx += w * cx[s];
                zy += w * cy[s];
            }
            let (xh, dxh) = self.x_model.response(zx);
            let (yh, dyh) = self.y_model.response(zy);
            rx.push(self.x_resp[i] - xh);
            ry.push(self.y_resp[i] - yh);
            dx.push(dxh);
            dy.push(dyh);
        }
        (rx, ry, dx, dy)
    }

    /// Exact GCM statistic and p-value for a hard subset.
    pub fn hard(&self, subset: &[bool]) -> Result<(f64, f64)> {
        self.check_len(subset.len())?;
        let mask: Vec<f64> = subset.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let (rx, ry, _, _) = self.residuals(&mask);
        let r = ResidualProducts {
            values: rx.iter().zip(&ry).map(|(a, b)| a * b).collect(),
        };
        crate::gcm::statistic_and_pvalue(&r)
    }

    /// Relaxed statistic `T(S̃)` and `∂|T|/∂S̃`.
    pub fn soft(&self, soft_subset: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_len(soft_subset.len())?;
        let d = self.dim();
        let (rx, ry, dx, dy) = self.residuals(soft_subset);
        let r: Vec<f64> = rx.iter().zip(&ry).map(|(a, b)| a * b).collect();
        let products = ResidualProducts { values: r };
        let t = match gcm_statistic(&products) {
            Ok(t) => t,
            Err(ScslError::DegenerateVariance { value: 0.0 }) => return Ok((0.0, vec![0.0; d])),
            Err(e) => return Err(e),
        };
        let r = products.values;
        let n = r.len() as f64;
        let mean = r.iter().sum::<f64>() / n;
        let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sd = var.sqrt();
        let sign = if t >= 0.0 { 1.0 } else { -1.0 };
        let mut grad = vec![0.0; d];
        for i in 0..r.len() {
            // ∂T/∂R_i = √n (1/(nσ) − μ(R_i − μ)/(nσ³))
            let dt_dr = n.sqrt() * (1.0 / (n * sd) - mean * (r[i] - mean) / (n * sd * sd * sd));
            let cx = self.x_contrib.row(i);
            let cy = self.y_contrib.row(i);
            for s in 0..d {
                // R_i = rx·ry,  ∂rx/∂S̃ = −x̂' c_x,  ∂ry/∂S̃ = −ŷ' c_y
                let dr = -ry[i] * dx[i] * cx[s] - rx[i] * dy[i] * cy[s];
                grad[s] += sign * dt_dr * dr;
            }
        }
        Ok((t, grad))
    }

    /// `|T|` and its gradient with respect to θ through the relaxation.
    pub fn theta_gradient(&self, theta: &[f64], g1: &[f64], g2: &[f64], tau: f64) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let relaxed = gumbel_relax(theta, g1, g2, tau)?;
        let (t, gs) = self.soft(&relaxed)?;
        let jac = gumbel_relax_jacobian(theta, &relaxed, tau);
        let grad = gs.iter().zip(&jac).map(|(a, b)| a * b).collect();
        Ok((t.abs(), relaxed, grad))
    }
}

/// Relaxed statistic and `∂|T|/∂S̃` for one edge at a fractional subset.
pub fn relaxed_statistic_grad(
    data: &DataMatrix,
    j: usize,
    k: usize,
    soft_subset: &[f64],
    y_model: &AmortizedModel,
    x_model: &AmortizedModel,
) -> Result<(f64, Vec<f64>)> {
    let inputs = data.model_view()?;
    EdgeEvaluator::new(data, &inputs, j, k, y_model, x_model)?.soft(soft_subset)
}

enum Step {
    Continue,
    Stop,
}

struct Runner<'a> {
    eval: &'a EdgeEvaluator,
    cfg: &'a SearchConfig,
    state: SearchState,
    trace: Option<Vec<TraceRecord>>,
}

impl Runner<'_> {
    /// Evaluates `subset` unless already visited.
    fn visit(&mut self, subset: Vec<bool>) -> Result<Step> {
        if self.state.is_visited(&subset) {
            return Ok(Step::Continue);
        }
        let (t, p) = self.eval.hard(&subset)?;
        if let Some(tr) = self.trace.as_mut() {
            tr.push(TraceRecord {
                iter: self.state.iteration,
                subset: subset_bits(&subset),
                statistic: t,
                p,
            });
        }
        self.state.record(subset, t, p);
        match self.cfg.alpha_stop {
            Some(a) if p > a => Ok(Step::Stop),
            _ => Ok(Step::Continue),
        }
    }

    /// Relaxed-gradient iterations; each one evaluates the sampled hard subset.
    fn gradient_stage(&mut self, iterations: usize, rng: &mut RngHandle) -> Result<Step> {
        let d = self.eval.dim();
        if d == 0 {
            return self.visit(vec![]);
        }
        for t in 0..iterations {
            self.state.iteration = t;
            self.state.tau = self.cfg.temperature(t);
            let g1: Vec<f64> = (0..d).map(|_| rng.gumbel()).collect();
            let g2: Vec<f64> = (0..d).map(|_| rng.gumbel()).collect();
            let relaxed = gumbel_relax(&self.state.theta, &g1, &g2, self.state.tau)?;
            // S̃ > 1/2 exactly when the sampled Bernoulli(θ) bit is 1.
            let hard: Vec<bool> = relaxed.iter().map(|&s| s > 0.5).collect();
            if let Step::Stop = self.visit(hard)? {
                return Ok(Step::Stop);
            }
            let (_, grad_s) = self.eval.soft(&relaxed)?;
            let jac = gumbel_relax_jacobian(&self.state.theta, &relaxed, self.state.tau);
            for ((th, gs), jc) in self.state.theta.iter_mut().zip(&grad_s).zip(&jac) {
                *th = theta_step(*th, gs * jc, self.cfg.theta_lr);
            }
        }
        Ok(Step::Continue)
    }

    /// Draws up to `count` unvisited subsets without replacement with
    /// probability proportional to `w_S(theta)` and evaluates them in draw order.
    fn weighted_stage(&mut self, theta: &[f64], count: usize, start_iter: usize, rng: &mut RngHandle) -> Result<Step> {
        let d = theta.len();
        if count == 0 {
            return Ok(Step::Continue);
        }
        if d <= ENUMERATION_LIMIT {
            // Gumbel-top-k over log-weights is equivalent to sequential
            // proportional draws without replacement.
            let log_theta: Vec<f64> = theta.iter().map(|t| t.ln()).collect();
            let log_not: Vec<f64> = theta.iter().map(|t| (1.0 - t).ln()).collect();
            let mut keyed: Vec<(f64, u64)> = Vec::new();
            for mask in 0..(1u64 << d) {
                let subset = mask_to_subset(mask, d);
                let g = rng.gumbel();
                if self.state.is_visited(&subset) {
                    continue;
                }
                let lw: f64 = (0..d)
                    .map(|i| if (mask >> i) & 1 == 1 { log_theta[i] } else { log_not[i] })
                    .sum();
                keyed.push((lw + g, mask));
            }
            let by_key = |a: &(f64, u64), b: &(f64, u64)| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1));
            let take = count.min(keyed.len());
            if take < keyed.len() && take > 0 {
                keyed.select_nth_unstable_by(take - 1, by_key);
                keyed.truncate(take);
            }
            keyed.sort_by(by_key);
            for (i, (_, mask)) in keyed.into_iter().take(take).enumerate() {
                self.state.iteration = start_iter + i;
                if let Step::Stop = self.visit(mask_to_subset(mask, d))? {
                    return Ok(Step::Stop);
                }
            }
        } else {
            let mut drawn = 0;
            let mut attempts = 0;
            while drawn < count && attempts < 50 * count {
                attempts += 1;
                let subset: Vec<bool> = theta.iter().map(|&t| rng.random_bool(t)).collect();
                if self.state.is_visited(&subset) {
                    continue;
                }
                self.state.iteration = start_iter + drawn;
                drawn += 1;
                if let Step::Stop = self.visit(subset)? {
                    return Ok(Step::Stop);
                }
            }
        }
        Ok(Step::Continue)
    }
}

/// One projected gradient step on a single θ coordinate.
pub fn theta_step(theta: f64, grad: f64, lr: f64) -> f64 {
    (theta - lr * grad).clamp(THETA_FLOOR, 1.0 - THETA_FLOOR)
}

/// Searches conditioning subsets for one edge with a pre-built evaluator.
pub fn search_with(eval: &EdgeEvaluator, cfg: &SearchConfig, rng: &mut RngHandle) -> Result<EdgeResult> {
    cfg.validate()?;
    let d = eval.dim();
    if cfg.mode == SearchMode::Exhaustive && d > 62 {
        return Err(ScslError::config(format!("exhaustive search over 2^{d} subsets is not possible")));
    }
    let mut run = Runner {
        eval,
        cfg,
        state: SearchState::new(d, cfg.tau0),
        trace: cfg.trace.then(Vec::new),
    };

    let step = match cfg.mode {
        SearchMode::Gso => match run.gradient_stage(cfg.q, rng)? {
            Step::Stop => Step::Stop,
            Step::Continue => {
                run.state.iteration = cfg.q;
                let hard: Vec<bool> = run.state.theta.iter().map(|&t| t > 0.5).collect();
                run.visit(hard)?
            }
        },
        SearchMode::Hybrid => match run.gradient_stage(cfg.q1, rng)? {
            Step::Stop => Step::Stop,
            Step::Continue => {
                let theta = run.state.theta.clone();
                if d == 0 {
                    run.visit(vec![])?
                } else {
                    run.weighted_stage(&theta, cfg.q2, cfg.q1, rng)?
                }
            }
        },
        SearchMode::NaiveRandom => {
            if d == 0 {
                run.visit(vec![])?
            } else {
                run.weighted_stage(&vec![0.5; d], cfg.q2, 0, rng)?
            }
        }
        SearchMode::Exhaustive => {
            let mut step = Step::Continue;
            for mask in 0..(1u64 << d) {
                run.state.iteration = mask as usize;
                if let Step::Stop = run.visit(mask_to_subset(mask, d))? {
                    step = Step::Stop;
                    break;
                }
            }
            step
        }
    };

    let n_evaluations = run.state.visited.len();
    let trace = run.trace;
    if let Step::Stop = step {
        return Ok(EdgeResult {
            p_value: 1.0,
            best_subset: None,
            early_stopped: true,
            n_evaluations,
            trace,
        });
    }
    let best = run.state.visited.iter().max_by(|a, b| {
        a.2.partial_cmp(&b.2)
            .unwrap_or(Ordering::Equal)
            // ties go to the lexicographically smallest subset
            .then_with(|| b.0.cmp(&a.0))
    });
    let (p_value, best_subset) = match best {
        Some((s, _, p)) => (*p, Some(s.clone())),
        None => (1.0, None),
    };
    Ok(EdgeResult {
        p_value,
        best_subset,
        early_stopped: false,
        n_evaluations,
        trace,
    })
}

/// Finds a conditioning subset maximizing the GCM p-value for edge (X_j, Y_k).
pub fn search_edge(
    data: &DataMatrix,
    j: usize,
    k: usize,
    y_model: &AmortizedModel,
    x_model: &AmortizedModel,
    cfg: &SearchConfig,
    rng: &mut RngHandle,
) -> Result<EdgeResult> {
    let inputs = data.model_view()?;
    let eval = EdgeEvaluator::new(data, &inputs, j, k, y_model, x_model)?;
    search_with(&eval, cfg, rng)
}

/// Maps a subset over Y_{-k} to the X-model's full-length mask.
pub fn x_model_mask(subset: &[bool], k: usize) -> Vec<bool> {
    full_y_mask(subset, k)
}

/// p-value of a hard subset, exposed for callers that drive their own loop.
pub fn subset_pvalue(eval: &EdgeEvaluator, subset: &[bool]) -> Result<f64> {
    eval.hard(subset).map(|(t, _)| gcm_pvalue(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::recode_binary;
    use crate::data::Domain;
    use crate::gcm::gcm_test;
    use crate::model::{train_x_model, train_y_model, TrainConfig};
    use crate::synthgen::{gen_synth_confounding, synthetic_x, default_x_names, GenConfig};
    use proptest::prelude::*;

    fn instance(seed: u64, p: usize, m: usize, n: usize) -> (DataMatrix, Vec<AmortizedModel>, Vec<AmortizedModel>) {
        let mut rng = RngHandle::new(seed);
        let x = synthetic_x(n, p, &mut rng);
        let cfg = GenConfig {
            conf_p: 0.5,
            m_targets: m,
            ..GenConfig::default()
        };
        let out = gen_synth_confounding(x.view(), &default_x_names(p), &cfg, &mut rng).unwrap();
        let inputs = recode_binary(&out.data).unwrap();
        let tc = TrainConfig {
            n_epochs: 10,
            ..TrainConfig::default()
        };
        let ym = (0..m).map(|k| train_y_model(&inputs, k, &tc, &mut rng.derive(&[1, k as u64])).unwrap()).collect();
        let xm = (0..p).map(|j| train_x_model(&inputs, j, &tc, &mut rng.derive(&[2, j as u64])).unwrap()).collect();
        (out.data, ym, xm)
    }

    #[test]
    fn relax_examples() {
        let s = gumbel_relax(&[0.5], &[0.3], &[0.3], 0.01).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-15);
        let s = gumbel_relax(&[0.8], &[0.0], &[0.0], 1.0).unwrap();
        assert!((s[0] - 0.8).abs() < 1e-12);
        let s = gumbel_relax(&[0.6], &[0.1], &[0.0], 1e-4).unwrap();
        assert!(s[0] > 1.0 - 1e-12);
        assert!(matches!(gumbel_relax(&[1.0], &[0.0], &[0.0], 1.0), Err(ScslError::DomainViolation(_))));
        assert!(matches!(gumbel_relax(&[0.0], &[0.0], &[0.0], 1.0), Err(ScslError::DomainViolation(_))));
    }

    #[test]
    fn subset_weight_examples() {
        let w = subset_weight(&[0.8, 0.3], &[true, false]).unwrap();
        assert!((w - 0.56).abs() < 1e-12);
        let w = subset_weight(&[0.5; 6], &[true, false, true, true, false, false]).unwrap();
        assert!((w - 0.5f64.powi(6)).abs() < 1e-15);
        assert!(subset_weight(&[0.5], &[true, false]).is_err());
    }

    proptest! {
        #[test]
        fn subset_weights_sum_to_one(theta in prop::collection::vec(0.001f64..0.999, 1..=10)) {
            let d = theta.len();
            let total: f64 = (0..(1u64 << d)).map(|mask| subset_weight(&theta, &mask_to_subset(mask, d)).unwrap()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn theta_step_is_clamped_descent(t in 0.001f64..0.999, g in -100.0f64..100.0, lr in 0.001f64..1.0) {
            let next = theta_step(t, g, lr);
            prop_assert_eq!(next, (t - lr * g).clamp(THETA_FLOOR, 1.0 - THETA_FLOOR));
        }
    }

    #[test]
    fn annealing_schedule() {
        let cfg = SearchConfig::default();
        let mut prev = f64::INFINITY;
        for t in 0..1000 {
            let tau = cfg.temperature(t);
            assert_eq!(tau, (1.0 * 0.99f64.powi(t as i32)).max(0.1));
            assert!(tau <= prev);
            prev = tau;
        }
    }

    #[test]
    fn zero_models_have_zero_gradient() {
        let (data, _, _) = instance(1, 3, 3, 200);
        let ym = AmortizedModel::zeros(Target::Y(1), Domain::Binary, 3, 3);
        let xm = AmortizedModel::zeros(Target::X(0), Domain::Binary, 3, 3);
        let (_, g) = relaxed_statistic_grad(&data, 0, 1, &[0.3, 0.7], &ym, &xm).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn integral_relaxation_matches_gcm_test() {
        let (data, ym, xm) = instance(2, 4, 4, 400);
        for mask in 0..8u64 {
            let subset = mask_to_subset(mask, 3);
            let soft: Vec<f64> = subset.iter().map(|&b| f64::from(u8::from(b))).collect();
            let (t, _) = relaxed_statistic_grad(&data, 1, 2, &soft, &ym[2], &xm[1]).unwrap();
            let exact = gcm_test(&data, 1, 2, &subset, &ym[2], &xm[1]).unwrap();
            assert!((t - exact.statistic).abs() <= 1e-12 * exact.statistic.abs().max(1.0));
        }
    }

    #[test]
    fn soft_gradient_matches_finite_differences() {
        let (data, ym, xm) = instance(3, 4, 4, 300);
        let inputs = data.model_view().unwrap();
        let eval = EdgeEvaluator::new(&data, &inputs, 0, 3, &ym[3], &xm[0]).unwrap();
        let s = [0.2, 0.55, 0.9];
        let (_, g) = eval.soft(&s).unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let mut up = s;
            let mut dn = s;
            up[i] += h;
            dn[i] -= h;
            let fd = (eval.soft(&up).unwrap().0.abs() - eval.soft(&dn).unwrap().0.abs()) / (2.0 * h);
            let rel = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-5);
            assert!(rel <= 1e-4, "coord {i}: fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn singleton_search_space() {
        let (data, ym, xm) = instance(4, 3, 1, 300);
        for mode in [SearchMode::Gso, SearchMode::Hybrid, SearchMode::NaiveRandom, SearchMode::Exhaustive] {
            let cfg = SearchConfig {
                mode,
                alpha_stop: None,
                ..SearchConfig::default()
            };
            let r = search_edge(&data, 0, 0, &ym[0], &xm[0], &cfg, &mut RngHandle::new(1)).unwrap();
            let exact = gcm_test(&data, 0, 0, &[], &ym[0], &xm[0]).unwrap();
            assert_eq!(r.n_evaluations, 1);
            assert!((r.p_value - exact.p_value).abs() <= 1e-12);
            assert_eq!(r.best_subset, Some(vec![]));
        }
    }

    #[test]
    fn hybrid_exhausting_budget_equals_exhaustive() {
        let (data, ym, xm) = instance(5, 4, 5, 400);
        let ex = SearchConfig {
            mode: SearchMode::Exhaustive,
            alpha_stop: None,
            ..SearchConfig::default()
        };
        let hy = SearchConfig {
            mode: SearchMode::Hybrid,
            q1: 0,
            q2: 16,
            alpha_stop: None,
            ..SearchConfig::default()
        };
        for (j, k) in [(0, 0), (1, 3), (3, 4)] {
            let a = search_edge(&data, j, k, &ym[k], &xm[j], &ex, &mut RngHandle::new(9)).unwrap();
            let b = search_edge(&data, j, k, &ym[k], &xm[j], &hy, &mut RngHandle::new(10)).unwrap();
            assert_eq!(a.n_evaluations, 16);
            assert_eq!(b.n_evaluations, 16);
            assert_eq!(a.p_value, b.p_value);
            assert_eq!(a.best_subset, b.best_subset);
        }
    }

    #[test]
    fn no_duplicate_evaluations_and_max_soundness() {
        let (data, ym, xm) = instance(6, 4, 6, 300);
        for mode in [SearchMode::Gso, SearchMode::Hybrid, SearchMode::NaiveRandom] {
            let cfg = SearchConfig {
                mode,
                q: 60,
                q1: 30,
                q2: 20,
                alpha_stop: None,
                trace: true,
                ..SearchConfig::default()
            };
            let r = search_edge(&data, 2, 1, &ym[1], &xm[2], &cfg, &mut RngHandle::new(3)).unwrap();
            let trace = r.trace.unwrap();
            let mut seen = std::collections::HashSet::new();
            for rec in &trace {
                assert!(seen.insert(rec.subset.clone()), "duplicate {}", rec.subset);
                assert!(r.p_value >= rec.p);
            }
            assert_eq!(trace.len(), r.n_evaluations);
            assert!(trace.iter().any(|rec| rec.p == r.p_value));
        }
    }

    #[test]
    fn exhaustive_ignores_seed() {
        let (data, ym, xm) = instance(7, 3, 4, 300);
        let cfg = SearchConfig {
            mode: SearchMode::Exhaustive,
            alpha_stop: None,
            ..SearchConfig::default()
        };
        let a = search_edge(&data, 0, 1, &ym[1], &xm[0], &cfg, &mut RngHandle::new(1)).unwrap();
        let b = search_edge(&data, 0, 1, &ym[1], &xm[0], &cfg, &mut RngHandle::new(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn early_stop_reports_one() {
        let (data, ym, xm) = instance(8, 3, 4, 300);
        let cfg = SearchConfig {
            mode: SearchMode::Exhaustive,
            alpha_stop: Some(1e-300),
            ..SearchConfig::default()
        };
        let r = search_edge(&data, 0, 1, &ym[1], &xm[0], &cfg, &mut RngHandle::new(1)).unwrap();
        assert!(r.early_stopped);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.best_subset, None);
    }

    #[test]
    fn large_dimension_falls_back_to_bernoulli_draws() {
        let (data, ym, xm) = instance(9, 2, ENUMERATION_LIMIT + 3, 100);
        let cfg = SearchConfig {
            mode: SearchMode::Hybrid,
            q1: 3,
            q2: 10,
            alpha_stop: None,
            ..SearchConfig::default()
        };
        let r = search_edge(&data, 0, 0, &ym[0], &xm[0], &cfg, &mut RngHandle::new(1)).unwrap();
        assert!(r.n_evaluations >= 10 && r.n_evaluations <= 13);
    }
}
