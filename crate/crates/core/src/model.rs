//! Amortized mask-conditioned regressors.
//!
//! One generalized linear model is trained per target variable. During
//! mini-batch training, conditioning variables are hidden at random (value
//! multiplied by a Bernoulli mask bit, and for Y-targets one X column dropped
//! uniformly at random) so that the single fitted model can later be queried
//! for any conditioning subset.
//!
//! Binary data is modelled on the ±1 coding with a logistic link; masked
//! inputs become 0. Continuous data uses an identity link, and the mask bits
//! themselves are extra inputs so that a masked value can be told apart from an
//! observed zero.

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Domain};
use crate::error::{Result, ScslError};
use crate::rng::RngHandle;
use crate::synthgen::{log_sigmoid, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Model of Y_k given X_{-j} and a subset of Y_{-k}.
    Y(usize),
    /// Model of X_j given X_{-j} and a subset of Y.
    X(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFeature {
    /// Masked value of X column `j`.
    X(usize),
    /// Masked value of Y column `k`.
    Y(usize),
    /// Mask indicator for X column `j`.
    XMask(usize),
    /// Mask indicator for Y column `k`.
    YMask(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub n_epochs: usize,
    pub batch_size: usize,
    /// Initial step size; epoch `e` (0-based) uses `learning_rate / sqrt(e + 1)`.
    pub learning_rate: f64,
    /// Probability that a conditioning Y is kept (unmasked) in a batch.
    pub p_mask: f64,
    pub l2_lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_epochs: 50,
            batch_size: 128,
            learning_rate: 0.1,
            p_mask: 0.5,
            l2_lambda: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(ScslError::config("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ScslError::config("learning_rate must be positive"));
        }
        if !(0.0..=1.0).contains(&self.p_mask) {
            return Err(ScslError::config("p_mask must be in [0,1]"));
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(ScslError::config("l2_lambda must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub n_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub p_mask: f64,
    pub seed: u64,
    pub rng: String,
    /// Mean mini-batch loss (including the penalty) per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Conditioning request for one prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskState {
    /// One entry per Y input of the model; `true` means the Y is conditioned on.
    pub y_mask: Vec<bool>,
    /// X column left out of the conditioning set (required for Y-targets).
    pub x_excluded: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmortizedModel {
    pub target: Target,
    pub domain: Domain,
    pub input_layout: Vec<InputFeature>,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2_lambda: f64,
    pub training_meta: TrainingMeta,
}

/// Per-row pieces of the linear predictor for a fixed excluded X column:
/// `z_i = base_i + Σ_s mask_s · contrib[i, s]`.
#[derive(Debug, Clone)]
pub struct LinearDecomposition {
    pub base: Vec<f64>,
    pub contrib: Array2<f64>,
}

/// Index ranges of the layout blocks, derived from the target and shape.
#[derive(Debug, Clone, Copy)]
struct Blocks {
    p: usize,
    d: usize,
    indicators: bool,
}

impl Blocks {
    fn x(&self, l: usize) -> usize {
        l
    }
    fn y(&self, s: usize) -> usize {
        self.p + s
    }
    fn xm(&self, l: usize) -> usize {
        self.p + self.d + l
    }
    fn ym(&self, s: usize) -> usize {
        2 * self.p + self.d + s
    }
    fn len(&self) -> usize {
        if self.indicators {
            2 * (self.p + self.d)
        } else {
            self.p + self.d
        }
    }
}

fn y_columns(target: Target, m: usize) -> Vec<usize> {
    match target {
        Target::Y(k) => (0..m).filter(|&c| c != k).collect(),
        Target::X(_) => (0..m).collect(),
    }
}

fn build_layout(target: Target, domain: Domain, p: usize, m: usize) -> Vec<InputFeature> {
    let ycols = y_columns(target, m);
    let mut layout: Vec<InputFeature> = (0..p).map(InputFeature::X).collect();
    layout.extend(ycols.iter().map(|&c| InputFeature::Y(c)));
    if domain == Domain::Continuous {
        layout.extend((0..p).map(InputFeature::XMask));
        layout.extend(ycols.iter().map(|&c| InputFeature::YMask(c)));
    }
    layout
}

impl AmortizedModel {
    /// Untrained model with zero weights.
    pub fn zeros(target: Target, domain: Domain, p: usize, m: usize) -> Self {
        let input_layout = build_layout(target, domain, p, m);
        Self {
            target,
            domain,
            weights: vec![0.0; input_layout.len()],
            input_layout,
            bias: 0.0,
            l2_lambda: 0.0,
            training_meta: TrainingMeta {
                n_epochs: 0,
                batch_size: 0,
                learning_rate: 0.0,
                p_mask: 0.0,
                seed: 0,
                rng: crate::rng::RNG_ALGORITHM.to_string(),
                epoch_losses: vec![],
            },
        }
    }

    fn blocks(&self) -> Blocks {
        let p = self
            .input_layout
            .iter()
            .filter(|f| matches!(f, InputFeature::X(_)))
            .count();
        let d = self
            .input_layout
            .iter()
            .filter(|f| matches!(f, InputFeature::Y(_)))
            .count();
        Blocks {
            p,
            d,
            indicators: self.domain == Domain::Continuous,
        }
    }

    /// Number of X columns the model was built for.
    pub fn n_x(&self) -> usize {
        self.blocks().p
    }

    /// Length of the Y mask this model expects.
    pub fn y_mask_len(&self) -> usize {
        self.blocks().d
    }

    /// Data columns of Y in mask order.
    pub fn y_inputs(&self) -> Vec<usize> {
        self.input_layout
            .iter()
            .filter_map(|f| match f {
                InputFeature::Y(c) => Some(*c),
                _ => None,
            })
            .collect()
    }

    fn check_shape(&self) -> Result<()> {
        if self.weights.len() != self.input_layout.len() || self.blocks().len() != self.input_layout.len() {
            return Err(ScslError::ShapeMismatch(format!(
                "model has {} weights for a layout of {} features",
                self.weights.len(),
                self.input_layout.len()
            )));
        }
        Ok(())
    }

    /// Resolves which X column is dropped for this query.
    fn resolve_excluded(&self, x_excluded: Option<usize>) -> Result<usize> {
        let p = self.n_x();
        match (self.target, x_excluded) {
            (Target::X(j), None) => Ok(j),
            (Target::X(j), Some(e)) if e == j => Ok(j),
            (Target::X(j), Some(e)) => Err(ScslError::config(format!(
                "X-model for column {j} cannot exclude column {e}"
            ))),
            (Target::Y(_), Some(e)) if e < p => Ok(e),
            (Target::Y(_), Some(e)) => Err(ScslError::config(format!("x_excluded {e} out of range (p = {p})"))),
            (Target::Y(_), None) => Err(ScslError::config("Y-model predictions need x_excluded")),
        }
    }

    /// Part of the logit that does not depend on the Y mask.
    fn base_logit(&self, x_row: ArrayView1<'_, f64>, excluded: usize) -> f64 {
        let b = self.blocks();
        let mut z = self.bias;
        for l in 0..b.p {
            if l != excluded {
                z += self.weights[b.x(l)] * x_row[l];
            }
        }
        if b.indicators {
            for l in 0..b.p {
                if l != excluded {
                    z += self.weights[b.xm(l)];
                }
            }
        }
        z
    }

    /// Coefficient multiplying mask entry `s` for this row.
    fn mask_coef(&self, y_row: ArrayView1<'_, f64>, s: usize, col: usize) -> f64 {
        let b = self.blocks();
        let c = self.weights[b.y(s)] * y_row[col];
        if b.indicators {
            c + self.weights[b.ym(s)]
        } else {
            c
        }
    }

    fn link(&self, z: f64) -> (f64, f64) {
        match self.domain {
            Domain::Binary => {
                let mu = sigmoid(z);
                (mu, mu * (1.0 - mu))
            }
            Domain::Continuous => (z, 1.0),
        }
    }

    /// Splits the linear predictor over a data set for one excluded X column.
    /// `data` must be in model coding.
    pub fn decompose(&self, data: &DataMatrix, x_excluded: Option<usize>) -> Result<LinearDecomposition> {
        self.check_shape()?;
        check_data(self, data)?;
        let excluded = self.resolve_excluded(x_excluded)?;
        let cols = self.y_inputs();
        let n = data.n();
        let mut base = Vec::with_capacity(n);
        let mut contrib = Array2::zeros((n, cols.len()));
        for i in 0..n {
            let xr = data.x_row(i);
            let yr = data.y_row(i);
            base.push(self.base_logit(xr, excluded));
            for (s, &c) in cols.iter().enumerate() {
                contrib[[i, s]] = self.mask_coef(yr, s, c);
            }
        }
        Ok(LinearDecomposition { base, contrib })
    }

    /// Maps a linear predictor to the response scale with its derivative.
    pub fn response(&self, z: f64) -> (f64, f64) {
        self.link(z)
    }
}

fn check_data(model: &AmortizedModel, data: &DataMatrix) -> Result<()> {
    if !data.is_model_ready() {
        return Err(ScslError::DomainViolation(
            "binary data must be recoded to ±1 before model training or evaluation".into(),
        ));
    }
    if data.domain() != model.domain {
        return Err(ScslError::DomainViolation("model and data domains differ".into()));
    }
    if data.p() != model.n_x() {
        return Err(ScslError::ShapeMismatch(format!(
            "model expects {} X columns, data has {}",
            model.n_x(),
            data.p()
        )));
    }
    if let Some(&c) = model.y_inputs().iter().max() {
        if c >= data.m() {
            return Err(ScslError::ShapeMismatch("data has too few Y columns for model".into()));
        }
    }
    Ok(())
}

fn check_row_lengths(model: &AmortizedModel, x_row: ArrayView1<'_, f64>, y_row: ArrayView1<'_, f64>) -> Result<()> {
    if x_row.len() != model.n_x() {
        return Err(ScslError::LengthMismatch {
            expected: model.n_x(),
            got: x_row.len(),
        });
    }
    let need = model.y_inputs().iter().max().map_or(0, |c| c + 1);
    if y_row.len() < need {
        return Err(ScslError::LengthMismatch {
            expected: need,
            got: y_row.len(),
        });
    }
    Ok(())
}

/// Estimate of the model's target given X_{-j} and the Y subset in `mask`.
/// Rows are in model coding; binary estimates are probabilities on the {0,1} scale.
pub fn predict(
    model: &AmortizedModel,
    x_row: ArrayView1<'_, f64>,
    y_row: ArrayView1<'_, f64>,
    mask: &MaskState,
) -> Result<f64> {
    let soft: Vec<f64> = mask.y_mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    predict_soft(model, x_row, y_row, &soft, mask.x_excluded).map(|(v, _)| v)
}

/// Relaxed prediction with fractional Y mask entries, returning the estimate
/// and its gradient with respect to each mask entry.
pub fn predict_soft(
    model: &AmortizedModel,
    x_row: ArrayView1<'_, f64>,
    y_row: ArrayView1<'_, f64>,
    soft_y_mask: &[f64],
    x_excluded: Option<usize>,
) -> Result<(f64, Vec<f64>)> {
    model.check_shape()?;
    let d = model.y_mask_len();
    if soft_y_mask.len() != d {
        return Err(ScslError::MaskShape {
            expected: d,
            got: soft_y_mask.len(),
        });
    }
    if let Some(v) = soft_y_mask.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(ScslError::DomainViolation(format!("soft mask entry {v} outside [0,1]")));
    }
    check_row_lengths(model, x_row, y_row)?;
    let excluded = model.resolve_excluded(x_excluded)?;
    let cols = model.y_inputs();
    let coefs: Vec<f64> = cols
        .iter()
        .enumerate()
        .map(|(s, &c)| model.mask_coef(y_row, s, c))
        .collect();
    let mut z = model.base_logit(x_row, excluded);
    for (s, c) in soft_y_mask.iter().zip(&coefs) {
        z += s * c;
    }
    let (mu, dmu) = model.link(z);
    Ok((mu, coefs.iter().map(|c| dmu * c).collect()))
}

/// Trains the model for Y column `k`.
pub fn train_y_model(data: &DataMatrix, k: usize, cfg: &TrainConfig, rng: &mut RngHandle) -> Result<AmortizedModel> {
    if k >= data.m() {
        return Err(ScslError::config(format!("target Y index {k} out of range (m = {})", data.m())));
    }
    train(data, Target::Y(k), cfg, rng)
}

/// Trains the model for X column `j`. X_j is zeroed in every input row.
pub fn train_x_model(data: &DataMatrix, j: usize, cfg: &TrainConfig, rng: &mut RngHandle) -> Result<AmortizedModel> {
    if j >= data.p() {
        return Err(ScslError::config(format!("target X index {j} out of range (p = {})", data.p())));
    }
    train(data, Target::X(j), cfg, rng)
}

fn train(data: &DataMatrix, target: Target, cfg: &TrainConfig, rng: &mut RngHandle) -> Result<AmortizedModel> {
    cfg.validate()?;
    if !data.is_model_ready() {
        return Err(ScslError::DomainViolation(
            "binary data must be recoded to ±1 before model training".into(),
        ));
    }
    let (n, p, m) = (data.n(), data.p(), data.m());
    let mut model = AmortizedModel::zeros(target, data.domain(), p, m);
    model.l2_lambda = cfg.l2_lambda;
    let blocks = model.blocks();
    let cols = model.y_inputs();
    let d = cols.len();

    let labels: Vec<f64> = match target {
        Target::Y(k) => data.y_response(k),
        Target::X(j) => data.x_response(j),
    };

    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.n_epochs);
    let mut grad = vec![0.0; model.weights.len()];
    let mut feats = vec![0.0; model.weights.len()];
    let mut y_keep = vec![false; d];
    let mut x_keep = vec![true; p];

    for epoch in 0..cfg.n_epochs {
        let lr = cfg.learning_rate / ((epoch + 1) as f64).sqrt();
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            for keep in y_keep.iter_mut() {
                *keep = rng.random_bool(cfg.p_mask);
            }
            x_keep.iter_mut().for_each(|k| *k = true);
            match target {
                Target::Y(_) => {
                    let dropped = rng.random_range(0..p.max(1));
                    if p > 0 {
                        x_keep[dropped] = false;
                    }
                }
                Target::X(j) => x_keep[j] = false,
            }

            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_bias = 0.0;
            let mut batch_loss = 0.0;
            for &i in batch {
                let xr = data.x_row(i);
                let yr = data.y_row(i);
                for l in 0..p {
                    feats[blocks.x(l)] = if x_keep[l] { xr[l] } else { 0.0 };
                }
                for (s, &c) in cols.iter().enumerate() {
                    feats[blocks.y(s)] = if y_keep[s] { yr[c] } else { 0.0 };
                }
                if blocks.indicators {
                    for l in 0..p {
                        feats[blocks.xm(l)] = if x_keep[l] { 1.0 } else { 0.0 };
                    }
                    for s in 0..d {
                        feats[blocks.ym(s)] = if y_keep[s] { 1.0 } else { 0.0 };
                    }
                }
                let z = model.bias + feats.iter().zip(&model.weights).map(|(f, w)| f * w).sum::<f64>();
                let t = labels[i];
                let (loss, dz) = match model.domain {
                    Domain::Binary => (-(t * log_sigmoid(z) + (1.0 - t) * log_sigmoid(-z)), sigmoid(z) - t),
                    Domain::Continuous => (0.5 * (z - t) * (z - t), z - t),
                };
                batch_loss += loss;
                grad_bias += dz;
                for (g, f) in grad.iter_mut().zip(&feats) {
                    *g += dz * f;
                }
            }
            let bn = batch.len() as f64;
            let penalty: f64 = 0.5 * cfg.l2_lambda * model.weights.iter().map(|w| w * w).sum::<f64>();
            loss_sum += batch_loss / bn + penalty;
            n_batches += 1;
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                *w -= lr * (g / bn + cfg.l2_lambda * *w);
            }
            model.bias -= lr * grad_bias / bn;
            if !loss_sum.is_finite() || !model.bias.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
                return Err(ScslError::NonFiniteLoss { epoch });
            }
        }
        epoch_losses.push(loss_sum / n_batches.max(1) as f64);
    }

    model.training_meta = TrainingMeta {
        n_epochs: cfg.n_epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        p_mask: cfg.p_mask,
        seed: rng.seed(),
        rng: crate::rng::RNG_ALGORITHM.to_string(),
        epoch_losses,
    };
    Ok(model)
}
