//! Semi-synthetic datasets with known bipartite ground truth.
//!
//! Two constructions are provided, each with a binary (logistic response)
//! and a continuous (Gaussian response) flavour:
//!
//! * **real-world confounding** keeps the observed joint distribution of the
//!   target block by resampling whole observed Y rows, weighting each candidate
//!   row by its likelihood under a synthetic logistic model of Y given the
//!   output row's X parents;
//! * **synthetic confounding** generates Y columns one after another, each from
//!   its sampled X parents plus, with probability `conf_p` each, earlier Y columns.

use ndarray::{Array2, ArrayView2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, Domain, GroundTruthGraph};
use crate::error::{Result, ScslError};
use crate::rng::RngHandle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    /// Number of X parents sampled per target.
    pub k_parents: usize,
    /// Inclusion probability of each earlier Y column as a parent (synthetic confounding only).
    pub conf_p: f64,
    pub coef_mean: f64,
    pub coef_sd: f64,
    pub m_targets: usize,
    /// Residual sd of the Gaussian response (continuous variants only).
    pub noise_sd: f64,
    /// When set, every β and γ takes this value instead of being sampled.
    pub fixed_coef: Option<f64>,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            k_parents: 2,
            conf_p: 0.0,
            coef_mean: 2.0,
            coef_sd: 1.0,
            m_targets: 5,
            noise_sd: 1.0,
            fixed_coef: None,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self, p: usize) -> Result<()> {
        if self.k_parents < 1 || self.k_parents > p {
            return Err(ScslError::config(format!(
                "k_parents must be in 1..={p}, got {}",
                self.k_parents
            )));
        }
        if !(0.0..=1.0).contains(&self.conf_p) {
            return Err(ScslError::config(format!("conf_p must be in [0,1], got {}", self.conf_p)));
        }
        if !(self.coef_sd > 0.0) || !self.coef_mean.is_finite() || !self.coef_sd.is_finite() {
            return Err(ScslError::config("coef_sd must be positive and finite"));
        }
        if self.m_targets < 1 {
            return Err(ScslError::config("m_targets must be at least 1"));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(ScslError::config("noise_sd must be non-negative"));
        }
        if self.fixed_coef.is_some_and(|c| !c.is_finite()) {
            return Err(ScslError::config("fixed_coef must be finite"));
        }
        Ok(())
    }
}

/// Parents and coefficients sampled for one generated target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetCoefficients {
    pub x_parents: Vec<usize>,
    pub beta: Vec<f64>,
    pub y_parents: Vec<usize>,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemiSynthOutput {
    pub data: DataMatrix,
    pub truth: GroundTruthGraph,
    /// `y_internal_edges[k][l]` is true iff Y_l → Y_k (only for l < k).
    pub y_internal_edges: Vec<Vec<bool>>,
    pub coefficients: Vec<TargetCoefficients>,
}

/// JSON sidecar written next to generated CSVs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    pub truth: GroundTruthGraph,
    pub y_internal_edges: Vec<Vec<bool>>,
    pub coefficients: Vec<TargetCoefficients>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub rng: String,
}

impl SemiSynthOutput {
    pub fn sidecar(&self, config: serde_json::Value, seed: u64) -> TruthSidecar {
        TruthSidecar {
            x_names: self.data.x_names().to_vec(),
            y_names: self.data.y_names().to_vec(),
            truth: self.truth.clone(),
            y_internal_edges: self.y_internal_edges.clone(),
            coefficients: self.coefficients.clone(),
            config,
            seed,
            rng: crate::rng::RNG_ALGORITHM.to_string(),
        }
    }
}

/// `1 / (1 + exp(-β·x))`.
pub fn logistic_likelihood(beta: &[f64], x_star: &[f64]) -> Result<f64> {
    if beta.len() != x_star.len() {
        return Err(ScslError::LengthMismatch {
            expected: beta.len(),
            got: x_star.len(),
        });
    }
    Ok(sigmoid(dot(beta, x_star)))
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln σ(z)` without overflow.
pub(crate) fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_binary(x: ArrayView2<'_, f64>) -> Result<()> {
    if x.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(ScslError::DomainViolation("generator input X must be {0,1}".into()));
    }
    Ok(())
}

fn draw_coefs(cfg: &GenConfig, len: usize, rng: &mut RngHandle) -> Vec<f64> {
    match cfg.fixed_coef {
        Some(c) => vec![c; len],
        None => {
            let normal = Normal::new(cfg.coef_mean, cfg.coef_sd).expect("validated sd");
            (0..len).map(|_| normal.sample(rng)).collect()
        }
    }
}

fn draw_x_parents(p: usize, k: usize, rng: &mut RngHandle) -> Vec<usize> {
    let mut v = index::sample(rng, p, k).into_vec();
    v.sort_unstable();
    v
}

fn shuffled_rows(m: ArrayView2<'_, f64>, rng: &mut RngHandle) -> Array2<f64> {
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.shuffle(rng);
    m.select(ndarray::Axis(0), &order)
}

fn truth_from(coefs: &[TargetCoefficients], p: usize) -> GroundTruthGraph {
    let mut g = GroundTruthGraph::empty(p, coefs.len());
    for (k, c) in coefs.iter().enumerate() {
        for &j in &c.x_parents {
            g.adjacency[j][k] = true;
        }
    }
    g
}

fn default_y_names(m: usize) -> Vec<String> {
    (1..=m).map(|i| format!("y{i}")).collect()
}

#[derive(Clone, Copy, PartialEq)]
enum Response {
    Logistic,
    Gaussian,
}

/// Row-resampling generator with real-world confounding (logistic response).
///
/// `source` supplies both the X rows and the observed Y rows that are resampled.
/// Output Y keeps the first `m_targets` source columns.
pub fn gen_real_confounding(source: &DataMatrix, cfg: &GenConfig, rng: &mut RngHandle) -> Result<SemiSynthOutput> {
    if source.domain() != Domain::Binary {
        return Err(ScslError::DomainViolation("real-confounding generator needs binary data".into()));
    }
    real_confounding(source, cfg, rng, Response::Logistic)
}

/// Gaussian-likelihood flavour of [`gen_real_confounding`].
pub fn gen_continuous_real(source: &DataMatrix, cfg: &GenConfig, rng: &mut RngHandle) -> Result<SemiSynthOutput> {
    if !(cfg.noise_sd > 0.0) {
        return Err(ScslError::config("Gaussian row resampling needs noise_sd > 0"));
    }
    real_confounding(source, cfg, rng, Response::Gaussian)
}

fn real_confounding(
    source: &DataMatrix,
    cfg: &GenConfig,
    rng: &mut RngHandle,
    response: Response,
) -> Result<SemiSynthOutput> {
    let data = source.model_view().and_then(|d| match d.domain() {
        Domain::Binary => crate::data::decode_binary(&d),
        Domain::Continuous => Ok(d),
    })?;
    let (n, p, m_src) = (data.n(), data.p(), data.m());
    cfg.validate(p)?;
    if cfg.m_targets > m_src {
        return Err(ScslError::config(format!(
            "m_targets = {} exceeds the {m_src} available Y columns",
            cfg.m_targets
        )));
    }
    check_binary(data.x())?;
    let m = cfg.m_targets;

    let x = shuffled_rows(data.x(), rng);
    let y_src = shuffled_rows(data.y(), rng);

    let coefficients: Vec<TargetCoefficients> = (0..m)
        .map(|_| {
            let x_parents = draw_x_parents(p, cfg.k_parents, rng);
            let beta = draw_coefs(cfg, x_parents.len(), rng);
            TargetCoefficients {
                x_parents,
                beta,
                y_parents: vec![],
                gamma: vec![],
            }
        })
        .collect();

    // Candidate rows grouped by their values on the generated columns: rows
    // sharing a pattern share a likelihood, so weights are computed per pattern.
    let mut patterns: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    {
        let mut lookup: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
        for r in 0..n {
            let vals: Vec<f64> = (0..m).map(|k| y_src[[r, k]]).collect();
            let key: Vec<u64> = vals.iter().map(|v| v.to_bits()).collect();
            match lookup.get(&key) {
                Some(&idx) => patterns[idx].1.push(r),
                None => {
                    lookup.insert(key, patterns.len());
                    patterns.push((vals, vec![r]));
                }
            }
        }
    }
    let log_counts: Vec<f64> = patterns.iter().map(|(_, rows)| (rows.len() as f64).ln()).collect();

    let mut y_out = Array2::<f64>::zeros((n, m));
    let mut logw = vec![0.0; patterns.len()];
    for i in 0..n {
        let means: Vec<f64> = coefficients
            .iter()
            .map(|c| c.x_parents.iter().zip(&c.beta).map(|(&j, b)| b * x[[i, j]]).sum())
            .collect();
        for (w, ((vals, _), lc)) in logw.iter_mut().zip(patterns.iter().zip(&log_counts)) {
            let ll: f64 = vals
                .iter()
                .zip(&means)
                .map(|(&y, &z)| match response {
                    Response::Logistic => {
                        if y == 1.0 {
                            log_sigmoid(z)
                        } else {
                            log_sigmoid(-z)
                        }
                    }
                    Response::Gaussian => {
                        let r = (y - z) / cfg.noise_sd;
                        -0.5 * r * r
                    }
                })
                .sum();
            *w = ll + lc;
        }
        let max = logw.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(ScslError::DegenerateLikelihood);
        }
        let weights: Vec<f64> = logw
            .iter()
            .map(|&l| if l.is_finite() { (l - max).exp() } else { 0.0 })
            .collect();
        let dist = WeightedIndex::new(&weights).map_err(|_| ScslError::DegenerateLikelihood)?;
        let rows = &patterns[dist.sample(rng)].1;
        let r = rows[rng.random_range(0..rows.len())];
        for k in 0..m {
            y_out[[i, k]] = y_src[[r, k]];
        }
    }

    let truth = truth_from(&coefficients, p);
    let y_names = data.y_names()[..m].to_vec();
    let out = DataMatrix::new(x, y_out, data.domain(), data.x_names().to_vec(), y_names)?;
    Ok(SemiSynthOutput {
        data: out,
        truth,
        y_internal_edges: vec![vec![false; m]; m],
        coefficients,
    })
}

/// Sequential generator with synthetic confounding (logistic response).
pub fn gen_synth_confounding(
    x: ArrayView2<'_, f64>,
    x_names: &[String],
    cfg: &GenConfig,
    rng: &mut RngHandle,
) -> Result<SemiSynthOutput> {
    synth_confounding(x, x_names, cfg, rng, Response::Logistic)
}

/// Gaussian-response flavour of [`gen_synth_confounding`]:
/// `Y_k = β_k·x* + γ_k·y* + ε`, `ε ~ N(0, noise_sd²)`.
pub fn gen_continuous_synth(
    x: ArrayView2<'_, f64>,
    x_names: &[String],
    cfg: &GenConfig,
    rng: &mut RngHandle,
) -> Result<SemiSynthOutput> {
    synth_confounding(x, x_names, cfg, rng, Response::Gaussian)
}

fn synth_confounding(
    x_in: ArrayView2<'_, f64>,
    x_names: &[String],
    cfg: &GenConfig,
    rng: &mut RngHandle,
    response: Response,
) -> Result<SemiSynthOutput> {
    let (n, p) = x_in.dim();
    cfg.validate(p)?;
    check_binary(x_in)?;
    if x_names.len() != p {
        return Err(ScslError::LengthMismatch {
            expected: p,
            got: x_names.len(),
        });
    }
    let m = cfg.m_targets;
    let x = shuffled_rows(x_in, rng);
    let noise = Normal::new(0.0, cfg.noise_sd).expect("validated noise_sd");

    let mut y = Array2::<f64>::zeros((n, m));
    let mut y_internal = vec![vec![false; m]; m];
    let mut coefficients = Vec::with_capacity(m);
    for k in 0..m {
        let x_parents = draw_x_parents(p, cfg.k_parents, rng);
        let y_parents: Vec<usize> = (0..k).filter(|_| rng.random_bool(cfg.conf_p)).collect();
        let beta = draw_coefs(cfg, x_parents.len(), rng);
        let gamma = draw_coefs(cfg, y_parents.len(), rng);
        for &l in &y_parents {
            y_internal[k][l] = true;
        }
        for i in 0..n {
            let mut z: f64 = x_parents.iter().zip(&beta).map(|(&j, b)| b * x[[i, j]]).sum();
            z += y_parents.iter().zip(&gamma).map(|(&l, g)| g * y[[i, l]]).sum::<f64>();
            y[[i, k]] = match response {
                Response::Logistic => f64::from(u8::from(rng.random_bool(sigmoid(z)))),
                Response::Gaussian => {
                    if cfg.noise_sd > 0.0 {
                        z + noise.sample(rng)
                    } else {
                        z
                    }
                }
            };
        }
        coefficients.push(TargetCoefficients {
            x_parents,
            beta,
            y_parents,
            gamma,
        });
    }

    let domain = match response {
        Response::Logistic => Domain::Binary,
        Response::Gaussian => Domain::Continuous,
    };
    let truth = truth_from(&coefficients, p);
    let data = DataMatrix::new(x, y, domain, x_names.to_vec(), default_y_names(m))?;
    Ok(SemiSynthOutput {
        data,
        truth,
        y_internal_edges: y_internal,
        coefficients,
    })
}

/// Correlated binary source matrix standing in for observed X data:
/// `X_ij ~ Ber(σ(a_j + Z_i))` with a shared latent `Z_i ~ N(0,1)` and column
/// offsets `a_j ~ U(-1.5, 0)`.
pub fn synthetic_x(n: usize, p: usize, rng: &mut RngHandle) -> Array2<f64> {
    let offsets: Vec<f64> = (0..p).map(|_| rng.random_range(-1.5..0.0)).collect();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut x = Array2::zeros((n, p));
    for i in 0..n {
        let z = std_normal.sample(rng);
        for j in 0..p {
            x[[i, j]] = f64::from(u8::from(rng.random_bool(sigmoid(offsets[j] + z))));
        }
    }
    x
}

pub fn default_x_names(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("x{i}")).collect()
}

/// Binary (X, Y) dataset used as the "observed" input of the real-confounding
/// generator when no real data is supplied: synthetic X plus Y columns from the
/// synthetic-confounding generator with inclusion probability `source_conf_p`.
pub fn synthetic_source(n: usize, p: usize, m: usize, source_conf_p: f64, rng: &mut RngHandle) -> Result<DataMatrix> {
    let x = synthetic_x(n, p, rng);
    let cfg = GenConfig {
        k_parents: p.min(2),
        conf_p: source_conf_p,
        m_targets: m,
        ..GenConfig::default()
    };
    let out = gen_synth_confounding(x.view(), &default_x_names(p), &cfg, rng)?;
    Ok(out.data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn names(p: usize) -> Vec<String> {
        default_x_names(p)
    }

    #[test]
    fn logistic_likelihood_values() {
        assert_eq!(logistic_likelihood(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.5);
        assert!((logistic_likelihood(&[3f64.ln()], &[1.0]).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(logistic_likelihood(&[2.0], &[0.0]).unwrap(), 0.5);
        assert!(matches!(
            logistic_likelihood(&[1.0], &[1.0, 2.0]),
            Err(ScslError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(0.0) - 0.5f64.ln()).abs() < 1e-15);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!(log_sigmoid(800.0).abs() < 1e-300);
    }

    #[test]
    fn k_parents_above_p_is_config_error() {
        let mut rng = RngHandle::new(1);
        let x = synthetic_x(10, 3, &mut rng);
        let cfg = GenConfig {
            k_parents: 4,
            m_targets: 2,
            ..GenConfig::default()
        };
        assert!(matches!(
            gen_synth_confounding(x.view(), &names(3), &cfg, &mut rng),
            Err(ScslError::Config(_))
        ));
        let src = DataMatrix::with_default_names(x.clone(), x.clone(), Domain::Binary).unwrap();
        assert!(matches!(
            gen_real_confounding(&src, &cfg, &mut rng),
            Err(ScslError::Config(_))
        ));
    }

    #[test]
    fn conf_p_zero_and_one() {
        let mut rng = RngHandle::new(2);
        let x = synthetic_x(50, 4, &mut rng);
        let cfg0 = GenConfig {
            conf_p: 0.0,
            m_targets: 3,
            ..GenConfig::default()
        };
        let out = gen_synth_confounding(x.view(), &names(4), &cfg0, &mut rng).unwrap();
        assert!(out.y_internal_edges.iter().flatten().all(|e| !e));
        let cfg1 = GenConfig { conf_p: 1.0, ..cfg0 };
        let out = gen_synth_confounding(x.view(), &names(4), &cfg1, &mut rng).unwrap();
        assert_eq!(out.y_internal_edges.iter().flatten().filter(|e| **e).count(), 3);
        for (k, row) in out.y_internal_edges.iter().enumerate() {
            for (l, &e) in row.iter().enumerate() {
                assert!(!e || l < k);
            }
        }
        assert_eq!(out.truth.column_sums(), vec![2, 2, 2]);
    }

    #[test]
    fn zero_coefficients_give_fair_coins() {
        let mut rng = RngHandle::new(3);
        let x = synthetic_x(2000, 2, &mut rng);
        let cfg = GenConfig {
            k_parents: 1,
            m_targets: 1,
            fixed_coef: Some(0.0),
            ..GenConfig::default()
        };
        let out = gen_synth_confounding(x.view(), &names(2), &cfg, &mut rng).unwrap();
        let mean = out.data.y().column(0).mean().unwrap();
        assert!((0.45..=0.55).contains(&mean), "mean {mean}");
    }

    #[test]
    fn continuous_noise_moments() {
        let mut rng = RngHandle::new(4);
        let x = synthetic_x(2000, 3, &mut rng);
        let cfg = GenConfig {
            k_parents: 2,
            m_targets: 3,
            fixed_coef: Some(0.0),
            noise_sd: 1.0,
            conf_p: 0.5,
            ..GenConfig::default()
        };
        let out = gen_continuous_synth(x.view(), &names(3), &cfg, &mut rng).unwrap();
        assert_eq!(out.data.domain(), Domain::Continuous);
        for col in out.data.y().columns() {
            let mean = col.mean().unwrap();
            let sd = col.std(0.0);
            assert!(mean.abs() <= 0.07, "mean {mean}");
            assert!((sd - 1.0).abs() <= 0.1, "sd {sd}");
        }
    }

    #[test]
    fn continuous_noiseless_is_linear() {
        let mut rng = RngHandle::new(5);
        let x = array![[1.0], [0.0], [1.0], [1.0]];
        let cfg = GenConfig {
            k_parents: 1,
            m_targets: 1,
            fixed_coef: Some(2.0),
            noise_sd: 0.0,
            ..GenConfig::default()
        };
        let out = gen_continuous_synth(x.view(), &names(1), &cfg, &mut rng).unwrap();
        for i in 0..4 {
            assert_eq!(out.data.y()[[i, 0]], 2.0 * out.data.x()[[i, 0]]);
        }
        let cfg0 = GenConfig {
            k_parents: 1,
            m_targets: 3,
            conf_p: 0.0,
            ..cfg
        };
        let out = gen_continuous_synth(x.view(), &names(1), &cfg0, &mut rng).unwrap();
        assert!(out.coefficients.iter().all(|c| c.y_parents.is_empty() && c.gamma.is_empty()));
    }

    #[test]
    fn real_confounding_copies_rows() {
        let mut rng = RngHandle::new(6);
        let src = synthetic_source(300, 4, 3, 0.5, &mut rng).unwrap();
        let cfg = GenConfig {
            m_targets: 3,
            ..GenConfig::default()
        };
        let out = gen_real_confounding(&src, &cfg, &mut rng).unwrap();
        assert_eq!((out.data.n(), out.data.p(), out.data.m()), (300, 4, 3));
        let src_rows: Vec<Vec<u64>> = src
            .y()
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.to_bits()).collect())
            .collect();
        for r in out.data.y().rows() {
            let r: Vec<u64> = r.iter().map(|v| v.to_bits()).collect();
            assert!(src_rows.contains(&r));
        }
        assert_eq!(out.truth.column_sums(), vec![2, 2, 2]);
    }

    #[test]
    fn zero_coefficients_resample_uniformly() {
        let mut rng = RngHandle::new(21);
        let src = synthetic_source(4000, 3, 2, 0.5, &mut rng).unwrap();
        let cfg = GenConfig {
            m_targets: 2,
            fixed_coef: Some(0.0),
            ..GenConfig::default()
        };
        let out = gen_real_confounding(&src, &cfg, &mut rng).unwrap();
        let pattern = |r: ndarray::ArrayView1<f64>| (r[0] > 0.5) as usize * 2 + (r[1] > 0.5) as usize;
        let mut expected = [0.0f64; 4];
        for r in src.y().rows() {
            expected[pattern(r)] += 1.0;
        }
        let mut observed = [0.0f64; 4];
        for r in out.data.y().rows() {
            observed[pattern(r)] += 1.0;
        }
        let chi2: f64 = (0..4)
            .filter(|&i| expected[i] > 0.0)
            .map(|i| (observed[i] - expected[i]).powi(2) / expected[i])
            .sum();
        // 0.999 quantile of chi-square with 3 df
        assert!(chi2 < 16.27, "chi2 = {chi2}");
    }

    #[test]
    fn large_coefficient_copies_matching_row() {
        let x = ndarray::array![[1.0], [0.0]];
        let y = ndarray::array![[1.0], [0.0]];
        let src = DataMatrix::new(x, y, Domain::Binary, names(1), vec!["y1".into()]).unwrap();
        let cfg = GenConfig {
            k_parents: 1,
            m_targets: 1,
            fixed_coef: Some(50.0),
            ..GenConfig::default()
        };
        let mut rng = RngHandle::new(4);
        let mut copies = 0;
        for _ in 0..1000 {
            let out = gen_real_confounding(&src, &cfg, &mut rng).unwrap();
            let active = (0..2).find(|&i| out.data.x()[[i, 0]] == 1.0).unwrap();
            copies += (out.data.y()[[active, 0]] == 1.0) as usize;
        }
        assert!(copies >= 990, "{copies}");
    }

    #[test]
    fn generators_are_deterministic() {
        let x = synthetic_x(200, 5, &mut RngHandle::new(10));
        let cfg = GenConfig {
            conf_p: 0.4,
            ..GenConfig::default()
        };
        let a = gen_synth_confounding(x.view(), &names(5), &cfg, &mut RngHandle::new(11)).unwrap();
        let b = gen_synth_confounding(x.view(), &names(5), &cfg, &mut RngHandle::new(11)).unwrap();
        assert_eq!(a, b);
    }
}
