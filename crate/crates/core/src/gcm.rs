//! Generalized Covariance Measure: a conditional-independence test built from
//! the normalized mean of products of regression residuals.

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::data::DataMatrix;
use crate::error::{Result, ScslError};
use crate::model::{predict, AmortizedModel, MaskState, Target};

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualProducts {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcmResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_used: usize,
    /// Mean squared residual of the X_j regression.
    pub a_f: f64,
    /// Mean squared residual of the Y_k regression.
    pub a_g: f64,
}

/// `R_i = (x_i - x̂_i)(y_i - ŷ_i)`.
pub fn residual_products(x: &[f64], x_hat: &[f64], y: &[f64], y_hat: &[f64]) -> Result<ResidualProducts> {
    let n = x.len();
    for len in [x_hat.len(), y.len(), y_hat.len()] {
        if len != n {
            return Err(ScslError::LengthMismatch { expected: n, got: len });
        }
    }
    if n < 2 {
        return Err(ScslError::ShapeMismatch(format!("GCM needs at least 2 samples, got {n}")));
    }
    let values = (0..n).map(|i| (x[i] - x_hat[i]) * (y[i] - y_hat[i])).collect();
    Ok(ResidualProducts { values })
}

/// `T = √n · mean(R) / sd(R)` with the population sd, computed in two passes.
pub fn gcm_statistic(r: &ResidualProducts) -> Result<f64> {
    let v = &r.values;
    let n = v.len();
    if n < 2 {
        return Err(ScslError::ShapeMismatch(format!("GCM needs at least 2 samples, got {n}")));
    }
    if v.iter().all(|&x| x == v[0]) {
        return Err(ScslError::DegenerateVariance { value: v[0] });
    }
    let nf = n as f64;
    let mean = v.iter().sum::<f64>() / nf;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf;
    if !(var > 0.0) {
        return Err(ScslError::DegenerateVariance { value: mean });
    }
    Ok(nf.sqrt() * mean / var.sqrt())
}

/// Standard normal CDF, `Φ(x) = erfc(-x/√2) / 2`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided normal tail probability `2(1 - Φ(|T|))`.
pub fn gcm_pvalue(t: f64) -> f64 {
    // erfc(|t|/√2) is the same quantity without cancellation in the tail.
    erfc(t.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Statistic and p-value, mapping an all-zero residual vector to (0, 1).
pub fn statistic_and_pvalue(r: &ResidualProducts) -> Result<(f64, f64)> {
    match gcm_statistic(r) {
        Ok(t) => Ok((t, gcm_pvalue(t))),
        Err(ScslError::DegenerateVariance { value: 0.0 }) => Ok((0.0, 1.0)),
        Err(e) => Err(e),
    }
}

/// Expands a mask over Y_{-k} to a mask over all of Y with Y_k left out.
pub fn full_y_mask(subset: &[bool], k: usize) -> Vec<bool> {
    let mut full = subset.to_vec();
    full.insert(k.min(full.len()), false);
    full
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Tests X_j ⫫ Y_k | S, X_{-j} where `subset` selects S from Y_{-k}.
pub fn gcm_test(
    data: &DataMatrix,
    j: usize,
    k: usize,
    subset: &[bool],
    y_model: &AmortizedModel,
    x_model: &AmortizedModel,
) -> Result<GcmResult> {
    if y_model.target != Target::Y(k) || x_model.target != Target::X(j) {
        return Err(ScslError::config(format!(
            "models ({:?}, {:?}) do not match edge (x{j}, y{k})",
            x_model.target, y_model.target
        )));
    }
    if data.m() == 0 || subset.len() != data.m() - 1 {
        return Err(ScslError::MaskShape {
            expected: data.m().saturating_sub(1),
            got: subset.len(),
        });
    }
    let inputs = data.model_view()?;
    let y_mask = MaskState {
        y_mask: subset.to_vec(),
        x_excluded: Some(j),
    };
    let x_mask = MaskState {
        y_mask: full_y_mask(subset, k),
        x_excluded: None,
    };
    let n = data.n();
    let mut x_hat = Vec::with_capacity(n);
    let mut y_hat = Vec::with_capacity(n);
    for i in 0..n {
        let (xr, yr) = (inputs.x_row(i), inputs.y_row(i));
        x_hat.push(predict(x_model, xr, yr, &x_mask)?);
        y_hat.push(predict(y_model, xr, yr, &y_mask)?);
    }
    let x = data.x_response(j);
    let y = data.y_response(k);
    let r = residual_products(&x, &x_hat, &y, &y_hat)?;
    let (statistic, p_value) = statistic_and_pvalue(&r)?;
    Ok(GcmResult {
        statistic,
        p_value,
        n_used: n,
        a_f: mse(&x, &x_hat),
        a_g: mse(&y, &y_hat),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{recode_binary, Domain};
    use crate::rng::RngHandle;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn residual_product_examples() {
        let r = residual_products(&[1.0, 0.0], &[1.0, 0.0], &[1.0, 1.0], &[0.3, 0.2]).unwrap();
        assert_eq!(r.values, vec![0.0, 0.0]);
        let r = residual_products(&[1.0, 0.0], &[0.5, 0.5], &[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert_eq!(r.values, vec![0.25, 0.25]);
        assert!(matches!(
            residual_products(&[1.0, 0.0], &[0.5], &[1.0, 0.0], &[0.5, 0.5]),
            Err(ScslError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn statistic_examples() {
        let t = gcm_statistic(&ResidualProducts { values: vec![1.0, -1.0] }).unwrap();
        assert_eq!(t, 0.0);
        let t = gcm_statistic(&ResidualProducts {
            values: vec![1.0, 2.0, 3.0],
        })
        .unwrap();
        assert!((t - 6.0 / 2f64.sqrt()).abs() < 1e-12);
        assert!((t - 4.242641).abs() < 1e-6);
        assert!(matches!(
            gcm_statistic(&ResidualProducts { values: vec![0.7; 5] }),
            Err(ScslError::DegenerateVariance { .. })
        ));
    }

    #[test]
    fn zero_residuals_map_to_pvalue_one() {
        let (t, p) = statistic_and_pvalue(&ResidualProducts { values: vec![0.0; 4] }).unwrap();
        assert_eq!((t, p), (0.0, 1.0));
        assert!(statistic_and_pvalue(&ResidualProducts { values: vec![0.3; 4] }).is_err());
    }

    #[test]
    fn pvalue_examples() {
        assert_eq!(gcm_pvalue(0.0), 1.0);
        assert!((gcm_pvalue(1.959964) - 0.05).abs() < 1e-6);
        assert!((gcm_pvalue(-1.959964) - 0.05).abs() < 1e-6);
        // Φ against tabulated values
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12, "{}", normal_cdf(1.0));
        assert!((normal_cdf(-2.5) - 0.006_209_665_325_776_132).abs() < 1e-12);
    }

    fn naive_statistic(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let s: f64 = v.iter().sum();
        let s2: f64 = v.iter().map(|x| x * x).sum();
        (n.sqrt() * s / n) / (s2 / n - (s / n) * (s / n)).sqrt()
    }

    proptest! {
        #[test]
        fn matches_single_pass_oracle(v in prop::collection::vec(-5.0f64..5.0, 3..200)) {
            prop_assume!(v.iter().any(|&x| x != v[0]));
            let r = ResidualProducts { values: v.clone() };
            let t = gcm_statistic(&r).unwrap();
            let oracle = naive_statistic(&v);
            let spread = v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread > 1e-3);
            prop_assert!((t - oracle).abs() <= 1e-9 * oracle.abs().max(1.0));
        }

        #[test]
        fn scale_invariance(v in prop::collection::vec(-5.0f64..5.0, 3..100), c in 0.01f64..100.0) {
            prop_assume!(v.iter().any(|&x| (x - v[0]).abs() > 1e-6));
            let t = gcm_statistic(&ResidualProducts { values: v.clone() }).unwrap();
            let ts = gcm_statistic(&ResidualProducts { values: v.iter().map(|x| x * c).collect() }).unwrap();
            let tn = gcm_statistic(&ResidualProducts { values: v.iter().map(|x| -x).collect() }).unwrap();
            prop_assert!((t - ts).abs() <= 1e-9 * t.abs().max(1.0));
            prop_assert!((t + tn).abs() <= 1e-12 * t.abs().max(1.0));
            prop_assert!((gcm_pvalue(t) - gcm_pvalue(tn)).abs() <= 1e-12);
        }

        #[test]
        fn pvalue_monotone(a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let (lo, hi) = if a.abs() <= b.abs() { (a, b) } else { (b, a) };
            prop_assert!(gcm_pvalue(lo) >= gcm_pvalue(hi));
        }
    }

    #[test]
    fn zero_weight_models_are_calibrated_on_independent_coins() {
        let mut rng = RngHandle::new(2024);
        let n = 2000;
        let ym = AmortizedModel::zeros(Target::Y(0), Domain::Binary, 2, 2);
        let xm = AmortizedModel::zeros(Target::X(0), Domain::Binary, 2, 2);
        let mut rejections = 0;
        for _ in 0..500 {
            let x = Array2::from_shape_fn((n, 2), |_| f64::from(u8::from(rng.random_bool(0.5))));
            let y = Array2::from_shape_fn((n, 2), |_| f64::from(u8::from(rng.random_bool(0.5))));
            let d = DataMatrix::with_default_names(x, y, Domain::Binary).unwrap();
            let res = gcm_test(&d, 0, 0, &[true], &ym, &xm).unwrap();
            if res.statistic.abs() > 1.96 {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / 500.0;
        assert!((0.03..=0.08).contains(&rate), "rate {rate}");
    }

    #[test]
    fn subset_length_checked() {
        let d = recode_binary(
            &DataMatrix::with_default_names(
                Array2::from_shape_fn((4, 2), |(i, _)| (i % 2) as f64),
                Array2::from_shape_fn((4, 3), |(i, _)| (i / 2) as f64),
                Domain::Binary,
            )
            .unwrap(),
        )
        .unwrap();
        let ym = AmortizedModel::zeros(Target::Y(1), Domain::Binary, 2, 3);
        let xm = AmortizedModel::zeros(Target::X(0), Domain::Binary, 2, 3);
        assert!(matches!(
            gcm_test(&d, 0, 1, &[true], &ym, &xm),
            Err(ScslError::MaskShape { expected: 2, got: 1 })
        ));
        assert!(gcm_test(&d, 0, 1, &[true, false], &ym, &xm).is_ok());
    }

    #[test]
    fn perfect_fit_gives_pvalue_one() {
        // continuous model whose bias equals the constant response
        let x = Array2::from_shape_fn((6, 1), |(i, _)| (i % 2) as f64);
        let y = Array2::from_elem((6, 1), 3.0);
        let d = DataMatrix::with_default_names(x, y, Domain::Continuous).unwrap();
        let mut ym = AmortizedModel::zeros(Target::Y(0), Domain::Continuous, 1, 1);
        ym.bias = 3.0;
        let xm = AmortizedModel::zeros(Target::X(0), Domain::Continuous, 1, 1);
        let res = gcm_test(&d, 0, 0, &[], &ym, &xm).unwrap();
        assert_eq!(res.p_value, 1.0);
        assert_eq!(res.a_g, 0.0);
    }
}
