//! Per-class weighted ridge regression over the interpretable features, the
//! linear baseline that trees are compared against.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::blackbox::BlackBoxBinding;
use crate::domain::InterpretableDomain;
use crate::error::{Error, Result};
use crate::point::InterpretablePoint;
use crate::sampling::WeightedSample;
use crate::tree::LabelledSample;

pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSurrogate {
    pub class: usize,
    pub alpha: f64,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

impl LinearSurrogate {
    pub fn predict(&self, point: &InterpretablePoint) -> Result<f64> {
        point.check_len(self.coefficients.len())?;
        Ok(self.intercept
            + point
                .bits()
                .iter()
                .zip(&self.coefficients)
                .filter(|(b, _)| **b)
                .map(|(_, c)| c)
                .sum::<f64>())
    }

    /// Features ordered by decreasing coefficient magnitude (lower index first
    /// on ties).
    pub fn ranking(&self) -> Vec<(usize, f64)> {
        let mut r: Vec<(usize, f64)> = self.coefficients.iter().copied().enumerate().collect();
        r.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
        r
    }
}

/// Minimises `sum_i w_i (y_i - b - beta . x_i)^2 + alpha |beta|^2` with the
/// intercept `b` unpenalised. `class` is left at 0.
pub fn fit_ridge(
    points: &[InterpretablePoint],
    target: &[f64],
    weights: &[f64],
    alpha: f64,
) -> Result<LinearSurrogate> {
    let n = points.len();
    if n == 0 || target.len() != n || weights.len() != n {
        return Err(Error::invalid(format!(
            "{n} points, {} targets and {} weights",
            target.len(),
            weights.len()
        )));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::invalid("weights must be non-negative"));
    }
    let d = points[0].len();
    if points.iter().any(|p| p.len() != d) {
        return Err(Error::invalid("points must share one length"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("weights are all zero"));
    }

    // centring on the weighted means removes the intercept from the system
    let mut x_mean = vec![0.0; d];
    let mut y_mean = 0.0;
    for ((p, y), w) in points.iter().zip(target).zip(weights) {
        for (m, b) in x_mean.iter_mut().zip(p.bits()) {
            if *b {
                *m += w;
            }
        }
        y_mean += w * y;
    }
    for m in &mut x_mean {
        *m /= total;
    }
    y_mean /= total;

    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut xc = vec![0.0; d];
    for ((p, y), &w) in points.iter().zip(target).zip(weights) {
        for (j, c) in xc.iter_mut().enumerate() {
            *c = f64::from(u8::from(p.get(j))) - x_mean[j];
        }
        let yc = y - y_mean;
        for i in 0..d {
            rhs[i] += w * xc[i] * yc;
            for j in 0..=i {
                gram[(i, j)] += w * xc[i] * xc[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
        gram[(i, i)] += alpha;
    }

    let beta = if d == 0 {
        DVector::zeros(0)
    } else {
        let scale = (0..d).map(|i| gram[(i, i)]).fold(0.0, f64::max);
        let chol = gram.clone().cholesky().filter(|c| {
            let l = c.l_dirty();
            (0..d).all(|i| l[(i, i)] * l[(i, i)] > 1e-12 * scale.max(f64::MIN_POSITIVE))
        });
        match chol {
            Some(c) => c.solve(&rhs),
            None => {
                return Err(Error::DegenerateFit(format!(
                    "the weighted normal equations are singular with alpha = {alpha}"
                )))
            }
        }
    };
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let intercept = y_mean - coefficients.iter().zip(&x_mean).map(|(b, m)| b * m).sum::<f64>();
    Ok(LinearSurrogate {
        class: 0,
        alpha,
        intercept,
        coefficients,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimeExplanation {
    pub surrogates: Vec<LinearSurrogate>,
}

impl LimeExplanation {
    /// Predictions for every point, one column per explained class, clipped
    /// to `[0, 1]`.
    pub fn predict_clipped(&self, points: &[InterpretablePoint]) -> Result<Vec<Vec<f64>>> {
        points
            .iter()
            .map(|p| {
                self.surrogates
                    .iter()
                    .map(|s| s.predict(p).map(|v| v.clamp(0.0, 1.0)))
                    .collect()
            })
            .collect()
    }
}

/// One ridge fit per class on an already labelled sample.
pub fn lime_explain_labelled(
    labelled: &LabelledSample,
    classes: &[usize],
    alpha: f64,
) -> Result<LimeExplanation> {
    let targets = labelled.targets(classes)?;
    let surrogates = classes
        .iter()
        .enumerate()
        .map(|(k, &class)| {
            let y: Vec<f64> = targets.iter().map(|row| row[k]).collect();
            let mut s = fit_ridge(&labelled.sample.points, &y, &labelled.sample.weights, alpha)?;
            s.class = class;
            Ok(s)
        })
        .collect::<Result<_>>()?;
    Ok(LimeExplanation { surrogates })
}

pub fn lime_explain(
    bb: &BlackBoxBinding,
    domain: &InterpretableDomain,
    sample: &WeightedSample,
    classes: &[usize],
    alpha: f64,
) -> Result<LimeExplanation> {
    let labelled = LabelledSample::query(bb, domain, sample.clone())?;
    lime_explain_labelled(&labelled, classes, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::enumerate_domain;

    #[test]
    fn two_point_exact_fit() {
        let pts = enumerate_domain(1).unwrap();
        let s = fit_ridge(&pts, &[0.2, 0.8], &[1.0, 1.0], 0.0).unwrap();
        assert!((s.intercept - 0.2).abs() < 1e-12);
        assert!((s.coefficients[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn zero_targets_give_zero_model() {
        let pts = enumerate_domain(3).unwrap();
        let s = fit_ridge(&pts, &[0.0; 8], &[1.0; 8], 1.0).unwrap();
        assert_eq!(s.intercept, 0.0);
        assert!(s.coefficients.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn huge_penalty_flattens() {
        let pts = enumerate_domain(3).unwrap();
        let y: Vec<f64> = (0..8).map(|i| i as f64 / 8.0).collect();
        let w: Vec<f64> = (0..8).map(|i| 0.5 + i as f64 / 16.0).collect();
        let s = fit_ridge(&pts, &y, &w, 1e9).unwrap();
        let norm = s.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!(norm < 1e-6);
        let mean = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / w.iter().sum::<f64>();
        assert!((s.intercept - mean).abs() < 1e-6);
    }

    #[test]
    fn singular_unpenalised_system_is_reported() {
        let pts: Vec<InterpretablePoint> = vec!["10".parse().unwrap(), "11".parse().unwrap()];
        let err = fit_ridge(&pts, &[0.1, 0.2], &[1.0, 1.0], 0.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateFit(_)));
        assert!(fit_ridge(&pts, &[0.1, 0.2], &[1.0, 1.0], 0.5).is_ok());
    }

    #[test]
    fn ranking_by_magnitude() {
        let s = LinearSurrogate {
            class: 0,
            alpha: 1.0,
            intercept: 0.0,
            coefficients: vec![0.1, -0.5, 0.3],
        };
        let idx: Vec<usize> = s.ranking().into_iter().map(|(i, _)| i).collect();
        assert_eq!(idx, vec![1, 2, 0]);
    }
}
