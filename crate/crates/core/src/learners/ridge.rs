use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Linear least squares with an L2 penalty `alpha * ||w||^2`; the intercept
/// is fitted by centering and is not penalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeModel {
    pub alpha: f64,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl RidgeModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.intercept
    }
}

/// The centered normal equations `(Xc'Xc + alpha I) w = Xc'yc`.
pub struct NormalEquations {
    pub lhs: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub x_mean: Vec<f64>,
    pub y_mean: f64,
}

pub fn normal_equations(x: &Matrix, y: &[f64], alpha: f64) -> NormalEquations {
    let n = x.rows() as f64;
    let d = x.cols();
    let x_mean: Vec<f64> = (0..d)
        .map(|j| x.iter_rows().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    let y_mean = y.iter().sum::<f64>() / n;
    let mut lhs = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut centered = vec![0.0; d];
    for (row, &yi) in x.iter_rows().zip(y) {
        for j in 0..d {
            centered[j] = row[j] - x_mean[j];
        }
        let yc = yi - y_mean;
        for i in 0..d {
            rhs[i] += centered[i] * yc;
            for j in 0..=i {
                lhs[(i, j)] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            lhs[(j, i)] = lhs[(i, j)];
        }
        lhs[(i, i)] += alpha;
    }
    NormalEquations {
        lhs,
        rhs,
        x_mean,
        y_mean,
    }
}

pub fn fit_ridge(x: &Matrix, y: &[f64], alpha: f64) -> Result<RidgeModel> {
    if x.rows() == 0 {
        return Err(Error::NoRows);
    }
    if y.len() != x.rows() {
        return Err(Error::InvalidInput("ridge: target length mismatch".into()));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!("ridge alpha must be >= 0, got {alpha}")));
    }
    let d = x.cols();
    let eq = normal_equations(x, y, alpha);
    let weights = if d == 0 {
        Vec::new()
    } else {
        let scale = (0..d).map(|i| eq.lhs[(i, i)]).fold(0.0, f64::max);
        let singular = || {
            Error::Singular(format!(
                "normal equations are singular at alpha = {alpha}; use alpha > 0"
            ))
        };
        if scale <= 0.0 {
            return Err(singular());
        }
        let chol = eq.lhs.clone().cholesky().ok_or_else(singular)?;
        let l = chol.l();
        let min_pivot = (0..d).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_pivot < 1e-12 * scale {
            return Err(singular());
        }
        let mut w = chol.solve(&eq.rhs);
        // one step of iterative refinement
        let resid = &eq.rhs - &eq.lhs * &w;
        w += chol.solve(&resid);
        w.iter().copied().collect::<Vec<f64>>()
    };
    let intercept = eq.y_mean - weights.iter().zip(&eq.x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(RidgeModel {
        alpha,
        weights,
        intercept,
    })
}
