//! L2-penalized logistic regression solved by damped Newton iterations.
//!
//! Minimizes `sum_i logloss(y_i, sigmoid(w.x_i + b)) + ||w||^2 / (2C)`.
//! The intercept `b` is not penalized.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const MAX_ITER: usize = 500;
pub const GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub c: f64,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticModel {
    pub fn decision_function(&self, row: &[f64]) -> f64 {
        self.weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + self.intercept
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision_function(row))
    }
}

/// Penalized negative log-likelihood at `(w, b)`.
pub fn penalized_loss(x: &Matrix, y: &[f64], c: f64, w: &[f64], b: f64) -> f64 {
    let data: f64 = x
        .iter_rows()
        .zip(y)
        .map(|(row, &yi)| {
            let z = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
            softplus(z) - yi * z
        })
        .sum();
    data + w.iter().map(|v| v * v).sum::<f64>() / (2.0 * c)
}

/// Gradient of [`penalized_loss`]; the last entry is the intercept component.
pub fn penalized_gradient(x: &Matrix, y: &[f64], c: f64, w: &[f64], b: f64) -> Vec<f64> {
    let d = w.len();
    let mut g = vec![0.0; d + 1];
    for (row, &yi) in x.iter_rows().zip(y) {
        let z = row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + b;
        let r = sigmoid(z) - yi;
        for j in 0..d {
            g[j] += r * row[j];
        }
        g[d] += r;
    }
    for j in 0..d {
        g[j] += w[j] / c;
    }
    g
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn fit_logistic(x: &Matrix, y: &[f64], c: f64) -> Result<LogisticModel> {
    if x.rows() == 0 {
        return Err(Error::NoRows);
    }
    if y.len() != x.rows() {
        return Err(Error::InvalidInput("logistic: target length mismatch".into()));
    }
    if let Some(v) = y.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidInput(format!(
            "logistic regression needs binary targets, found {v}"
        )));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidInput(format!("logistic C must be positive, got {c}")));
    }
    let d = x.cols();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut loss = penalized_loss(x, y, c, &w, b);
    let mut grad = penalized_gradient(x, y, c, &w, b);
    let mut iterations = 0;

    while iterations < MAX_ITER && norm(&grad) >= GRAD_TOL {
        iterations += 1;
        // Hessian: X~' S X~ + diag(1/C, ..., 1/C, 0) with X~ = [X, 1]
        let mut h = DMatrix::<f64>::zeros(d + 1, d + 1);
        for row in x.iter_rows() {
            let z = row.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + b;
            let p = sigmoid(z);
            let s = p * (1.0 - p);
            for i in 0..=d {
                let xi = if i < d { row[i] } else { 1.0 };
                if xi == 0.0 {
                    continue;
                }
                for j in 0..=i {
                    let xj = if j < d { row[j] } else { 1.0 };
                    h[(i, j)] += s * xi * xj;
                }
            }
        }
        for i in 0..=d {
            for j in 0..i {
                h[(j, i)] = h[(i, j)];
            }
        }
        for i in 0..d {
            h[(i, i)] += 1.0 / c;
        }
        let g = DVector::from_column_slice(&grad);
        let step = match h.clone().cholesky() {
            Some(ch) => ch.solve(&g),
            None => {
                // saturated intercept curvature; nudge the diagonal
                let mut hh = h;
                for i in 0..=d {
                    hh[(i, i)] += 1e-10;
                }
                match hh.cholesky() {
                    Some(ch) => ch.solve(&g),
                    None => g.clone(),
                }
            }
        };
        let slope: f64 = -step.dot(&g);
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let w_new: Vec<f64> = (0..d).map(|j| w[j] - t * step[j]).collect();
            let b_new = b - t * step[d];
            let l_new = penalized_loss(x, y, c, &w_new, b_new);
            if l_new <= loss + 1e-4 * t * slope {
                w = w_new;
                b = b_new;
                loss = l_new;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        grad = penalized_gradient(x, y, c, &w, b);
        if !accepted {
            // no representable decrease left; the gradient is at round-off level
            break;
        }
    }
    Ok(LogisticModel {
        c,
        weights: w,
        intercept: b,
        iterations,
        gradient_norm: norm(&grad),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target_predicts_mean() {
        let x = Matrix::from_rows(&[vec![0.5], vec![-1.0], vec![2.0], vec![0.0]]).unwrap();
        let y = [1.0; 4];
        let m = fit_logistic(&x, &y, 1e-5).unwrap();
        assert!(m.weights[0].abs() < 1e-3);
        for r in x.iter_rows() {
            assert!(m.predict(r) > 0.999);
        }
    }

    #[test]
    fn separable_one_dimensional() {
        let x = Matrix::from_rows(&[vec![-2.0], vec![-1.0], vec![-0.5], vec![0.5], vec![1.0], vec![3.0]])
            .unwrap();
        let y = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let m = fit_logistic(&x, &y, 1.0).unwrap();
        for (r, &t) in x.iter_rows().zip(&y) {
            assert_eq!(m.predict(r) > 0.5, t == 1.0);
        }
    }

    #[test]
    fn two_points_match_grid_search() {
        let x = Matrix::from_rows(&[vec![1.0], vec![-0.5]]).unwrap();
        let y = [1.0, 0.0];
        let c = 0.7;
        let m = fit_logistic(&x, &y, c).unwrap();

        // coarse grid then two refinements around the best cell
        let (mut cw, mut cb, mut span) = (0.0f64, 0.0f64, 8.0f64);
        for _ in 0..4 {
            let mut best = (f64::INFINITY, cw, cb);
            let steps = 200;
            for i in 0..=steps {
                for j in 0..=steps {
                    let w = cw - span + 2.0 * span * i as f64 / steps as f64;
                    let b = cb - span + 2.0 * span * j as f64 / steps as f64;
                    let l = penalized_loss(&x, &y, c, &[w], b);
                    if l < best.0 {
                        best = (l, w, b);
                    }
                }
            }
            cw = best.1;
            cb = best.2;
            span /= 20.0;
        }
        assert!((m.weights[0] - cw).abs() < 1e-3, "{} vs {cw}", m.weights[0]);
        assert!((m.intercept - cb).abs() < 1e-3, "{} vs {cb}", m.intercept);
    }

    #[test]
    fn rejects_bad_inputs() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(fit_logistic(&x, &[0.0, 2.0], 1.0).is_err());
        assert!(fit_logistic(&x, &[0.0, 1.0], 0.0).is_err());
        assert!(matches!(
            fit_logistic(&Matrix::zeros(0, 1), &[], 1.0),
            Err(Error::NoRows)
        ));
    }

    #[test]
    fn gradient_small_and_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| {
                let p = sigmoid(0.8 * r[0] - 1.2 * r[1] + 0.3);
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let c = 0.5;
        let m = fit_logistic(&x, &y, c).unwrap();
        let g = penalized_gradient(&x, &y, c, &m.weights, m.intercept);
        assert!(norm(&g) < 1e-6);

        // central differences of the loss agree with the analytic gradient at
        // perturbed parameters
        let h = 1e-5;
        for k in 0..5 {
            let w: Vec<f64> = m.weights.iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
            let b = m.intercept + rng.random_range(-0.3..0.3);
            let ga = penalized_gradient(&x, &y, c, &w, b);
            for j in 0..3 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                let (mut bp, mut bm) = (b, b);
                if j < 2 {
                    wp[j] += h;
                    wm[j] -= h;
                } else {
                    bp += h;
                    bm -= h;
                }
                let fd = (penalized_loss(&x, &y, c, &wp, bp) - penalized_loss(&x, &y, c, &wm, bm))
                    / (2.0 * h);
                assert!((fd - ga[j]).abs() < 1e-4 * (1.0 + fd.abs()), "perturbation {k}, coord {j}");
            }
        }
    }
}
