//! Ranking and regression metrics shared by tuning and evaluation.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// Area under the ROC curve via the Mann-Whitney rank statistic.
/// Tied scores receive their average rank, so each tied positive/negative
/// pair counts one half.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "auc: {} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidInput("auc: NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j share their mean
        let mid_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_block = order[i..j].iter().filter(|&&k| labels[k]).count();
        rank_sum_pos += mid_rank * pos_in_block as f64;
        i = j;
    }
    let n_pos = n_pos as f64;
    let n_neg = n_neg as f64;
    Ok((rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg))
}

pub fn mse(predictions: &[f64], targets: &[f64]) -> Result<f64> {
    if predictions.len() != targets.len() || targets.is_empty() {
        return Err(Error::InvalidInput(format!(
            "mse: {} predictions vs {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let sse: f64 = predictions
        .iter()
        .zip(targets)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sse / targets.len() as f64)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population standard deviation (divides by n).
pub fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn perfect_and_reversed() {
        let truth = [true, false, true, false];
        let s: Vec<f64> = truth.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
        assert_eq!(auc(&s, &truth).unwrap(), 1.0);
        let r: Vec<f64> = s.iter().map(|v| 1.0 - v).collect();
        assert_eq!(auc(&r, &truth).unwrap(), 0.0);
    }

    #[test]
    fn six_rows_with_one_tie() {
        // positives {0.9, 0.4, 0.3}, negatives {0.4, 0.2, 0.1}
        // pairs won: 0.9 beats 3; 0.4 beats 2 and ties 1; 0.3 beats 2 -> 7.5 / 9
        let scores = [0.9, 0.4, 0.3, 0.4, 0.2, 0.1];
        let labels = [true, true, true, false, false, false];
        let a = auc(&scores, &labels).unwrap();
        assert!((a - 7.5 / 9.0).abs() < 1e-15);
        assert!((a - brute_force_auc(&scores, &labels)).abs() < 1e-15);
    }

    #[test]
    fn single_class_is_error() {
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::SingleClass)));
    }

    proptest::proptest! {
        #[test]
        fn matches_pair_counting(
            pairs in proptest::collection::vec((0u8..6, proptest::bool::ANY), 2..40)
        ) {
            let scores: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
            let labels: Vec<bool> = pairs.iter().map(|p| p.1).collect();
            if labels.iter().any(|&l| l) && labels.iter().any(|&l| !l) {
                let a = auc(&scores, &labels).unwrap();
                proptest::prop_assert!((a - brute_force_auc(&scores, &labels)).abs() < 1e-12);
                // strictly monotone transform leaves AUC unchanged
                let t: Vec<f64> = scores.iter().map(|s| (s * 0.7).exp() - 3.0).collect();
                proptest::prop_assert!((auc(&t, &labels).unwrap() - a).abs() < 1e-12);
            }
        }
    }
}
