//! Multi-label evaluation metrics shared by the synthetic environment and
//! external trainers.
//!
//! Score and label matrices are given per class: `scores[k][i]` is the score of
//! sample `i` for class `k`.

use crate::error::{Error, Result};

/// Mean over positive ranks of precision@rank, ranking by descending score with
/// ties kept in input order. `None` when there are no positives.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<Option<f64>> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Stable sort keeps equal scores in their original order.
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok((hits > 0).then(|| sum / hits as f64))
}

fn check_matrix(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::InvalidInput("no classes".into()));
    }
    for (s, l) in scores.iter().zip(labels) {
        if s.len() != l.len() {
            return Err(Error::DimensionMismatch {
                expected: s.len(),
                got: l.len(),
            });
        }
    }
    Ok(())
}

/// Mean AP over classes; classes without positives are skipped with a warning.
pub fn compute_map(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<f64> {
    check_matrix(scores, labels)?;
    let mut total = 0.0;
    let mut n = 0usize;
    for (k, (s, l)) in scores.iter().zip(labels).enumerate() {
        match average_precision(s, l)? {
            Some(ap) => {
                total += ap;
                n += 1;
            }
            None => log::warn!("class {k} has no positives; skipped from mAP"),
        }
    }
    if n == 0 {
        return Err(Error::InvalidInput("no class has a positive label".into()));
    }
    Ok(total / n as f64)
}

/// F1 at a score threshold. A class with no positives and no predicted positives scores 1.
pub fn f1_at_threshold(scores: &[f64], labels: &[bool], threshold: f64) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (s, l) in scores.iter().zip(labels) {
        match (*s >= threshold, *l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Class indices split by frequency: top 25 %, middle 50 %, bottom 25 %.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Strata {
    pub head: Vec<usize>,
    pub mid: Vec<usize>,
    pub tail: Vec<usize>,
}

/// Ranks classes by descending frequency (ties by index). Each quartile holds
/// `max(1, K / 4)` classes; with fewer than three classes head and tail overlap
/// the middle.
pub fn frequency_strata(frequencies: &[f64]) -> Strata {
    let k = frequencies.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| frequencies[b].total_cmp(&frequencies[a]));
    let q = (k / 4).max(1).min(k);
    let head = order[..q].to_vec();
    let tail = order[k - q..].to_vec();
    let mid = if k > 2 * q { order[q..k - q].to_vec() } else { order.clone() };
    Strata { head, mid, tail }
}

fn positives(labels: &[Vec<bool>]) -> Vec<f64> {
    labels.iter().map(|l| l.iter().filter(|x| **x).count() as f64).collect()
}

fn mean_f1(scores: &[Vec<f64>], labels: &[Vec<bool>], classes: &[usize]) -> f64 {
    classes
        .iter()
        .map(|&k| f1_at_threshold(&scores[k], &labels[k], 0.5))
        .sum::<f64>()
        / classes.len() as f64
}

/// Mean F1 at threshold 0.5 over each frequency stratum: `(head, mid, tail)`.
pub fn stratified_f1(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<(f64, f64, f64)> {
    check_matrix(scores, labels)?;
    let strata = frequency_strata(&positives(labels));
    Ok((
        mean_f1(scores, labels, &strata.head),
        mean_f1(scores, labels, &strata.mid),
        mean_f1(scores, labels, &strata.tail),
    ))
}

/// Mean F1 at threshold 0.5 over the bottom 25 % least frequent classes.
pub fn compute_rare_f1(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<f64> {
    Ok(stratified_f1(scores, labels)?.2)
}

/// Mean per-class recall at threshold 0.5 over classes with at least one positive.
pub fn compute_bacc(scores: &[Vec<f64>], labels: &[Vec<bool>]) -> Result<f64> {
    check_matrix(scores, labels)?;
    let recalls: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter_map(|(s, l)| {
            let pos = l.iter().filter(|x| **x).count();
            (pos > 0).then(|| {
                let tp = s.iter().zip(l).filter(|(s, l)| **l && **s >= 0.5).count();
                tp as f64 / pos as f64
            })
        })
        .collect();
    if recalls.is_empty() {
        return Err(Error::InvalidInput("no class has a positive label".into()));
    }
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_ranking() {
        let ap = average_precision(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(ap, Some(1.0));
    }

    #[test]
    fn positive_ranked_last() {
        let ap = average_precision(&[4.0, 3.0, 2.0, 1.0], &[false, false, false, true]).unwrap();
        assert_eq!(ap, Some(0.25));
    }

    #[test]
    fn ties_keep_input_order() {
        // Equal scores: the positive listed second is ranked second.
        let ap = average_precision(&[1.0, 1.0], &[false, true]).unwrap();
        assert_eq!(ap, Some(0.5));
        let ap = average_precision(&[1.0, 1.0], &[true, false]).unwrap();
        assert_eq!(ap, Some(1.0));
    }

    #[test]
    fn no_positives() {
        assert_eq!(average_precision(&[0.1, 0.2], &[false, false]).unwrap(), None);
        assert!(average_precision(&[0.1], &[false, true]).is_err());
        let m = compute_map(
            &[vec![0.9, 0.1], vec![0.3, 0.2]],
            &[vec![true, false], vec![false, false]],
        )
        .unwrap();
        assert_eq!(m, 1.0);
    }

    #[test]
    fn rare_f1_perfect_predictions() {
        let labels: Vec<Vec<bool>> = (0..8).map(|k| (0..10).map(|i| i < k + 1).collect()).collect();
        let scores: Vec<Vec<f64>> = labels
            .iter()
            .map(|l| l.iter().map(|x| if *x { 0.9 } else { 0.1 }).collect())
            .collect();
        assert_eq!(compute_rare_f1(&scores, &labels).unwrap(), 1.0);
        assert_eq!(compute_bacc(&scores, &labels).unwrap(), 1.0);
    }

    #[test]
    fn strata_sizes() {
        let f: Vec<f64> = (0..20).map(|k| 100.0 - k as f64).collect();
        let s = frequency_strata(&f);
        assert_eq!(s.head, vec![0, 1, 2, 3, 4]);
        assert_eq!(s.mid.len(), 10);
        assert_eq!(s.tail, vec![15, 16, 17, 18, 19]);
    }

    #[test]
    fn bacc_is_mean_recall() {
        let scores = vec![vec![0.9, 0.2], vec![0.9, 0.9]];
        let labels = vec![vec![true, true], vec![true, false]];
        assert_eq!(compute_bacc(&scores, &labels).unwrap(), 0.75);
    }
}
