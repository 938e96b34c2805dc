//! Ranking and classification metrics for scored positive/negative pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability that a random positive outscores a random negative, counting
/// ties as one half. Computed from midranks in `O((p + q) log(p + q))`.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Domain("auc needs at least one positive and one negative score".into()));
    }
    check_scores(pos)?;
    check_scores(neg)?;
    let mut all: Vec<(f64, bool)> = pos.iter().map(|&s| (s, true)).chain(neg.iter().map(|&s| (s, false))).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Sum of 1-based midranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        let npos = all[i..j].iter().filter(|e| e.1).count();
        rank_sum += midrank * npos as f64;
        i = j;
    }
    let (p, q) = (pos.len() as f64, neg.len() as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Sum over ranked items of `(R_n - R_{n-1}) P_n`, one threshold per item.
/// Items are ranked by descending score, ties by ascending input index.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape("average_precision", (scores.len(), 1), (labels.len(), 1)));
    }
    check_scores(scores)?;
    let total_pos = labels.iter().filter(|&&l| l).count();
    if total_pos == 0 {
        return Err(Error::Domain("average precision needs at least one positive".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Scores are NaN-free, so `partial_cmp` is total here and, unlike
    // `total_cmp`, ties -0.0 with 0.0.
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    let mut tp = 0usize;
    let mut ap = 0.0;
    for (n, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
            // Recall rises by 1/total_pos exactly at positive items.
            ap += tp as f64 / (n + 1) as f64;
        }
    }
    Ok(ap / total_pos as f64)
}

/// Fraction of positives ranked within the top `k` against the negatives,
/// where a negative scoring at least as high as a positive ranks above it.
pub fn hits_at_k(pos: &[f64], neg: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Domain("hits@k needs k >= 1".into()));
    }
    if neg.len() < k {
        return Err(Error::Domain(format!("hits@{k} undefined with {} negatives", neg.len())));
    }
    if pos.is_empty() {
        return Err(Error::Domain("hits@k needs at least one positive".into()));
    }
    check_scores(pos)?;
    check_scores(neg)?;
    let mut sorted = neg.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let kth = sorted[k - 1];
    let hits = pos.iter().filter(|&&s| s > kth).count();
    Ok(hits as f64 / pos.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

/// Counts with an item predicted positive iff `score >= threshold`.
pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Confusion> {
    if scores.len() != labels.len() {
        return Err(Error::shape("confusion", (scores.len(), 1), (labels.len(), 1)));
    }
    let mut c = Confusion::default();
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: f64,
    pub ap: f64,
    /// `None` when there are fewer than `k` negatives.
    pub hits_at_k: Option<f64>,
    pub k: usize,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl MetricsReport {
    pub fn compute(pos: &[f64], neg: &[f64], k: usize) -> Result<Self> {
        let auc = auc(pos, neg)?;
        let scores: Vec<f64> = pos.iter().chain(neg).copied().collect();
        let labels: Vec<bool> = (0..scores.len()).map(|i| i < pos.len()).collect();
        let ap = average_precision(&scores, &labels)?;
        let hits_at_k = if neg.len() >= k && k >= 1 {
            Some(hits_at_k(pos, neg, k)?)
        } else {
            None
        };
        Ok(Self {
            auc,
            ap,
            hits_at_k,
            k,
            n_pos: pos.len(),
            n_neg: neg.len(),
        })
    }
}

fn check_scores(s: &[f64]) -> Result<()> {
    if s.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric("NaN score".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8], &[0.1, 0.2]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 4], &[0.3; 7]).unwrap(), 0.5);
        assert_eq!(auc(&[0.7], &[0.9, 0.5, 0.7]).unwrap(), 0.5);
        assert!(auc(&[], &[0.1]).is_err());
        assert!(auc(&[0.1], &[]).is_err());
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[0.4], &[true]).unwrap(), 1.0);
        assert_abs_diff_eq!(
            average_precision(&[0.9, 0.8, 0.7], &[true, false, true]).unwrap(),
            0.5 + 0.5 * 2.0 / 3.0,
            epsilon = 1e-15
        );
        assert_eq!(average_precision(&[0.9, 0.8, 0.1, 0.2], &[true, true, false, false]).unwrap(), 1.0);
        assert!(average_precision(&[0.9], &[false]).is_err());
    }

    #[test]
    fn ap_ties_follow_input_order() {
        // Same scores; the positive listed first is ranked first.
        assert_eq!(average_precision(&[0.5, 0.5], &[true, false]).unwrap(), 1.0);
        assert_eq!(average_precision(&[0.5, 0.5], &[false, true]).unwrap(), 0.5);
    }

    #[test]
    fn hits_examples() {
        let neg: Vec<f64> = (0..100).map(|i| i as f64 / 200.0).collect();
        assert_eq!(hits_at_k(&[0.9, 0.95], &neg, 20).unwrap(), 1.0);
        // The 20th-highest negative is 80/200; a tie is not a hit.
        assert_eq!(hits_at_k(&[0.4], &neg, 20).unwrap(), 0.0);
        assert_eq!(hits_at_k(&[0.401], &neg, 20).unwrap(), 1.0);
        assert_eq!(hits_at_k(&[0.9, 0.8, 0.1, 0.0], &neg, 20).unwrap(), 0.5);
        assert!(hits_at_k(&[0.9], &neg[..19], 20).is_err());
        assert!(hits_at_k(&[0.9], &neg, 0).is_err());
    }

    #[test]
    fn confusion_examples() {
        let c = confusion(&[0.9, 0.1], &[true, false], 0.5).unwrap();
        assert_eq!((c.tp, c.fp, c.tn, c.fn_), (1, 0, 1, 0));
        let c = confusion(&[0.9, 0.1, 0.3], &[true, false, true], 1.0).unwrap();
        assert_eq!((c.tp, c.fp), (0, 0));
        let c = confusion(&[0.9, 0.1, 0.3], &[true, false, true], 0.0).unwrap();
        assert_eq!((c.tn, c.fn_), (0, 0));
    }

    #[test]
    fn report_without_enough_negatives() {
        let r = MetricsReport::compute(&[0.9, 0.2], &[0.1, 0.3], 20).unwrap();
        assert_eq!(r.hits_at_k, None);
        assert_eq!(r.auc, 0.75);
        assert_eq!((r.n_pos, r.n_neg, r.k), (2, 2, 20));
    }

    #[test]
    fn nan_scores_rejected() {
        assert!(auc(&[f64::NAN], &[0.1]).is_err());
        assert!(average_precision(&[f64::NAN], &[true]).is_err());
    }

    #[test]
    fn signed_zeros_tie() {
        // Ties keep input order, so the positive listed first ranks first.
        assert_eq!(average_precision(&[-0.0, 0.0], &[true, false]).unwrap(), 1.0);
        assert_eq!(auc(&[-0.0], &[0.0]).unwrap(), 0.5);
    }
}
