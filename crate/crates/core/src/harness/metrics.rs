use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AucResult {
    /// Mean over the classes that could be scored.
    pub macro_auc: f64,
    /// `None` for classes absent from the labels (or present in every row).
    pub per_class: Vec<Option<f64>>,
}

/// Rank-based (Mann–Whitney) AUC of `scores` for the positives; ties count
/// one half. `None` if either side is empty.
pub fn binary_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their average.
        let midrank = (i + j + 2) as f64 / 2.0;
        rank_sum += midrank * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos * n_neg) as f64)
}

/// Macro one-vs-rest AUC of row-major `[N, K]` scores.
pub fn compute_auc(scores: &[f64], num_classes: usize, labels: &[usize]) -> Result<AucResult> {
    let n = labels.len();
    if scores.len() != n * num_classes {
        return Err(Error::dim("auc", "score count", n * num_classes, scores.len()));
    }
    if n < 2 {
        return Err(Error::Data(format!("AUC needs at least 2 samples, got {n}")));
    }
    if let Some(&bad) = labels.iter().find(|&&c| c >= num_classes) {
        return Err(Error::Data(format!("label {bad} outside 0..{num_classes}")));
    }
    let mut per_class = Vec::with_capacity(num_classes);
    for k in 0..num_classes {
        let col: Vec<f64> = (0..n).map(|i| scores[i * num_classes + k]).collect();
        let pos: Vec<bool> = labels.iter().map(|&c| c == k).collect();
        let auc = binary_auc(&col, &pos);
        if auc.is_none() {
            warn!("class {k} has no positive or no negative examples; AUC skipped");
        }
        per_class.push(auc);
    }
    let scored: Vec<f64> = per_class.iter().flatten().copied().collect();
    if scored.is_empty() {
        return Err(Error::Data("AUC undefined: fewer than 2 classes present".into()));
    }
    Ok(AucResult {
        macro_auc: scored.iter().sum::<f64>() / scored.len() as f64,
        per_class,
    })
}

/// Fraction of correct predictions, in percent.
pub fn accuracy(pred: &[usize], labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    100.0 * hits as f64 / labels.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub class: String,
    pub support: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

pub fn per_class_scores(pred: &[usize], labels: &[usize], class_names: &[String]) -> Vec<ClassScores> {
    class_names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let tp = pred.iter().zip(labels).filter(|&(&p, &l)| p == k && l == k).count();
            let predicted = pred.iter().filter(|&&p| p == k).count();
            let support = labels.iter().filter(|&&l| l == k).count();
            ClassScores {
                class: name.clone(),
                support,
                precision: (predicted > 0).then(|| tp as f64 / predicted as f64),
                recall: (support > 0).then(|| tp as f64 / support as f64),
            }
        })
        .collect()
}

/// Sample mean and standard deviation (`n − 1` denominator; 0 for one value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_binary_case() {
        let auc = binary_auc(&[0.9, 0.8, 0.3], &[true, true, false]).unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn ties_and_separation() {
        assert_eq!(binary_auc(&[1.0; 6], &[true, false, true, false, false, true]), Some(0.5));
        assert_eq!(binary_auc(&[0.1, 0.2, 0.9], &[false, false, true]), Some(1.0));
        assert_eq!(binary_auc(&[0.1, 0.2, 0.9], &[true, true, false]), Some(0.0));
        assert_eq!(binary_auc(&[0.1, 0.2], &[true, true]), None);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(compute_auc(&[0.1, 0.9, 0.2, 0.8], 2, &[0, 0]).is_err());
    }

    #[test]
    fn missing_class_is_skipped() {
        let r = compute_auc(&[0.9, 0.1, 0.0, 0.1, 0.9, 0.0], 3, &[0, 1]).unwrap();
        assert_eq!(r.per_class[2], None);
        assert_eq!(r.macro_auc, 1.0);
    }

    #[test]
    fn precision_recall() {
        let names: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let s = per_class_scores(&[0, 0, 1, 1], &[0, 1, 1, 1], &names);
        assert_eq!(s[0].precision, Some(0.5));
        assert_eq!(s[0].recall, Some(1.0));
        assert_eq!(s[1].precision, Some(1.0));
        assert!((s[1].recall.unwrap() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mean_std_sample() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
