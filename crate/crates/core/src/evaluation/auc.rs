use crate::error::{Error, Result};

/// Exact ROC-AUC by the Mann–Whitney statistic with average ranks for tied
/// scores. Equal to the fraction of (positive, negative) pairs ranked
/// correctly, ties counted one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFinite { row: i, column: 0 });
    }
    let n_pos = labels.iter().filter(|&&p| p).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum of the positives keeps half-ranks integral.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j share the average (i+1+j)/2.
        let avg2 = (i + 1 + j) as u128;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k]).count() as u128;
        rank_sum2 += avg2 * pos_in_group;
        i = j;
    }
    let (p, n) = (n_pos as u128, n_neg as u128);
    // 2U = 2·R_pos − P(P+1)
    let u2 = rank_sum2 - p * (p + 1);
    let total2 = 2 * p * n;
    // Divide the smaller side so that AUC(y) + AUC(¬y) is exactly 1.
    let lo = u2.min(total2 - u2);
    let q = lo as f64 / total2 as f64;
    Ok(if u2 <= total2 - u2 { q } else { 1.0 - q })
}
