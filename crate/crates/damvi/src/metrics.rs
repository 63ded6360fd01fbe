//! Imbalance-aware evaluation: F1, the precision-recall curve, average
//! precision, and the two-sided Wilcoxon rank-sum test.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Real-valued scores with ground-truth labels in {-1, +1}.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPredictions {
    scores: Vec<f64>,
    labels: Vec<i8>,
}

impl ScoredPredictions {
    pub fn new(scores: Vec<f64>, labels: Vec<i8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::LengthMismatch {
                left: scores.len(),
                right: labels.len(),
            });
        }
        if scores.is_empty() {
            return Err(Error::EmptySample);
        }
        for &s in &scores {
            if !s.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "scores",
                    reason: format!("score {s} is not finite"),
                });
            }
        }
        for &y in &labels {
            if y != -1 && y != 1 {
                return Err(Error::InvalidLabel { value: y as i64 });
            }
        }
        Ok(Self { scores, labels })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }
}

/// Harmonic mean of precision and recall on hard {-1, +1} predictions.
/// Returns 0 when there are no true positives (including the degenerate
/// all-negative prediction), so sweep tables stay total.
pub fn f1_score(predictions: &[i8], labels: &[i8]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    for &v in predictions.iter().chain(labels) {
        if v != -1 && v != 1 {
            return Err(Error::InvalidLabel { value: v as i64 });
        }
    }
    if !labels.contains(&1) {
        return Err(Error::NoPositives);
    }

    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p, y) {
            (1, 1) => tp += 1,
            (1, -1) => fp += 1,
            (-1, 1) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// One point of the precision-recall curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub recall: f64,
    pub precision: f64,
}

/// Sweeps thresholds over the descending distinct scores, processing tied
/// scores as one block and emitting one (recall, precision) point per
/// threshold from the first block that contains a positive. Recall is
/// non-decreasing and reaches 1.0 at the final point.
pub fn pr_curve(sp: &ScoredPredictions) -> Result<Vec<PrPoint>> {
    let total_pos = sp.labels.iter().filter(|&&y| y == 1).count();
    if total_pos == 0 {
        return Err(Error::NoPositives);
    }

    let mut order: Vec<usize> = (0..sp.len()).collect();
    order.sort_by(|&a, &b| sp.scores[b].total_cmp(&sp.scores[a]));

    let mut points = Vec::new();
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let threshold = sp.scores[order[i]];
        let mut j = i;
        while j < order.len() && sp.scores[order[j]] == threshold {
            if sp.labels[order[j]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        if tp > 0 {
            points.push(PrPoint {
                recall: tp as f64 / total_pos as f64,
                precision: tp as f64 / (tp + fp) as f64,
            });
        }
        i = j;
    }
    Ok(points)
}

/// Area under the precision-recall curve by step-wise summation:
/// `sum (R_n - R_{n-1}) * P_n` with `R_0 = 0`.
pub fn average_precision(sp: &ScoredPredictions) -> Result<f64> {
    let points = pr_curve(sp)?;
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for p in points {
        ap += (p.recall - prev_recall) * p.precision;
        prev_recall = p.recall;
    }
    Ok(ap)
}

/// Writes a precision-recall curve as two-column CSV (recall, precision).
pub fn write_pr_curve_csv<W: std::io::Write>(points: &[PrPoint], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["recall", "precision"])?;
    for p in points {
        wtr.write_record([format!("{}", p.recall), format!("{}", p.precision)])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Result of a two-sided Wilcoxon rank-sum test. The statistic is the
/// midrank sum of the first sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSumTest {
    pub statistic: f64,
    pub p_value: f64,
}

/// Exact enumeration threshold: pooled sizes up to this run the full null
/// distribution; larger samples use the normal approximation with tie and
/// continuity corrections.
pub const WILCOXON_EXACT_LIMIT: usize = 12;

/// Two-sided Wilcoxon rank-sum test with midranks for ties. The two-sided
/// p-value is `P(|W - E[W]| >= |w_obs - E[W]|)` under the null that the
/// pooled values are exchangeable.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<RankSumTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    for &v in a.iter().chain(b) {
        if !v.is_finite() {
            return Err(Error::InvalidParameter {
                name: "sample",
                reason: format!("value {v} is not finite"),
            });
        }
    }

    let n_a = a.len();
    let n = n_a + b.len();
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let statistic: f64 = ranks[..n_a].iter().sum();

    let p_value = if n <= WILCOXON_EXACT_LIMIT {
        exact_p_value(&ranks, n_a, statistic)
    } else {
        normal_p_value(&pooled, n_a, statistic)
    };
    Ok(RankSumTest { statistic, p_value })
}

/// Average ranks (1-based) of the pooled sample, ties sharing their midrank.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1 ..= j; their average is (i+j+1)/2
        let rank = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    ranks
}

/// Exact null distribution of the rank sum by dynamic programming over the
/// doubled midranks (which are integers), counting size-`n_a` subsets by
/// their sum.
fn exact_p_value(ranks: &[f64], n_a: usize, statistic: f64) -> f64 {
    let n = ranks.len();
    let doubled: Vec<usize> = ranks.iter().map(|&r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum(); // n (n + 1)

    // counts[c][w] = number of size-c subsets with doubled-rank sum w
    let mut counts = vec![vec![0u64; total + 1]; n_a + 1];
    counts[0][0] = 1;
    for &d in &doubled {
        for c in (0..n_a).rev() {
            for w in 0..=total.saturating_sub(d) {
                if counts[c][w] > 0 {
                    counts[c + 1][w + d] += counts[c][w];
                }
            }
        }
    }

    // E[2W] = n_a (n + 1), an integer; compare absolute deviations exactly.
    let mean_doubled = (n_a * (n + 1)) as i64;
    let observed_doubled = (2.0 * statistic).round() as i64;
    let observed_dev = (observed_doubled - mean_doubled).abs();

    let mut extreme = 0u64;
    let mut all = 0u64;
    for (w, &count) in counts[n_a].iter().enumerate() {
        if count == 0 {
            continue;
        }
        all += count;
        if (w as i64 - mean_doubled).abs() >= observed_dev {
            extreme += count;
        }
    }
    extreme as f64 / all as f64
}

/// Normal approximation with tie correction and a continuity correction of
/// 1/2 toward the mean.
fn normal_p_value(pooled: &[f64], n_a: usize, statistic: f64) -> f64 {
    let n = pooled.len();
    let n_b = n - n_a;
    let mean = n_a as f64 * (n as f64 + 1.0) / 2.0;

    let mut tie_term = 0.0;
    let mut sorted: Vec<f64> = pooled.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }

    let nf = n as f64;
    let variance = (n_a as f64 * n_b as f64 / 12.0) * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if variance <= 0.0 {
        return 1.0;
    }

    let deviation = statistic - mean;
    let corrected = if deviation.abs() <= 0.5 {
        0.0
    } else {
        deviation - 0.5 * deviation.signum()
    };
    let z = corrected / variance.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * (1.0 - normal.cdf(z.abs()))).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_cases() {
        assert_eq!(f1_score(&[1, -1, 1], &[1, -1, 1]).unwrap(), 1.0);
        assert_eq!(f1_score(&[-1, -1, -1], &[1, -1, 1]).unwrap(), 0.0);

        // TP=2, FP=1, FN=2 -> P=2/3, R=1/2, F1=4/7
        let predictions = [1, 1, 1, -1, -1, -1];
        let labels = [1, 1, -1, 1, 1, -1];
        let f1 = f1_score(&predictions, &labels).unwrap();
        assert!((f1 - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn f1_requires_positives() {
        assert!(matches!(
            f1_score(&[1, 1], &[-1, -1]).unwrap_err(),
            Error::NoPositives
        ));
        assert!(matches!(
            f1_score(&[1], &[1, 1]).unwrap_err(),
            Error::LengthMismatch { .. }
        ));
    }

    #[test]
    fn f1_permutation_invariant() {
        let predictions = [1, -1, 1, 1, -1];
        let labels = [1, 1, -1, 1, -1];
        let f1 = f1_score(&predictions, &labels).unwrap();
        let perm = [2usize, 0, 4, 1, 3];
        let p2: Vec<i8> = perm.iter().map(|&i| predictions[i]).collect();
        let l2: Vec<i8> = perm.iter().map(|&i| labels[i]).collect();
        assert_eq!(f1, f1_score(&p2, &l2).unwrap());
    }

    #[test]
    fn pr_curve_tabulated() {
        let sp = ScoredPredictions::new(vec![0.9, 0.8, 0.7], vec![1, -1, 1]).unwrap();
        let points = pr_curve(&sp).unwrap();
        assert_eq!(points.len(), 3);
        assert_eq!(
            points[0],
            PrPoint {
                recall: 0.5,
                precision: 1.0
            }
        );
        assert_eq!(
            points[1],
            PrPoint {
                recall: 0.5,
                precision: 0.5
            }
        );
        assert!((points[2].recall - 1.0).abs() < 1e-15);
        assert!((points[2].precision - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pr_curve_perfect_ranking() {
        let sp = ScoredPredictions::new(vec![0.9, 0.8, 0.2, 0.1], vec![1, 1, -1, -1]).unwrap();
        let points = pr_curve(&sp).unwrap();
        assert!(points.iter().any(|p| p.recall == 1.0 && p.precision == 1.0));
    }

    #[test]
    fn pr_curve_all_tied() {
        let sp = ScoredPredictions::new(vec![0.5, 0.5, 0.5, 0.5], vec![1, -1, -1, -1]).unwrap();
        let points = pr_curve(&sp).unwrap();
        assert_eq!(
            points,
            vec![PrPoint {
                recall: 1.0,
                precision: 0.25
            }]
        );
    }

    #[test]
    fn ap_cases() {
        let perfect = ScoredPredictions::new(vec![0.9, 0.8, 0.2], vec![1, 1, -1]).unwrap();
        assert_eq!(average_precision(&perfect).unwrap(), 1.0);

        let sp = ScoredPredictions::new(vec![0.9, 0.8, 0.7], vec![1, -1, 1]).unwrap();
        let ap = average_precision(&sp).unwrap();
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn ap_equals_mean_precision_at_positive_ranks_when_tie_free() {
        let scores = vec![0.95, 0.9, 0.61, 0.58, 0.44, 0.32, 0.21, 0.15];
        let labels = vec![1, -1, 1, 1, -1, -1, 1, -1];
        let sp = ScoredPredictions::new(scores.clone(), labels.clone()).unwrap();
        let ap = average_precision(&sp).unwrap();

        // Equivalent definition: mean precision at each true-positive rank.
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let mut tp = 0;
        let mut precisions = Vec::new();
        for (rank, &idx) in order.iter().enumerate() {
            if labels[idx] == 1 {
                tp += 1;
                precisions.push(tp as f64 / (rank + 1) as f64);
            }
        }
        let mean: f64 = precisions.iter().sum::<f64>() / precisions.len() as f64;
        assert!((ap - mean).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_identical_samples() {
        let a = [1.0, 2.0, 3.0];
        let t = wilcoxon_rank_sum(&a, &a).unwrap();
        assert!(t.p_value >= 0.99);
    }

    #[test]
    fn wilcoxon_extreme_separation_exact() {
        let t = wilcoxon_rank_sum(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert_eq!(t.statistic, 6.0);
        assert!((t.p_value - 0.1).abs() < 1e-12);
    }

    #[test]
    fn wilcoxon_monotone_transform_invariant() {
        let a = [0.2, 1.5, 0.9, 2.4];
        let b = [0.4, 3.1, 0.7];
        let t1 = wilcoxon_rank_sum(&a, &b).unwrap();
        let fa: Vec<f64> = a.iter().map(|&x| x.exp() + 1.0).collect();
        let fb: Vec<f64> = b.iter().map(|&x| x.exp() + 1.0).collect();
        let t2 = wilcoxon_rank_sum(&fa, &fb).unwrap();
        assert_eq!(t1.statistic, t2.statistic);
        assert_eq!(t1.p_value, t2.p_value);
    }

    #[test]
    fn wilcoxon_normal_approximation_branch() {
        let a: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..10).map(|i| i as f64 + 20.0).collect();
        let t = wilcoxon_rank_sum(&a, &b).unwrap();
        assert!(t.p_value < 0.001);

        let tied = vec![1.0; 10];
        let t = wilcoxon_rank_sum(&tied, &[1.0; 10]).unwrap();
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn wilcoxon_rejects_empty() {
        assert!(matches!(
            wilcoxon_rank_sum(&[], &[1.0]).unwrap_err(),
            Error::EmptySample
        ));
    }

    #[test]
    fn pr_csv_export() {
        let sp = ScoredPredictions::new(vec![0.9, 0.8, 0.7], vec![1, -1, 1]).unwrap();
        let points = pr_curve(&sp).unwrap();
        let mut buf = Vec::new();
        write_pr_curve_csv(&points, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("recall,precision\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
