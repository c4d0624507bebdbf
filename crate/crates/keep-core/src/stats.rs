//! Rank statistics shared by the evaluation harnesses.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Nearest-rank percentile of an unsorted sample; `p` in (0, 100].
pub fn percentile_nearest_rank(values: &[f64], p: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let rank = ((p / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

pub fn median(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// 1-based average ranks (ties share the mean of their positions).
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let rank = (i + 1 + j + 1) as f64 / 2.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.is_empty() {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Two-sided Wilcoxon signed-rank test for paired samples.
///
/// Zero differences are dropped; if none remain the p-value is 1.0 by
/// contract. Uses exact enumeration over sign assignments for n <= 12 and a
/// tie-corrected normal approximation otherwise.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(1.0);
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    // Average ranks of integers are multiples of 1/2, so doubled ranks are
    // exact integers and tail comparisons need no float tolerance.
    let ranks2: Vec<u64> = ranks.iter().map(|r| (2.0 * r).round() as u64).collect();
    let w2_plus: u64 = diffs
        .iter()
        .zip(&ranks2)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, &r)| r)
        .sum();

    if n <= 12 {
        let total = 1u64 << n;
        let mut le = 0u64;
        let mut ge = 0u64;
        for mask in 0..total {
            let mut w2 = 0u64;
            for (bit, &r2) in ranks2.iter().enumerate() {
                if mask & (1 << bit) != 0 {
                    w2 += r2;
                }
            }
            if w2 <= w2_plus {
                le += 1;
            }
            if w2 >= w2_plus {
                ge += 1;
            }
        }
        let tail = le.min(ge) as f64 / total as f64;
        Ok((2.0 * tail).min(1.0))
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        // Tie correction: subtract sum(t^3 - t)/48 over tie groups.
        let mut tie_term = 0.0;
        let mut sorted = abs.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        if var <= 0.0 {
            return Ok(1.0);
        }
        let w_plus = w2_plus as f64 / 2.0;
        let z = (w_plus - mean) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let p = 2.0 * (1.0 - normal.cdf(z.abs()));
        Ok(p.clamp(f64::MIN_POSITIVE, 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_examples() {
        assert_eq!(percentile_nearest_rank(&[1.0, 2.0, 3.0, 4.0], 75.0), 3.0);
        assert_eq!(percentile_nearest_rank(&[7.0; 5], 30.0), 7.0);
        assert_eq!(percentile_nearest_rank(&[7.0; 5], 100.0), 7.0);
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 20.0, 30.0]), vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn spearman_of_monotone_transform_is_one() {
        let xs = [0.1, 0.4, 0.2, 0.9, 0.7];
        let ys: Vec<f64> = xs.iter().map(|x| x * x * x + 2.0).collect();
        assert!((spearman(&xs, &ys).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_degenerate_is_none() {
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_none());
    }

    #[test]
    fn wilcoxon_identical_samples() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(wilcoxon_signed_rank(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn wilcoxon_one_sided_dominance_n8() {
        let b = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let a: Vec<f64> = b.iter().map(|x| x + 1.0).collect();
        let p = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!((p - 2.0 / 256.0).abs() < 1e-12, "p = {p}");
    }

    #[test]
    fn wilcoxon_is_symmetric_two_sided() {
        let a = [1.0, 5.0, 2.0, 8.0, 3.0, 9.0];
        let b = [2.0, 3.0, 4.0, 4.0, 7.0, 1.0];
        let p1 = wilcoxon_signed_rank(&a, &b).unwrap();
        let p2 = wilcoxon_signed_rank(&b, &a).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn wilcoxon_normal_path_reasonable() {
        // 20 positive shifts of varying size: strongly significant.
        let b: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let a: Vec<f64> = b.iter().map(|x| x + 1.0 + (x % 3.0)).collect();
        let p = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(p < 0.001, "p = {p}");
        assert!(p > 0.0);
    }
}
