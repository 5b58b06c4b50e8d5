//! Saliency evaluation metrics: mean absolute error and the max-F measure
//! over a fixed 256-threshold sweep.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// F-measure weighting used throughout: β² = 0.3 emphasizes precision.
pub const BETA_SQ: f64 = 0.3;

/// Number of binarization thresholds in the precision/recall sweep.
pub const N_THRESHOLDS: usize = 256;

/// Precision/recall pairs over the fixed threshold grid t_k = k / 256.
#[derive(Debug, Clone)]
pub struct PrCurve {
    pub thresholds: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

impl PrCurve {
    /// F_β at every threshold; 0 where precision and recall both vanish.
    pub fn f_scores(&self, beta_sq: f64) -> Vec<f64> {
        self.precision
            .iter()
            .zip(&self.recall)
            .map(|(&p, &r)| {
                let den = beta_sq * p + r;
                if den == 0.0 {
                    0.0
                } else {
                    (1.0 + beta_sq) * p * r / den
                }
            })
            .collect()
    }
}

fn check_pair(s: &Tensor, g: &Tensor) -> Result<()> {
    if s.shape() != g.shape() {
        return Err(Error::shape(format!(
            "prediction shape {:?} does not match ground truth {:?}",
            s.shape(),
            g.shape()
        )));
    }
    if let Some(bad) = g.data().iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::contract(format!(
            "ground truth must be binary, found {bad}"
        )));
    }
    if let Some(bad) = s.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::contract(format!(
            "prediction values must lie in [0, 1], found {bad}"
        )));
    }
    Ok(())
}

/// Mean absolute error between a saliency map and a binary ground truth.
pub fn mae(s: &Tensor, g: &Tensor) -> Result<f64> {
    check_pair(s, g)?;
    let total: f64 = s
        .data()
        .iter()
        .zip(g.data())
        .map(|(&a, &b)| (a - b).abs())
        .sum();
    Ok(total / s.numel() as f64)
}

/// Precision/recall curve over thresholds k/256 for k = 0..255.
///
/// A pixel counts as predicted-positive at threshold t when its value is
/// ≥ t. Precision defaults to 1 when nothing is predicted positive. An
/// all-background ground truth has no defined recall and is reported as an
/// error rather than a silent zero.
pub fn pr_curve(s: &Tensor, g: &Tensor) -> Result<PrCurve> {
    check_pair(s, g)?;
    let positives: f64 = g.data().iter().sum();
    if positives == 0.0 {
        return Err(Error::MetricUndefined(
            "ground truth has no foreground pixels; recall is undefined".into(),
        ));
    }

    // 1. Histogram predictions into the 256 threshold bins, split by label.
    //    bin(p) = ⌊256 p⌋ capped at 255, so p ≥ k/256 ⟺ bin(p) ≥ k.
    let mut pos_hist = [0u64; N_THRESHOLDS];
    let mut neg_hist = [0u64; N_THRESHOLDS];
    for (&p, &t) in s.data().iter().zip(g.data()) {
        let bin = ((p * N_THRESHOLDS as f64) as usize).min(N_THRESHOLDS - 1);
        if t == 1.0 {
            pos_hist[bin] += 1;
        } else {
            neg_hist[bin] += 1;
        }
    }

    // 2. Suffix sums give TP and FP at each threshold in one pass.
    let mut thresholds = Vec::with_capacity(N_THRESHOLDS);
    let mut precision = Vec::with_capacity(N_THRESHOLDS);
    let mut recall = Vec::with_capacity(N_THRESHOLDS);
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut rows = Vec::with_capacity(N_THRESHOLDS);
    for k in (0..N_THRESHOLDS).rev() {
        tp += pos_hist[k];
        fp += neg_hist[k];
        rows.push((k, tp, fp));
    }
    for &(k, tp, fp) in rows.iter().rev() {
        thresholds.push(k as f64 / N_THRESHOLDS as f64);
        precision.push(if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        });
        recall.push(tp as f64 / positives);
    }
    Ok(PrCurve { thresholds, precision, recall })
}

/// Maximum F_β over the threshold sweep, together with the full curve.
pub fn max_f_beta(s: &Tensor, g: &Tensor, beta_sq: f64) -> Result<(f64, PrCurve)> {
    let curve = pr_curve(s, g)?;
    let best = curve
        .f_scores(beta_sq)
        .into_iter()
        .fold(0.0f64, |m, f| m.max(f));
    Ok((best, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::rand_tensor;

    /// Dead-simple per-threshold recount, used as the oracle for the
    /// histogram implementation.
    fn naive_curve(s: &Tensor, g: &Tensor) -> (Vec<f64>, Vec<f64>) {
        let mut precision = Vec::new();
        let mut recall = Vec::new();
        let positives: f64 = g.data().iter().sum();
        for k in 0..N_THRESHOLDS {
            let t = k as f64 / N_THRESHOLDS as f64;
            let (mut tp, mut fp) = (0u64, 0u64);
            for (&p, &gt) in s.data().iter().zip(g.data()) {
                if p >= t {
                    if gt == 1.0 {
                        tp += 1;
                    } else {
                        fp += 1;
                    }
                }
            }
            precision.push(if tp + fp == 0 {
                1.0
            } else {
                tp as f64 / (tp + fp) as f64
            });
            recall.push(tp as f64 / positives);
        }
        (precision, recall)
    }

    fn half_mask(n: usize) -> Tensor {
        Tensor::from_fn(&[1, n, n], |i| if (i % n) < n / 2 { 1.0 } else { 0.0 })
    }

    #[test]
    fn histogram_curve_matches_naive_recount() {
        for seed in 0..10 {
            let s = rand_tensor(&[1, 9, 11], 0.0, 1.0, seed);
            let g = Tensor::from_fn(&[1, 9, 11], |i| ((i * 7 + seed as usize) % 3 == 0) as u8 as f64);
            if g.data().iter().sum::<f64>() == 0.0 {
                continue;
            }
            let curve = pr_curve(&s, &g).unwrap();
            let (np, nr) = naive_curve(&s, &g);
            for k in 0..N_THRESHOLDS {
                assert_eq!(curve.precision[k], np[k], "precision at bin {k}");
                assert_eq!(curve.recall[k], nr[k], "recall at bin {k}");
            }
        }
    }

    #[test]
    fn perfect_prediction_scores_perfectly() {
        let g = half_mask(8);
        assert_eq!(mae(&g, &g).unwrap(), 0.0);
        let (f, _) = max_f_beta(&g, &g, BETA_SQ).unwrap();
        assert_eq!(f, 1.0);
    }

    #[test]
    fn known_values() {
        let g = half_mask(8);
        let ones = Tensor::full(&[1, 8, 8], 1.0);
        // All-positive prediction on a half-foreground mask: P = 1/2, R = 1,
        // F = 1.3·0.5/(0.3·0.5 + 1) = 0.565217…
        let (f, _) = max_f_beta(&ones, &g, BETA_SQ).unwrap();
        assert!((f - 1.3 * 0.5 / 1.15).abs() < 1e-12, "got {f}");

        let flat = Tensor::full(&[1, 8, 8], 0.5);
        assert!((mae(&flat, &g).unwrap() - 0.5).abs() < 1e-15);

        let s = Tensor::new(&[2], vec![0.2, 0.9]).unwrap();
        let gt = Tensor::new(&[2], vec![0.0, 1.0]).unwrap();
        assert!((mae(&s, &gt).unwrap() - 0.15).abs() < 1e-15);
    }

    #[test]
    fn mae_complement_symmetry() {
        let s = rand_tensor(&[1, 6, 6], 0.0, 1.0, 3);
        let g = half_mask(6);
        let s_c = Tensor::from_fn(s.shape(), |i| 1.0 - s.data()[i]);
        let g_c = Tensor::from_fn(g.shape(), |i| 1.0 - g.data()[i]);
        let a = mae(&s, &g).unwrap();
        let b = mae(&s_c, &g_c).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn recall_never_increases_with_threshold() {
        for seed in 0..5 {
            let s = rand_tensor(&[1, 12, 12], 0.0, 1.0, 40 + seed);
            let g = half_mask(12);
            let curve = pr_curve(&s, &g).unwrap();
            for k in 1..N_THRESHOLDS {
                assert!(
                    curve.recall[k] <= curve.recall[k - 1] + 1e-15,
                    "recall rose at bin {k}"
                );
            }
        }
    }

    #[test]
    fn max_f_invariant_under_contrast_compression() {
        // Values on the 1/64 grid stay strictly inside distinct threshold
        // bins before and after s ↦ 0.5 s + 0.25, so every achievable
        // binarization — and hence the max-F — is preserved exactly.
        for seed in 0..5 {
            let s = Tensor::from_fn(&[1, 10, 10], |i| {
                let r = rand_tensor(&[1], 0.0, 64.0, 900 + seed * 131 + i as u64);
                (r.data()[0] as usize) as f64 / 64.0
            });
            let g = half_mask(10);
            let squeezed = Tensor::from_fn(s.shape(), |i| 0.5 * s.data()[i] + 0.25);
            let (f_orig, _) = max_f_beta(&s, &g, BETA_SQ).unwrap();
            let (f_sq, _) = max_f_beta(&squeezed, &g, BETA_SQ).unwrap();
            assert_eq!(f_orig, f_sq, "seed {seed}");
        }
    }

    #[test]
    fn empty_ground_truth_is_flagged() {
        let s = Tensor::full(&[1, 4, 4], 0.7);
        let g = Tensor::zeros(&[1, 4, 4]);
        assert!(matches!(
            pr_curve(&s, &g),
            Err(Error::MetricUndefined(_))
        ));
        // MAE stays well-defined for the same pair.
        assert!((mae(&s, &g).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let s = Tensor::full(&[1, 4, 4], 1.5);
        let g = half_mask(4);
        assert!(mae(&s, &g).is_err());
        let soft_g = Tensor::full(&[1, 4, 4], 0.5);
        assert!(mae(&soft_g.clone(), &soft_g).is_err());
        let mismatched = Tensor::zeros(&[1, 2, 2]);
        assert!(pr_curve(&mismatched, &g).is_err());
    }
}
