//! Per-iteration evaluation of an ensemble.
//!
//! Probabilities always come from the half-logit link `p = 1/(1 + e^{−2F})`.
//! Ties follow one rule: `sign(0) = +1`, equivalently `p̂ = 0.5` predicts +1.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::engine::Ensemble;
use crate::error::{Error, Result};
use crate::loss::half_logit_prob;

/// Clip applied to `p̂` when evaluating the log-likelihood.
pub const NLL_CLIP: f64 = 1e-15;
pub const EXTREME_LO: f64 = 0.01;
pub const EXTREME_HI: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Holdout,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Holdout => "holdout",
        }
    }
}

/// One row of a learning curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub split: Split,
    pub miscl: f64,
    pub exp_loss: f64,
    pub nll: f64,
    pub prob_mse: Option<f64>,
    pub frac_extreme: f64,
}

/// All metrics of one split from precomputed scores.
pub fn curve_point(iteration: usize, split: Split, scores: &[f64], data: &Dataset) -> CurvePoint {
    let y = data.labels();
    CurvePoint {
        iteration,
        split,
        miscl: miscl_from_scores(y, scores),
        exp_loss: mean(y.iter().zip(scores).map(|(&y, &f)| (-y * f).exp())),
        nll: nll_from_scores(y, scores),
        prob_mse: data.true_probs().map(|p| prob_mse_from_scores(p, scores)),
        frac_extreme: extreme_from_scores(scores, EXTREME_LO, EXTREME_HI),
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

#[inline]
pub fn predicted_label(f: f64) -> f64 {
    if f >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn miscl_from_scores(labels: &[f64], scores: &[f64]) -> f64 {
    mean(
        labels
            .iter()
            .zip(scores)
            .map(|(&y, &f)| if predicted_label(f) != y { 1.0 } else { 0.0 }),
    )
}

pub fn nll_from_scores(labels: &[f64], scores: &[f64]) -> f64 {
    mean(labels.iter().zip(scores).map(|(&y, &f)| {
        // P̂(Y = y | x) is the link evaluated at yF.
        let p = half_logit_prob(y * f).clamp(NLL_CLIP, 1.0 - NLL_CLIP);
        -p.ln()
    }))
}

pub fn extreme_from_scores(scores: &[f64], lo: f64, hi: f64) -> f64 {
    mean(scores.iter().map(|&f| {
        let p = half_logit_prob(f);
        if p < lo || p > hi {
            1.0
        } else {
            0.0
        }
    }))
}

pub fn prob_mse_from_scores(true_probs: &[f64], scores: &[f64]) -> f64 {
    mean(
        true_probs
            .iter()
            .zip(scores)
            .map(|(&p, &f)| (half_logit_prob(f) - p).powi(2)),
    )
}

fn scores_of(ensemble: &Ensemble, data: &Dataset) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::domain("metric of an empty dataset"));
    }
    ensemble.predict_dataset(data)
}

pub fn misclassification_rate(ensemble: &Ensemble, data: &Dataset) -> Result<f64> {
    Ok(miscl_from_scores(data.labels(), &scores_of(ensemble, data)?))
}

pub fn mean_negative_log_likelihood(ensemble: &Ensemble, data: &Dataset) -> Result<f64> {
    Ok(nll_from_scores(data.labels(), &scores_of(ensemble, data)?))
}

pub fn extreme_probability_fraction(ensemble: &Ensemble, data: &Dataset, lo: f64, hi: f64) -> Result<f64> {
    Ok(extreme_from_scores(&scores_of(ensemble, data)?, lo, hi))
}

pub fn probability_mse(ensemble: &Ensemble, data: &Dataset) -> Result<f64> {
    let probs = data
        .true_probs()
        .ok_or_else(|| Error::Unsupported("probability MSE needs true probabilities".into()))?;
    Ok(prob_mse_from_scores(probs, &scores_of(ensemble, data)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Tree;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant(f: f64) -> Ensemble {
        Ensemble::new(f)
    }

    fn data(labels: &[f64], probs: Option<Vec<f64>>) -> Dataset {
        let x: Vec<f64> = (0..labels.len()).map(|i| i as f64).collect();
        Dataset::new(x, 1, labels.to_vec(), probs).unwrap()
    }

    #[test]
    fn misclassification_tie_rule_and_separator() {
        let d = data(&[1.0, -1.0, -1.0, 1.0], None);
        assert_eq!(misclassification_rate(&constant(0.0), &d).unwrap(), 0.5);
        let d = data(&[1.0, 1.0, -1.0, -1.0, -1.0], None);
        assert_eq!(misclassification_rate(&constant(0.0), &d).unwrap(), 0.6);

        let mut e = Ensemble::new(0.0);
        e.push(1.0, Tree::stump(1, 0, 1.5, 1.0, -1.0));
        assert_eq!(misclassification_rate(&e, &d).unwrap(), 0.0);
        assert!(misclassification_rate(&e, &Dataset::empty(1)).is_err());
    }

    #[test]
    fn random_scores_are_coin_flips() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let y: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        assert!((miscl_from_scores(&y, &f) - 0.5).abs() < 0.015);
    }

    #[test]
    fn nll_values() {
        let d = data(&[1.0, -1.0, 1.0], None);
        let v = mean_negative_log_likelihood(&constant(0.0), &d).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
        // p̂ → 1 on a negative point hits the clip.
        let v = nll_from_scores(&[-1.0], &[50.0]);
        assert!((v - 34.538776).abs() < 1e-5);
        assert!((v + NLL_CLIP.ln()).abs() < 1e-9);
    }

    #[test]
    fn nll_at_true_probability_is_entropy() {
        // E[−log p̂(Y)] with p̂ = p = 0.9: exact expectation over Y.
        let f = 0.5 * 9f64.ln();
        let expected = 0.9 * nll_from_scores(&[1.0], &[f]) + 0.1 * nll_from_scores(&[-1.0], &[f]);
        let entropy = -(0.1 * 0.1f64.ln() + 0.9 * 0.9f64.ln());
        assert!((expected - entropy).abs() < 1e-12);
        assert!((entropy - 0.3251).abs() < 1e-4);
    }

    #[test]
    fn extreme_fraction() {
        let d = data(&[1.0, -1.0, 1.0, -1.0], None);
        assert_eq!(extreme_probability_fraction(&constant(0.0), &d, 0.01, 0.99).unwrap(), 0.0);
        let edge = 0.5 * 99f64.ln();
        assert_eq!(extreme_from_scores(&[edge + 1e-9, -edge - 1e-9], 0.01, 0.99), 1.0);
        assert_eq!(extreme_from_scores(&[0.0, 5.0, 0.0, -5.0], 0.01, 0.99), 0.5);
        assert!((edge - 2.2976).abs() < 1e-4);
    }

    #[test]
    fn probability_mse_values() {
        let probs = vec![0.9, 0.1, 0.9, 0.1];
        let d = data(&[1.0, -1.0, -1.0, 1.0], Some(probs.clone()));
        assert!((probability_mse(&constant(0.0), &d).unwrap() - 0.16).abs() < 1e-15);
        let exact: Vec<f64> = probs.iter().map(|p| 0.5 * (p / (1.0 - p)).ln()).collect();
        assert!(prob_mse_from_scores(&probs, &exact) < 1e-30);
        // Hard 0/1 estimates on the Bayes class: every point is 0.1 away.
        let hard: Vec<f64> = probs.iter().map(|&p| if p > 0.5 { 40.0 } else { -40.0 }).collect();
        assert!((prob_mse_from_scores(&probs, &hard) - 0.01).abs() < 1e-12);
        // Hard estimates equal to the observed label: exact expectation over
        // Y at p = 0.9 is 0.9·0.1² + 0.1·0.9², the same at p = 0.1.
        let at = |label: f64| prob_mse_from_scores(&[0.9], &[40.0 * label]);
        let expected = 0.9 * at(1.0) + 0.1 * at(-1.0);
        assert!((expected - 0.09).abs() < 1e-12);
        assert!(matches!(
            probability_mse(&constant(0.0), &data(&[1.0], None)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn sign_and_probability_thresholds_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let f = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(-3.0..3.0) };
            let by_prob = if half_logit_prob(f) >= 0.5 { 1.0 } else { -1.0 };
            assert_eq!(predicted_label(f), by_prob);
        }
    }
}
