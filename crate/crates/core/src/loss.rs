//! Surrogate losses `ρ(y, F)` for labels `y ∈ {−1, +1}` and real scores `F`.
//!
//! Scores live on the margin scale of the exponential loss `exp(−yF)`. On
//! that scale both the exponential and the Bernoulli log-loss estimate half
//! the logit, so the probability link is `p = 1 / (1 + exp(−2F))`.

use serde::{Deserialize, Serialize};

use crate::engine::Ensemble;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// `exp(−yF)`
    Exponential,
    /// `log(1 + exp(−2yF))`, the negative Bernoulli log-likelihood.
    BernoulliLog,
    /// `(y − F)²`
    Squared,
}

/// Value and first two derivatives with respect to the score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub value: f64,
    pub grad: f64,
    pub curv: f64,
}

impl Loss {
    pub fn description(self) -> &'static str {
        match self {
            Loss::Exponential => "exponential loss exp(-yF)",
            Loss::BernoulliLog => "Bernoulli log-loss log(1 + exp(-2yF))",
            Loss::Squared => "squared error (y - F)^2",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Loss::Exponential => "exponential",
            Loss::BernoulliLog => "bernoulli_log",
            Loss::Squared => "squared",
        }
    }

    /// `ρ(y, F)` without argument checks; may overflow to `inf`.
    #[inline]
    pub fn value(self, y: f64, f: f64) -> f64 {
        match self {
            Loss::Exponential => (-y * f).exp(),
            Loss::BernoulliLog => softplus(-2.0 * y * f),
            Loss::Squared => (y - f) * (y - f),
        }
    }

    /// `(ρ, ρ', ρ'')` at `(y, F)`.
    pub fn derivatives(self, y: f64, f: f64) -> Result<Derivatives> {
        if !f.is_finite() {
            return Err(Error::domain(format!("score {f} is not finite")));
        }
        if y != 1.0 && y != -1.0 {
            return Err(Error::domain(format!("label {y} is not -1 or 1")));
        }
        Ok(self.derivatives_unchecked(y, f))
    }

    #[inline]
    pub(crate) fn derivatives_unchecked(self, y: f64, f: f64) -> Derivatives {
        match self {
            Loss::Exponential => {
                let e = (-y * f).exp();
                Derivatives {
                    value: e,
                    grad: -y * e,
                    curv: e,
                }
            }
            Loss::BernoulliLog => {
                // −2(y* − p) written as −2y·σ(−2yF) so neither branch cancels.
                let p = half_logit_prob(f);
                let q = half_logit_prob(-f);
                Derivatives {
                    value: softplus(-2.0 * y * f),
                    grad: -2.0 * y * if y > 0.0 { q } else { p },
                    curv: 4.0 * p * q,
                }
            }
            Loss::Squared => Derivatives {
                value: (y - f) * (y - f),
                grad: -2.0 * (y - f),
                curv: 2.0,
            },
        }
    }

    /// Probability `P(Y = 1 | x)` implied by a score.
    pub fn prob_from_score(self, f: f64) -> Result<f64> {
        match self {
            Loss::Squared => Err(Error::UnsupportedLink(self.name())),
            _ if !f.is_finite() => Err(Error::domain(format!("score {f} is not finite"))),
            _ => Ok(half_logit_prob(f)),
        }
    }

    /// Mean loss of an ensemble on `data` and the log of the total loss.
    pub fn ensemble_risk(self, ensemble: &Ensemble, data: &Dataset) -> Result<Risk> {
        let scores = ensemble.predict_dataset(data)?;
        self.risk(data.labels(), &scores)
    }

    /// [`Loss::ensemble_risk`] for precomputed scores.
    pub fn risk(self, labels: &[f64], scores: &[f64]) -> Result<Risk> {
        if labels.is_empty() {
            return Err(Error::domain("risk of an empty dataset"));
        }
        let n = labels.len() as f64;
        let total: f64 = labels
            .iter()
            .zip(scores)
            .map(|(&y, &f)| self.value(y, f))
            .sum();
        let log_total_loss = match self {
            Loss::Exponential => log_sum_exp_neg_margins(labels, scores),
            _ => total.ln(),
        };
        Ok(Risk {
            mean_loss: total / n,
            log_total_loss,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Risk {
    pub mean_loss: f64,
    pub log_total_loss: f64,
}

/// `1 / (1 + exp(−2F))`.
#[inline]
pub fn half_logit_prob(f: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * f).exp())
}

/// `log(1 + exp(z))` without overflow.
#[inline]
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// `log Σ exp(−yᵢFᵢ)`, shifted by the smallest margin before exponentiating.
pub fn log_sum_exp_neg_margins(labels: &[f64], scores: &[f64]) -> f64 {
    let min_margin = labels
        .iter()
        .zip(scores)
        .map(|(&y, &f)| y * f)
        .fold(f64::INFINITY, f64::min);
    if !min_margin.is_finite() {
        return -min_margin;
    }
    let s: f64 = labels
        .iter()
        .zip(scores)
        .map(|(&y, &f)| (-(y * f - min_margin)).exp())
        .sum();
    s.ln() - min_margin
}
