//! Synthetic data with known conditional class probabilities.
//!
//! Features are i.i.d. Uniform[0,1]^q and only the first `active` coordinates
//! carry signal, through an additive score `s(x) = Σ_{j<active} x_j`:
//!
//! * `TwoLevel`: `p(x) = p_hi` if `s(x) > active/2`, else `p_lo`;
//! * `LogisticAdditive`: `p(x) = 1/(1 + exp(−a·(s(x) − active/2)))`.
//!
//! Generation uses ChaCha8 seeded from `SimSpec::seed`, so a spec fully
//! determines its dataset.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimModel {
    TwoLevel,
    LogisticAdditive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSpec {
    pub model: SimModel,
    pub n: usize,
    pub q: usize,
    /// Number of informative coordinates.
    #[serde(rename = "J", alias = "active")]
    pub active: usize,
    pub p_lo: f64,
    pub p_hi: f64,
    #[serde(alias = "a")]
    pub slope: f64,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            model: SimModel::TwoLevel,
            n: 2000,
            q: 20,
            active: 5,
            p_lo: 0.1,
            p_hi: 0.9,
            slope: 8.0,
            seed: 1,
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("simulation needs n >= 1"));
        }
        if self.active == 0 || self.active > self.q {
            return Err(Error::domain("need 1 <= active <= q"));
        }
        match self.model {
            SimModel::TwoLevel => {
                if !(self.p_lo > 0.0 && self.p_lo <= self.p_hi && self.p_hi < 1.0) {
                    return Err(Error::domain("need 0 < p_lo <= p_hi < 1"));
                }
            }
            SimModel::LogisticAdditive => {
                if !self.slope.is_finite() {
                    return Err(Error::domain("slope must be finite"));
                }
            }
        }
        Ok(())
    }

    /// Conditional probability of class +1 at `x`.
    pub fn true_prob(&self, x: &[f64]) -> f64 {
        let centred: f64 = x[..self.active].iter().map(|v| v - 0.5).sum();
        match self.model {
            SimModel::TwoLevel => {
                if centred > 0.0 {
                    self.p_hi
                } else {
                    self.p_lo
                }
            }
            SimModel::LogisticAdditive => 1.0 / (1.0 + (-self.slope * centred).exp()),
        }
    }
}

pub fn generate(spec: &SimSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Vec::with_capacity(spec.n * spec.q);
    let mut labels = Vec::with_capacity(spec.n);
    let mut probs = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let start = features.len();
        features.extend((0..spec.q).map(|_| rng.random::<f64>()));
        let p = spec.true_prob(&features[start..]);
        labels.push(if rng.random::<f64>() < p { 1.0 } else { -1.0 });
        probs.push(p);
    }
    Dataset::new(features, spec.q, labels, Some(probs))
}

pub fn gen_two_level(spec: &SimSpec) -> Result<Dataset> {
    if spec.model != SimModel::TwoLevel {
        return Err(Error::domain("gen_two_level needs model = two_level"));
    }
    generate(spec)
}

pub fn gen_logistic_additive(spec: &SimSpec) -> Result<Dataset> {
    if spec.model != SimModel::LogisticAdditive {
        return Err(Error::domain("gen_logistic_additive needs model = logistic_additive"));
    }
    generate(spec)
}

/// Random disjoint partition into `⌈fraction·n⌉` training rows and the rest;
/// both sides keep the original row order.
pub fn split_train_holdout(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let n = data.len();
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::domain("split fraction must lie in (0, 1)"));
    }
    let n_train = (fraction * n as f64).ceil() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::domain(format!(
            "fraction {fraction} of {n} rows leaves one side empty"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train, holdout) = order.split_at_mut(n_train);
    train.sort_unstable();
    holdout.sort_unstable();
    Ok((data.subset(train), data.subset(holdout)))
}
