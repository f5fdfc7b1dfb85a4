//! Boosting engines.
//!
//! Two algorithms share one state type:
//!
//! * **Discrete AdaBoost** with a step multiplier `λ`. Each iteration fits a
//!   ±1 classification tree `g` to the current weights, measures its weighted
//!   error `ε` and moves `F ← F + α·g` with `α = ν·(λ/2)·log((1 − ε)/ε)`.
//!   With `λ = 1` (and `ν = 1`) this is the exact line-search minimiser of
//!   `Σ exp(−yᵢFᵢ)` along `g`; `λ = 2` is the doubled step, under which the
//!   total exponential loss stays constant.
//! * **Penalized functional gradient descent.** Each iteration fits a
//!   regression tree to a working response chosen by the penalty on the
//!   direction: `Unit` gives least-squares gradient boosting on `−ρ'`,
//!   `Scaled(c)` fits `−c·ρ'`, and `Curvature` fits `−ρ'/ρ''` with case
//!   weights `ρ''` (Newton steps, LogitBoost for the Bernoulli log-loss). The
//!   step is `F ← F + ν·tree`.
//!
//! Coefficient convention: scores are on the `exp(−yF)` margin scale. The
//! common textbook form of AdaBoost writes `α = log((1 − err)/err)` for a loss
//! whose exponent carries an extra factor ½, so its coefficients are exactly
//! twice the ones stored here; the doubled-step variant
//! `α = 2·log((1 − err)/err)` in that convention is `λ = 2` here.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fmt::round_sig9;
use crate::loss::{log_sum_exp_neg_margins, Loss};
use crate::metrics::{curve_point, CurvePoint, Split};
use crate::tree::{fit_classification_tree, fit_regression_tree, Node, Tree, TreeConfig, TreeMode};

/// Default subsampling fraction when stochastic boosting is switched on.
pub const DEFAULT_SUBSAMPLE_FRACTION: f64 = 0.5;

/// Binds only when the weighted error is numerically degenerate; under the
/// doubled step ε legitimately falls to ~1e-15 and must not be clamped there.
pub const DEFAULT_EPS_CLAMP: f64 = 1e-300;

/// Weighted errors within this distance of ½ count as no descent.
const NO_DESCENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coefficient: f64,
    pub tree: Tree,
}

/// `F(x) = offset + Σ coefficient·tree(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    offset: f64,
    terms: Vec<Term>,
}

impl Ensemble {
    pub fn new(offset: f64) -> Self {
        Ensemble {
            offset,
            terms: Vec::new(),
        }
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn push(&mut self, coefficient: f64, tree: Tree) {
        self.terms.push(Term { coefficient, tree });
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let mut f = self.offset;
        for t in &self.terms {
            f += t.coefficient * t.tree.predict(x)?;
        }
        Ok(f)
    }

    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<f64>> {
        data.rows().map(|x| self.predict(x)).collect()
    }

    /// Text document with every real rounded to nine significant digits.
    pub fn to_json(&self) -> String {
        let round_tree = |t: &Tree| {
            let nodes = t
                .nodes()
                .iter()
                .map(|n| match *n {
                    Node::Leaf { value } => Node::Leaf {
                        value: round_sig9(value),
                    },
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => Node::Split {
                        feature,
                        threshold: round_sig9(threshold),
                        left,
                        right,
                    },
                })
                .collect();
            Tree::from_nodes(t.n_features(), nodes).expect("rounding keeps the layout")
        };
        let rounded = Ensemble {
            offset: round_sig9(self.offset),
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coefficient: round_sig9(t.coefficient),
                    tree: round_tree(&t.tree),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&rounded).expect("ensemble serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Ensemble> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[serde(rename = "adaboost")]
    AdaBoost,
    PenalizedFgd,
}

/// Quadratic penalty on the direction `g` in the functional-gradient step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Penalty {
    /// `Σ g²/2`
    Unit,
    /// `Σ g²/(2c)`
    Scaled { c: f64 },
    /// `Σ ρ''·g²/2`
    Curvature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostConfig {
    #[serde(alias = "algo")]
    pub algorithm: Algorithm,
    pub loss: Loss,
    pub penalty: Penalty,
    pub iterations: usize,
    /// `λ`; AdaBoost only.
    pub step_multiplier: f64,
    /// `ν`; multiplies every coefficient (both algorithms).
    pub shrinkage: f64,
    pub subsample_fraction: f64,
    pub tree: TreeConfig,
    pub eps_clamp: f64,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            algorithm: Algorithm::AdaBoost,
            loss: Loss::Exponential,
            penalty: Penalty::Unit,
            iterations: 1000,
            step_multiplier: 1.0,
            shrinkage: 1.0,
            subsample_fraction: 1.0,
            tree: TreeConfig::default(),
            eps_clamp: DEFAULT_EPS_CLAMP,
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn adaboost(max_leaves: usize, step_multiplier: f64, iterations: usize) -> Self {
        BoostConfig {
            step_multiplier,
            iterations,
            tree: TreeConfig::new(max_leaves, TreeMode::Classification),
            ..Default::default()
        }
    }

    pub fn fgd(loss: Loss, penalty: Penalty, max_leaves: usize, shrinkage: f64, iterations: usize) -> Self {
        BoostConfig {
            algorithm: Algorithm::PenalizedFgd,
            loss,
            penalty,
            iterations,
            shrinkage,
            tree: TreeConfig::new(max_leaves, TreeMode::Regression),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tree.validate()?;
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(format!("{what} must be a positive finite value")))
            }
        };
        positive(self.step_multiplier, "step_multiplier")?;
        positive(self.shrinkage, "shrinkage")?;
        if !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(Error::config("subsample_fraction must lie in (0, 1]"));
        }
        if !(self.eps_clamp > 0.0 && self.eps_clamp < 0.5) {
            return Err(Error::config("eps_clamp must lie in (0, 0.5)"));
        }
        if let Penalty::Scaled { c } = self.penalty {
            positive(c, "penalty c")?;
        }
        match self.algorithm {
            Algorithm::AdaBoost => {
                if self.loss != Loss::Exponential {
                    return Err(Error::config("adaboost requires the exponential loss"));
                }
                if self.tree.mode != TreeMode::Classification {
                    return Err(Error::config("adaboost requires tree mode classification"));
                }
            }
            Algorithm::PenalizedFgd => {
                if self.tree.mode != TreeMode::Regression {
                    return Err(Error::config("penalized_fgd requires tree mode regression"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    StoppedPerfectFit,
    StoppedNoDescent,
}

/// Per-sample state of a boosting run together with the ensemble built so far.
#[derive(Debug, Clone)]
pub struct BoostState {
    pub scores: Vec<f64>,
    /// AdaBoost: normalised `exp(−yᵢFᵢ)`. FGD: normalised case weights of the
    /// last working-response fit.
    pub weights: Vec<f64>,
    pub iteration: usize,
    /// Weighted error of the last AdaBoost direction before clamping.
    pub last_eps: Option<f64>,
    /// `log ε`, finite even where `last_eps` underflows to zero.
    pub last_log_eps: Option<f64>,
    pub last_alpha: f64,
    pub status: Status,
    /// `log Σ exp(−yᵢFᵢ)` on the training data.
    pub log_total_exp_loss: f64,
    ensemble: Ensemble,
}

impl BoostState {
    pub fn init(data: &Dataset, cfg: &BoostConfig) -> Result<BoostState> {
        if data.is_empty() {
            return Err(Error::domain("cannot boost on an empty dataset"));
        }
        let n = data.len();
        let n_pos = data.n_positive();
        let n_neg = n - n_pos;
        let single_class = n_pos == 0 || n_neg == 0;
        let offset = match cfg.algorithm {
            _ if single_class => 0.0,
            Algorithm::AdaBoost => 0.0,
            Algorithm::PenalizedFgd => match cfg.loss {
                // Both estimate half the logit of the base rate.
                Loss::Exponential | Loss::BernoulliLog => 0.5 * (n_pos as f64 / n_neg as f64).ln(),
                Loss::Squared => data.labels().iter().sum::<f64>() / n as f64,
            },
        };
        let scores = vec![offset; n];
        let weights = match cfg.algorithm {
            Algorithm::AdaBoost => exp_loss_weights(data.labels(), &scores),
            Algorithm::PenalizedFgd => vec![1.0 / n as f64; n],
        };
        Ok(BoostState {
            log_total_exp_loss: log_sum_exp_neg_margins(data.labels(), &scores),
            scores,
            weights,
            iteration: 0,
            last_eps: None,
            last_log_eps: None,
            last_alpha: 0.0,
            status: if single_class {
                Status::StoppedPerfectFit
            } else {
                Status::Running
            },
            ensemble: Ensemble::new(offset),
        })
    }

    pub fn is_running(&self) -> bool {
        self.status == Status::Running
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn into_ensemble(self) -> Ensemble {
        self.ensemble
    }

    /// One iteration of the configured algorithm.
    pub fn step(&mut self, data: &Dataset, cfg: &BoostConfig) -> Result<()> {
        match cfg.algorithm {
            Algorithm::AdaBoost => self.adaboost_step(data, cfg),
            Algorithm::PenalizedFgd => self.penalized_fgd_step(data, cfg),
        }
    }

    fn check_running(&self, data: &Dataset) -> Result<()> {
        if !self.is_running() {
            return Err(Error::IllegalState(format!(
                "boosting already stopped ({:?})",
                self.status
            )));
        }
        if data.len() != self.scores.len() {
            return Err(Error::domain("dataset differs from the one the state was built on"));
        }
        Ok(())
    }

    pub fn adaboost_step(&mut self, data: &Dataset, cfg: &BoostConfig) -> Result<()> {
        self.check_running(data)?;
        if cfg.algorithm != Algorithm::AdaBoost {
            return Err(Error::config("adaboost_step called with a non-AdaBoost config"));
        }
        let rows = subsample(data.len(), cfg.subsample_fraction, cfg.seed, self.iteration);
        let tree = match &rows {
            None => fit_classification_tree(data, &self.weights, &cfg.tree)?,
            Some(rows) => {
                let w = normalized(rows.iter().map(|&i| self.weights[i]).collect())?;
                fit_classification_tree(&data.subset(rows), &w, &cfg.tree)?
            }
        };

        let g: Vec<f64> = data.rows().map(|x| tree.eval(x)).collect();
        let labels = data.labels();
        let (wrong_y, wrong_f): (Vec<f64>, Vec<f64>) = (0..data.len())
            .filter(|&i| g[i] != labels[i])
            .map(|i| (labels[i], self.scores[i]))
            .unzip();

        // ε from the margins rather than the stored weights, which underflow
        // once the mass concentrates on a few points.
        let perfect = wrong_y.is_empty();
        let log_eps = if perfect {
            f64::NEG_INFINITY
        } else {
            (log_sum_exp_neg_margins(&wrong_y, &wrong_f) - self.log_total_exp_loss).min(0.0)
        };
        let raw_eps = log_eps.exp();
        self.last_eps = Some(raw_eps);
        self.last_log_eps = Some(log_eps);
        let log_clamp = cfg.eps_clamp.ln();
        let log_eps = log_eps.clamp(log_clamp, (-cfg.eps_clamp).ln_1p());
        if !perfect && raw_eps >= 0.5 - NO_DESCENT_TOL {
            self.last_alpha = 0.0;
            self.status = Status::StoppedNoDescent;
            return Ok(());
        }

        let alpha = cfg.shrinkage * 0.5 * cfg.step_multiplier * ((-log_eps.exp()).ln_1p() - log_eps);
        for (f, gi) in self.scores.iter_mut().zip(&g) {
            *f += alpha * gi;
        }
        self.weights = exp_loss_weights(labels, &self.scores);
        self.log_total_exp_loss = log_sum_exp_neg_margins(labels, &self.scores);
        self.last_alpha = alpha;
        self.iteration += 1;
        self.ensemble.push(alpha, tree);
        if perfect {
            self.status = Status::StoppedPerfectFit;
        }
        Ok(())
    }

    pub fn penalized_fgd_step(&mut self, data: &Dataset, cfg: &BoostConfig) -> Result<()> {
        self.check_running(data)?;
        if cfg.algorithm != Algorithm::PenalizedFgd {
            return Err(Error::config("penalized_fgd_step called with an AdaBoost config"));
        }
        let (response, case_weights) =
            working_response(cfg.loss, cfg.penalty, data.labels(), &self.scores)?;
        let rows = subsample(data.len(), cfg.subsample_fraction, cfg.seed, self.iteration);
        let tree = match &rows {
            None => fit_regression_tree(data, &response, &normalized(case_weights.clone())?, &cfg.tree)?,
            Some(rows) => {
                let r: Vec<f64> = rows.iter().map(|&i| response[i]).collect();
                let w = normalized(rows.iter().map(|&i| case_weights[i]).collect())?;
                fit_regression_tree(&data.subset(rows), &r, &w, &cfg.tree)?
            }
        };

        let nu = cfg.shrinkage;
        for (f, x) in self.scores.iter_mut().zip(data.rows()) {
            *f += nu * tree.eval(x);
        }
        self.weights = normalized(case_weights)?;
        self.log_total_exp_loss = log_sum_exp_neg_margins(data.labels(), &self.scores);
        self.last_eps = None;
        self.last_log_eps = None;
        self.last_alpha = nu;
        self.iteration += 1;
        self.ensemble.push(nu, tree);
        Ok(())
    }
}

/// Working response and (unnormalised) case weights for one functional
/// gradient step.
///
/// * `Unit`: `(−ρ', 1)`
/// * `Scaled(c)`: `(−c·ρ', 1)`
/// * `Curvature`: `(−ρ'/ρ'', ρ'')`
pub fn working_response(
    loss: Loss,
    penalty: Penalty,
    labels: &[f64],
    scores: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut response = Vec::with_capacity(labels.len());
    let mut weights = Vec::with_capacity(labels.len());
    for (i, (&y, &f)) in labels.iter().zip(scores).enumerate() {
        let d = loss.derivatives(y, f)?;
        match penalty {
            Penalty::Unit => {
                response.push(-d.grad);
                weights.push(1.0);
            }
            Penalty::Scaled { c } => {
                response.push(-c * d.grad);
                weights.push(1.0);
            }
            Penalty::Curvature => {
                if !(d.curv > 0.0) || !d.curv.is_finite() {
                    return Err(Error::CurvatureDegenerate {
                        index: i,
                        value: d.curv,
                    });
                }
                response.push(-d.grad / d.curv);
                weights.push(d.curv);
            }
        }
    }
    Ok((response, weights))
}

/// Normalised `exp(−yᵢFᵢ)`, shifted by the smallest margin first.
pub fn exp_loss_weights(labels: &[f64], scores: &[f64]) -> Vec<f64> {
    let min_margin = labels
        .iter()
        .zip(scores)
        .map(|(&y, &f)| y * f)
        .fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = labels
        .iter()
        .zip(scores)
        .map(|(&y, &f)| (-(y * f - min_margin)).exp())
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

fn normalized(mut w: Vec<f64>) -> Result<Vec<f64>> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

/// Rows used at `iteration`, drawn without replacement; `None` means all rows.
/// The draw depends only on `(seed, iteration)`.
pub fn subsample(n: usize, fraction: f64, seed: u64, iteration: usize) -> Option<Vec<usize>> {
    if fraction >= 1.0 {
        return None;
    }
    let k = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(iteration as u64);
    let mut rows = rand::seq::index::sample(&mut rng, n, k).into_vec();
    rows.sort_unstable();
    Some(rows)
}

/// Runs up to `cfg.iterations` steps, recording train and hold-out metrics
/// after every iteration that added a term.
pub fn run_boost(
    train: &Dataset,
    holdout: &Dataset,
    cfg: &BoostConfig,
) -> Result<(Ensemble, Vec<CurvePoint>)> {
    cfg.validate()?;
    if !holdout.is_empty() && holdout.n_features() != train.n_features() {
        return Err(Error::domain("train and hold-out differ in feature count"));
    }
    let mut state = BoostState::init(train, cfg)?;
    let mut hold_scores = vec![state.ensemble().offset(); holdout.len()];
    let mut curves = Vec::new();
    for _ in 0..cfg.iterations {
        if !state.is_running() {
            break;
        }
        let before = state.ensemble().terms().len();
        state.step(train, cfg)?;
        if state.ensemble().terms().len() == before {
            break;
        }
        let term = state.ensemble().terms().last().expect("term was appended");
        for (f, x) in hold_scores.iter_mut().zip(holdout.rows()) {
            *f += term.coefficient * term.tree.eval(x);
        }
        curves.push(curve_point(state.iteration, Split::Train, &state.scores, train));
        if !holdout.is_empty() {
            curves.push(curve_point(state.iteration, Split::Holdout, &hold_scores, holdout));
        }
    }
    Ok((state.into_ensemble(), curves))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{numeric_line_search, DEFAULT_BRACKET, DEFAULT_TOL};
    use rand::Rng;

    fn toy() -> Dataset {
        // Three positives then one negative; the best stump is constant +1
        // when the negative shares its feature value with a positive.
        Dataset::new(vec![0.0, 0.0, 0.0, 0.0], 1, vec![1.0, 1.0, 1.0, -1.0], None).unwrap()
    }

    fn random_data(seed: u64, n: usize, q: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n * q).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let s: f64 = x[i * q..(i + 1) * q].iter().sum();
                let p = if s > q as f64 / 2.0 { 0.8 } else { 0.2 };
                if rng.random_bool(p) { 1.0 } else { -1.0 }
            })
            .collect();
        Dataset::new(x, q, y, None).unwrap()
    }

    #[test]
    fn init_offsets() {
        let d = Dataset::new(vec![0.0, 1.0], 1, vec![1.0, -1.0], None).unwrap();
        let cfg = BoostConfig::fgd(Loss::Exponential, Penalty::Unit, 2, 1.0, 1);
        assert_eq!(BoostState::init(&d, &cfg).unwrap().ensemble().offset(), 0.0);

        let s = BoostState::init(&toy(), &BoostConfig::adaboost(2, 1.0, 1)).unwrap();
        assert_eq!(s.weights, vec![0.25; 4]);
        assert!(s.scores.iter().all(|&f| f == 0.0));

        let mut y = vec![1.0; 9];
        y.push(-1.0);
        let d = Dataset::new((0..10).map(f64::from).collect(), 1, y, None).unwrap();
        let f0 = BoostState::init(&d, &cfg).unwrap().ensemble().offset();
        assert!((f0 - 0.5 * 9f64.ln()).abs() < 1e-15);
        assert!((f0 - 1.0986).abs() < 1e-4);
        // Frozen by a golden-section minimisation of 9e^{-F} + e^{F}.
        let r = numeric_line_search(Loss::Exponential, &[0.0; 10], d.labels(), &[1.0; 10], DEFAULT_BRACKET, 1e-10).unwrap();
        assert!((r.t_star - f0).abs() < 1e-7);
        assert!((Loss::Exponential.prob_from_score(f0).unwrap() - 0.9).abs() < 1e-12);

        let sq = BoostConfig::fgd(Loss::Squared, Penalty::Unit, 2, 1.0, 1);
        assert!((BoostState::init(&d, &sq).unwrap().ensemble().offset() - 0.8).abs() < 1e-15);

        let one = Dataset::new(vec![0.0, 1.0], 1, vec![-1.0, -1.0], None).unwrap();
        let s = BoostState::init(&one, &cfg).unwrap();
        assert_eq!(s.status, Status::StoppedPerfectFit);
        assert_eq!(s.ensemble().offset(), 0.0);
        assert!(BoostState::init(&Dataset::empty(1), &cfg).is_err());
    }

    #[test]
    fn adaboost_toy_step() {
        let d = toy();
        let mut s = BoostState::init(&d, &BoostConfig::adaboost(2, 1.0, 1)).unwrap();
        s.adaboost_step(&d, &BoostConfig::adaboost(2, 1.0, 1)).unwrap();
        assert_eq!(s.last_eps, Some(0.25));
        assert!((s.last_alpha - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((s.log_total_exp_loss.exp() - 3.4641016).abs() < 1e-6);

        let mut s = BoostState::init(&d, &BoostConfig::adaboost(2, 2.0, 1)).unwrap();
        s.adaboost_step(&d, &BoostConfig::adaboost(2, 2.0, 1)).unwrap();
        assert!((s.last_alpha - 3f64.ln()).abs() < 1e-15);
        assert!((s.log_total_exp_loss - 4f64.ln()).abs() < 1e-14);
        let r = Loss::Exponential.risk(d.labels(), &s.scores).unwrap();
        assert!((r.log_total_loss - 4f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn uninformative_learner_stops() {
        let d = Dataset::new(vec![0.0, 0.0], 1, vec![1.0, -1.0], None).unwrap();
        let cfg = BoostConfig::adaboost(2, 1.0, 5);
        let mut s = BoostState::init(&d, &cfg).unwrap();
        s.adaboost_step(&d, &cfg).unwrap();
        assert_eq!(s.status, Status::StoppedNoDescent);
        assert_eq!(s.ensemble().terms().len(), 0);
        assert!(matches!(s.adaboost_step(&d, &cfg), Err(Error::IllegalState(_))));
    }

    #[test]
    fn perfect_fit_caps_alpha() {
        let d = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], 1, vec![1.0, 1.0, -1.0, -1.0], None).unwrap();
        let cfg = BoostConfig::adaboost(2, 1.0, 5);
        let mut s = BoostState::init(&d, &cfg).unwrap();
        s.adaboost_step(&d, &cfg).unwrap();
        assert_eq!(s.status, Status::StoppedPerfectFit);
        assert_eq!(s.last_eps, Some(0.0));
        let cap = 0.5 * ((1.0 - cfg.eps_clamp) / cfg.eps_clamp).ln();
        assert!((cap - 345.387764).abs() < 1e-6);
        assert!((s.last_alpha - cap).abs() < 1e-12);
        assert_eq!(s.ensemble().terms().len(), 1);
    }

    #[test]
    fn weights_track_margins() {
        let d = random_data(4, 120, 3);
        for lambda in [1.0, 2.0] {
            let cfg = BoostConfig::adaboost(4, lambda, 30);
            let mut s = BoostState::init(&d, &cfg).unwrap();
            while s.is_running() && s.iteration < 30 {
                s.adaboost_step(&d, &cfg).unwrap();
                let scores = s.ensemble().predict_dataset(&d).unwrap();
                let z: f64 = d.labels().iter().zip(&scores).map(|(y, f)| (-y * f).exp()).sum();
                for i in 0..d.len() {
                    assert!((scores[i] - s.scores[i]).abs() < 1e-12);
                    let w = (-d.labels()[i] * scores[i]).exp() / z;
                    assert!((w - s.weights[i]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn adaboost_alpha_is_line_search_minimiser() {
        let d = random_data(8, 100, 4);
        let cfg = BoostConfig::adaboost(8, 1.0, 15);
        let mut s = BoostState::init(&d, &cfg).unwrap();
        for _ in 0..15 {
            let before = s.scores.clone();
            s.adaboost_step(&d, &cfg).unwrap();
            let term = s.ensemble().terms().last().unwrap();
            let g: Vec<f64> = d.rows().map(|x| term.tree.eval(x)).collect();
            let r = numeric_line_search(Loss::Exponential, &before, d.labels(), &g, DEFAULT_BRACKET, DEFAULT_TOL).unwrap();
            assert!((r.t_star - s.last_alpha).abs() < 1e-6);
        }
    }

    #[test]
    fn scaled_penalty_matches_unit() {
        let d = random_data(12, 150, 3);
        let unit = BoostConfig::fgd(Loss::BernoulliLog, Penalty::Unit, 6, 1.0, 5);
        let one = BoostConfig { penalty: Penalty::Scaled { c: 1.0 }, ..unit.clone() };
        let tenth = BoostConfig { penalty: Penalty::Scaled { c: 0.1 }, ..unit.clone() };
        let mut a = BoostState::init(&d, &unit).unwrap();
        let mut b = BoostState::init(&d, &one).unwrap();
        for _ in 0..5 {
            let mut c = a.clone();
            c.penalized_fgd_step(&d, &tenth).unwrap();
            a.penalized_fgd_step(&d, &unit).unwrap();
            b.penalized_fgd_step(&d, &one).unwrap();
            let ta = &a.ensemble().terms().last().unwrap().tree;
            let tc = &c.ensemble().terms().last().unwrap().tree;
            assert!(ta.same_structure(tc));
            for (na, nc) in ta.nodes().iter().zip(tc.nodes()) {
                if let (Node::Leaf { value: va }, Node::Leaf { value: vc }) = (na, nc) {
                    assert!((0.1 * va - vc).abs() <= 1e-12 * va.abs());
                }
            }
        }
        assert_eq!(a.scores, b.scores);
        assert_eq!(a.ensemble(), b.ensemble());
    }

    #[test]
    fn logitboost_working_response_at_zero() {
        let (r, w) = working_response(Loss::BernoulliLog, Penalty::Curvature, &[1.0, -1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(r, vec![1.0, -1.0]);
        assert_eq!(w, vec![1.0, 1.0]);
        let err = working_response(Loss::Exponential, Penalty::Curvature, &[1.0], &[800.0]);
        assert!(matches!(err, Err(Error::CurvatureDegenerate { index: 0, .. })));
    }

    #[test]
    fn subsample_draws_are_deterministic() {
        let a = subsample(100, 0.5, 7, 3).unwrap();
        assert_eq!(a.len(), 50);
        assert_eq!(a, subsample(100, 0.5, 7, 3).unwrap());
        assert_ne!(a, subsample(100, 0.5, 7, 4).unwrap());
        assert!(subsample(100, 1.0, 7, 3).is_none());
        assert_eq!(subsample(3, 0.34, 0, 0).unwrap().len(), 2);
    }

    #[test]
    fn run_boost_basics() {
        let d = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], 1, vec![1.0, 1.0, -1.0, -1.0], None).unwrap();
        let (e, curves) = run_boost(&d, &d, &BoostConfig::adaboost(2, 1.0, 0)).unwrap();
        assert!(e.terms().is_empty());
        assert!(curves.is_empty());

        let (_, curves) = run_boost(&d, &Dataset::empty(1), &BoostConfig::adaboost(2, 1.0, 3)).unwrap();
        assert_eq!(curves[0].miscl, 0.0);
        assert!(curves.iter().all(|c| c.split == Split::Train));

        let d = random_data(1, 200, 5);
        let mut cfg = BoostConfig::adaboost(4, 1.0, 20);
        cfg.subsample_fraction = DEFAULT_SUBSAMPLE_FRACTION;
        cfg.seed = 99;
        let a = run_boost(&d, &d, &cfg).unwrap();
        let b = run_boost(&d, &d, &cfg).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn fgd_runs_for_every_penalty() {
        let d = random_data(2, 200, 4);
        for loss in [Loss::Exponential, Loss::BernoulliLog, Loss::Squared] {
            for penalty in [Penalty::Unit, Penalty::Scaled { c: 0.5 }, Penalty::Curvature] {
                let cfg = BoostConfig::fgd(loss, penalty, 4, 0.1, 30);
                let (e, curves) = run_boost(&d, &Dataset::empty(4), &cfg).unwrap();
                assert_eq!(e.terms().len(), 30);
                let first = curves.first().unwrap().miscl;
                let last = curves.last().unwrap().miscl;
                assert!(last <= first, "{loss:?} {penalty:?}");
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = BoostConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.loss = Loss::BernoulliLog;
        assert!(cfg.validate().is_err());
        let mut cfg = BoostConfig::fgd(Loss::Squared, Penalty::Scaled { c: 0.0 }, 2, 1.0, 1);
        assert!(cfg.validate().is_err());
        cfg.penalty = Penalty::Unit;
        cfg.subsample_fraction = 0.0;
        assert!(cfg.validate().is_err());
        let json = r#"{"algorithm":"penalized_fgd","loss":"bernoulli_log","penalty":{"kind":"scaled","c":0.1},"tree":{"max_leaves":4,"mode":"regression"}}"#;
        let cfg: BoostConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.penalty, Penalty::Scaled { c: 0.1 });
        assert!(cfg.validate().is_ok());
        assert!(serde_json::from_str::<BoostConfig>(r#"{"iteratons":3}"#).is_err());
        let cfg: BoostConfig = serde_json::from_str(r#"{"algo":"adaboost","step_multiplier":2}"#).unwrap();
        assert_eq!((cfg.algorithm, cfg.step_multiplier), (Algorithm::AdaBoost, 2.0));
    }

    #[test]
    fn ensemble_document_round_trip() {
        let d = random_data(3, 60, 3);
        let (e, _) = run_boost(&d, &Dataset::empty(3), &BoostConfig::adaboost(4, 1.0, 5)).unwrap();
        let text = e.to_json();
        let back = Ensemble::from_json(&text).unwrap();
        assert_eq!(back.terms().len(), 5);
        assert_eq!(back.to_json(), text);
        for x in d.rows() {
            assert!((back.predict(x).unwrap() - e.predict(x).unwrap()).abs() < 1e-6);
        }
        assert!(Ensemble::from_json(r#"{"offset":0,"terms":[{"coefficient":1,"tree":{"n_features":1,"nodes":[]}}]}"#).is_err());
    }
}
