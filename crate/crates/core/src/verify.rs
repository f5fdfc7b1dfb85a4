//! Property suite behind `boostlab verify`: every check compares the
//! engine against an independent oracle or a closed form on seeded inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::engine::{run_boost, working_response, BoostConfig, BoostState, Ensemble, Penalty};
use crate::loss::{half_logit_prob, Loss};
use crate::oracle::{
    enumerate_stumps, exhaustive_best_stump, finite_difference_derivatives, numeric_line_search,
    DEFAULT_BRACKET, DEFAULT_TOL,
};
use crate::simdata::{generate, SimModel, SimSpec};
use crate::tree::{fit_classification_tree, Node, Tree, TreeConfig, TreeMode};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    /// `Ok` carries a short summary, `Err` the first violation.
    pub outcome: Result<String, String>,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.outcome.is_ok()
    }

    pub fn line(&self) -> String {
        match &self.outcome {
            Ok(msg) => format!("PASS {}: {msg}", self.name),
            Err(msg) => format!("FAIL {}: {msg}", self.name),
        }
    }
}

type Outcome = Result<String, String>;

pub fn run_all() -> Vec<Check> {
    let checks: [(&'static str, fn() -> Outcome); 10] = [
        ("derivatives_match_finite_differences", derivatives_match_finite_differences),
        ("directional_derivative_identity", directional_derivative_identity),
        ("adaboost_alpha_is_line_search_minimiser", alpha_is_line_search_minimiser),
        ("loss_ratio_identity", loss_ratio_identity),
        ("weights_equal_normalised_exp_margins", weights_equal_exp_margins),
        ("doubled_step_squares_weight_multiplier", doubled_step_squares_multiplier),
        ("penalty_algebra", penalty_algebra),
        ("tree_stump_equals_exhaustive_stump", stump_equals_exhaustive),
        ("stump_ensembles_are_additive", stump_ensembles_are_additive),
        ("runs_are_deterministic", runs_are_deterministic),
    ];
    checks
        .into_iter()
        .map(|(name, f)| Check { name, outcome: f() })
        .collect()
}

fn sim(model: SimModel, n: usize, q: usize, seed: u64) -> Dataset {
    generate(&SimSpec {
        model,
        n,
        q,
        active: q.min(5),
        seed,
        ..SimSpec::default()
    })
    .expect("valid simulation spec")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn derivatives_match_finite_differences() -> Outcome {
    let mut count = 0;
    for loss in [Loss::Exponential, Loss::BernoulliLog, Loss::Squared] {
        for y in [-1.0, 1.0] {
            for k in 0..=200 {
                let f = -10.0 + 0.1 * k as f64;
                let d = loss.derivatives(y, f).map_err(|e| e.to_string())?;
                let (g, _) = finite_difference_derivatives(loss, y, f, 1e-5);
                let (_, c) = finite_difference_derivatives(loss, y, f, 1e-3);
                ensure((d.grad - g).abs() <= 1e-6 * d.grad.abs().max(1.0), || {
                    format!("{loss:?} y={y} F={f}: ρ' {} vs {g}", d.grad)
                })?;
                ensure((d.curv - c).abs() <= 1e-4 * d.curv.abs().max(1.0), || {
                    format!("{loss:?} y={y} F={f}: ρ'' {} vs {c}", d.curv)
                })?;
                count += 1;
            }
        }
    }
    Ok(format!("{count} grid points"))
}

fn directional_derivative_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..50 {
        let n = 20;
        let y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        for loss in [Loss::Exponential, Loss::BernoulliLog, Loss::Squared] {
            let total = |t: f64| -> f64 {
                (0..n).map(|i| loss.value(y[i], f[i] + t * g[i])).sum()
            };
            let h = 1e-5;
            let along = (total(h) - total(-h)) / (2.0 * h);
            let pointwise: f64 = (0..n)
                .map(|i| finite_difference_derivatives(loss, y[i], f[i], h).0 * g[i])
                .sum();
            ensure((along - pointwise).abs() <= 1e-6 * along.abs().max(1.0), || {
                format!("trial {trial} {loss:?}: {along} vs {pointwise}")
            })?;
        }
    }
    Ok("50 random instances".into())
}

fn alpha_is_line_search_minimiser() -> Outcome {
    let d = sim(SimModel::TwoLevel, 200, 6, 3);
    let cfg = BoostConfig::adaboost(8, 1.0, 20);
    let mut state = BoostState::init(&d, &cfg).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for step in 0..20 {
        let before = state.scores.clone();
        state.adaboost_step(&d, &cfg).map_err(|e| e.to_string())?;
        let tree = &state.ensemble().terms().last().ok_or("no term")?.tree;
        let g: Vec<f64> = d.rows().map(|x| tree.eval(x)).collect();
        let r = numeric_line_search(Loss::Exponential, &before, d.labels(), &g, DEFAULT_BRACKET, DEFAULT_TOL)
            .map_err(|e| e.to_string())?;
        let gap = (r.t_star - state.last_alpha).abs();
        worst = worst.max(gap);
        ensure(gap <= 1e-6, || format!("step {step}: α {} vs t* {}", state.last_alpha, r.t_star))?;
    }
    Ok(format!("20 steps, max |α − t*| = {worst:.2e}"))
}

/// `r(λ, ε) = (1−ε)k^{−λ/2} + εk^{λ/2}` with `k = (1−ε)/ε`.
pub fn loss_ratio(lambda: f64, eps: f64) -> f64 {
    log_loss_ratio(lambda, eps).exp()
}

/// `log r(λ, ε)`, finite for every ε in (0, 1).
pub fn log_loss_ratio(lambda: f64, eps: f64) -> f64 {
    let log_k = (1.0 - eps).ln() - eps.ln();
    let a = (1.0 - eps).ln() - 0.5 * lambda * log_k;
    let b = eps.ln() + 0.5 * lambda * log_k;
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

fn loss_ratio_identity() -> Outcome {
    let d = sim(SimModel::TwoLevel, 300, 8, 5);
    let mut steps = 0;
    for lambda in [0.5, 1.0, 2.0, 3.0] {
        let cfg = BoostConfig::adaboost(8, lambda, 50);
        let mut state = BoostState::init(&d, &cfg).map_err(|e| e.to_string())?;
        for m in 0..50 {
            if !state.is_running() {
                break;
            }
            let before = state.log_total_exp_loss;
            state.adaboost_step(&d, &cfg).map_err(|e| e.to_string())?;
            // α comes from the clamped ε outside [eps_clamp, 0.5).
            let Some(eps) = state.last_eps.filter(|e| *e >= cfg.eps_clamp && *e < 0.5) else {
                continue;
            };
            // Relative error of the ratio, compared in logs.
            let observed = state.log_total_exp_loss - before;
            let expected = log_loss_ratio(lambda, eps);
            ensure((observed - expected).exp_m1().abs() <= 1e-8, || {
                format!("λ={lambda} m={m}: log ratio {observed} vs {expected}")
            })?;
            steps += 1;
        }
    }
    Ok(format!("{steps} steps over λ ∈ {{0.5, 1, 2, 3}}"))
}

fn weights_equal_exp_margins() -> Outcome {
    let d = sim(SimModel::TwoLevel, 200, 5, 9);
    let cfg = BoostConfig::adaboost(4, 1.0, 30);
    let mut state = BoostState::init(&d, &cfg).map_err(|e| e.to_string())?;
    for m in 0..30 {
        state.adaboost_step(&d, &cfg).map_err(|e| e.to_string())?;
        // Recompute F from the ensemble itself, not from the state's scores.
        let f = state.ensemble().predict_dataset(&d).map_err(|e| e.to_string())?;
        let raw: Vec<f64> = d.labels().iter().zip(&f).map(|(y, f)| (-y * f).exp()).collect();
        let total: f64 = raw.iter().sum();
        for (i, (w, r)) in state.weights.iter().zip(&raw).enumerate() {
            ensure((w - r / total).abs() <= 1e-10, || format!("m={m} i={i}: {w} vs {}", r / total))?;
        }
    }
    Ok("30 iterations".into())
}

fn doubled_step_squares_multiplier() -> Outcome {
    let d = sim(SimModel::TwoLevel, 200, 5, 21);
    let one = BoostConfig::adaboost(8, 1.0, 10);
    let two = BoostConfig::adaboost(8, 2.0, 10);
    let mut state = BoostState::init(&d, &one).map_err(|e| e.to_string())?;
    for m in 0..10 {
        let mut a = state.clone();
        let mut b = state.clone();
        a.adaboost_step(&d, &one).map_err(|e| e.to_string())?;
        b.adaboost_step(&d, &two).map_err(|e| e.to_string())?;
        let ta = &a.ensemble().terms().last().ok_or("no term")?.tree;
        let tb = &b.ensemble().terms().last().ok_or("no term")?.tree;
        ensure(ta == tb, || format!("m={m}: directions differ"))?;
        for i in 0..d.len() {
            let y = d.labels()[i];
            let m1 = (-y * (a.scores[i] - state.scores[i])).exp();
            let m2 = (-y * (b.scores[i] - state.scores[i])).exp();
            ensure((m2 - m1 * m1).abs() <= 1e-12 * m2.max(1.0), || {
                format!("m={m} i={i}: {m2} vs {}", m1 * m1)
            })?;
        }
        state = a;
    }
    Ok("10 directions".into())
}

fn penalty_algebra() -> Outcome {
    let d = sim(SimModel::TwoLevel, 200, 5, 31);
    let unit = BoostConfig::fgd(Loss::BernoulliLog, Penalty::Unit, 6, 1.0, 20);
    let mut state = BoostState::init(&d, &unit).map_err(|e| e.to_string())?;
    for m in 0..20 {
        let mut a = state.clone();
        a.penalized_fgd_step(&d, &unit).map_err(|e| e.to_string())?;
        let base = a.ensemble().terms().last().ok_or("no term")?.tree.clone();
        let mut one = state.clone();
        one.penalized_fgd_step(&d, &BoostConfig { penalty: Penalty::Scaled { c: 1.0 }, ..unit.clone() })
            .map_err(|e| e.to_string())?;
        ensure(one.scores == a.scores && one.ensemble() == a.ensemble(), || {
            format!("m={m}: Scaled(1) differs from Unit")
        })?;
        for c in [0.1, 0.5] {
            let mut s = state.clone();
            s.penalized_fgd_step(&d, &BoostConfig { penalty: Penalty::Scaled { c }, ..unit.clone() })
                .map_err(|e| e.to_string())?;
            let t = &s.ensemble().terms().last().ok_or("no term")?.tree;
            ensure(leaves_scaled(&base, t, c), || format!("m={m} c={c}: not a ×c copy"))?;
        }
        state = a;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let y: Vec<f64> = (0..100).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let f: Vec<f64> = (0..100).map(|_| rng.random_range(-4.0..4.0)).collect();
    let (resp, w) = working_response(Loss::BernoulliLog, Penalty::Curvature, &y, &f).map_err(|e| e.to_string())?;
    for i in 0..y.len() {
        let p = half_logit_prob(f[i]);
        let ystar = (y[i] + 1.0) / 2.0;
        let expected = (ystar - p) / (2.0 * p * (1.0 - p));
        ensure((resp[i] - expected).abs() <= 1e-10 * expected.abs().max(1.0), || {
            format!("i={i}: response {} vs {expected}", resp[i])
        })?;
        ensure((w[i] - 4.0 * p * (1.0 - p)).abs() <= 1e-10, || format!("i={i}: weight {}", w[i]))?;
    }
    Ok("20 states, c ∈ {0.1, 0.5}; 100 curvature responses".into())
}

/// Same structure and every leaf of `b` equal to `c` times the leaf of `a`.
pub fn leaves_scaled(a: &Tree, b: &Tree, c: f64) -> bool {
    a.same_structure(b)
        && a.nodes().iter().zip(b.nodes()).all(|pair| match pair {
            (Node::Leaf { value: va }, Node::Leaf { value: vb }) => {
                (c * va - vb).abs() <= 1e-12 * va.abs().max(f64::MIN_POSITIVE)
            }
            _ => true,
        })
}

fn stump_equals_exhaustive() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let cfg = TreeConfig::new(2, TreeMode::Classification);
    for trial in 0..50 {
        let n = rng.random_range(1..=40);
        let q = rng.random_range(1..=5);
        let x: Vec<f64> = (0..n * q).map(|_| rng.random_range(0..6) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.6) { 1.0 } else { -1.0 }).collect();
        let d = Dataset::new(x, q, y, None).map_err(|e| e.to_string())?;
        let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|v| v / total).collect();
        let (oracle, _) = exhaustive_best_stump(&d, &w);
        let fitted = fit_classification_tree(&d, &w, &cfg).map_err(|e| e.to_string())?;
        ensure(fitted == oracle, || format!("trial {trial}: {fitted:?} vs {oracle:?}"))?;
        let distinct: usize = (0..q)
            .map(|j| {
                let mut v: Vec<f64> = (0..n).map(|i| d.value(i, j)).collect();
                v.sort_by(f64::total_cmp);
                v.dedup();
                v.len()
            })
            .sum();
        // Σ (midpoints + 1)·2 + 2 with midpoints = distinct − 1.
        ensure(enumerate_stumps(&d).len() == 2 * distinct + 2, || {
            format!("trial {trial}: enumeration count")
        })?;
    }
    Ok("50 random instances".into())
}

/// `F(x) + F(z) = F(x_S, z_{¬S}) + F(z_S, x_{¬S})` for an additive `F`.
pub fn rectangle_gap(ensemble: &Ensemble, x: &[f64], z: &[f64], subset: &[bool]) -> f64 {
    let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
        (0..a.len()).map(|j| if subset[j] { a[j] } else { b[j] }).collect()
    };
    let f = |p: &[f64]| ensemble.predict(p).expect("dimension matches");
    (f(x) + f(z) - f(&mix(x, z)) - f(&mix(z, x))).abs()
}

fn stump_ensembles_are_additive() -> Outcome {
    let d = sim(SimModel::LogisticAdditive, 300, 6, 51);
    let (ensemble, _) = run_boost(&d, &Dataset::empty(6), &BoostConfig::adaboost(2, 1.0, 200))
        .map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(52);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let z: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
        let s: Vec<bool> = (0..6).map(|_| rng.random_bool(0.5)).collect();
        worst = worst.max(rectangle_gap(&ensemble, &x, &z, &s));
    }
    ensure(worst <= 1e-9, || format!("max gap {worst:e}"))?;
    Ok(format!("{} stumps, 1000 pairs, max gap {worst:.2e}", ensemble.terms().len()))
}

fn runs_are_deterministic() -> Outcome {
    let train = sim(SimModel::TwoLevel, 200, 5, 61);
    let hold = sim(SimModel::TwoLevel, 100, 5, 62);
    let cfg = BoostConfig {
        subsample_fraction: 0.5,
        ..BoostConfig::adaboost(4, 1.0, 25)
    };
    let a = run_boost(&train, &hold, &cfg).map_err(|e| e.to_string())?;
    let b = run_boost(&train, &hold, &cfg).map_err(|e| e.to_string())?;
    ensure(a == b, || "repeated runs differ".into())?;
    ensure(a.0.to_json() == b.0.to_json(), || "serialisations differ".into())?;
    Ok("subsampled AdaBoost, 25 iterations".into())
}
