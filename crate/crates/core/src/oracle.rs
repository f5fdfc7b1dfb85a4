//! Brute-force reference computations used to check the learners: numeric
//! line search, central finite differences and exhaustive stump enumeration.
//!
//! Nothing here calls into the engine or the tree growers.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::tree::{Tree, TIE_TOL};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchResult {
    pub t_star: f64,
    pub value: f64,
    pub evaluations: usize,
}

pub const DEFAULT_BRACKET: (f64, f64) = (-10.0, 10.0);
pub const DEFAULT_TOL: f64 = 1e-8;

/// Minimises `t ↦ Σ ρ(yᵢ, Fᵢ + t·gᵢ)` by golden-section search. The bracket
/// is doubled outward while the loss still decreases past an endpoint.
pub fn numeric_line_search(
    loss: Loss,
    scores: &[f64],
    labels: &[f64],
    direction: &[f64],
    bracket: (f64, f64),
    tol: f64,
) -> Result<LineSearchResult> {
    if scores.len() != labels.len() || direction.len() != labels.len() {
        return Err(Error::domain("line search inputs differ in length"));
    }
    if direction.iter().all(|&g| g == 0.0) {
        return Err(Error::domain("line search direction is zero"));
    }
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::domain("line search needs lo < hi and tol > 0"));
    }
    let mut evaluations = 0;
    let mut objective = |t: f64| -> Result<f64> {
        evaluations += 1;
        let v: f64 = labels
            .iter()
            .zip(scores)
            .zip(direction)
            .map(|((&y, &f), &g)| loss.value(y, f + t * g))
            .sum();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::LineSearch(format!("loss is not finite at t = {t}")))
        }
    };

    let probe = tol.max(1e-6);
    for _ in 0..60 {
        let width = hi - lo;
        if objective(hi)? < objective(hi - probe)? {
            hi += width;
        } else if objective(lo)? < objective(lo + probe)? {
            lo -= width;
        } else {
            break;
        }
    }

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(c)?;
    let mut fd = objective(d)?;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d)?;
        }
    }
    let t_star = 0.5 * (a + b);
    let value = objective(t_star)?;
    Ok(LineSearchResult {
        t_star,
        value,
        evaluations,
    })
}

/// Central differences `(ρ(F+h) − ρ(F−h)) / 2h` and
/// `(ρ(F+h) − 2ρ(F) + ρ(F−h)) / h²`. Roundoff in the second grows like
/// `ε·ρ/h²`, so curvature checks want a larger `h` than gradient checks.
pub fn finite_difference_derivatives(loss: Loss, y: f64, f: f64, h: f64) -> (f64, f64) {
    let up = loss.value(y, f + h);
    let mid = loss.value(y, f);
    let down = loss.value(y, f - h);
    ((up - down) / (2.0 * h), (up - 2.0 * mid + down) / (h * h))
}

/// One member of the ±1 stump class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StumpCandidate {
    Constant(f64),
    /// `left` is predicted for `x[feature] <= threshold`, `-left` otherwise.
    /// A threshold of `-inf` routes everything right.
    Split {
        feature: usize,
        threshold: f64,
        left: f64,
    },
}

impl StumpCandidate {
    pub fn predict(&self, x: &[f64]) -> f64 {
        match *self {
            StumpCandidate::Constant(v) => v,
            StumpCandidate::Split {
                feature,
                threshold,
                left,
            } => {
                if x[feature] <= threshold {
                    left
                } else {
                    -left
                }
            }
        }
    }

    pub fn to_tree(&self, n_features: usize) -> Tree {
        match *self {
            StumpCandidate::Constant(v) => Tree::leaf(n_features, v),
            StumpCandidate::Split {
                threshold,
                left,
                ..
            } if threshold == f64::NEG_INFINITY => Tree::leaf(n_features, -left),
            StumpCandidate::Split {
                feature,
                threshold,
                left,
            } => Tree::stump(n_features, feature, threshold, left, -left),
        }
    }
}

/// Every ±1 stump on `data`, in tie-break order: constants +1 and −1, then per
/// feature the thresholds `-inf` and each distinct midpoint ascending, each
/// with polarities (+1 | −1) and (−1 | +1).
pub fn enumerate_stumps(data: &Dataset) -> Vec<StumpCandidate> {
    let mut out = vec![StumpCandidate::Constant(1.0), StumpCandidate::Constant(-1.0)];
    for j in 0..data.n_features() {
        let mut values: Vec<f64> = (0..data.len()).map(|i| data.value(i, j)).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let mut thresholds = vec![f64::NEG_INFINITY];
        for w in values.windows(2) {
            let m = w[0] + (w[1] - w[0]) / 2.0;
            thresholds.push(if m < w[1] { m } else { w[0] });
        }
        for threshold in thresholds {
            for left in [1.0, -1.0] {
                out.push(StumpCandidate::Split {
                    feature: j,
                    threshold,
                    left,
                });
            }
        }
    }
    out
}

/// Scores every stump with `score` and returns the first minimiser under the
/// shared relative tie tolerance.
pub fn argmin_stump<F>(data: &Dataset, scale: f64, mut score: F) -> (StumpCandidate, f64)
where
    F: FnMut(&StumpCandidate) -> f64,
{
    let mut best: Option<(StumpCandidate, f64)> = None;
    for cand in enumerate_stumps(data) {
        let s = score(&cand);
        match best {
            Some((_, b)) if !(s < b - TIE_TOL * scale) => {}
            _ => best = Some((cand, s)),
        }
    }
    best.expect("constant candidates always exist")
}

/// The ±1 stump (or constant) with the smallest weighted error.
pub fn exhaustive_best_stump(data: &Dataset, weights: &[f64]) -> (Tree, f64) {
    let total: f64 = weights.iter().sum();
    let (best, err) = argmin_stump(data, total, |cand| {
        (0..data.len())
            .filter(|&i| cand.predict(data.row(i)) != data.labels()[i])
            .map(|i| weights[i])
            .sum()
    });
    (best.to_tree(data.n_features()), err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{fit_classification_tree, TreeConfig, TreeMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn line_search_recovers_half_log_three() {
        // Three correct and one wrong point under a constant +1 direction.
        let y = [1.0, 1.0, 1.0, -1.0];
        let r = numeric_line_search(
            Loss::Exponential,
            &[0.0; 4],
            &y,
            &[1.0; 4],
            DEFAULT_BRACKET,
            DEFAULT_TOL,
        )
        .unwrap();
        assert!((r.t_star - 0.5 * 3f64.ln()).abs() < 1e-7);
        assert!((r.t_star - 0.549306).abs() < 1e-6);
        assert!((r.value - 2.0 * 0.1875f64.sqrt() * 4.0).abs() < 1e-10);
        assert!((r.value - 3.4641).abs() < 1e-4);
    }

    #[test]
    fn line_search_stationary_and_squared() {
        // Σρ'g = 0 at t = 0 by symmetry.
        let y = [1.0, -1.0, 1.0, -1.0];
        let g = [1.0, 1.0, -1.0, -1.0];
        let r = numeric_line_search(Loss::Exponential, &[0.0; 4], &y, &g, DEFAULT_BRACKET, 1e-9)
            .unwrap();
        // A value-only search resolves the minimiser to about √ε.
        assert!(r.t_star.abs() < 1e-7);

        let r = numeric_line_search(Loss::Squared, &[0.0; 4], &y, &y, DEFAULT_BRACKET, 1e-10)
            .unwrap();
        assert!((r.t_star - 1.0).abs() < 1e-7);
    }

    #[test]
    fn line_search_expands_bracket() {
        let y = [1.0, 1.0];
        let r = numeric_line_search(Loss::Squared, &[0.0; 2], &y, &[0.01; 2], (-1.0, 1.0), 1e-9)
            .unwrap();
        assert!((r.t_star - 100.0).abs() < 1e-6);
        assert!(numeric_line_search(Loss::Squared, &[0.0; 2], &y, &[0.0; 2], (-1.0, 1.0), 1e-9)
            .is_err());
    }

    #[test]
    fn line_search_fails_on_overflow() {
        let r = numeric_line_search(
            Loss::Exponential,
            &[-800.0],
            &[1.0],
            &[1.0],
            DEFAULT_BRACKET,
            DEFAULT_TOL,
        );
        assert!(matches!(r, Err(Error::LineSearch(_))));
    }

    #[test]
    fn finite_differences_at_zero() {
        let (g, _) = finite_difference_derivatives(Loss::Exponential, 1.0, 0.0, 1e-5);
        assert!((g + 1.0).abs() < 1e-9);
        let (g, c) = finite_difference_derivatives(Loss::BernoulliLog, 1.0, 0.0, 1e-5);
        assert!((g + 1.0).abs() < 1e-9);
        assert!((c - 1.0).abs() < 1e-5);
    }

    #[test]
    fn directional_derivative_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for loss in [Loss::Exponential, Loss::BernoulliLog, Loss::Squared] {
            for _ in 0..20 {
                let n = 30;
                let y: Vec<f64> = (0..n)
                    .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
                    .collect();
                let f: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
                let g: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                let lhs: f64 = (0..n)
                    .map(|i| finite_difference_derivatives(loss, y[i], f[i], 1e-5).0 * g[i])
                    .sum();
                let total = |t: f64| -> f64 {
                    (0..n).map(|i| loss.value(y[i], f[i] + t * g[i])).sum()
                };
                let h = 1e-5;
                let rhs = (total(h) - total(-h)) / (2.0 * h);
                assert!((lhs - rhs).abs() < 1e-6, "{loss:?}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn enumeration_count() {
        let d = Dataset::new(
            vec![1.0, 5.0, 2.0, 5.0, 2.0, 6.0, 3.0, 7.0],
            2,
            vec![1.0, -1.0, 1.0, -1.0],
            None,
        )
        .unwrap();
        // Feature 0 has 3 distinct values (2 midpoints), feature 1 has 3 (2).
        assert_eq!(enumerate_stumps(&d).len(), (2 + 1) * 2 + (2 + 1) * 2 + 2);
    }

    #[test]
    fn separable_toy_and_constant() {
        let d = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], 1, vec![1.0, 1.0, -1.0, -1.0], None)
            .unwrap();
        let (t, e) = exhaustive_best_stump(&d, &[0.25; 4]);
        assert_eq!(t, Tree::stump(1, 0, 2.5, 1.0, -1.0));
        assert_eq!(e, 0.0);

        let d = Dataset::new(vec![1.0, 2.0, 3.0], 1, vec![1.0; 3], None).unwrap();
        let (t, e) = exhaustive_best_stump(&d, &[1.0 / 3.0; 3]);
        assert_eq!(t, Tree::leaf(1, 1.0));
        assert_eq!(e, 0.0);
    }

    #[test]
    fn agrees_with_tree_stumps() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let cfg = TreeConfig::new(2, TreeMode::Classification);
        for _ in 0..50 {
            let n = rng.random_range(1..=40);
            let q = rng.random_range(1..=5);
            // Coarse grid so that ties and repeated values occur.
            let x: Vec<f64> = (0..n * q).map(|_| rng.random_range(0..6) as f64).collect();
            let y: Vec<f64> = (0..n)
                .map(|_| if rng.random_bool(0.6) { 1.0 } else { -1.0 })
                .collect();
            let d = Dataset::new(x, q, y, None).unwrap();
            let mut w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            let (oracle, _) = exhaustive_best_stump(&d, &w);
            let fitted = fit_classification_tree(&d, &w, &cfg).unwrap();
            assert_eq!(fitted, oracle);
        }
    }
}
