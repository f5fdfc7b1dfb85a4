//! Weighted CART-style base learners.
//!
//! Trees are grown best-first up to a leaf budget (`max_leaves`). Regression
//! trees maximise the weighted sum-of-squares reduction and predict weighted
//! means. Classification trees maximise the weighted Gini decrease and predict
//! the weighted-majority label, except that a two-leaf classification tree is
//! the exact weighted-error-minimising stump (the steepest descent direction
//! of the exponential loss among ±1 stumps).
//!
//! Candidate thresholds are midpoints of consecutive distinct values inside a
//! node and a row goes left when `x[feature] <= threshold`. Ties between
//! candidates go to the lowest feature index, then the lowest threshold.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Relative tolerance under which two split scores count as tied and a
/// decrease counts as zero.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeMode {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    pub max_leaves: usize,
    pub min_leaf_weight: f64,
    pub mode: TreeMode,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_leaves: 8,
            min_leaf_weight: 0.0,
            mode: TreeMode::Classification,
        }
    }
}

impl TreeConfig {
    pub fn new(max_leaves: usize, mode: TreeMode) -> Self {
        TreeConfig {
            max_leaves,
            min_leaf_weight: 0.0,
            mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_leaves < 2 {
            return Err(Error::config("max_leaves must be at least 2"));
        }
        if !(self.min_leaf_weight >= 0.0) || !self.min_leaf_weight.is_finite() {
            return Err(Error::config("min_leaf_weight must be a finite value >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary axis-aligned tree. Nodes are stored in preorder with the root at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTree")]
pub struct Tree {
    n_features: usize,
    nodes: Vec<Node>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTree {
    n_features: usize,
    nodes: Vec<Node>,
}

impl TryFrom<RawTree> for Tree {
    type Error = Error;

    fn try_from(raw: RawTree) -> Result<Tree> {
        Tree::from_nodes(raw.n_features, raw.nodes)
    }
}

impl Tree {
    pub fn leaf(n_features: usize, value: f64) -> Tree {
        Tree {
            n_features,
            nodes: vec![Node::Leaf { value }],
        }
    }

    pub fn stump(n_features: usize, feature: usize, threshold: f64, left: f64, right: f64) -> Tree {
        Tree {
            n_features,
            nodes: vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { value: left },
                Node::Leaf { value: right },
            ],
        }
    }

    /// Builds a tree from a preorder node list, checking its shape.
    pub fn from_nodes(n_features: usize, nodes: Vec<Node>) -> Result<Tree> {
        fn walk(nodes: &[Node], n_features: usize, at: usize, next: &mut usize) -> Result<()> {
            *next += 1;
            match nodes[at] {
                Node::Leaf { value } if value.is_finite() => Ok(()),
                Node::Leaf { .. } => Err(Error::domain("non-finite leaf value")),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= n_features || !threshold.is_finite() {
                        return Err(Error::domain("invalid split"));
                    }
                    if left != *next || left >= nodes.len() {
                        return Err(Error::domain("nodes are not in preorder"));
                    }
                    walk(nodes, n_features, left, next)?;
                    if right != *next || right >= nodes.len() {
                        return Err(Error::domain("nodes are not in preorder"));
                    }
                    walk(nodes, n_features, right, next)
                }
            }
        }
        if nodes.is_empty() {
            return Err(Error::domain("tree without nodes"));
        }
        let mut next = 0;
        walk(&nodes, n_features, 0, &mut next)?;
        if next != nodes.len() {
            return Err(Error::domain("unreachable tree nodes"));
        }
        Ok(Tree { n_features, nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::domain(format!(
                "input has {} features, tree expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(self.eval(x))
    }

    /// Prediction without the dimension check.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    /// The same structure with every leaf value multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Tree {
        let nodes = self
            .nodes
            .iter()
            .map(|n| match *n {
                Node::Leaf { value } => Node::Leaf { value: c * value },
                split => split,
            })
            .collect();
        Tree {
            n_features: self.n_features,
            nodes,
        }
    }

    /// True when both trees have the same splits (leaf values ignored).
    pub fn same_structure(&self, other: &Tree) -> bool {
        self.nodes.len() == other.nodes.len()
            && self.nodes.iter().zip(&other.nodes).all(|(a, b)| match (a, b) {
                (Node::Leaf { .. }, Node::Leaf { .. }) => true,
                (Node::Split { .. }, Node::Split { .. }) => a == b,
                _ => false,
            })
    }

    /// Distinct features tested along each root-to-leaf path, in leaf order.
    pub fn path_features(&self) -> Vec<Vec<usize>> {
        fn walk(t: &Tree, at: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            match t.nodes[at] {
                Node::Leaf { .. } => {
                    let mut f = path.clone();
                    f.sort_unstable();
                    f.dedup();
                    out.push(f);
                }
                Node::Split {
                    feature,
                    left,
                    right,
                    ..
                } => {
                    path.push(feature);
                    walk(t, left, path, out);
                    walk(t, right, path, out);
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        walk(self, 0, &mut Vec::new(), &mut out);
        out
    }
}

pub fn fit_classification_tree(data: &Dataset, weights: &[f64], cfg: &TreeConfig) -> Result<Tree> {
    if cfg.mode != TreeMode::Classification {
        return Err(Error::config("classification tree needs mode = classification"));
    }
    check_inputs(data, weights, cfg)?;
    let targets = data.labels();
    if cfg.max_leaves == 2 {
        return Ok(best_error_stump(data, targets, weights, cfg.min_leaf_weight));
    }
    Ok(grow::<Gini>(data, targets, weights, cfg))
}

pub fn fit_regression_tree(
    data: &Dataset,
    responses: &[f64],
    weights: &[f64],
    cfg: &TreeConfig,
) -> Result<Tree> {
    if cfg.mode != TreeMode::Regression {
        return Err(Error::config("regression tree needs mode = regression"));
    }
    if responses.len() != data.len() {
        return Err(Error::domain("responses and data differ in length"));
    }
    if responses.iter().any(|r| !r.is_finite()) {
        return Err(Error::domain("non-finite working response"));
    }
    check_inputs(data, weights, cfg)?;
    Ok(grow::<Sse>(data, responses, weights, cfg))
}

fn check_inputs(data: &Dataset, weights: &[f64], cfg: &TreeConfig) -> Result<()> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::domain("cannot fit a tree to an empty dataset"));
    }
    if weights.len() != data.len() {
        return Err(Error::domain("weights and data differ in length"));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::domain("weights must be finite and nonnegative"));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::DegenerateWeights);
    }
    Ok(())
}

/// Row indices sorted by each feature; ties keep index order.
fn presort(data: &Dataset, rows: &[usize]) -> Vec<Vec<usize>> {
    (0..data.n_features())
        .map(|j| {
            let mut v = rows.to_vec();
            v.sort_by(|&a, &b| data.value(a, j).total_cmp(&data.value(b, j)).then(a.cmp(&b)));
            v
        })
        .collect()
}

/// Midpoint of two consecutive distinct values that still separates them.
#[inline]
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo + (hi - lo) / 2.0;
    if m < hi {
        m
    } else {
        lo
    }
}

#[inline]
fn better(candidate: f64, best: f64, scale: f64) -> bool {
    candidate > best + TIE_TOL * scale
}

// ---------------------------------------------------------------------------
// Exact weighted-error stump
// ---------------------------------------------------------------------------

/// Minimises the weighted error over constant classifiers and all stumps.
/// Enumeration order: constant +1, constant −1, then per feature and
/// ascending threshold the polarities (+1 | −1) and (−1 | +1); a later
/// candidate must be strictly better beyond [`TIE_TOL`].
fn best_error_stump(data: &Dataset, labels: &[f64], weights: &[f64], min_leaf_weight: f64) -> Tree {
    let q = data.n_features();
    let rows: Vec<usize> = (0..data.len()).collect();
    let total: f64 = weights.iter().sum();
    let pos: f64 = rows.iter().filter(|&&i| labels[i] > 0.0).map(|&i| weights[i]).sum();
    let neg: f64 = rows.iter().filter(|&&i| labels[i] < 0.0).map(|&i| weights[i]).sum();

    // Scores are negated errors so that `better` reads as "larger wins".
    let mut best_score = -neg;
    let mut best: Tree = Tree::leaf(q, 1.0);
    if better(-pos, best_score, total) {
        best_score = -pos;
        best = Tree::leaf(q, -1.0);
    }

    for (j, order) in presort(data, &rows).into_iter().enumerate() {
        let (mut lp, mut ln) = (0.0, 0.0);
        for k in 0..order.len() - 1 {
            let i = order[k];
            if labels[i] > 0.0 {
                lp += weights[i];
            } else {
                ln += weights[i];
            }
            let lo = data.value(i, j);
            let hi = data.value(order[k + 1], j);
            if lo == hi {
                continue;
            }
            let (rp, rn) = (pos - lp, neg - ln);
            if lp + ln < min_leaf_weight || rp + rn < min_leaf_weight {
                continue;
            }
            let t = midpoint(lo, hi);
            let plus_left = -(ln + rp);
            if better(plus_left, best_score, total) {
                best_score = plus_left;
                best = Tree::stump(q, j, t, 1.0, -1.0);
            }
            let minus_left = -(lp + rn);
            if better(minus_left, best_score, total) {
                best_score = minus_left;
                best = Tree::stump(q, j, t, -1.0, 1.0);
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Best-first growth
// ---------------------------------------------------------------------------

/// Sufficient statistics of a node for one split criterion.
trait Criterion {
    type Stats: Copy + Default;

    fn add(stats: &mut Self::Stats, w: f64, target: f64);
    fn minus(parent: &Self::Stats, part: &Self::Stats) -> Self::Stats;
    fn weight(stats: &Self::Stats) -> f64;
    /// Quantity whose decrease a split maximises, up to a per-node constant.
    fn gain(parent: &Self::Stats, left: &Self::Stats, right: &Self::Stats) -> f64;
    /// Magnitude used to make tie and zero tolerances relative.
    fn scale(stats: &Self::Stats) -> f64;
    fn leaf_value(stats: &Self::Stats) -> f64;
}

/// Weighted Gini: impurity of a node is `2 W₊ W₋ / W`.
struct Gini;

#[derive(Clone, Copy, Default)]
struct ClassStats {
    pos: f64,
    neg: f64,
}

impl Gini {
    fn impurity(s: &ClassStats) -> f64 {
        let w = s.pos + s.neg;
        if w > 0.0 {
            2.0 * s.pos * s.neg / w
        } else {
            0.0
        }
    }
}

impl Criterion for Gini {
    type Stats = ClassStats;

    fn add(stats: &mut ClassStats, w: f64, target: f64) {
        if target > 0.0 {
            stats.pos += w;
        } else {
            stats.neg += w;
        }
    }

    fn minus(parent: &ClassStats, part: &ClassStats) -> ClassStats {
        ClassStats {
            pos: (parent.pos - part.pos).max(0.0),
            neg: (parent.neg - part.neg).max(0.0),
        }
    }

    fn weight(stats: &ClassStats) -> f64 {
        stats.pos + stats.neg
    }

    fn gain(parent: &ClassStats, left: &ClassStats, right: &ClassStats) -> f64 {
        Gini::impurity(parent) - Gini::impurity(left) - Gini::impurity(right)
    }

    fn scale(stats: &ClassStats) -> f64 {
        stats.pos + stats.neg
    }

    fn leaf_value(stats: &ClassStats) -> f64 {
        if stats.pos >= stats.neg {
            1.0
        } else {
            -1.0
        }
    }
}

/// Weighted sum of squares around the weighted mean.
struct Sse;

#[derive(Clone, Copy, Default)]
struct MomentStats {
    w: f64,
    wr: f64,
    wrr: f64,
}

impl Sse {
    fn explained(s: &MomentStats) -> f64 {
        if s.w > 0.0 {
            s.wr * s.wr / s.w
        } else {
            0.0
        }
    }
}

impl Criterion for Sse {
    type Stats = MomentStats;

    fn add(stats: &mut MomentStats, w: f64, target: f64) {
        stats.w += w;
        stats.wr += w * target;
        stats.wrr += w * target * target;
    }

    fn minus(parent: &MomentStats, part: &MomentStats) -> MomentStats {
        MomentStats {
            w: (parent.w - part.w).max(0.0),
            wr: parent.wr - part.wr,
            wrr: parent.wrr - part.wrr,
        }
    }

    fn weight(stats: &MomentStats) -> f64 {
        stats.w
    }

    fn gain(parent: &MomentStats, left: &MomentStats, right: &MomentStats) -> f64 {
        // SSE(parent) − SSE(left) − SSE(right); the Σwr² terms cancel.
        Sse::explained(left) + Sse::explained(right) - Sse::explained(parent)
    }

    fn scale(stats: &MomentStats) -> f64 {
        stats.wrr
    }

    fn leaf_value(stats: &MomentStats) -> f64 {
        if stats.w > 0.0 {
            stats.wr / stats.w
        } else {
            0.0
        }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Pending {
    /// Index into the build arena.
    node: usize,
    sorted: Vec<Vec<usize>>,
    split: Option<Candidate>,
}

enum Build {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

fn node_stats<C: Criterion>(rows: &[usize], targets: &[f64], weights: &[f64]) -> C::Stats {
    let mut s = C::Stats::default();
    for &i in rows {
        C::add(&mut s, weights[i], targets[i]);
    }
    s
}

fn best_split<C: Criterion>(
    data: &Dataset,
    sorted: &[Vec<usize>],
    stats: &C::Stats,
    targets: &[f64],
    weights: &[f64],
    min_leaf_weight: f64,
) -> Option<Candidate> {
    let scale = C::scale(stats);
    let mut best: Option<Candidate> = None;
    for (j, order) in sorted.iter().enumerate() {
        let mut left = C::Stats::default();
        for k in 0..order.len().saturating_sub(1) {
            let i = order[k];
            C::add(&mut left, weights[i], targets[i]);
            let lo = data.value(i, j);
            let hi = data.value(order[k + 1], j);
            if lo == hi {
                continue;
            }
            let right = C::minus(stats, &left);
            if C::weight(&left) < min_leaf_weight || C::weight(&right) < min_leaf_weight {
                continue;
            }
            let gain = C::gain(stats, &left, &right);
            let beats = match &best {
                None => gain > TIE_TOL * scale,
                Some(b) => better(gain, b.gain, scale),
            };
            if beats {
                best = Some(Candidate {
                    feature: j,
                    threshold: midpoint(lo, hi),
                    gain,
                });
            }
        }
    }
    best
}

fn grow<C: Criterion>(data: &Dataset, targets: &[f64], weights: &[f64], cfg: &TreeConfig) -> Tree {
    let rows: Vec<usize> = (0..data.len()).collect();
    let stats = node_stats::<C>(&rows, targets, weights);
    let sorted = presort(data, &rows);
    let split = best_split::<C>(data, &sorted, &stats, targets, weights, cfg.min_leaf_weight);

    let mut arena = vec![Build::Leaf(C::leaf_value(&stats))];
    let mut pending = vec![Pending {
        node: 0,
        sorted,
        split,
    }];
    let mut n_leaves = 1;
    let mut goes_left = vec![false; data.len()];

    while n_leaves < cfg.max_leaves {
        // Largest gain first; earlier-created nodes win ties.
        let mut pick: Option<usize> = None;
        for (k, p) in pending.iter().enumerate() {
            if let Some(c) = &p.split {
                let wins = match pick {
                    None => true,
                    Some(b) => {
                        let bc = pending[b].split.as_ref().unwrap();
                        c.gain > bc.gain || (c.gain == bc.gain && p.node < pending[b].node)
                    }
                };
                if wins {
                    pick = Some(k);
                }
            }
        }
        let Some(k) = pick else { break };
        let leaf = pending.swap_remove(k);
        let cand = leaf.split.unwrap();

        for &i in &leaf.sorted[0] {
            goes_left[i] = data.value(i, cand.feature) <= cand.threshold;
        }
        let (mut left_sorted, mut right_sorted) = (Vec::new(), Vec::new());
        for order in &leaf.sorted {
            let (l, r): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&i| goes_left[i]);
            left_sorted.push(l);
            right_sorted.push(r);
        }

        let mut children = [0usize; 2];
        for (slot, sorted) in [left_sorted, right_sorted].into_iter().enumerate() {
            let stats = node_stats::<C>(&sorted[0], targets, weights);
            let split =
                best_split::<C>(data, &sorted, &stats, targets, weights, cfg.min_leaf_weight);
            arena.push(Build::Leaf(C::leaf_value(&stats)));
            let node = arena.len() - 1;
            children[slot] = node;
            pending.push(Pending {
                node,
                sorted,
                split,
            });
        }
        arena[leaf.node] = Build::Split {
            feature: cand.feature,
            threshold: cand.threshold,
            left: children[0],
            right: children[1],
        };
        n_leaves += 1;
    }

    Tree {
        n_features: data.n_features(),
        nodes: to_preorder(&arena),
    }
}

fn to_preorder(arena: &[Build]) -> Vec<Node> {
    fn emit(arena: &[Build], at: usize, out: &mut Vec<Node>) -> usize {
        let me = out.len();
        match arena[at] {
            Build::Leaf(value) => out.push(Node::Leaf { value }),
            Build::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                out.push(Node::Leaf { value: 0.0 });
                let l = emit(arena, left, out);
                let r = emit(arena, right, out);
                out[me] = Node::Split {
                    feature,
                    threshold,
                    left: l,
                    right: r,
                };
            }
        }
        me
    }
    let mut out = Vec::with_capacity(arena.len());
    emit(arena, 0, &mut out);
    out
}
