//! Multi-output regression trees over binary features, the surrogate losses,
//! complexity measures and the depth-increasing fitting loop.
//!
//! Splits test a single binary feature against 0.5: a cleared bit goes left,
//! a set bit goes right. Node impurity is the mean, over outputs, of the
//! weighted variance of the targets reaching the node, and a split is taken
//! only when it lowers the weighted impurity by more than [`MIN_GAIN`].

use serde::{Deserialize, Serialize};

use crate::blackbox::{BlackBoxBinding, ProbabilityMatrix, DEFAULT_BATCH};
use crate::domain::InterpretableDomain;
use crate::error::{Error, Result};
use crate::point::InterpretablePoint;
use crate::sampling::WeightedSample;

/// Smallest impurity decrease (as a fraction of root weight) worth a split.
pub const MIN_GAIN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Plain depth-bounded greedy fit.
    Greedy,
    /// Shallowest greedy tree meeting the fidelity target.
    Limet,
    /// Greedy tree whose leaves were overwritten with black-box
    /// probabilities at their minimal points.
    LimetRelabeled,
    /// One leaf per point of the interpretable space.
    LimetComplete,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Greedy => "greedy",
            Variant::Limet => "limet",
            Variant::LimetRelabeled => "limet-relabeled",
            Variant::LimetComplete => "limet-complete",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub prediction: Vec<f64>,
    /// Total training weight that reached the leaf.
    pub support: f64,
    #[serde(default)]
    pub impurity: f64,
    /// Pre-relabeling prediction, kept so both variants come from one fit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_prediction: Option<Vec<f64>>,
    /// Indices of the training points routed here.
    #[serde(skip)]
    pub samples: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        feature: usize,
        left: usize,
        right: usize,
        #[serde(default)]
        support: f64,
        #[serde(default)]
        impurity: f64,
    },
    Leaf {
        leaf: Leaf,
    },
}

impl TreeNode {
    pub fn support(&self) -> f64 {
        match self {
            TreeNode::Split { support, .. } => *support,
            TreeNode::Leaf { leaf } => leaf.support,
        }
    }

    pub fn impurity(&self) -> f64 {
        match self {
            TreeNode::Split { impurity, .. } => *impurity,
            TreeNode::Leaf { leaf } => leaf.impurity,
        }
    }

    pub fn as_leaf(&self) -> Option<&Leaf> {
        match self {
            TreeNode::Leaf { leaf } => Some(leaf),
            TreeNode::Split { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeMeta {
    pub depth_bound: usize,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub achieved_fidelity: Option<f64>,
    pub variant: Variant,
}

/// A fitted surrogate `g`. Node 0 is the root; children are node indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateTree {
    pub d: usize,
    /// Black-box class ids explained by the outputs, in output order.
    pub classes: Vec<usize>,
    pub nodes: Vec<TreeNode>,
    pub meta: TreeMeta,
}

/// One split on a root-to-leaf path.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Condition {
    pub feature: usize,
    /// `true` for the `>= 0.5` branch.
    pub value: bool,
}

impl SurrogateTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn output_len(&self) -> usize {
        self.classes.len()
    }

    /// Leaf node ids in depth-first, left-to-right order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            match &self.nodes[n] {
                TreeNode::Leaf { .. } => out.push(n),
                TreeNode::Split { left, right, .. } => {
                    stack.push(*right);
                    stack.push(*left);
                }
            }
        }
        out
    }

    pub fn leaf(&self, id: usize) -> Result<&Leaf> {
        self.nodes
            .get(id)
            .and_then(TreeNode::as_leaf)
            .ok_or_else(|| Error::invalid(format!("node {id} is not a leaf of this tree")))
    }

    pub fn width(&self) -> usize {
        self.nodes.iter().filter(|n| n.as_leaf().is_some()).count()
    }

    /// Length of the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(t: &SurrogateTree, n: usize) -> usize {
            match &t.nodes[n] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }

    /// Leaf reached by `point`.
    pub fn leaf_of(&self, point: &InterpretablePoint) -> Result<usize> {
        point.check_len(self.d)?;
        let mut n = 0;
        loop {
            match &self.nodes[n] {
                TreeNode::Leaf { .. } => return Ok(n),
                TreeNode::Split {
                    feature,
                    left,
                    right,
                    ..
                } => n = if point.get(*feature) { *right } else { *left },
            }
        }
    }

    /// Prediction vector of the leaf that `point` reaches.
    pub fn predict(&self, point: &InterpretablePoint) -> Result<Vec<f64>> {
        let leaf = self.leaf_of(point)?;
        Ok(self.leaf(leaf)?.prediction.clone())
    }

    pub fn predict_many(&self, points: &[InterpretablePoint]) -> Result<Vec<Vec<f64>>> {
        points.iter().map(|p| self.predict(p)).collect()
    }

    /// Conditions from the root down to `leaf`.
    pub fn path_to(&self, leaf: usize) -> Result<Vec<Condition>> {
        self.leaf(leaf)?;
        fn go(t: &SurrogateTree, n: usize, target: usize, path: &mut Vec<Condition>) -> bool {
            if n == target {
                return true;
            }
            if let TreeNode::Split {
                feature,
                left,
                right,
                ..
            } = &t.nodes[n]
            {
                for (child, value) in [(*left, false), (*right, true)] {
                    path.push(Condition {
                        feature: *feature,
                        value,
                    });
                    if go(t, child, target, path) {
                        return true;
                    }
                    path.pop();
                }
            }
            false
        }
        let mut path = Vec::new();
        if go(self, 0, leaf, &mut path) {
            Ok(path)
        } else {
            Err(Error::invalid(format!("leaf {leaf} is unreachable from the root")))
        }
    }

    /// Topology with predictions stripped; equal for trees that differ only
    /// in leaf values.
    pub fn structure(&self) -> Vec<Option<(usize, usize, usize)>> {
        self.nodes
            .iter()
            .map(|n| match n {
                TreeNode::Split {
                    feature,
                    left,
                    right,
                    ..
                } => Some((*feature, *left, *right)),
                TreeNode::Leaf { .. } => None,
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let tree: Self = serde_json::from_str(s)?;
        tree.validate()?;
        Ok(tree)
    }

    fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::invalid("tree has no nodes"));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                TreeNode::Split {
                    feature,
                    left,
                    right,
                    ..
                } => {
                    if *feature >= self.d || *left >= self.nodes.len() || *right >= self.nodes.len()
                    {
                        return Err(Error::invalid(format!("node {i} has out-of-range references")));
                    }
                }
                TreeNode::Leaf { leaf } => {
                    if leaf.prediction.len() != self.classes.len() {
                        return Err(Error::invalid(format!("leaf {i} has wrong output length")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_training_set(
    points: &[InterpretablePoint],
    targets: &[Vec<f64>],
    weights: &[f64],
) -> Result<(usize, usize)> {
    let n = points.len();
    if n == 0 {
        return Err(Error::invalid("training set is empty"));
    }
    if targets.len() != n || weights.len() != n {
        return Err(Error::invalid(format!(
            "{n} points, {} target rows and {} weights",
            targets.len(),
            weights.len()
        )));
    }
    let d = points[0].len();
    if d == 0 || points.iter().any(|p| p.len() != d) {
        return Err(Error::invalid("points must share a non-zero length"));
    }
    let m = targets[0].len();
    if m == 0 || targets.iter().any(|t| t.len() != m) {
        return Err(Error::invalid("target rows must share a non-zero length"));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::invalid("weights are all zero"));
    }
    Ok((d, m))
}

/// Weighted mean vector and impurity of a subset.
struct NodeStats {
    weight: f64,
    mean: Vec<f64>,
    impurity: f64,
}

fn node_stats(idx: &[usize], targets: &[Vec<f64>], weights: &[f64], m: usize) -> NodeStats {
    let weight: f64 = idx.iter().map(|&i| weights[i]).sum();
    let mut mean = vec![0.0; m];
    if weight == 0.0 {
        return NodeStats {
            weight,
            mean,
            impurity: 0.0,
        };
    }
    for &i in idx {
        for (acc, y) in mean.iter_mut().zip(&targets[i]) {
            *acc += weights[i] * y;
        }
    }
    for v in &mut mean {
        *v /= weight;
    }
    let mut ss = 0.0;
    for &i in idx {
        for (mu, y) in mean.iter().zip(&targets[i]) {
            ss += weights[i] * (y - mu) * (y - mu);
        }
    }
    NodeStats {
        weight,
        mean,
        impurity: ss / (weight * m as f64),
    }
}

fn rescaled(mut v: Vec<f64>) -> Vec<f64> {
    for x in &mut v {
        *x = x.clamp(0.0, 1.0);
    }
    let sum: f64 = v.iter().sum();
    if sum > 1.0 {
        for x in &mut v {
            *x /= sum;
        }
    }
    v
}

struct Grower<'a> {
    points: &'a [InterpretablePoint],
    targets: &'a [Vec<f64>],
    weights: &'a [f64],
    m: usize,
    total_weight: f64,
    depth_bound: usize,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn leaf(&mut self, idx: Vec<usize>, stats: NodeStats) -> usize {
        self.nodes.push(TreeNode::Leaf {
            leaf: Leaf {
                prediction: rescaled(stats.mean),
                support: stats.weight,
                impurity: stats.impurity,
                original_prediction: None,
                samples: Some(idx),
            },
        });
        self.nodes.len() - 1
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, used: &mut [bool]) -> usize {
        let stats = node_stats(&idx, self.targets, self.weights, self.m);
        if depth >= self.depth_bound || idx.len() < 2 || stats.impurity == 0.0 {
            return self.leaf(idx, stats);
        }

        let parent_term = stats.weight * stats.impurity;
        let mut best: Option<(usize, f64)> = None;
        for (f, &taken) in used.iter().enumerate() {
            if taken {
                continue;
            }
            let (l, r): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| !self.points[i].get(f));
            if l.is_empty() || r.is_empty() {
                continue;
            }
            let sl = node_stats(&l, self.targets, self.weights, self.m);
            let sr = node_stats(&r, self.targets, self.weights, self.m);
            if sl.weight == 0.0 || sr.weight == 0.0 {
                continue;
            }
            let gain = (parent_term - sl.weight * sl.impurity - sr.weight * sr.impurity)
                / self.total_weight;
            // equal gains (to within rounding) keep the lower feature index
            if best.is_none_or(|(_, g)| gain > g + MIN_GAIN) {
                best = Some((f, gain));
            }
        }

        match best {
            Some((f, gain)) if gain > MIN_GAIN => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.into_iter().partition(|&i| !self.points[i].get(f));
                let me = self.nodes.len();
                self.nodes.push(TreeNode::Split {
                    feature: f,
                    left: 0,
                    right: 0,
                    support: stats.weight,
                    impurity: stats.impurity,
                });
                used[f] = true;
                let left = self.grow(l, depth + 1, used);
                let right = self.grow(r, depth + 1, used);
                used[f] = false;
                if let TreeNode::Split {
                    left: lslot,
                    right: rslot,
                    ..
                } = &mut self.nodes[me]
                {
                    *lslot = left;
                    *rslot = right;
                }
                me
            }
            _ => self.leaf(idx, stats),
        }
    }
}

/// Greedy top-down multi-output regression tree with at most `depth_bound`
/// levels of splits. `classes` labels the output columns.
pub fn fit_tree(
    points: &[InterpretablePoint],
    targets: &[Vec<f64>],
    weights: &[f64],
    depth_bound: usize,
) -> Result<SurrogateTree> {
    let (d, m) = check_training_set(points, targets, weights)?;
    let mut grower = Grower {
        points,
        targets,
        weights,
        m,
        total_weight: weights.iter().sum(),
        depth_bound,
        nodes: Vec::new(),
    };
    let mut used = vec![false; d];
    grower.grow((0..points.len()).collect(), 0, &mut used);
    Ok(SurrogateTree {
        d,
        classes: (0..m).collect(),
        nodes: grower.nodes,
        meta: TreeMeta {
            depth_bound,
            epsilon: None,
            achieved_fidelity: None,
            variant: Variant::Greedy,
        },
    })
}

/// Builds a tree that splits feature `i` at depth `i` on every path, giving
/// one leaf per point of `{0,1}^d`. `leaf_value` supplies each leaf's
/// prediction verbatim; node statistics come from `targets`/`weights`,
/// which are indexed by point index.
pub(crate) fn grow_complete(
    d: usize,
    targets: &[Vec<f64>],
    weights: &[f64],
) -> Result<Vec<TreeNode>> {
    if targets.len() != 1 << d || weights.len() != 1 << d {
        return Err(Error::invalid("complete tree needs one target row per point"));
    }
    let m = targets[0].len();
    fn go(
        d: usize,
        depth: usize,
        prefix: u64,
        targets: &[Vec<f64>],
        weights: &[f64],
        m: usize,
        nodes: &mut Vec<TreeNode>,
    ) -> usize {
        // points whose top `depth` bits equal `prefix`
        let span = 1u64 << (d - depth);
        let idx: Vec<usize> = (prefix * span..(prefix + 1) * span).map(|i| i as usize).collect();
        let stats = node_stats(&idx, targets, weights, m);
        if depth == d {
            nodes.push(TreeNode::Leaf {
                leaf: Leaf {
                    prediction: targets[idx[0]].clone(),
                    support: stats.weight,
                    impurity: 0.0,
                    original_prediction: None,
                    samples: Some(idx),
                },
            });
            return nodes.len() - 1;
        }
        let me = nodes.len();
        nodes.push(TreeNode::Split {
            feature: depth,
            left: 0,
            right: 0,
            support: stats.weight,
            impurity: stats.impurity,
        });
        let left = go(d, depth + 1, prefix << 1, targets, weights, m, nodes);
        let right = go(d, depth + 1, (prefix << 1) | 1, targets, weights, m, nodes);
        if let TreeNode::Split {
            left: l, right: r, ..
        } = &mut nodes[me]
        {
            *l = left;
            *r = right;
        }
        me
    }
    let mut nodes = Vec::with_capacity((1 << (d + 1)) - 1);
    go(d, 0, 0, targets, weights, m, &mut nodes);
    Ok(nodes)
}

fn check_lengths(a: usize, b: usize, c: usize) -> Result<()> {
    if a != b || a != c {
        return Err(Error::invalid(format!(
            "length mismatch: {a} black-box values, {b} surrogate values, {c} weights"
        )));
    }
    Ok(())
}

/// Weighted sum of squared residuals for one class (unnormalised).
pub fn loss_lime(f_targets: &[f64], g_preds: &[f64], weights: &[f64]) -> Result<f64> {
    check_lengths(f_targets.len(), g_preds.len(), weights.len())?;
    Ok(f_targets
        .iter()
        .zip(g_preds)
        .zip(weights)
        .map(|((f, g), w)| w * (f - g) * (f - g))
        .sum())
}

/// Weighted count of label disagreements.
pub fn loss_classification(f_labels: &[usize], g_labels: &[usize], weights: &[f64]) -> Result<f64> {
    check_lengths(f_labels.len(), g_labels.len(), weights.len())?;
    Ok(f_labels
        .iter()
        .zip(g_labels)
        .zip(weights)
        .filter(|((f, g), _)| f != g)
        .map(|(_, w)| w)
        .sum())
}

/// Weight-normalised multi-output loss with the per-point class sum halved,
/// so it lies in `[0, 1]` for probability rows.
pub fn loss_limetree(f_rows: &[Vec<f64>], g_rows: &[Vec<f64>], weights: &[f64]) -> Result<f64> {
    loss_limetree_scaled(f_rows, g_rows, weights, 0.5)
}

/// [`loss_limetree`] with an explicit factor on the per-point class sum; the
/// single-class reading uses a factor of 1.
pub fn loss_limetree_scaled(
    f_rows: &[Vec<f64>],
    g_rows: &[Vec<f64>],
    weights: &[f64],
    factor: f64,
) -> Result<f64> {
    check_lengths(f_rows.len(), g_rows.len(), weights.len())?;
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("loss needs a positive total weight"));
    }
    let mut acc = 0.0;
    for ((f, g), w) in f_rows.iter().zip(g_rows).zip(weights) {
        if f.len() != g.len() {
            return Err(Error::invalid("row lengths differ"));
        }
        let sq: f64 = f.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum();
        acc += w * factor * sq;
    }
    Ok(acc / total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComplexityForm {
    Depth,
    Width,
}

/// `depth / d` or `width / 2^d`.
pub fn complexity(tree: &SurrogateTree, form: ComplexityForm) -> f64 {
    match form {
        ComplexityForm::Depth => tree.depth() as f64 / tree.d as f64,
        ComplexityForm::Width => tree.width() as f64 / 2f64.powi(tree.d as i32),
    }
}

/// A weighted sample together with the black box's probability rows for it.
#[derive(Clone, Debug)]
pub struct LabelledSample {
    pub sample: WeightedSample,
    /// Full probability rows over every black-box class.
    pub probabilities: ProbabilityMatrix,
}

impl LabelledSample {
    /// Decodes every sample point and queries the black box once per point.
    pub fn query(
        bb: &BlackBoxBinding,
        domain: &InterpretableDomain,
        sample: WeightedSample,
    ) -> Result<Self> {
        if sample.d() != domain.d() {
            return Err(Error::invalid("sample and domain dimensions differ"));
        }
        let probabilities = bb.predict_points(domain, &sample.points, DEFAULT_BATCH)?;
        Ok(Self {
            sample,
            probabilities,
        })
    }

    /// Probability columns for `classes`.
    pub fn targets(&self, classes: &[usize]) -> Result<Vec<Vec<f64>>> {
        select_columns(&self.probabilities, classes)
    }
}

pub(crate) fn select_columns(rows: &[Vec<f64>], classes: &[usize]) -> Result<Vec<Vec<f64>>> {
    if classes.is_empty() {
        return Err(Error::invalid("at least one class must be explained"));
    }
    rows.iter()
        .map(|row| {
            classes
                .iter()
                .map(|&c| {
                    row.get(c)
                        .copied()
                        .ok_or_else(|| Error::invalid(format!("class {c} out of range")))
                })
                .collect()
        })
        .collect()
}

/// Indices of the `n` most probable classes, most probable first (ties go to
/// the lower index).
pub fn top_classes(row: &[f64], n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..row.len()).collect();
    idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
    idx.truncate(n);
    idx
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthLoss {
    pub depth_bound: usize,
    pub depth: usize,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub variant: Variant,
    pub depth_losses: Vec<DepthLoss>,
    pub final_loss: f64,
    pub fidelity: f64,
    pub complexity_depth: f64,
    pub complexity_width: f64,
    pub epsilon: Option<f64>,
    pub epsilon_met: bool,
    /// How the fidelity target was read when deciding to stop.
    pub stop_rule: String,
    /// Set when an exact-fidelity guarantee was verified.
    #[serde(default)]
    pub certified: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub const STOP_RULE: &str = "stop at the first depth bound where 1 - loss >= epsilon";

/// Fits trees with depth bounds `1..=depth_cap` on the labelled sample and
/// keeps the first whose fidelity `1 - loss` reaches `epsilon` (or the last
/// one tried).
pub fn fit_limetree_labelled(
    labelled: &LabelledSample,
    classes: &[usize],
    epsilon: f64,
    depth_cap: usize,
) -> Result<(SurrogateTree, FitReport)> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let d = labelled.sample.d();
    if depth_cap > d {
        return Err(Error::invalid(format!("depth cap {depth_cap} exceeds d = {d}")));
    }
    let targets = labelled.targets(classes)?;
    let weights = &labelled.sample.weights;
    let points = &labelled.sample.points;

    let mut trace = Vec::new();
    let mut last = None;
    for bound in 1.max(usize::from(depth_cap == 0))..=depth_cap.max(1) {
        let bound = bound.min(depth_cap);
        let mut tree = fit_tree(points, &targets, weights, bound)?;
        let preds = tree.predict_many(points)?;
        let loss = loss_limetree(&targets, &preds, weights)?;
        trace.push(DepthLoss {
            depth_bound: bound,
            depth: tree.depth(),
            loss,
        });
        tree.classes = classes.to_vec();
        let met = 1.0 - loss >= epsilon;
        last = Some((tree, loss, met));
        if met {
            break;
        }
    }
    let (mut tree, loss, met) = last.expect("at least one depth tried");
    tree.meta = TreeMeta {
        depth_bound: trace.last().map_or(0, |t| t.depth_bound),
        epsilon: Some(epsilon),
        achieved_fidelity: Some(1.0 - loss),
        variant: Variant::Limet,
    };
    let report = FitReport {
        variant: Variant::Limet,
        depth_losses: trace,
        final_loss: loss,
        fidelity: 1.0 - loss,
        complexity_depth: complexity(&tree, ComplexityForm::Depth),
        complexity_width: complexity(&tree, ComplexityForm::Width),
        epsilon: Some(epsilon),
        epsilon_met: met,
        stop_rule: STOP_RULE.to_owned(),
        certified: None,
        warnings: Vec::new(),
    };
    Ok((tree, report))
}

/// Queries the black box on `sample` and runs [`fit_limetree_labelled`].
pub fn fit_limetree(
    bb: &BlackBoxBinding,
    domain: &InterpretableDomain,
    sample: &WeightedSample,
    classes: &[usize],
    epsilon: f64,
    depth_cap: usize,
) -> Result<(SurrogateTree, FitReport)> {
    let labelled = LabelledSample::query(bb, domain, sample.clone())?;
    fit_limetree_labelled(&labelled, classes, epsilon, depth_cap)
}
