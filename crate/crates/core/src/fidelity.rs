//! Minimal points of leaves, leaf relabeling, complete trees and exact
//! fidelity checks.
//!
//! The minimal point of a leaf keeps every feature present except those the
//! path requires to be occluded. Relabeling a leaf with the black-box output
//! at its minimal point makes the tree agree exactly with the black box on
//! those points; a complete tree agrees with it everywhere.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::blackbox::{BlackBoxBinding, DEFAULT_BATCH};
use crate::domain::InterpretableDomain;
use crate::error::{Error, Result};
use crate::point::InterpretablePoint;
use crate::sampling::{
    check_enumerable, cosine_distance, enumerate_domain, exponential_kernel,
    DEFAULT_ENUMERATION_CAP,
};
use crate::tree::{
    complexity, grow_complete, loss_limetree, select_columns, ComplexityForm, DepthLoss,
    FitReport, SurrogateTree, TreeMeta, TreeNode, Variant, STOP_RULE,
};

/// Minimal point of each leaf, keyed by leaf node id.
pub type MinimalSet = BTreeMap<usize, InterpretablePoint>;

/// Bit `i` is 0 exactly when the path to `leaf` requires feature `i` to be 0.
pub fn minimal_point(tree: &SurrogateTree, leaf: usize) -> Result<InterpretablePoint> {
    let path = tree.path_to(leaf)?;
    let mut point = InterpretablePoint::ones(tree.d);
    for cond in path.iter().filter(|c| !c.value) {
        point.set(cond.feature, false);
    }
    debug_assert_eq!(tree.leaf_of(&point).ok(), Some(leaf));
    if tree.leaf_of(&point)? != leaf {
        return Err(Error::invalid(format!(
            "minimal point of leaf {leaf} does not route back to it"
        )));
    }
    Ok(point)
}

pub fn minimal_set(tree: &SurrogateTree) -> Result<MinimalSet> {
    tree.leaves()
        .into_iter()
        .map(|leaf| Ok((leaf, minimal_point(tree, leaf)?)))
        .collect()
}

fn check_binding(tree: &SurrogateTree, bb: &BlackBoxBinding, domain: &InterpretableDomain) -> Result<()> {
    if tree.d != domain.d() {
        return Err(Error::invalid(format!(
            "tree has d = {} but the domain has d = {}",
            tree.d,
            domain.d()
        )));
    }
    if let Some(&c) = tree.classes.iter().find(|&&c| c >= bb.class_count()) {
        return Err(Error::invalid(format!(
            "class {c} is out of range for a {}-class black box",
            bb.class_count()
        )));
    }
    Ok(())
}

/// Warning attached to results whose guarantee needs an injective
/// representation.
pub fn injectivity_warning(domain: &InterpretableDomain) -> Option<String> {
    if domain.is_injective() {
        None
    } else {
        Some(format!(
            "features {:?} do not map to distinct instances; the exact-fidelity guarantee is degraded",
            domain.non_injective_features()
        ))
    }
}

/// Replaces every leaf prediction with the black-box probabilities (over the
/// tree's classes) at the leaf's minimal point. The previous prediction is
/// kept in `original_prediction`.
pub fn relabel_leaves(
    tree: &SurrogateTree,
    bb: &BlackBoxBinding,
    domain: &InterpretableDomain,
) -> Result<SurrogateTree> {
    check_binding(tree, bb, domain)?;
    let set = minimal_set(tree)?;
    let (leaves, points): (Vec<usize>, Vec<InterpretablePoint>) = set.into_iter().unzip();
    let rows = bb.predict_points(domain, &points, DEFAULT_BATCH)?;
    let values = select_columns(&rows, &tree.classes)?;
    let mut out = tree.clone();
    for (leaf, value) in leaves.into_iter().zip(values) {
        if let TreeNode::Leaf { leaf } = &mut out.nodes[leaf] {
            let previous = std::mem::replace(&mut leaf.prediction, value);
            leaf.original_prediction.get_or_insert(previous);
        }
    }
    out.meta.variant = Variant::LimetRelabeled;
    Ok(out)
}

/// Complete tree from probability rows indexed by point index (ascending
/// enumeration order). Node statistics weight every point equally, so each
/// leaf has support 1.
pub fn complete_from_rows(d: usize, rows: &[Vec<f64>], classes: &[usize]) -> Result<SurrogateTree> {
    check_enumerable(d, DEFAULT_ENUMERATION_CAP)?;
    if d == 0 {
        return Err(Error::invalid("d must be at least 1"));
    }
    let points = enumerate_domain(d)?;
    if rows.len() != points.len() {
        return Err(Error::invalid(format!(
            "expected {} probability rows, got {}",
            points.len(),
            rows.len()
        )));
    }
    let targets = select_columns(rows, classes)?;
    let nodes = grow_complete(d, &targets, &vec![1.0; points.len()])?;
    Ok(SurrogateTree {
        d,
        classes: classes.to_vec(),
        nodes,
        meta: TreeMeta {
            depth_bound: d,
            epsilon: None,
            achieved_fidelity: Some(1.0),
            variant: Variant::LimetComplete,
        },
    })
}

/// Queries the black box on every point of the domain and builds the tree
/// that splits feature `i` at depth `i`, one leaf per point.
pub fn fit_complete(
    bb: &BlackBoxBinding,
    domain: &InterpretableDomain,
    classes: &[usize],
) -> Result<SurrogateTree> {
    let d = domain.d();
    check_enumerable(d, DEFAULT_ENUMERATION_CAP)?;
    let points = enumerate_domain(d)?;
    let rows = bb.predict_points(domain, &points, DEFAULT_BATCH)?;
    let tree = complete_from_rows(d, &rows, classes)?;
    check_binding(&tree, bb, domain)?;
    Ok(tree)
}

/// Report for a complete tree: zero loss over the enumeration by construction,
/// confirmed against the rows it was built from.
pub fn complete_report(tree: &SurrogateTree, rows: &[Vec<f64>], kernel_width: f64) -> Result<FitReport> {
    let points = enumerate_domain(tree.d)?;
    let reference = InterpretablePoint::ones(tree.d);
    let weights = points
        .iter()
        .map(|p| exponential_kernel(cosine_distance(&reference, p)?, kernel_width))
        .collect::<Result<Vec<_>>>()?;
    let targets = select_columns(rows, &tree.classes)?;
    let preds = tree.predict_many(&points)?;
    let loss = loss_limetree(&targets, &preds, &weights)?;
    Ok(FitReport {
        variant: Variant::LimetComplete,
        depth_losses: vec![DepthLoss {
            depth_bound: tree.d,
            depth: tree.depth(),
            loss,
        }],
        final_loss: loss,
        fidelity: 1.0 - loss,
        complexity_depth: complexity(tree, ComplexityForm::Depth),
        complexity_width: complexity(tree, ComplexityForm::Width),
        epsilon: None,
        epsilon_met: true,
        stop_rule: STOP_RULE.to_owned(),
        certified: Some(targets == preds),
        warnings: Vec::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FidelityScope {
    MinimalSet,
    FullEnumeration,
}

impl std::str::FromStr for FidelityScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minimal-set" => Ok(Self::MinimalSet),
            "full-enumeration" => Ok(Self::FullEnumeration),
            other => Err(Error::invalid(format!("unknown fidelity scope {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeafDeviation {
    pub leaf: usize,
    pub minimal_point: InterpretablePoint,
    /// Largest deviation over the scope's points routed to this leaf.
    pub max_abs_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub scope: FidelityScope,
    pub max_abs_deviation: f64,
    /// Every compared value was bitwise equal.
    pub certified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_leaf: Option<Vec<LeafDeviation>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Compares tree predictions with black-box probabilities over the minimal
/// set or the whole domain.
pub fn verify_fidelity(
    tree: &SurrogateTree,
    bb: &BlackBoxBinding,
    domain: &InterpretableDomain,
    scope: FidelityScope,
) -> Result<FidelityReport> {
    check_binding(tree, bb, domain)?;
    let set = minimal_set(tree)?;
    let points: Vec<InterpretablePoint> = match scope {
        FidelityScope::MinimalSet => set.values().cloned().collect(),
        FidelityScope::FullEnumeration => {
            check_enumerable(tree.d, DEFAULT_ENUMERATION_CAP)?;
            enumerate_domain(tree.d)?
        }
    };
    let rows = bb.predict_points(domain, &points, DEFAULT_BATCH)?;
    let targets = select_columns(&rows, &tree.classes)?;

    let mut per_leaf: BTreeMap<usize, f64> = set.keys().map(|&l| (l, 0.0)).collect();
    let mut max_dev = 0.0f64;
    let mut certified = true;
    for (point, target) in points.iter().zip(&targets) {
        let leaf = tree.leaf_of(point)?;
        let pred = &tree.leaf(leaf)?.prediction;
        certified &= pred == target;
        let dev = pred
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        max_dev = max_dev.max(dev);
        let slot = per_leaf.get_mut(&leaf).expect("leaf in minimal set");
        *slot = slot.max(dev);
    }
    let per_leaf = per_leaf
        .into_iter()
        .map(|(leaf, dev)| LeafDeviation {
            leaf,
            minimal_point: set[&leaf].clone(),
            max_abs_deviation: dev,
        })
        .collect();
    Ok(FidelityReport {
        scope,
        max_abs_deviation: max_dev,
        certified,
        per_leaf: Some(per_leaf),
        warnings: injectivity_warning(domain).into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::SyntheticModel;
    use crate::tree::fit_tree;

    fn p(s: &str) -> InterpretablePoint {
        s.parse().unwrap()
    }

    fn text_domain(d: usize) -> InterpretableDomain {
        let words: Vec<String> = (0..d).map(|i| format!("w{i}")).collect();
        InterpretableDomain::text(&words.join(" ")).unwrap()
    }

    /// Two-class box where class 1 has probability `and(x0, x1)` style values.
    fn and_binding() -> (InterpretableDomain, BlackBoxBinding) {
        let domain = text_domain(2);
        let model = SyntheticModel::from_fn(2, |x| {
            let p1 = match (x.get(0), x.get(1)) {
                (true, true) => 0.9,
                (false, true) => 0.2,
                (true, false) => 0.3,
                (false, false) => 0.1,
            };
            vec![1.0 - p1, p1]
        })
        .unwrap();
        let bb = BlackBoxBinding::synthetic(model, &domain).unwrap();
        (domain, bb)
    }

    fn and_tree() -> SurrogateTree {
        let pts = enumerate_domain(2).unwrap();
        let y = vec![vec![0.0], vec![0.0], vec![0.0], vec![1.0]];
        fit_tree(&pts, &y, &[1.0; 4], 2).unwrap()
    }

    fn leaf_by_path(tree: &SurrogateTree, point: &str) -> usize {
        tree.leaf_of(&p(point)).unwrap()
    }

    #[test]
    fn minimal_points_follow_left_turns() {
        let t = and_tree();
        let set = minimal_set(&t).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set[&leaf_by_path(&t, "00")], p("01"));
        assert_eq!(set[&leaf_by_path(&t, "10")], p("10"));
        assert_eq!(set[&leaf_by_path(&t, "11")], p("11"));
        assert!(minimal_point(&t, 0).is_err());
    }

    #[test]
    fn minimal_point_examples_on_d4() {
        let pts = enumerate_domain(4).unwrap();
        // target depends only on x2 so the root splits x2
        let y: Vec<Vec<f64>> = pts.iter().map(|q| vec![f64::from(u8::from(q.get(2)))]).collect();
        let t = fit_tree(&pts, &y, &[1.0; 16], 1).unwrap();
        assert_eq!(minimal_point(&t, leaf_by_path(&t, "0000")).unwrap(), p("1101"));

        let stump = fit_tree(&pts, &vec![vec![0.5]; 16], &[1.0; 16], 3).unwrap();
        assert_eq!(minimal_set(&stump).unwrap()[&0], p("1111"));

        // x0 >= 0.5 then x3 < 0.5
        let y: Vec<Vec<f64>> = pts
            .iter()
            .map(|q| vec![if q.get(0) { if q.get(3) { 1.0 } else { 0.5 } } else { 0.0 }])
            .collect();
        let t = fit_tree(&pts, &y, &[1.0; 16], 2).unwrap();
        assert_eq!(minimal_point(&t, leaf_by_path(&t, "1000")).unwrap(), p("1110"));
    }

    #[test]
    fn relabel_uses_minimal_point_values() {
        let (domain, bb) = and_binding();
        let pts = enumerate_domain(2).unwrap();
        let rows = bb.predict_points(&domain, &pts, 64).unwrap();
        let y = select_columns(&rows, &[1]).unwrap();
        let mut t = fit_tree(&pts, &y, &[1.0; 4], 1).unwrap();
        t.classes = vec![1];
        let left = leaf_by_path(&t, "00");
        let before = t.leaf(left).unwrap().prediction.clone();
        let r = relabel_leaves(&t, &bb, &domain).unwrap();
        assert_eq!(r.structure(), t.structure());
        assert_eq!(r.meta.variant, Variant::LimetRelabeled);
        let leaf = r.leaf(left).unwrap();
        assert!(matches!(r.nodes[0], TreeNode::Split { feature: 0, .. }));
        assert_eq!(leaf.prediction, vec![0.2]);
        assert_eq!(leaf.original_prediction.as_deref(), Some(&before[..]));
        assert_ne!(before, vec![0.2]);
        let rep = verify_fidelity(&r, &bb, &domain, FidelityScope::MinimalSet).unwrap();
        assert!(rep.certified);
        assert_eq!(rep.max_abs_deviation, 0.0);
    }

    #[test]
    fn relabel_stump_predicts_anchor() {
        let (domain, bb) = and_binding();
        let pts = enumerate_domain(2).unwrap();
        let mut t = fit_tree(&pts, &vec![vec![0.5, 0.5]; 4], &[1.0; 4], 0).unwrap();
        t.classes = vec![0, 1];
        let r = relabel_leaves(&t, &bb, &domain).unwrap();
        let anchor = bb.predict_points(&domain, &[p("11")], 1).unwrap();
        assert_eq!(r.leaf(0).unwrap().prediction, anchor[0]);
    }

    #[test]
    fn complete_tree_is_exact() {
        let (domain, bb) = and_binding();
        let t = fit_complete(&bb, &domain, &[0, 1]).unwrap();
        assert_eq!(t.width(), 4);
        assert_eq!(t.depth(), 2);
        assert_eq!(t.nodes.len(), 7);
        let set = minimal_set(&t).unwrap();
        let mut pts: Vec<_> = set.values().cloned().collect();
        pts.sort();
        assert_eq!(pts, enumerate_domain(2).unwrap());
        let rep = verify_fidelity(&t, &bb, &domain, FidelityScope::FullEnumeration).unwrap();
        assert!(rep.certified);
        assert_eq!(rep.max_abs_deviation, 0.0);
        let relabeled = relabel_leaves(&t, &bb, &domain).unwrap();
        for leaf in t.leaves() {
            assert_eq!(relabeled.leaf(leaf).unwrap().prediction, t.leaf(leaf).unwrap().prediction);
        }
    }

    #[test]
    fn greedy_and_tree_has_residual() {
        let (domain, bb) = and_binding();
        let pts = enumerate_domain(2).unwrap();
        let rows = bb.predict_points(&domain, &pts, 64).unwrap();
        let y = select_columns(&rows, &[1]).unwrap();
        let mut t = fit_tree(&pts, &y, &[1.0; 4], 1).unwrap();
        t.classes = vec![1];
        let rep = verify_fidelity(&t, &bb, &domain, FidelityScope::FullEnumeration).unwrap();
        assert!(!rep.certified);
        // expected residual: largest |value - mean of its half|
        let root_feature = match t.nodes[0] {
            TreeNode::Split { feature, .. } => feature,
            _ => panic!("expected a split"),
        };
        let mut expected = 0.0f64;
        for side in [false, true] {
            let members: Vec<f64> = pts
                .iter()
                .zip(&y)
                .filter(|(q, _)| q.get(root_feature) == side)
                .map(|(_, v)| v[0])
                .collect();
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            for v in members {
                expected = expected.max((v - mean).abs());
            }
        }
        assert!((rep.max_abs_deviation - expected).abs() < 1e-12);
    }

    #[test]
    fn complete_tree_capacity() {
        let domain = text_domain(21);
        let model = SyntheticModel::from_fn(21, |_| vec![0.5, 0.5]).unwrap_err();
        // tables over 20 features are refused before the tree is reached
        assert!(matches!(model, Error::Capacity { .. } | Error::InvalidArgument(_)));
        let rows = vec![vec![1.0]; 2];
        assert!(matches!(
            complete_from_rows(21, &rows, &[0]),
            Err(Error::Capacity { .. })
        ));
        drop(domain);
    }
}
