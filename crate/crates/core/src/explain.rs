//! Explanations read off a fitted surrogate: feature importance, rules,
//! exemplars, what-if answers, constrained counterfactuals, shortest
//! explanations and the annotated tree structure.
//!
//! Class predicates are evaluated over the tree's explained classes only;
//! `argmax` means the most probable of those classes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::blackbox::{BlackBoxBinding, DEFAULT_BATCH};
use crate::domain::InterpretableDomain;
use crate::error::{Error, Result};
use crate::fidelity::minimal_set;
use crate::point::InterpretablePoint;
use crate::sampling::DEFAULT_SAMPLE_BUDGET;
use crate::tree::{select_columns, SurrogateTree, TreeNode, Variant, MIN_GAIN};

/// Largest number of points enumerated when searching for answers.
pub const DEFAULT_CANDIDATE_CAP: usize = DEFAULT_SAMPLE_BUDGET;

/// Which model answers a question.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Oracle {
    Tree,
    BlackBox,
}

impl std::str::FromStr for Oracle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" => Ok(Self::Tree),
            "black-box" => Ok(Self::BlackBox),
            other => Err(Error::invalid(format!("unknown oracle {other:?}"))),
        }
    }
}

/// Complete trees answer for themselves; anything else defers to the black
/// box.
pub fn default_oracle(tree: &SurrogateTree) -> Oracle {
    if tree.meta.variant == Variant::LimetComplete {
        Oracle::Tree
    } else {
        Oracle::BlackBox
    }
}

fn enumeration_fits(d: usize, cap: usize) -> bool {
    d < 64 && (1u64 << d) <= cap as u64
}

fn enumerate(d: usize) -> Vec<InterpretablePoint> {
    (0..1u64 << d)
        .map(|i| InterpretablePoint::from_index(i, d))
        .collect()
}

/// Probability rows over the tree's classes for `points`.
pub fn oracle_rows(
    points: &[InterpretablePoint],
    oracle: Oracle,
    tree: &SurrogateTree,
    bb: &BlackBoxBinding,
    domain: &InterpretableDomain,
) -> Result<Vec<Vec<f64>>> {
    if points.is_empty() {
        return Ok(Vec::new());
    }
    match oracle {
        Oracle::Tree => tree.predict_many(points),
        Oracle::BlackBox => {
            if domain.d() != tree.d {
                return Err(Error::invalid("domain and tree dimensions differ"));
            }
            let rows = bb.predict_points(domain, points, DEFAULT_BATCH)?;
            select_columns(&rows, &tree.classes)
        }
    }
}

/// Class id with the largest value in `row` (earliest in `classes` on ties).
pub fn argmax_class(row: &[f64], classes: &[usize]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    classes[best]
}

fn output_index(tree: &SurrogateTree, class: usize) -> Result<usize> {
    tree.classes
        .iter()
        .position(|&c| c == class)
        .ok_or_else(|| {
            Error::invalid(format!(
                "class {class} is not among the explained classes {:?}",
                tree.classes
            ))
        })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    /// Normalised to sum 1, or all zero when the tree has no split.
    pub values: Vec<f64>,
    /// Impurity decrease per feature as a fraction of the root weight.
    pub raw: Vec<f64>,
    pub no_splits: bool,
}

/// Weighted impurity decrease contributed by each feature's splits.
pub fn feature_importance(tree: &SurrogateTree) -> Importance {
    let mut raw = vec![0.0; tree.d];
    let root_weight = tree.root().support();
    let mut splits = 0;
    for node in &tree.nodes {
        if let TreeNode::Split {
            feature,
            left,
            right,
            support,
            impurity,
        } = node
        {
            splits += 1;
            let (l, r) = (&tree.nodes[*left], &tree.nodes[*right]);
            let drop = support * impurity - l.support() * l.impurity() - r.support() * r.impurity();
            let gain = if root_weight > 0.0 { drop / root_weight } else { 0.0 };
            // rounding noise below the split tolerance counts as no decrease
            if gain > MIN_GAIN {
                raw[*feature] += gain;
            }
        }
    }
    let total: f64 = raw.iter().sum();
    let values = if total > 0.0 {
        raw.iter().map(|v| v / total).collect()
    } else {
        vec![0.0; tree.d]
    };
    Importance {
        values,
        raw,
        no_splits: splits == 0,
    }
}

/// Path to render the occluded instance of `point` through the service.
pub fn render_ref(point: &InterpretablePoint) -> String {
    format!("render/{}.png", point.to_bitstring())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Literal {
    pub feature: usize,
    pub value: u8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub leaf: usize,
    /// Conjunction in root-to-leaf order; empty means "always".
    pub literals: Vec<Literal>,
    pub prediction: Vec<f64>,
    pub minimal_point: InterpretablePoint,
    pub visual: String,
}

impl Rule {
    pub fn to_text(&self) -> String {
        if self.literals.is_empty() {
            return "always".to_owned();
        }
        self.literals
            .iter()
            .map(|l| format!("x{} = {}", l.feature, l.value))
            .collect::<Vec<_>>()
            .join(" AND ")
    }
}

pub fn extract_rule(tree: &SurrogateTree, leaf: usize) -> Result<Rule> {
    let literals = tree
        .path_to(leaf)?
        .into_iter()
        .map(|c| Literal {
            feature: c.feature,
            value: u8::from(c.value),
        })
        .collect();
    let minimal_point = crate::fidelity::minimal_point(tree, leaf)?;
    Ok(Rule {
        leaf,
        literals,
        prediction: tree.leaf(leaf)?.prediction.clone(),
        visual: render_ref(&minimal_point),
        minimal_point,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassFilter {
    Same,
    Different,
    #[default]
    Any,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearbyLeaf {
    pub leaf: usize,
    pub minimal_point: InterpretablePoint,
    pub distance: usize,
    pub argmax: usize,
    /// Domain points routed to the leaf; empty in leaf-level mode.
    pub points: Vec<InterpretablePoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exemplars {
    pub anchor_leaf: usize,
    pub anchor_points: Vec<InterpretablePoint>,
    pub radius: usize,
    pub filter: ClassFilter,
    pub nearby: Vec<NearbyLeaf>,
}

/// Leaves other than `anchor_leaf` whose minimal points are within Hamming
/// distance `radius` of the anchor leaf's, without listing member points.
pub fn nearby_leaves(
    tree: &SurrogateTree,
    anchor_leaf: usize,
    radius: usize,
    filter: ClassFilter,
) -> Result<Vec<NearbyLeaf>> {
    let set = minimal_set(tree)?;
    let anchor_point = set
        .get(&anchor_leaf)
        .ok_or_else(|| Error::invalid(format!("node {anchor_leaf} is not a leaf of this tree")))?;
    let anchor_class = argmax_class(&tree.leaf(anchor_leaf)?.prediction, &tree.classes);
    let mut out = Vec::new();
    for (&leaf, point) in &set {
        if leaf == anchor_leaf {
            continue;
        }
        let distance = anchor_point.hamming(point)?;
        if distance > radius {
            continue;
        }
        let argmax = argmax_class(&tree.leaf(leaf)?.prediction, &tree.classes);
        let keep = match filter {
            ClassFilter::Any => true,
            ClassFilter::Same => argmax == anchor_class,
            ClassFilter::Different => argmax != anchor_class,
        };
        if keep {
            out.push(NearbyLeaf {
                leaf,
                minimal_point: point.clone(),
                distance,
                argmax,
                points: Vec::new(),
            });
        }
    }
    out.sort_by(|a, b| {
        a.distance
            .cmp(&b.distance)
            .then_with(|| a.minimal_point.cmp(&b.minimal_point))
    });
    Ok(out)
}

/// Points in the anchor leaf plus nearby leaves with their member points.
pub fn exemplars(
    tree: &SurrogateTree,
    anchor_leaf: usize,
    radius: usize,
    filter: ClassFilter,
    cap: usize,
) -> Result<Exemplars> {
    if !enumeration_fits(tree.d, cap) {
        return Err(Error::Capacity {
            what: "exemplar enumeration",
            needed: 1u128 << tree.d.min(127),
            cap: cap as u128,
        });
    }
    let mut nearby = nearby_leaves(tree, anchor_leaf, radius, filter)?;
    let mut members: BTreeMap<usize, Vec<InterpretablePoint>> = BTreeMap::new();
    for p in enumerate(tree.d) {
        members.entry(tree.leaf_of(&p)?).or_default().push(p);
    }
    for n in &mut nearby {
        n.points = members.remove(&n.leaf).unwrap_or_default();
    }
    Ok(Exemplars {
        anchor_leaf,
        anchor_points: members.remove(&anchor_leaf).unwrap_or_default(),
        radius,
        filter,
        nearby,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub point: InterpretablePoint,
    pub oracle: Oracle,
    pub classes: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub visual: String,
}

pub fn what_if(
    point: &InterpretablePoint,
    oracle: Oracle,
    tree: &SurrogateTree,
    bb: &BlackBoxBinding,
    domain: &InterpretableDomain,
) -> Result<WhatIf> {
    point.check_len(tree.d)?;
    let row = oracle_rows(std::slice::from_ref(point), oracle, tree, bb, domain)?
        .pop()
        .expect("one row per point");
    Ok(WhatIf {
        point: point.clone(),
        oracle,
        classes: tree.classes.clone(),
        probabilities: row,
        visual: render_ref(point),
    })
}

/// Condition a counterfactual must satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Target {
    ArgmaxIs { class: usize },
    ArgmaxIsNot { class: usize },
    ProbAtLeast { class: usize, threshold: f64 },
}

impl Target {
    fn check(&self, tree: &SurrogateTree) -> Result<()> {
        match *self {
            Target::ArgmaxIs { class } | Target::ArgmaxIsNot { class } => {
                output_index(tree, class).map(|_| ())
            }
            Target::ProbAtLeast { class, threshold } => {
                if !(0.0..=1.0).contains(&threshold) {
                    return Err(Error::invalid(format!("threshold {threshold} outside [0, 1]")));
                }
                output_index(tree, class).map(|_| ())
            }
        }
    }

    /// Evaluates the predicate on a row over `classes`.
    pub fn holds(&self, row: &[f64], classes: &[usize]) -> bool {
        match *self {
            Target::ArgmaxIs { class } => argmax_class(row, classes) == class,
            Target::ArgmaxIsNot { class } => argmax_class(row, classes) != class,
            Target::ProbAtLeast { class, threshold } => classes
                .iter()
                .position(|&c| c == class)
                .is_some_and(|i| row[i] >= threshold),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualQuery {
    /// Defaults to all-ones.
    #[serde(default)]
    pub reference: Option<InterpretablePoint>,
    pub target: Target,
    /// Features forced to the given bit (0 or 1).
    #[serde(default, deserialize_with = "feature_map")]
    pub given: BTreeMap<usize, u8>,
    /// Features held at the reference value.
    #[serde(default)]
    pub despite: BTreeSet<usize>,
    /// Defaults to [`default_oracle`].
    #[serde(default)]
    pub oracle: Option<Oracle>,
}

/// JSON object keys arrive as strings, also when buffered inside a tagged
/// enum.
fn feature_map<'de, D: serde::Deserializer<'de>>(de: D) -> std::result::Result<BTreeMap<usize, u8>, D::Error> {
    let raw = BTreeMap::<String, u8>::deserialize(de)?;
    raw.into_iter()
        .map(|(k, v)| {
            k.parse()
                .map(|f| (f, v))
                .map_err(|_| serde::de::Error::custom(format!("feature index {k:?} is not a number")))
        })
        .collect()
}

impl CounterfactualQuery {
    pub fn new(target: Target) -> Self {
        Self {
            reference: None,
            target,
            given: BTreeMap::new(),
            despite: BTreeSet::new(),
            oracle: None,
        }
    }

    pub fn given(mut self, feature: usize, bit: u8) -> Self {
        self.given.insert(feature, bit);
        self
    }

    pub fn despite(mut self, feature: usize) -> Self {
        self.despite.insert(feature);
        self
    }

    pub fn oracle(mut self, oracle: Oracle) -> Self {
        self.oracle = Some(oracle);
        self
    }

    pub fn reference(mut self, point: InterpretablePoint) -> Self {
        self.reference = Some(point);
        self
    }

    /// Validates against `tree` and fills in defaults.
    pub fn resolve(&self, tree: &SurrogateTree) -> Result<CounterfactualQuery> {
        let d = tree.d;
        let reference = self.reference.clone().unwrap_or_else(|| InterpretablePoint::ones(d));
        reference.check_len(d)?;
        self.target.check(tree)?;
        for (&f, &bit) in &self.given {
            if f >= d {
                return Err(Error::invalid(format!("given feature {f} out of range (d = {d})")));
            }
            if bit > 1 {
                return Err(Error::invalid(format!("given bit for feature {f} must be 0 or 1")));
            }
        }
        if let Some(&f) = self.despite.iter().find(|&&f| f >= d) {
            return Err(Error::invalid(format!("despite feature {f} out of range (d = {d})")));
        }
        let overlap: Vec<usize> = self
            .given
            .keys()
            .filter(|f| self.despite.contains(f))
            .copied()
            .collect();
        if !overlap.is_empty() {
            return Err(Error::invalid(format!(
                "features {overlap:?} are both given and despite"
            )));
        }
        Ok(CounterfactualQuery {
            reference: Some(reference),
            target: self.target,
            given: self.given.clone(),
            despite: self.despite.clone(),
            oracle: Some(self.oracle.unwrap_or_else(|| default_oracle(tree))),
        })
    }

    /// Whether `point` meets the given and despite constraints. Call on a
    /// resolved query.
    pub fn admits(&self, point: &InterpretablePoint) -> bool {
        let reference = self.reference.as_ref().expect("resolved query");
        self.given.iter().all(|(&f, &b)| point.get(f) == (b == 1))
            && self.despite.iter().all(|&f| point.get(f) == reference.get(f))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateMode {
    Enumeration,
    MinimalSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterfactual {
    /// `None` when no candidate satisfies the query.
    pub distance: Option<usize>,
    /// Every satisfying candidate at the minimal distance, ascending.
    pub points: Vec<InterpretablePoint>,
    pub oracle: Oracle,
    pub candidates: CandidateMode,
    pub constraints_echo: CounterfactualQuery,
    pub visuals: Vec<String>,
}

impl Counterfactual {
    pub fn is_impossible(&self) -> bool {
        self.points.is_empty()
    }
}

fn candidates(tree: &SurrogateTree, cap: usize) -> Result<(CandidateMode, Vec<InterpretablePoint>)> {
    if enumeration_fits(tree.d, cap) {
        Ok((CandidateMode::Enumeration, enumerate(tree.d)))
    } else {
        let mut pts: Vec<_> = minimal_set(tree)?.into_values().collect();
        pts.sort();
        pts.dedup();
        Ok((CandidateMode::MinimalSet, pts))
    }
}

/// All candidates closest (in Hamming distance) to the reference that meet
/// the constraints and the target under the query's oracle.
pub fn counterfactual(
    query: &CounterfactualQuery,
    tree: &SurrogateTree,
    domain: &InterpretableDomain,
    bb: &BlackBoxBinding,
    cap: usize,
) -> Result<Counterfactual> {
    let query = query.resolve(tree)?;
    let reference = query.reference.clone().expect("resolved");
    let oracle = query.oracle.expect("resolved");
    let (mode, pool) = candidates(tree, cap)?;

    let mut by_distance: BTreeMap<usize, Vec<InterpretablePoint>> = BTreeMap::new();
    for p in pool.into_iter().filter(|p| query.admits(p)) {
        by_distance.entry(reference.hamming(&p)?).or_default().push(p);
    }
    // nearest shell first; stop at the first shell with a hit
    for (distance, shell) in by_distance {
        let rows = oracle_rows(&shell, oracle, tree, bb, domain)?;
        let mut hits: Vec<InterpretablePoint> = shell
            .into_iter()
            .zip(&rows)
            .filter(|(_, row)| query.target.holds(row, &tree.classes))
            .map(|(p, _)| p)
            .collect();
        if !hits.is_empty() {
            hits.sort();
            return Ok(Counterfactual {
                distance: Some(distance),
                visuals: hits.iter().map(render_ref).collect(),
                points: hits,
                oracle,
                candidates: mode,
                constraints_echo: query,
            });
        }
    }
    Ok(Counterfactual {
        distance: None,
        points: Vec::new(),
        oracle,
        candidates: mode,
        constraints_echo: query,
        visuals: Vec::new(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shortest {
    pub class: usize,
    pub oracle: Oracle,
    /// Number of preserved features; `None` when the class is never argmax.
    pub length: Option<usize>,
    pub points: Vec<InterpretablePoint>,
    pub candidates: CandidateMode,
    pub visuals: Vec<String>,
}

/// Candidates predicted as `class` that preserve the fewest features.
pub fn shortest_explanation(
    class: usize,
    tree: &SurrogateTree,
    domain: &InterpretableDomain,
    bb: &BlackBoxBinding,
    oracle: Oracle,
    cap: usize,
) -> Result<Shortest> {
    output_index(tree, class)?;
    let (mode, pool) = candidates(tree, cap)?;
    let mut by_length: BTreeMap<usize, Vec<InterpretablePoint>> = BTreeMap::new();
    for p in pool {
        by_length.entry(p.count_ones()).or_default().push(p);
    }
    for (length, shell) in by_length {
        let rows = oracle_rows(&shell, oracle, tree, bb, domain)?;
        let mut hits: Vec<InterpretablePoint> = shell
            .into_iter()
            .zip(&rows)
            .filter(|(_, row)| argmax_class(row, &tree.classes) == class)
            .map(|(p, _)| p)
            .collect();
        if !hits.is_empty() {
            hits.sort();
            return Ok(Shortest {
                class,
                oracle,
                length: Some(length),
                visuals: hits.iter().map(render_ref).collect(),
                points: hits,
                candidates: mode,
            });
        }
    }
    Ok(Shortest {
        class,
        oracle,
        length: None,
        points: Vec::new(),
        candidates: mode,
        visuals: Vec::new(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum RenderedNode {
    Split {
        id: usize,
        feature: usize,
        left: usize,
        right: usize,
        support: f64,
    },
    Leaf {
        id: usize,
        prediction: Vec<f64>,
        support: f64,
        minimal_point: InterpretablePoint,
        thumbnail: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderedTree {
    pub d: usize,
    pub classes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
    pub variant: Variant,
    pub depth: usize,
    pub nodes: Vec<RenderedNode>,
}

/// Tree annotated with minimal points and thumbnail references for display.
pub fn render_tree(tree: &SurrogateTree, domain: &InterpretableDomain) -> Result<RenderedTree> {
    if tree.d != domain.d() {
        return Err(Error::invalid("domain and tree dimensions differ"));
    }
    let set = minimal_set(tree)?;
    let nodes = tree
        .nodes
        .iter()
        .enumerate()
        .map(|(id, n)| match n {
            TreeNode::Split {
                feature,
                left,
                right,
                support,
                ..
            } => RenderedNode::Split {
                id,
                feature: *feature,
                left: *left,
                right: *right,
                support: *support,
            },
            TreeNode::Leaf { leaf } => RenderedNode::Leaf {
                id,
                prediction: leaf.prediction.clone(),
                support: leaf.support,
                minimal_point: set[&id].clone(),
                thumbnail: render_ref(&set[&id]),
            },
        })
        .collect();
    Ok(RenderedTree {
        d: tree.d,
        classes: tree.classes.clone(),
        class_names: None,
        variant: tree.meta.variant,
        depth: tree.depth(),
        nodes,
    })
}

/// Any explanation, tagged by kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "result", rename_all = "kebab-case")]
pub enum ExplanationResult {
    Importance(Importance),
    Rule(Rule),
    Exemplars(Exemplars),
    WhatIf(WhatIf),
    Counterfactual(Counterfactual),
    Shortest(Shortest),
    Tree(RenderedTree),
}
