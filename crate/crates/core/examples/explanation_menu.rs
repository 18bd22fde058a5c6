//! Every explanation type over one fitted tree: importance, rule, exemplars,
//! what-if, shortest explanation and the annotated tree.
//!
//! cargo run --example explanation_menu

use limetree::blackbox::{make_synthetic, SyntheticKind, SyntheticSpec};
use limetree::domain::InterpretableDomain;
use limetree::explain::{
    exemplars, extract_rule, feature_importance, render_tree, shortest_explanation, what_if,
    ClassFilter, Oracle, DEFAULT_CANDIDATE_CAP,
};
use limetree::sampling::{WeightedSample, DEFAULT_KERNEL_WIDTH};
use limetree::tree::fit_limetree;
use limetree::{InterpretablePoint, Result};

fn main() -> Result<()> {
    let domain = InterpretableDomain::text("red round shiny small sweet")?;
    let d = domain.d();
    let spec = SyntheticSpec {
        kind: SyntheticKind::SegmentLogit,
        d,
        class_count: 3,
        seed: 21,
    };
    let bb = make_synthetic(&spec, &domain)?;
    let sample = WeightedSample::around_anchor(d, 4096, DEFAULT_KERNEL_WIDTH, 0)?;
    let (tree, _) = fit_limetree(&bb, &domain, &sample, &[0, 1, 2], 0.97, d)?;
    let anchor = InterpretablePoint::ones(d);
    let leaf = tree.leaf_of(&anchor)?;

    println!("importance {:.3?}", feature_importance(&tree).values);
    println!("rule       {}", extract_rule(&tree, leaf)?.to_text());
    let ex = exemplars(&tree, leaf, 1, ClassFilter::Different, DEFAULT_CANDIDATE_CAP)?;
    println!("exemplars  {} in leaf, {} nearby leaves", ex.anchor_points.len(), ex.nearby.len());
    let probe: InterpretablePoint = "10110".parse()?;
    for oracle in [Oracle::Tree, Oracle::BlackBox] {
        let w = what_if(&probe, oracle, &tree, &bb, &domain)?;
        println!("what-if    {probe} via {oracle:?}: {:.3?}", w.probabilities);
    }
    for class in tree.classes.clone() {
        let s = shortest_explanation(class, &tree, &domain, &bb, Oracle::BlackBox, DEFAULT_CANDIDATE_CAP)?;
        println!("shortest   class {class}: {:?} features, {} points", s.length, s.points.len());
    }
    let rendered = render_tree(&tree, &domain)?;
    println!("tree       {} nodes, depth {}", rendered.nodes.len(), rendered.depth);
    Ok(())
}
