//! The weighted ridge baseline next to a tree surrogate on the same sample.
//!
//! cargo run --example lime_baseline

use limetree::blackbox::{make_synthetic, SyntheticKind, SyntheticSpec};
use limetree::domain::InterpretableDomain;
use limetree::lime::{lime_explain_labelled, DEFAULT_ALPHA};
use limetree::sampling::{WeightedSample, DEFAULT_KERNEL_WIDTH};
use limetree::tree::{fit_limetree_labelled, loss_limetree, LabelledSample};
use limetree::Result;

fn main() -> Result<()> {
    let domain = InterpretableDomain::text("w0 w1 w2 w3 w4 w5 w6 w7")?;
    let spec = SyntheticSpec {
        kind: SyntheticKind::SegmentLogit,
        d: 8,
        class_count: 5,
        seed: 1,
    };
    let bb = make_synthetic(&spec, &domain)?;
    let sample = WeightedSample::around_anchor(8, 4096, DEFAULT_KERNEL_WIDTH, 0)?;
    let labelled = LabelledSample::query(&bb, &domain, sample)?;
    let classes = [0, 1, 2];
    let targets = labelled.targets(&classes)?;
    let (points, weights) = (&labelled.sample.points, &labelled.sample.weights);

    let lime = lime_explain_labelled(&labelled, &classes, DEFAULT_ALPHA)?;
    for s in &lime.surrogates {
        println!("class {}: intercept {:.3}, top features {:?}", s.class, s.intercept, &s.ranking()[..3]);
    }
    let lime_loss = loss_limetree(&targets, &lime.predict_clipped(points)?, weights)?;
    let (tree, report) = fit_limetree_labelled(&labelled, &classes, 0.95, 8)?;
    println!("ridge loss {lime_loss:.4}, tree loss {:.4} at depth {}", report.final_loss, tree.depth());
    Ok(())
}
