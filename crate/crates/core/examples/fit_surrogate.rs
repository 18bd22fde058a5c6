//! Fit a multi-output surrogate tree, growing depth until the fidelity
//! target is met.
//!
//! cargo run --example fit_surrogate

use limetree::blackbox::{make_synthetic, SyntheticKind, SyntheticSpec};
use limetree::domain::InterpretableDomain;
use limetree::sampling::{WeightedSample, DEFAULT_KERNEL_WIDTH};
use limetree::tree::{fit_limetree, top_classes};
use limetree::{InterpretablePoint, Result};

fn main() -> Result<()> {
    let domain = InterpretableDomain::text("the quick brown fox jumps over the lazy dog")?;
    let d = domain.d();
    let spec = SyntheticSpec {
        kind: SyntheticKind::SegmentLogit,
        d,
        class_count: 5,
        seed: 3,
    };
    let bb = make_synthetic(&spec, &domain)?;
    let anchor = bb.predict_points(&domain, &[InterpretablePoint::ones(d)], 1)?.remove(0);
    let classes = top_classes(&anchor, 3);

    let sample = WeightedSample::around_anchor(d, 4096, DEFAULT_KERNEL_WIDTH, 0)?;
    let (tree, report) = fit_limetree(&bb, &domain, &sample, &classes, 0.95, d)?;
    for step in &report.depth_losses {
        println!("{step:?}");
    }
    println!(
        "classes {classes:?}: depth {} / width {}, loss {:.4}, target met: {}",
        tree.depth(),
        tree.width(),
        report.final_loss,
        report.epsilon_met
    );
    let leaf = tree.leaf_of(&InterpretablePoint::ones(d))?;
    for c in tree.path_to(leaf)? {
        println!("  x{} = {}", c.feature, u8::from(c.value));
    }
    Ok(())
}
