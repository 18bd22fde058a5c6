//! Relabeled leaves agree with the black box at their minimal points; the
//! complete tree agrees everywhere.
//!
//! cargo run --example fidelity_guarantees

use limetree::blackbox::{make_synthetic, SyntheticKind, SyntheticSpec};
use limetree::domain::InterpretableDomain;
use limetree::fidelity::{fit_complete, minimal_set, relabel_leaves, verify_fidelity, FidelityScope};
use limetree::sampling::{WeightedSample, DEFAULT_KERNEL_WIDTH};
use limetree::tree::fit_limetree;
use limetree::Result;

fn main() -> Result<()> {
    let domain = InterpretableDomain::text("a b c d e f")?;
    let spec = SyntheticSpec {
        kind: SyntheticKind::BooleanTable,
        d: 6,
        class_count: 3,
        seed: 11,
    };
    let bb = make_synthetic(&spec, &domain)?;
    let classes = [0, 1, 2];
    let sample = WeightedSample::around_anchor(6, 4096, DEFAULT_KERNEL_WIDTH, 0)?;
    let (tree, _) = fit_limetree(&bb, &domain, &sample, &classes, 0.9, 3)?;

    let before = verify_fidelity(&tree, &bb, &domain, FidelityScope::MinimalSet)?;
    let relabeled = relabel_leaves(&tree, &bb, &domain)?;
    let after = verify_fidelity(&relabeled, &bb, &domain, FidelityScope::MinimalSet)?;
    println!("minimal points: {:?}", minimal_set(&relabeled)?.values().map(|p| p.to_string()).collect::<Vec<_>>());
    println!("greedy:    max deviation {:.4}, certified {}", before.max_abs_deviation, before.certified);
    println!("relabeled: max deviation {:.4}, certified {}", after.max_abs_deviation, after.certified);

    let complete = fit_complete(&bb, &domain, &classes)?;
    let full = verify_fidelity(&complete, &bb, &domain, FidelityScope::FullEnumeration)?;
    println!("complete:  {} leaves, max deviation {}, certified {}", complete.width(), full.max_abs_deviation, full.certified);
    Ok(())
}
