//! Small fidelity experiment with a paired sign test between the tree and
//! the ridge baseline.
//!
//! cargo run --release --example fidelity_bench

use limetree::bench::{run_fidelity_experiment, sign_test_less, ExperimentConfig, Method, Metric};
use limetree::blackbox::SyntheticKind;
use limetree::Result;

fn main() -> Result<()> {
    let config = ExperimentConfig::new(SyntheticKind::SegmentLogit, 30, 8, 3, 42);
    let results = run_fidelity_experiment(&config)?;
    print!("{}", results.to_csv());
    let tree = results.series(Method::Limet, Metric::LimetreeLoss, "top-3");
    let ridge = results.series(Method::Lime, Metric::LimetreeLoss, "top-3");
    let t = sign_test_less(&tree, &ridge);
    println!("tree beats ridge in {} of {} trials, p = {:.2e}", t.wins, tree.len(), t.p_value);
    Ok(())
}
