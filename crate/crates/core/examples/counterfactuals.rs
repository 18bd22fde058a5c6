//! Constrained counterfactuals: the nearest points whose prediction changes,
//! with features pinned or held fixed.
//!
//! cargo run --example counterfactuals

use limetree::blackbox::{make_synthetic, SyntheticKind, SyntheticSpec};
use limetree::domain::InterpretableDomain;
use limetree::explain::{counterfactual, CounterfactualQuery, Oracle, Target, DEFAULT_CANDIDATE_CAP};
use limetree::fidelity::fit_complete;
use limetree::Result;

fn main() -> Result<()> {
    let domain = InterpretableDomain::text("not a bad movie at all")?;
    let spec = SyntheticSpec {
        kind: SyntheticKind::SegmentLogit,
        d: domain.d(),
        class_count: 2,
        seed: 5,
    };
    let bb = make_synthetic(&spec, &domain)?;
    let tree = fit_complete(&bb, &domain, &[0, 1])?;
    let anchor_class = limetree::explain::argmax_class(&tree.predict(&limetree::InterpretablePoint::ones(domain.d()))?, &tree.classes);
    let flip = Target::ArgmaxIsNot { class: anchor_class };

    let queries = [
        ("free", CounterfactualQuery::new(flip)),
        ("keep token 0", CounterfactualQuery::new(flip).despite(0)),
        ("drop token 2", CounterfactualQuery::new(flip).given(2, 0)),
        ("black box", CounterfactualQuery::new(flip).oracle(Oracle::BlackBox)),
    ];
    for (name, q) in queries {
        let cf = counterfactual(&q, &tree, &domain, &bb, DEFAULT_CANDIDATE_CAP)?;
        let texts: Vec<String> = cf
            .points
            .iter()
            .map(|p| Ok(String::from_utf8_lossy(&domain.from_interpretable(p)?.render()?).into_owned()))
            .collect::<Result<_>>()?;
        println!("{name}: distance {:?} -> {texts:?}", cf.distance);
    }
    Ok(())
}
