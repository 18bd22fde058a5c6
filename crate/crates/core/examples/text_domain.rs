//! Text deletion domain with phrase spans and a table black box.
//!
//! cargo run --example text_domain

use limetree::blackbox::BlackBoxBinding;
use limetree::blackbox::SyntheticModel;
use limetree::domain::InterpretableDomain;
use limetree::explain::{shortest_explanation, Oracle, DEFAULT_CANDIDATE_CAP};
use limetree::fidelity::fit_complete;
use limetree::{InterpretablePoint, Result};

fn main() -> Result<()> {
    let text = "service was slow but the food was great";
    let domain = InterpretableDomain::text_with_spans(text, &[(0, 20), (21, 24), (25, 39)])?;
    for bits in ["111", "101", "011", "001"] {
        let p: InterpretablePoint = bits.parse()?;
        println!("{bits}: {:?}", String::from_utf8_lossy(&domain.from_interpretable(&p)?.render()?));
    }
    // positive iff "the food was great" survives and "slow" does not dominate
    let model = SyntheticModel::from_fn(3, |p| {
        let pos = 0.2 + 0.7 * f64::from(u8::from(p.get(2))) - 0.3 * f64::from(u8::from(p.get(0) && !p.get(1)));
        let pos = pos.clamp(0.0, 1.0);
        vec![1.0 - pos, pos]
    })?;
    let bb = BlackBoxBinding::synthetic(model, &domain)?;
    let tree = fit_complete(&bb, &domain, &[0, 1])?;
    let s = shortest_explanation(1, &tree, &domain, &bb, Oracle::Tree, DEFAULT_CANDIDATE_CAP)?;
    println!("shortest positive: {} span(s) {:?}", s.length.unwrap_or(0), s.points);
    Ok(())
}
