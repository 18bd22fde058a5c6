//! Synthetic black boxes over an image domain and their probability rows.
//!
//! cargo run --example synthetic_blackbox

use image::{Rgb, RgbImage};
use limetree::blackbox::{make_synthetic, SyntheticKind, SyntheticSpec, DEFAULT_BATCH};
use limetree::domain::{InterpretableDomain, OcclusionStrategy};
use limetree::sampling::enumerate_domain;
use limetree::segmentation::Segmentation;
use limetree::Result;

fn main() -> Result<()> {
    let img = RgbImage::from_fn(32, 8, |x, _| Rgb([(x * 7) as u8, 50, 200]));
    let domain = InterpretableDomain::image(
        img,
        Segmentation::grid(32, 8, 1, 4)?,
        OcclusionStrategy::SolidColor { rgb: [0, 0, 0] },
    )?;
    for kind in [SyntheticKind::SegmentLogit, SyntheticKind::BooleanTable, SyntheticKind::XorPair] {
        let spec = SyntheticSpec {
            kind,
            d: domain.d(),
            class_count: 3,
            seed: 7,
        };
        let bb = make_synthetic(&spec, &domain)?;
        let points = enumerate_domain(domain.d())?;
        let rows = bb.predict_points(&domain, &points, DEFAULT_BATCH)?;
        println!("{kind}:");
        for (p, row) in points.iter().zip(&rows).step_by(5) {
            println!("  {p} {row:.3?}");
        }
    }
    Ok(())
}
