//! Image occlusion domain: segment an image, occlude features, merge segments.
//!
//! cargo run --example domain_occlusion

use image::{Rgb, RgbImage};
use limetree::domain::{InterpretableDomain, OcclusionStrategy};
use limetree::segmentation::Segmentation;
use limetree::{InterpretablePoint, Result};

fn main() -> Result<()> {
    let img = RgbImage::from_fn(60, 40, |x, y| Rgb([(x * 4) as u8, (y * 6) as u8, 120]));
    let seg = Segmentation::grid(60, 40, 2, 3)?;
    let domain = InterpretableDomain::image(img, seg, OcclusionStrategy::SegmentMean)?;
    println!("d = {}, injective = {}", domain.d(), domain.is_injective());

    let point: InterpretablePoint = "101101".parse()?;
    let occluded = domain.from_interpretable(&point)?;
    let back = domain.decode_occlusion(&occluded)?;
    println!("{point} -> image -> {back}");
    println!("anchor encodes as {}", domain.to_interpretable(domain.anchor())?);
    assert_eq!(point, back);

    std::fs::write(std::env::temp_dir().join("occluded.png"), occluded.render()?)?;

    let merged = domain.merge(&[vec![0, 1], vec![3, 4]])?;
    println!("after merging: d = {}, history = {:?}", merged.d(), merged.merge_history());
    Ok(())
}
