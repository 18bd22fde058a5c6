//! Anchored interpretable representations.
//!
//! An [`InterpretableDomain`] is built around one explained instance (the
//! anchor). It maps that anchor to the all-ones point of `{0,1}^d` and maps
//! every binary point back to a concrete instance, either by occluding image
//! segments or by deleting text tokens. The inverse mapping is total and
//! deterministic: equal points always decode to bit-identical instances.

use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::InterpretablePoint;
use crate::segmentation::Segmentation;

/// A concrete instance in the black box's input space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instance {
    Image(RgbImage),
    Text(Vec<String>),
}

impl Instance {
    pub fn kind(&self) -> DomainKind {
        match self {
            Instance::Image(_) => DomainKind::ImageOcclusion,
            Instance::Text(_) => DomainKind::TextDeletion,
        }
    }

    pub fn as_image(&self) -> Option<&RgbImage> {
        match self {
            Instance::Image(img) => Some(img),
            Instance::Text(_) => None,
        }
    }

    pub fn as_tokens(&self) -> Option<&[String]> {
        match self {
            Instance::Text(t) => Some(t),
            Instance::Image(_) => None,
        }
    }

    /// Binary PPM (P6) encoding of an image instance.
    pub fn to_ppm(&self) -> Option<Vec<u8>> {
        let img = self.as_image()?;
        let mut out = format!("P6\n{} {}\n255\n", img.width(), img.height()).into_bytes();
        out.extend_from_slice(img.as_raw());
        Some(out)
    }

    /// PNG bytes for images, UTF-8 text (tokens joined by single spaces) for text.
    pub fn render(&self) -> Result<Vec<u8>> {
        match self {
            Instance::Image(img) => encode_png(img),
            Instance::Text(tokens) => Ok(tokens.join(" ").into_bytes()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    ImageOcclusion,
    TextDeletion,
}

/// How an occluded segment is painted. Fixed once a domain is built.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OcclusionStrategy {
    SolidColor { rgb: [u8; 3] },
    SegmentMean,
}

impl Default for OcclusionStrategy {
    fn default() -> Self {
        OcclusionStrategy::SolidColor { rgb: [0, 0, 0] }
    }
}

/// `mean`, `black`, `white` or `#rrggbb`.
impl std::str::FromStr for OcclusionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let solid = |rgb| Ok(OcclusionStrategy::SolidColor { rgb });
        match s {
            "mean" => Ok(OcclusionStrategy::SegmentMean),
            "black" => solid([0, 0, 0]),
            "white" => solid([255, 255, 255]),
            hex if hex.len() == 7 && hex.is_ascii() && hex.starts_with('#') => {
                let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16);
                match (byte(1), byte(3), byte(5)) {
                    (Ok(r), Ok(g), Ok(b)) => solid([r, g, b]),
                    _ => Err(Error::invalid(format!("bad colour {hex:?}"))),
                }
            }
            other => Err(Error::invalid(format!("unknown occlusion {other:?}"))),
        }
    }
}

/// JSON description of a domain; media is stored alongside it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainDescriptor {
    pub kind: DomainKind,
    pub d: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub occlusion: Option<OcclusionStrategy>,
    pub merge_history: Vec<Vec<Vec<u32>>>,
}

#[derive(Clone, Debug)]
enum Representation {
    Image {
        segmentation: Segmentation,
        occlusion: OcclusionStrategy,
        /// Replacement colour per pixel, laid out like the anchor buffer.
        /// Computed once from the original segmentation and kept on merge.
        fill: Vec<u8>,
        pixels: Vec<Vec<usize>>,
    },
    Text {
        /// Token positions controlled by each feature, ascending.
        features: Vec<Vec<usize>>,
    },
}

#[derive(Clone, Debug)]
pub struct InterpretableDomain {
    anchor: Instance,
    repr: Representation,
    merge_history: Vec<Vec<Vec<u32>>>,
    non_injective: Vec<usize>,
}

impl InterpretableDomain {
    /// Image-occlusion domain. Segments whose anchor pixels already equal
    /// their occlusion fill are recorded in [`Self::non_injective_features`];
    /// construction still succeeds.
    pub fn image(
        anchor: RgbImage,
        segmentation: Segmentation,
        occlusion: OcclusionStrategy,
    ) -> Result<Self> {
        if anchor.width() != segmentation.width() || anchor.height() != segmentation.height() {
            return Err(Error::invalid(format!(
                "image is {}x{} but segmentation is {}x{}",
                anchor.width(),
                anchor.height(),
                segmentation.width(),
                segmentation.height()
            )));
        }
        let pixels = segmentation.segment_pixels();
        let mut fill = vec![0u8; anchor.as_raw().len()];
        for idx in &pixels {
            let rgb = match occlusion {
                OcclusionStrategy::SolidColor { rgb } => rgb,
                OcclusionStrategy::SegmentMean => mean_color(anchor.as_raw(), idx),
            };
            for &i in idx {
                fill[3 * i..3 * i + 3].copy_from_slice(&rgb);
            }
        }
        Ok(Self::image_with_fill(anchor, segmentation, occlusion, fill))
    }

    fn image_with_fill(
        anchor: RgbImage,
        segmentation: Segmentation,
        occlusion: OcclusionStrategy,
        fill: Vec<u8>,
    ) -> Self {
        let pixels = segmentation.segment_pixels();
        let raw = anchor.as_raw();
        let non_injective = pixels
            .iter()
            .enumerate()
            .filter(|(_, p)| p.iter().all(|&i| raw[3 * i..3 * i + 3] == fill[3 * i..3 * i + 3]))
            .map(|(i, _)| i)
            .collect();
        Self {
            anchor: Instance::Image(anchor),
            repr: Representation::Image {
                segmentation,
                occlusion,
                fill,
                pixels,
            },
            merge_history: Vec::new(),
            non_injective,
        }
    }

    /// Text-deletion domain over whitespace-separated tokens.
    pub fn text(text: &str) -> Result<Self> {
        let tokens = text.split_whitespace().map(str::to_owned).collect();
        Self::from_tokens(tokens)
    }

    /// Text-deletion domain over caller-chosen byte spans, so a token may be
    /// a multi-word phrase. Spans must be ordered and non-overlapping.
    pub fn text_with_spans(text: &str, spans: &[(usize, usize)]) -> Result<Self> {
        let mut prev_end = 0;
        let mut tokens = Vec::with_capacity(spans.len());
        for &(start, end) in spans {
            if start >= end || start < prev_end || end > text.len() {
                return Err(Error::invalid(format!(
                    "token span {start}..{end} is empty, overlapping or out of bounds"
                )));
            }
            let tok = text.get(start..end).ok_or_else(|| {
                Error::invalid(format!("span {start}..{end} splits a UTF-8 character"))
            })?;
            tokens.push(tok.to_owned());
            prev_end = end;
        }
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::invalid("text domain needs at least one token"));
        }
        let features: Vec<Vec<usize>> = (0..tokens.len()).map(|i| vec![i]).collect();
        let non_injective = duplicate_token_features(&tokens, &features);
        Ok(Self {
            anchor: Instance::Text(tokens),
            repr: Representation::Text { features },
            merge_history: Vec::new(),
            non_injective,
        })
    }

    /// Rebuilds the domain with merged features; see [`Segmentation::merge`]
    /// for the id re-compaction rule, which text domains follow as well.
    pub fn merge(&self, groups: &[Vec<u32>]) -> Result<Self> {
        let mut merged = match &self.repr {
            Representation::Image {
                segmentation,
                occlusion,
                fill,
                ..
            } => {
                // merged features paint each original segment with its own fill
                let anchor = self.anchor.as_image().expect("image domain").clone();
                Self::image_with_fill(anchor, segmentation.merge(groups)?, *occlusion, fill.clone())
            }
            Representation::Text { features } => {
                // reuse the segmentation merge rule on a 1-row label strip
                let strip = Segmentation::from_labels(
                    features.len() as u32,
                    1,
                    (0..features.len() as u32).collect(),
                )?;
                let mapping = strip.merge(groups)?;
                let mut merged_features = vec![Vec::new(); mapping.d()];
                for (old, &new) in mapping.labels().iter().enumerate() {
                    merged_features[new as usize].extend_from_slice(&features[old]);
                }
                for f in &mut merged_features {
                    f.sort_unstable();
                }
                let tokens = self.anchor.as_tokens().expect("text domain");
                let non_injective = duplicate_token_features(tokens, &merged_features);
                Self {
                    anchor: self.anchor.clone(),
                    repr: Representation::Text {
                        features: merged_features,
                    },
                    merge_history: Vec::new(),
                    non_injective,
                }
            }
        };
        merged.merge_history = self.merge_history.clone();
        if !groups.is_empty() {
            merged.merge_history.push(groups.to_vec());
        }
        Ok(merged)
    }

    pub fn d(&self) -> usize {
        match &self.repr {
            Representation::Image { segmentation, .. } => segmentation.d(),
            Representation::Text { features } => features.len(),
        }
    }

    pub fn kind(&self) -> DomainKind {
        self.anchor.kind()
    }

    pub fn anchor(&self) -> &Instance {
        &self.anchor
    }

    pub fn segmentation(&self) -> Option<&Segmentation> {
        match &self.repr {
            Representation::Image { segmentation, .. } => Some(segmentation),
            Representation::Text { .. } => None,
        }
    }

    pub fn occlusion(&self) -> Option<OcclusionStrategy> {
        match &self.repr {
            Representation::Image { occlusion, .. } => Some(*occlusion),
            Representation::Text { .. } => None,
        }
    }

    pub fn merge_history(&self) -> &[Vec<Vec<u32>>] {
        &self.merge_history
    }

    /// Features whose removal does not change the anchor. Non-empty means the
    /// inverse mapping is not injective and exact-fidelity claims are void.
    pub fn non_injective_features(&self) -> &[usize] {
        &self.non_injective
    }

    pub fn is_injective(&self) -> bool {
        self.non_injective.is_empty()
    }

    pub fn descriptor(&self) -> DomainDescriptor {
        DomainDescriptor {
            kind: self.kind(),
            d: self.d(),
            occlusion: self.occlusion(),
            merge_history: self.merge_history.clone(),
        }
    }

    /// The anchor maps to the all-ones point; any other instance is rejected.
    pub fn to_interpretable(&self, instance: &Instance) -> Result<InterpretablePoint> {
        if instance != &self.anchor {
            return Err(Error::UnsupportedInstance(
                "the domain is anchored; only the anchor instance can be encoded".into(),
            ));
        }
        Ok(InterpretablePoint::ones(self.d()))
    }

    /// Decodes a binary point into a concrete instance.
    pub fn from_interpretable(&self, point: &InterpretablePoint) -> Result<Instance> {
        point.check_len(self.d())?;
        match (&self.repr, &self.anchor) {
            (Representation::Image { fill, pixels, .. }, Instance::Image(anchor)) => {
                let mut raw = anchor.as_raw().clone();
                for (seg, idx) in pixels.iter().enumerate() {
                    if point.get(seg) {
                        continue;
                    }
                    for &i in idx {
                        raw[3 * i..3 * i + 3].copy_from_slice(&fill[3 * i..3 * i + 3]);
                    }
                }
                let out = RgbImage::from_raw(anchor.width(), anchor.height(), raw)
                    .expect("buffer keeps the anchor size");
                Ok(Instance::Image(out))
            }
            (Representation::Text { features }, Instance::Text(tokens)) => {
                let mut keep = vec![true; tokens.len()];
                for (f, positions) in features.iter().enumerate() {
                    if !point.get(f) {
                        for &p in positions {
                            keep[p] = false;
                        }
                    }
                }
                Ok(Instance::Text(
                    tokens
                        .iter()
                        .zip(keep)
                        .filter(|(_, k)| *k)
                        .map(|(t, _)| t.clone())
                        .collect(),
                ))
            }
            _ => unreachable!("representation always matches anchor kind"),
        }
    }

    /// Reads back which features of `instance` are occluded. For images a
    /// segment reads as occluded when every pixel equals its fill colour; for
    /// text, anchor tokens are matched greedily left to right.
    ///
    /// Synthetic black boxes use this to see an instance the way a real model
    /// would: through its pixels or tokens only.
    pub fn decode_occlusion(&self, instance: &Instance) -> Result<InterpretablePoint> {
        match (&self.repr, instance) {
            (Representation::Image { fill, pixels, .. }, Instance::Image(img)) => {
                let anchor = self.anchor.as_image().expect("image domain");
                if img.dimensions() != anchor.dimensions() {
                    return Err(Error::invalid(format!(
                        "instance is {:?}, domain anchor is {:?}",
                        img.dimensions(),
                        anchor.dimensions()
                    )));
                }
                let raw = img.as_raw();
                let bits = pixels
                    .iter()
                    .map(|idx| !idx.iter().all(|&i| raw[3 * i..3 * i + 3] == fill[3 * i..3 * i + 3]))
                    .collect();
                Ok(InterpretablePoint::new(bits))
            }
            (Representation::Text { features }, Instance::Text(tokens)) => {
                let anchor = self.anchor.as_tokens().expect("text domain");
                let mut present = vec![false; anchor.len()];
                let mut cursor = 0;
                for tok in tokens {
                    match anchor[cursor..].iter().position(|a| a == tok) {
                        Some(off) => {
                            present[cursor + off] = true;
                            cursor += off + 1;
                        }
                        None => {
                            return Err(Error::invalid(format!(
                                "token {tok:?} is not an in-order token of the anchor"
                            )))
                        }
                    }
                }
                let bits = features.iter().map(|pos| pos.iter().all(|&p| present[p])).collect();
                Ok(InterpretablePoint::new(bits))
            }
            _ => Err(Error::invalid("instance kind does not match the domain kind")),
        }
    }
}

fn mean_color(raw: &[u8], pixels: &[usize]) -> [u8; 3] {
    let mut sum = [0u64; 3];
    for &i in pixels {
        for c in 0..3 {
            sum[c] += u64::from(raw[3 * i + c]);
        }
    }
    let n = pixels.len() as u64;
    // round half up
    sum.map(|s| ((2 * s + n) / (2 * n)) as u8)
}

/// Features sharing identical token content with another feature cannot be
/// told apart after deletion.
fn duplicate_token_features(tokens: &[String], features: &[Vec<usize>]) -> Vec<usize> {
    let mut flagged = Vec::new();
    for (i, fi) in features.iter().enumerate() {
        let dup = fi.iter().any(|&p| {
            tokens
                .iter()
                .enumerate()
                .any(|(q, t)| q != p && *t == tokens[p])
        });
        if dup {
            flagged.push(i);
        }
    }
    flagged
}

/// Loads an 8-bit RGB anchor image (PNG or PPM).
pub fn load_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    Ok(image::open(path)?.to_rgb8())
}

pub fn decode_image(bytes: &[u8]) -> Result<RgbImage> {
    Ok(image::load_from_memory(bytes)?.to_rgb8())
}

pub fn encode_png(img: &RgbImage) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)?;
    Ok(out.into_inner())
}
