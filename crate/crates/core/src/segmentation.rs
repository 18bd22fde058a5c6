//! Label images partitioning an anchor image into interpretable segments.

use std::collections::BTreeSet;
use std::path::Path;

use image::DynamicImage;

use crate::error::{Error, Result};

/// Per-pixel segment ids, row-major. Every id in `0..d` occurs at least once.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segmentation {
    width: u32,
    height: u32,
    labels: Vec<u32>,
    d: usize,
}

impl Segmentation {
    /// Validates a raw label buffer.
    pub fn from_labels(width: u32, height: u32, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("segmentation must have non-zero dimensions"));
        }
        if labels.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "expected {} labels for a {width}x{height} mask, got {}",
                width as usize * height as usize,
                labels.len()
            )));
        }
        let present: BTreeSet<u32> = labels.iter().copied().collect();
        let d = present.len();
        // ids must be exactly 0..d-1
        if let Some(missing) = (0..d as u32).find(|id| !present.contains(id)) {
            let max = present.iter().next_back().copied().unwrap_or(0);
            return Err(Error::invalid(format!(
                "segment ids must be contiguous from 0: id {missing} is missing (max id {max})"
            )));
        }
        Ok(Self {
            width,
            height,
            labels,
            d,
        })
    }

    /// Regular `rows x cols` grid. Cells are `height / rows` by `width / cols`
    /// pixels; leftover pixels join the last row and column of cells.
    pub fn grid(width: u32, height: u32, rows: u32, cols: u32) -> Result<Self> {
        if width == 0 || height == 0 || rows == 0 || cols == 0 {
            return Err(Error::invalid("grid dimensions must be non-zero"));
        }
        if rows > height || cols > width {
            return Err(Error::invalid(format!(
                "a {rows}x{cols} grid does not fit a {width}x{height} image"
            )));
        }
        let cell_h = height / rows;
        let cell_w = width / cols;
        let mut labels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            let r = (y / cell_h).min(rows - 1);
            for x in 0..width {
                let c = (x / cell_w).min(cols - 1);
                labels.push(r * cols + c);
            }
        }
        Self::from_labels(width, height, labels)
    }

    /// Reads an 8- or 16-bit single-channel PNG/PGM whose pixel values are
    /// segment ids.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?;
        Self::from_image(img)
    }

    pub fn from_encoded(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory(bytes)?;
        Self::from_image(img)
    }

    fn from_image(img: DynamicImage) -> Result<Self> {
        let (width, height) = (img.width(), img.height());
        let labels = match img {
            DynamicImage::ImageLuma8(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
            DynamicImage::ImageLuma16(buf) => buf.into_raw().into_iter().map(u32::from).collect(),
            other => {
                return Err(Error::Media(format!(
                    "segmentation mask must be single-channel 8 or 16 bit, got {:?}",
                    other.color()
                )))
            }
        };
        Self::from_labels(width, height, labels)
    }

    /// Encodes the mask as a 16-bit grayscale PNG.
    pub fn to_png(&self) -> Result<Vec<u8>> {
        let raw: Vec<u16> = self
            .labels
            .iter()
            .map(|&l| {
                u16::try_from(l).map_err(|_| Error::Media(format!("segment id {l} exceeds 16 bits")))
            })
            .collect::<Result<_>>()?;
        let buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(
            self.width,
            self.height,
            raw,
        )
        .expect("label buffer matches dimensions");
        let mut out = std::io::Cursor::new(Vec::new());
        DynamicImage::ImageLuma16(buf).write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    /// Collapses each group of ids into one segment. New ids are assigned in
    /// ascending order of each resulting segment's smallest original id.
    pub fn merge(&self, groups: &[Vec<u32>]) -> Result<Self> {
        let mut owner: Vec<Option<usize>> = vec![None; self.d];
        for (g, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(Error::invalid(format!("merge group {g} is empty")));
            }
            for &id in group {
                let slot = owner.get_mut(id as usize).ok_or_else(|| {
                    Error::invalid(format!("unknown segment id {id} (d = {})", self.d))
                })?;
                match slot {
                    Some(prev) if *prev != g => {
                        return Err(Error::invalid(format!(
                            "segment {id} appears in merge groups {prev} and {g}"
                        )))
                    }
                    _ => *slot = Some(g),
                }
            }
        }

        // representative = smallest original id in the merged class
        let mut rep: Vec<u32> = (0..self.d as u32).collect();
        for group in groups {
            let min = *group.iter().min().expect("non-empty");
            for &id in group {
                rep[id as usize] = min;
            }
        }
        let reps: BTreeSet<u32> = rep.iter().copied().collect();
        let compact: std::collections::BTreeMap<u32, u32> = reps
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new as u32))
            .collect();
        let mapping: Vec<u32> = rep.iter().map(|r| compact[r]).collect();
        let labels = self.labels.iter().map(|&l| mapping[l as usize]).collect();
        Self::from_labels(self.width, self.height, labels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn label_at(&self, x: u32, y: u32) -> u32 {
        self.labels[(y * self.width + x) as usize]
    }

    /// Pixel indices (row-major) belonging to each segment.
    pub fn segment_pixels(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.d];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i);
        }
        out
    }
}
