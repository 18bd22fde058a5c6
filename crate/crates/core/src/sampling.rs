//! Training samples over the interpretable space and their proximity weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::point::InterpretablePoint;

/// Default kernel width.
pub const DEFAULT_KERNEL_WIDTH: f64 = 0.25;
/// Largest dimension [`enumerate_domain`] will expand.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;
/// Sample budget under which enumeration replaces random sampling.
pub const DEFAULT_SAMPLE_BUDGET: usize = 4096;

/// All `2^d` points in ascending binary order (feature 0 most significant).
pub fn enumerate_domain(d: usize) -> Result<Vec<InterpretablePoint>> {
    enumerate_domain_capped(d, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_domain_capped(d: usize, cap: usize) -> Result<Vec<InterpretablePoint>> {
    check_enumerable(d, cap)?;
    Ok((0..1u64 << d)
        .map(|i| InterpretablePoint::from_index(i, d))
        .collect())
}

pub(crate) fn check_enumerable(d: usize, cap: usize) -> Result<()> {
    if d > cap {
        return Err(Error::Capacity {
            what: "enumeration of the interpretable domain",
            needed: 1u128 << d.min(127),
            cap: 1u128 << cap.min(127),
        });
    }
    Ok(())
}

/// `n` i.i.d. uniform points (with replacement), followed by the all-ones
/// reference when the draw did not already contain it.
pub fn sample_domain(d: usize, n: usize, seed: u64) -> Result<Vec<InterpretablePoint>> {
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<InterpretablePoint> = (0..n)
        .map(|_| InterpretablePoint::new((0..d).map(|_| rng.random::<bool>()).collect()))
        .collect();
    if !points.iter().any(InterpretablePoint::is_all_ones) {
        points.push(InterpretablePoint::ones(d));
    }
    Ok(points)
}

/// `1 - a.b / (|a| |b|)`; distance 1 when either side is all zeros.
pub fn cosine_distance(a: &InterpretablePoint, b: &InterpretablePoint) -> Result<f64> {
    a.check_len(b.len())?;
    let (mut dot, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        dot += usize::from(x && y);
        na += usize::from(x);
        nb += usize::from(y);
    }
    if na == 0 || nb == 0 {
        return Ok(1.0);
    }
    if dot == na && na == nb {
        // identical non-zero vectors
        return Ok(0.0);
    }
    let sim = dot as f64 / ((na as f64).sqrt() * (nb as f64).sqrt());
    Ok((1.0 - sim).clamp(0.0, 1.0))
}

/// `sqrt(exp(-(s / w)^2))`.
pub fn exponential_kernel(distance: f64, width: f64) -> Result<f64> {
    if !(width > 0.0) || !width.is_finite() {
        return Err(Error::invalid(format!("kernel width must be positive, got {width}")));
    }
    if !(distance >= 0.0) {
        return Err(Error::invalid(format!("distance must be non-negative, got {distance}")));
    }
    let r = distance / width;
    Ok((-(r * r)).exp().sqrt())
}

/// Sample `S` together with its proximity weights to `reference`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedSample {
    pub points: Vec<InterpretablePoint>,
    pub weights: Vec<f64>,
    pub reference: InterpretablePoint,
    pub kernel_width: f64,
}

impl WeightedSample {
    pub fn new(
        points: Vec<InterpretablePoint>,
        reference: InterpretablePoint,
        kernel_width: f64,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("a weighted sample needs at least one point"));
        }
        let weights = points
            .iter()
            .map(|p| exponential_kernel(cosine_distance(&reference, p)?, kernel_width))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            points,
            weights,
            reference,
            kernel_width,
        })
    }

    /// Full enumeration when `2^d <= budget`, otherwise `budget` uniform draws
    /// plus the reference. Weights are relative to the all-ones point.
    pub fn around_anchor(d: usize, budget: usize, kernel_width: f64, seed: u64) -> Result<Self> {
        let points = if d < usize::BITS as usize && (1usize << d) <= budget {
            enumerate_domain_capped(d, usize::BITS as usize - 1)?
        } else {
            sample_domain(d, budget, seed)?
        };
        Self::new(points, InterpretablePoint::ones(d), kernel_width)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn d(&self) -> usize {
        self.reference.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> InterpretablePoint {
        s.parse().unwrap()
    }

    #[test]
    fn enumeration_orders() {
        let pts = enumerate_domain(2).unwrap();
        let s: Vec<String> = pts.iter().map(|p| p.to_bitstring()).collect();
        assert_eq!(s, ["00", "01", "10", "11"]);
        assert_eq!(enumerate_domain(10).unwrap().len(), 1024);
        assert_eq!(enumerate_domain(1).unwrap(), vec![p("0"), p("1")]);
        assert!(matches!(enumerate_domain(21), Err(Error::Capacity { .. })));
    }

    #[test]
    fn sampling_is_seeded_and_appends_reference() {
        assert_eq!(sample_domain(3, 8, 1).unwrap(), sample_domain(3, 8, 1).unwrap());
        let one = sample_domain(4, 1, 0).unwrap();
        assert_eq!(one.len(), 2);
        assert!(one[1].is_all_ones());
        assert!(sample_domain(2, 0, 0).is_err());
    }

    #[test]
    fn sampling_is_roughly_uniform() {
        let pts = sample_domain(1, 1000, 2).unwrap();
        // the appended reference (if any) is excluded
        let ones = pts[..1000].iter().filter(|p| p.get(0)).count();
        let frac = ones as f64 / 1000.0;
        assert!((frac - 0.5).abs() < 0.05, "fraction of ones {frac}");
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_distance(&p("1011"), &p("1011")).unwrap(), 0.0);
        let d = cosine_distance(&p("111"), &p("110")).unwrap();
        assert!((d - (1.0 - 2.0 / (3f64.sqrt() * 2f64.sqrt()))).abs() < 1e-15);
        assert!((d - 0.18350).abs() < 1e-5);
        assert_eq!(cosine_distance(&p("10"), &p("01")).unwrap(), 1.0);
        assert_eq!(cosine_distance(&p("00"), &p("01")).unwrap(), 1.0);
        assert!(cosine_distance(&p("1"), &p("01")).is_err());
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(exponential_kernel(0.0, 0.25).unwrap(), 1.0);
        assert!((exponential_kernel(0.25, 0.25).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert!((exponential_kernel(0.25, 0.25).unwrap() - 0.60653).abs() < 1e-5);
        let s = cosine_distance(&p("1111"), &p("1110")).unwrap();
        assert!((s - 0.1340).abs() < 1e-4);
        assert!((exponential_kernel(s, 0.25).unwrap() - 0.86616).abs() < 1e-4);
        assert!(exponential_kernel(0.1, 0.0).is_err());
        assert!(exponential_kernel(0.1, -1.0).is_err());
    }

    #[test]
    fn reference_weight_is_one() {
        let s = WeightedSample::around_anchor(5, 4096, 0.25, 0).unwrap();
        assert_eq!(s.len(), 32);
        let idx = s.points.iter().position(|p| p.is_all_ones()).unwrap();
        assert_eq!(s.weights[idx], 1.0);
        assert!(s.weights.iter().all(|&w| w > 0.0 && w <= 1.0));
    }

    #[test]
    fn large_d_falls_back_to_sampling() {
        let s = WeightedSample::around_anchor(13, 4096, 0.25, 9).unwrap();
        assert!(s.len() == 4096 || s.len() == 4097);
        assert!(s.points.iter().any(|p| p.is_all_ones()));
    }
}
