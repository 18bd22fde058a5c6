//! Binary points of the interpretable space `{0,1}^d`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A length-`d` binary vector. Bit `i` set means component `i` of the
/// explained instance is preserved, cleared means it is occluded or removed.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InterpretablePoint {
    bits: Vec<bool>,
}

impl InterpretablePoint {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn ones(d: usize) -> Self {
        Self { bits: vec![true; d] }
    }

    pub fn zeros(d: usize) -> Self {
        Self { bits: vec![false; d] }
    }

    /// Builds a point from 0/1 integers, rejecting anything else.
    pub fn from_u8s(values: &[u8]) -> Result<Self> {
        values
            .iter()
            .map(|&v| match v {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::invalid(format!("bit value {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    /// Point whose bits spell `index` in binary, most significant bit first,
    /// so feature 0 is the most significant bit.
    pub fn from_index(index: u64, d: usize) -> Self {
        let bits = (0..d)
            .map(|i| (index >> (d - 1 - i)) & 1 == 1)
            .collect();
        Self { bits }
    }

    /// Inverse of [`InterpretablePoint::from_index`].
    pub fn index(&self) -> u64 {
        self.bits
            .iter()
            .fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_all_ones(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn hamming(&self, other: &Self) -> Result<usize> {
        self.check_len(other.len())?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count())
    }

    pub fn check_len(&self, d: usize) -> Result<()> {
        if self.bits.len() != d {
            return Err(Error::invalid(format!(
                "point has length {}, expected {d}",
                self.bits.len()
            )));
        }
        Ok(())
    }

    /// `0`/`1` string of exactly `d` characters.
    pub fn to_bitstring(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

impl FromStr for InterpretablePoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::invalid(format!("bitstring contains {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

impl fmt::Debug for InterpretablePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.to_bitstring())
    }
}

impl fmt::Display for InterpretablePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

impl Serialize for InterpretablePoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let values: Vec<u8> = self.bits.iter().map(|&b| u8::from(b)).collect();
        values.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for InterpretablePoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let values = Vec::<u8>::deserialize(deserializer)?;
        Self::from_u8s(&values).map_err(serde::de::Error::custom)
    }
}
