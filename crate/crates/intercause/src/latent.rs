//! Latent-class algebra for two binary exposures and a binary outcome.
//!
//! A unit's joint response pattern is the 4-bit vector of potential outcomes
//! under the four exposure assignments. Everything downstream (bounds,
//! maximum entropy, EM, attribution) is built on enumerating these classes,
//! filtering them under monotonicity, and intersecting them with observed
//! evidence.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// One of the four exposure assignments (z, m).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExposureCell {
    pub z: u8,
    pub m: u8,
}

impl ExposureCell {
    pub fn new(z: u8, m: u8) -> Self {
        debug_assert!(z <= 1 && m <= 1);
        Self { z: z & 1, m: m & 1 }
    }

    /// All four cells in (0,0), (0,1), (1,0), (1,1) order.
    pub fn all() -> [ExposureCell; 4] {
        [
            ExposureCell::new(0, 0),
            ExposureCell::new(0, 1),
            ExposureCell::new(1, 0),
            ExposureCell::new(1, 1),
        ]
    }

    /// Dense index in the `all()` ordering.
    pub fn index(self) -> usize {
        (self.z as usize) * 2 + self.m as usize
    }
}

impl fmt::Display for ExposureCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.z, self.m)
    }
}

/// A joint potential-outcome pattern: the bits (r, s, t, u) are the outcomes
/// under cells (0,0), (0,1), (1,0), (1,1).
///
/// The canonical ordering key is the 4-bit integer `8r + 4s + 2t + u`; all
/// vectors and serialized maps use it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LatentClass(u8);

impl LatentClass {
    pub fn from_bits(r: u8, s: u8, t: u8, u: u8) -> Self {
        Self(((r & 1) << 3) | ((s & 1) << 2) | ((t & 1) << 1) | (u & 1))
    }

    /// Build from the canonical key in `0..16`.
    pub fn from_key(key: u8) -> Self {
        debug_assert!(key < 16);
        Self(key & 0xF)
    }

    pub fn key(self) -> u8 {
        self.0
    }

    pub fn r(self) -> u8 {
        (self.0 >> 3) & 1
    }

    pub fn s(self) -> u8 {
        (self.0 >> 2) & 1
    }

    pub fn t(self) -> u8 {
        (self.0 >> 1) & 1
    }

    pub fn u(self) -> u8 {
        self.0 & 1
    }

    /// Whether the pattern satisfies both monotone chains
    /// r <= s <= u and r <= t <= u.
    pub fn is_monotone(self) -> bool {
        let (r, s, t, u) = (self.r(), self.s(), self.t(), self.u());
        r <= s && s <= u && r <= t && t <= u
    }

    /// Serialized form, e.g. "0001".
    pub fn bitstring(self) -> String {
        format!("{}{}{}{}", self.r(), self.s(), self.t(), self.u())
    }
}

impl fmt::Display for LatentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.bitstring())
    }
}

impl FromStr for LatentClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits: Vec<u8> = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0u8),
                '1' => Ok(1u8),
                _ => Err(Error::InvalidDistribution(format!(
                    "class bitstring must contain only 0/1, got {s:?}"
                ))),
            })
            .collect::<Result<_>>()?;
        if bits.len() != 4 {
            return Err(Error::InvalidDistribution(format!(
                "class bitstring must have 4 characters, got {s:?}"
            )));
        }
        Ok(LatentClass::from_bits(bits[0], bits[1], bits[2], bits[3]))
    }
}

impl Serialize for LatentClass {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.serialize_str(&self.bitstring())
    }
}

impl<'de> Deserialize<'de> for LatentClass {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Observed evidence: either the whole population (empty) or a full
/// (z, m, y) triple. Partial evidence is not representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Evidence {
    #[default]
    Empty,
    Observed {
        z: u8,
        m: u8,
        y: u8,
    },
}

impl Evidence {
    pub fn observed(z: u8, m: u8, y: u8) -> Self {
        Evidence::Observed {
            z: z & 1,
            m: m & 1,
            y: y & 1,
        }
    }

    pub fn is_empty(self) -> bool {
        matches!(self, Evidence::Empty)
    }

    pub fn cell(self) -> Option<ExposureCell> {
        match self {
            Evidence::Empty => None,
            Evidence::Observed { z, m, .. } => Some(ExposureCell::new(z, m)),
        }
    }

    pub fn outcome(self) -> Option<u8> {
        match self {
            Evidence::Empty => None,
            Evidence::Observed { y, .. } => Some(y),
        }
    }

    /// All eight observed triples in (z, m, y) lexicographic order.
    pub fn all_observed() -> [Evidence; 8] {
        let mut out = [Evidence::Empty; 8];
        let mut i = 0;
        for z in 0..2u8 {
            for m in 0..2u8 {
                for y in 0..2u8 {
                    out[i] = Evidence::observed(z, m, y);
                    i += 1;
                }
            }
        }
        out
    }
}

impl fmt::Display for Evidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Evidence::Empty => write!(f, "empty"),
            Evidence::Observed { z, m, y } => write!(f, "{z},{m},{y}"),
        }
    }
}

impl FromStr for Evidence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "empty" {
            return Ok(Evidence::Empty);
        }
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::InvalidConfig(format!(
                "evidence must be \"z,m,y\" or \"empty\", got {s:?}"
            )));
        }
        let mut bits = [0u8; 3];
        for (i, p) in parts.iter().enumerate() {
            bits[i] = match *p {
                "0" => 0,
                "1" => 1,
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "evidence components must be 0 or 1, got {s:?}"
                    )))
                }
            };
        }
        Ok(Evidence::observed(bits[0], bits[1], bits[2]))
    }
}

/// Enumerate latent classes in canonical order.
///
/// With `monotonic` set, only the six patterns compatible with
/// "neither exposure ever prevents the outcome" remain.
pub fn enumerate_classes(monotonic: bool) -> Vec<LatentClass> {
    (0u8..16)
        .map(LatentClass::from_key)
        .filter(|g| !monotonic || g.is_monotone())
        .collect()
}

/// The outcome a unit of class `g` realizes in exposure cell `cell`.
pub fn outcome_under(g: LatentClass, cell: ExposureCell) -> u8 {
    match (cell.z, cell.m) {
        (0, 0) => g.r(),
        (0, 1) => g.s(),
        (1, 0) => g.t(),
        _ => g.u(),
    }
}

/// Classes that can produce the observed evidence.
///
/// Errors on empty evidence: conditioning on the whole population is the
/// caller's identity case, not a restriction.
pub fn compatible_classes(ev: Evidence, monotonic: bool) -> Result<Vec<LatentClass>> {
    let Evidence::Observed { z, m, y } = ev else {
        return Err(Error::EmptyEvidence);
    };
    let cell = ExposureCell::new(z, m);
    Ok(enumerate_classes(monotonic)
        .into_iter()
        .filter(|&g| outcome_under(g, cell) == y)
        .collect())
}

/// A probability vector over latent classes, keyed in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    classes: Vec<LatentClass>,
    probs: Vec<f64>,
}

impl ClassDistribution {
    const SUM_TOL: f64 = 1e-10;

    /// Build from parallel class/probability slices. Classes are reordered
    /// canonically; probabilities must be nonnegative and sum to one.
    pub fn new(classes: &[LatentClass], probs: &[f64]) -> Result<Self> {
        if classes.len() != probs.len() {
            return Err(Error::DimensionMismatch {
                expected: classes.len(),
                got: probs.len(),
            });
        }
        let mut pairs: Vec<(LatentClass, f64)> =
            classes.iter().copied().zip(probs.iter().copied()).collect();
        pairs.sort_by_key(|(g, _)| g.key());
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidDistribution(format!(
                    "duplicate class {}",
                    w[0].0
                )));
            }
        }
        for &(g, p) in &pairs {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::InvalidDistribution(format!(
                    "probability of class {g} is {p}"
                )));
            }
        }
        let total: f64 = pairs.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > Self::SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self {
            classes: pairs.iter().map(|(g, _)| *g).collect(),
            probs: pairs.iter().map(|(_, p)| *p).collect(),
        })
    }

    pub fn classes(&self) -> &[LatentClass] {
        &self.classes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of `g`; zero when `g` is outside the support set.
    pub fn prob(&self, g: LatentClass) -> f64 {
        match self.classes.binary_search_by_key(&g.key(), |c| c.key()) {
            Ok(i) => self.probs[i],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (LatentClass, f64)> + '_ {
        self.classes.iter().copied().zip(self.probs.iter().copied())
    }

    /// Shannon entropy in nats, with the 0 log 0 = 0 convention.
    pub fn entropy(&self) -> f64 {
        self.probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum()
    }
}
