//! Cross-cell label matching for independently fitted mixtures.
//!
//! A latent class shows up as one mixture component in every observed
//! (z, m, y) stratum it is compatible with. When a per-class key — the
//! class proportion, a cell-invariant mean, or a cell-invariant variance —
//! is distinct across classes, components sharing a key can be grouped
//! across strata, and the stratum memberships of a group read off the
//! class's potential-outcome bits directly: landing in the (z, m, y) stratum
//! means the class's outcome in cell (z, m) is y.

use crate::error::{Error, Result};
use crate::latent::LatentClass;
use serde::{Deserialize, Serialize};

/// Which per-component statistic identifies a class across cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchKey {
    Proportion,
    Mean,
    Variance,
}

/// One independently fitted stratum mixture: the (z, m, y) stratum and the
/// matching-key value of each of its components.
#[derive(Debug, Clone)]
pub struct CellMixtureFit {
    pub z: u8,
    pub m: u8,
    pub y: u8,
    pub keys: Vec<f64>,
}

/// Result of matching: per input stratum, per component, the assigned class
/// (None when the component could not be resolved into a full class), plus a
/// list of the unresolved (stratum, component) pairs.
#[derive(Debug, Clone)]
pub struct LabelAssignment {
    pub assignments: Vec<Vec<Option<LatentClass>>>,
    pub unmatched: Vec<(usize, usize)>,
    /// Number of distinct key groups found across all strata.
    pub n_groups: usize,
}

struct Group {
    key: f64,
    /// bits[cell index] = outcome this group showed in that cell.
    bits: [Option<u8>; 4],
    members: Vec<(usize, usize)>,
}

/// Group components across strata by key agreement within `tol` and decode
/// each group's class bits from its stratum memberships.
///
/// Two components of the same stratum within `tol` of each other make the
/// key non-identifying and raise an ambiguity error, as does a component
/// equally attributable to two existing groups.
pub fn match_class_labels(fits: &[CellMixtureFit], tol: f64) -> Result<LabelAssignment> {
    let mut groups: Vec<Group> = Vec::new();

    for (fit_idx, fit) in fits.iter().enumerate() {
        if fit.z > 1 || fit.m > 1 || fit.y > 1 {
            return Err(Error::InvalidConfig(format!(
                "stratum ({},{},{}) is not binary",
                fit.z, fit.m, fit.y
            )));
        }
        // Keys within one stratum must be separated.
        for i in 0..fit.keys.len() {
            for j in (i + 1)..fit.keys.len() {
                if (fit.keys[i] - fit.keys[j]).abs() <= tol {
                    return Err(Error::AmbiguousMatch {
                        a: i,
                        b: j,
                        key: fit.keys[i],
                    });
                }
            }
        }
        let cell_idx = (fit.z as usize) * 2 + fit.m as usize;
        for (comp_idx, &key) in fit.keys.iter().enumerate() {
            let mut near: Vec<usize> = groups
                .iter()
                .enumerate()
                .filter(|(_, g)| (g.key - key).abs() <= tol)
                .map(|(i, _)| i)
                .collect();
            match near.len() {
                0 => {
                    let mut bits = [None; 4];
                    bits[cell_idx] = Some(fit.y);
                    groups.push(Group {
                        key,
                        bits,
                        members: vec![(fit_idx, comp_idx)],
                    });
                }
                1 => {
                    let g = &mut groups[near.pop().unwrap()];
                    match g.bits[cell_idx] {
                        Some(bit) if bit != fit.y => {
                            // The same key appeared in both outcome strata of
                            // one cell: keys cannot identify classes.
                            return Err(Error::AmbiguousMatch {
                                a: g.members[0].1,
                                b: comp_idx,
                                key,
                            });
                        }
                        _ => {
                            g.bits[cell_idx] = Some(fit.y);
                            g.members.push((fit_idx, comp_idx));
                            // Running mean keeps the group key centered.
                            let n = g.members.len() as f64;
                            g.key += (key - g.key) / n;
                        }
                    }
                }
                _ => {
                    return Err(Error::AmbiguousMatch {
                        a: near[0],
                        b: near[1],
                        key,
                    });
                }
            }
        }
    }

    let mut assignments: Vec<Vec<Option<LatentClass>>> =
        fits.iter().map(|f| vec![None; f.keys.len()]).collect();
    let mut unmatched = Vec::new();
    for g in &groups {
        let class = match (g.bits[0], g.bits[1], g.bits[2], g.bits[3]) {
            (Some(r), Some(s), Some(t), Some(u)) => Some(LatentClass::from_bits(r, s, t, u)),
            _ => None,
        };
        for &(fit_idx, comp_idx) in &g.members {
            match class {
                Some(c) => assignments[fit_idx][comp_idx] = Some(c),
                None => unmatched.push((fit_idx, comp_idx)),
            }
        }
    }
    unmatched.sort_unstable();
    Ok(LabelAssignment {
        assignments,
        unmatched,
        n_groups: groups.len(),
    })
}
