//! Nonparametric partial identification of the six monotone class
//! probabilities, and of their posteriors given evidence.
//!
//! Under monotone response the composition table pins five of the six
//! probabilities up to a single free parameter. Writing `t` for the mass of
//! the both-exposures-required class and
//!
//! ```text
//! A = delta_11 - delta_01,   B = delta_11 - delta_10,
//! C = delta_11 + delta_00 - delta_01 - delta_10,
//! ```
//!
//! the remaining masses are `A - t`, `B - t` and `t - C`, so
//! `t` ranges over `[max(C, 0), min(A, B)]` and every class interval is the
//! image of that range.

use crate::error::{Error, Result};
use crate::latent::{
    compatible_classes, enumerate_classes, ClassDistribution, Evidence, LatentClass,
};
use crate::rates::{identified_masses, CellRates};
use serde::Serialize;

/// Absolute slack accepted before declaring the rates infeasible; covers
/// floating-point noise in ratios of integer counts.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Per-class probability intervals; point-identified classes have
/// `lower == upper`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalBounds {
    entries: Vec<(LatentClass, f64, f64)>,
}

impl IntervalBounds {
    fn new(mut entries: Vec<(LatentClass, f64, f64)>) -> Self {
        entries.sort_by_key(|(g, _, _)| g.key());
        for e in &mut entries {
            e.1 = e.1.clamp(0.0, 1.0);
            e.2 = e.2.clamp(0.0, 1.0);
            if e.1 > e.2 {
                // Interval collapsed by rounding; keep the midpoint order.
                std::mem::swap(&mut e.1, &mut e.2);
            }
        }
        Self { entries }
    }

    pub fn classes(&self) -> impl Iterator<Item = LatentClass> + '_ {
        self.entries.iter().map(|(g, _, _)| *g)
    }

    pub fn get(&self, g: LatentClass) -> Option<(f64, f64)> {
        self.entries
            .iter()
            .find(|(c, _, _)| *c == g)
            .map(|(_, lo, hi)| (*lo, *hi))
    }

    pub fn iter(&self) -> impl Iterator<Item = (LatentClass, f64, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The linear reduction of the monotone composition table.
///
/// Exposes the coefficients, the feasible range of the free parameter, and
/// the induced distribution at any admissible parameter value.
#[derive(Debug, Clone, Copy)]
pub struct MonotoneSystem {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub pi_0000: f64,
    pub pi_1111: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl MonotoneSystem {
    pub fn from_rates(d: &CellRates) -> Result<Self> {
        let (d00, d01, d10, d11) = d.as_tuple();
        let a = d11 - d01;
        let b = d11 - d10;
        let c = d11 + d00 - d01 - d10;
        let (pi_0000, pi_1111) = identified_masses(d);
        let t_min = c.max(0.0);
        let t_max = a.min(b);
        if a < -FEASIBILITY_TOL || b < -FEASIBILITY_TOL || t_min > t_max + FEASIBILITY_TOL {
            return Err(Error::Infeasible(format!(
                "monotone system has no solution: A={a:.3e}, B={b:.3e}, \
                 t range [{t_min:.3e}, {t_max:.3e}]"
            )));
        }
        // Clamp away harmless negative noise so downstream arithmetic stays
        // inside [0,1].
        let t_max = t_max.max(t_min);
        Ok(Self {
            a: a.max(0.0),
            b: b.max(0.0),
            c,
            pi_0000,
            pi_1111,
            t_min,
            t_max,
        })
    }

    /// The six classes in canonical order with their masses at parameter `t`.
    pub fn distribution_at(&self, t: f64) -> Result<ClassDistribution> {
        let probs = [
            self.pi_0000,
            t,
            (self.a - t).max(0.0),
            (self.b - t).max(0.0),
            (t - self.c).max(0.0),
            self.pi_1111,
        ];
        ClassDistribution::new(&enumerate_classes(true), &probs)
    }

    /// Clamp a parameter value into the feasible range.
    pub fn clamp(&self, t: f64) -> f64 {
        t.clamp(self.t_min, self.t_max)
    }
}

/// Interval identification of the six class probabilities under monotone
/// response. Errors when the observed rates are incompatible with
/// monotonicity beyond `FEASIBILITY_TOL`.
pub fn class_bounds_mono(d: &CellRates) -> Result<IntervalBounds> {
    let sys = MonotoneSystem::from_rates(d)?;
    let (lo, hi) = (sys.t_min, sys.t_max);
    let cls = |s: &str| s.parse::<LatentClass>().unwrap();
    Ok(IntervalBounds::new(vec![
        (cls("0000"), sys.pi_0000, sys.pi_0000),
        (cls("0001"), lo, hi),
        (cls("0011"), sys.a - hi, sys.a - lo),
        (cls("0101"), sys.b - hi, sys.b - lo),
        (cls("0111"), lo - sys.c, hi - sys.c),
        (cls("1111"), sys.pi_1111, sys.pi_1111),
    ]))
}

/// Interval identification of the posterior class probabilities given fully
/// specified evidence: each compatible-class interval is the prior interval
/// divided by the evidence-cell mass, with endpoints taken jointly at the
/// extremes of the free parameter.
pub fn posterior_bounds(d: &CellRates, ev: Evidence) -> Result<IntervalBounds> {
    let Evidence::Observed { z, m, y } = ev else {
        return Err(Error::EmptyEvidence);
    };
    let sys = MonotoneSystem::from_rates(d)?;
    let mass = d.evidence_mass(z, m, y);
    if mass <= 0.0 {
        return Err(Error::ZeroDenominator { z, m, y });
    }
    let compat = compatible_classes(ev, true)?;
    let lo_dist = sys.distribution_at(sys.t_min)?;
    let hi_dist = sys.distribution_at(sys.t_max)?;
    let entries = compat
        .into_iter()
        .map(|g| {
            let p_lo = lo_dist.prob(g) / mass;
            let p_hi = hi_dist.prob(g) / mass;
            (g, p_lo.min(p_hi), p_lo.max(p_hi))
        })
        .collect();
    Ok(IntervalBounds::new(entries))
}
