//! Maximum-entropy point estimation of the six monotone class probabilities.
//!
//! The constraint set leaves a single free parameter `t` (see
//! [`crate::bounds`]), so the entropy objective reduces to a strictly concave
//! one-dimensional function. Its interior stationary point solves
//! `t (t - C) = (A - t)(B - t)`, i.e. `t* = AB / (A + B - C)`; when `t*`
//! falls outside the feasible interval the maximizing endpoint is returned.

use crate::bounds::MonotoneSystem;
use crate::error::{Error, Result};
use crate::latent::{compatible_classes, ClassDistribution, Evidence};
use crate::rates::CellRates;

/// Entropy of the full six-class distribution as a function of the free
/// parameter. The two point-identified masses only shift it by a constant
/// but are included so the value is the distribution's actual entropy.
pub fn entropy_at(sys: &MonotoneSystem, t: f64) -> f64 {
    let h = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    h(sys.pi_0000)
        + h(t)
        + h(sys.a - t)
        + h(sys.b - t)
        + h(t - sys.c)
        + h(sys.pi_1111)
}

/// The entropy-maximizing value of the free parameter.
pub fn maxent_parameter(sys: &MonotoneSystem) -> f64 {
    let denom = sys.a + sys.b - sys.c;
    if denom <= 0.0 {
        // Degenerate system: the feasible interval is a single point.
        return sys.t_min;
    }
    let t_star = sys.a * sys.b / denom;
    if t_star > sys.t_min && t_star < sys.t_max {
        t_star
    } else if entropy_at(sys, sys.t_min) >= entropy_at(sys, sys.t_max) {
        sys.t_min
    } else {
        sys.t_max
    }
}

/// Maximum-entropy estimate of the six class probabilities.
pub fn maxent_mono(d: &CellRates) -> Result<ClassDistribution> {
    let sys = MonotoneSystem::from_rates(d)?;
    sys.distribution_at(maxent_parameter(&sys))
}

/// Maximum-entropy estimate conditioned on fully specified evidence: the
/// prior estimate restricted to compatible classes and divided by the
/// evidence-cell mass.
pub fn maxent_posterior(d: &CellRates, ev: Evidence) -> Result<ClassDistribution> {
    let Evidence::Observed { z, m, y } = ev else {
        return Err(Error::EmptyEvidence);
    };
    let prior = maxent_mono(d)?;
    let mass = d.evidence_mass(z, m, y);
    if mass <= 0.0 {
        return Err(Error::ZeroDenominator { z, m, y });
    }
    let compat = compatible_classes(ev, true)?;
    let probs: Vec<f64> = compat.iter().map(|&g| prior.prob(g) / mass).collect();
    // Rates derived from a feasible system make these sum to one exactly up
    // to rounding; renormalize the rounding away.
    let total: f64 = probs.iter().sum();
    let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
    ClassDistribution::new(&compat, &probs)
}

/// Golden-section maximization of the entropy over the feasible interval.
/// Kept public as the independent check for the closed form.
pub fn maxent_parameter_golden(sys: &MonotoneSystem, tol: f64) -> f64 {
    let (mut lo, mut hi) = (sys.t_min, sys.t_max);
    if hi - lo < tol {
        return 0.5 * (lo + hi);
    }
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = entropy_at(sys, x1);
    let mut f2 = entropy_at(sys, x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = entropy_at(sys, x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = entropy_at(sys, x1);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::{enumerate_classes, LatentClass};
    use crate::rates::{rates_from_counts, CellCounts};
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn asbestos_rates() -> CellRates {
        rates_from_counts(&CellCounts::new([6, 5, 118, 141], [5057, 749, 12383, 3130]).unwrap())
    }

    fn cls(s: &str) -> LatentClass {
        s.parse().unwrap()
    }

    #[test]
    fn asbestos_maxent_estimates() {
        let dist = maxent_mono(&asbestos_rates()).unwrap();
        assert_abs_diff_eq!(100.0 * dist.prob(cls("0001")), 3.11, epsilon = 0.01);
        assert_abs_diff_eq!(100.0 * dist.prob(cls("0011")), 0.73, epsilon = 0.01);
        assert_abs_diff_eq!(100.0 * dist.prob(cls("0101")), 0.44, epsilon = 0.01);
        assert_abs_diff_eq!(100.0 * dist.prob(cls("0111")), 0.10, epsilon = 0.01);
        assert_abs_diff_eq!(100.0 * dist.prob(cls("0000")), 95.50, epsilon = 0.01);
        assert_abs_diff_eq!(100.0 * dist.prob(cls("1111")), 0.12, epsilon = 0.01);
    }

    #[test]
    fn symmetric_rates_give_equal_residual_masses() {
        // delta_01 = delta_10 makes A = B, so the two single-exposure
        // classes carry the same mass at the optimum.
        let d = CellRates::new([0.05, 0.20, 0.20, 0.50]).unwrap();
        let dist = maxent_mono(&d).unwrap();
        assert_abs_diff_eq!(
            dist.prob(cls("0011")),
            dist.prob(cls("0101")),
            epsilon = 1e-12
        );
    }

    #[test]
    fn closed_form_matches_golden_section_on_random_instances() {
        let mut rng = StdRng::seed_from_u64(21);
        let mut tested = 0;
        while tested < 200 {
            let d00: f64 = rng.random_range(0.0..0.3);
            let d11: f64 = rng.random_range(d00..1.0);
            let d01: f64 = rng.random_range(d00..=d11);
            let d10: f64 = rng.random_range(d00..=d11);
            let d = CellRates::new([d00, d01, d10, d11]).unwrap();
            let Ok(sys) = MonotoneSystem::from_rates(&d) else {
                continue;
            };
            if sys.t_max - sys.t_min < 1e-6 {
                continue;
            }
            tested += 1;
            let closed = maxent_parameter(&sys);
            let golden = maxent_parameter_golden(&sys, 1e-12);
            assert_abs_diff_eq!(closed, golden, epsilon = 1e-8);
        }
    }

    #[test]
    fn interior_stationarity_identity() {
        let sys = MonotoneSystem::from_rates(&asbestos_rates()).unwrap();
        let t = maxent_parameter(&sys);
        assert!(t > sys.t_min && t < sys.t_max);
        assert_abs_diff_eq!(
            (sys.a - t) * (sys.b - t),
            t * (t - sys.c),
            epsilon = 1e-10
        );
    }

    #[test]
    fn estimate_lies_strictly_inside_open_bounds() {
        let d = asbestos_rates();
        let dist = maxent_mono(&d).unwrap();
        let bounds = crate::bounds::class_bounds_mono(&d).unwrap();
        for (g, lo, hi) in bounds.iter() {
            let p = dist.prob(g);
            if hi - lo > 1e-12 {
                assert!(p > lo && p < hi, "class {g}: {p} not inside ({lo}, {hi})");
            } else {
                assert_abs_diff_eq!(p, lo, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn entropy_beats_random_feasible_points() {
        let sys = MonotoneSystem::from_rates(&asbestos_rates()).unwrap();
        let t_star = maxent_parameter(&sys);
        let h_star = entropy_at(&sys, t_star);
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..1000 {
            let t = rng.random_range(sys.t_min..=sys.t_max);
            assert!(entropy_at(&sys, t) <= h_star + 1e-12);
        }
    }

    #[test]
    fn output_satisfies_cell_constraints() {
        let d = asbestos_rates();
        let dist = maxent_mono(&d).unwrap();
        let (d00, d01, d10, d11) = d.as_tuple();
        let p = |s: &str| dist.prob(cls(s));
        assert_abs_diff_eq!(p("1111"), d00, epsilon = 1e-10);
        assert_abs_diff_eq!(p("0101") + p("0111") + p("1111"), d01, epsilon = 1e-10);
        assert_abs_diff_eq!(p("0011") + p("0111") + p("1111"), d10, epsilon = 1e-10);
        assert_abs_diff_eq!(p("0000"), 1.0 - d11, epsilon = 1e-10);
    }

    #[test]
    fn degenerate_interval_returns_the_single_point() {
        let d = CellRates::new([0.1, 0.1, 0.4, 0.4]).unwrap();
        let dist = maxent_mono(&d).unwrap();
        // B = 0 pins t = 0: only the identified masses plus the
        // single-exposure and parallel structure remain.
        assert_abs_diff_eq!(dist.prob(cls("0001")), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dist.prob(cls("0101")), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn posterior_conditions_and_normalizes() {
        let d = asbestos_rates();
        let post = maxent_posterior(&d, Evidence::observed(1, 1, 1)).unwrap();
        assert_abs_diff_eq!(100.0 * post.prob(cls("0011")), 16.20, epsilon = 0.01);
        assert_abs_diff_eq!(100.0 * post.prob(cls("1111")), 2.64, epsilon = 0.01);
        let total: f64 = post.probs().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);

        let single = maxent_posterior(&d, Evidence::observed(0, 0, 1)).unwrap();
        assert_eq!(single.classes(), &[cls("1111")]);
        assert_abs_diff_eq!(single.prob(cls("1111")), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn posterior_given_no_outcome_renormalizes_prior() {
        let d = asbestos_rates();
        let prior = maxent_mono(&d).unwrap();
        let post = maxent_posterior(&d, Evidence::observed(0, 0, 0)).unwrap();
        let (d00, _, _, _) = d.as_tuple();
        assert_eq!(post.classes().len(), 5);
        for g in enumerate_classes(true) {
            if g != cls("1111") {
                assert_abs_diff_eq!(post.prob(g), prior.prob(g) / (1.0 - d00), epsilon = 1e-10);
            }
        }
        let total: f64 = post.probs().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }
}
