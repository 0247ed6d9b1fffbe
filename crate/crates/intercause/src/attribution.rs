//! Retrospective attribution: posterior class probabilities given observed
//! evidence, their refinement by the secondary outcome, posterior-vs-W
//! curves with crossing detection, and normative responsibility shares.

use crate::data::Dataset;
use crate::em::MixtureModelParams;
use crate::error::{Error, Result};
use crate::latent::{ClassDistribution, Evidence, LatentClass};
use crate::rates::CellRates;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Evidence extended with an observed secondary-outcome value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedEvidence {
    pub ev: Evidence,
    pub w: f64,
}

impl ExtendedEvidence {
    pub fn new(ev: Evidence, w: f64) -> Result<Self> {
        if ev.is_empty() {
            return Err(Error::EmptyEvidence);
        }
        if !w.is_finite() {
            return Err(Error::InvalidConfig(format!("w must be finite, got {w}")));
        }
        Ok(Self { ev, w })
    }
}

/// Posterior class distribution given evidence, from a class distribution
/// and per-cell rates: the prior restricted to compatible classes and
/// divided by the evidence-cell mass. Empty evidence returns the prior.
///
/// The prior must be consistent with the rates: the compatible-class mass
/// has to agree with the evidence-cell probability to within 1e-6.
pub fn posterior_given_evidence(
    pi: &ClassDistribution,
    d: &CellRates,
    ev: Evidence,
) -> Result<ClassDistribution> {
    let Evidence::Observed { z, m, y } = ev else {
        return Ok(pi.clone());
    };
    let mass = d.evidence_mass(z, m, y);
    if mass <= 0.0 {
        return Err(Error::ZeroDenominator { z, m, y });
    }
    let cell = ev.cell().unwrap();
    let compat: Vec<LatentClass> = pi
        .classes()
        .iter()
        .copied()
        .filter(|&g| crate::latent::outcome_under(g, cell) == y)
        .collect();
    let support_mass: f64 = compat.iter().map(|&g| pi.prob(g)).sum();
    if (support_mass - mass).abs() > 1e-6 {
        return Err(Error::InvalidDistribution(format!(
            "class distribution implies evidence mass {support_mass:.8} but rates give {mass:.8}"
        )));
    }
    let probs: Vec<f64> = compat.iter().map(|&g| pi.prob(g) / support_mass).collect();
    ClassDistribution::new(&compat, &probs)
}

/// Bayes update of an evidence posterior by per-class log densities of the
/// secondary outcome at the observed value.
///
/// `log_density(class)` must return the log density of W = w for every
/// class carried by `post`; a class without a density is a contract
/// violation. A total density of zero means w sits outside the model's
/// numerical support.
pub fn posterior_given_extended<F>(
    log_density: F,
    post: &ClassDistribution,
    ext: &ExtendedEvidence,
) -> Result<ClassDistribution>
where
    F: Fn(LatentClass) -> Option<f64>,
{
    if ext.ev.is_empty() {
        return Err(Error::EmptyEvidence);
    }
    let mut terms: Vec<(LatentClass, f64)> = Vec::with_capacity(post.classes().len());
    for (g, p) in post.iter() {
        let ld = log_density(g).ok_or_else(|| {
            Error::InvalidConfig(format!("no component density for class {g}"))
        })?;
        let term = if p > 0.0 { p.ln() + ld } else { f64::NEG_INFINITY };
        terms.push((g, term));
    }
    let mx = terms
        .iter()
        .map(|&(_, v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return Err(Error::ZeroDensity { w: ext.w });
    }
    let lse = mx + terms.iter().map(|&(_, v)| (v - mx).exp()).sum::<f64>().ln();
    let classes: Vec<LatentClass> = terms.iter().map(|&(g, _)| g).collect();
    let probs: Vec<f64> = terms.iter().map(|&(_, v)| (v - lse).exp()).collect();
    ClassDistribution::new(&classes, &probs)
}

/// Attribution-share table: per class, the fraction of an outcome assigned
/// to each named cause; the per-class remainder is implicitly "other".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMatrix {
    pub causes: Vec<String>,
    pub shares: BTreeMap<LatentClass, BTreeMap<String, f64>>,
}

impl AttributionMatrix {
    /// The default two-cause split for the six monotone classes: the
    /// synergistic and parallel classes split evenly, each single-exposure
    /// class is fully its own exposure, and the never/always classes carry
    /// no exposure responsibility.
    pub fn default_two_cause() -> Self {
        let mut shares = BTreeMap::new();
        let entry = |pairs: &[(&str, f64)]| -> BTreeMap<String, f64> {
            pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
        };
        let cls = |s: &str| s.parse::<LatentClass>().unwrap();
        shares.insert(cls("0000"), entry(&[]));
        shares.insert(cls("0001"), entry(&[("z", 0.5), ("m", 0.5)]));
        shares.insert(cls("0011"), entry(&[("z", 1.0)]));
        shares.insert(cls("0101"), entry(&[("m", 1.0)]));
        shares.insert(cls("0111"), entry(&[("z", 0.5), ("m", 0.5)]));
        shares.insert(cls("1111"), entry(&[]));
        Self {
            causes: vec!["z".into(), "m".into()],
            shares,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (g, row) in &self.shares {
            let mut total = 0.0;
            for (cause, &v) in row {
                if !self.causes.contains(cause) {
                    return Err(Error::InvalidConfig(format!(
                        "class {g} references unknown cause {cause:?}"
                    )));
                }
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidConfig(format!(
                        "share of {cause:?} for class {g} is {v}, outside [0,1]"
                    )));
                }
                total += v;
            }
            if total > 1.0 + 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "shares for class {g} sum to {total}, above 1"
                )));
            }
        }
        Ok(())
    }
}

/// Label used for the unallocated remainder of responsibility.
pub const OTHER_CAUSE: &str = "other";

/// Fold a posterior with an attribution matrix into per-cause totals; the
/// remainder up to one is reported under [`OTHER_CAUSE`].
pub fn responsibility_shares(
    post: &ClassDistribution,
    attr: &AttributionMatrix,
) -> Result<BTreeMap<String, f64>> {
    attr.validate()?;
    for (g, p) in post.iter() {
        if p > 0.0 && !attr.shares.contains_key(&g) {
            return Err(Error::InvalidConfig(format!(
                "posterior class {g} has no attribution row"
            )));
        }
    }
    let mut totals: BTreeMap<String, f64> =
        attr.causes.iter().map(|c| (c.clone(), 0.0)).collect();
    for (g, p) in post.iter() {
        if p == 0.0 {
            continue;
        }
        if let Some(row) = attr.shares.get(&g) {
            for (cause, &share) in row {
                *totals.get_mut(cause).unwrap() += p * share;
            }
        }
    }
    let allocated: f64 = totals.values().sum();
    totals.insert(OTHER_CAUSE.to_string(), (1.0 - allocated).max(0.0));
    Ok(totals)
}

/// A crossing point: the location where the leading class changes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub w: f64,
    pub from: LatentClass,
    pub to: LatentClass,
}

/// Posterior probabilities of the compatible classes along a grid of
/// secondary-outcome values, with the detected leading-class crossings.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorCurve {
    pub evidence: String,
    pub classes: Vec<LatentClass>,
    pub w_grid: Vec<f64>,
    /// probs[i][k] = posterior of classes[k] at w_grid[i].
    pub probs: Vec<Vec<f64>>,
    pub crossings: Vec<Crossing>,
}

/// Attribution queries against a fitted mixture model, aggregating per-unit
/// posteriors over the units that match the evidence, so covariates are
/// averaged out exactly as the estimation procedure defines.
pub struct ModelAttribution<'a> {
    params: &'a MixtureModelParams,
    data: &'a Dataset,
}

impl<'a> ModelAttribution<'a> {
    pub fn new(params: &'a MixtureModelParams, data: &'a Dataset) -> Result<Self> {
        if params.dim() != data.dim() {
            return Err(Error::DimensionMismatch {
                expected: params.dim(),
                got: data.dim(),
            });
        }
        Ok(Self { params, data })
    }

    fn evidence_units(&self, ev: Evidence) -> Result<Vec<usize>> {
        let Evidence::Observed { z, m, y } = ev else {
            return Err(Error::EmptyEvidence);
        };
        let units: Vec<usize> = self
            .data
            .records()
            .iter()
            .enumerate()
            .filter(|(_, r)| r.z == z && r.m == m && r.y == y)
            .map(|(i, _)| i)
            .collect();
        if units.is_empty() {
            return Err(Error::ZeroDenominator { z, m, y });
        }
        Ok(units)
    }

    fn compatible_positions(&self, ev: Evidence) -> Result<Vec<usize>> {
        let cell = ev.cell().ok_or(Error::EmptyEvidence)?;
        let y = ev.outcome().unwrap();
        Ok(self
            .params
            .classes
            .iter()
            .enumerate()
            .filter(|(_, &g)| crate::latent::outcome_under(g, cell) == y)
            .map(|(pos, _)| pos)
            .collect())
    }

    /// Per-unit renormalized prior over the compatible classes.
    fn unit_posterior(&self, unit: usize, positions: &[usize]) -> Vec<f64> {
        let lp = self.params.log_class_prior(&self.data.records()[unit].x);
        let mut vals: Vec<f64> = positions.iter().map(|&p| lp[p].exp()).collect();
        let total: f64 = vals.iter().sum();
        for v in &mut vals {
            *v /= total;
        }
        vals
    }

    /// Posterior class probabilities given evidence: the average of the
    /// per-unit renormalized priors over the units showing that evidence.
    /// Empty evidence returns the prior averaged over the whole sample.
    pub fn posterior_given_evidence(&self, ev: Evidence) -> Result<ClassDistribution> {
        if ev.is_empty() {
            let k = self.params.n_classes();
            let mut acc = vec![0.0; k];
            for r in self.data.records() {
                let lp = self.params.log_class_prior(&r.x);
                for (a, l) in acc.iter_mut().zip(&lp) {
                    *a += l.exp();
                }
            }
            let n = self.data.len() as f64;
            for a in &mut acc {
                *a /= n;
            }
            return ClassDistribution::new(&self.params.classes, &acc);
        }
        let units = self.evidence_units(ev)?;
        let positions = self.compatible_positions(ev)?;
        let mut acc = vec![0.0; positions.len()];
        for &i in &units {
            for (a, q) in acc.iter_mut().zip(self.unit_posterior(i, &positions)) {
                *a += q;
            }
        }
        let n = units.len() as f64;
        for a in &mut acc {
            *a /= n;
        }
        let classes: Vec<LatentClass> =
            positions.iter().map(|&p| self.params.classes[p]).collect();
        ClassDistribution::new(&classes, &acc)
    }

    /// Joint value pr(W = w, G = g | evidence) averaged over the evidence
    /// units, for each compatible class.
    fn joint_at(
        &self,
        units: &[usize],
        positions: &[usize],
        cell: crate::latent::ExposureCell,
        w: f64,
    ) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; positions.len()];
        for &i in units {
            let r = &self.data.records()[i];
            let q = self.unit_posterior(i, positions);
            for (k, &pos) in positions.iter().enumerate() {
                let comp = self.params.component(cell, pos).ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "component for cell {cell}, class {} not instantiated",
                        self.params.classes[pos]
                    ))
                })?;
                acc[k] += q[k] * comp.log_density(&r.x, w).exp();
            }
        }
        let n = units.len() as f64;
        for a in &mut acc {
            *a /= n;
        }
        Ok(acc)
    }

    /// Posterior refined by an observed secondary-outcome value.
    pub fn posterior_given_extended(&self, ext: &ExtendedEvidence) -> Result<ClassDistribution> {
        let units = self.evidence_units(ext.ev)?;
        let positions = self.compatible_positions(ext.ev)?;
        let cell = ext.ev.cell().unwrap();
        let joint = self.joint_at(&units, &positions, cell, ext.w)?;
        let total: f64 = joint.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroDensity { w: ext.w });
        }
        let classes: Vec<LatentClass> =
            positions.iter().map(|&p| self.params.classes[p]).collect();
        let probs: Vec<f64> = joint.iter().map(|j| j / total).collect();
        ClassDistribution::new(&classes, &probs)
    }

    /// Evaluate the refined posterior along `w_grid` and locate the points
    /// where the leading class changes, refined by bisection.
    pub fn posterior_curve(&self, ev: Evidence, w_grid: &[f64]) -> Result<PosteriorCurve> {
        if w_grid.is_empty() {
            return Err(Error::InvalidConfig("w grid is empty".into()));
        }
        if w_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig("w grid must be strictly increasing".into()));
        }
        let units = self.evidence_units(ev)?;
        let positions = self.compatible_positions(ev)?;
        let cell = ev.cell().unwrap();
        let classes: Vec<LatentClass> =
            positions.iter().map(|&p| self.params.classes[p]).collect();

        let posterior_at = |w: f64| -> Result<Vec<f64>> {
            let joint = self.joint_at(&units, &positions, cell, w)?;
            let total: f64 = joint.iter().sum();
            if total <= 0.0 {
                return Err(Error::ZeroDensity { w });
            }
            Ok(joint.iter().map(|j| j / total).collect())
        };

        let mut probs = Vec::with_capacity(w_grid.len());
        for &w in w_grid {
            probs.push(posterior_at(w)?);
        }

        let argmax = |row: &[f64]| -> usize {
            row.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap()
        };

        let mut crossings = Vec::new();
        if classes.len() > 1 {
            for i in 1..w_grid.len() {
                let prev = argmax(&probs[i - 1]);
                let next = argmax(&probs[i]);
                if prev == next {
                    continue;
                }
                // Bisect on the sign of the probability difference between
                // the two swapping classes.
                let (mut lo, mut hi) = (w_grid[i - 1], w_grid[i]);
                for _ in 0..40 {
                    let mid = 0.5 * (lo + hi);
                    let pm = posterior_at(mid)?;
                    if pm[prev] >= pm[next] {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                crossings.push(Crossing {
                    w: 0.5 * (lo + hi),
                    from: classes[prev],
                    to: classes[next],
                });
            }
        }
        Ok(PosteriorCurve {
            evidence: ev.to_string(),
            classes,
            w_grid: w_grid.to_vec(),
            probs,
            crossings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::{Component, Restriction};
    use crate::latent::{enumerate_classes, ExposureCell};
    use approx::assert_abs_diff_eq;

    fn cls(s: &str) -> LatentClass {
        s.parse().unwrap()
    }

    /// The published posterior for the both-exposures case.
    fn table_posterior() -> ClassDistribution {
        ClassDistribution::new(
            &[cls("0001"), cls("0011"), cls("0101"), cls("0111"), cls("1111")],
            &[0.7101, 0.1416, 0.0784, 0.0435, 0.0264],
        )
        .unwrap()
    }

    #[test]
    fn responsibility_shares_match_worked_example() {
        let post = table_posterior();
        let attr = AttributionMatrix::default_two_cause();
        let shares = responsibility_shares(&post, &attr).unwrap();
        assert_abs_diff_eq!(shares["z"], 0.5184, epsilon = 1e-10);
        assert_abs_diff_eq!(shares["m"], 0.4552, epsilon = 1e-10);
        assert_abs_diff_eq!(shares[OTHER_CAUSE], 0.0264, epsilon = 1e-10);
        let total: f64 = shares.values().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn doomed_posterior_is_all_other() {
        let post = ClassDistribution::new(&[cls("1111")], &[1.0]).unwrap();
        let attr = AttributionMatrix::default_two_cause();
        let shares = responsibility_shares(&post, &attr).unwrap();
        assert_eq!(shares[OTHER_CAUSE], 1.0);
        assert_eq!(shares["z"], 0.0);
        assert_eq!(shares["m"], 0.0);
    }

    #[test]
    fn opposite_pure_causes_split_evenly() {
        let post =
            ClassDistribution::new(&[cls("0011"), cls("0101")], &[0.5, 0.5]).unwrap();
        let attr = AttributionMatrix::default_two_cause();
        let shares = responsibility_shares(&post, &attr).unwrap();
        assert_abs_diff_eq!(shares["z"], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(shares["m"], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(shares[OTHER_CAUSE], 0.0, epsilon = 1e-12);
    }

    fn asbestos_rates() -> CellRates {
        crate::rates::rates_from_counts(
            &crate::rates::CellCounts::new([6, 5, 118, 141], [5057, 749, 12383, 3130]).unwrap(),
        )
    }

    #[test]
    fn evidence_posterior_from_prior_and_rates() {
        let d = asbestos_rates();
        let prior = crate::maxent::maxent_mono(&d).unwrap();
        let post = posterior_given_evidence(&prior, &d, Evidence::observed(1, 1, 1)).unwrap();
        let total: f64 = post.probs().iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(post.prob(cls("1111")), 0.0264, epsilon = 1e-4);

        let single = posterior_given_evidence(&prior, &d, Evidence::observed(0, 0, 1)).unwrap();
        assert_abs_diff_eq!(single.prob(cls("1111")), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_evidence_is_identity() {
        let d = asbestos_rates();
        let prior = crate::maxent::maxent_mono(&d).unwrap();
        let post = posterior_given_evidence(&prior, &d, Evidence::Empty).unwrap();
        assert_eq!(post, prior);
    }

    #[test]
    fn inconsistent_prior_is_rejected() {
        let d = asbestos_rates();
        let uniform = ClassDistribution::new(
            &enumerate_classes(true),
            &[1.0 / 6.0; 6],
        )
        .unwrap();
        assert!(posterior_given_evidence(&uniform, &d, Evidence::observed(1, 1, 1)).is_err());
    }

    #[test]
    fn law_of_total_probability_recovers_prior() {
        let d = asbestos_rates();
        let prior = crate::maxent::maxent_mono(&d).unwrap();
        for z in 0..2 {
            for m in 0..2 {
                let mass1 = d.evidence_mass(z, m, 1);
                let p1 = posterior_given_evidence(&prior, &d, Evidence::observed(z, m, 1)).unwrap();
                let p0 = posterior_given_evidence(&prior, &d, Evidence::observed(z, m, 0)).unwrap();
                for g in enumerate_classes(true) {
                    let mixed = mass1 * p1.prob(g) + (1.0 - mass1) * p0.prob(g);
                    assert_abs_diff_eq!(mixed, prior.prob(g), epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn extended_update_with_constant_densities_is_identity() {
        let post = table_posterior();
        let ext = ExtendedEvidence::new(Evidence::observed(1, 1, 1), 70.0).unwrap();
        let updated = posterior_given_extended(|_| Some(-1.3), &post, &ext).unwrap();
        for (g, p) in post.iter() {
            assert_abs_diff_eq!(updated.prob(g), p, epsilon = 1e-12);
        }
    }

    #[test]
    fn extended_update_single_class_stays_certain() {
        let post = ClassDistribution::new(&[cls("1111")], &[1.0]).unwrap();
        for w in [-100.0, 0.0, 55.5, 300.0] {
            let ext = ExtendedEvidence::new(Evidence::observed(0, 0, 1), w).unwrap();
            let updated =
                posterior_given_extended(|_| Some(-0.5 * w * w - 1.0), &post, &ext).unwrap();
            assert_abs_diff_eq!(updated.prob(cls("1111")), 1.0, epsilon = 1e-12);
        }
    }

    /// Intercept-only model over two classes for curve tests: symmetric
    /// components at -1 and +1 with equal priors cross exactly at zero.
    fn two_class_model() -> (MixtureModelParams, Dataset) {
        let classes = vec![cls("0101"), cls("0111")];
        let mut beta = std::collections::BTreeMap::new();
        let cell = ExposureCell::new(0, 1);
        beta.insert((cell.index(), 0), Component { mu_coeffs: vec![1.0], sigma2: 1.0 });
        beta.insert((cell.index(), 1), Component { mu_coeffs: vec![-1.0], sigma2: 1.0 });
        let params = MixtureModelParams {
            classes,
            theta: vec![vec![0.0], vec![0.0]],
            beta,
            restriction: Restriction::None,
        };
        let records = vec![
            crate::data::UnitRecord { z: 0, m: 1, y: 1, w: 0.3, x: vec![1.0] },
            crate::data::UnitRecord { z: 0, m: 1, y: 1, w: -0.8, x: vec![1.0] },
        ];
        (params, Dataset::new(records).unwrap())
    }

    #[test]
    fn symmetric_two_class_curve_crosses_at_zero() {
        let (params, data) = two_class_model();
        let ma = ModelAttribution::new(&params, &data).unwrap();
        let grid: Vec<f64> = (0..81).map(|i| -2.0 + i as f64 * 0.05).collect();
        let curve = ma.posterior_curve(Evidence::observed(0, 1, 1), &grid).unwrap();
        assert_eq!(curve.crossings.len(), 1);
        let crossing = curve.crossings[0];
        assert_abs_diff_eq!(crossing.w, 0.0, epsilon = 1e-9);
        // Low w favors the component centered at -1.
        assert_eq!(crossing.from, cls("0111"));
        assert_eq!(crossing.to, cls("0101"));
        for row in &curve.probs {
            let total: f64 = row.iter().sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn curve_rejects_bad_grids() {
        let (params, data) = two_class_model();
        let ma = ModelAttribution::new(&params, &data).unwrap();
        assert!(ma.posterior_curve(Evidence::observed(0, 1, 1), &[]).is_err());
        assert!(ma
            .posterior_curve(Evidence::observed(0, 1, 1), &[0.0, 0.0, 1.0])
            .is_err());
    }

    #[test]
    fn model_extended_posterior_reduces_to_bayes_for_intercept_only() {
        let (params, data) = two_class_model();
        let ma = ModelAttribution::new(&params, &data).unwrap();
        let ev = Evidence::observed(0, 1, 1);
        let base = ma.posterior_given_evidence(ev).unwrap();
        let ext = ExtendedEvidence::new(ev, 0.7).unwrap();
        let direct = posterior_given_extended(
            |g| {
                let pos = params.class_position(g)?;
                let comp = params.component(ExposureCell::new(0, 1), pos)?;
                Some(comp.log_density(&[1.0], 0.7))
            },
            &base,
            &ext,
        )
        .unwrap();
        let aggregated = ma.posterior_given_extended(&ext).unwrap();
        for (g, p) in direct.iter() {
            assert_abs_diff_eq!(aggregated.prob(g), p, epsilon = 1e-12);
        }
    }

    #[test]
    fn integrating_extended_posterior_recovers_evidence_posterior() {
        // Monte Carlo over W drawn from the fitted mixture given the
        // evidence: E[posterior(w)] equals the evidence posterior.
        let (params, data) = two_class_model();
        let ma = ModelAttribution::new(&params, &data).unwrap();
        let ev = Evidence::observed(0, 1, 1);
        let base = ma.posterior_given_evidence(ev).unwrap();
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let mut acc = vec![0.0; 2];
        let n = 200_000;
        for _ in 0..n {
            // Draw class from the posterior, then w from its component.
            let u: f64 = rng.random();
            let (pos, mean) = if u < base.prob(cls("0101")) { (0usize, 1.0) } else { (1usize, -1.0) };
            let _ = pos;
            let w: f64 = mean
                + rand_distr::Distribution::sample(
                    &rand_distr::Normal::new(0.0, 1.0).unwrap(),
                    &mut rng,
                );
            let ext = ExtendedEvidence::new(ev, w).unwrap();
            let p = ma.posterior_given_extended(&ext).unwrap();
            acc[0] += p.prob(cls("0101"));
            acc[1] += p.prob(cls("0111"));
        }
        assert_abs_diff_eq!(acc[0] / n as f64, base.prob(cls("0101")), epsilon = 1e-3);
        assert_abs_diff_eq!(acc[1] / n as f64, base.prob(cls("0111")), epsilon = 1e-3);
    }
}
