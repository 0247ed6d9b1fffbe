//! Nonparametric bootstrap confidence intervals for arbitrary estimation
//! pipelines over unit-level data.

use crate::data::Dataset;
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

/// Bootstrap tuning knobs.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    /// Confidence level of the percentile interval.
    pub level: f64,
    /// Abort when more than this fraction of replicates fail.
    pub max_failure_rate: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 500,
            seed: 0,
            level: 0.95,
            max_failure_rate: 0.2,
        }
    }
}

/// Summary of one scalar estimand across replicates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EstimandSummary {
    /// Estimate on the original data.
    pub point: f64,
    /// Mean across successful replicates.
    pub mean: f64,
    /// Replicate standard deviation.
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Full bootstrap output: per-estimand summaries plus the failure count.
#[derive(Debug, Clone, Serialize)]
pub struct BootstrapResult {
    pub estimands: BTreeMap<String, EstimandSummary>,
    pub n_replicates: usize,
    pub n_failed: usize,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Run `estimator` on the original data and on `config.replicates` seeded
/// unit-level resamples (drawn with replacement), returning percentile
/// intervals and replicate standard errors per named estimand.
///
/// Replicates execute in parallel; each owns a counter-based substream, so
/// results do not depend on execution order. Estimator failures are
/// excluded and counted; exceeding the configured failure rate aborts.
pub fn bootstrap<F>(data: &Dataset, estimator: F, config: &BootstrapConfig) -> Result<BootstrapResult>
where
    F: Fn(&Dataset) -> Result<BTreeMap<String, f64>> + Sync,
{
    if config.replicates < 2 {
        return Err(Error::InvalidConfig(
            "bootstrap needs at least 2 replicates".into(),
        ));
    }
    if !(0.0..1.0).contains(&(1.0 - config.level)) || config.level <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "confidence level must lie in (0,1), got {}",
            config.level
        )));
    }
    let point = estimator(data)?;
    let n = data.len();

    let replicate_results: Vec<Option<BTreeMap<String, f64>>> = (0..config.replicates)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(b as u64 + 1);
            let indices: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let resample = data.subset(&indices).ok()?;
            estimator(&resample).ok()
        })
        .collect();

    let n_failed = replicate_results.iter().filter(|r| r.is_none()).count();
    if (n_failed as f64) > config.max_failure_rate * config.replicates as f64 {
        return Err(Error::BootstrapUnstable {
            failed: n_failed,
            total: config.replicates,
        });
    }

    let alpha = 1.0 - config.level;
    let mut estimands = BTreeMap::new();
    for (name, &pt) in &point {
        let mut vals: Vec<f64> = replicate_results
            .iter()
            .flatten()
            .filter_map(|r| r.get(name).copied())
            .filter(|v| v.is_finite())
            .collect();
        if vals.len() < 2 {
            return Err(Error::BootstrapUnstable {
                failed: config.replicates - vals.len(),
                total: config.replicates,
            });
        }
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / k;
        let se = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        estimands.insert(
            name.clone(),
            EstimandSummary {
                point: pt,
                mean,
                se,
                ci_low: percentile(&vals, alpha / 2.0),
                ci_high: percentile(&vals, 1.0 - alpha / 2.0),
            },
        );
    }
    Ok(BootstrapResult {
        estimands,
        n_replicates: config.replicates,
        n_failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::UnitRecord;

    fn numeric_dataset(n: usize) -> Dataset {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let records = (0..n)
            .map(|_| UnitRecord {
                z: 0,
                m: 0,
                y: 0,
                w: rng.random_range(-1.0..1.0) * 3.0 + 0.5,
                x: vec![1.0],
            })
            .collect();
        Dataset::new(records).unwrap()
    }

    #[test]
    fn constant_estimator_gives_degenerate_interval() {
        let data = numeric_dataset(50);
        let cfg = BootstrapConfig { replicates: 100, seed: 1, ..Default::default() };
        let out = bootstrap(
            &data,
            |_| Ok(BTreeMap::from([("c".to_string(), 42.0)])),
            &cfg,
        )
        .unwrap();
        let s = &out.estimands["c"];
        assert_eq!(s.se, 0.0);
        assert_eq!(s.ci_low, 42.0);
        assert_eq!(s.ci_high, 42.0);
        assert_eq!(out.n_failed, 0);
    }

    #[test]
    fn sample_mean_se_matches_classical_formula() {
        let data = numeric_dataset(400);
        let cfg = BootstrapConfig { replicates: 2000, seed: 7, ..Default::default() };
        let mean_est = |d: &Dataset| {
            let m = d.records().iter().map(|r| r.w).sum::<f64>() / d.len() as f64;
            Ok(BTreeMap::from([("mean".to_string(), m)]))
        };
        let out = bootstrap(&data, mean_est, &cfg).unwrap();
        let n = data.len() as f64;
        let mean = data.records().iter().map(|r| r.w).sum::<f64>() / n;
        let sd = (data.records().iter().map(|r| (r.w - mean).powi(2)).sum::<f64>() / (n - 1.0))
            .sqrt();
        let classical = sd / n.sqrt();
        let s = &out.estimands["mean"];
        assert!(
            (s.se - classical).abs() / classical < 0.1,
            "bootstrap se {} vs classical {}",
            s.se,
            classical
        );
        // The point estimate sits inside the percentile interval.
        assert!(s.ci_low <= s.point && s.point <= s.ci_high);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let data = numeric_dataset(100);
        let cfg = BootstrapConfig { replicates: 200, seed: 9, ..Default::default() };
        let est = |d: &Dataset| {
            let m = d.records().iter().map(|r| r.w).sum::<f64>() / d.len() as f64;
            let v = d.records().iter().map(|r| (r.w - m).powi(2)).sum::<f64>() / d.len() as f64;
            Ok(BTreeMap::from([("mean".into(), m), ("var".into(), v)]))
        };
        let a = bootstrap(&data, est, &cfg).unwrap();
        let b = bootstrap(&data, est, &cfg).unwrap();
        for (name, s) in &a.estimands {
            let t = &b.estimands[name];
            assert_eq!(s.ci_low, t.ci_low);
            assert_eq!(s.ci_high, t.ci_high);
            assert_eq!(s.se, t.se);
        }
    }

    #[test]
    fn excessive_failures_abort() {
        let data = numeric_dataset(30);
        let cfg = BootstrapConfig { replicates: 100, seed: 3, ..Default::default() };
        let original_mean =
            data.records().iter().map(|r| r.w).sum::<f64>() / data.len() as f64;
        let flaky = move |d: &Dataset| {
            // Fail whenever the resample mean exceeds the original mean;
            // roughly half the replicates.
            let m = d.records().iter().map(|r| r.w).sum::<f64>() / d.len() as f64;
            if m > original_mean {
                Err(Error::AllStartsFailed)
            } else {
                Ok(BTreeMap::from([("m".to_string(), m)]))
            }
        };
        let r = bootstrap(&data, flaky, &cfg);
        match r {
            Err(Error::BootstrapUnstable { failed, total }) => {
                assert!(failed > 20);
                assert_eq!(total, 100);
            }
            other => panic!("expected instability, got {other:?}"),
        }
    }

    #[test]
    fn moderate_failures_are_reported_not_fatal() {
        let data = numeric_dataset(200);
        let cfg = BootstrapConfig { replicates: 100, seed: 11, ..Default::default() };
        let n = data.len() as f64;
        let mean = data.records().iter().map(|r| r.w).sum::<f64>() / n;
        let sd =
            (data.records().iter().map(|r| (r.w - mean).powi(2)).sum::<f64>() / n).sqrt();
        // Fails for resample means beyond ~1.5 standard errors: a small but
        // typically nonzero fraction.
        let cutoff = mean + 1.5 * sd / n.sqrt();
        let mostly_fine = move |d: &Dataset| {
            let m = d.records().iter().map(|r| r.w).sum::<f64>() / d.len() as f64;
            if m > cutoff {
                Err(Error::AllStartsFailed)
            } else {
                Ok(BTreeMap::from([("m".to_string(), m)]))
            }
        };
        let out = bootstrap(&data, mostly_fine, &cfg).unwrap();
        assert!(out.n_failed < 20);
        assert!(out.estimands.contains_key("m"));
    }

    #[test]
    fn point_within_interval_for_smooth_estimators() {
        let data = numeric_dataset(300);
        let cfg = BootstrapConfig { replicates: 300, seed: 5, ..Default::default() };
        let est = |d: &Dataset| {
            let m = d.records().iter().map(|r| r.w).sum::<f64>() / d.len() as f64;
            Ok(BTreeMap::from([("mean".to_string(), m)]))
        };
        let out = bootstrap(&data, est, &cfg).unwrap();
        let s = &out.estimands["mean"];
        assert!(s.ci_low <= s.point && s.point <= s.ci_high);
    }

    #[test]
    fn too_few_replicates_rejected() {
        let data = numeric_dataset(10);
        let cfg = BootstrapConfig { replicates: 1, ..Default::default() };
        assert!(bootstrap(&data, |_| Ok(BTreeMap::new()), &cfg).is_err());
    }
}
