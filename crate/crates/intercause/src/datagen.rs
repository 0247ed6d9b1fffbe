//! Seeded synthetic data generators: the covariate-driven simulation design
//! and the smoking/asbestos summary-data replica with a Gaussian-mixture
//! secondary outcome.
//!
//! All draws come from counter-based ChaCha streams keyed by the user seed,
//! with one substream per stratum in the replica so strata can be generated
//! independently and in any order.

use crate::data::{Dataset, UnitRecord};
use crate::error::{Error, Result};
use crate::latent::{enumerate_classes, outcome_under, ExposureCell, LatentClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, StudentT};
use serde::{Deserialize, Serialize};

/// Error distribution attached to the secondary-outcome regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorDist {
    Normal,
    T5,
    Uniform,
    Bernoulli,
    Gamma,
}

impl std::str::FromStr for ErrorDist {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(Self::Normal),
            "t5" => Ok(Self::T5),
            "uniform" => Ok(Self::Uniform),
            "bernoulli" => Ok(Self::Bernoulli),
            "gamma" => Ok(Self::Gamma),
            other => Err(Error::InvalidConfig(format!(
                "error distribution must be normal|t5|uniform|bernoulli|gamma, got {other:?}"
            ))),
        }
    }
}

impl ErrorDist {
    /// Draw one error standardized to mean zero and unit variance, before
    /// per-class scaling. The gamma draw (shape 2, rate 1/2) is centered by
    /// its mean 4; the others are symmetric around zero already.
    fn sample_standardized(self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ErrorDist::Normal => Normal::new(0.0, 1.0).unwrap().sample(rng),
            ErrorDist::T5 => {
                let t = StudentT::new(5.0).unwrap().sample(rng);
                t / (5.0f64 / 3.0).sqrt()
            }
            ErrorDist::Uniform => rng.random_range(-1.0..=1.0) / (1.0f64 / 3.0).sqrt(),
            ErrorDist::Bernoulli => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            ErrorDist::Gamma => {
                let g = Gamma::new(2.0, 2.0).unwrap().sample(rng);
                (g - 4.0) / 8.0f64.sqrt()
            }
        }
    }
}

/// Parameter block of the simulation design. Coefficient vectors are over
/// x = (1, x1, x2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Exposure-cell multinomial coefficients in cell order
    /// (0,0), (0,1), (1,0), (1,1); the first is the zero reference.
    pub alpha: [[f64; 3]; 4],
    /// Class multinomial coefficients over the six monotone classes in
    /// canonical order; the first is the zero reference.
    pub theta: [[f64; 3]; 6],
    /// Secondary-outcome regression coefficients per class.
    pub mu: [[f64; 3]; 6],
    /// Secondary-outcome error scale per class.
    pub sigma: [f64; 6],
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            alpha: [
                [0.00, 0.00, 0.00],
                [-0.36, -0.37, -0.26],
                [-0.28, -0.19, 0.29],
                [-0.28, -0.19, 0.29],
            ],
            theta: [
                [0.00, 0.00, 0.00],
                [-0.07, 0.36, 0.06],
                [0.03, -0.38, -0.37],
                [-0.19, 0.08, -0.27],
                [0.38, -0.03, 0.25],
                [-0.10, 0.27, 0.30],
            ],
            mu: [
                [-5.00, -1.77, -1.39],
                [-3.00, -1.46, 1.40],
                [-1.00, -1.72, -0.41],
                [1.00, 1.62, -1.29],
                [3.00, -1.08, 1.595],
                [5.00, 0.35, -0.06],
            ],
            sigma: [0.65, 1.38, 1.81, 1.17, 1.16, 1.39],
        }
    }
}

/// Configuration of one simulation draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub seed: u64,
    pub error_dist: ErrorDist,
    pub params: SimParams,
}

impl SimConfig {
    pub fn new(n: usize, seed: u64, error_dist: ErrorDist) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("sample size must be at least 1".into()));
        }
        Ok(Self {
            n,
            seed,
            error_dist,
            params: SimParams::default(),
        })
    }
}

fn softmax_draw(rng: &mut ChaCha8Rng, etas: &[f64]) -> usize {
    let mx = etas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = etas.iter().map(|e| (e - mx).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn dot3(c: &[f64; 3], x: &[f64; 3]) -> f64 {
    c[0] * x[0] + c[1] * x[1] + c[2] * x[2]
}

/// Generate a dataset from the simulation design, returning the units and
/// their ground-truth classes.
///
/// Covariates are standard normal; the exposure cell and latent class follow
/// multinomial-logistic models; the outcome is the class's potential outcome
/// in the drawn cell; the secondary outcome adds a standardized error scaled
/// by the class sigma.
pub fn generate_simulation(cfg: &SimConfig) -> Result<(Dataset, Vec<LatentClass>)> {
    if cfg.n == 0 {
        return Err(Error::InvalidConfig("sample size must be at least 1".into()));
    }
    let classes = enumerate_classes(true);
    let cells = ExposureCell::all();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std_normal = Normal::new(0.0, 1.0).unwrap();

    let mut records = Vec::with_capacity(cfg.n);
    let mut labels = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let x = [1.0, std_normal.sample(&mut rng), std_normal.sample(&mut rng)];
        let cell_etas: Vec<f64> = cfg.params.alpha.iter().map(|a| dot3(a, &x)).collect();
        let cell = cells[softmax_draw(&mut rng, &cell_etas)];
        let class_etas: Vec<f64> = cfg.params.theta.iter().map(|t| dot3(t, &x)).collect();
        let class_idx = softmax_draw(&mut rng, &class_etas);
        let g = classes[class_idx];
        let y = outcome_under(g, cell);
        let eps = cfg.error_dist.sample_standardized(&mut rng) * cfg.params.sigma[class_idx];
        let w = dot3(&cfg.params.mu[class_idx], &x) + eps;
        records.push(UnitRecord {
            z: cell.z,
            m: cell.m,
            y,
            w,
            x: x.to_vec(),
        });
        labels.push(g);
    }
    Ok((Dataset::new(records)?, labels))
}

/// One stratum of the summary-data replica: exact unit count and the
/// secondary-outcome mixture, components as (weight, mean, sd).
struct ReplicaStratum {
    z: u8,
    m: u8,
    y: u8,
    count: usize,
    mixture: &'static [(f64, f64, f64)],
}

const REPLICA: [ReplicaStratum; 8] = [
    ReplicaStratum { z: 0, m: 0, y: 1, count: 6, mixture: &[(1.0, 55.0, 5.0)] },
    ReplicaStratum {
        z: 0,
        m: 0,
        y: 0,
        count: 5051,
        mixture: &[
            (0.9561, 72.0, 4.0),
            (0.0320, 70.0, 3.0),
            (0.0064, 68.0, 6.5),
            (0.0035, 65.0, 6.0),
            (0.0020, 58.0, 2.0),
        ],
    },
    ReplicaStratum {
        z: 0,
        m: 1,
        y: 1,
        count: 5,
        mixture: &[(0.5289, 65.0, 6.0), (0.2934, 58.0, 2.0), (0.1777, 55.0, 5.0)],
    },
    ReplicaStratum {
        z: 0,
        m: 1,
        y: 0,
        count: 744,
        mixture: &[(0.9614, 72.0, 4.0), (0.0322, 70.0, 3.0), (0.0064, 68.0, 6.5)],
    },
    ReplicaStratum {
        z: 1,
        m: 0,
        y: 1,
        count: 118,
        mixture: &[(0.6700, 68.0, 6.5), (0.2055, 58.0, 2.0), (0.1245, 55.0, 5.0)],
    },
    ReplicaStratum {
        z: 1,
        m: 0,
        y: 0,
        count: 12265,
        mixture: &[(0.9641, 72.0, 4.0), (0.0323, 70.0, 3.0), (0.0036, 65.0, 6.0)],
    },
    ReplicaStratum {
        z: 1,
        m: 1,
        y: 1,
        count: 141,
        mixture: &[
            (0.7101, 70.0, 3.0),
            (0.1417, 68.0, 6.5),
            (0.0784, 65.0, 6.0),
            (0.0435, 58.0, 2.0),
            (0.0263, 55.0, 5.0),
        ],
    },
    ReplicaStratum { z: 1, m: 1, y: 0, count: 2989, mixture: &[(1.0, 72.0, 4.0)] },
];

/// Total units in the replica across strata.
pub const REPLICA_SIZE: usize = 21_319;

/// Generate the smoking/asbestos replica: exact stratum counts with the
/// secondary outcome drawn from each stratum's Gaussian mixture. Each
/// stratum owns a dedicated RNG substream.
pub fn generate_asbestos_replica(seed: u64) -> Dataset {
    let mut records = Vec::with_capacity(REPLICA_SIZE);
    for (i, stratum) in REPLICA.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let total_weight: f64 = stratum.mixture.iter().map(|(w, _, _)| w).sum();
        for _ in 0..stratum.count {
            let mut u = rng.random::<f64>() * total_weight;
            let mut comp = &stratum.mixture[stratum.mixture.len() - 1];
            for c in stratum.mixture {
                if u < c.0 {
                    comp = c;
                    break;
                }
                u -= c.0;
            }
            let w = Normal::new(comp.1, comp.2).unwrap().sample(&mut rng);
            records.push(UnitRecord {
                z: stratum.z,
                m: stratum.m,
                y: stratum.y,
                w,
                x: vec![1.0],
            });
        }
    }
    Dataset::new(records).expect("replica strata are nonempty by construction")
}

/// Cell counts implied by the replica's stratum sizes.
pub fn replica_cell_counts() -> crate::rates::CellCounts {
    let mut cases = [0u64; 4];
    let mut totals = [0u64; 4];
    for s in &REPLICA {
        let idx = ExposureCell::new(s.z, s.m).index();
        totals[idx] += s.count as u64;
        if s.y == 1 {
            cases[idx] += s.count as u64;
        }
    }
    crate::rates::CellCounts::new(cases, totals).expect("replica counts are valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rates::rates_from_counts;
    use approx::assert_abs_diff_eq;

    #[test]
    fn simulation_is_deterministic_per_seed() {
        let cfg = SimConfig::new(500, 99, ErrorDist::T5).unwrap();
        let (a, la) = generate_simulation(&cfg).unwrap();
        let (b, lb) = generate_simulation(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let other = SimConfig::new(500, 100, ErrorDist::T5).unwrap();
        let (c, _) = generate_simulation(&other).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn labels_satisfy_consistency() {
        let cfg = SimConfig::new(2000, 7, ErrorDist::Gamma).unwrap();
        let (data, labels) = generate_simulation(&cfg).unwrap();
        for (r, &g) in data.records().iter().zip(&labels) {
            assert_eq!(r.y, outcome_under(g, r.cell()));
        }
    }

    #[test]
    fn class_frequencies_match_softmax_expectation() {
        let cfg = SimConfig::new(100_000, 31, ErrorDist::Normal).unwrap();
        let (data, labels) = generate_simulation(&cfg).unwrap();
        let classes = enumerate_classes(true);
        // Monte Carlo comparison: empirical class shares against the
        // softmax probabilities averaged over the drawn covariates.
        let mut expected = vec![0.0; 6];
        for r in data.records() {
            let x = [r.x[0], r.x[1], r.x[2]];
            let etas: Vec<f64> = cfg.params.theta.iter().map(|t| dot3(t, &x)).collect();
            let mx = etas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let ws: Vec<f64> = etas.iter().map(|e| (e - mx).exp()).collect();
            let tot: f64 = ws.iter().sum();
            for (e, w) in expected.iter_mut().zip(&ws) {
                *e += w / tot;
            }
        }
        let n = data.len() as f64;
        for k in 0..6 {
            let freq = labels.iter().filter(|&&g| g == classes[k]).count() as f64 / n;
            let p = expected[k] / n;
            let se = (p * (1.0 - p) / n).sqrt();
            assert!(
                (freq - p).abs() < 3.0 * se + 1e-9,
                "class {}: freq {freq:.5} vs expected {p:.5}",
                classes[k]
            );
        }
    }

    #[test]
    fn error_scaling_hits_configured_variance() {
        // Within one class the residual w - mu' x has variance sigma_g^2
        // regardless of the error shape.
        for dist in [
            ErrorDist::Normal,
            ErrorDist::T5,
            ErrorDist::Uniform,
            ErrorDist::Bernoulli,
            ErrorDist::Gamma,
        ] {
            let cfg = SimConfig::new(200_000, 13, dist).unwrap();
            let (data, labels) = generate_simulation(&cfg).unwrap();
            let classes = enumerate_classes(true);
            for k in [0usize, 3, 5] {
                let resid: Vec<f64> = data
                    .records()
                    .iter()
                    .zip(&labels)
                    .filter(|(_, &g)| g == classes[k])
                    .map(|(r, _)| {
                        let x = [r.x[0], r.x[1], r.x[2]];
                        r.w - dot3(&cfg.params.mu[k], &x)
                    })
                    .collect();
                let n = resid.len() as f64;
                let mean = resid.iter().sum::<f64>() / n;
                let var = resid.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
                let sigma2 = cfg.params.sigma[k] * cfg.params.sigma[k];
                // Variance of a sample variance is roughly (kurtosis-adjusted)
                // 2 sigma^4 / n for the shapes here; allow a generous band.
                assert!(
                    (var / sigma2 - 1.0).abs() < 0.1,
                    "{dist:?} class {k}: var {var:.4} vs sigma2 {sigma2:.4}"
                );
                assert!(mean.abs() < 0.05, "{dist:?} class {k}: mean {mean:.4}");
            }
        }
    }

    #[test]
    fn replica_has_exact_stratum_counts() {
        let data = generate_asbestos_replica(1);
        assert_eq!(data.len(), REPLICA_SIZE);
        let strata = data.strata();
        let expect = [
            ((0, 0, 0), 5051),
            ((0, 0, 1), 6),
            ((0, 1, 0), 744),
            ((0, 1, 1), 5),
            ((1, 0, 0), 12265),
            ((1, 0, 1), 118),
            ((1, 1, 0), 2989),
            ((1, 1, 1), 141),
        ];
        for ((z, m, y), n) in expect {
            assert_eq!(strata[z * 4 + m * 2 + y].len(), n, "stratum ({z},{m},{y})");
        }
    }

    #[test]
    fn replica_counts_reproduce_summary_rates() {
        let counts = replica_cell_counts();
        assert_eq!(counts.cases, [6, 5, 118, 141]);
        assert_eq!(counts.totals, [5057, 749, 12383, 3130]);
        let d = rates_from_counts(&counts);
        assert_abs_diff_eq!(d.as_tuple().0, 6.0 / 5057.0);
    }

    #[test]
    fn replica_stratum_moments() {
        let data = generate_asbestos_replica(4);
        // (1,1,0) draws from a single component; its sample moments sit
        // within 3 standard errors of the component parameters.
        let strata = data.strata();
        let idx = &strata[4 + 2];
        let ws: Vec<f64> = idx.iter().map(|&i| data.records()[i].w).collect();
        let n = ws.len() as f64;
        let mean = ws.iter().sum::<f64>() / n;
        let sd = (ws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n).sqrt();
        assert!((mean - 72.0).abs() < 3.0 * 4.0 / n.sqrt());
        assert!((sd - 4.0).abs() < 3.0 * 4.0 / (2.0 * n).sqrt());
    }

    #[test]
    fn replica_mixture_weights_sum_to_one() {
        for s in &REPLICA {
            let total: f64 = s.mixture.iter().map(|(w, _, _)| w).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 5e-4);
        }
    }

    #[test]
    fn replica_is_deterministic_per_seed() {
        assert_eq!(generate_asbestos_replica(8), generate_asbestos_replica(8));
        assert_ne!(generate_asbestos_replica(8), generate_asbestos_replica(9));
    }
}
