//! Maximum-likelihood estimation of the latent-class mixture by EM.
//!
//! The model: class membership follows a multinomial-logistic prior on the
//! covariates, and the secondary outcome is normal within each
//! (exposure cell, class) stratum. The binary outcome is deterministic given
//! class and cell, so a unit's evidence restricts its class to the
//! compatible set and the observed-data likelihood sums component densities
//! over exactly that set. The exposure-assignment process is ancillary and
//! never modeled.

mod estep;
mod labels;
mod mstep;

pub use estep::{e_step, log_likelihood, Responsibilities};
pub use labels::{match_class_labels, CellMixtureFit, LabelAssignment, MatchKey};
pub use mstep::{m_step_beta, m_step_theta, SuffStats};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::latent::{enumerate_classes, outcome_under, ClassDistribution, ExposureCell, LatentClass};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Cross-cell parameter sharing for the normal components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Restriction {
    /// Separate (mean, variance) per (cell, class).
    #[default]
    None,
    /// Mean coefficients depend on the class only.
    SharedMeans,
    /// Variances depend on the class only.
    SharedVariances,
}

impl std::str::FromStr for Restriction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Restriction::None),
            "shared-means" => Ok(Restriction::SharedMeans),
            "shared-variances" => Ok(Restriction::SharedVariances),
            other => Err(Error::InvalidConfig(format!(
                "restriction must be none|shared-means|shared-variances, got {other:?}"
            ))),
        }
    }
}

/// Normal regression component for one (cell, class) stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub mu_coeffs: Vec<f64>,
    pub sigma2: f64,
}

impl Component {
    pub fn mean_at(&self, x: &[f64]) -> f64 {
        self.mu_coeffs.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Log normal density of `w` at covariates `x`.
    pub fn log_density(&self, x: &[f64], w: f64) -> f64 {
        let resid = w - self.mean_at(x);
        -0.5 * (2.0 * std::f64::consts::PI * self.sigma2).ln() - resid * resid / (2.0 * self.sigma2)
    }
}

/// Full parameter set of the mixture model.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureModelParams {
    /// Model class set in canonical order; the first class is the softmax
    /// reference with coefficients pinned at zero.
    pub classes: Vec<LatentClass>,
    /// theta[k] is the coefficient vector of classes[k]; theta[0] is zero.
    pub theta: Vec<Vec<f64>>,
    /// Instantiated components keyed by (cell index, class position).
    pub beta: BTreeMap<(usize, usize), Component>,
    pub restriction: Restriction,
}

impl MixtureModelParams {
    pub fn dim(&self) -> usize {
        self.theta[0].len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_position(&self, g: LatentClass) -> Option<usize> {
        self.classes.iter().position(|&c| c == g)
    }

    pub fn component(&self, cell: ExposureCell, class_pos: usize) -> Option<&Component> {
        self.beta.get(&(cell.index(), class_pos))
    }

    /// Log prior log pr(G = classes[k] | x) for all k.
    pub fn log_class_prior(&self, x: &[f64]) -> Vec<f64> {
        let mut eta: Vec<f64> = self
            .theta
            .iter()
            .map(|th| th.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let mx = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = mx + eta.iter().map(|e| (e - mx).exp()).sum::<f64>().ln();
        for e in &mut eta {
            *e -= lse;
        }
        eta
    }

    /// Count of free parameters, honoring the restriction and counting only
    /// instantiated components.
    pub fn n_free_params(&self) -> usize {
        let p = self.dim();
        let k_theta = (self.n_classes() - 1) * p;
        let mut classes_with_mean = std::collections::BTreeSet::new();
        let mut classes_with_var = std::collections::BTreeSet::new();
        let mut n_means = 0;
        let mut n_vars = 0;
        for &(_, class_pos) in self.beta.keys() {
            n_means += p;
            n_vars += 1;
            classes_with_mean.insert(class_pos);
            classes_with_var.insert(class_pos);
        }
        let mean_params = match self.restriction {
            Restriction::SharedMeans => classes_with_mean.len() * p,
            _ => n_means,
        };
        let var_params = match self.restriction {
            Restriction::SharedVariances => classes_with_var.len(),
            _ => n_vars,
        };
        k_theta + mean_params + var_params
    }
}

/// Softmax class prior at covariates `x` as a distribution over the model's
/// class set.
pub fn class_prior(params: &MixtureModelParams, x: &[f64]) -> Result<ClassDistribution> {
    if x.len() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            got: x.len(),
        });
    }
    let log_prior = params.log_class_prior(x);
    let probs: Vec<f64> = log_prior.iter().map(|lp| lp.exp()).collect();
    ClassDistribution::new(&params.classes, &probs)
}

/// Normal component density (linear scale) for the given cell, class, and
/// secondary-outcome value.
pub fn component_density(
    params: &MixtureModelParams,
    cell: ExposureCell,
    g: LatentClass,
    x: &[f64],
    w: f64,
) -> Result<f64> {
    let pos = params
        .class_position(g)
        .ok_or_else(|| Error::InvalidConfig(format!("class {g} not in the model")))?;
    let comp = params.component(cell, pos).ok_or_else(|| {
        Error::InvalidConfig(format!("component for cell {cell}, class {g} not instantiated"))
    })?;
    Ok(comp.log_density(x, w).exp())
}

/// EM driver configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iter: usize,
    /// Relative log-likelihood change declaring convergence.
    pub rel_tol: f64,
    pub n_starts: usize,
    pub seed: u64,
    /// Variance floor as a fraction of var(W) over the dataset.
    pub variance_floor: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            rel_tol: 1e-8,
            n_starts: 10,
            seed: 0,
            variance_floor: 1e-6,
        }
    }
}

/// Result of one EM fit (best start).
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: MixtureModelParams,
    pub loglik: f64,
    pub aic: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_free_params: usize,
    /// Observed-data log-likelihood after each EM cycle of the winning start.
    pub loglik_trace: Vec<f64>,
}

impl FitResult {
    /// Marginal class probabilities: the fitted prior averaged over the
    /// sample's covariates.
    pub fn marginal_class_probs(&self, data: &Dataset) -> Result<ClassDistribution> {
        let k = self.params.n_classes();
        let mut acc = vec![0.0; k];
        for r in data.records() {
            let lp = self.params.log_class_prior(&r.x);
            for (a, l) in acc.iter_mut().zip(&lp) {
                *a += l.exp();
            }
        }
        let n = data.len() as f64;
        for a in &mut acc {
            *a /= n;
        }
        ClassDistribution::new(&self.params.classes, &acc)
    }
}

/// `2k - 2 log L`.
pub fn aic(n_free_params: usize, loglik: f64) -> f64 {
    2.0 * n_free_params as f64 - 2.0 * loglik
}

/// The (cell, class position) pairs that receive data: a pair is
/// instantiated when the stratum implied by the class's outcome in that cell
/// is non-empty.
pub fn instantiated_pairs(data: &Dataset, classes: &[LatentClass]) -> Vec<(usize, usize)> {
    let strata = data.strata();
    let mut out = Vec::new();
    for cell in ExposureCell::all() {
        for (pos, &g) in classes.iter().enumerate() {
            let y = outcome_under(g, cell);
            let stratum = (cell.z as usize) * 4 + (cell.m as usize) * 2 + y as usize;
            if !strata[stratum].is_empty() {
                out.push((cell.index(), pos));
            }
        }
    }
    out
}

/// Weighted quantile sequence used to seed component means.
fn quantiles(sorted: &[f64], count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| {
            let q = (j as f64 + 1.0) / (count as f64 + 1.0);
            let pos = q * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] * (1.0 - frac) + sorted[hi] * frac
        })
        .collect()
}

fn init_params(
    data: &Dataset,
    classes: &[LatentClass],
    restriction: Restriction,
    floor: f64,
    rng: &mut ChaCha8Rng,
    start: usize,
) -> MixtureModelParams {
    let p = data.dim();
    let k = classes.len();
    let mut theta = vec![vec![0.0; p]; k];
    for th in theta.iter_mut().skip(1) {
        for v in th.iter_mut() {
            *v = rng.random_range(-0.2..0.2);
        }
    }

    // Global class ordering for quantile assignment. The first two starts
    // anchor the two deterministic directions; later starts draw a random
    // permutation. Using one global order per start keeps component seeds
    // consistent across strata that share classes.
    let mut order: Vec<usize> = (0..k).collect();
    match start {
        0 => {}
        1 => order.reverse(),
        _ => {
            for i in (1..k).rev() {
                let j = rng.random_range(0..=i);
                order.swap(i, j);
            }
        }
    }
    let rank_of = |pos: usize| order.iter().position(|&o| o == pos).unwrap();

    let strata = data.strata();
    let mut beta = BTreeMap::new();
    for cell in ExposureCell::all() {
        for y in 0..2u8 {
            let stratum = (cell.z as usize) * 4 + (cell.m as usize) * 2 + y as usize;
            let idx = &strata[stratum];
            if idx.is_empty() {
                continue;
            }
            let mut ws: Vec<f64> = idx.iter().map(|&i| data.records()[i].w).collect();
            ws.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean = ws.iter().sum::<f64>() / ws.len() as f64;
            let var = (ws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / ws.len() as f64)
                .max(floor);
            let sd = var.sqrt();
            let compat: Vec<usize> = classes
                .iter()
                .enumerate()
                .filter(|(_, &g)| outcome_under(g, cell) == y)
                .map(|(pos, _)| pos)
                .collect();
            let mut ranked = compat.clone();
            ranked.sort_by_key(|&pos| rank_of(pos));
            let qs = quantiles(&ws, ranked.len());
            for (slot, &pos) in ranked.iter().enumerate() {
                let jitter: f64 = rng.random_range(-0.1..0.1) * sd;
                let mut mu = vec![0.0; p];
                mu[0] = qs[slot] + jitter;
                beta.insert((cell.index(), pos), Component { mu_coeffs: mu, sigma2: var });
            }
        }
    }
    // Seeds must start inside the restricted parameter space, or the first
    // constrained M-step can lower the likelihood.
    match restriction {
        Restriction::None => {}
        Restriction::SharedMeans => {
            for pos in 0..k {
                let cells: Vec<usize> =
                    (0..4).filter(|&c| beta.contains_key(&(c, pos))).collect();
                if cells.len() > 1 {
                    let mean: f64 = cells
                        .iter()
                        .map(|&c| beta[&(c, pos)].mu_coeffs[0])
                        .sum::<f64>()
                        / cells.len() as f64;
                    for &c in &cells {
                        beta.get_mut(&(c, pos)).unwrap().mu_coeffs[0] = mean;
                    }
                }
            }
        }
        Restriction::SharedVariances => {
            for pos in 0..k {
                let cells: Vec<usize> =
                    (0..4).filter(|&c| beta.contains_key(&(c, pos))).collect();
                if cells.len() > 1 {
                    let var: f64 = cells
                        .iter()
                        .map(|&c| beta[&(c, pos)].sigma2)
                        .sum::<f64>()
                        / cells.len() as f64;
                    for &c in &cells {
                        beta.get_mut(&(c, pos)).unwrap().sigma2 = var;
                    }
                }
            }
        }
    }
    MixtureModelParams {
        classes: classes.to_vec(),
        theta,
        beta,
        restriction,
    }
}

fn run_single_start(
    data: &Dataset,
    classes: &[LatentClass],
    restriction: Restriction,
    config: &EmConfig,
    floor: f64,
    start: usize,
) -> Result<FitResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(start as u64 + 1);
    let mut params = init_params(data, classes, restriction, floor, &mut rng, start);

    let mut trace = Vec::new();
    let mut prev = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    let p = data.dim();
    let n = data.len() as f64;
    let mut stats = SuffStats::empty(p, classes.len());
    for iter in 0..config.max_iter {
        iterations = iter + 1;
        if p == 1 {
            // Covariate-free fast path: fused E-step and closed-form
            // intercept update.
            let (ll, class_weight) = estep::e_step_suffstats(&params, data, classes, &mut stats)?;
            if !ll.is_finite() {
                return Err(Error::OptimizerFailure(format!(
                    "non-finite log-likelihood at iteration {iter}"
                )));
            }
            trace.push(ll);
            if iter > 0 && (ll - prev).abs() < config.rel_tol * ll.abs().max(1.0) {
                converged = true;
                break;
            }
            prev = ll;
            let base = (class_weight[0] / n).max(1e-300).ln();
            for (th, &cw) in params.theta.iter_mut().zip(&class_weight) {
                th[0] = (cw / n).max(1e-300).ln() - base;
            }
            m_step_beta(&mut params, &stats, floor)?;
        } else {
            let (resp, ll) = e_step(&params, data, classes)?;
            if !ll.is_finite() {
                return Err(Error::OptimizerFailure(format!(
                    "non-finite log-likelihood at iteration {iter}"
                )));
            }
            trace.push(ll);
            if iter > 0 && (ll - prev).abs() < config.rel_tol * ll.abs().max(1.0) {
                converged = true;
                break;
            }
            prev = ll;
            stats = SuffStats::accumulate(data, &resp, classes.len());
            params.theta =
                mstep::m_step_theta_capped(&params.theta, data, &resp, classes.len(), 2)?;
            m_step_beta(&mut params, &stats, floor)?;
        }
    }
    let ll = *trace.last().unwrap();
    let k = params.n_free_params();
    Ok(FitResult {
        aic: aic(k, ll),
        n_free_params: k,
        params,
        loglik: ll,
        iterations,
        converged,
        loglik_trace: trace,
    })
}

/// Fit the model by EM over `config.n_starts` seeded initializations, run in
/// parallel, keeping the start with the best observed-data log-likelihood.
/// Deterministic given `(data, config.seed)`.
pub fn fit_em(
    data: &Dataset,
    monotonic: bool,
    restriction: Restriction,
    config: &EmConfig,
) -> Result<FitResult> {
    if data.is_empty() {
        return Err(Error::InvalidDataset("cannot fit an empty dataset".into()));
    }
    if config.n_starts == 0 {
        return Err(Error::InvalidConfig("n_starts must be at least 1".into()));
    }
    let classes = enumerate_classes(monotonic);
    let floor = (config.variance_floor * data.w_variance()).max(f64::MIN_POSITIVE);

    let results: Vec<Result<FitResult>> = (0..config.n_starts)
        .into_par_iter()
        .map(|start| run_single_start(data, &classes, restriction, config, floor, start))
        .collect();

    let mut best: Option<FitResult> = None;
    for r in results {
        match r {
            Ok(fit) if fit.loglik.is_finite() => {
                if best.as_ref().map_or(true, |b| fit.loglik > b.loglik) {
                    best = Some(fit);
                }
            }
            _ => {}
        }
    }
    best.ok_or(Error::AllStartsFailed)
}
