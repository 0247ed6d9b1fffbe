//! M-step updates: weighted multinomial-logistic regression for the class
//! prior and weighted least squares for the normal components.

use super::{MixtureModelParams, Responsibilities, Restriction};
use crate::data::Dataset;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Weighted sufficient statistics per (cell index, class position):
/// sum of w x x', sum of w x W, sum of w W^2, and sum of w.
#[derive(Debug, Clone)]
pub struct SuffStats {
    pub dim: usize,
    pub n_classes: usize,
    pub xtx: Vec<DMatrix<f64>>,
    pub xtw: Vec<DVector<f64>>,
    pub ww: Vec<f64>,
    pub weight: Vec<f64>,
}

impl SuffStats {
    fn slot(&self, cell_idx: usize, class_pos: usize) -> usize {
        cell_idx * self.n_classes + class_pos
    }

    /// Zero-initialized statistics for the given design dimension and class
    /// count.
    pub fn empty(dim: usize, n_classes: usize) -> Self {
        let slots = 4 * n_classes;
        SuffStats {
            dim,
            n_classes,
            xtx: vec![DMatrix::zeros(dim, dim); slots],
            xtw: vec![DVector::zeros(dim); slots],
            ww: vec![0.0; slots],
            weight: vec![0.0; slots],
        }
    }

    pub fn accumulate(data: &Dataset, resp: &Responsibilities, n_classes: usize) -> Self {
        let p = data.dim();
        let slots = 4 * n_classes;
        let mut s = SuffStats {
            dim: p,
            n_classes,
            xtx: vec![DMatrix::zeros(p, p); slots],
            xtw: vec![DVector::zeros(p); slots],
            ww: vec![0.0; slots],
            weight: vec![0.0; slots],
        };
        for (r, unit_resp) in data.records().iter().zip(resp) {
            let cell_idx = r.cell().index();
            for &(pos, wgt) in unit_resp {
                if wgt == 0.0 {
                    continue;
                }
                let slot = s.slot(cell_idx, pos);
                for a in 0..p {
                    for b in a..p {
                        let v = wgt * r.x[a] * r.x[b];
                        s.xtx[slot][(a, b)] += v;
                        if a != b {
                            s.xtx[slot][(b, a)] += v;
                        }
                    }
                    s.xtw[slot][a] += wgt * r.x[a] * r.w;
                }
                s.ww[slot] += wgt * r.w * r.w;
                s.weight[slot] += wgt;
            }
        }
        s
    }
}

/// Maximize the responsibility-weighted multinomial log-likelihood.
///
/// Each unit contributes one pseudo-observation per supported class with its
/// responsibility as weight; the reference class keeps zero coefficients.
/// Intercept-only designs use the exact closed form (weighted class
/// frequencies); otherwise Newton steps with step halving run until the
/// mean-gradient norm falls below 1e-10 or the iteration cap. Hitting the
/// cap returns the current iterate: complete-separation paths legitimately
/// diverge and are cut off there.
pub fn m_step_theta(
    theta0: &[Vec<f64>],
    data: &Dataset,
    resp: &Responsibilities,
    n_classes: usize,
) -> Result<Vec<Vec<f64>>> {
    m_step_theta_capped(theta0, data, resp, n_classes, 100)
}

/// Newton update with an explicit iteration cap. The EM driver passes a
/// small cap: one or two ascent steps per cycle converge jointly with the
/// outer iteration and keep the whole update a conditional maximization.
pub(super) fn m_step_theta_capped(
    theta0: &[Vec<f64>],
    data: &Dataset,
    resp: &Responsibilities,
    n_classes: usize,
    max_iter: usize,
) -> Result<Vec<Vec<f64>>> {
    let p = data.dim();
    let n = data.len() as f64;

    if p == 1 {
        // Weighted multinomial MLE with intercept only: class shares.
        let mut counts = vec![0.0; n_classes];
        for unit_resp in resp {
            for &(pos, w) in unit_resp {
                counts[pos] += w;
            }
        }
        let base = (counts[0] / n).max(1e-300).ln();
        return Ok(counts
            .iter()
            .map(|&c| vec![(c / n).max(1e-300).ln() - base])
            .collect());
    }

    const GRAD_TOL: f64 = 1e-10;
    let kfree = n_classes - 1;
    let dim = kfree * p;

    let objective = |theta: &[Vec<f64>]| -> f64 {
        let mut obj = 0.0;
        for (r, unit_resp) in data.records().iter().zip(resp) {
            let mut eta: Vec<f64> = theta
                .iter()
                .map(|th| th.iter().zip(&r.x).map(|(a, b)| a * b).sum())
                .collect();
            let mx = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + eta.iter().map(|e| (e - mx).exp()).sum::<f64>().ln();
            for e in &mut eta {
                *e -= lse;
            }
            for &(pos, w) in unit_resp {
                obj += w * eta[pos];
            }
        }
        obj
    };

    let mut theta: Vec<Vec<f64>> = theta0.to_vec();
    theta[0] = vec![0.0; p];
    let mut obj = objective(&theta);

    for _ in 0..max_iter {
        let mut grad = DVector::<f64>::zeros(dim);
        let mut hess = DMatrix::<f64>::zeros(dim, dim);
        for (r, unit_resp) in data.records().iter().zip(resp) {
            let eta: Vec<f64> = theta
                .iter()
                .map(|th| th.iter().zip(&r.x).map(|(a, b)| a * b).sum())
                .collect();
            let mx = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + eta.iter().map(|e| (e - mx).exp()).sum::<f64>().ln();
            let probs: Vec<f64> = eta.iter().map(|e| (e - lse).exp()).collect();
            let mut wvec = vec![0.0; n_classes];
            for &(pos, w) in unit_resp {
                wvec[pos] = w;
            }
            for c in 1..n_classes {
                let coef = wvec[c] - probs[c];
                for a in 0..p {
                    grad[(c - 1) * p + a] += coef * r.x[a];
                }
                for d in c..n_classes {
                    let h = if c == d {
                        probs[c] * (1.0 - probs[c])
                    } else {
                        -probs[c] * probs[d]
                    };
                    for a in 0..p {
                        for b in 0..p {
                            let v = h * r.x[a] * r.x[b];
                            hess[((c - 1) * p + a, (d - 1) * p + b)] += v;
                            if c != d {
                                hess[((d - 1) * p + b, (c - 1) * p + a)] += v;
                            }
                        }
                    }
                }
            }
        }
        if grad.amax() / n < GRAD_TOL {
            break;
        }
        // Small ridge keeps the solve stable when classes are nearly empty.
        for i in 0..dim {
            hess[(i, i)] += 1e-10 * n;
        }
        let Some(step) = hess.clone().cholesky().map(|ch| ch.solve(&grad)) else {
            return Err(Error::OptimizerFailure(
                "multinomial Hessian is not positive definite".into(),
            ));
        };
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let mut cand = theta.clone();
            for c in 1..n_classes {
                for a in 0..p {
                    cand[c][a] += scale * step[(c - 1) * p + a];
                }
            }
            let cand_obj = objective(&cand);
            if cand_obj.is_finite() && cand_obj >= obj {
                theta = cand;
                obj = cand_obj;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            // Objective already at a local flat spot; Newton noise only.
            break;
        }
    }
    Ok(theta)
}

fn solve_wls(xtx: &DMatrix<f64>, xtw: &DVector<f64>) -> Option<DVector<f64>> {
    // The weighted Gram matrix is PSD; Cholesky failure or a tiny pivot
    // signals rank deficiency.
    let p = xtx.nrows();
    let scale = (0..p).map(|i| xtx[(i, i)]).fold(0.0f64, f64::max);
    if scale <= 0.0 {
        return None;
    }
    let chol = xtx.clone().cholesky()?;
    // Reject solutions from numerically singular systems.
    let det_floor = (1e-12 * scale).powi(p as i32);
    if chol.determinant() < det_floor {
        return None;
    }
    Some(chol.solve(xtw))
}

/// Update the normal components in place from weighted sufficient
/// statistics.
///
/// With no restriction each instantiated (cell, class) solves its own WLS
/// and takes the weighted mean squared residual as variance. Shared means
/// pool a class's cells into one precision-weighted WLS (conditional on the
/// current variances), then refresh the per-cell variances; shared variances
/// solve per-cell means and pool the residuals. Both shared updates are
/// conditional maximizations, so the EM ascent property is preserved.
pub fn m_step_beta(params: &mut MixtureModelParams, stats: &SuffStats, floor: f64) -> Result<()> {
    let p = stats.dim;
    const WEIGHT_EPS: f64 = 1e-12;


    match params.restriction {
        Restriction::None => {
            for (&(cell_idx, pos), comp) in params.beta.iter_mut() {
                let slot = cell_idx * stats.n_classes + pos;
                let wsum = stats.weight[slot];
                if wsum <= WEIGHT_EPS {
                    continue;
                }
                let mu = solve_wls(&stats.xtx[slot], &stats.xtw[slot]).ok_or_else(|| {
                    Error::RankDeficient {
                        context: format!(
                            "cell index {cell_idx}, class {}",
                            params.classes[pos]
                        ),
                    }
                })?;
                let rss = stats.ww[slot] - 2.0 * mu.dot(&stats.xtw[slot])
                    + (mu.transpose() * &stats.xtx[slot] * &mu)[(0, 0)];
                comp.mu_coeffs = mu.iter().cloned().collect();
                comp.sigma2 = (rss / wsum).max(floor);
            }
        }
        Restriction::SharedMeans => {
            for pos in 0..stats.n_classes {
                let cells: Vec<usize> = (0..4)
                    .filter(|&c| params.beta.contains_key(&(c, pos)))
                    .collect();
                if cells.is_empty() {
                    continue;
                }
                // Precision-weighted pooling across cells.
                let mut xtx = DMatrix::zeros(p, p);
                let mut xtw = DVector::zeros(p);
                let mut total_weight = 0.0;
                for &c in &cells {
                    let slot = c * stats.n_classes + pos;
                    let prec = 1.0 / params.beta.get(&(c, pos)).unwrap().sigma2;
                    xtx += &stats.xtx[slot] * prec;
                    xtw += &stats.xtw[slot] * prec;
                    total_weight += stats.weight[slot];
                }
                if total_weight <= WEIGHT_EPS {
                    continue;
                }
                let mu = solve_wls(&xtx, &xtw).ok_or_else(|| Error::RankDeficient {
                    context: format!("pooled cells, class {}", params.classes[pos]),
                })?;
                let mu_vec: Vec<f64> = mu.iter().cloned().collect();
                for &c in &cells {
                    let slot = c * stats.n_classes + pos;
                    let wsum = stats.weight[slot];
                    let comp = params.beta.get_mut(&(c, pos)).unwrap();
                    comp.mu_coeffs = mu_vec.clone();
                    if wsum > WEIGHT_EPS {
                        let rss = stats.ww[slot] - 2.0 * mu.dot(&stats.xtw[slot])
                            + (mu.transpose() * &stats.xtx[slot] * &mu)[(0, 0)];
                        comp.sigma2 = (rss / wsum).max(floor);
                    }
                }
            }
        }
        Restriction::SharedVariances => {
            for pos in 0..stats.n_classes {
                let cells: Vec<usize> = (0..4)
                    .filter(|&c| params.beta.contains_key(&(c, pos)))
                    .collect();
                if cells.is_empty() {
                    continue;
                }
                let mut pooled_rss = 0.0;
                let mut pooled_weight = 0.0;
                let mut new_mu: Vec<(usize, Vec<f64>)> = Vec::new();
                for &c in &cells {
                    let slot = c * stats.n_classes + pos;
                    let wsum = stats.weight[slot];
                    if wsum <= WEIGHT_EPS {
                        continue;
                    }
                    let mu = solve_wls(&stats.xtx[slot], &stats.xtw[slot]).ok_or_else(|| {
                        Error::RankDeficient {
                            context: format!("cell index {c}, class {}", params.classes[pos]),
                        }
                    })?;
                    let rss = stats.ww[slot] - 2.0 * mu.dot(&stats.xtw[slot])
                        + (mu.transpose() * &stats.xtx[slot] * &mu)[(0, 0)];
                    pooled_rss += rss;
                    pooled_weight += wsum;
                    new_mu.push((c, mu.iter().cloned().collect()));
                }
                if pooled_weight <= WEIGHT_EPS {
                    continue;
                }
                let sigma2 = (pooled_rss / pooled_weight).max(floor);
                for (c, mu) in new_mu {
                    let comp = params.beta.get_mut(&(c, pos)).unwrap();
                    comp.mu_coeffs = mu;
                    comp.sigma2 = sigma2;
                }
                // Cells with vanishing weight still share the pooled scale.
                for &c in &cells {
                    let slot = c * stats.n_classes + pos;
                    if stats.weight[slot] <= WEIGHT_EPS {
                        params.beta.get_mut(&(c, pos)).unwrap().sigma2 = sigma2;
                    }
                }
            }
        }
    }
    Ok(())
}
