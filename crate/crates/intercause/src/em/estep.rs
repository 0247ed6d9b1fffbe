//! E-step and observed-data log-likelihood.

use super::MixtureModelParams;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::latent::{outcome_under, ExposureCell, LatentClass};

/// Per-unit class responsibilities, sparse over each unit's compatible set.
/// Entries are (class position in the model's class set, weight); weights
/// are nonnegative and sum to one for every unit.
pub type Responsibilities = Vec<Vec<(usize, f64)>>;

/// Class positions compatible with observing outcome `y` in `cell`.
fn compatible_positions(classes: &[LatentClass], cell: ExposureCell, y: u8) -> Vec<usize> {
    classes
        .iter()
        .enumerate()
        .filter(|(_, &g)| outcome_under(g, cell) == y)
        .map(|(pos, _)| pos)
        .collect()
}

/// Compute responsibilities and the observed-data log-likelihood in one
/// pass. Mixture arithmetic stays in log space throughout; units whose
/// evidence admits a single class get probability one deterministically.
pub fn e_step(
    params: &MixtureModelParams,
    data: &Dataset,
    classes: &[LatentClass],
) -> Result<(Responsibilities, f64)> {
    // Compatible positions per (cell, y); computed once.
    let mut compat: [[Vec<usize>; 2]; 4] = Default::default();
    for cell in ExposureCell::all() {
        for y in 0..2u8 {
            compat[cell.index()][y as usize] = compatible_positions(classes, cell, y);
        }
    }

    let p = data.dim();
    if params.dim() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: params.dim(),
        });
    }

    let mut resp = Vec::with_capacity(data.len());
    let mut total_ll = 0.0;
    // Covariate-free data shares one prior across units; cache it.
    let cached_prior = if p == 1 {
        Some(params.log_class_prior(&[1.0]))
    } else {
        None
    };
    for r in data.records() {
        let cell = r.cell();
        let support = &compat[cell.index()][r.y as usize];
        if support.is_empty() {
            return Err(Error::InvalidDataset(format!(
                "no class is compatible with observation ({},{},{})",
                r.z, r.m, r.y
            )));
        }
        let log_prior = match &cached_prior {
            Some(lp) => lp.clone(),
            None => params.log_class_prior(&r.x),
        };
        if support.len() == 1 {
            let pos = support[0];
            let comp = params.component(cell, pos).ok_or(Error::InvalidDataset(
                "component for a populated stratum is missing".into(),
            ))?;
            total_ll += log_prior[pos] + comp.log_density(&r.x, r.w);
            resp.push(vec![(pos, 1.0)]);
            continue;
        }
        let mut terms: Vec<(usize, f64)> = Vec::with_capacity(support.len());
        for &pos in support {
            let comp = params.component(cell, pos).ok_or(Error::InvalidDataset(
                "component for a populated stratum is missing".into(),
            ))?;
            terms.push((pos, log_prior[pos] + comp.log_density(&r.x, r.w)));
        }
        let mx = terms
            .iter()
            .map(|&(_, v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        if !mx.is_finite() {
            return Err(Error::OptimizerFailure(
                "mixture weight underflow in the E-step".into(),
            ));
        }
        let lse = mx + terms.iter().map(|&(_, v)| (v - mx).exp()).sum::<f64>().ln();
        total_ll += lse;
        resp.push(
            terms
                .into_iter()
                .map(|(pos, v)| (pos, (v - lse).exp()))
                .collect(),
        );
    }
    Ok((resp, total_ll))
}

/// Fused E-step for covariate-free models: accumulates the weighted
/// sufficient statistics directly instead of materializing per-unit
/// responsibilities. Returns the observed-data log-likelihood and the
/// per-class total responsibility weight.
pub(super) fn e_step_suffstats(
    params: &MixtureModelParams,
    data: &Dataset,
    classes: &[LatentClass],
    stats: &mut super::SuffStats,
) -> Result<(f64, Vec<f64>)> {
    debug_assert_eq!(params.dim(), 1);
    let k = classes.len();
    let log_prior = params.log_class_prior(&[1.0]);

    // Per (cell, y): the compatible class positions with their component
    // constants for this iteration.
    let mut per_stratum: Vec<Vec<(usize, f64, f64, f64)>> = Vec::with_capacity(8);
    for cell in ExposureCell::all() {
        for y in 0..2u8 {
            let mut v = Vec::new();
            for (pos, &g) in classes.iter().enumerate() {
                if outcome_under(g, cell) != y {
                    continue;
                }
                if let Some(c) = params.component(cell, pos) {
                    let log_norm = -0.5 * (2.0 * std::f64::consts::PI * c.sigma2).ln();
                    v.push((
                        pos,
                        c.mu_coeffs[0],
                        log_prior[pos] + log_norm,
                        0.5 / c.sigma2,
                    ));
                }
            }
            per_stratum.push(v);
        }
    }

    let slots = 4 * k;
    let mut s_w = vec![0.0; slots];
    let mut s_xw = vec![0.0; slots];
    let mut s_ww = vec![0.0; slots];
    let mut class_weight = vec![0.0; k];
    let mut terms = [0.0f64; 16];
    let mut total_ll = 0.0;

    for r in data.records() {
        let cell_idx = r.cell().index();
        let stratum = cell_idx * 2 + r.y as usize;
        let comps = &per_stratum[stratum];
        if comps.is_empty() {
            return Err(Error::InvalidDataset(format!(
                "no instantiated component for observation ({},{},{})",
                r.z, r.m, r.y
            )));
        }
        let mut mx = f64::NEG_INFINITY;
        for (j, &(_, mu, c0, inv2s2)) in comps.iter().enumerate() {
            let d = r.w - mu;
            let t = c0 - d * d * inv2s2;
            terms[j] = t;
            if t > mx {
                mx = t;
            }
        }
        if !mx.is_finite() {
            return Err(Error::OptimizerFailure(
                "mixture weight underflow in the E-step".into(),
            ));
        }
        let mut denom = 0.0;
        for t in terms.iter().take(comps.len()) {
            denom += (t - mx).exp();
        }
        let lse = mx + denom.ln();
        total_ll += lse;
        for (j, &(pos, _, _, _)) in comps.iter().enumerate() {
            let resp = (terms[j] - lse).exp();
            let slot = cell_idx * k + pos;
            s_w[slot] += resp;
            s_xw[slot] += resp * r.w;
            s_ww[slot] += resp * r.w * r.w;
            class_weight[pos] += resp;
        }
    }

    for slot in 0..slots {
        stats.weight[slot] = s_w[slot];
        stats.xtx[slot][(0, 0)] = s_w[slot];
        stats.xtw[slot][0] = s_xw[slot];
        stats.ww[slot] = s_ww[slot];
    }
    Ok((total_ll, class_weight))
}

/// Observed-data log-likelihood of `params` on `data`: each unit contributes
/// the log of its compatible-class mixture. The exposure-assignment
/// probability is ancillary and excluded.
pub fn log_likelihood(params: &MixtureModelParams, data: &Dataset, monotonic: bool) -> Result<f64> {
    let classes = crate::latent::enumerate_classes(monotonic);
    if classes != params.classes {
        return Err(Error::InvalidConfig(
            "params class set does not match the requested model".into(),
        ));
    }
    let (_, ll) = e_step(params, data, &classes)?;
    Ok(ll)
}
