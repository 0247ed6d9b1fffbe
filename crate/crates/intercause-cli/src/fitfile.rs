//! Fit JSON wire format: round-trips the mixture parameters with the beta
//! table keyed by "z,m,class".

use crate::output::{Format, OutputTarget};
use crate::CliError;
use intercause::em::{Component, EmConfig, FitResult, MixtureModelParams, Restriction};
use intercause::latent::{ClassDistribution, ExposureCell, LatentClass};
use intercause::SCHEMA_VERSION;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

pub struct FitFile {
    pub params: MixtureModelParams,
    pub monotonic: bool,
}

pub fn write_fit(
    mut target: OutputTarget,
    format: Format,
    fit: &FitResult,
    monotonic: bool,
    config: &EmConfig,
    marginal: &ClassDistribution,
) -> Result<(), CliError> {
    let params = &fit.params;
    let theta: Vec<Vec<f64>> = params.theta.clone();
    let mut beta = Map::new();
    for (&(cell_idx, pos), comp) in &params.beta {
        let cell = ExposureCell::all()[cell_idx];
        let key = format!("{},{},{}", cell.z, cell.m, params.classes[pos].bitstring());
        beta.insert(
            key,
            json!({ "mu": comp.mu_coeffs, "sigma2": comp.sigma2 }),
        );
    }
    let mut marginal_map = Map::new();
    for (g, p) in marginal.iter() {
        marginal_map.insert(g.bitstring(), json!(p));
    }
    let restriction = match params.restriction {
        Restriction::None => "none",
        Restriction::SharedMeans => "shared-means",
        Restriction::SharedVariances => "shared-variances",
    };
    let doc = json!({
        "schema_version": SCHEMA_VERSION,
        "monotonic": monotonic,
        "restriction": restriction,
        "classes": params.classes.iter().map(|g| g.bitstring()).collect::<Vec<_>>(),
        "theta": theta,
        "beta": beta,
        "loglik": fit.loglik,
        "aic": fit.aic,
        "iterations": fit.iterations,
        "converged": fit.converged,
        "n_free_params": fit.n_free_params,
        "marginal_probs": marginal_map,
        "config": {
            "max_iter": config.max_iter,
            "rel_tol": config.rel_tol,
            "n_starts": config.n_starts,
            "seed": config.seed,
            "variance_floor": config.variance_floor,
        },
    });
    match format {
        Format::Json | Format::Csv => {
            let mut w = target_writer(&mut target);
            serde_json::to_writer_pretty(&mut w, &doc).map_err(io_err)?;
            writeln!(w).map_err(|e| CliError::Io(e.to_string()))?;
        }
        Format::Table => {
            let mut w = target_writer(&mut target);
            let table = render_table(fit, marginal);
            write!(w, "{table}").map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    Ok(())
}

fn render_table(fit: &FitResult, marginal: &ClassDistribution) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "loglik {:.4}  aic {:.4}  iterations {}  converged {}\n",
        fit.loglik, fit.aic, fit.iterations, fit.converged
    ));
    out.push_str(&format!("{:<8}{:>12}\n", "class", "pi%"));
    for (g, p) in marginal.iter() {
        out.push_str(&format!("{:<8}{:>12.2}\n", g.bitstring(), 100.0 * p));
    }
    out
}

fn target_writer(target: &mut OutputTarget) -> Box<dyn Write + '_> {
    match target {
        OutputTarget::Stdout => Box::new(std::io::stdout().lock()),
        OutputTarget::File(f) => Box::new(f),
    }
}

fn io_err(e: serde_json::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn field<'a>(doc: &'a Value, name: &str) -> Result<&'a Value, CliError> {
    doc.get(name)
        .ok_or_else(|| CliError::Io(format!("fit file is missing {name:?}")))
}

pub fn read_fit(path: &Path) -> Result<FitFile, CliError> {
    let text = std::fs::read_to_string(path)?;
    let doc: Value =
        serde_json::from_str(&text).map_err(|e| CliError::Io(format!("bad fit file: {e}")))?;

    let monotonic = field(&doc, "monotonic")?
        .as_bool()
        .ok_or_else(|| CliError::Io("monotonic must be a bool".into()))?;
    let restriction = Restriction::from_str(
        field(&doc, "restriction")?
            .as_str()
            .ok_or_else(|| CliError::Io("restriction must be a string".into()))?,
    )
    .map_err(|e| CliError::Io(e.to_string()))?;

    let classes: Vec<LatentClass> = field(&doc, "classes")?
        .as_array()
        .ok_or_else(|| CliError::Io("classes must be an array".into()))?
        .iter()
        .map(|v| {
            v.as_str()
                .ok_or_else(|| CliError::Io("class must be a string".into()))
                .and_then(|s| {
                    LatentClass::from_str(s).map_err(|e| CliError::Io(e.to_string()))
                })
        })
        .collect::<Result<_, _>>()?;

    let theta: Vec<Vec<f64>> = field(&doc, "theta")?
        .as_array()
        .ok_or_else(|| CliError::Io("theta must be an array".into()))?
        .iter()
        .map(|row| {
            row.as_array()
                .ok_or_else(|| CliError::Io("theta row must be an array".into()))
                .map(|r| r.iter().filter_map(|v| v.as_f64()).collect::<Vec<f64>>())
        })
        .collect::<Result<_, _>>()?;
    if theta.len() != classes.len() {
        return Err(CliError::Io("theta length must match classes".into()));
    }

    let mut beta = BTreeMap::new();
    for (key, entry) in field(&doc, "beta")?
        .as_object()
        .ok_or_else(|| CliError::Io("beta must be an object".into()))?
    {
        let parts: Vec<&str> = key.split(',').collect();
        if parts.len() != 3 {
            return Err(CliError::Io(format!("bad beta key {key:?}")));
        }
        let z: u8 = parts[0].parse().map_err(|_| CliError::Io(format!("bad beta key {key:?}")))?;
        let m: u8 = parts[1].parse().map_err(|_| CliError::Io(format!("bad beta key {key:?}")))?;
        let class = LatentClass::from_str(parts[2]).map_err(|e| CliError::Io(e.to_string()))?;
        let pos = classes
            .iter()
            .position(|&g| g == class)
            .ok_or_else(|| CliError::Io(format!("beta key {key:?} not in class set")))?;
        let mu: Vec<f64> = entry
            .get("mu")
            .and_then(|v| v.as_array())
            .ok_or_else(|| CliError::Io(format!("beta entry {key:?} missing mu")))?
            .iter()
            .filter_map(|v| v.as_f64())
            .collect();
        let sigma2 = entry
            .get("sigma2")
            .and_then(|v| v.as_f64())
            .ok_or_else(|| CliError::Io(format!("beta entry {key:?} missing sigma2")))?;
        beta.insert(
            (ExposureCell::new(z, m).index(), pos),
            Component { mu_coeffs: mu, sigma2 },
        );
    }

    Ok(FitFile {
        params: MixtureModelParams { classes, theta, beta, restriction },
        monotonic,
    })
}
