//! Output rendering: JSON for machines, aligned percent tables for humans,
//! CSV for spreadsheets.

use clap::ValueEnum;
use intercause::attribution::PosteriorCurve;
use intercause::bootstrap::BootstrapResult;
use intercause::bounds::IntervalBounds;
use intercause::latent::ClassDistribution;
use intercause::SCHEMA_VERSION;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
    Csv,
}

/// Where rendered output goes.
pub enum OutputTarget {
    Stdout,
    File(std::fs::File),
}

impl OutputTarget {
    pub fn new(path: Option<&Path>) -> std::io::Result<Self> {
        Ok(match path {
            None => OutputTarget::Stdout,
            Some(p) => OutputTarget::File(std::fs::File::create(p)?),
        })
    }

    fn writer(&mut self) -> Box<dyn Write + '_> {
        match self {
            OutputTarget::Stdout => Box::new(std::io::stdout().lock()),
            OutputTarget::File(f) => Box::new(f),
        }
    }
}

fn emit_json(target: &mut OutputTarget, value: &Value) -> std::io::Result<()> {
    let mut w = target.writer();
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)
}

fn bounds_to_json(bounds: &IntervalBounds) -> Value {
    let mut classes = Map::new();
    for (g, lo, hi) in bounds.iter() {
        classes.insert(g.bitstring(), json!({ "lower": lo, "upper": hi }));
    }
    Value::Object(classes)
}

pub fn write_bounds(
    mut target: OutputTarget,
    format: Format,
    evidence: &str,
    bounds: &IntervalBounds,
    per_cell: Option<&[(String, IntervalBounds)]>,
) -> std::io::Result<()> {
    match format {
        Format::Json => {
            let mut root = Map::new();
            root.insert("schema_version".into(), json!(SCHEMA_VERSION));
            root.insert("evidence".into(), json!(evidence));
            root.insert("classes".into(), bounds_to_json(bounds));
            if let Some(cells) = per_cell {
                let mut posteriors = Map::new();
                for (ev, b) in cells {
                    posteriors.insert(ev.clone(), bounds_to_json(b));
                }
                root.insert("posteriors".into(), Value::Object(posteriors));
            }
            emit_json(&mut target, &Value::Object(root))
        }
        Format::Table => {
            let mut w = target.writer();
            writeln!(w, "evidence: {evidence}")?;
            writeln!(w, "{:<8}{:>10}{:>10}", "class", "lower%", "upper%")?;
            for (g, lo, hi) in bounds.iter() {
                writeln!(w, "{:<8}{:>10.2}{:>10.2}", g.bitstring(), 100.0 * lo, 100.0 * hi)?;
            }
            Ok(())
        }
        Format::Csv => {
            let mut w = target.writer();
            writeln!(w, "class,lower,upper")?;
            for (g, lo, hi) in bounds.iter() {
                writeln!(w, "{},{lo},{hi}", g.bitstring())?;
            }
            Ok(())
        }
    }
}

fn dist_to_json(dist: &ClassDistribution) -> Value {
    let mut classes = Map::new();
    for (g, p) in dist.iter() {
        classes.insert(g.bitstring(), json!(p));
    }
    Value::Object(classes)
}

pub fn write_distribution(
    mut target: OutputTarget,
    format: Format,
    evidence: &str,
    dist: &ClassDistribution,
    per_cell: Option<&[(String, ClassDistribution)]>,
) -> std::io::Result<()> {
    match format {
        Format::Json => {
            let mut root = Map::new();
            root.insert("schema_version".into(), json!(SCHEMA_VERSION));
            root.insert("evidence".into(), json!(evidence));
            root.insert("classes".into(), dist_to_json(dist));
            if let Some(cells) = per_cell {
                let mut posteriors = Map::new();
                for (ev, d) in cells {
                    posteriors.insert(ev.clone(), dist_to_json(d));
                }
                root.insert("posteriors".into(), Value::Object(posteriors));
            }
            emit_json(&mut target, &Value::Object(root))
        }
        Format::Table => {
            let mut w = target.writer();
            writeln!(w, "evidence: {evidence}")?;
            writeln!(w, "{:<8}{:>12}", "class", "probability%")?;
            for (g, p) in dist.iter() {
                writeln!(w, "{:<8}{:>12.2}", g.bitstring(), 100.0 * p)?;
            }
            Ok(())
        }
        Format::Csv => {
            let mut w = target.writer();
            writeln!(w, "class,probability")?;
            for (g, p) in dist.iter() {
                writeln!(w, "{},{p}", g.bitstring())?;
            }
            Ok(())
        }
    }
}

pub fn write_posterior(
    mut target: OutputTarget,
    format: Format,
    evidence: &str,
    w_value: Option<f64>,
    posterior: &ClassDistribution,
    shares: Option<&BTreeMap<String, f64>>,
) -> std::io::Result<()> {
    match format {
        Format::Json => {
            let mut classes = Map::new();
            for (g, p) in posterior.iter() {
                classes.insert(g.bitstring(), json!(p));
            }
            let mut root = Map::new();
            root.insert("schema_version".into(), json!(SCHEMA_VERSION));
            root.insert("evidence".into(), json!(evidence));
            if let Some(wv) = w_value {
                root.insert("w".into(), json!(wv));
            }
            root.insert("posterior".into(), Value::Object(classes));
            if let Some(sh) = shares {
                root.insert("shares".into(), json!(sh));
            }
            emit_json(&mut target, &Value::Object(root))
        }
        Format::Table => {
            let mut w = target.writer();
            writeln!(w, "evidence: {evidence}")?;
            if let Some(wv) = w_value {
                writeln!(w, "w: {wv}")?;
            }
            writeln!(w, "{:<8}{:>12}", "class", "posterior%")?;
            for (g, p) in posterior.iter() {
                writeln!(w, "{:<8}{:>12.2}", g.bitstring(), 100.0 * p)?;
            }
            if let Some(sh) = shares {
                writeln!(w)?;
                writeln!(w, "{:<8}{:>12}", "cause", "share%")?;
                for (cause, v) in sh {
                    writeln!(w, "{:<8}{:>12.2}", cause, 100.0 * v)?;
                }
            }
            Ok(())
        }
        Format::Csv => {
            let mut w = target.writer();
            writeln!(w, "class,posterior")?;
            for (g, p) in posterior.iter() {
                writeln!(w, "{},{p}", g.bitstring())?;
            }
            if let Some(sh) = shares {
                writeln!(w, "cause,share")?;
                for (cause, v) in sh {
                    writeln!(w, "{cause},{v}")?;
                }
            }
            Ok(())
        }
    }
}

/// Long-format curve CSV plus a crossings sidecar `<out>.crossings.json`.
pub fn write_curve(out_path: &Path, curve: &PosteriorCurve) -> std::io::Result<()> {
    let mut file = std::fs::File::create(out_path)?;
    writeln!(file, "w,class,probability")?;
    for (i, &w) in curve.w_grid.iter().enumerate() {
        for (k, g) in curve.classes.iter().enumerate() {
            writeln!(file, "{w},{},{}", g.bitstring(), curve.probs[i][k])?;
        }
    }
    let crossings: Vec<Value> = curve
        .crossings
        .iter()
        .map(|c| {
            json!({
                "w": c.w,
                "from": c.from.bitstring(),
                "to": c.to.bitstring(),
            })
        })
        .collect();
    let sidecar = json!({
        "schema_version": SCHEMA_VERSION,
        "evidence": curve.evidence,
        "crossings": crossings,
    });
    let mut side_path = out_path.as_os_str().to_owned();
    side_path.push(".crossings.json");
    let mut side = std::fs::File::create(std::path::PathBuf::from(side_path))?;
    serde_json::to_writer_pretty(&mut side, &sidecar)?;
    writeln!(side)
}

pub fn write_bootstrap(
    mut target: OutputTarget,
    format: Format,
    result: &BootstrapResult,
) -> std::io::Result<()> {
    match format {
        Format::Json => {
            let mut estimands = Map::new();
            for (name, s) in &result.estimands {
                estimands.insert(
                    name.clone(),
                    json!({
                        "point": s.point,
                        "se": s.se,
                        "ci_low": s.ci_low,
                        "ci_high": s.ci_high,
                    }),
                );
            }
            emit_json(
                &mut target,
                &json!({
                    "schema_version": SCHEMA_VERSION,
                    "estimands": estimands,
                    "n_replicates": result.n_replicates,
                    "n_failed": result.n_failed,
                }),
            )
        }
        Format::Table => {
            let mut w = target.writer();
            writeln!(
                w,
                "{:<12}{:>12}{:>12}{:>12}{:>12}",
                "estimand", "point", "se", "ci_low", "ci_high"
            )?;
            for (name, s) in &result.estimands {
                writeln!(
                    w,
                    "{:<12}{:>12.6}{:>12.6}{:>12.6}{:>12.6}",
                    name, s.point, s.se, s.ci_low, s.ci_high
                )?;
            }
            writeln!(w, "failed replicates: {}/{}", result.n_failed, result.n_replicates)?;
            Ok(())
        }
        Format::Csv => {
            let mut w = target.writer();
            writeln!(w, "estimand,point,se,ci_low,ci_high")?;
            for (name, s) in &result.estimands {
                writeln!(w, "{name},{},{},{},{}", s.point, s.se, s.ci_low, s.ci_high)?;
            }
            Ok(())
        }
    }
}
