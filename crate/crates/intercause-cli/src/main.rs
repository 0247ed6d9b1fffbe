//! Command-line driver: bounds, maximum entropy, EM fitting, attribution
//! queries, data generation, and bootstrap intervals.
//!
//! Exit codes: 0 success, 1 usage, 2 infeasible or model error, 3 I/O.

mod fitfile;
mod output;

use clap::{Args, Parser, Subcommand};
use intercause::attribution::{
    responsibility_shares, AttributionMatrix, ExtendedEvidence, ModelAttribution,
};
use intercause::bootstrap::{bootstrap, BootstrapConfig};
use intercause::bounds::{class_bounds_mono, posterior_bounds};
use intercause::data::{Dataset, UnitRecord};
use intercause::datagen::{generate_asbestos_replica, generate_simulation, ErrorDist, SimConfig};
use intercause::em::{fit_em, EmConfig, Restriction};
use intercause::latent::Evidence;
use intercause::maxent::{maxent_mono, maxent_posterior};
use intercause::rates::{monotonicity_consistency, rates_from_counts, CellCounts};
use output::{Format, OutputTarget};
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "intercause",
    about = "Attribution of a binary outcome to two interacting binary exposures",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOut {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Nonparametric identification intervals from summary counts.
    Bounds {
        /// CSV with header z,m,cases,total.
        counts: PathBuf,
        /// Condition on evidence "z,m,y" instead of the whole population.
        #[arg(long)]
        evidence: Option<String>,
        #[command(flatten)]
        common: CommonOut,
    },
    /// Maximum-entropy point estimate from summary counts.
    Maxent {
        counts: PathBuf,
        #[arg(long)]
        evidence: Option<String>,
        #[command(flatten)]
        common: CommonOut,
    },
    /// Fit the latent-class mixture by EM.
    Fit {
        /// CSV with header z,m,y,w[,x1,...].
        data: PathBuf,
        /// Keep only the six monotone classes.
        #[arg(long, default_value = "true")]
        monotonic: String,
        /// Cross-cell parameter sharing: none|shared-means|shared-variances.
        #[arg(long, default_value = "none")]
        restriction: String,
        /// Flat key=value file overriding EM settings
        /// (max_iter, rel_tol, n_starts, seed, variance_floor).
        #[arg(long)]
        config: Option<PathBuf>,
        /// RNG seed (overrides the config file).
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: CommonOut,
    },
    /// Posterior attribution queries against a fitted model.
    Attribute {
        /// Fit JSON produced by `fit`.
        fit: PathBuf,
        /// Evidence "z,m,y"; "empty" for the whole population.
        #[arg(long)]
        evidence: String,
        /// Unit-level CSV; required when the fit uses covariates.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Secondary-outcome value refining the posterior.
        #[arg(long)]
        w: Option<f64>,
        /// Posterior curve over "wmin:wmax:steps" (requires --out; writes a
        /// crossings JSON sidecar next to the CSV).
        #[arg(long)]
        curve: Option<String>,
        /// Attribution-share JSON; "default" for the built-in two-cause
        /// table. Adds responsibility totals to the output.
        #[arg(long)]
        shares: Option<String>,
        #[command(flatten)]
        common: CommonOut,
    },
    /// Generate synthetic data.
    Simulate {
        /// Design: "d4" (covariate simulation) or "asbestos" (summary-data
        /// replica).
        #[arg(long)]
        design: String,
        /// Sample size (d4 design only).
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Error distribution for the d4 design:
        /// normal|t5|uniform|bernoulli|gamma.
        #[arg(long, default_value = "normal")]
        error_dist: String,
        /// Append the latent class column.
        #[arg(long)]
        ground_truth: bool,
        /// Output CSV path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bootstrap confidence intervals for a named pipeline.
    Bootstrap {
        data: PathBuf,
        /// Pipeline: "mean-w", "fit", or "fit+attribute".
        #[arg(long)]
        pipeline: String,
        /// Number of replicates.
        #[arg(short = 'B', long = "replicates", default_value_t = 500)]
        replicates: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Evidence for the fit+attribute pipeline.
        #[arg(long)]
        evidence: Option<String>,
        #[arg(long, default_value = "true")]
        monotonic: String,
        #[arg(long, default_value = "none")]
        restriction: String,
        /// EM config file for fit pipelines.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOut,
    },
}

fn parse_bool(s: &str, flag: &str) -> Result<bool, CliError> {
    match s {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(CliError::Usage(format!("--{flag} must be true or false"))),
    }
}

/// Errors with their process exit codes.
enum CliError {
    Usage(String),
    Model(String),
    Io(String),
}

impl From<intercause::Error> for CliError {
    fn from(e: intercause::Error) -> Self {
        use intercause::Error::*;
        match e {
            Io(_) | Csv(_) => CliError::Io(e.to_string()),
            InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Model(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn parse_evidence(s: &str) -> Result<Evidence, CliError> {
    Evidence::from_str(s).map_err(|e| CliError::Usage(e.to_string()))
}

fn read_em_config(
    path: Option<&PathBuf>,
    seed_override: Option<u64>,
) -> Result<EmConfig, CliError> {
    let mut cfg = EmConfig::default();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)?;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "config line {}: expected key=value, got {line:?}",
                    lineno + 1
                )));
            };
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| {
                CliError::Usage(format!("config line {}: bad {what} {value:?}", lineno + 1))
            };
            match key {
                "max_iter" => cfg.max_iter = value.parse().map_err(|_| bad("max_iter"))?,
                "rel_tol" => cfg.rel_tol = value.parse().map_err(|_| bad("rel_tol"))?,
                "n_starts" => cfg.n_starts = value.parse().map_err(|_| bad("n_starts"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                "variance_floor" => {
                    cfg.variance_floor = value.parse().map_err(|_| bad("variance_floor"))?
                }
                other => {
                    return Err(CliError::Usage(format!(
                        "config line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
    }
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run() -> Result<(), CliError> {
    let cli = Cli::try_parse().map_err(|e| {
        // clap already renders help/version to stdout with success.
        if e.kind() == clap::error::ErrorKind::DisplayHelp
            || e.kind() == clap::error::ErrorKind::DisplayVersion
        {
            let _ = e.print();
            std::process::exit(0);
        }
        CliError::Usage(e.to_string())
    })?;

    match cli.command {
        Command::Bounds { counts, evidence, common } => {
            let counts = CellCounts::from_csv_path(&counts)?;
            let rates = rates_from_counts(&counts);
            let report = monotonicity_consistency(&rates);
            if !report.consistent {
                return Err(CliError::Model(format!(
                    "observed rates reject monotonicity: {}",
                    report.violations.join("; ")
                )));
            }
            let target = OutputTarget::new(common.out.as_deref())?;
            let ev = evidence.as_deref().map(parse_evidence).transpose()?;
            match ev {
                None | Some(Evidence::Empty) => {
                    // Population bounds plus the conditioned variant for
                    // every evidence cell with positive mass.
                    let b = class_bounds_mono(&rates)?;
                    let mut per_cell = Vec::new();
                    for cell_ev in Evidence::all_observed() {
                        let Evidence::Observed { z, m, y } = cell_ev else { unreachable!() };
                        if rates.evidence_mass(z, m, y) > 0.0 {
                            per_cell
                                .push((cell_ev.to_string(), posterior_bounds(&rates, cell_ev)?));
                        }
                    }
                    output::write_bounds(target, common.format, "empty", &b, Some(&per_cell))?;
                }
                Some(ev) => {
                    let b = posterior_bounds(&rates, ev)?;
                    output::write_bounds(target, common.format, &ev.to_string(), &b, None)?;
                }
            }
        }
        Command::Maxent { counts, evidence, common } => {
            let counts = CellCounts::from_csv_path(&counts)?;
            let rates = rates_from_counts(&counts);
            let target = OutputTarget::new(common.out.as_deref())?;
            let ev = evidence.as_deref().map(parse_evidence).transpose()?;
            match ev {
                None | Some(Evidence::Empty) => {
                    let dist = maxent_mono(&rates)?;
                    let mut per_cell = Vec::new();
                    for cell_ev in Evidence::all_observed() {
                        let Evidence::Observed { z, m, y } = cell_ev else { unreachable!() };
                        if rates.evidence_mass(z, m, y) > 0.0 {
                            per_cell
                                .push((cell_ev.to_string(), maxent_posterior(&rates, cell_ev)?));
                        }
                    }
                    output::write_distribution(
                        target,
                        common.format,
                        "empty",
                        &dist,
                        Some(&per_cell),
                    )?;
                }
                Some(ev) => {
                    let dist = maxent_posterior(&rates, ev)?;
                    output::write_distribution(target, common.format, &ev.to_string(), &dist, None)?;
                }
            }
        }
        Command::Fit { data, monotonic, restriction, config, seed, common } => {
            let monotonic = parse_bool(&monotonic, "monotonic")?;
            let restriction = Restriction::from_str(&restriction)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let cfg = read_em_config(config.as_ref(), seed)?;
            let dataset = Dataset::from_csv_path(&data)?;
            let fit = fit_em(&dataset, monotonic, restriction, &cfg)?;
            let marginal = fit.marginal_class_probs(&dataset)?;
            let target = OutputTarget::new(common.out.as_deref())?;
            fitfile::write_fit(target, common.format, &fit, monotonic, &cfg, &marginal)?;
        }
        Command::Attribute { fit, evidence, data, w, curve, shares, common } => {
            let fitfile = fitfile::read_fit(&fit)?;
            let params = fitfile.params;
            if params.classes != intercause::latent::enumerate_classes(fitfile.monotonic) {
                return Err(CliError::Io(
                    "fit file class set does not match its monotonic flag".into(),
                ));
            }
            let ev = parse_evidence(&evidence)?;

            let dataset = match data {
                Some(path) => Dataset::from_csv_path(&path)?,
                None => {
                    if params.dim() != 1 {
                        return Err(CliError::Usage(
                            "this fit uses covariates; pass the dataset with --data".into(),
                        ));
                    }
                    // Covariate-free models are invariant to the units, so a
                    // stub with one unit per stratum suffices.
                    stub_dataset()
                }
            };
            let ma = ModelAttribution::new(&params, &dataset)
                .map_err(|e| CliError::Model(e.to_string()))?;

            let attr_matrix = match &shares {
                None => None,
                Some(s) if s == "default" => Some(AttributionMatrix::default_two_cause()),
                Some(path) => {
                    let text = std::fs::read_to_string(path)?;
                    let m: AttributionMatrix = serde_json::from_str(&text)
                        .map_err(|e| CliError::Usage(format!("bad shares file: {e}")))?;
                    Some(m)
                }
            };

            if let Some(spec) = curve {
                let out_path = common.out.clone().ok_or_else(|| {
                    CliError::Usage("--curve requires --out for the CSV".into())
                })?;
                let grid = parse_grid(&spec)?;
                let curve = ma.posterior_curve(ev, &grid)?;
                output::write_curve(&out_path, &curve)?;
                return Ok(());
            }

            let posterior = match w {
                None => ma.posterior_given_evidence(ev)?,
                Some(w) => {
                    let ext = ExtendedEvidence::new(ev, w)?;
                    ma.posterior_given_extended(&ext)?
                }
            };
            let shares_out = match &attr_matrix {
                Some(m) => Some(responsibility_shares(&posterior, m)?),
                None => None,
            };
            let target = OutputTarget::new(common.out.as_deref())?;
            output::write_posterior(
                target,
                common.format,
                &ev.to_string(),
                w,
                &posterior,
                shares_out.as_ref(),
            )?;
        }
        Command::Simulate { design, n, seed, error_dist, ground_truth, out } => {
            let (dataset, labels) = match design.as_str() {
                "asbestos" => (generate_asbestos_replica(seed), None),
                "d4" => {
                    let dist = ErrorDist::from_str(&error_dist)
                        .map_err(|e| CliError::Usage(e.to_string()))?;
                    let cfg = SimConfig::new(n, seed, dist)
                        .map_err(|e| CliError::Usage(e.to_string()))?;
                    let (d, l) = generate_simulation(&cfg)?;
                    (d, Some(l))
                }
                other => {
                    return Err(CliError::Usage(format!(
                        "--design must be d4 or asbestos, got {other:?}"
                    )))
                }
            };
            let labels = if ground_truth { labels.as_deref() } else { None };
            match out {
                Some(path) => {
                    let file = std::fs::File::create(&path)?;
                    dataset.write_csv(file, labels)?;
                }
                None => {
                    dataset.write_csv(std::io::stdout().lock(), labels)?;
                }
            }
        }
        Command::Bootstrap {
            data,
            pipeline,
            replicates,
            seed,
            evidence,
            monotonic,
            restriction,
            config,
            common,
        } => {
            let dataset = Dataset::from_csv_path(&data)?;
            let monotonic = parse_bool(&monotonic, "monotonic")?;
            let restriction = Restriction::from_str(&restriction)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let mut em_cfg = read_em_config(config.as_ref(), None)?;
            // Replicate fits get their own stream from the resample index;
            // the EM seed stays fixed.
            em_cfg.seed = seed;
            let boot_cfg = BootstrapConfig { replicates, seed, ..Default::default() };

            let estimator: Box<
                dyn Fn(&Dataset) -> intercause::Result<BTreeMap<String, f64>> + Sync,
            > = match pipeline.as_str() {
                "mean-w" => Box::new(|d: &Dataset| {
                    let m = d.records().iter().map(|r| r.w).sum::<f64>() / d.len() as f64;
                    Ok(BTreeMap::from([("mean_w".to_string(), m)]))
                }),
                "fit" => Box::new(move |d: &Dataset| {
                    let fit = fit_em(d, monotonic, restriction, &em_cfg)?;
                    let marginal = fit.marginal_class_probs(d)?;
                    Ok(marginal
                        .iter()
                        .map(|(g, p)| (format!("pi_{g}"), p))
                        .collect())
                }),
                "fit+attribute" => {
                    let ev = parse_evidence(evidence.as_deref().ok_or_else(|| {
                        CliError::Usage("fit+attribute needs --evidence".into())
                    })?)?;
                    Box::new(move |d: &Dataset| {
                        let fit = fit_em(d, monotonic, restriction, &em_cfg)?;
                        let ma = ModelAttribution::new(&fit.params, d)?;
                        let post = ma.posterior_given_evidence(ev)?;
                        Ok(post
                            .iter()
                            .map(|(g, p)| (format!("post_{g}"), p))
                            .collect())
                    })
                }
                other => {
                    return Err(CliError::Usage(format!(
                        "--pipeline must be mean-w, fit, or fit+attribute, got {other:?}"
                    )))
                }
            };
            let result = bootstrap(&dataset, estimator.as_ref(), &boot_cfg)?;
            let target = OutputTarget::new(common.out.as_deref())?;
            output::write_bootstrap(target, common.format, &result)?;
        }
    }
    Ok(())
}

/// One unit per stratum with x = (1); placeholder data for covariate-free
/// attribution queries.
fn stub_dataset() -> Dataset {
    let mut records = Vec::new();
    for z in 0..2u8 {
        for m in 0..2u8 {
            for y in 0..2u8 {
                records.push(UnitRecord { z, m, y, w: 0.0, x: vec![1.0] });
            }
        }
    }
    Dataset::new(records).expect("stub dataset is valid")
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::Usage(format!(
            "--curve expects wmin:wmax:steps, got {spec:?}"
        )));
    }
    let wmin: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::Usage(format!("bad wmin {:?}", parts[0])))?;
    let wmax: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::Usage(format!("bad wmax {:?}", parts[1])))?;
    let steps: usize = parts[2]
        .parse()
        .map_err(|_| CliError::Usage(format!("bad steps {:?}", parts[2])))?;
    if steps < 2 || wmax <= wmin {
        return Err(CliError::Usage(
            "--curve needs wmax > wmin and at least 2 steps".into(),
        ));
    }
    Ok((0..steps)
        .map(|i| wmin + (wmax - wmin) * i as f64 / (steps - 1) as f64)
        .collect())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Model(msg)) => {
            eprintln!("model error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Io(msg)) => {
            eprintln!("io error: {msg}");
            ExitCode::from(3)
        }
    }
}
