//! `basket-sim`: runs a simulation plan and writes plot-ready CSV tables.
//!
//! Flags are applied on top of the configuration file before it is resolved,
//! so they take precedence over anything the file sets.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use basket_core::report::{emit_results, parse_config, RunConfig, SUMMARY_FILE};
use basket_core::sim::run_plan;
use clap::Parser;
use toml::{Table, Value};

#[derive(Debug, Parser)]
#[command(name = "basket-sim", version, about = "Compare basket-trial response-rate estimators by simulation")]
struct Args {
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario ids, comma separated (e.g. 1.A.2,2.B.1)
    #[arg(long, value_delimiter = ',')]
    scenarios: Option<Vec<String>>,
    /// Method names, comma separated (e.g. berry_bhm,fujikawa)
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    /// Patients per cohort, comma separated
    #[arg(long, value_delimiter = ',')]
    sample_sizes: Option<Vec<u64>>,
    /// Replications per scenario and sample size
    #[arg(long)]
    reps: Option<u64>,
    /// Master seed; every trial and fit derives its own stream from it
    #[arg(long)]
    seed: Option<u64>,
    /// Re-centre the estimator priors on this response rate
    #[arg(long)]
    prior_mean: Option<f64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Parallel workers; results do not depend on this
    #[arg(long)]
    workers: Option<u64>,
    /// Retained MCMC iterations per fit
    #[arg(long)]
    mcmc_iters: Option<u64>,
    /// MCMC burn-in iterations per fit
    #[arg(long)]
    mcmc_burnin: Option<u64>,
}

fn int(v: u64) -> Result<Value, String> {
    i64::try_from(v).map(Value::Integer).map_err(|_| format!("{v} is too large"))
}

fn strings(items: Vec<String>) -> Value {
    Value::Array(items.into_iter().map(Value::String).collect())
}

/// Merges flag values into the configuration document and resolves it.
fn resolve(args: Args) -> Result<RunConfig, String> {
    let mut doc: Table = match &args.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?
            .parse()
            .map_err(|e: toml::de::Error| format!("{}: {}", path.display(), e.message()))?,
        None => Table::new(),
    };
    if let Some(v) = args.scenarios {
        doc.insert("scenarios".into(), strings(v));
    }
    if let Some(v) = args.methods {
        doc.insert("methods".into(), strings(v));
    }
    if let Some(v) = args.sample_sizes {
        let sizes = v.into_iter().map(int).collect::<Result<_, _>>()?;
        doc.insert("sample_sizes".into(), Value::Array(sizes));
    }
    if let Some(v) = args.reps {
        doc.insert("n_reps".into(), int(v)?);
    }
    if let Some(v) = args.seed {
        doc.insert("seed".into(), int(v)?);
    }
    if let Some(v) = args.prior_mean {
        doc.insert("prior_mean".into(), Value::Float(v));
    }
    if let Some(v) = args.out {
        doc.insert("out_dir".into(), Value::String(v.to_string_lossy().into_owned()));
    }
    if let Some(v) = args.workers {
        doc.insert("workers".into(), int(v)?);
    }
    if args.mcmc_iters.is_some() || args.mcmc_burnin.is_some() {
        let mcmc = doc
            .entry("mcmc")
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or("`mcmc` must be a table")?;
        if let Some(v) = args.mcmc_iters {
            mcmc.insert("n_keep".into(), int(v)?);
        }
        if let Some(v) = args.mcmc_burnin {
            mcmc.insert("n_burn".into(), int(v)?);
        }
    }
    let text = toml::to_string(&doc).map_err(|e| e.to_string())?;
    let cfg = parse_config(&text).map_err(|e| e.to_string())?;
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn run(args: Args) -> Result<(), String> {
    let cfg = resolve(args)?;
    let plan = cfg.to_plan().map_err(|e| e.to_string())?;
    let cells = plan.scenarios.len() * plan.sample_sizes.len() * plan.methods.len();
    eprintln!(
        "running {cells} cells x {} replications with {} worker(s)",
        plan.n_reps, plan.workers
    );
    let start = Instant::now();
    let out = run_plan(&plan).map_err(|e| e.to_string())?;
    emit_results(&out.metrics, &cfg, &cfg.out_dir).map_err(|e| e.to_string())?;
    eprintln!(
        "wrote {} rows to {} in {:.1}s",
        out.metrics.len(),
        cfg.out_dir.join(SUMMARY_FILE).display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
