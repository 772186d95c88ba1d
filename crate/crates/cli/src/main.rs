use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use conifold_core::experiment::{self, Experiment, ExperimentConfig};
use conifold_core::Error;

const THREADS_VAR: &str = "CONIFOLD_LAB_THREADS";

/// Run a conifold-lab experiment and write its report.
///
/// Exit status: 0 when every assert passes, 1 when an assert fails, 2 on a
/// configuration or I/O error.
#[derive(Parser, Debug)]
#[command(name = "conifold-lab", version)]
struct Args {
    /// estimates, diam-scaling, gh-converge, ricci-audit or profile-table
    experiment: String,

    /// Flat `key = value` configuration file; command-line options win.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Strictly decreasing list of t values in (0, 1].
    #[arg(long = "t-grid")]
    t_grid: Option<String>,

    /// Log-radius values for profile-table and ricci-audit.
    #[arg(long = "rho-grid", allow_hyphen_values = true)]
    rho_grid: Option<String>,

    /// Number of sample points.
    #[arg(long)]
    n: Option<String>,

    /// Graph neighbour count.
    #[arg(long)]
    k: Option<String>,

    #[arg(long)]
    seed: Option<String>,

    #[arg(long)]
    out: Option<PathBuf>,

    /// csv or json
    #[arg(long)]
    format: Option<String>,

    /// Override a tolerance, e.g. `--tol ricci_matrix=1e-5`. Repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tol: Vec<String>,
}

fn build_config(args: &Args) -> Result<ExperimentConfig, Error> {
    let experiment: Experiment = args.experiment.parse()?;
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::from_kv_file(path, Some(experiment))?,
        None => ExperimentConfig::new(experiment),
    };
    cfg.set("experiment", &args.experiment)?;
    let overrides = [
        ("t_grid", args.t_grid.as_deref()),
        ("rho_grid", args.rho_grid.as_deref()),
        ("n_samples", args.n.as_deref()),
        ("graph_k", args.k.as_deref()),
        ("seed", args.seed.as_deref()),
        ("format", args.format.as_deref()),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    if let Some(out) = &args.out {
        cfg.output_path = out.clone();
    }
    for t in &args.tol {
        let (name, value) = t
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--tol expects NAME=VALUE, got `{t}`")))?;
        cfg.set(&format!("tol.{}", name.trim()), value.trim())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn configure_threads() -> Result<(), Error> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        Error::Config(format!(
            "{THREADS_VAR} must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();

    let cfg = match configure_threads().and_then(|_| build_config(&args)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("conifold-lab: {e}");
            return ExitCode::from(2);
        }
    };
    let (report, code) = experiment::run(&cfg);
    match report {
        Some(r) => {
            println!("{}", r.summary());
            println!("report written to {}", cfg.output_path.display());
        }
        None => eprintln!("conifold-lab: run failed"),
    }
    ExitCode::from(code as u8)
}
