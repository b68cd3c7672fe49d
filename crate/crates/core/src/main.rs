use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use geolab::experiments::{run, Experiment, ExperimentConfig};
use geolab::par::{init_threads, Execution};

/// Runs one geometry experiment and writes a JSON report.
///
/// Exit status: 0 when every claim passes, 1 when a claim fails, 2 on a
/// configuration or runtime error.
#[derive(Parser, Debug)]
#[command(name = "geolab", version)]
struct Cli {
    experiment: Experiment,
    /// JSON config; fields not given fall back to defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report path; defaults to the config's `output`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the per-sample CSV dump, when the experiment has one.
    #[arg(long)]
    csv: Option<PathBuf>,

    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long = "rng-seed")]
    rng_seed: Option<u64>,
    #[arg(long)]
    curvature: Option<f64>,
    #[arg(long)]
    execution: Option<ExecArg>,
    #[arg(long = "node-budget")]
    node_budget: Option<usize>,

    #[arg(long = "samples.grid")]
    grid: Option<usize>,
    #[arg(long = "samples.grid-seeds")]
    grid_seeds: Option<usize>,
    #[arg(long = "samples.probe-dirs")]
    probe_dirs: Option<usize>,
    #[arg(long = "samples.midpoint-trials")]
    midpoint_trials: Option<usize>,
    #[arg(long = "samples.comparison-trials")]
    comparison_trials: Option<usize>,
    #[arg(long = "samples.profile-trials")]
    profile_trials: Option<usize>,
    #[arg(long = "samples.profile-samples")]
    profile_samples: Option<usize>,
    #[arg(long = "samples.halfspace-systems")]
    halfspace_systems: Option<usize>,
    #[arg(long = "samples.halfspace-samples")]
    halfspace_samples: Option<usize>,
    #[arg(long = "samples.max-dim")]
    max_dim: Option<usize>,

    #[arg(long = "tolerances.min-tol")]
    min_tol: Option<f64>,
    #[arg(long = "tolerances.sep-tol")]
    sep_tol: Option<f64>,
    #[arg(long = "tolerances.tol-conv")]
    tol_conv: Option<f64>,
    #[arg(long = "tolerances.probe-radius")]
    probe_radius: Option<f64>,

    #[arg(long = "search.min-step")]
    min_step: Option<f64>,
    #[arg(long = "search.max-iterations")]
    max_iterations: Option<usize>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum ExecArg {
    Sequential,
    Parallel,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl Cli {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        cfg.experiment = self.experiment;
        set(&mut cfg.seeds, self.seeds);
        set(&mut cfg.rng_seed, self.rng_seed);
        set(&mut cfg.curvature, self.curvature);
        set(&mut cfg.node_budget, self.node_budget);
        if let Some(e) = self.execution {
            cfg.execution = match e {
                ExecArg::Sequential => Execution::Sequential,
                ExecArg::Parallel => Execution::Parallel,
            };
        }
        let s = &mut cfg.samples;
        set(&mut s.grid, self.grid);
        set(&mut s.grid_seeds, self.grid_seeds);
        set(&mut s.probe_dirs, self.probe_dirs);
        set(&mut s.midpoint_trials, self.midpoint_trials);
        set(&mut s.comparison_trials, self.comparison_trials);
        set(&mut s.profile_trials, self.profile_trials);
        set(&mut s.profile_samples, self.profile_samples);
        set(&mut s.halfspace_systems, self.halfspace_systems);
        set(&mut s.halfspace_samples, self.halfspace_samples);
        set(&mut s.max_dim, self.max_dim);
        let t = &mut cfg.tolerances;
        set(&mut t.min_tol, self.min_tol);
        set(&mut t.sep_tol, self.sep_tol);
        set(&mut t.tol_conv, self.tol_conv);
        set(&mut t.probe_radius, self.probe_radius);
        set(&mut cfg.search.min_step, self.min_step);
        set(&mut cfg.search.max_iterations, self.max_iterations);
    }
}

fn load(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?
        }
        None => ExperimentConfig::default(),
    };
    cli.apply(&mut cfg);
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("GEOLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        init_threads(n);
    }
    let cfg = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("geolab: {e}");
            return ExitCode::from(2);
        }
    };
    let report = match run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("geolab: {} failed: {e}", cfg.experiment.name());
            return ExitCode::from(2);
        }
    };
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let out = cli.out.clone().or_else(|| cfg.output.clone().map(PathBuf::from));
    let written = match &out {
        Some(path) => std::fs::write(path, json + "\n"),
        None => {
            println!("{json}");
            Ok(())
        }
    };
    let written = written.and_then(|_| match (&cli.csv, &report.csv) {
        (Some(path), Some(csv)) => std::fs::write(path, csv),
        _ => Ok(()),
    });
    if let Err(e) = written {
        eprintln!("geolab: writing output: {e}");
        return ExitCode::from(2);
    }
    for c in &report.claims {
        eprintln!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.id);
    }
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
