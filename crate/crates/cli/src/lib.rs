//! Front end for the swarmfield simulator: scenario files, output bundles
//! (CSV traces, SVG figures, manifest) and the `run`, `batch` and `validate`
//! commands.

pub mod csv;
pub mod error;
pub mod manifest;
pub mod plot;
pub mod scenario;

use std::path::{Path, PathBuf};

use log::info;
use serde_json::json;
use swarmfield::sim::{final_report, monte_carlo, run, BatchReport, RunSummary, RunTrace};
use swarmfield::ScenarioConfig;

pub use error::CliError;
use manifest::{sha256_hex, Derived, Manifest};
use scenario::{parse_str, Overrides};

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub scenario: PathBuf,
    /// Falls back to the scenario's seed.
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub overrides: Overrides,
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub scenario: PathBuf,
    pub seeds: usize,
    /// First seed; falls back to the scenario's seed.
    pub base_seed: Option<u64>,
    pub out: PathBuf,
    pub parallel: Option<usize>,
    pub require_safe: Option<f64>,
    pub overrides: Overrides,
}

#[derive(Debug)]
pub struct RunOutput {
    pub trace: RunTrace,
    pub summary: RunSummary,
    pub files: Vec<PathBuf>,
}

struct Loaded {
    text: String,
    config: ScenarioConfig,
}

fn load(path: &Path, overrides: &Overrides) -> Result<Loaded, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Input { path: path.to_path_buf(), source })?;
    let (_, config) = parse_str(&text, overrides)?;
    Ok(Loaded { text, config })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

fn file_names(files: &[PathBuf]) -> Vec<String> {
    files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect()
}

fn summary_json(s: &RunSummary) -> serde_json::Value {
    json!({
        "seed": s.seed,
        "steps_executed": s.steps_executed,
        "min_distance": s.min_distance,
        "first_unsafe_step": s.first_unsafe_step,
        "safe": s.safe,
        "converged": s.converged,
        "max_final_goal_distance": s.final_goal_distances.iter().copied().fold(0.0, f64::max),
        "wind_opposite_heading": s.wind_opposite_heading,
        "covariance_bound_held": s.covariance_bound_held,
        "gain_perturbation": s.gain_perturbation,
        "gain_condition_held": s.gain_condition_held,
        "envelope_fraction": s.envelope_fraction,
        "margin_violation_steps": s.margin_violation_steps,
        "aborted": s.aborted,
    })
}

/// Parses and validates a scenario without running it.
pub fn validate_scenario(path: &Path, overrides: &Overrides) -> Result<ScenarioConfig, CliError> {
    load(path, overrides).map(|l| l.config)
}

/// Single run. The bundle is written even when the run aborts; the abort is
/// then reported as an error.
pub fn run_command(opts: &RunOptions) -> Result<RunOutput, CliError> {
    let loaded = load(&opts.scenario, &opts.overrides)?;
    let cfg = &loaded.config;
    let seed = opts.seed.unwrap_or(cfg.seed);
    ensure_dir(&opts.out)?;
    info!("running {} agents for {} steps, seed {seed}", cfg.agents.len(), cfg.steps);
    let (trace, summary) = run(cfg, seed);

    let mut files = Vec::new();
    let trace_path = opts.out.join("trace.csv");
    csv::emit_trace_csv(&trace, &trace_path)?;
    files.push(trace_path);
    let summary_path = opts.out.join("summary.csv");
    csv::emit_batch_summary(std::slice::from_ref(&summary), &summary_path)?;
    files.push(summary_path);
    let final_path = opts.out.join("final.csv");
    csv::emit_final_report(&final_report(&summary, cfg.noise.final_tolerance), &final_path)?;
    files.push(final_path);
    files.extend(plot::emit_plots(&trace, &summary, cfg, &opts.out)?);

    let m = Manifest {
        tool: "swarmfield",
        version: manifest::VERSION,
        command: "run",
        scenario_path: opts.scenario.display().to_string(),
        scenario_sha256: sha256_hex(loaded.text.as_bytes()),
        seeds: vec![seed],
        mode: cfg.mode.to_string(),
        overrides: (&opts.overrides).into(),
        derived: Derived::of(cfg),
        outputs: file_names(&files),
        results: summary_json(&summary),
    };
    files.push(manifest::write_manifest(&m, &opts.out)?);

    if let Some(reason) = &trace.aborted {
        return Err(CliError::Aborted(reason.clone()));
    }
    Ok(RunOutput { trace, summary, files })
}

/// Seeded Monte Carlo batch over `base_seed .. base_seed + seeds`.
pub fn batch_command(opts: &BatchOptions) -> Result<BatchReport, CliError> {
    if let Some(r) = opts.require_safe {
        if !(0.0..=1.0).contains(&r) {
            return Err(CliError::Validation(vec![format!("--require-safe must lie in [0, 1] (got {r})")]));
        }
    }
    if opts.seeds == 0 {
        return Err(CliError::Validation(vec!["--seeds must be >= 1".to_string()]));
    }
    let loaded = load(&opts.scenario, &opts.overrides)?;
    let cfg = &loaded.config;
    let base = opts.base_seed.unwrap_or(cfg.seed);
    let seeds: Vec<u64> = (0..opts.seeds as u64).map(|k| base.wrapping_add(k)).collect();
    ensure_dir(&opts.out)?;
    info!("batch of {} runs from seed {base}", seeds.len());
    let report = monte_carlo(cfg, &seeds, opts.parallel);

    let mut files = Vec::new();
    let summary_path = opts.out.join("summary.csv");
    csv::emit_batch_summary(&report.runs, &summary_path)?;
    files.push(summary_path);
    files.extend(plot::emit_batch_plots(&report.runs, cfg, &opts.out)?);

    let q = report.goal_distance_quantiles;
    let m = Manifest {
        tool: "swarmfield",
        version: manifest::VERSION,
        command: "batch",
        scenario_path: opts.scenario.display().to_string(),
        scenario_sha256: sha256_hex(loaded.text.as_bytes()),
        seeds: seeds.clone(),
        mode: cfg.mode.to_string(),
        overrides: (&opts.overrides).into(),
        derived: Derived::of(cfg),
        outputs: file_names(&files),
        results: json!({
            "safe_fraction": report.safe_fraction,
            "converged_fraction": report.converged_fraction,
            "worst_min_distance": report.worst_min_distance,
            "goal_distance_quantiles": { "q05": q.q05, "q50": q.q50, "q95": q.q95, "max": q.max },
            "failed_runs": report.failed_runs,
        }),
    };
    manifest::write_manifest(&m, &opts.out)?;

    if report.failed_runs > 0 {
        let first = report.runs.iter().find_map(|r| r.aborted.clone()).unwrap_or_default();
        return Err(CliError::Aborted(format!("{} run(s) aborted; first: {first}", report.failed_runs)));
    }
    if let Some(required) = opts.require_safe {
        if report.safe_fraction < required {
            return Err(CliError::BelowThreshold { actual: report.safe_fraction, required });
        }
    }
    Ok(report)
}
