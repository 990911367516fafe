use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use swarmfield::Mode;
use swarmfield_cli::scenario::Overrides;
use swarmfield_cli::{batch_command, run_command, validate_scenario, BatchOptions, CliError, RunOptions};

/// Wind-disturbed multi-agent coordination simulator.
#[derive(Debug, Parser)]
#[command(name = "swarmfield", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write its trace, figures and manifest.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run a seeded Monte Carlo batch.
    Batch {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seeds: usize,
        #[arg(long)]
        base_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads.
        #[arg(long)]
        parallel: Option<usize>,
        /// Exit with status 3 when the safe fraction is below this value.
        #[arg(long)]
        require_safe: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Check a scenario file and print the derived quantities.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Turn off wind and measurement noise.
    #[arg(long)]
    no_noise: bool,
    /// Replace the derived error bounds: `<eps_d>,<eps_theta>`.
    #[arg(long, value_parser = parse_margins, allow_hyphen_values = true)]
    override_margins: Option<(f64, f64)>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { mode: self.mode, no_noise: self.no_noise, margins: self.override_margins }
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: swarmfield::Error| e.to_string())
}

fn parse_margins(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected <eps_d>,<eps_theta>, got `{s}`"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("eps_d: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("eps_theta: {e}"))?;
    Ok((a, b))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { scenario, seed, out, common } => {
            let o = run_command(&RunOptions { scenario, seed, out: out.clone(), overrides: common.overrides() })?;
            let s = &o.summary;
            println!(
                "seed {}: min distance {:.4} m ({}), max final goal distance {:.4} m ({})",
                s.seed,
                s.min_distance,
                if s.safe { "safe" } else { "UNSAFE" },
                s.final_goal_distances.iter().copied().fold(0.0, f64::max),
                if s.converged { "converged" } else { "not converged" },
            );
            println!("wrote {} files to {}", o.files.len(), out.display());
        }
        Command::Batch { scenario, seeds, base_seed, out, parallel, require_safe, common } => {
            let opts = BatchOptions { scenario, seeds, base_seed, out, parallel, require_safe, overrides: common.overrides() };
            let r = batch_command(&opts)?;
            let q = r.goal_distance_quantiles;
            println!(
                "{} runs: safe {:.3}, converged {:.3}, worst min distance {:.4} m",
                r.runs.len(),
                r.safe_fraction,
                r.converged_fraction,
                r.worst_min_distance
            );
            println!("final goal distance q05 {:.4} q50 {:.4} q95 {:.4} max {:.4} m", q.q05, q.q50, q.q95, q.max);
        }
        Command::Validate { scenario, common } => {
            let cfg = validate_scenario(&scenario, &common.overrides())?;
            let d = swarmfield_cli::manifest::Derived::of(&cfg);
            println!("{}: ok ({} agents, {} steps, mode {})", scenario.display(), cfg.agents.len(), cfg.steps, cfg.mode);
            println!(
                "eps_d {:.4}  d_m' {:.4}  eps_J {:.4}  R_c {:.4}  d_r {:.4}  d_eps {:.4}  eps_f {:.4}",
                d.eps_d, d.d_m_inflated, d.eps_j, d.comm_radius, d.d_r, d.d_eps, d.eps_f
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SWARMFIELD_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
