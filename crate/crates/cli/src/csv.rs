//! CSV emitters for traces, batch summaries and final-state tables.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use swarmfield::sim::{FinalRow, RunSummary, RunTrace};

use crate::error::CliError;

pub const TRACE_HEADER: &str =
    "t,agent_id,x,y,theta,x_hat,y_hat,theta_hat,u_cmd,omega_cmd,goal_dist,min_pair_dist,est_err";
pub const BATCH_HEADER: &str = "seed,min_dist,safe,max_final_goal_dist,converged";
pub const FINAL_HEADER: &str = "agent_id,goal_dist,eps_f,theta,wind_opposite,alignment_err";

const SIGNIFICANT: usize = 9;

/// Formats `v` with 9 significant digits, in positional notation when the
/// magnitude allows it.
pub fn sig(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let sci = format!("{:.*e}", SIGNIFICANT - 1, v);
    let exp: i32 = sci.split_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    let decimals = SIGNIFICANT as i32 - 1 - exp;
    if (0..=17).contains(&decimals) {
        let rounded: f64 = sci.parse().unwrap_or(v);
        format!("{:.*}", decimals as usize, rounded)
    } else {
        sci
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn finish(path: &Path, result: io::Result<()>) -> Result<(), CliError> {
    result.map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn write_trace<W: Write>(trace: &RunTrace, mut w: W) -> io::Result<()> {
    writeln!(w, "{TRACE_HEADER}")?;
    for rec in &trace.records {
        let t = sig(rec.t);
        let min_pair = sig(rec.min_pair_distance);
        for (id, a) in rec.agents.iter().enumerate() {
            writeln!(
                w,
                "{t},{id},{},{},{},{},{},{},{},{},{},{min_pair},{}",
                sig(a.state.position.x),
                sig(a.state.position.y),
                sig(a.state.heading),
                sig(a.estimate.position.x),
                sig(a.estimate.position.y),
                sig(a.estimate.heading),
                sig(a.command.linear_speed),
                sig(a.command.angular_rate),
                sig(a.goal_distance),
                sig(a.estimation_error),
            )?;
        }
    }
    w.flush()
}

pub fn emit_trace_csv(trace: &RunTrace, path: &Path) -> Result<(), CliError> {
    let w = create(path)?;
    finish(path, write_trace(trace, w))
}

pub fn write_batch_summary<W: Write>(runs: &[RunSummary], mut w: W) -> io::Result<()> {
    writeln!(w, "{BATCH_HEADER}")?;
    for r in runs {
        let max_goal = r.final_goal_distances.iter().copied().fold(0.0, f64::max);
        writeln!(w, "{},{},{},{},{}", r.seed, sig(r.min_distance), r.safe, sig(max_goal), r.converged)?;
    }
    w.flush()
}

pub fn emit_batch_summary(runs: &[RunSummary], path: &Path) -> Result<(), CliError> {
    let w = create(path)?;
    finish(path, write_batch_summary(runs, w))
}

pub fn write_final_report<W: Write>(rows: &[FinalRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{FINAL_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.agent,
            sig(r.goal_distance),
            sig(r.final_tolerance),
            sig(r.heading),
            sig(r.wind_opposite),
            sig(r.alignment_error)
        )?;
    }
    w.flush()
}

pub fn emit_final_report(rows: &[FinalRow], path: &Path) -> Result<(), CliError> {
    let w = create(path)?;
    finish(path, write_final_report(rows, w))
}
