//! Scenario files: TOML with a fixed key set.
//!
//! ```toml
//! mode = "robust"
//! dt = 0.01
//! steps = 15000
//! seed = 42
//! d_m = 0.8
//! mu = 50.0
//! eps = 0.1
//! k_u = 1.0
//! k_omega = 2.0
//! eps_i = 0.5
//!
//! [wind]
//! profile = "constant"        # or "sinusoidal"
//! mean_x = -0.2
//! mean_y = 0.7
//! cov_xx = 0.01
//! cov_yy = 0.01
//!
//! [meas]
//! cov_x = 0.01
//! cov_y = 0.01
//! cov_theta = 0.01
//!
//! [[agents]]
//! x0 = 30.0
//! y0 = 0.0
//! theta0 = 3.0
//! goal_x = -44.7
//! goal_y = 14.5
//! radius = 0.4
//! ```
//!
//! A sinusoidal profile takes `amplitude_x`, `amplitude_y`, `period_x`,
//! `period_y`, `phase_x`, `phase_y` instead of the means. `noise_scaling`
//! (`"per_step"` or `"sqrt_dt"`) is optional.

use std::path::Path;

use nalgebra::{Matrix2, Matrix3, Vector3};
use serde::Deserialize;
use swarmfield::disturbance::{NoiseScaling, WindModel, WindProfile};
use swarmfield::scenario::{AgentInit, ScenarioSpec};
use swarmfield::{AgentState, Mode, ScenarioConfig, Vec2};

use crate::error::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    mode: Option<String>,
    dt: f64,
    steps: usize,
    seed: Option<u64>,
    d_m: f64,
    mu: Option<f64>,
    eps: f64,
    k_u: Option<f64>,
    k_omega: Option<f64>,
    eps_i: Option<f64>,
    wind: RawWind,
    meas: RawMeas,
    agents: Vec<RawAgent>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWind {
    profile: String,
    mean_x: Option<f64>,
    mean_y: Option<f64>,
    amplitude_x: Option<f64>,
    amplitude_y: Option<f64>,
    period_x: Option<f64>,
    period_y: Option<f64>,
    phase_x: Option<f64>,
    phase_y: Option<f64>,
    cov_xx: f64,
    cov_yy: f64,
    noise_scaling: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMeas {
    cov_x: f64,
    cov_y: f64,
    cov_theta: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    x0: f64,
    y0: f64,
    theta0: f64,
    goal_x: f64,
    goal_y: f64,
    radius: f64,
}

/// Overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub mode: Option<Mode>,
    /// Zero the wind (mean and covariance) and the measurement noise.
    pub no_noise: bool,
    pub margins: Option<(f64, f64)>,
}

const DEFAULT_SEED: u64 = 42;
const DEFAULT_K_U: f64 = 1.0;
const DEFAULT_K_OMEGA: f64 = 2.0;
const DEFAULT_EPS_I: f64 = 0.5;

fn wind_model(raw: &RawWind, problems: &mut Vec<String>) -> Option<WindModel> {
    let cov = Matrix2::new(raw.cov_xx, 0.0, 0.0, raw.cov_yy);
    let scaling = match raw.noise_scaling.as_deref() {
        None | Some("per_step") => NoiseScaling::PerStep,
        Some("sqrt_dt") => NoiseScaling::SqrtDt,
        Some(other) => {
            problems.push(format!("wind.noise_scaling must be `per_step` or `sqrt_dt` (got `{other}`)"));
            NoiseScaling::PerStep
        }
    };
    let sinusoid_keys = [
        ("amplitude_x", raw.amplitude_x),
        ("amplitude_y", raw.amplitude_y),
        ("period_x", raw.period_x),
        ("period_y", raw.period_y),
        ("phase_x", raw.phase_x),
        ("phase_y", raw.phase_y),
    ];
    let profile = match raw.profile.as_str() {
        "constant" => {
            for (k, v) in sinusoid_keys {
                if v.is_some() {
                    problems.push(format!("wind.{k} is only valid for the sinusoidal profile"));
                }
            }
            match (raw.mean_x, raw.mean_y) {
                (Some(x), Some(y)) => WindProfile::Constant(Vec2::new(x, y)),
                _ => {
                    problems.push("constant wind requires wind.mean_x and wind.mean_y".to_string());
                    return None;
                }
            }
        }
        "sinusoidal" => {
            if raw.mean_x.is_some() || raw.mean_y.is_some() {
                problems.push("wind.mean_x/mean_y are only valid for the constant profile".to_string());
            }
            let missing: Vec<&str> = sinusoid_keys[..4].iter().filter(|(_, v)| v.is_none()).map(|(k, _)| *k).collect();
            if !missing.is_empty() {
                problems.push(format!("sinusoidal wind is missing wind.{}", missing.join(", wind.")));
                return None;
            }
            WindProfile::Sinusoidal {
                amplitude: Vec2::new(raw.amplitude_x.unwrap_or(0.0), raw.amplitude_y.unwrap_or(0.0)),
                period: Vec2::new(raw.period_x.unwrap_or(0.0), raw.period_y.unwrap_or(0.0)),
                phase: Vec2::new(raw.phase_x.unwrap_or(0.0), raw.phase_y.unwrap_or(0.0)),
            }
        }
        other => {
            problems.push(format!("wind.profile must be `constant` or `sinusoidal` (got `{other}`)"));
            return None;
        }
    };
    Some(WindModel { profile, cov, scaling })
}

/// Parses scenario text into the user-facing specification, before any
/// quantity is derived.
pub fn parse_spec(text: &str, overrides: &Overrides) -> Result<ScenarioSpec, CliError> {
    if text.trim().is_empty() {
        return Err(CliError::Validation(vec!["scenario file is empty".to_string()]));
    }
    let raw: RawScenario = toml::from_str(text).map_err(|e| CliError::Validation(vec![e.to_string()]))?;
    let mut problems = Vec::new();
    let mode = match raw.mode.as_deref().unwrap_or("robust").parse::<Mode>() {
        Ok(m) => m,
        Err(e) => {
            problems.push(e.to_string());
            Mode::Robust
        }
    };
    let wind = wind_model(&raw.wind, &mut problems);
    if !problems.is_empty() {
        return Err(CliError::Validation(problems));
    }
    let mut wind = wind.expect("wind model present when no problems were recorded");
    let mut meas_cov = Matrix3::from_diagonal(&Vector3::new(raw.meas.cov_x, raw.meas.cov_y, raw.meas.cov_theta));
    if overrides.no_noise {
        wind = WindModel::constant(Vec2::ZERO, Matrix2::zeros());
        meas_cov = Matrix3::zeros();
    }
    Ok(ScenarioSpec {
        mode: overrides.mode.unwrap_or(mode),
        dt: raw.dt,
        steps: raw.steps,
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        d_m: raw.d_m,
        mu: raw.mu.unwrap_or(swarmfield::protocol::DEFAULT_MU),
        eps: raw.eps,
        k_u: raw.k_u.unwrap_or(DEFAULT_K_U),
        k_omega: raw.k_omega.unwrap_or(DEFAULT_K_OMEGA),
        eps_i: raw.eps_i.unwrap_or(DEFAULT_EPS_I),
        wind,
        meas_cov,
        margin_override: overrides.margins,
        agents: raw
            .agents
            .iter()
            .map(|a| AgentInit {
                initial: AgentState { position: Vec2::new(a.x0, a.y0), heading: a.theta0 },
                goal: Vec2::new(a.goal_x, a.goal_y),
                radius: a.radius,
            })
            .collect(),
    })
}

pub fn parse_str(text: &str, overrides: &Overrides) -> Result<(ScenarioSpec, ScenarioConfig), CliError> {
    let spec = parse_spec(text, overrides)?;
    let config = spec.build().map_err(CliError::from_core)?;
    Ok((spec, config))
}

/// Reads, parses and validates a scenario file.
pub fn parse_scenario(path: &Path, overrides: &Overrides) -> Result<(ScenarioSpec, ScenarioConfig), CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Input { path: path.to_path_buf(), source })?;
    parse_str(&text, overrides)
}
