//! Assembling a runnable [`ScenarioConfig`] from the user-facing quantities.
//!
//! Only `d_m`, `ε`, the gains, the noise covariances and the agents are set
//! directly. Error bounds, `d_m'`, `ε_J`, `R_c`, `d_c`, `d_r` and `d_ε` are
//! derived, unless the margins are overridden explicitly.

use std::f64::consts::PI;

use nalgebra::Matrix3;

use crate::disturbance::WindModel;
use crate::error::{Error, Result};
use crate::protocol::{compute_margins, safety_from_margins, MarginSet};
use crate::types::{AgentParams, AgentSpec, AgentState, Mode, NoiseParams, ScenarioConfig, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentInit {
    pub initial: AgentState,
    pub goal: Vec2,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub mode: Mode,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
    pub d_m: f64,
    pub mu: f64,
    /// Goal tolerance `ε`.
    pub eps: f64,
    pub k_u: f64,
    pub k_omega: f64,
    pub eps_i: f64,
    pub wind: WindModel,
    pub meas_cov: Matrix3<f64>,
    /// `(ε_d, ε_θ)` replacing the covariance-derived bounds.
    pub margin_override: Option<(f64, f64)>,
    pub agents: Vec<AgentInit>,
}

impl ScenarioSpec {
    pub fn margins(&self) -> Result<MarginSet> {
        match self.margin_override {
            Some((eps_d, eps_theta)) => MarginSet::from_bounds(eps_d, eps_theta, self.d_m),
            None => compute_margins(&[self.meas_cov], self.d_m),
        }
    }

    /// Derives every threshold and validates the result, reporting all
    /// violated invariants at once.
    pub fn build(&self) -> Result<ScenarioConfig> {
        let mut problems = Vec::new();
        if !(self.eps > 0.0) {
            problems.push(format!("eps must be > 0 (got {})", self.eps));
        }
        for k in 0..3 {
            if !(self.meas_cov[(k, k)] >= 0.0) {
                problems.push(format!("measurement variance {k} must be >= 0 (got {})", self.meas_cov[(k, k)]));
            }
        }
        if let Some((d, t)) = self.margin_override {
            if !(d >= 0.0 && t >= 0.0) {
                problems.push(format!("margin override must be non-negative (got {d}, {t})"));
            }
        }
        let margins = match self.margins() {
            Ok(m) => m,
            Err(e) => {
                problems.extend(flatten(e));
                return Err(Error::Invalid(problems));
            }
        };
        let safety = safety_from_margins(self.d_m, self.eps, self.mu, &margins);
        let agents = self
            .agents
            .iter()
            .map(|a| AgentSpec {
                initial: AgentState::new(a.initial.position, a.initial.heading),
                params: AgentParams {
                    body_radius: a.radius,
                    goal: a.goal,
                    speed_gain: self.k_u,
                    turn_gain: self.k_omega,
                    cooperation: self.eps_i,
                },
            })
            .collect();
        let config = ScenarioConfig {
            agents,
            safety,
            noise: NoiseParams {
                wind_cov: self.wind.cov,
                meas_cov: self.meas_cov,
                bounds: margins.bounds,
                goal_tolerance: self.eps,
                final_tolerance: margins.bounds.eps_d + self.eps,
            },
            wind: self.wind,
            dt: self.dt,
            steps: self.steps,
            seed: self.seed,
            mode: self.mode,
        };
        problems.extend(config.violations());
        for (i, a) in self.agents.iter().enumerate() {
            if a.radius > 0.0 && 2.0 * a.radius > self.d_m {
                problems.push(format!("agent {i}: diameter {} exceeds d_m = {}", 2.0 * a.radius, self.d_m));
            }
        }
        if problems.is_empty() {
            Ok(config)
        } else {
            Err(Error::Invalid(problems))
        }
    }
}

fn flatten(e: Error) -> Vec<String> {
    match e {
        Error::Invalid(v) => v,
        other => vec![other.to_string()],
    }
}

/// `n` agents evenly spaced on a circle, each heading for the point
/// `shift` positions further round a concentric goal circle.
pub fn ring_layout(n: usize, start_radius: f64, goal_radius: f64, shift: usize, radius: f64) -> Vec<AgentInit> {
    (0..n)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / n as f64;
            let b = 2.0 * PI * ((k + shift) % n.max(1)) as f64 / n as f64;
            let start = Vec2::from_angle(a) * start_radius;
            let goal = Vec2::from_angle(b) * goal_radius;
            let heading = (goal - start).normalized().map_or(0.0, Vec2::angle);
            AgentInit { initial: AgentState::new(start, heading), goal, radius }
        })
        .collect()
}
