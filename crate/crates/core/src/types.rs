//! Shared domain vocabulary: planar vectors, poses, commands, per-agent and
//! protocol parameters, and the validated scenario description.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix2, Matrix3};

use crate::disturbance::WindModel;
use crate::error::{Error, Result};

/// Planar vector in the global frame (meters, or m/s for velocities).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Unit vector with the given heading.
    pub fn from_angle(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Vec2::new(c, s)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Four-quadrant angle of the vector; `atan2(0, 0) = 0`.
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| Vec2::new(self.x / n, self.y / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    Ok(wrap(a))
}

/// Infallible wrap for values already known to be finite.
pub(crate) fn wrap(a: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut r = a.rem_euclid(two_pi);
    // rem_euclid may round up to exactly 2π; that case maps to 0 here.
    if r > PI {
        r -= two_pi;
    }
    r
}

pub fn pairwise_distance(a: Vec2, b: Vec2) -> f64 {
    (a - b).norm()
}

/// Indices `j != i` lying in the closed disk of radius `comm_radius` around agent `i`.
pub fn neighbors_of(i: usize, positions: &[Vec2], comm_radius: f64) -> Vec<usize> {
    let own = positions[i];
    positions
        .iter()
        .enumerate()
        .filter(|&(j, p)| j != i && pairwise_distance(own, *p) <= comm_radius)
        .map(|(j, _)| j)
        .collect()
}

/// True pose of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentState {
    pub position: Vec2,
    /// Radians in `(-π, π]`.
    pub heading: f64,
}

impl AgentState {
    pub fn new(position: Vec2, heading: f64) -> Self {
        AgentState { position, heading: wrap(heading) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    /// m/s, non-negative.
    pub linear_speed: f64,
    /// rad/s.
    pub angular_rate: f64,
}

impl ControlCommand {
    pub const STOP: ControlCommand = ControlCommand { linear_speed: 0.0, angular_rate: 0.0 };

    pub fn new(linear_speed: f64, angular_rate: f64) -> Self {
        ControlCommand { linear_speed, angular_rate }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentParams {
    pub body_radius: f64,
    pub goal: Vec2,
    /// Speed gain of `u = k_u tanh(‖r - r_g‖)`.
    pub speed_gain: f64,
    /// Heading-tracking gain.
    pub turn_gain: f64,
    /// Cooperation factor in `(0, 1)`.
    pub cooperation: f64,
}

impl AgentParams {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.body_radius > 0.0) {
            v.push(format!("radius must be > 0 (got {})", self.body_radius));
        }
        if !self.goal.is_finite() {
            v.push("goal must be finite".to_string());
        }
        if !(self.speed_gain > 0.0) {
            v.push(format!("k_u must be > 0 (got {})", self.speed_gain));
        }
        if !(self.turn_gain > 0.0) {
            v.push(format!("k_omega must be > 0 (got {})", self.turn_gain));
        }
        if !(self.cooperation > 0.0 && self.cooperation < 1.0) {
            v.push(format!("eps_i must lie in (0, 1) (got {})", self.cooperation));
        }
        v
    }
}

/// Distance thresholds and smooth-min sharpness used by the coordination laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyParams {
    /// Minimum allowable true separation.
    pub d_m: f64,
    /// Estimated-distance threshold `d_m + 2 ε_d`.
    pub d_m_inflated: f64,
    /// Guard inflation for the worst-case-neighbor test.
    pub eps_j: f64,
    /// Start of the conflict region.
    pub d_eps: f64,
    /// Inner blend radius: pure repulsion below it.
    pub d_r: f64,
    /// Outer blend radius: no repulsion beyond it.
    pub d_c: f64,
    pub comm_radius: f64,
    /// Smooth-min sharpness `μ`.
    pub mu: f64,
}

impl SafetyParams {
    pub fn new(
        d_m: f64,
        d_m_inflated: f64,
        eps_j: f64,
        d_eps: f64,
        d_r: f64,
        d_c: f64,
        comm_radius: f64,
        mu: f64,
    ) -> Result<Self> {
        let p = SafetyParams { d_m, d_m_inflated, eps_j, d_eps, d_r, d_c, comm_radius, mu };
        let v = p.violations();
        if v.is_empty() {
            Ok(p)
        } else {
            Err(Error::Invalid(v))
        }
    }

    /// Every violated ordering or positivity constraint, with offending values.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.d_m > 0.0) {
            v.push(format!("d_m must be > 0 (got {})", self.d_m));
        }
        if !(self.d_m_inflated < self.d_eps) {
            v.push(format!(
                "d_m' = {} must be < d_eps = {}",
                self.d_m_inflated, self.d_eps
            ));
        }
        if !(self.d_eps < self.d_r) {
            v.push(format!("d_eps = {} must be < d_r = {}", self.d_eps, self.d_r));
        }
        if !(self.d_r < self.d_c) {
            v.push(format!("d_r = {} must be < d_c = {}", self.d_r, self.d_c));
        }
        if !(self.d_c <= self.comm_radius) {
            v.push(format!("d_c = {} must be <= R_c = {}", self.d_c, self.comm_radius));
        }
        if !(self.eps_j >= 0.0) {
            v.push(format!("eps_J must be >= 0 (got {})", self.eps_j));
        }
        if !(self.mu > 0.0) {
            v.push(format!("mu must be > 0 (got {})", self.mu));
        }
        v
    }
}

/// 3-σ-derived estimation error bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBounds {
    pub eps_x: f64,
    pub eps_y: f64,
    pub eps_theta: f64,
    /// `sqrt(ε_x² + ε_y²)`.
    pub eps_d: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub wind_cov: Matrix2<f64>,
    /// Diagonal measurement covariance over (x, y, θ).
    pub meas_cov: Matrix3<f64>,
    pub bounds: ErrorBounds,
    /// Goal tolerance `ε`.
    pub goal_tolerance: f64,
    /// `ε_f = ε_d + ε`.
    pub final_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Nominal,
    Robust,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Nominal => "nominal",
            Mode::Robust => "robust",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nominal" => Ok(Mode::Nominal),
            "robust" => Ok(Mode::Robust),
            other => Err(Error::Invalid(vec![format!(
                "mode must be `nominal` or `robust` (got `{other}`)"
            )])),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentSpec {
    pub initial: AgentState,
    pub params: AgentParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub agents: Vec<AgentSpec>,
    pub safety: SafetyParams,
    pub noise: NoiseParams,
    pub wind: WindModel,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
    pub mode: Mode,
}

impl ScenarioConfig {
    /// Every violated invariant; empty when the scenario is runnable.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            v.push(format!("dt must be > 0 (got {})", self.dt));
        }
        if self.steps == 0 {
            v.push("steps must be >= 1".to_string());
        }
        if self.agents.is_empty() {
            v.push("at least one agent is required".to_string());
        }
        v.extend(self.safety.violations());
        v.extend(self.wind.violations());
        for (i, a) in self.agents.iter().enumerate() {
            if !a.initial.position.is_finite() || !a.initial.heading.is_finite() {
                v.push(format!("agent {i}: initial state must be finite"));
            }
            v.extend(a.params.violations().into_iter().map(|m| format!("agent {i}: {m}")));
        }
        let min_goal_gap = 2.0 * self.safety.comm_radius;
        for i in 0..self.agents.len() {
            for j in (i + 1)..self.agents.len() {
                let d = pairwise_distance(self.agents[i].params.goal, self.agents[j].params.goal);
                if !(d > min_goal_gap) {
                    v.push(format!(
                        "goals of agents {i} and {j} are {d:.4} m apart; must exceed 2 R_c = {min_goal_gap:.4} m"
                    ));
                }
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }
}
