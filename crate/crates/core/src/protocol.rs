//! Per-agent coordination laws.
//!
//! The robust linear law interpolates, for every neighbor the agent is
//! moving toward, between the conflict-free speed at `d_eps` and a scaled
//! matching speed at the inflated separation `d_m'`, then takes a smooth
//! minimum over those safe speeds. The angular law tracks the heading of the
//! wind-compensated field with a feed-forward heading-rate term. The nominal
//! (disturbance-free) law is kept as a baseline for reduction checks.

use std::f64::consts::FRAC_PI_2;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::estimator::error_bounds;
use crate::types::{wrap, AgentParams, AgentState, ErrorBounds, SafetyParams, Vec2};
use crate::vector_field::{blended_field, field_heading, heading_rate, perturbed_heading, FieldContext};

/// Default smooth-min sharpness.
pub const DEFAULT_MU: f64 = 50.0;
/// Inner blend radius as a fraction of `d_c`.
pub const INNER_BLEND_RATIO: f64 = 0.75;

/// What an agent knows about one neighbor: its broadcast estimate and the
/// speed it commanded on the previous step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborView {
    pub id: usize,
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
}

/// Estimation bounds and the safety quantities derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginSet {
    pub bounds: ErrorBounds,
    /// `d_m + 2 ε_d`.
    pub d_m_inflated: f64,
    /// `(2 ε_d + sin ε_θ (d_m + 2 ε_d)) / cos ε_θ`.
    pub eps_j: f64,
}

impl MarginSet {
    /// Margins from explicit position/heading bounds, with `ε_x = ε_y = ε_d / √2`.
    pub fn from_bounds(eps_d: f64, eps_theta: f64, d_m: f64) -> Result<Self> {
        let axis = eps_d / std::f64::consts::SQRT_2;
        Self::build(ErrorBounds { eps_x: axis, eps_y: axis, eps_theta, eps_d }, d_m)
    }

    fn build(bounds: ErrorBounds, d_m: f64) -> Result<Self> {
        if !(bounds.eps_theta < FRAC_PI_2) {
            return Err(Error::HeadingBoundTooLarge(bounds.eps_theta));
        }
        if !(bounds.eps_d >= 0.0 && bounds.eps_theta >= 0.0) {
            return Err(Error::Invalid(vec![format!("error bounds must be >= 0 (got {bounds:?})")]));
        }
        let d_m_inflated = d_m + 2.0 * bounds.eps_d;
        let (s, c) = bounds.eps_theta.sin_cos();
        let eps_j = (2.0 * bounds.eps_d + s * d_m_inflated) / c;
        Ok(MarginSet { bounds, d_m_inflated, eps_j })
    }
}

/// Margins implied by the agents' measurement covariances.
pub fn compute_margins(meas_covs: &[Matrix3<f64>], d_m: f64) -> Result<MarginSet> {
    if !(d_m > 0.0) {
        return Err(Error::Invalid(vec![format!("d_m must be > 0 (got {d_m})")]));
    }
    MarginSet::build(error_bounds(meas_covs), d_m)
}

/// Protocol thresholds from the margins: `R_c = d_c = 2 d_m'`,
/// `d_r = 0.75 d_c`, `d_eps = d_r - ε`.
pub fn derive_safety(d_m: f64, goal_tolerance: f64, mu: f64, margins: &MarginSet) -> Result<SafetyParams> {
    let p = safety_from_margins(d_m, goal_tolerance, mu, margins);
    SafetyParams::new(p.d_m, p.d_m_inflated, p.eps_j, p.d_eps, p.d_r, p.d_c, p.comm_radius, p.mu)
}

/// Same as [`derive_safety`] without validation.
pub(crate) fn safety_from_margins(d_m: f64, goal_tolerance: f64, mu: f64, margins: &MarginSet) -> SafetyParams {
    let comm_radius = 2.0 * margins.d_m_inflated;
    let d_c = comm_radius;
    let d_r = INNER_BLEND_RATIO * d_c;
    SafetyParams {
        d_m,
        d_m_inflated: margins.d_m_inflated,
        eps_j: margins.eps_j,
        d_eps: d_r - goal_tolerance,
        d_r,
        d_c,
        comm_radius,
        mu,
    }
}

/// `-(1/μ) log Σ exp(-μ a_i)`, evaluated around the hard minimum so that
/// large `μ` cannot overflow. Panics on an empty slice.
pub fn smooth_min(values: &[f64], mu: f64) -> f64 {
    assert!(!values.is_empty(), "smooth_min of an empty set");
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = values.iter().map(|&a| (-mu * (a - m)).exp()).sum();
    m - sum.ln() / mu
}

/// `k_u tanh(‖r - r_g‖)`.
pub fn nominal_speed(position: Vec2, goal: Vec2, speed_gain: f64) -> f64 {
    speed_gain * (position - goal).norm().tanh()
}

/// `‖u F/‖F‖ - w̄‖`; a degenerate field leaves only the wind to fight.
pub fn conflict_free_speed(speed: f64, field: Vec2, wind: Vec2) -> f64 {
    match field.normalized() {
        Some(unit) => (unit * speed - wind).norm(),
        None => wind.norm(),
    }
}

/// `(r̂_i - r̂_k)ᵀ η̂_i`: negative when `own` is moving toward the neighbor.
pub fn approach_projection(own: &AgentState, neighbor_position: Vec2) -> f64 {
    (own.position - neighbor_position).dot(Vec2::from_angle(own.heading))
}

fn is_critical(projection: f64, eps_j: f64) -> bool {
    projection <= -eps_j && projection < 0.0
}

/// Ids of the neighbors whose approach projection is at most `-ε_J`.
pub fn critical_neighbors(own: &AgentState, neighbors: &[NeighborView], eps_j: f64) -> Vec<usize> {
    neighbors
        .iter()
        .filter(|n| is_critical(approach_projection(own, n.position), eps_j))
        .map(|n| n.id)
        .collect()
}

/// Safe speed of `own` with respect to a critical neighbor at estimated
/// distance `distance`, interpolating between `free_speed` at `d_eps`
/// and `ε_i u_is|k` at `d_m'`.
pub fn safe_speed_wrt(
    free_speed: f64,
    neighbor: &NeighborView,
    own: &AgentState,
    distance: f64,
    safety: &SafetyParams,
    cooperation: f64,
) -> Result<f64> {
    let own_proj = approach_projection(own, neighbor.position);
    if !is_critical(own_proj, safety.eps_j) {
        return Err(Error::NotCritical(neighbor.id));
    }
    Ok(interpolated_safe_speed(
        free_speed,
        neighbor,
        own,
        own_proj,
        distance,
        safety.d_m_inflated,
        safety.d_eps,
        cooperation,
    ))
}

#[allow(clippy::too_many_arguments)]
fn interpolated_safe_speed(
    free_speed: f64,
    neighbor: &NeighborView,
    own: &AgentState,
    own_proj: f64,
    distance: f64,
    d_min: f64,
    d_eps: f64,
    cooperation: f64,
) -> f64 {
    let rel = own.position - neighbor.position;
    let neighbor_proj = rel.dot(Vec2::from_angle(neighbor.heading));
    let matching = neighbor.speed * neighbor_proj / own_proj;
    let span = d_eps - d_min;
    free_speed * (distance - d_min) / span + cooperation * matching * (d_eps - distance) / span
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCommand {
    pub speed: f64,
    /// Some neighbor's estimated distance is below `d_m'`.
    pub margin_violation: bool,
}

/// Robust linear speed given the already-evaluated blended field
/// (`None` when it is degenerate).
pub fn linear_speed_from_field(
    own: &AgentState,
    neighbors: &[NeighborView],
    field: Option<Vec2>,
    params: &AgentParams,
    safety: &SafetyParams,
    wind: Vec2,
) -> LinearCommand {
    let speed = nominal_speed(own.position, params.goal, params.speed_gain);
    let free = conflict_free_speed(speed, field.unwrap_or(Vec2::ZERO), wind);

    let mut margin_violation = false;
    let mut safe = Vec::new();
    for n in neighbors {
        let d = (own.position - n.position).norm();
        margin_violation |= d < safety.d_m_inflated;
        if d > safety.d_eps {
            continue;
        }
        let proj = approach_projection(own, n.position);
        if is_critical(proj, safety.eps_j) {
            safe.push(interpolated_safe_speed(
                free,
                n,
                own,
                proj,
                d,
                safety.d_m_inflated,
                safety.d_eps,
                params.cooperation,
            ));
        }
    }
    let speed = if safe.is_empty() { free } else { smooth_min(&safe, safety.mu).max(0.0) };
    LinearCommand { speed, margin_violation }
}

/// Robust linear speed command from estimates.
pub fn linear_velocity_command(
    own: &AgentState,
    neighbors: &[NeighborView],
    params: &AgentParams,
    safety: &SafetyParams,
    wind: Vec2,
) -> LinearCommand {
    let positions: Vec<Vec2> = neighbors.iter().map(|n| n.position).collect();
    let ctx = FieldContext {
        position: own.position,
        goal: params.goal,
        neighbors: &positions,
        d_r: safety.d_r,
        d_c: safety.d_c,
    };
    let field = blended_field(&ctx).ok().filter(|f| f.norm_squared() > 0.0);
    linear_speed_from_field(own, neighbors, field, params, safety, wind)
}

/// `-k_ω wrap(θ - φ) + φ̇`.
pub fn heading_tracking_law(theta: f64, target: f64, target_rate: f64, turn_gain: f64) -> f64 {
    -turn_gain * wrap(theta - target) + target_rate
}

/// Robust angular rate: track the perturbed-field heading with its rate as feed-forward.
/// When the field is degenerate the agent turns to face into the wind.
pub fn angular_velocity_command(
    theta: f64,
    ctx: &FieldContext<'_>,
    speed_gain: f64,
    turn_gain: f64,
    wind: Vec2,
) -> f64 {
    match perturbed_heading(ctx, speed_gain, wind) {
        Ok(target) => {
            let rate = heading_rate(ctx, theta, speed_gain, wind);
            heading_tracking_law(theta, target, rate.rate, turn_gain)
        }
        Err(_) => match field_heading(-wind) {
            Ok(into_wind) => heading_tracking_law(theta, into_wind, 0.0, turn_gain),
            Err(_) => 0.0,
        },
    }
}

/// Disturbance-free three-branch law with hard minimum, `d_m` and the strict
/// guard `J_k < 0`. `handoff_speed` is the conflict-free speed frozen when the
/// nearest neighbor last crossed `d_c`.
pub fn nominal_protocol_velocity(
    own: &AgentState,
    neighbors: &[NeighborView],
    params: &AgentParams,
    safety: &SafetyParams,
    handoff_speed: f64,
) -> f64 {
    let nearest = neighbors
        .iter()
        .map(|n| (own.position - n.position).norm())
        .fold(f64::INFINITY, f64::min);
    if nearest >= safety.d_c {
        return nominal_speed(own.position, params.goal, params.speed_gain);
    }
    if nearest > safety.d_eps {
        return handoff_speed;
    }
    let mut lowest: Option<f64> = None;
    for n in neighbors {
        let d = (own.position - n.position).norm();
        let proj = approach_projection(own, n.position);
        if d <= safety.d_eps && proj < 0.0 {
            let u = interpolated_safe_speed(
                handoff_speed,
                n,
                own,
                proj,
                d,
                safety.d_m,
                safety.d_eps,
                params.cooperation,
            );
            lowest = Some(lowest.map_or(u, |l: f64| l.min(u)));
        }
    }
    match lowest {
        Some(u) => u.max(0.0),
        None => handoff_speed,
    }
}

/// `ḋ_ij` from full ground velocities.
pub fn separation_rate(r_i: Vec2, v_i: Vec2, r_j: Vec2, v_j: Vec2) -> f64 {
    let rel = r_i - r_j;
    rel.dot(v_i - v_j) / rel.norm()
}

/// `ḋ_ij = (u_i r_jiᵀη_i - u_j r_jiᵀη_j) / d_ij` with `r_ji = r_i - r_j`;
/// any wind shared by both agents cancels out of the relative motion.
pub fn separation_rate_wind_free(own: &AgentState, own_speed: f64, other: &AgentState, other_speed: f64) -> f64 {
    let rel = own.position - other.position;
    let a = own_speed * rel.dot(Vec2::from_angle(own.heading));
    let b = other_speed * rel.dot(Vec2::from_angle(other.heading));
    (a - b) / rel.norm()
}
