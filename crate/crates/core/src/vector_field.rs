//! Reference vector fields: radial attraction to the goal, radial repulsion
//! from neighbors, their bump-weighted blend, the wind-compensated
//! (perturbed) field and its heading and heading rate.

use crate::error::{Error, Result};
use crate::protocol::nominal_speed;
use crate::types::{wrap, Vec2};

/// Inside this distance of the goal the attractive field is treated as undefined.
pub const SINGULARITY_RADIUS: f64 = 1e-6;

/// Step of the central differences used for the spatial partials of the
/// normalized perturbed field.
pub const PARTIAL_STEP: f64 = 1e-4;

/// Arguments of the blended field for one agent, all in estimated coordinates.
#[derive(Debug, Clone, Copy)]
pub struct FieldContext<'a> {
    pub position: Vec2,
    pub goal: Vec2,
    pub neighbors: &'a [Vec2],
    pub d_r: f64,
    pub d_c: f64,
}

impl<'a> FieldContext<'a> {
    /// Same context evaluated at a different own position.
    pub fn at(&self, position: Vec2) -> FieldContext<'a> {
        FieldContext { position, ..*self }
    }
}

/// `-(r - r_g) / ‖r - r_g‖²`.
pub fn attractive_field(r: Vec2, goal: Vec2) -> Result<Vec2> {
    let e = r - goal;
    let d2 = e.norm_squared();
    if d2 <= SINGULARITY_RADIUS * SINGULARITY_RADIUS {
        return Err(Error::DegenerateField("at goal"));
    }
    Ok(-e * (1.0 / d2))
}

/// `(r_i - r_j) / ‖r_i - r_j‖²`, pointing from the neighbor toward self.
pub fn repulsive_field(r_i: Vec2, r_j: Vec2) -> Result<Vec2> {
    let e = r_i - r_j;
    let d2 = e.norm_squared();
    if d2 == 0.0 {
        return Err(Error::Coincident);
    }
    Ok(e * (1.0 / d2))
}

/// Cubic smoothstep weight: 1 inside `d_r`, 0 beyond `d_c`, C¹ in between.
pub fn bump(d: f64, d_r: f64, d_c: f64) -> f64 {
    if d <= d_r {
        1.0
    } else if d >= d_c {
        0.0
    } else {
        let s = (d_c - d) / (d_c - d_r);
        s * s * (3.0 - 2.0 * s)
    }
}

/// `Π_j (1 - σ_ij) F_g + Σ_j σ_ij F_oj`.
pub fn blended_field(ctx: &FieldContext<'_>) -> Result<Vec2> {
    let mut keep = 1.0;
    let mut repulsion = Vec2::ZERO;
    for &nb in ctx.neighbors {
        let sigma = bump((ctx.position - nb).norm(), ctx.d_r, ctx.d_c);
        if sigma > 0.0 {
            keep *= 1.0 - sigma;
            repulsion += sigma * repulsive_field(ctx.position, nb)?;
        }
    }
    // With keep == 0 the attractive term vanishes and the goal singularity is irrelevant.
    if keep == 0.0 {
        return Ok(repulsion);
    }
    Ok(keep * attractive_field(ctx.position, ctx.goal)? + repulsion)
}

/// `u F/‖F‖ - w̄`: the air-relative direction that makes ground motion follow `F`.
pub fn perturbed_field(field: Vec2, speed: f64, wind: Vec2) -> Result<Vec2> {
    let unit = field.normalized().ok_or(Error::DegenerateField("zero nominal field"))?;
    Ok(unit * speed - wind)
}

/// Four-quadrant orientation of a field vector, in `(-π, π]`.
pub fn field_heading(field: Vec2) -> Result<f64> {
    if field.norm_squared() == 0.0 || !field.is_finite() {
        return Err(Error::DegenerateField("zero vector has no heading"));
    }
    Ok(wrap(field.angle()))
}

/// Normalized perturbed field at `ctx.position`, with the nominal speed
/// `k_u tanh(‖r - r_g‖)` evaluated at that same position.
pub fn normalized_perturbed_field(ctx: &FieldContext<'_>, speed_gain: f64, wind: Vec2) -> Result<Vec2> {
    let field = blended_field(ctx)?;
    let speed = nominal_speed(ctx.position, ctx.goal, speed_gain);
    perturbed_field(field, speed, wind)?
        .normalized()
        .ok_or(Error::DegenerateField("zero perturbed field"))
}

/// Heading of the perturbed field at `ctx.position`.
pub fn perturbed_heading(ctx: &FieldContext<'_>, speed_gain: f64, wind: Vec2) -> Result<f64> {
    field_heading(normalized_perturbed_field(ctx, speed_gain, wind)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadingRate {
    pub rate: f64,
    /// Set when the field or one of its stencil samples was undefined; `rate` is 0 then.
    pub degenerate: bool,
}

/// Time derivative of the perturbed-field heading for an agent at
/// `ctx.position` with heading `theta`:
///
/// `[(∂N_y/∂x cθ + ∂N_y/∂y sθ) N_x - (∂N_x/∂x cθ + ∂N_x/∂y sθ) N_y] u`
///
/// where `N` is the normalized perturbed field and `u` the nominal speed.
/// Partials are central differences with step [`PARTIAL_STEP`].
pub fn heading_rate(ctx: &FieldContext<'_>, theta: f64, speed_gain: f64, wind: Vec2) -> HeadingRate {
    const DEGENERATE: HeadingRate = HeadingRate { rate: 0.0, degenerate: true };
    let speed = nominal_speed(ctx.position, ctx.goal, speed_gain);
    if speed == 0.0 {
        return HeadingRate { rate: 0.0, degenerate: false };
    }
    let eval = |p: Vec2| normalized_perturbed_field(&ctx.at(p), speed_gain, wind);
    let h = PARTIAL_STEP;
    let r = ctx.position;
    let (n, xp, xm, yp, ym) = match (
        eval(r),
        eval(r + Vec2::new(h, 0.0)),
        eval(r - Vec2::new(h, 0.0)),
        eval(r + Vec2::new(0.0, h)),
        eval(r - Vec2::new(0.0, h)),
    ) {
        (Ok(n), Ok(a), Ok(b), Ok(c), Ok(d)) => (n, a, b, c, d),
        _ => return DEGENERATE,
    };
    let dx = (xp - xm) * (0.5 / h);
    let dy = (yp - ym) * (0.5 / h);
    let (s, c) = theta.sin_cos();
    let rate = ((dx.y * c + dy.y * s) * n.x - (dx.x * c + dy.x * s) * n.y) * speed;
    if rate.is_finite() {
        HeadingRate { rate, degenerate: false }
    } else {
        DEGENERATE
    }
}
