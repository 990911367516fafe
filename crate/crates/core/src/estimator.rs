//! Continuous-discrete extended Kalman filter for one unicycle agent with an
//! identity measurement map.
//!
//! Prediction integrates the state and the Riccati equation with one Euler
//! step; every step then applies a discrete correction with gain
//! `K = P (P + P_v)⁻¹`. The covariance is re-symmetrized after each operation.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::types::{wrap, AgentState, ControlCommand, ErrorBounds, Vec2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    /// `(x̂, ŷ, θ̂)` with `θ̂` wrapped.
    pub mean: Vector3<f64>,
    pub cov: Matrix3<f64>,
}

impl Estimate {
    pub fn new(mean: Vector3<f64>, cov: Matrix3<f64>) -> Self {
        let mut mean = mean;
        mean[2] = wrap(mean[2]);
        Estimate { mean, cov: symmetrize(&cov) }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.mean[0], self.mean[1])
    }

    pub fn heading(&self) -> f64 {
        self.mean[2]
    }

    pub fn pose(&self) -> AgentState {
        AgentState { position: self.position(), heading: self.heading() }
    }
}

fn symmetrize(p: &Matrix3<f64>) -> Matrix3<f64> {
    (p + p.transpose()) * 0.5
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm(p: &Matrix3<f64>) -> f64 {
    symmetrize(p).symmetric_eigenvalues().amax()
}

/// Unicycle drift `f(q, u)` without wind.
fn drift(q: &Vector3<f64>, u: &ControlCommand) -> Vector3<f64> {
    let (s, c) = q[2].sin_cos();
    Vector3::new(u.linear_speed * c, u.linear_speed * s, u.angular_rate)
}

/// Jacobian `∂f/∂q` at the estimate. The mean wind is state-independent and drops out.
pub fn linearize(q: &Vector3<f64>, u: &ControlCommand) -> Matrix3<f64> {
    let (s, c) = q[2].sin_cos();
    let v = u.linear_speed;
    Matrix3::new(
        0.0, 0.0, -v * s, //
        0.0, 0.0, v * c, //
        0.0, 0.0, 0.0,
    )
}

/// One Euler step of the mean and covariance dynamics with the known mean
/// wind as feed-forward and `Γ P_w Γᵀ` as process noise.
pub fn predict(est: &Estimate, u: &ControlCommand, mean_wind: Vec2, wind_cov: &nalgebra::Matrix2<f64>, dt: f64) -> Estimate {
    let a = linearize(&est.mean, u);
    let rate = drift(&est.mean, u) + Vector3::new(mean_wind.x, mean_wind.y, 0.0);
    let mut mean = est.mean + rate * dt;
    mean[2] = wrap(mean[2]);
    let mut q = Matrix3::zeros();
    q.fixed_view_mut::<2, 2>(0, 0).copy_from(wind_cov);
    let p = est.cov;
    let cov = p + (a * p + p * a.transpose() + q) * dt;
    Estimate { mean, cov: symmetrize(&cov) }
}

/// Discrete correction gain `P (P + P_v)⁻¹`.
pub fn correction_gain(cov: &Matrix3<f64>, meas_cov: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let s = cov + meas_cov;
    let inv = s.try_inverse().ok_or(Error::Singular("P + P_v"))?;
    Ok(cov * inv)
}

/// Measurement correction; returns the updated estimate and the gain used.
pub fn update_with_gain(est: &Estimate, y: &Vector3<f64>, meas_cov: &Matrix3<f64>) -> Result<(Estimate, Matrix3<f64>)> {
    let gain = correction_gain(&est.cov, meas_cov)?;
    let mut innovation = y - est.mean;
    innovation[2] = wrap(innovation[2]);
    let mut mean = est.mean + gain * innovation;
    mean[2] = wrap(mean[2]);
    let cov = (Matrix3::identity() - gain) * est.cov;
    Ok((Estimate { mean, cov: symmetrize(&cov) }, gain))
}

pub fn update(est: &Estimate, y: &Vector3<f64>, meas_cov: &Matrix3<f64>) -> Result<Estimate> {
    update_with_gain(est, y, meas_cov).map(|(e, _)| e)
}

/// Error bounds from the covariance bound `‖P(t)‖ ≤ ‖P_v‖ + 1`:
/// `ε_x = ε_y = ε_θ = sqrt(max_i ‖P_v,i‖ + 1)`, `ε_d = sqrt(2) ε_x`.
pub fn error_bounds(meas_covs: &[Matrix3<f64>]) -> ErrorBounds {
    let worst = meas_covs.iter().map(spectral_norm).fold(0.0, f64::max);
    let e = (worst + 1.0).sqrt();
    ErrorBounds { eps_x: e, eps_y: e, eps_theta: e, eps_d: e.hypot(e) }
}
