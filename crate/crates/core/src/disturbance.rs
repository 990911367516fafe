//! Shared wind process and per-agent measurement noise.
//!
//! All randomness is drawn from [`ChaCha8Rng`] streams split off one master
//! seed: stream 0 carries the wind, stream `i + 1` carries agent `i`'s
//! measurement noise. Adding agents therefore never perturbs the wind.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::types::{wrap, AgentState, Vec2};

/// Shape of the mean-wind function of time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindProfile {
    Constant(Vec2),
    /// `(A_x sin(2πt/T_x + φ_x), A_y cos(2πt/T_y + φ_y))`.
    Sinusoidal {
        amplitude: Vec2,
        period: Vec2,
        phase: Vec2,
    },
}

/// How the per-step Gaussian wind perturbation is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseScaling {
    /// One draw with covariance `P_w` held over the step.
    #[default]
    PerStep,
    /// Euler–Maruyama: the draw is divided by `sqrt(dt)`, so the position
    /// increment has covariance `dt · P_w`.
    SqrtDt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindModel {
    pub profile: WindProfile,
    pub cov: Matrix2<f64>,
    pub scaling: NoiseScaling,
}

impl WindModel {
    pub fn constant(mean: Vec2, cov: Matrix2<f64>) -> Self {
        WindModel { profile: WindProfile::Constant(mean), cov, scaling: NoiseScaling::PerStep }
    }

    /// Default time-varying profile: unit amplitudes, periods 40 s and 60 s, zero phases.
    pub fn sinusoidal_default(cov: Matrix2<f64>) -> Self {
        WindModel {
            profile: WindProfile::Sinusoidal {
                amplitude: Vec2::new(1.0, 1.0),
                period: Vec2::new(40.0, 60.0),
                phase: Vec2::ZERO,
            },
            cov,
            scaling: NoiseScaling::PerStep,
        }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        match self.profile {
            WindProfile::Constant(m) => {
                if !m.is_finite() {
                    v.push("wind mean must be finite".to_string());
                }
            }
            WindProfile::Sinusoidal { amplitude, period, phase } => {
                for (axis, a, p) in [("x", amplitude.x, period.x), ("y", amplitude.y, period.y)] {
                    if !(a.abs() <= 1.0) {
                        v.push(format!("wind amplitude_{axis} must lie in [-1, 1] m/s (got {a})"));
                    }
                    if !(p > 0.0 && p.is_finite()) {
                        v.push(format!("wind period_{axis} must be > 0 (got {p})"));
                    }
                }
                if !phase.is_finite() {
                    v.push("wind phases must be finite".to_string());
                }
            }
        }
        if !is_psd2(&self.cov) {
            v.push(format!(
                "wind covariance must be symmetric positive semidefinite (got {:?})",
                self.cov
            ));
        }
        v
    }

    /// Upper bound on `|d mean / dt|` per axis.
    pub fn max_mean_rate(&self) -> Vec2 {
        match self.profile {
            WindProfile::Constant(_) => Vec2::ZERO,
            WindProfile::Sinusoidal { amplitude, period, .. } => Vec2::new(
                2.0 * PI * amplitude.x.abs() / period.x,
                2.0 * PI * amplitude.y.abs() / period.y,
            ),
        }
    }
}

pub(crate) fn is_psd2(m: &Matrix2<f64>) -> bool {
    let sym = (m[(0, 1)] - m[(1, 0)]).abs() <= 1e-12;
    sym && m[(0, 0)] >= 0.0 && m[(1, 1)] >= 0.0 && m.determinant() >= -1e-15
}

pub fn mean_wind(model: &WindModel, t: f64) -> Vec2 {
    match model.profile {
        WindProfile::Constant(m) => m,
        WindProfile::Sinusoidal { amplitude, period, phase } => Vec2::new(
            amplitude.x * (2.0 * PI * t / period.x + phase.x).sin(),
            amplitude.y * (2.0 * PI * t / period.y + phase.y).cos(),
        ),
    }
}

/// Lower-triangular factor `L` with `L Lᵀ = P` for a PSD 2×2 matrix.
fn cholesky2(p: &Matrix2<f64>) -> Matrix2<f64> {
    let l11 = p[(0, 0)].max(0.0).sqrt();
    let l21 = if l11 > 0.0 { p[(1, 0)] / l11 } else { 0.0 };
    let l22 = (p[(1, 1)] - l21 * l21).max(0.0).sqrt();
    Matrix2::new(l11, 0.0, l21, l22)
}

/// Mean wind at `t` plus one Gaussian draw with covariance `P_w`.
///
/// The draw is shared by every agent for the step.
pub fn sample_wind(model: &WindModel, t: f64, dt: f64, rng: &mut ChaCha8Rng) -> Vec2 {
    let mean = mean_wind(model, t);
    if model.cov == Matrix2::zeros() {
        return mean;
    }
    let xi = Vector2::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal));
    let mut eta = cholesky2(&model.cov) * xi;
    if model.scaling == NoiseScaling::SqrtDt {
        eta /= dt.sqrt();
    }
    mean + Vec2::new(eta.x, eta.y)
}

/// Noisy identity measurement `y = q + v`, `v ~ N(0, diag(P_v))`, heading re-wrapped.
pub fn sample_measurement(q: &AgentState, meas_cov: &Matrix3<f64>, rng: &mut ChaCha8Rng) -> Vector3<f64> {
    let mut y = Vector3::new(q.position.x, q.position.y, q.heading);
    if *meas_cov != Matrix3::zeros() {
        for k in 0..3 {
            let sd = meas_cov[(k, k)].max(0.0).sqrt();
            y[k] += sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    y[2] = wrap(y[2]);
    y
}

/// Independent random streams derived from one master seed.
#[derive(Debug, Clone)]
pub struct RngStreams {
    pub wind: ChaCha8Rng,
    pub measurement: Vec<ChaCha8Rng>,
}

impl RngStreams {
    pub fn new(seed: u64, agents: usize) -> Self {
        let stream = |id: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(id);
            r
        };
        RngStreams {
            wind: stream(0),
            measurement: (0..agents as u64).map(|i| stream(i + 1)).collect(),
        }
    }
}
