//! Fixed-step closed-loop simulation and seeded Monte Carlo batches.
//!
//! One step runs a fixed pipeline: sample the shared wind and each agent's
//! measurement from the true state, bring every filter up to the current
//! time, build neighbor views from the broadcast estimates (carrying the
//! previous step's speeds), compute all commands, integrate the true unicycle
//! dynamics with one explicit Euler step, and record the step.

use log::{debug, warn};
use nalgebra::{Matrix2, Matrix3};
use rayon::prelude::*;

use crate::disturbance::{mean_wind, sample_measurement, sample_wind, RngStreams, WindModel, WindProfile};
use crate::estimator::{predict, spectral_norm, update_with_gain, Estimate};
use crate::protocol::{
    angular_velocity_command, linear_speed_from_field, nominal_protocol_velocity, nominal_speed, NeighborView,
};
use crate::types::{neighbors_of, wrap, AgentState, ControlCommand, Mode, ScenarioConfig, Vec2};
use crate::vector_field::{blended_field, FieldContext};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentRecord {
    pub state: AgentState,
    pub estimate: AgentState,
    pub command: ControlCommand,
    pub goal_distance: f64,
    /// `‖r - r̂‖`.
    pub estimation_error: f64,
}

/// Snapshot at the start of one step: true and estimated poses at time `t`
/// and the commands computed from them.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub agents: Vec<AgentRecord>,
    /// Minimum over unordered pairs of TRUE positions; infinite for a single agent.
    pub min_pair_distance: f64,
    /// Wind sample applied to every agent during this step.
    pub wind: Vec2,
    /// Pairs whose estimated distance is below `d_m'`.
    pub margin_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunTrace {
    pub records: Vec<StepRecord>,
    /// Diagnostic when the run stopped early.
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub steps_executed: usize,
    /// Minimum over time of the minimum pairwise true distance.
    pub min_distance: f64,
    pub first_unsafe_step: Option<usize>,
    pub final_goal_distances: Vec<f64>,
    pub final_headings: Vec<f64>,
    /// `angle(-w̄(t_final))`; NaN when the final mean wind is zero.
    pub wind_opposite_heading: f64,
    pub alignment_errors: Vec<f64>,
    pub safe: bool,
    pub converged: bool,
    /// Every filter satisfied `‖P(t)‖ ≤ ‖P(0)‖ + 1` at every step.
    pub covariance_bound_held: bool,
    /// `max_t ‖K‖ ε_d`, the perturbation bound the speed gain must exceed.
    pub gain_perturbation: f64,
    pub gain_condition_held: bool,
    /// Fraction of agent-steps with `‖r - r̂‖ ≤ ε_d`.
    pub envelope_fraction: f64,
    pub margin_violation_steps: usize,
    pub aborted: Option<String>,
}

#[derive(Debug, Clone, Copy)]
struct AgentSlot {
    state: AgentState,
    estimate: Estimate,
    command: ControlCommand,
    /// Nominal mode only: conflict-free speed frozen when a neighbor entered `d_c`.
    handoff_speed: f64,
    initial_cov_norm: f64,
}

/// Simulation state of one run.
pub struct World<'a> {
    scenario: &'a ScenarioConfig,
    wind_model: WindModel,
    meas_cov: Matrix3<f64>,
    step_index: usize,
    agents: Vec<AgentSlot>,
    rng: RngStreams,
    last_mean_wind: Vec2,
    scratch_positions: Vec<Vec2>,
}

fn cheap_norm(m: &Matrix3<f64>) -> f64 {
    // Max absolute row sum bounds the spectral norm from above.
    (0..3)
        .map(|r| m[(r, 0)].abs() + m[(r, 1)].abs() + m[(r, 2)].abs())
        .fold(0.0, f64::max)
}

fn gain_norm_bound(k: &Matrix3<f64>) -> f64 {
    // ‖K‖₂ ≤ sqrt(‖K‖₁ ‖K‖∞).
    let inf = cheap_norm(k);
    let one = cheap_norm(&k.transpose());
    (inf * one).sqrt()
}

impl<'a> World<'a> {
    pub fn new(scenario: &'a ScenarioConfig, seed: u64) -> Self {
        let mut wind_model = scenario.wind;
        let mut meas_cov = scenario.noise.meas_cov;
        if scenario.mode == Mode::Nominal {
            wind_model = WindModel::constant(Vec2::ZERO, Matrix2::zeros());
            meas_cov = Matrix3::zeros();
        }
        let mut rng = RngStreams::new(seed, scenario.agents.len());
        let agents = scenario
            .agents
            .iter()
            .zip(rng.measurement.iter_mut())
            .map(|(spec, r)| {
                let y = sample_measurement(&spec.initial, &meas_cov, r);
                let estimate = Estimate::new(y, meas_cov);
                AgentSlot {
                    state: spec.initial,
                    estimate,
                    command: ControlCommand::STOP,
                    handoff_speed: nominal_speed(spec.initial.position, spec.params.goal, spec.params.speed_gain),
                    initial_cov_norm: spectral_norm(&meas_cov),
                }
            })
            .collect();
        World {
            scenario,
            wind_model,
            meas_cov,
            step_index: 0,
            agents,
            rng,
            last_mean_wind: mean_wind(&wind_model, 0.0),
            scratch_positions: Vec::with_capacity(scenario.agents.len()),
        }
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.scenario.dt
    }

    pub fn steps_executed(&self) -> usize {
        self.step_index
    }

    pub fn true_states(&self) -> impl Iterator<Item = AgentState> + '_ {
        self.agents.iter().map(|a| a.state)
    }

    pub fn estimates(&self) -> impl Iterator<Item = &Estimate> + '_ {
        self.agents.iter().map(|a| &a.estimate)
    }

    pub fn commands(&self) -> impl Iterator<Item = ControlCommand> + '_ {
        self.agents.iter().map(|a| a.command)
    }

    /// Mean wind the run is currently using (zero in nominal mode).
    pub fn mean_wind(&self) -> Vec2 {
        mean_wind(&self.wind_model, self.time())
    }

    fn perfect_measurements(&self) -> bool {
        self.meas_cov == Matrix3::zeros()
    }

    /// Advances one step. On a non-finite state the world is left unchanged
    /// and a diagnostic is returned.
    pub fn step(&mut self, monitor: &mut StepMonitor) -> Result<StepRecord, String> {
        let sc = self.scenario;
        let dt = sc.dt;
        let t = self.time();
        let safety = &sc.safety;

        // (1) disturbances
        let wind = sample_wind(&self.wind_model, t, dt, &mut self.rng.wind);
        let mean = mean_wind(&self.wind_model, t);

        // (2) estimation
        if self.step_index > 0 {
            let perfect = self.perfect_measurements();
            for (slot, r) in self.agents.iter_mut().zip(self.rng.measurement.iter_mut()) {
                let y = sample_measurement(&slot.state, &self.meas_cov, r);
                if perfect {
                    slot.estimate = Estimate::new(y, Matrix3::zeros());
                    continue;
                }
                let prior = predict(&slot.estimate, &slot.command, self.last_mean_wind, &self.wind_model.cov, dt);
                let (post, gain) = update_with_gain(&prior, &y, &self.meas_cov)
                    .map_err(|e| format!("step {}: filter update failed: {e}", self.step_index))?;
                slot.estimate = post;
                monitor.observe_filter(cheap_norm(&post.cov), slot.initial_cov_norm, gain_norm_bound(&gain));
            }
        }
        self.last_mean_wind = mean;

        // (3) neighbor views from broadcast estimates
        self.scratch_positions.clear();
        self.scratch_positions.extend(self.agents.iter().map(|a| a.estimate.position()));
        let positions = &self.scratch_positions;

        // (4) commands
        let mut commands = Vec::with_capacity(self.agents.len());
        let mut margin_violations = 0;
        let mut nb_positions = Vec::new();
        for (i, spec) in sc.agents.iter().enumerate() {
            let own = self.agents[i].estimate.pose();
            let views: Vec<NeighborView> = neighbors_of(i, positions, safety.comm_radius)
                .into_iter()
                .map(|j| {
                    let e = &self.agents[j].estimate;
                    NeighborView { id: j, position: e.position(), heading: e.heading(), speed: self.agents[j].command.linear_speed }
                })
                .collect();
            nb_positions.clear();
            nb_positions.extend(views.iter().map(|v| v.position));
            let ctx = FieldContext {
                position: own.position,
                goal: spec.params.goal,
                neighbors: &nb_positions,
                d_r: safety.d_r,
                d_c: safety.d_c,
            };
            let p = &spec.params;
            let cmd = match sc.mode {
                Mode::Robust => {
                    let field = blended_field(&ctx).ok().filter(|f| f.norm_squared() > 0.0);
                    let lin = linear_speed_from_field(&own, &views, field, p, safety, mean);
                    // Each violating pair is seen from both ends.
                    margin_violations += views
                        .iter()
                        .filter(|v| v.id > i && (own.position - v.position).norm() < safety.d_m_inflated)
                        .count();
                    let _ = lin.margin_violation;
                    let omega = angular_velocity_command(own.heading, &ctx, p.speed_gain, p.turn_gain, mean);
                    ControlCommand::new(lin.speed, omega)
                }
                Mode::Nominal => {
                    let slot = &mut self.agents[i];
                    let nearest = views.iter().map(|v| (own.position - v.position).norm()).fold(f64::INFINITY, f64::min);
                    if nearest >= safety.d_c {
                        slot.handoff_speed = nominal_speed(own.position, p.goal, p.speed_gain);
                    }
                    let u = nominal_protocol_velocity(&own, &views, p, safety, slot.handoff_speed);
                    margin_violations += views
                        .iter()
                        .filter(|v| v.id > i && (own.position - v.position).norm() < safety.d_m)
                        .count();
                    let omega = angular_velocity_command(own.heading, &ctx, p.speed_gain, p.turn_gain, Vec2::ZERO);
                    ControlCommand::new(u, omega)
                }
            };
            commands.push(cmd);
        }

        // (5) integrate true dynamics
        let mut next = Vec::with_capacity(self.agents.len());
        for (slot, cmd) in self.agents.iter().zip(&commands) {
            let s = slot.state;
            let v = Vec2::from_angle(s.heading) * cmd.linear_speed + wind;
            let position = s.position + v * dt;
            let heading = s.heading + cmd.angular_rate * dt;
            if !position.is_finite() || !heading.is_finite() || !cmd.linear_speed.is_finite() {
                return Err(format!(
                    "step {}: non-finite state or command (pos {:?}, heading {}, cmd {:?})",
                    self.step_index, position, heading, cmd
                ));
            }
            next.push(AgentState { position, heading: wrap(heading) });
        }

        // (6) record the state the commands were computed from
        let agents: Vec<AgentRecord> = self
            .agents
            .iter()
            .zip(&sc.agents)
            .zip(&commands)
            .map(|((slot, spec), cmd)| AgentRecord {
                state: slot.state,
                estimate: slot.estimate.pose(),
                command: *cmd,
                goal_distance: (slot.state.position - spec.params.goal).norm(),
                estimation_error: (slot.state.position - slot.estimate.position()).norm(),
            })
            .collect();
        let record = StepRecord {
            t,
            min_pair_distance: min_pairwise(agents.iter().map(|a| a.state.position)),
            agents,
            wind,
            margin_violations,
        };
        monitor.observe_step(self.step_index, &record, sc.noise.bounds.eps_d, sc.safety.d_m);

        for ((slot, s), cmd) in self.agents.iter_mut().zip(next).zip(commands) {
            slot.state = s;
            slot.command = cmd;
        }
        self.step_index += 1;
        Ok(record)
    }
}

fn min_pairwise(positions: impl Iterator<Item = Vec2> + Clone) -> f64 {
    let pts: Vec<Vec2> = positions.collect();
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            best = best.min((pts[i] - pts[j]).norm());
        }
    }
    best
}

/// Running reductions over the steps of one run.
#[derive(Debug, Clone)]
pub struct StepMonitor {
    min_distance: f64,
    first_unsafe_step: Option<usize>,
    covariance_bound_held: bool,
    max_gain_norm: f64,
    within_envelope: usize,
    agent_steps: usize,
    margin_violation_steps: usize,
}

impl Default for StepMonitor {
    fn default() -> Self {
        StepMonitor {
            min_distance: f64::INFINITY,
            first_unsafe_step: None,
            covariance_bound_held: true,
            max_gain_norm: 0.0,
            within_envelope: 0,
            agent_steps: 0,
            margin_violation_steps: 0,
        }
    }
}

impl StepMonitor {
    fn observe_filter(&mut self, cov_norm: f64, initial_norm: f64, gain_norm: f64) {
        if cov_norm > initial_norm + 1.0 {
            self.covariance_bound_held = false;
        }
        self.max_gain_norm = self.max_gain_norm.max(gain_norm);
    }

    fn observe_distance(&mut self, step: usize, d: f64, d_m: f64) {
        self.min_distance = self.min_distance.min(d);
        if d < d_m && self.first_unsafe_step.is_none() {
            self.first_unsafe_step = Some(step);
            debug!("separation {d:.4} m below d_m at step {step}");
        }
    }

    fn observe_step(&mut self, step: usize, rec: &StepRecord, eps_d: f64, d_m: f64) {
        self.observe_distance(step, rec.min_pair_distance, d_m);
        self.agent_steps += rec.agents.len();
        self.within_envelope += rec.agents.iter().filter(|a| a.estimation_error <= eps_d).count();
        if rec.margin_violations > 0 {
            self.margin_violation_steps += 1;
        }
    }
}

fn summarize(world: &World<'_>, mut monitor: StepMonitor, seed: u64, aborted: Option<String>) -> RunSummary {
    let sc = world.scenario;
    let finals: Vec<AgentState> = world.true_states().collect();
    // The post-integration state after the last step counts for safety as well.
    monitor.observe_distance(world.steps_executed(), min_pairwise(finals.iter().map(|s| s.position)), sc.safety.d_m);

    let final_goal_distances: Vec<f64> =
        finals.iter().zip(&sc.agents).map(|(s, a)| (s.position - a.params.goal).norm()).collect();
    let final_headings: Vec<f64> = finals.iter().map(|s| s.heading).collect();
    let w = world.mean_wind();
    let wind_opposite_heading = if w.norm_squared() > 0.0 { (-w).angle() } else { f64::NAN };
    let alignment_errors = final_headings.iter().map(|h| alignment_error(*h, wind_opposite_heading)).collect();

    let eps_d = sc.noise.bounds.eps_d;
    let gain_perturbation = monitor.max_gain_norm * eps_d;
    let min_gain = sc.agents.iter().map(|a| a.params.speed_gain).fold(f64::INFINITY, f64::min);
    let gain_condition_held = gain_perturbation < min_gain;
    if !gain_condition_held {
        warn!("seed {seed}: speed gain {min_gain} does not exceed perturbation bound {gain_perturbation:.4}");
    }
    let converged = aborted.is_none() && final_goal_distances.iter().all(|d| *d <= sc.noise.final_tolerance);
    RunSummary {
        seed,
        steps_executed: world.steps_executed(),
        min_distance: monitor.min_distance,
        first_unsafe_step: monitor.first_unsafe_step,
        safe: aborted.is_none() && monitor.first_unsafe_step.is_none(),
        converged,
        final_goal_distances,
        final_headings,
        wind_opposite_heading,
        alignment_errors,
        covariance_bound_held: monitor.covariance_bound_held,
        gain_perturbation,
        gain_condition_held,
        envelope_fraction: if monitor.agent_steps == 0 {
            1.0
        } else {
            monitor.within_envelope as f64 / monitor.agent_steps as f64
        },
        margin_violation_steps: monitor.margin_violation_steps,
        aborted,
    }
}

/// Wrapped difference between a heading and a reference; NaN reference gives NaN.
pub fn alignment_error(heading: f64, reference: f64) -> f64 {
    if reference.is_nan() {
        f64::NAN
    } else {
        wrap(heading - reference).abs()
    }
}

/// Runs the configured number of steps and keeps the full trace.
pub fn run(scenario: &ScenarioConfig, seed: u64) -> (RunTrace, RunSummary) {
    let mut world = World::new(scenario, seed);
    let mut monitor = StepMonitor::default();
    let mut trace = RunTrace { records: Vec::with_capacity(scenario.steps), aborted: None };
    for _ in 0..scenario.steps {
        match world.step(&mut monitor) {
            Ok(rec) => trace.records.push(rec),
            Err(e) => {
                warn!("seed {seed}: run aborted: {e}");
                trace.aborted = Some(e);
                break;
            }
        }
    }
    let summary = summarize(&world, monitor, seed, trace.aborted.clone());
    (trace, summary)
}

/// Same as [`run`] without retaining the per-step records.
pub fn run_summary(scenario: &ScenarioConfig, seed: u64) -> RunSummary {
    let mut world = World::new(scenario, seed);
    let mut monitor = StepMonitor::default();
    let mut aborted = None;
    for _ in 0..scenario.steps {
        if let Err(e) = world.step(&mut monitor) {
            warn!("seed {seed}: run aborted: {e}");
            aborted = Some(e);
            break;
        }
    }
    summarize(&world, monitor, seed, aborted)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantiles {
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub max: f64,
}

fn quantiles(values: &mut [f64]) -> Quantiles {
    if values.is_empty() {
        return Quantiles { q05: f64::NAN, q50: f64::NAN, q95: f64::NAN, max: f64::NAN };
    }
    values.sort_by(f64::total_cmp);
    // Nearest-rank.
    let pick = |q: f64| {
        let rank = (q * values.len() as f64).ceil().max(1.0) as usize;
        values[rank.min(values.len()) - 1]
    };
    Quantiles { q05: pick(0.05), q50: pick(0.5), q95: pick(0.95), max: values[values.len() - 1] }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    /// One summary per seed, in seed-list order.
    pub runs: Vec<RunSummary>,
    pub safe_fraction: f64,
    pub converged_fraction: f64,
    pub worst_min_distance: f64,
    /// Over every agent's final goal distance in every run.
    pub goal_distance_quantiles: Quantiles,
    pub failed_runs: usize,
}

impl BatchReport {
    pub fn from_runs(runs: Vec<RunSummary>) -> Self {
        let n = runs.len().max(1) as f64;
        let safe = runs.iter().filter(|r| r.safe).count() as f64;
        let converged = runs.iter().filter(|r| r.converged).count() as f64;
        let worst = runs.iter().map(|r| r.min_distance).fold(f64::INFINITY, f64::min);
        let mut dists: Vec<f64> = runs.iter().flat_map(|r| r.final_goal_distances.iter().copied()).collect();
        BatchReport {
            safe_fraction: safe / n,
            converged_fraction: converged / n,
            worst_min_distance: worst,
            goal_distance_quantiles: quantiles(&mut dists),
            failed_runs: runs.iter().filter(|r| r.aborted.is_some()).count(),
            runs,
        }
    }
}

/// Independent runs, one per seed. `threads = None` uses rayon's global pool;
/// results do not depend on the degree of parallelism.
pub fn monte_carlo(scenario: &ScenarioConfig, seeds: &[u64], threads: Option<usize>) -> BatchReport {
    let go = || seeds.par_iter().map(|&s| run_summary(scenario, s)).collect::<Vec<_>>();
    let runs = match threads {
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build() {
            Ok(pool) => pool.install(go),
            Err(e) => {
                warn!("could not build a {k}-thread pool ({e}); using the global pool");
                go()
            }
        },
        None => go(),
    };
    BatchReport::from_runs(runs)
}

/// Per-step minimum pairwise true distance; empty for fewer than two agents.
pub fn min_pairwise_series(trace: &RunTrace) -> Vec<f64> {
    trace
        .records
        .iter()
        .filter(|r| r.agents.len() >= 2)
        .map(|r| r.min_pair_distance)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalRow {
    pub agent: usize,
    pub goal_distance: f64,
    pub final_tolerance: f64,
    pub heading: f64,
    pub wind_opposite: f64,
    pub alignment_error: f64,
}

pub fn final_report(summary: &RunSummary, final_tolerance: f64) -> Vec<FinalRow> {
    summary
        .final_goal_distances
        .iter()
        .zip(&summary.final_headings)
        .enumerate()
        .map(|(agent, (&goal_distance, &heading))| FinalRow {
            agent,
            goal_distance,
            final_tolerance,
            heading,
            wind_opposite: summary.wind_opposite_heading,
            alignment_error: alignment_error(heading, summary.wind_opposite_heading),
        })
        .collect()
}

/// Mean-wind value of a profile at the end of a run of `steps` steps.
pub fn final_mean_wind(model: &WindModel, steps: usize, dt: f64) -> Vec2 {
    match model.profile {
        WindProfile::Constant(m) => m,
        WindProfile::Sinusoidal { .. } => mean_wind(model, steps as f64 * dt),
    }
}
