//! Acceptance gate: twelve criteria, one PASS/FAIL line each. Exits non-zero
//! when any criterion fails.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmfield::estimator::linearize;
use swarmfield::protocol::{
    approach_projection, compute_margins, linear_velocity_command, nominal_protocol_velocity, nominal_speed,
    separation_rate, separation_rate_wind_free, smooth_min, MarginSet, NeighborView,
};
use swarmfield::sim::{monte_carlo, BatchReport, StepMonitor, World};
use swarmfield::types::wrap_angle;
use swarmfield::vector_field::{heading_rate, perturbed_heading, FieldContext};
use swarmfield::{AgentState, ControlCommand, ScenarioConfig, Vec2};
use swarmfield_cli::scenario::{parse_scenario, Overrides};

const BATCH_RUNS: u64 = 100;

type Outcome = Result<String, String>;

fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn load(name: &str, overrides: &Overrides) -> ScenarioConfig {
    parse_scenario(&scenario_path(name), overrides).expect("shipped scenario parses").1
}

fn batch(name: &str) -> &'static BatchReport {
    static S1: OnceLock<BatchReport> = OnceLock::new();
    static S2: OnceLock<BatchReport> = OnceLock::new();
    let cell = if name == "scenario1.cfg" { &S1 } else { &S2 };
    cell.get_or_init(|| {
        let cfg = load(name, &Overrides::default());
        let seeds: Vec<u64> = (0..BATCH_RUNS).map(|k| cfg.seed + k).collect();
        let t = Instant::now();
        let r = monte_carlo(&cfg, &seeds, None);
        eprintln!("  ({name}: {} runs in {:.1} s)", seeds.len(), t.elapsed().as_secs_f64());
        r
    })
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn shipped_cov() -> Matrix3<f64> {
    Matrix3::identity() * 0.01
}

fn c1_margins() -> Outcome {
    let m = compute_margins(&[shipped_cov(); 20], 0.8).map_err(|e| e.to_string())?;
    let eps_d = m.bounds.eps_d;
    let eps_f = eps_d + 0.1;
    let r_c = 2.0 * m.d_m_inflated;
    let ok = (eps_d - 1.4213).abs() <= 5e-4 && (eps_f - 1.5213).abs() <= 5e-4 && (r_c - 7.2853).abs() <= 1e-3;
    check(ok, format!("eps_d = {eps_d:.5}, eps_f = {eps_f:.5}, R_c = {r_c:.5}"))
}

fn c2_safety() -> Outcome {
    let b = batch("scenario1.cfg");
    check(
        b.safe_fraction >= 0.99,
        format!("safe fraction {:.3} over {} runs, worst min distance {:.3} m", b.safe_fraction, b.runs.len(), b.worst_min_distance),
    )
}

fn c3_convergence() -> Outcome {
    let b = batch("scenario1.cfg");
    check(
        b.converged_fraction >= 0.95,
        format!(
            "converged fraction {:.3}, final goal distance q95 {:.4} m, max {:.4} m",
            b.converged_fraction, b.goal_distance_quantiles.q95, b.goal_distance_quantiles.max
        ),
    )
}

fn c4_alignment() -> Outcome {
    let b = batch("scenario1.cfg");
    let target = (-0.7f64).atan2(0.2);
    let mut total = 0usize;
    let mut aligned = 0usize;
    for r in &b.runs {
        for h in &r.final_headings {
            total += 1;
            let err = wrap_angle(h - target).map_err(|e| e.to_string())?.abs();
            if err <= 0.3 {
                aligned += 1;
            }
        }
    }
    let frac = aligned as f64 / total as f64;
    check(frac >= 0.90, format!("{aligned}/{total} agents within 0.3 rad of {target:.4} rad ({frac:.3})"))
}

fn c5_time_varying() -> Outcome {
    let cfg = load("scenario2.cfg", &Overrides::default());
    let mut peak: f64 = 0.0;
    for k in 0..=cfg.steps {
        let w = swarmfield::disturbance::mean_wind(&cfg.wind, k as f64 * cfg.dt);
        peak = peak.max(w.x.abs()).max(w.y.abs());
    }
    let b = batch("scenario2.cfg");
    check(
        b.safe_fraction >= 0.99 && b.converged_fraction >= 0.90 && peak <= 1.0,
        format!(
            "safe {:.3}, converged {:.3}, worst min distance {:.3} m, peak mean-wind component {peak:.3} m/s",
            b.safe_fraction, b.converged_fraction, b.worst_min_distance
        ),
    )
}

fn c6_smooth_min() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mu = 50.0;
    let mut worst_gap: f64 = 0.0;
    for _ in 0..10_000 {
        let n = rng.random_range(1..=20usize);
        let scale = [0.01, 1.0, 100.0][rng.random_range(0..3usize)];
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
        let m = a.iter().copied().fold(f64::INFINITY, f64::min);
        let g = smooth_min(&a, mu);
        let lower = m - (n as f64).ln() / mu;
        if !(g <= m && g >= lower) {
            return Err(format!("sandwich broken for n = {n}: min {m}, g {g}, lower {lower}"));
        }
        worst_gap = worst_gap.max(m - g);
    }
    Ok(format!("10000 lists, largest min - g = {worst_gap:.5} <= ln(20)/50 = {:.5}", 20f64.ln() / mu))
}

/// Samples true configurations at separation `d_m` with estimation errors in
/// the box, counting cases where the estimated guard fires but agent i is in
/// truth moving toward j.
fn guard_counterexamples(m: &MarginSet, d_m: f64, samples: usize, seed: u64) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ex, et) = (m.bounds.eps_x, m.bounds.eps_theta);
    let mut fired = 0;
    let mut bad = 0;
    for _ in 0..samples {
        let beta = rng.random_range(-PI..PI);
        let r_i = Vec2::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let r_j = r_i + Vec2::from_angle(beta) * d_m;
        // Mostly pointing at the neighbor, where the guard matters.
        let theta_i = beta + rng.random_range(-PI / 2.0..PI / 2.0) * if rng.random_bool(0.8) { 1.0 } else { 2.0 };
        let mut corner = |e: f64| if rng.random_bool(0.2) { if rng.random_bool(0.5) { e } else { -e } } else { rng.random_range(-e..=e) };
        let hat_i = AgentState::new(r_i + Vec2::new(corner(ex), corner(ex)), theta_i + corner(et));
        let hat_j = r_j + Vec2::new(corner(ex), corner(ex));
        if approach_projection(&hat_i, hat_j) <= -m.eps_j {
            fired += 1;
            let truth = (r_i - r_j).dot(Vec2::from_angle(theta_i));
            if truth > 0.0 {
                bad += 1;
            }
        }
    }
    (fired, bad)
}

fn c7_guard() -> Outcome {
    let shipped = compute_margins(&[shipped_cov()], 0.8).map_err(|e| e.to_string())?;
    let (fired_p, bad_p) = guard_counterexamples(&shipped, 0.8, 100_000, 7);
    let tight = MarginSet::from_bounds(0.1, 0.05, 0.8).map_err(|e| e.to_string())?;
    let (fired_t, bad_t) = guard_counterexamples(&tight, 0.8, 100_000, 8);
    check(
        bad_p == 0 && bad_t == 0 && fired_t > 0,
        format!(
            "shipped margins: {bad_p} counterexamples ({fired_p} guard activations, eps_J = {:.2}); \
             eps_d = 0.1, eps_theta = 0.05: {bad_t} counterexamples ({fired_t} activations)",
            shipped.eps_j
        ),
    )
}

fn c8_filter() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut worst_fd: f64 = 0.0;
    for _ in 0..100 {
        let q = Vector3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-PI..PI));
        let u = ControlCommand::new(rng.random_range(0.0..2.0), rng.random_range(-3.0..3.0));
        let a = linearize(&q, &u);
        let h = 1e-6;
        for k in 0..3 {
            let mut e = Vector3::zeros();
            e[k] = h;
            let f = |q: Vector3<f64>| Vector3::new(u.linear_speed * q[2].cos(), u.linear_speed * q[2].sin(), u.angular_rate);
            let col = (f(q + e) - f(q - e)) / (2.0 * h);
            for r in 0..3 {
                worst_fd = worst_fd.max((col[r] - a[(r, k)]).abs());
            }
        }
    }

    // 3-σ coverage for one agent on its own for 150 s.
    let mut cfg = load("scenario1.cfg", &Overrides::default());
    cfg.agents.truncate(1);
    let mut world = World::new(&cfg, 808);
    let mut monitor = StepMonitor::default();
    let mut inside = [0usize; 3];
    let p0 = swarmfield::estimator::spectral_norm(&cfg.noise.meas_cov);
    let mut single_bound = true;
    for _ in 0..cfg.steps {
        let truth = world.true_states().next().expect("one agent");
        let est = *world.estimates().next().expect("one agent");
        single_bound &= swarmfield::estimator::spectral_norm(&est.cov) <= p0 + 1.0;
        let err = [
            truth.position.x - est.mean[0],
            truth.position.y - est.mean[1],
            wrap_angle(truth.heading - est.mean[2]).map_err(|e| e.to_string())?,
        ];
        for k in 0..3 {
            if err[k].abs() <= 3.0 * est.cov[(k, k)].sqrt() {
                inside[k] += 1;
            }
        }
        world.step(&mut monitor).map_err(|e| e.to_string())?;
    }
    let coverage: Vec<f64> = inside.iter().map(|c| *c as f64 / cfg.steps as f64).collect();
    let batches_ok = [batch("scenario1.cfg"), batch("scenario2.cfg")]
        .iter()
        .all(|b| b.runs.iter().all(|r| r.covariance_bound_held));
    check(
        worst_fd <= 1e-6 && coverage.iter().all(|c| *c >= 0.95) && single_bound && batches_ok,
        format!(
            "Jacobian vs FD max error {worst_fd:.2e}; 3-sigma coverage x {:.4} y {:.4} theta {:.4}; \
             covariance bound held in every step of every run: {}",
            coverage[0],
            coverage[1],
            coverage[2],
            single_bound && batches_ok
        ),
    )
}

fn c9_heading_rate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let goal = Vec2::new(rng.random_range(-20.0..20.0), rng.random_range(-20.0..20.0));
        let dist = rng.random_range(0.5..25.0);
        let pos = goal + Vec2::from_angle(rng.random_range(-PI..PI)) * dist;
        let theta = rng.random_range(-PI..PI);
        let k_u = 1.0;
        let u = k_u * dist.tanh();
        let wind = Vec2::from_angle(rng.random_range(-PI..PI)) * rng.random_range(0.0..0.8 * u);
        let ctx = FieldContext { position: pos, goal, neighbors: &[], d_r: 5.46, d_c: 7.28 };
        let got = heading_rate(&ctx, theta, k_u, wind);
        if got.degenerate {
            return Err(format!("degenerate heading rate at {pos:?}"));
        }
        let delta = 1e-4;
        let step = Vec2::from_angle(theta) * (u * delta);
        let ahead = perturbed_heading(&ctx.at(pos + step), k_u, wind).map_err(|e| e.to_string())?;
        let behind = perturbed_heading(&ctx.at(pos - step), k_u, wind).map_err(|e| e.to_string())?;
        let want = wrap_angle(ahead - behind).map_err(|e| e.to_string())? / (2.0 * delta);
        let rel = (got.rate - want).abs() / want.abs();
        worst = worst.max(rel);
    }
    check(worst <= 1e-3, format!("100 configurations, worst relative error {worst:.2e}"))
}

fn c10_wind_cancellation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let r_i = Vec2::new(rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
        let r_j = r_i + Vec2::from_angle(rng.random_range(-PI..PI)) * rng.random_range(0.1..20.0);
        let (ti, tj) = (rng.random_range(-PI..PI), rng.random_range(-PI..PI));
        let (ui, uj) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
        let w = Vec2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let full = separation_rate(r_i, Vec2::from_angle(ti) * ui + w, r_j, Vec2::from_angle(tj) * uj + w);
        let reduced = separation_rate_wind_free(&AgentState::new(r_i, ti), ui, &AgentState::new(r_j, tj), uj);
        // Relative to the size of the terms that cancel.
        let scale = ui + uj + w.norm();
        worst = worst.max((full - reduced).abs() / scale);
    }
    check(worst <= 1e-12, format!("10000 pairs, worst scaled difference {worst:.2e}"))
}

fn c11_zero_noise_reduction() -> Outcome {
    let overrides = Overrides { mode: None, no_noise: true, margins: Some((0.0, 0.0)) };
    let cfg = load("scenario1.cfg", &overrides);
    let s = cfg.safety;
    let params = cfg.agents[0].params;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_lin: f64 = 0.0;
    let mut worst_ang: f64 = 0.0;
    for _ in 0..1000 {
        let own = AgentState::new(Vec2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0)), rng.random_range(-PI..PI));
        let mut p = params;
        p.goal = own.position + Vec2::from_angle(rng.random_range(-PI..PI)) * rng.random_range(1.0..40.0);
        let k = rng.random_range(1..=5usize);
        let views: Vec<NeighborView> = (0..k)
            .map(|id| NeighborView {
                id,
                position: own.position + Vec2::from_angle(rng.random_range(-PI..PI)) * rng.random_range(s.d_m..s.comm_radius),
                heading: rng.random_range(-PI..PI),
                speed: rng.random_range(0.0..1.0),
            })
            .collect();
        let robust = linear_velocity_command(&own, &views, &p, &s, Vec2::ZERO).speed;
        let handoff = nominal_speed(own.position, p.goal, p.speed_gain);
        let nominal = nominal_protocol_velocity(&own, &views, &p, &s, handoff);
        worst_lin = worst_lin.max((robust - nominal).abs());

        let positions: Vec<Vec2> = views.iter().map(|v| v.position).collect();
        let ctx = FieldContext { position: own.position, goal: p.goal, neighbors: &positions, d_r: s.d_r, d_c: s.d_c };
        let a = swarmfield::protocol::angular_velocity_command(own.heading, &ctx, p.speed_gain, p.turn_gain, swarmfield::disturbance::mean_wind(&cfg.wind, rng.random_range(0.0..150.0)));
        let b = swarmfield::protocol::angular_velocity_command(own.heading, &ctx, p.speed_gain, p.turn_gain, Vec2::ZERO);
        worst_ang = worst_ang.max((a - b).abs());
    }
    let bound = 20f64.ln() / 50.0;
    check(
        worst_lin <= bound && worst_ang == 0.0,
        format!("1000 configurations, worst speed gap {worst_lin:.4} m/s (bound {bound:.4}), worst turn-rate gap {worst_ang:.1e}"),
    )
}

fn c12_determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("swarmfield-acceptance-{}", std::process::id()));
    let mut traces = Vec::new();
    for k in 0..2 {
        let out = dir.join(format!("run{k}"));
        let status = Command::new(env!("CARGO_BIN_EXE_swarmfield"))
            .args(["run", "--seed", "42", "--scenario"])
            .arg(scenario_path("scenario1.cfg"))
            .arg("--out")
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("run exited with {status}"));
        }
        traces.push(std::fs::read(out.join("trace.csv")).map_err(|e| e.to_string())?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    let same_csv = traces[0] == traces[1];

    let cfg = load("scenario1.cfg", &Overrides::default());
    let seeds: Vec<u64> = (0..6).map(|k| cfg.seed + k).collect();
    let one = monte_carlo(&cfg, &seeds, Some(1));
    let three = monte_carlo(&cfg, &seeds, Some(3));
    let reference = &batch("scenario1.cfg").runs[..seeds.len()];
    let same_batch = one == three && one.runs == reference;
    check(
        same_csv && same_batch,
        format!(
            "trace.csv identical across runs: {same_csv} ({} bytes); batch identical for 1, 3 and default threads: {same_batch}",
            traces[0].len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("margin arithmetic", c1_margins),
        ("safety, scenario 1", c2_safety),
        ("convergence, scenario 1", c3_convergence),
        ("wind alignment, scenario 1", c4_alignment),
        ("time-varying wind, scenario 2", c5_time_varying),
        ("smooth-min sandwich", c6_smooth_min),
        ("estimated guard implies true guard", c7_guard),
        ("filter numerics", c8_filter),
        ("heading-rate oracle", c9_heading_rate),
        ("wind cancellation in separation rate", c10_wind_cancellation),
        ("zero-noise reduction", c11_zero_noise_reduction),
        ("determinism", c12_determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = f();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {:>2} {name}: {detail} [{secs:.1} s]", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {:>2} {name}: {detail} [{secs:.1} s]", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
