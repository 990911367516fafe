use std::path::{Path, PathBuf};
use std::process::Command;

use swarmfield::sim::run;
use swarmfield_cli::csv::{write_trace, TRACE_HEADER};
use swarmfield_cli::scenario::{parse_scenario, parse_str, Overrides};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_swarmfield"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

const TWO_AGENTS: &str = r#"
dt = 0.01
steps = 3
seed = 5
d_m = 0.8
eps = 0.1

[wind]
profile = "constant"
mean_x = -0.2
mean_y = 0.7
cov_xx = 0.01
cov_yy = 0.01

[meas]
cov_x = 0.01
cov_y = 0.01
cov_theta = 0.01

[[agents]]
x0 = 0.0
y0 = 0.0
theta0 = 0.0
goal_x = 30.0
goal_y = 0.0
radius = 0.4

[[agents]]
x0 = 6.0
y0 = 0.0
theta0 = 3.14159
goal_x = -30.0
goal_y = 0.0
radius = 0.4
"#;

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn shipped_scenarios_validate() {
    for name in ["scenario1.cfg", "scenario2.cfg"] {
        let (_, cfg) = parse_scenario(&shipped(name), &Overrides::default()).unwrap();
        assert_eq!(cfg.agents.len(), 20);
        assert_eq!(cfg.dt, 0.01);
        assert_eq!(cfg.steps, 15000);
        let out = bin().args(["validate", "--scenario"]).arg(shipped(name)).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let (_, cfg) = parse_scenario(&shipped("scenario1.cfg"), &Overrides::default()).unwrap();
    assert_eq!(swarmfield::disturbance::mean_wind(&cfg.wind, 37.0), swarmfield::Vec2::new(-0.2, 0.7));
}

#[test]
fn trace_csv_layout() {
    let (_, cfg) = parse_str(TWO_AGENTS, &Overrides::default()).unwrap();
    let (trace, _) = run(&cfg, 5);
    let mut buf = Vec::new();
    write_trace(&trace, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(!text.contains('\r'));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], TRACE_HEADER);
    assert_eq!(lines.len(), 1 + 6);

    // Round trip and replicated min_pair_dist.
    for (k, line) in lines[1..].iter().enumerate() {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 13);
        let rec = &trace.records[k / 2];
        let a = &rec.agents[k % 2];
        let want = [
            rec.t,
            (k % 2) as f64,
            a.state.position.x,
            a.state.position.y,
            a.state.heading,
            a.estimate.position.x,
            a.estimate.position.y,
            a.estimate.heading,
            a.command.linear_speed,
            a.command.angular_rate,
            a.goal_distance,
            rec.min_pair_distance,
            a.estimation_error,
        ];
        for (got, want) in cols.iter().zip(want) {
            // Half a unit in the ninth significant digit.
            assert!((got - want).abs() <= 5e-9 * want.abs(), "{got} vs {want}");
        }
    }
    for pair in lines[1..].chunks(2) {
        let a: Vec<&str> = pair[0].split(',').collect();
        let b: Vec<&str> = pair[1].split(',').collect();
        assert_eq!(a[11], b[11]);
        assert_eq!(a[0], b[0]);
    }
}

#[test]
fn run_writes_a_reproducible_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write(dir.path(), "two.cfg", &TWO_AGENTS.replace("steps = 3", "steps = 400"));
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("out{k}"));
        let st = bin().args(["run", "--seed", "42", "--scenario"]).arg(&scen).arg("--out").arg(&out).status().unwrap();
        assert_eq!(st.code(), Some(0));
        outputs.push(out);
    }
    for f in [
        "trace.csv",
        "summary.csv",
        "final.csv",
        "manifest.json",
        "min_distance.svg",
        "final_distance.svg",
        "final_heading.svg",
        "trajectories.svg",
    ] {
        let a = std::fs::read(outputs[0].join(f)).unwrap();
        let b = std::fs::read(outputs[1].join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(outputs[0].join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seeds"][0], 42);
    assert_eq!(manifest["scenario_sha256"].as_str().unwrap().len(), 64);
    assert!((manifest["derived"]["eps_f"].as_f64().unwrap() - 1.5213).abs() < 5e-4);

    let min_plot = std::fs::read_to_string(outputs[0].join("min_distance.svg")).unwrap();
    assert!(min_plot.contains("data-y=\"0.8\""));
    let dist_plot = std::fs::read_to_string(outputs[0].join("final_distance.svg")).unwrap();
    let eps_f: f64 = manifest["derived"]["eps_f"].as_f64().unwrap();
    assert!(dist_plot.contains(&format!("data-y=\"{eps_f}\"")));
    assert!((eps_f - 1.52).abs() < 0.01);
    let heading_plot = std::fs::read_to_string(outputs[0].join("final_heading.svg")).unwrap();
    assert!(heading_plot.contains(&format!("data-y=\"{}\"", (-0.7f64).atan2(0.2))));
}

#[test]
fn validate_lists_every_problem_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = TWO_AGENTS.replace("dt = 0.01", "dt = 0.0").replace("radius = 0.4", "radius = -1.0").replace("eps = 0.1", "eps = 3.0");
    let p = write(dir.path(), "bad.cfg", &bad);
    let out = bin().args(["validate", "--scenario"]).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("dt must be > 0"), "{err}");
    assert!(err.contains("agent 0: radius"), "{err}");
    assert!(err.contains("agent 1: radius"), "{err}");
    assert!(err.contains("d_m'") && err.contains("d_eps"), "{err}");

    let empty = write(dir.path(), "empty.cfg", "");
    assert_eq!(bin().args(["validate", "--scenario"]).arg(&empty).output().unwrap().status.code(), Some(1));
    let unknown = write(dir.path(), "unknown.cfg", &format!("colour = 3\n{TWO_AGENTS}"));
    assert_eq!(bin().args(["validate", "--scenario"]).arg(&unknown).output().unwrap().status.code(), Some(1));
    let missing = dir.path().join("nope.cfg");
    assert_eq!(bin().args(["validate", "--scenario"]).arg(&missing).output().unwrap().status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(bin().arg("--frobnicate").output().unwrap().status.code(), Some(1));
    assert_eq!(bin().args(["run", "--scenario", "x"]).output().unwrap().status.code(), Some(1));
    let out = bin().args(["validate", "--scenario"]).arg(shipped("scenario1.cfg")).args(["--mode", "fast"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(bin().arg("--help").output().unwrap().status.code(), Some(0));
}

#[test]
fn unwritable_output_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write(dir.path(), "two.cfg", TWO_AGENTS);
    let blocker = write(dir.path(), "file", "x");
    let st = bin().args(["run", "--scenario"]).arg(&scen).arg("--out").arg(blocker.join("sub")).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn batch_below_required_safety_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    // Agents start inside d_m of each other, so every run is unsafe.
    let text = TWO_AGENTS.replace("x0 = 6.0", "x0 = 0.5").replace("steps = 3", "steps = 20");
    let scen = write(dir.path(), "close.cfg", &text);
    let out = dir.path().join("b");
    let run = |req: &str| {
        bin()
            .args(["batch", "--seeds", "3", "--parallel", "2", "--require-safe", req, "--scenario"])
            .arg(&scen)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap()
            .code()
    };
    assert_eq!(run("0.5"), Some(3));
    assert_eq!(run("0.0"), Some(0));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "seed,min_dist,safe,max_final_goal_dist,converged");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("5,") && lines[1].contains(",false,"));
}

#[test]
fn margin_override_and_no_noise_reach_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write(dir.path(), "two.cfg", TWO_AGENTS);
    let out = dir.path().join("o");
    let st = bin()
        .args(["run", "--no-noise", "--override-margins", "0,0", "--mode", "nominal", "--scenario"])
        .arg(&scen)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["derived"]["d_m_inflated"], 0.8);
    assert_eq!(m["derived"]["eps_j"], 0.0);
    assert_eq!(m["overrides"]["no_noise"], true);
    assert_eq!(m["mode"], "nominal");
}
