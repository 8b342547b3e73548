//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use fadmit::expert::{demo_coverage_ok, generate_demos, PhaseLabel};
use fadmit::harness::{run_episode, run_suite, ControllerMode, EpisodeResult, RunLog, ScenarioConfig};
use fadmit::io::{load_scenario, load_suite, DatasetFile};
use fadmit::scenario::{EnvParams, Task};
use fadmit::verifier::*;

const FORCE_BAND: f64 = 0.2;
const WW_TARGET: f64 = 4.0;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn failed(err: impl std::fmt::Display) -> Outcome {
    outcome(false, format!("error: {err}"))
}

fn grid() -> Vec<NormalDynamicsParams> {
    VerifyConfig::default().grid().expect("default grid")
}

fn contact_convergence() -> Outcome {
    let start = Instant::now();
    let mut worst_x = 0.0f64;
    let mut worst_f = 0.0f64;
    let mut fails = Vec::new();
    for p in grid() {
        let r = match verify_prop1(&p, 0.0, 0.0, SETTLING_CONSTANTS * p.contact_time_constant()) {
            Ok(r) => r,
            Err(e) => return failed(e),
        };
        let x = r.check("position").unwrap().measured;
        let f = r.check("force").unwrap().measured / p.f_h;
        worst_x = worst_x.max(x);
        worst_f = worst_f.max(f);
        let lyap_ok = r.check("lyapunov_decrease").unwrap().pass;
        if !(x < 1e-4 && f < 0.01 && lyap_ok) {
            fails.push(p.to_string());
        }
    }
    let elapsed = start.elapsed();
    outcome(
        fails.is_empty() && elapsed < Duration::from_secs(10),
        format!(
            "27 points, max |x - x_eq| {worst_x:.2e} m, max relative force error {:.2e}, {:.2} s, failures {fails:?}",
            worst_f,
            elapsed.as_secs_f64()
        ),
    )
}

fn free_flight() -> Outcome {
    let v0 = VerifyConfig::default().free_velocity;
    let mut worst = 0.0f64;
    for p in grid() {
        for v0 in [v0, 0.0, -v0] {
            match free_flight_velocity_error(&p, v0, SETTLING_CONSTANTS * p.free_time_constant(), 1e-4) {
                Ok(e) => worst = worst.max(e),
                Err(e) => return failed(e),
            }
        }
    }
    outcome(worst < 1e-5, format!("max velocity error {worst:.2e} m/s at dt = 1e-4 s"))
}

fn disturbance_iss() -> Outcome {
    let mut gain = 0.0f64;
    let mut young = 0.0f64;
    let mut fails = Vec::new();
    for p in grid() {
        let r = match verify_prop3(&p, 0.005, std::f64::consts::TAU, 60.0) {
            Ok(r) => r,
            Err(e) => return failed(e),
        };
        gain = gain.max(r.check("half_amplitude_gain").unwrap().measured);
        young = young.max(r.check("young_inequality").unwrap().measured);
        if !r.pass {
            fails.push(format!("{}: {:?}", p, r.worst()));
        }
    }
    outcome(
        fails.is_empty(),
        format!(
            "60 s, max normalized Young residual {young:.2e}, max half-amplitude ratio {gain:.4}, failures {fails:?}"
        ),
    )
}

fn equivalence() -> Outcome {
    let cfg = VerifyConfig::default();
    let mut worst = 0.0f64;
    let mut fails = 0;
    for p in cfg.grid().unwrap() {
        let reports = match cfg.verify_point(&p) {
            Ok(r) => r,
            Err(e) => return failed(e),
        };
        let r = reports.into_iter().find(|r| r.proposition == Proposition::Equivalence).unwrap();
        if r.skipped || !r.pass {
            fails += 1;
        }
        worst = worst.max(r.check("max_step_gap").map_or(f64::INFINITY, |c| c.measured));
    }
    outcome(fails == 0, format!("max per-step gap {worst:.2e} m over 27 points"))
}

/// First tick after `from` with the board pushing back on the tool.
fn contact_onset(log: &RunLog, from: f64) -> Option<f64> {
    log.records.iter().find(|r| r.t >= from && r.contact && r.normal.dot(r.f_raw) > 0.0).map(|r| r.t)
}

/// Worst deviation from the target over contact-phase ticks in `[from, to)`.
fn worst_deviation(log: &RunLog, from: f64, to: f64) -> (f64, usize) {
    let window: Vec<f64> = log
        .records
        .iter()
        .filter(|r| r.t >= from && r.t < to && r.contact && r.phase == PhaseLabel::ContactInteraction)
        .map(|r| (r.normal_force() - WW_TARGET).abs())
        .collect();
    (window.iter().copied().fold(0.0, f64::max), window.len())
}

fn contact_end(log: &RunLog) -> f64 {
    log.records.iter().rev().find(|r| r.contact).map_or(0.0, |r| r.t)
}

fn force_trace() -> Outcome {
    let cfg = match load_scenario(&configs().join("run_ww.toml")) {
        Ok(c) => c,
        Err(e) => return failed(e),
    };
    let lower = cfg.disturbances.first().copied().expect("run_ww.toml has a lower event");
    let undisturbed = ScenarioConfig { disturbances: Vec::new(), ..cfg.clone() };

    let mut notes = Vec::new();
    let mut pass = true;

    let log = match run_episode(&undisturbed) {
        Ok(l) => l,
        Err(e) => return failed(e),
    };
    let Some(onset) = contact_onset(&log, 0.0) else { return outcome(false, "no contact".into()) };
    let end = contact_end(&log);
    let (dev, n) = worst_deviation(&log, onset + 1.0, end);
    pass &= dev <= FORCE_BAND && n > 1000 && !log.metrics.safety_stop;
    notes.push(format!("onset {onset:.3} s, |f - 4| <= {dev:.3} N over {n} ticks to {end:.2} s"));

    let log = match run_episode(&cfg) {
        Ok(l) => l,
        Err(e) => return failed(e),
    };
    let settled = lower.start + lower.ramp;
    let end = contact_end(&log);
    let (before, _) = worst_deviation(&log, onset + 1.0, lower.start);
    let (after, n) = worst_deviation(&log, settled + 2.0, end);
    // Earliest time after which the force stays in band.
    let recovered = log
        .records
        .iter()
        .filter(|r| r.t >= settled && r.t < end && r.contact)
        .rev()
        .find(|r| (r.normal_force() - WW_TARGET).abs() > FORCE_BAND)
        .map_or(settled, |r| r.t);
    pass &= before <= FORCE_BAND && after <= FORCE_BAND && n > 1000 && !log.metrics.safety_stop;
    notes.push(format!(
        "lowered {:.0} mm at {:.1} s, settled {settled:.1} s, back in band {:.3} s later, then |f - 4| <= {after:.3} N",
        lower.magnitude * 1000.0,
        lower.start,
        recovered - settled
    ));
    outcome(pass, notes.join("; "))
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn select(eps: &[EpisodeResult], mode: ControllerMode, disturbed: bool) -> Vec<&EpisodeResult> {
    eps.iter().filter(|e| e.mode == mode && e.disturbed == disturbed).collect()
}

fn baseline_ordering() -> Outcome {
    let suite = match load_suite(&configs().join("suite_ww.toml")) {
        Ok(s) => s,
        Err(e) => return failed(e),
    };
    if suite.seeds != 25 || suite.scenario.task != Task::WW {
        return outcome(false, "suite_ww.toml is not a 25-seed WW suite".into());
    }
    let res = match run_suite(&suite.expand()) {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let ink = |m| mean(select(&res.episodes, m, false).iter().map(|e| e.metrics.primary(Task::WW)));
    let rate = |m, d, f: fn(&EpisodeResult) -> bool| {
        let es = select(&res.episodes, m, d);
        es.iter().filter(|e| f(e)).count() as f64 / es.len() as f64
    };
    let (fa, low, high) =
        (ink(ControllerMode::ForceAware), ink(ControllerMode::BaselineLow), ink(ControllerMode::BaselineHigh));
    let fa_success = rate(ControllerMode::ForceAware, false, |e| e.metrics.success);
    let high_trips = rate(ControllerMode::BaselineHigh, true, |e| e.metrics.safety_stop);
    let fa_trips = rate(ControllerMode::ForceAware, true, |e| e.metrics.safety_stop);
    outcome(
        fa <= high && high <= low && fa_success >= 0.9 && high_trips >= 0.6 && fa_trips == 0.0,
        format!(
            "mean ink force_aware {fa:.2} <= high {high:.2} <= low {low:.2} cm; force_aware success {:.0}%; \
             disturbed trips high {:.0}%, force_aware {:.0}%",
            fa_success * 100.0,
            high_trips * 100.0,
            fa_trips * 100.0
        ),
    )
}

fn insertion_depth() -> Outcome {
    let base = match load_scenario(&configs().join("run_ph.toml")) {
        Ok(c) => c,
        Err(e) => return failed(e),
    };
    let cfgs: Vec<ScenarioConfig> = (0..25)
        .map(|seed| {
            let mut c = ScenarioConfig { mode: ControllerMode::ForceAware, seed, ..base.clone() };
            c.noise.seed = seed;
            c
        })
        .collect();
    let res = match run_suite(&cfgs) {
        Ok(r) => r,
        Err(e) => return failed(e),
    };
    let depths: Vec<f64> = res.episodes.iter().map(|e| e.metrics.primary(Task::PH)).collect();
    let m = mean(depths.iter().copied());
    let min = depths.iter().copied().fold(f64::INFINITY, f64::min);
    let f_h = cfgs[0].controller_config().target_force;
    outcome(
        m >= 20.0 && min >= 10.0 && f_h == 2.0,
        format!("f_H {f_h} N, 25 seeds, mean depth {m:.2} mm, min {min:.2} mm"),
    )
}

fn cli(args: &[&str]) -> std::io::Result<std::process::Output> {
    Command::new(env!("CARGO_BIN_EXE_fadmit")).args(args).output()
}

fn determinism() -> Outcome {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return failed(e),
    };
    let cfg = configs();
    let small_suite = dir.path().join("suite.toml");
    let small_verify = dir.path().join("verify.toml");
    let setup =
        std::fs::write(&small_suite, "seeds = 2\n\n[scenario]\ntask = \"PH\"\n\n[scenario.noise]\npos_std = 0.001\n")
            .and_then(|_| {
                std::fs::write(&small_verify, "masses = [1.0]\nsurface_stiffness = [1000.0]\ntarget_forces = [4.0]\n")
            });
    if let Err(e) = setup {
        return failed(e);
    }
    let s = |p: &Path| p.to_str().unwrap().to_owned();
    let commands: Vec<(&str, Vec<String>)> = vec![
        (
            "gen-demos",
            vec!["gen-demos".into(), "--config".into(), s(&cfg.join("demos_ww.toml")), "--count".into(), "20".into()],
        ),
        ("run", vec!["run".into(), "--config".into(), s(&cfg.join("run_ww.toml"))]),
        ("verify", vec!["verify".into(), "--config".into(), s(&small_verify)]),
        ("suite", vec!["suite".into(), "--config".into(), s(&small_suite)]),
    ];
    let mut identical = Vec::new();
    for (name, args) in commands {
        let mut outputs = Vec::new();
        for k in 0..2 {
            let out = dir.path().join(format!("{name}-{k}.out"));
            let mut full = args.clone();
            full.push("--out".into());
            full.push(s(&out));
            let argv: Vec<&str> = full.iter().map(String::as_str).collect();
            match cli(&argv) {
                Ok(o) if o.status.success() => match std::fs::read(&out) {
                    Ok(bytes) => outputs.push((bytes, o.stdout)),
                    Err(e) => return failed(e),
                },
                Ok(o) => return outcome(false, format!("{name} exited with {:?}", o.status.code())),
                Err(e) => return failed(e),
            }
        }
        let same = outputs[0] == outputs[1] && !outputs[0].0.is_empty();
        identical.push((name, same));
    }
    outcome(identical.iter().all(|(_, s)| *s), format!("byte-identical reruns: {identical:?}"))
}

fn dataset_generation() -> Outcome {
    let start = Instant::now();
    let demos = match generate_demos(Task::WW, &EnvParams::default(), 0, 2000) {
        Ok(d) => d,
        Err(e) => return failed(e),
    };
    let covered = demos.iter().filter(|d| demo_coverage_ok(d)).count();
    let file = DatasetFile { task: Task::WW, horizon: 16, episodes: demos.iter().map(|d| d.tuples.clone()).collect() };
    let mut bytes = Vec::new();
    if let Err(e) = file.write_to(&mut bytes) {
        return failed(e);
    }
    let elapsed = start.elapsed();
    outcome(
        covered == 2000 && elapsed < Duration::from_secs(300),
        format!("2000 demos, {} tuples, coverage {covered}/2000, {:.1} s", file.tuple_count(), elapsed.as_secs_f64()),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("contact convergence grid", contact_convergence),
        ("free-flight closed form", free_flight),
        ("sinusoidal disturbance ISS", disturbance_iss),
        ("pipeline vs normal-axis law", equivalence),
        ("wiping force trace", force_trace),
        ("wiping suite ordering", baseline_ordering),
        ("peg insertion depth", insertion_depth),
        ("CLI determinism", determinism),
        ("wiping dataset generation", dataset_generation),
    ];
    let mut all = true;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        all &= o.pass;
        println!("criterion {} {name}: {} ({})", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if !all {
        std::process::exit(1);
    }
}
