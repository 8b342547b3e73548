use std::path::Path;
use std::process::{Command, Output};

use fadmit::io::{DatasetFile, SUMMARY_HEADER, TRACE_HEADER};
use fadmit::scenario::Task;

fn fadmit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fadmit")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SHORT_PH: &str = "task = \"PH\"\nmode = \"force_aware\"\nseed = 2\nduration = 1.5\n";

#[test]
fn gen_demos_single_episode_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.fadm");
    let b = dir.path().join("b.fadm");
    for out in [&a, &b] {
        let o = fadmit(&["gen-demos", "--task", "PH", "--count", "1", "--seed", "4", "--out", s(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("1 episodes"));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let file = DatasetFile::load(&a).unwrap();
    assert_eq!(file.task, Task::PH);
    assert_eq!(file.episodes.len(), 1);
    assert!(file.episodes[0].iter().all(|t| t.decode_pose().is_ok()));
}

#[test]
fn run_writes_ordered_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ph.toml");
    std::fs::write(&cfg, SHORT_PH).unwrap();
    let t1 = dir.path().join("t1.csv");
    let t2 = dir.path().join("t2.csv");
    let o = fadmit(&["run", "--config", s(&cfg), "--out", s(&t1)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let line = String::from_utf8_lossy(&o.stdout);
    assert!(line.contains("task=PH") && line.contains("success="), "{line}");
    fadmit(&["run", "--config", s(&cfg), "--out", s(&t2)]);
    let text = std::fs::read_to_string(&t1).unwrap();
    assert_eq!(text, std::fs::read_to_string(&t2).unwrap());

    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), TRACE_HEADER.join(","));
    let times: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(times.len(), 1500);
    assert!(times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "mode = \"force_aware\"\ntask = \"XX\"\n").unwrap();
    let o = fadmit(&["run", "--config", s(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"), "{}", String::from_utf8_lossy(&o.stderr));

    let zero_d = dir.path().join("verify.toml");
    std::fs::write(&zero_d, "damping = 0.0\n").unwrap();
    assert_eq!(code(&fadmit(&["verify", "--config", s(&zero_d)])), 2);

    let cfg = dir.path().join("ph.toml");
    std::fs::write(&cfg, SHORT_PH).unwrap();
    let unwritable = dir.path().join("missing").join("trace.csv");
    let o = fadmit(&["run", "--config", s(&cfg), "--out", s(&unwritable)]);
    assert_eq!(code(&o), 2);

    assert_eq!(code(&fadmit(&["frobnicate"])), 2);
    assert_eq!(code(&fadmit(&["run", "--config", s(&dir.path().join("nope.toml"))])), 2);
}

#[test]
fn verify_small_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("verify.toml");
    std::fs::write(&cfg, "masses = [1.0]\nsurface_stiffness = [100.0, 1000.0]\ntarget_forces = [0.0, 4.0]\ndisturbance_duration = 10.0\n").unwrap();
    let out = dir.path().join("report.csv");
    let o = fadmit(&["verify", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 4);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",1")));
}

#[test]
fn suite_rows_and_empty_suite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("suite.toml");
    std::fs::write(&cfg, "seeds = 3\n\n[scenario]\ntask = \"PH\"\nduration = 1.0\n").unwrap();
    let out = dir.path().join("summary.csv");
    let o = fadmit(&["suite", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], SUMMARY_HEADER.join(","));
    assert_eq!(lines.len(), 5);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(3) == Some("3")));

    let o = fadmit(&["suite", "--config", s(&cfg), "--count", "0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim_end(), SUMMARY_HEADER.join(","));
}
