use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn kinsusp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinsusp"))
        .args(args)
        .env_remove("KINSUSP_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run_dir(stdout: &[u8]) -> PathBuf {
    let s = String::from_utf8_lossy(stdout);
    PathBuf::from(s.lines().next().expect("run prints its directory"))
}

#[test]
fn malformed_configs_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let bad_gamma = write(dir.path(), "g.toml", "[params]\ngamma = 1.5\n");
    let o = kinsusp(&["run", "mixing", "--config", bad_gamma.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));

    let unknown = write(dir.path(), "u.toml", "[params]\nnu = 0.1\n\n[run]\nsteps = 3\n");
    let o = kinsusp(&["run", "mixing", "--config", unknown.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 5"));

    let tol = write(dir.path(), "t.toml", "[experiment]\ntolerances = { nope = 1.0 }\n");
    let o = kinsusp(&["run", "transforms-selftest", "--config", tol.to_str().unwrap(), "--out", out]);
    assert_eq!(o.status.code(), Some(2));

    let o = kinsusp(&["run", "no-such-experiment", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = kinsusp(&["check", dir.path().join("missing").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn selftest_passes_and_check_reevaluates_stored_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = kinsusp(&["run", "transforms-selftest", "--out", out, "--threads", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let run = run_dir(&o.stdout);
    assert!(run.starts_with(dir.path().join("transforms-selftest")));

    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
    assert!(summary["results"]["max_round_trip_error"].as_f64().unwrap() < 1e-12);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"], summary["config_hash"]);
    assert_eq!(manifest["threads"], 1);
    assert!(manifest["tolerances"]["round_trip"].is_number());

    let o = kinsusp(&["check", run.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));

    // A corrupted stored series is caught by the re-evaluation.
    let csv = run.join("series").join("round_trip.csv");
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let last = lines.len() - 1;
    let mut cells: Vec<&str> = lines[last].split(',').collect();
    cells[2] = "0.5";
    lines[last] = cells.join(",");
    std::fs::write(&csv, lines.join("\n") + "\n").unwrap();
    let o = kinsusp(&["check", run.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn identical_inputs_give_identical_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let ra = run_dir(&kinsusp(&["run", "volterra-resolvent", "--out", a.to_str().unwrap()]).stdout);
    let rb = run_dir(&kinsusp(&["run", "volterra-resolvent", "--out", b.to_str().unwrap()]).stdout);
    assert_eq!(ra.file_name(), rb.file_name());
    assert_eq!(
        std::fs::read(ra.join("summary.json")).unwrap(),
        std::fs::read(rb.join("summary.json")).unwrap()
    );
    let rc = run_dir(&kinsusp(&["run", "volterra-resolvent", "--seed", "2", "--out", a.to_str().unwrap()]).stdout);
    assert_ne!(ra.file_name(), rc.file_name());
}

#[test]
fn pusher_above_threshold_reports_growth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "grow.toml",
        "[params]\nkmax = 1\nL = 8\nnu = 0.01\n\n[run]\ndt = 0.02\nt_end = 60.0\nrecord_every = 10\n\n[experiment]\nstrength = 3.0\namplitude = 10.0\n",
    );
    let o = kinsusp(&["run", "nonlinear-stability", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("growth detected"));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_kinsusp"))
        .args(["run", "transforms-selftest", "--out", dir.path().to_str().unwrap()])
        .env("KINSUSP_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = kinsusp(&["list"]);
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 8);
}
