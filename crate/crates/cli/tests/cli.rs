use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mpccert(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpccert"))
        .current_dir(dir)
        .env_remove("SOURCE_DATE_EPOCH")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Data rows of a CSV file, skipping `#` lines and the column header.
fn data_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn certify_double_integrator_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpccert(dir.path(), &["--out", "o", "certify"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("status complete"));
    for f in ["partition.jsonl", "tau_daqp.csv", "wcet.csv"] {
        assert!(dir.path().join("o").join(f).exists(), "{f} missing");
    }
    let wcet = fs::read_to_string(dir.path().join("o/wcet.csv")).unwrap();
    assert!(wcet.contains("# config: "));
    assert!(wcet.contains("# units: "));
}

#[test]
fn unconstrained_set_has_no_splits() {
    let dir = tempfile::tempdir().unwrap();
    // A tiny box around the origin stays inside the unconstrained region.
    fs::write(
        dir.path().join("small.json"),
        r#"{"a": [[1,0],[-1,0],[0,1],[0,-1]], "b": [0.01,0.01,0.01,0.01]}"#,
    )
    .unwrap();
    let o = mpccert(dir.path(), &["certify", "--theta", "poly:small.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(
        stdout(&o).contains("1 regions (no splits)"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn region_budget_gives_partial_exit() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpccert(
        dir.path(),
        &["--config", "quadrotor", "--budget", "5", "certify"],
    );
    assert_eq!(code(&o), 2);
    assert!(stdout(&o).contains("region budget exceeded"));
}

#[test]
fn bad_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpccert(dir.path(), &["--config", "missing.json", "certify"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn uniform_bench_writes_one_difference_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpccert(dir.path(), &["bench", "--sampling", "uniform:1000"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        data_rows(&dir.path().join("out/differences.csv")).len(),
        1000
    );
    let cdf = data_rows(&dir.path().join("out/cdf_daqp.csv"));
    assert!(cdf.windows(2).all(|w| w[0][1] <= w[1][1]));
    assert_eq!(cdf.last().unwrap()[1], 1.0);
}

#[test]
fn solver_against_itself_has_zero_differences() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&mpccert(dir.path(), &["--out", "c", "certify"])), 0);
    let o = mpccert(
        dir.path(),
        &[
            "--out",
            "d",
            "bench",
            "--tau-a",
            "c/tau_daqp.csv",
            "--tau-b",
            "c/tau_daqp.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let diffs = data_rows(&dir.path().join("d/differences.csv"));
    assert!(!diffs.is_empty());
    assert!(diffs.iter().all(|r| r[1] == 0.0));
}

#[test]
fn certified_worst_case_bounds_uniform_samples() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--solver", "daqp", "--out"];
    assert_eq!(
        code(&mpccert(
            dir.path(),
            &[&args[..], &["c", "certify"]].concat()
        )),
        0
    );
    let o = mpccert(
        dir.path(),
        &["--out", "u", "bench", "--sampling", "uniform:2000"],
    );
    assert_eq!(code(&o), 0);
    let wcet = data_rows(&dir.path().join("c/wcet.csv"))[0][1];
    let uniform = data_rows(&dir.path().join("u/tau_daqp.csv"));
    let worst = uniform.iter().map(|r| r[1]).fold(0.0, f64::max);
    assert!(wcet >= worst, "certified {wcet} < sampled {worst}");
}

#[test]
fn sim_then_pca_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpccert(
        dir.path(),
        &[
            "--config",
            "quadrotor",
            "--solver",
            "daqp",
            "sim",
            "--trajectory",
            "hover",
            "--duration",
            "1",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = mpccert(
        dir.path(),
        &[
            "--config",
            "quadrotor",
            "sim",
            "--trajectory",
            "figure-eight",
            "--duration",
            "4",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = data_rows(&dir.path().join("out/summary_daqp.csv"));
    assert_eq!(summary[0][5], 0.0, "deadline violations");

    let o = mpccert(
        dir.path(),
        &["--config", "quadrotor", "pca", "out/states_daqp.csv"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("out/pca_box.json").exists());
    let s = stdout(&o);
    let (inside, total) = s.split_once(" of ").unwrap();
    assert!(total.starts_with(inside), "{s}");
}

#[test]
fn sim_rejects_models_without_dynamics() {
    let dir = tempfile::tempdir().unwrap();
    let o = mpccert(dir.path(), &["sim"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn reruns_differ_only_in_the_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str| {
        let o = mpccert(
            dir.path(),
            &[
                "--seed",
                "7",
                "--out",
                out,
                "bench",
                "--sampling",
                "uniform:300",
            ],
        );
        assert_eq!(code(&o), 0);
    };
    run("a");
    std::thread::sleep(std::time::Duration::from_millis(1100));
    run("b");
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(!names.is_empty());
    for name in names {
        let read = |d: &str| fs::read_to_string(dir.path().join(d).join(&name)).unwrap();
        let strip = |s: String| {
            s.lines()
                .filter(|l| !l.starts_with("# generated"))
                .collect::<Vec<_>>()
                .join("\n")
        };
        assert_eq!(strip(read("a")), strip(read("b")), "{name:?} differs");
    }
}
