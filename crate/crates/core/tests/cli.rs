use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platform-trial"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn simulate(dir: &Path) {
    let out = run(&[
        "simulate", "--preset", "section6", "--scale", "0.1", "--separate", "--seed", "3",
        "--out-dir", dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn data_args(dir: &Path) -> Vec<String> {
    ["--data", "platform.csv", "--design", "design.json", "--coarsening", "coarsening.json"]
        .chunks(2)
        .flat_map(|c| [c[0].to_string(), dir.join(c[1]).to_string_lossy().into_owned()])
        .collect()
}

fn run_with(prefix: &[&str], data: &[String], rest: &[&str]) -> Output {
    let mut args: Vec<&str> = prefix.to_vec();
    args.extend(data.iter().map(String::as_str));
    args.extend_from_slice(rest);
    run(&args)
}

#[test]
fn missing_time_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    simulate(dir.path());
    let out = run_with(&["estimate"], &data_args(dir.path()), &["--v", "all"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--t"));
}

#[test]
fn unknown_flag_and_unknown_study_are_usage_errors() {
    assert_eq!(run(&["repro", "table3", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["repro", "table4", "--reps", "1"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--preset", "nope", "--out-dir", "x"]).status.code(), Some(2));
}

#[test]
fn unreadable_data_is_an_input_error() {
    let out = run(&[
        "estimate", "--data", "/nonexistent.csv", "--design", "/nonexistent.json", "--coarsening",
        "/nonexistent.json", "--t", "1", "--v", "all",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn no_control_events_is_a_computation_error() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    fs::write(
        p.join("design.json"),
        r#"{"k": 1, "q": 1, "tau": 10, "window_sets": {"1": [1]}}"#,
    )
    .unwrap();
    fs::write(p.join("coarsening.json"), r#"{"0": "all"}"#).unwrap();
    fs::write(
        p.join("platform.csv"),
        "id,x,delta,arm,window,z\n1,5,0,0,1,0\n2,6,0,0,1,0\n3,2,1,1,1,0\n4,7,0,1,1,0\n",
    )
    .unwrap();
    let out = run_with(&["estimate"], &data_args(p), &["--t", "4", "--v", "all"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("control"));
}

#[test]
fn estimate_contrast_and_tests_on_simulated_files() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    simulate(p);
    for a in 1..=10 {
        assert!(p.join(format!("separate_{a}.csv")).exists());
    }
    let data = data_args(p);

    let out = run_with(&["estimate"], &data, &["--t", "6", "--v", "all", "--arms", "7,9"]);
    assert!(out.status.success());
    let est: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(est["arms"], serde_json::json!([7, 9]));
    let s = &est["sigma_gamma"];
    assert_eq!(s[0][1], s[1][0]);

    let out = run_with(
        &["contrast"],
        &data,
        &["--t", "6", "--v", "all", "--pair", "7,9", "--contrast", "log-ratio", "--format", "csv"],
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("theta,sigma2,n,lower,upper"));

    // decision does not affect the exit code
    for method in ["intersection", "lrt"] {
        for delta in ["0.05", "5"] {
            let out = run_with(
                &["ni-test"],
                &data,
                &["--t", "6", "--v", "all", "--ref", "7", "--delta", delta, "--epsilon", "0.2", "--method", method],
            );
            assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
            let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
            assert_eq!(v["method"], method);
        }
    }

    let sep7 = format!("7={}", p.join("separate_7.csv").display());
    let sep9 = format!("9={}", p.join("separate_9.csv").display());
    let design = p.join("design.json").to_string_lossy().into_owned();
    let coarsening = p.join("coarsening.json").to_string_lossy().into_owned();
    let out = run(&[
        "contrast", "--separate-data", &sep7, "--separate-data", &sep9, "--design", &design,
        "--coarsening", &coarsening, "--t", "6", "--v", "all", "--pair", "7,9",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn resample_writes_dataset_and_design() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    let out = run(&[
        "simulate", "--preset", "appendixF", "--scale", "0.5", "--out-dir", p.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let csv = p.join("resampled.csv");
    let design = p.join("resampled.json");
    let out = run_with(
        &["resample"],
        &data_args(p),
        &[
            "--typing", "L,H,B_all,B_sub", "--share", "0.4", "--out", csv.to_str().unwrap(),
            "--design-out", design.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let share = report["achieved_share"].as_f64().unwrap();
    let total = report["total_controls"].as_f64().unwrap();
    assert!((share - 0.4).abs() <= 1.0 / total + 1e-12);
    assert!(csv.exists() && design.exists());

    let out = run_with(
        &["resample"],
        &data_args(p),
        &[
            "--typing", "L,H,B_all,B_sub", "--share", "0.1", "--out", csv.to_str().unwrap(),
            "--design-out", design.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seeded_runs_are_reproducible_across_thread_counts() {
    let args = |threads: &str| {
        run(&[
            "mc", "--preset", "section6", "--scale", "0.1", "--reps", "6", "--t", "6", "--v", "all",
            "--pairs", "7:9", "--contrast", "log-ratio", "--separate", "--seed", "42", "--threads", threads,
        ])
    };
    let a = args("1");
    let b = args("3");
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["replications"], 6);
    assert_eq!(v["master_seed"], 42);

    let dir = TempDir::new().unwrap();
    let d1 = dir.path().join("a");
    let d2 = dir.path().join("b");
    for d in [&d1, &d2] {
        let out = run(&[
            "simulate", "--preset", "table3", "--scale", "0.1", "--seed", "9", "--out-dir", d.to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    assert_eq!(fs::read(d1.join("platform.csv")).unwrap(), fs::read(d2.join("platform.csv")).unwrap());
}

#[test]
fn repro_writes_csv_table() {
    let out = run(&["repro", "table3", "--reps", "20", "--scale", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("design,total,controls,interventions,power_rr1"));
    assert_eq!(text.lines().count(), 4);
}
