//! End-to-end checks of the binary: flags, exit codes, file formats.

use std::process::{Command, Output};

fn codedmr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codedmr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

#[test]
fn verify_example_passes() {
    let out = codedmr(&["verify-example"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("[4, 36, 36]"));
    assert!(text.contains("3.8"));
    assert!(text.contains("4.2"));
    assert!(text.contains("11.7"));
    assert!(text.contains("PASS"));
}

#[test]
fn simulate_worked_example() {
    let out = codedmr(&[
        "simulate", "--K", "6", "--q", "4", "--mu", "1/2", "--m", "20", "--N", "12", "--l", "4",
        "--r2", "3", "--fixed-Q", "1,2,3,4",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["message_count"], 76);
    assert_eq!(report["verified"], true);
    assert_eq!(report["counted_load"]["num"], "19");
    assert_eq!(report["counted_load"]["den"], "5");
    assert_eq!(report["Q"], serde_json::json!([1, 2, 3, 4]));
}

#[test]
fn simulate_baseline_example() {
    let out = codedmr(&[
        "simulate", "--K", "6", "--q", "4", "--mu", "1/2", "--m", "20", "--N", "12", "--l", "6",
        "--r2", "2", "--fixed-Q", "1,2,3,4",
    ]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["message_count"], 84);
    assert_eq!(report["counted_load"]["decimal"], "4.2");
}

#[test]
fn simulate_rejects_infeasible_rates() {
    let out = codedmr(&[
        "simulate", "--K", "6", "--q", "4", "--mu", "1/2", "--m", "20", "--N", "12", "--l", "6",
        "--r2", "3",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("storage"), "{}", stderr(&out));
}

#[test]
fn simulate_reports_divisibility_fix() {
    let out = codedmr(&[
        "simulate", "--K", "6", "--q", "4", "--mu", "1/2", "--m", "10", "--N", "12", "--l", "4",
        "--r2", "3",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("scale m by 2"), "{}", stderr(&out));
}

#[test]
fn invalid_arguments_exit_2() {
    let out = codedmr(&[
        "simulate", "--K", "6", "--q", "9", "--mu", "1/2", "--m", "20", "--N", "12",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = codedmr(&["tradeoff", "--K", "6", "--mu", "nonsense", "--N", "12"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn transcript_replays_bitwise() {
    let dir = std::env::temp_dir();
    let t1 = dir.join("codedmr_cli_test_t1.jsonl");
    let t2 = dir.join("codedmr_cli_test_t2.jsonl");
    for t in [&t1, &t2] {
        let out = codedmr(&[
            "simulate", "--K", "6", "--q", "4", "--mu", "1/2", "--m", "20", "--N", "12", "--seed",
            "9", "--transcript", t.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let a = std::fs::read(&t1).unwrap();
    let b = std::fs::read(&t2).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);
    let first: serde_json::Value =
        serde_json::from_str(String::from_utf8(a).unwrap().lines().next().unwrap()).unwrap();
    assert!(first["payload"].is_u64());
    assert!(first["sender"].is_u64());
    let _ = std::fs::remove_file(t1);
    let _ = std::fs::remove_file(t2);
}

#[test]
fn tradeoff_curve_shape_and_determinism() {
    let args = ["tradeoff", "--K", "12", "--N", "840", "--mu", "1/2"];
    let out = codedmr(&args);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "q,D,L_opt,L_base,l_opt,r2_opt");
    // q sweeps 2..=12, one row each.
    assert_eq!(text.lines().count(), 12);
    let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let last: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    assert_eq!(first[0], "2");
    assert_eq!(last[0], "12");
    // Endpoints coincide, and the optimized load never exceeds the baseline.
    assert_eq!(first[2], first[3]);
    assert_eq!(last[2], last[3]);
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (opt, base): (f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap());
        assert!(opt <= base, "{line}");
    }
    assert_eq!(stdout(&codedmr(&args)), text);

    let out = codedmr(&[
        "tradeoff", "--K", "12", "--N", "840", "--mu", "1/2", "--format", "json",
    ]);
    let rows: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 11);
    assert!(rows[0]["L_opt"]["num"].is_string());
}

#[test]
fn feasible_table_flags_the_optimum() {
    let out = codedmr(&["feasible", "--K", "6", "--q", "4", "--mu", "1/2", "--N", "12"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "l,r2,r1,load,optimal");
    assert_eq!(lines.next().unwrap(), "4,3,1,3.8,true");
    // Loads ascend down the table.
    let loads: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert!(loads.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn latency_table_is_monotone_and_converges() {
    let out = codedmr(&["latency", "--K", "6", "--mu", "1/2", "--N", "12"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.lines().next().unwrap().starts_with("q,D"));
    assert!(text.contains("4,11.700000"));
    let ds: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(ds.windows(2).all(|w| w[0] < w[1]));

    let out = codedmr(&[
        "latency", "--K", "6", "--mu", "1/2", "--N", "12", "--trials", "100000", "--seed", "7",
    ]);
    let text = stdout(&out);
    for line in text.lines().skip(1) {
        let rel: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(rel < 0.02, "{line}");
    }
}
