use std::io::Write;
use std::os::unix::fs::PermissionsExt;
use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn sepscan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sepscan"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad JSON ({e}); stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn script(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    let mut file = std::fs::File::create(&path).unwrap();
    writeln!(file, "#!/bin/sh\n{body}").unwrap();
    drop(file);
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path
}

#[test]
fn screen_exit_codes_follow_decision() {
    let out = sepscan(&["screen", "-f", "builtin:sphere", "-s", "4", "-n", "256"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(json(&out)["payload"]["decision"], "separable");

    let out = sepscan(&["screen", "-f", "builtin:bilinear", "-n", "256"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["payload"]["decision"], "non-separable");
}

#[test]
fn report_envelope() {
    let out = sepscan(&[
        "index",
        "-f",
        "builtin:paper5",
        "--partition",
        "{1}|{2,4}|{3,5}",
        "-n",
        "128",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["tool"], "sepscan");
    assert_eq!(report["config"]["dim"], 5);
    assert_eq!(report["config"]["partition"], "{1}|{2,4}|{3,5}");
    assert_eq!(report["eval_count"], 128 * 5);
    let text = String::from_utf8(out.stdout).unwrap();
    let last_key = text.lines().rev().nth(1).unwrap();
    assert!(
        last_key.trim_start().starts_with("\"wall_time_ms\""),
        "{last_key}"
    );
}

#[test]
fn usage_errors_exit_2() {
    let out = sepscan(&["screen", "-f", "expr:x1*x2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("-s/--dim"));

    let out = sepscan(&[
        "index",
        "-f",
        "builtin:sphere",
        "-s",
        "3",
        "--partition",
        "{1}|{1,2}",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = sepscan(&["screen", "-f", "expr:x1 + x4", "-s", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("x4"), "{}", stderr(&out));

    let out = sepscan(&["screen", "-f", "builtin:nosuch", "-s", "3"]);
    assert_eq!(out.status.code(), Some(2));

    let out = sepscan(&["screen", "-f", "expr:log(x1 - 1)", "-s", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_discovers_paper5_blocks() {
    let out = sepscan(&["analyze", "-f", "builtin:paper5", "-n", "1024"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    let payload = &report["payload"];
    assert_eq!(payload["partition"], "{1}|{2,4}|{3,5}");
    assert_eq!(payload["candidates_tested"], 6);
    assert_eq!(payload["blocks"], serde_json::json!([[1], [2, 4], [3, 5]]));
    assert_eq!(payload["trace"].as_array().unwrap().len(), 6);
    assert_eq!(payload["verification"]["decision"], "separable");
}

#[test]
fn analyze_counts_candidates() {
    let out = sepscan(&["analyze", "-f", "builtin:sphere", "-s", "10", "-n", "256"]);
    assert_eq!(json(&out)["payload"]["candidates_tested"], 9);

    let out = sepscan(&["analyze", "-f", "builtin:product", "-s", "6", "-n", "256"]);
    let report = json(&out);
    assert_eq!(report["payload"]["candidates_tested"], 31);
    assert_eq!(report["payload"]["partition"], "{1,2,3,4,5,6}");
}

#[test]
fn analyze_truncation_exits_3() {
    let out = sepscan(&[
        "analyze",
        "-f",
        "builtin:product",
        "-s",
        "6",
        "-n",
        "128",
        "--budget-candidates",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let report = json(&out);
    assert_eq!(report["payload"]["truncated"], true);
    assert_eq!(report["payload"]["candidates_tested"], 5);
}

#[test]
fn analyze_refines_prior() {
    let out = sepscan(&[
        "analyze",
        "-f",
        "builtin:paper5",
        "-n",
        "512",
        "--partition",
        "{1,2,4}|{3,5}",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["payload"]["partition"], "{1}|{2,4}|{3,5}");
}

#[test]
fn sobol_reports_each_subset() {
    let out = sepscan(&[
        "sobol",
        "-f",
        "builtin:bilinear",
        "-n",
        "20000",
        "--subset",
        "{1}",
        "--subset",
        "{1,2}",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    let rows = report["payload"]["indices"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["subset"], serde_json::json!([1]));
    // tau_lower({1}) = 1/48, tau_upper({1}) = 1/36
    let lower = rows[0]["lower"].as_f64().unwrap();
    let upper = rows[0]["upper"].as_f64().unwrap();
    assert!((lower - 1.0 / 48.0).abs() < 4.0 * rows[0]["lower_stderr"].as_f64().unwrap());
    assert!((upper - 1.0 / 36.0).abs() < 4.0 * rows[0]["upper_stderr"].as_f64().unwrap());

    let out = sepscan(&["sobol", "-f", "builtin:bilinear", "--subset", "{3}"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_bilinear_constants() {
    let out = sepscan(&["oracle", "-f", "builtin:bilinear", "--subset", "{1}"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let p = &json(&out)["payload"];
    let close = |v: &Value, target: f64| (v.as_f64().unwrap() - target).abs() < 1e-14;
    assert!(close(&p["gamma2"], 1.0 / 144.0));
    assert!(close(&p["sigma2"], 7.0 / 144.0));
    assert!(close(&p["mean"], 0.25));
    assert!(close(&p["indices"][0]["lower"], 1.0 / 48.0));
    assert!(close(&p["indices"][0]["upper"], 1.0 / 36.0));
    assert_eq!(p["grid_evaluations"], 32 * 32);
    assert!(p["residual_max"].as_f64().unwrap() > 1e-3);
}

#[test]
fn oracle_refuses_large_dimension() {
    let out = sepscan(&["oracle", "-f", "builtin:sphere", "-s", "12"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("s <= 6"), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
}

#[test]
fn alternative_formats() {
    let out = sepscan(&[
        "analyze",
        "-f",
        "builtin:paper5",
        "-n",
        "256",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "step,candidate,gamma2,residual_max,stderr,decision"
    );
    assert_eq!(lines.len(), 7);
    assert!(lines[6].starts_with("6,\"{2,4}\","));

    let out = sepscan(&[
        "screen",
        "-f",
        "builtin:sphere",
        "-s",
        "3",
        "--format",
        "text",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("decision      separable"), "{text}");
}

#[test]
fn seed_changes_samples_not_decisions() {
    let a = json(&sepscan(&[
        "index",
        "-f",
        "builtin:bilinear",
        "--partition",
        "{1}|{2}",
        "--seed",
        "1",
    ]));
    let b = json(&sepscan(&[
        "index",
        "-f",
        "builtin:bilinear",
        "--partition",
        "{1}|{2}",
        "--seed",
        "2",
    ]));
    assert_ne!(a["payload"]["gamma2_hat"], b["payload"]["gamma2_hat"]);
    assert_eq!(a["payload"]["decision"], b["payload"]["decision"]);
}

#[test]
fn domain_is_applied() {
    // on [0,2] the first coordinate of x1*x2 doubles the function
    let unit = json(&sepscan(&["oracle", "-f", "builtin:bilinear"]));
    let wide = json(&sepscan(&[
        "oracle",
        "-f",
        "builtin:bilinear",
        "--domain",
        "0:2,0:1",
    ]));
    let ratio =
        wide["payload"]["sigma2"].as_f64().unwrap() / unit["payload"]["sigma2"].as_f64().unwrap();
    assert!((ratio - 4.0).abs() < 1e-12, "{ratio}");
}

#[test]
fn external_program_matches_builtin() {
    let dir = TempDir::new().unwrap();
    let product = script(
        &dir,
        "product.sh",
        r#"exec awk '{ p = 1; for (i = 1; i <= NF; i++) p *= $i; printf "%.17g\n", p }'"#,
    );
    let selector = format!("exec:{}", product.display());
    let ext = sepscan(&[
        "index",
        "-f",
        &selector,
        "-s",
        "3",
        "--partition",
        "{1}|{2,3}",
        "-n",
        "300",
    ]);
    assert_eq!(ext.status.code(), Some(1), "{}", stderr(&ext));
    let builtin = sepscan(&[
        "index",
        "-f",
        "builtin:product",
        "-s",
        "3",
        "--partition",
        "{1}|{2,3}",
        "-n",
        "300",
    ]);
    let (e, b) = (json(&ext), json(&builtin));
    let (ge, gb) = (
        e["payload"]["gamma2_hat"].as_f64().unwrap(),
        b["payload"]["gamma2_hat"].as_f64().unwrap(),
    );
    assert!((ge - gb).abs() <= 1e-12 * gb.abs(), "{ge} vs {gb}");
    assert_eq!(e["eval_count"], b["eval_count"]);
}

#[test]
fn external_replies_keep_order() {
    let dir = TempDir::new().unwrap();
    let first = script(&dir, "first.sh", "exec awk '{ print $1 }'");
    let selector = format!("exec:{}", first.display());
    let ext = json(&sepscan(&[
        "sobol", "-f", &selector, "-s", "2", "--subset", "{1}", "-n", "200",
    ]));
    let expr = json(&sepscan(&[
        "sobol", "-f", "expr:x1", "-s", "2", "--subset", "{1}", "-n", "200",
    ]));
    assert_eq!(ext["payload"], expr["payload"]);
}

#[test]
fn external_failures_exit_2() {
    let dir = TempDir::new().unwrap();
    let nan = script(&dir, "nan.sh", "exec awk '{ print \"nan\" }'");
    let out = sepscan(&[
        "screen",
        "-f",
        &format!("exec:{}", nan.display()),
        "-s",
        "2",
        "-n",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(
        stderr(&out).to_lowercase().contains("finite"),
        "{}",
        stderr(&out)
    );

    let short = script(&dir, "short.sh", "head -n 1 >/dev/null; echo 1");
    let out = sepscan(&[
        "screen",
        "-f",
        &format!("exec:{}", short.display()),
        "-s",
        "2",
        "-n",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let slow = script(&dir, "slow.sh", "sleep 2; awk '{ print 0 }'");
    let out = sepscan(&[
        "screen",
        "-f",
        &format!("exec:{}", slow.display()),
        "-s",
        "2",
        "-n",
        "10",
        "--exec-timeout",
        "0.3",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn threads_do_not_change_output() {
    let run = |threads: &str| {
        let mut report = json(&sepscan(&[
            "screen",
            "-f",
            "builtin:chain",
            "-s",
            "5",
            "-n",
            "3000",
            "--threads",
            threads,
        ]));
        report.as_object_mut().unwrap().remove("wall_time_ms");
        report
    };
    assert_eq!(run("1"), run("8"));
}
