//! End-to-end command tests: frozen CSV schemas, byte-identical reruns,
//! exit codes, and plot emission.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_carbonsim")
}

fn workspace_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json")
}

fn tmp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("carbonsim-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// Run the binary with a short simulation horizon so tests stay quick.
fn run(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(bin())
        .arg("--config")
        .arg(workspace_config())
        .arg("--set")
        .arg("sim.duration_s=8")
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()))
}

fn header_of(text: &str) -> String {
    text.lines()
        .find(|l| !l.starts_with('#'))
        .expect("has header")
        .to_string()
}

#[test]
fn profile_schema_and_determinism() {
    let out = tmp_dir("profile");
    let status = run(&["profile"], &out);
    assert!(status.status.success(), "{status:?}");
    let first = read(&out.join("profile_db.csv"));
    assert_eq!(
        header_of(&first),
        "config_id,application_id,qps,mean_ttft_s,mean_tpot_s,energy_per_token_j,carbon_per_token_g,slo_attainment"
    );
    assert!(first.starts_with("# seed=42 config_hash="));
    // 8 configurations x (6 + 6 + 4) application-qps cells.
    assert_eq!(first.lines().filter(|l| !l.starts_with('#')).count() - 1, 128);

    // Byte-identical rerun.
    let status = run(&["profile"], &out);
    assert!(status.status.success());
    let second = read(&out.join("profile_db.csv"));
    assert_eq!(first, second);
}

#[test]
fn schedule_schema_and_pipeline() {
    let out = tmp_dir("schedule");
    assert!(run(&["profile"], &out).status.success());
    let status = run(&["schedule"], &out);
    assert!(status.status.success(), "{status:?}");
    let text = read(&out.join("decisions.csv"));
    assert_eq!(
        header_of(&text),
        "application_id,qps,config_id,predicted_carbon_g,predicted_slo_att,via_fallback,savings_vs_default"
    );
    // Every (application, qps) pair from the plan appears exactly once.
    let rows = text.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, 16);

    let rerun = run(&["schedule"], &out);
    assert!(rerun.status.success());
    assert_eq!(text, read(&out.join("decisions.csv")));
}

#[test]
fn simulate_schemas_and_determinism() {
    let out = tmp_dir("simulate");
    let args = [
        "simulate",
        "--config-id",
        "dsd-a100-t4-1b",
        "--app",
        "sharegpt",
        "--qps",
        "2",
    ];
    assert!(run(&args, &out).status.success());
    let summary = read(&out.join("summary.csv"));
    let per_request = read(&out.join("per_request.csv"));
    let trace = read(&out.join("trace.csv"));
    assert_eq!(
        header_of(&summary),
        "config_id,qps,carbon_per_token_g,operational_g,embodied_g,energy_kwh,slo_attainment,peak_bandwidth_bps,bytes_transferred"
    );
    assert_eq!(header_of(&per_request), "request_id,ttft_s,tpot_mean_s,finish_s");
    assert_eq!(header_of(&trace), "id,arrival_s,input_tokens,output_tokens");

    assert!(run(&args, &out).status.success());
    assert_eq!(summary, read(&out.join("summary.csv")));
    assert_eq!(per_request, read(&out.join("per_request.csv")));
}

#[test]
fn sweep_writes_csv_and_svg() {
    let out = tmp_dir("sweep");
    let status = run(&["sweep", "--axis", "carbon_intensity"], &out);
    assert!(status.status.success(), "{status:?}");
    let csv = read(&out.join("sweep_carbon_intensity_sharegpt.csv"));
    assert_eq!(
        header_of(&csv),
        "carbon_intensity_g_kwh,config_id,carbon_per_token_g,default_carbon_per_token_g,savings_total,savings_operational_part,savings_embodied_part,via_fallback"
    );
    let svg = read(&out.join("sweep_carbon_intensity_sharegpt.svg"));
    assert!(svg.starts_with("<svg"));
}

#[test]
fn sweep_savings_split_is_additive() {
    // savings_total must equal the operational plus embodied parts, row by
    // row, in the emitted file.
    let out = tmp_dir("sweep-split");
    assert!(run(&["sweep", "--axis", "qps"], &out).status.success());
    let text = read(&out.join("sweep_qps_sharegpt.csv"));
    let mut checked = 0;
    for line in text.lines().skip(2) {
        let f: Vec<&str> = line.split(',').collect();
        let total: f64 = f[4].parse().unwrap();
        let op: f64 = f[5].parse().unwrap();
        let emb: f64 = f[6].parse().unwrap();
        if total.is_finite() {
            assert!((total - (op + emb)).abs() < 1e-12, "row {line}");
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn analyze_emits_sensitivity_tables() {
    let out = tmp_dir("analyze");
    let status = run(&["analyze"], &out);
    assert!(status.status.success(), "{status:?}");
    let ci = read(&out.join("analysis_ci.csv"));
    assert_eq!(header_of(&ci), "carbon_intensity_g_kwh,ratio,savings");
    let lt = read(&out.join("analysis_lifetime.csv"));
    assert_eq!(
        header_of(&lt),
        "new_gpu_lifetime_years,old_gpu_lifetime_years,savings_exact,approx_term"
    );
    // 6 x 6 lifetime grid.
    assert_eq!(lt.lines().filter(|l| !l.starts_with('#')).count() - 1, 36);
}

#[test]
fn invalid_config_exits_2() {
    let out = tmp_dir("badconfig");
    let output = Command::new(bin())
        .arg("--config")
        .arg(workspace_config())
        .arg("--set")
        .arg("default_grid=\"NOPE\"")
        .arg("--out")
        .arg(&out)
        .arg("profile")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("NOPE"), "{stderr}");
}

#[test]
fn infeasible_simulate_exits_3() {
    let out = tmp_dir("infeasible");
    // LongBench requests cannot fit the decode GPU under this variant.
    let output = Command::new(bin())
        .arg("--config")
        .arg(workspace_config())
        .arg("--set")
        .arg("sim.duration_s=8")
        .arg("--out")
        .arg(&out)
        .args(["simulate", "--config-id", "dpd-a100-t4", "--app", "longbench", "--qps", "0.5"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
    // The summary still lands, flagged infeasible.
    let summary = read(&out.join("summary.csv"));
    assert!(summary.contains("inf"));
}

#[test]
fn output_dir_env_var_is_honored() {
    let out = tmp_dir("envvar");
    let output = Command::new(bin())
        .arg("--config")
        .arg(workspace_config())
        .arg("--set")
        .arg("sim.duration_s=8")
        .env("CARBONSIM_OUTPUT_DIR", &out)
        .args(["simulate", "--config-id", "standalone-a100", "--app", "sharegpt", "--qps", "1"])
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(out.join("summary.csv").exists());
}

#[test]
fn cli_overrides_change_results() {
    let out_a = tmp_dir("override-a");
    let out_b = tmp_dir("override-b");
    assert!(run(
        &["simulate", "--config-id", "standalone-a100", "--app", "sharegpt", "--qps", "1"],
        &out_a
    )
    .status
    .success());
    let output = Command::new(bin())
        .arg("--config")
        .arg(workspace_config())
        .arg("--set")
        .arg("sim.duration_s=8")
        .arg("--set")
        .arg("seed=43")
        .arg("--out")
        .arg(&out_b)
        .args(["simulate", "--config-id", "standalone-a100", "--app", "sharegpt", "--qps", "1"])
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_ne!(read(&out_a.join("summary.csv")), read(&out_b.join("summary.csv")));
}
