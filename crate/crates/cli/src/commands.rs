//! Subcommand implementations. Every command writes CSV first (atomically);
//! plots are derived from the CSV text afterwards and never fail the run.

use std::path::{Path, PathBuf};

use carbonsim::carbon::{total_carbon, GpuSpec, LifetimeAssumption};
use carbonsim::config::ExperimentPlan;
use carbonsim::csvio::{self, CsvMeta, CsvWriter};
use carbonsim::error::{Error, Result};
use carbonsim::profiler::{
    build_profile_database, matrices_from_records, profile_cell_detailed, profile_csv,
    read_profile_csv, CellDetail, ProfileSettings,
};
use carbonsim::scheduler::{
    complete_matrices, select_config, PerfMatrices, Priority, SchedulingRequest, WorkloadKey,
};
use carbonsim::sim::{simulate_with, ServingConfig, SimOptions};
use carbonsim::workload::{generate_trace_with, SizePercentile};
use carbonsim::{analysis, slo_attainment};

use crate::plot;

/// Command outcome distinguishing "worked" from "worked but everything was
/// infeasible", which maps to exit code 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    InfeasibleOnly,
}

fn meta(plan: &ExperimentPlan) -> CsvMeta {
    CsvMeta {
        seed: plan.seed,
        config_hash: plan.config_hash,
        tool_version: crate::TOOL_VERSION,
    }
}

fn settings(plan: &ExperimentPlan) -> ProfileSettings {
    ProfileSettings {
        grid: plan.default_grid.clone(),
        lifetimes: plan.lifetimes.clone(),
        link: plan.link,
        percentile: plan.percentile,
        duration_s: plan.duration_s,
        seed: plan.seed,
    }
}

fn parse_priority(s: &str) -> Result<Priority> {
    match s.to_ascii_lowercase().as_str() {
        "slo" => Ok(Priority::Slo),
        "default" => Ok(Priority::Default),
        other => Err(Error::Config(format!(
            "priority must be 'slo' or 'default', got {other:?}"
        ))),
    }
}

// ---------------------------------------------------------------------------
// profile
// ---------------------------------------------------------------------------

pub fn cmd_profile(plan: &ExperimentPlan, out_dir: &Path) -> Result<Outcome> {
    let records = build_profile_database(&plan.configs, &plan.applications, &settings(plan))?;
    let text = profile_csv(&records, &meta(plan));
    let path = out_dir.join("profile_db.csv");
    csvio::write_atomic(&path, &text)?;
    println!(
        "plan {}: wrote {} ({} cells)",
        plan.name,
        path.display(),
        records.len()
    );
    if records.iter().all(|r| r.is_infeasible()) {
        return Ok(Outcome::InfeasibleOnly);
    }
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------------------
// schedule
// ---------------------------------------------------------------------------

pub const DECISIONS_HEADER: [&str; 7] = [
    "application_id",
    "qps",
    "config_id",
    "predicted_carbon_g",
    "predicted_slo_att",
    "via_fallback",
    "savings_vs_default",
];

pub fn cmd_schedule(
    plan: &ExperimentPlan,
    out_dir: &Path,
    database: Option<&Path>,
    slo_target: Option<f64>,
    priority: Option<&str>,
) -> Result<Outcome> {
    let db_path: PathBuf = database
        .map(|p| p.to_path_buf())
        .unwrap_or_else(|| out_dir.join("profile_db.csv"));
    let records = read_profile_csv(&db_path)?;
    let m = matrices_from_records(&records)?;
    let completed = complete_matrices(&m, &plan.completion)?;

    let slo_target = slo_target.unwrap_or(plan.slo_target);
    let priority = match priority {
        Some(s) => parse_priority(s)?,
        None => plan.priority,
    };
    let default_j = completed.col_index(&plan.default_config)?;

    let mut w = CsvWriter::new(&meta(plan), &DECISIONS_HEADER);
    let mut all_fallback = true;
    for (i, workload) in completed.rows.iter().enumerate() {
        let req = SchedulingRequest {
            workload: workload.clone(),
            slo_target,
            priority,
        };
        let d = select_config(&completed, &req, &plan.default_config)?;
        if !d.via_fallback {
            all_fallback = false;
        }
        let default_carbon = completed.carbon[i][default_j];
        let savings = if default_carbon.is_finite() && default_carbon > 0.0 {
            1.0 - d.predicted_carbon_g / default_carbon
        } else {
            f64::NAN
        };
        w.row(&[
            workload.application_id.clone(),
            csvio::fmt_f64(workload.qps),
            d.config_id.clone(),
            csvio::fmt_f64(d.predicted_carbon_g),
            csvio::fmt_f64(d.predicted_slo_att),
            d.via_fallback.to_string(),
            csvio::fmt_f64(savings),
        ]);
    }
    let path = out_dir.join("decisions.csv");
    w.write_to(&path)?;
    println!("wrote {}", path.display());
    if all_fallback {
        return Ok(Outcome::InfeasibleOnly);
    }
    Ok(Outcome::Ok)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

pub const PER_REQUEST_HEADER: [&str; 4] = ["request_id", "ttft_s", "tpot_mean_s", "finish_s"];
pub const SUMMARY_HEADER: [&str; 9] = [
    "config_id",
    "qps",
    "carbon_per_token_g",
    "operational_g",
    "embodied_g",
    "energy_kwh",
    "slo_attainment",
    "peak_bandwidth_bps",
    "bytes_transferred",
];

pub fn cmd_simulate(
    plan: &ExperimentPlan,
    out_dir: &Path,
    config_id: &str,
    app_name: &str,
    qps: f64,
    percentile: Option<&str>,
) -> Result<Outcome> {
    let config = plan.config(config_id)?;
    let (app, _) = plan.application(app_name)?;
    let percentile = match percentile {
        Some(s) => SizePercentile::parse(s)?,
        None => plan.percentile,
    };
    let trace = generate_trace_with(
        app,
        percentile,
        qps,
        plan.duration_s,
        plan.seed,
        plan.arrival_process,
    )?;
    let options = SimOptions {
        disable_overlap: plan.disable_overlap,
    };

    let mut requests_w = CsvWriter::new(&meta(plan), &PER_REQUEST_HEADER);
    let mut summary_w = CsvWriter::new(&meta(plan), &SUMMARY_HEADER);

    let outcome = match simulate_with(config, &trace, &plan.link, plan.seed, &options) {
        Ok(report) => {
            for r in &report.per_request {
                requests_w.row(&[
                    r.id.to_string(),
                    csvio::fmt_f64(r.ttft_s),
                    csvio::fmt_f64(r.tpot_mean_s),
                    csvio::fmt_f64(r.finish_s),
                ]);
            }
            let mut gpus = vec![&config.new_gpu];
            if let Some(old) = &config.old_gpu {
                gpus.push(old);
            }
            let busy: Vec<f64> = report.per_gpu.iter().map(|g| g.busy_time_s).collect();
            let energy: Vec<f64> = report.per_gpu.iter().map(|g| g.energy_kwh).collect();
            let lifetimes: Vec<LifetimeAssumption> =
                gpus.iter().map(|g| plan.lifetime_for(&g.name)).collect();
            let refs: Vec<&LifetimeAssumption> = lifetimes.iter().collect();
            let breakdown = total_carbon(
                &busy,
                &energy,
                &gpus,
                &refs,
                &plan.default_grid,
                report.tokens_out,
            )?;
            summary_w.row(&[
                config.id.clone(),
                csvio::fmt_f64(qps),
                csvio::fmt_f64(breakdown.per_token_g),
                csvio::fmt_f64(breakdown.operational_g),
                csvio::fmt_f64(breakdown.embodied_g),
                csvio::fmt_f64(energy.iter().sum::<f64>()),
                csvio::fmt_f64(slo_attainment(&report, app)?),
                csvio::fmt_f64(report.peak_bandwidth_demand_bps),
                report.bytes_transferred.to_string(),
            ]);
            Outcome::Ok
        }
        Err(Error::Capacity(msg)) => {
            eprintln!("infeasible: {msg}");
            summary_w.row(&[
                config.id.clone(),
                csvio::fmt_f64(qps),
                csvio::fmt_f64(f64::INFINITY),
                csvio::fmt_f64(f64::INFINITY),
                csvio::fmt_f64(f64::INFINITY),
                csvio::fmt_f64(0.0),
                csvio::fmt_f64(0.0),
                csvio::fmt_f64(0.0),
                "0".to_string(),
            ]);
            Outcome::InfeasibleOnly
        }
        Err(e) => return Err(e),
    };

    let trace_path = out_dir.join("trace.csv");
    csvio::write_atomic(&trace_path, &trace.to_csv(&meta(plan)))?;
    let req_path = out_dir.join("per_request.csv");
    let sum_path = out_dir.join("summary.csv");
    requests_w.write_to(&req_path)?;
    summary_w.write_to(&sum_path)?;
    println!(
        "wrote {}, {} and {}",
        trace_path.display(),
        req_path.display(),
        sum_path.display()
    );
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

/// One scheduling point assembled from detailed cells: the chosen config and
/// its savings split against the default column.
struct SweepPoint {
    config_id: String,
    carbon_per_token_g: f64,
    default_carbon_per_token_g: f64,
    savings_total: f64,
    savings_operational_part: f64,
    savings_embodied_part: f64,
    slo_attainment: f64,
    via_fallback: bool,
}

/// Per-token operational/embodied split of one cell.
#[derive(Clone, Copy)]
struct PerToken {
    operational_g: f64,
    embodied_g: f64,
    total_g: f64,
}

impl PerToken {
    fn from_parts(operational_g: f64, embodied_g: f64, tokens: u64) -> PerToken {
        if tokens == 0 {
            return PerToken {
                operational_g: f64::INFINITY,
                embodied_g: f64::INFINITY,
                total_g: f64::INFINITY,
            };
        }
        let t = tokens as f64;
        PerToken {
            operational_g: operational_g / t,
            embodied_g: embodied_g / t,
            total_g: (operational_g + embodied_g) / t,
        }
    }
}

/// Run one (app, qps) cell for every config on a shared trace seed, pick the
/// minimum-carbon feasible config, and split its savings against the default.
fn schedule_point(
    plan: &ExperimentPlan,
    cells: &[(ServingConfig, CellDetail, PerToken)],
    app_name: &str,
    qps: f64,
) -> Result<SweepPoint> {
    let rows = vec![WorkloadKey {
        application_id: app_name.to_string(),
        qps,
    }];
    let cols: Vec<String> = cells.iter().map(|(c, _, _)| c.id.clone()).collect();
    let carbon = vec![cells.iter().map(|(_, _, pt)| pt.total_g).collect::<Vec<f64>>()];
    let slo = vec![cells
        .iter()
        .map(|(_, d, _)| d.record.slo_attainment)
        .collect::<Vec<f64>>()];
    let m = PerfMatrices {
        rows: rows.clone(),
        cols,
        carbon,
        slo_att: slo,
        observed: vec![vec![true; cells.len()]],
    };
    let req = SchedulingRequest {
        workload: rows[0].clone(),
        slo_target: plan.slo_target,
        priority: plan.priority,
    };
    let decision = select_config(&m, &req, &plan.default_config)?;
    let chosen = cells
        .iter()
        .find(|(c, _, _)| c.id == decision.config_id)
        .expect("decision over known columns");
    let default = cells
        .iter()
        .find(|(c, _, _)| c.id == plan.default_config)
        .ok_or_else(|| Error::Lookup(format!("default config {} not in sweep", plan.default_config)))?;

    let d = default.2;
    let c = chosen.2;
    let (savings_total, op_part, emb_part) = if d.total_g.is_finite() && d.total_g > 0.0 {
        (
            1.0 - c.total_g / d.total_g,
            (d.operational_g - c.operational_g) / d.total_g,
            (d.embodied_g - c.embodied_g) / d.total_g,
        )
    } else {
        (f64::NAN, f64::NAN, f64::NAN)
    };
    Ok(SweepPoint {
        config_id: decision.config_id,
        carbon_per_token_g: c.total_g,
        default_carbon_per_token_g: d.total_g,
        savings_total,
        savings_operational_part: op_part,
        savings_embodied_part: emb_part,
        slo_attainment: chosen.1.record.slo_attainment,
        via_fallback: decision.via_fallback,
    })
}

/// Simulate every config at one (app, qps) cell with a shared trace seed.
fn run_cells(
    plan: &ExperimentPlan,
    settings: &ProfileSettings,
    app_name: &str,
    qps: f64,
    seed_label: &str,
) -> Result<Vec<(ServingConfig, CellDetail, PerToken)>> {
    let (app, _) = plan.application(app_name)?;
    let cell_seed =
        carbonsim::units::derive_seed(plan.seed, csvio::fnv1a_hash(seed_label));
    let mut cells = Vec::new();
    for config in &plan.configs {
        let detail = profile_cell_detailed(config, app, qps, settings, cell_seed)?;
        let pt = PerToken::from_parts(detail.operational_g, detail.embodied_g, detail.tokens_out);
        cells.push((config.clone(), detail, pt));
    }
    Ok(cells)
}

fn config_gpus(config: &ServingConfig) -> Vec<&GpuSpec> {
    let mut gpus = vec![&config.new_gpu];
    if let Some(old) = &config.old_gpu {
        gpus.push(old);
    }
    gpus
}

/// Re-price one cell's carbon under a grid and per-role lifetime overrides.
fn reprice(
    plan: &ExperimentPlan,
    config: &ServingConfig,
    detail: &CellDetail,
    grid: &carbonsim::carbon::GridProfile,
    old_lifetime_years: Option<f64>,
    new_lifetime_years: Option<f64>,
) -> Result<PerToken> {
    if detail.is_infeasible() {
        return Ok(PerToken {
            operational_g: f64::INFINITY,
            embodied_g: f64::INFINITY,
            total_g: f64::INFINITY,
        });
    }
    let gpus = config_gpus(config);
    let lifetimes: Vec<LifetimeAssumption> = gpus
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let is_old = i == 1;
            let override_years = if is_old { old_lifetime_years } else { new_lifetime_years };
            match override_years {
                Some(y) => LifetimeAssumption {
                    gpu: g.name.clone(),
                    lifetime_s: carbonsim::units::years_to_seconds(y),
                    elapsed_service_s: 0.0,
                },
                None => plan.lifetime_for(&g.name),
            }
        })
        .collect();
    let refs: Vec<&LifetimeAssumption> = lifetimes.iter().collect();
    let b = detail.carbon_under(&gpus, &refs, grid)?;
    Ok(PerToken::from_parts(
        b.operational_g,
        b.embodied_g,
        detail.tokens_out,
    ))
}

pub fn cmd_sweep(
    plan: &ExperimentPlan,
    out_dir: &Path,
    axis: &str,
    app_flag: Option<&str>,
) -> Result<Outcome> {
    let app_name = app_flag.unwrap_or(&plan.sweep_application).to_string();
    match axis {
        "qps" => sweep_qps(plan, out_dir, &app_name),
        "carbon_intensity" => sweep_carbon_intensity(plan, out_dir, &app_name),
        "lifetime" => sweep_lifetime(plan, out_dir, &app_name),
        "bandwidth" => sweep_bandwidth(plan, out_dir, &app_name),
        other => Err(Error::Config(format!(
            "unknown sweep axis {other:?} (expected qps, carbon_intensity, lifetime, bandwidth)"
        ))),
    }
}

const SWEEP_QPS_HEADER: [&str; 9] = [
    "qps",
    "config_id",
    "carbon_per_token_g",
    "default_carbon_per_token_g",
    "savings_total",
    "savings_operational_part",
    "savings_embodied_part",
    "slo_attainment",
    "via_fallback",
];

fn sweep_qps(plan: &ExperimentPlan, out_dir: &Path, app_name: &str) -> Result<Outcome> {
    let settings = settings(plan);
    let (_, qps_grid) = plan.application(app_name)?;
    let mut w = CsvWriter::new(&meta(plan), &SWEEP_QPS_HEADER);
    let mut any_ok = false;
    for &qps in qps_grid {
        let cells = run_cells(plan, &settings, app_name, qps, &format!("qps:{app_name}:{qps}"))?;
        let p = schedule_point(plan, &cells, app_name, qps)?;
        any_ok |= !p.via_fallback;
        w.row(&[
            csvio::fmt_f64(qps),
            p.config_id.clone(),
            csvio::fmt_f64(p.carbon_per_token_g),
            csvio::fmt_f64(p.default_carbon_per_token_g),
            csvio::fmt_f64(p.savings_total),
            csvio::fmt_f64(p.savings_operational_part),
            csvio::fmt_f64(p.savings_embodied_part),
            csvio::fmt_f64(p.slo_attainment),
            p.via_fallback.to_string(),
        ]);
    }
    let path = out_dir.join(format!("sweep_qps_{app_name}.csv"));
    w.write_to(&path)?;
    println!("wrote {}", path.display());
    plot::plot_from_csv(
        &path,
        &out_dir.join(format!("sweep_qps_{app_name}.svg")),
        "qps",
        &["savings_total", "savings_operational_part", "savings_embodied_part"],
        &format!("carbon savings vs qps ({app_name})"),
    );
    Ok(if any_ok { Outcome::Ok } else { Outcome::InfeasibleOnly })
}

const SWEEP_CI_HEADER: [&str; 8] = [
    "carbon_intensity_g_kwh",
    "config_id",
    "carbon_per_token_g",
    "default_carbon_per_token_g",
    "savings_total",
    "savings_operational_part",
    "savings_embodied_part",
    "via_fallback",
];

fn sweep_carbon_intensity(plan: &ExperimentPlan, out_dir: &Path, app_name: &str) -> Result<Outcome> {
    let settings = settings(plan);
    let qps = plan.sweep_qps;
    let cells = run_cells(plan, &settings, app_name, qps, &format!("ci:{app_name}:{qps}"))?;
    let mut w = CsvWriter::new(&meta(plan), &SWEEP_CI_HEADER);
    let mut any_ok = false;
    for &alpha in &plan.sweep_carbon_intensity {
        let grid = carbonsim::carbon::GridProfile {
            region: format!("alpha-{alpha}"),
            carbon_intensity_g_kwh: alpha,
        };
        let repriced: Vec<(ServingConfig, CellDetail, PerToken)> = cells
            .iter()
            .map(|(c, d, _)| {
                let pt = reprice(plan, c, d, &grid, None, None)?;
                Ok((c.clone(), d.clone(), pt))
            })
            .collect::<Result<_>>()?;
        let p = schedule_point(plan, &repriced, app_name, qps)?;
        any_ok |= !p.via_fallback;
        w.row(&[
            csvio::fmt_f64(alpha),
            p.config_id.clone(),
            csvio::fmt_f64(p.carbon_per_token_g),
            csvio::fmt_f64(p.default_carbon_per_token_g),
            csvio::fmt_f64(p.savings_total),
            csvio::fmt_f64(p.savings_operational_part),
            csvio::fmt_f64(p.savings_embodied_part),
            p.via_fallback.to_string(),
        ]);
    }
    let path = out_dir.join(format!("sweep_carbon_intensity_{app_name}.csv"));
    w.write_to(&path)?;
    println!("wrote {}", path.display());
    plot::plot_from_csv(
        &path,
        &out_dir.join(format!("sweep_carbon_intensity_{app_name}.svg")),
        "carbon_intensity_g_kwh",
        &["savings_total", "savings_operational_part", "savings_embodied_part"],
        &format!("carbon savings vs grid intensity ({app_name})"),
    );
    Ok(if any_ok { Outcome::Ok } else { Outcome::InfeasibleOnly })
}

const SWEEP_LIFETIME_HEADER: [&str; 8] = [
    "varied_gpu",
    "lifetime_years",
    "config_id",
    "carbon_per_token_g",
    "default_carbon_per_token_g",
    "savings_total",
    "savings_operational_part",
    "savings_embodied_part",
];

fn sweep_lifetime(plan: &ExperimentPlan, out_dir: &Path, app_name: &str) -> Result<Outcome> {
    let settings = settings(plan);
    let qps = plan.sweep_qps;
    let cells = run_cells(plan, &settings, app_name, qps, &format!("lt:{app_name}:{qps}"))?;
    let mut w = CsvWriter::new(&meta(plan), &SWEEP_LIFETIME_HEADER);
    let mut any_ok = false;
    let emit = |w: &mut CsvWriter,
                    varied: &str,
                    years: f64,
                    old_y: Option<f64>,
                    new_y: Option<f64>|
     -> Result<bool> {
        let repriced: Vec<(ServingConfig, CellDetail, PerToken)> = cells
            .iter()
            .map(|(c, d, _)| {
                let pt = reprice(plan, c, d, &plan.default_grid, old_y, new_y)?;
                Ok((c.clone(), d.clone(), pt))
            })
            .collect::<Result<_>>()?;
        let p = schedule_point(plan, &repriced, app_name, qps)?;
        w.row(&[
            varied.to_string(),
            csvio::fmt_f64(years),
            p.config_id.clone(),
            csvio::fmt_f64(p.carbon_per_token_g),
            csvio::fmt_f64(p.default_carbon_per_token_g),
            csvio::fmt_f64(p.savings_total),
            csvio::fmt_f64(p.savings_operational_part),
            csvio::fmt_f64(p.savings_embodied_part),
        ]);
        Ok(!p.via_fallback)
    };
    for &years in &plan.sweep_lifetime_old_years {
        any_ok |= emit(&mut w, "old", years, Some(years), None)?;
    }
    for &years in &plan.sweep_lifetime_new_years {
        any_ok |= emit(&mut w, "new", years, None, Some(years))?;
    }
    let path = out_dir.join(format!("sweep_lifetime_{app_name}.csv"));
    w.write_to(&path)?;
    println!("wrote {}", path.display());
    plot::plot_from_csv(
        &path,
        &out_dir.join(format!("sweep_lifetime_{app_name}.svg")),
        "lifetime_years",
        &["savings_total"],
        &format!("carbon savings vs gpu lifetime ({app_name})"),
    );
    Ok(if any_ok { Outcome::Ok } else { Outcome::InfeasibleOnly })
}

const SWEEP_BANDWIDTH_HEADER: [&str; 10] = [
    "bandwidth_gbps",
    "qps",
    "config_id",
    "carbon_per_token_g",
    "default_carbon_per_token_g",
    "savings_total",
    "savings_operational_part",
    "savings_embodied_part",
    "slo_attainment",
    "via_fallback",
];

fn sweep_bandwidth(plan: &ExperimentPlan, out_dir: &Path, app_name: &str) -> Result<Outcome> {
    let (_, qps_grid) = plan.application(app_name)?;
    let mut w = CsvWriter::new(&meta(plan), &SWEEP_BANDWIDTH_HEADER);
    let mut any_ok = false;
    for &gbps in &plan.sweep_bandwidth_gbps {
        let mut s = settings(plan);
        s.link.bandwidth_bps = gbps * 1e9;
        for &qps in qps_grid {
            let cells = run_cells(
                plan,
                &s,
                app_name,
                qps,
                &format!("bw:{app_name}:{gbps}:{qps}"),
            )?;
            let p = schedule_point(plan, &cells, app_name, qps)?;
            any_ok |= !p.via_fallback;
            w.row(&[
                csvio::fmt_f64(gbps),
                csvio::fmt_f64(qps),
                p.config_id.clone(),
                csvio::fmt_f64(p.carbon_per_token_g),
                csvio::fmt_f64(p.default_carbon_per_token_g),
                csvio::fmt_f64(p.savings_total),
                csvio::fmt_f64(p.savings_operational_part),
                csvio::fmt_f64(p.savings_embodied_part),
                csvio::fmt_f64(p.slo_attainment),
                p.via_fallback.to_string(),
            ]);
        }
    }
    let path = out_dir.join(format!("sweep_bandwidth_{app_name}.csv"));
    w.write_to(&path)?;
    println!("wrote {}", path.display());
    plot::plot_from_csv(
        &path,
        &out_dir.join(format!("sweep_bandwidth_{app_name}.svg")),
        "qps",
        &["savings_total"],
        &format!("carbon savings vs qps across bandwidths ({app_name})"),
    );
    Ok(if any_ok { Outcome::Ok } else { Outcome::InfeasibleOnly })
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

const ANALYZE_CI_HEADER: [&str; 3] = ["carbon_intensity_g_kwh", "ratio", "savings"];
const ANALYZE_LIFETIME_HEADER: [&str; 4] = [
    "new_gpu_lifetime_years",
    "old_gpu_lifetime_years",
    "savings_exact",
    "approx_term",
];

pub fn cmd_analyze(
    plan: &ExperimentPlan,
    out_dir: &Path,
    config_id: Option<&str>,
    app_flag: Option<&str>,
    qps_flag: Option<f64>,
) -> Result<Outcome> {
    let app_name = app_flag.unwrap_or(&plan.sweep_application).to_string();
    let qps = qps_flag.unwrap_or(plan.sweep_qps);
    let settings = settings(plan);
    let cells = run_cells(plan, &settings, &app_name, qps, &format!("an:{app_name}:{qps}"))?;

    let default = cells
        .iter()
        .find(|(c, _, _)| c.id == plan.default_config)
        .ok_or_else(|| Error::Lookup(format!("default config {} missing", plan.default_config)))?;
    let disagg = match config_id {
        Some(id) => cells
            .iter()
            .find(|(c, _, _)| c.id == id)
            .ok_or_else(|| Error::Lookup(format!("unknown serving config {id:?}")))?,
        None => cells
            .iter()
            .filter(|(c, d, _)| c.variant.is_disaggregated() && !d.is_infeasible())
            .min_by(|a, b| a.2.total_g.total_cmp(&b.2.total_g))
            .ok_or_else(|| {
                Error::Lookup("no feasible disaggregated configuration to analyze".into())
            })?,
    };
    if default.1.is_infeasible() || disagg.1.is_infeasible() {
        eprintln!("analysis point infeasible; nothing to compare");
        return Ok(Outcome::InfeasibleOnly);
    }
    if disagg.0.old_gpu.is_none() {
        return Err(Error::Contract(format!(
            "config {} is not disaggregated; analysis compares standalone vs two-GPU serving",
            disagg.0.id
        )));
    }

    // Standalone side: GPU A only. Disaggregated side: GPU A plus old GPU B.
    let new_gpu = &disagg.0.new_gpu;
    let old_gpu = disagg.0.old_gpu.as_ref().expect("checked above");
    let lt_a = plan.lifetime_for(&new_gpu.name);
    let lt_b = plan.lifetime_for(&old_gpu.name);
    let t_a = default.1.busy_s_per_gpu[0];
    let n_a = default.1.energy_kwh_per_gpu.iter().sum::<f64>();
    let t_a_prime = disagg.1.busy_s_per_gpu[0];
    let n_a_prime = disagg.1.energy_kwh_per_gpu[0];
    let t_b = disagg.1.busy_s_per_gpu[1];
    let n_b = disagg.1.energy_kwh_per_gpu[1];
    let alpha = plan.default_grid.carbon_intensity_g_kwh;

    let case = analysis::CaseParams {
        n_a,
        n_a_prime,
        n_b,
        e_a: t_a / lt_a.lifetime_s * new_gpu.embodied_carbon_g,
        e_a_prime: t_a_prime / lt_a.lifetime_s * new_gpu.embodied_carbon_g,
        e_b: t_b / lt_b.lifetime_s * old_gpu.embodied_carbon_g,
        alpha,
    };
    println!(
        "comparing {} vs {} at ({}, qps {}): energy condition (disaggregated uses less energy) = {}",
        disagg.0.id,
        plan.default_config,
        app_name,
        qps,
        analysis::savings_condition(&case)
    );

    let mut ci_w = CsvWriter::new(&meta(plan), &ANALYZE_CI_HEADER);
    for (a, s) in analysis::ci_sensitivity(&case, &plan.sweep_carbon_intensity)? {
        ci_w.row(&[
            csvio::fmt_f64(a),
            csvio::fmt_f64(s.ratio),
            csvio::fmt_f64(s.savings),
        ]);
    }
    let ci_path = out_dir.join("analysis_ci.csv");
    ci_w.write_to(&ci_path)?;

    let lp = analysis::LifetimeParams {
        t_a_prime_s: t_a_prime,
        t_a_s: t_a,
        t_b_s: t_b,
        big_t_a_s: lt_a.lifetime_s,
        big_t_b_s: lt_b.lifetime_s,
        cal_a_g: new_gpu.embodied_carbon_g,
        cal_b_g: old_gpu.embodied_carbon_g,
        n_a,
        n_a_prime,
        n_b,
        alpha,
    };
    let ta_grid: Vec<f64> = plan
        .sweep_lifetime_new_years
        .iter()
        .map(|y| carbonsim::units::years_to_seconds(*y))
        .collect();
    let tb_grid: Vec<f64> = plan
        .sweep_lifetime_old_years
        .iter()
        .map(|y| carbonsim::units::years_to_seconds(*y))
        .collect();
    let mut lt_w = CsvWriter::new(&meta(plan), &ANALYZE_LIFETIME_HEADER);
    for point in analysis::lifetime_sensitivity(&lp, &ta_grid, &tb_grid)? {
        lt_w.row(&[
            csvio::fmt_f64(point.big_t_a_s / carbonsim::units::SECONDS_PER_YEAR),
            csvio::fmt_f64(point.big_t_b_s / carbonsim::units::SECONDS_PER_YEAR),
            csvio::fmt_f64(point.savings_exact),
            csvio::fmt_f64(point.approx_term),
        ]);
    }
    let lt_path = out_dir.join("analysis_lifetime.csv");
    lt_w.write_to(&lt_path)?;
    println!("wrote {} and {}", ci_path.display(), lt_path.display());

    plot::plot_from_csv(
        &ci_path,
        &out_dir.join("analysis_ci.svg"),
        "carbon_intensity_g_kwh",
        &["savings"],
        "closed-form savings vs grid intensity",
    );
    plot::plot_from_csv(
        &lt_path,
        &out_dir.join("analysis_lifetime.svg"),
        "old_gpu_lifetime_years",
        &["savings_exact"],
        "closed-form savings vs old gpu lifetime",
    );
    Ok(Outcome::Ok)
}
