//! Profiling database: one simulated record per (configuration,
//! application, qps) cell, persisted as CSV and consumed by the scheduler.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::carbon::{total_carbon, GridProfile, LifetimeAssumption};
use crate::csvio;
use crate::error::{Error, Result};
use crate::scheduler::{PerfMatrices, WorkloadKey};
use crate::sim::{simulate, slo_attainment, NetworkLink, ServingConfig};
use crate::workload::{generate_trace, ApplicationProfile, SizePercentile};

/// One profiled cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRecord {
    pub config_id: String,
    pub application_id: String,
    pub qps: f64,
    pub mean_ttft_s: f64,
    pub mean_tpot_s: f64,
    pub energy_per_token_j: f64,
    pub carbon_per_token_g: f64,
    pub slo_attainment: f64,
}

impl ProfileRecord {
    /// Infeasible sentinel: a cell whose simulation hit a capacity error.
    /// Carbon is +inf and attainment 0, so feasibility filters exclude it.
    pub fn infeasible(config_id: &str, application_id: &str, qps: f64) -> Self {
        ProfileRecord {
            config_id: config_id.to_string(),
            application_id: application_id.to_string(),
            qps,
            mean_ttft_s: f64::INFINITY,
            mean_tpot_s: f64::INFINITY,
            energy_per_token_j: f64::INFINITY,
            carbon_per_token_g: f64::INFINITY,
            slo_attainment: 0.0,
        }
    }

    pub fn is_infeasible(&self) -> bool {
        !self.carbon_per_token_g.is_finite()
    }
}

/// Everything a profiling run needs besides the (config, app, qps) grid.
#[derive(Debug, Clone)]
pub struct ProfileSettings {
    pub grid: GridProfile,
    pub lifetimes: Vec<LifetimeAssumption>,
    pub link: NetworkLink,
    pub percentile: SizePercentile,
    pub duration_s: f64,
    pub seed: u64,
}

impl ProfileSettings {
    pub fn lifetime_for(&self, gpu: &str) -> LifetimeAssumption {
        self.lifetimes
            .iter()
            .find(|l| l.gpu == gpu)
            .cloned()
            .unwrap_or_else(|| LifetimeAssumption::default_for(gpu))
    }
}

/// Everything a profiled cell exposes beyond its summary record: enough to
/// re-derive carbon under a different grid or lifetime set without
/// re-simulating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDetail {
    pub record: ProfileRecord,
    pub operational_g: f64,
    pub embodied_g: f64,
    pub gpu_names: Vec<String>,
    pub busy_s_per_gpu: Vec<f64>,
    pub energy_kwh_per_gpu: Vec<f64>,
    pub tokens_out: u64,
    pub peak_bandwidth_bps: f64,
    pub bytes_transferred: u64,
}

impl CellDetail {
    pub fn is_infeasible(&self) -> bool {
        self.record.is_infeasible()
    }

    fn infeasible(config_id: &str, application_id: &str, qps: f64) -> Self {
        CellDetail {
            record: ProfileRecord::infeasible(config_id, application_id, qps),
            operational_g: f64::INFINITY,
            embodied_g: f64::INFINITY,
            gpu_names: vec![],
            busy_s_per_gpu: vec![],
            energy_kwh_per_gpu: vec![],
            tokens_out: 0,
            peak_bandwidth_bps: 0.0,
            bytes_transferred: 0,
        }
    }

    /// Re-price the cell's carbon under another grid and lifetime set.
    pub fn carbon_under(
        &self,
        gpus: &[&crate::carbon::GpuSpec],
        lifetimes: &[&LifetimeAssumption],
        grid: &GridProfile,
    ) -> Result<crate::carbon::CarbonBreakdown> {
        total_carbon(
            &self.busy_s_per_gpu,
            &self.energy_kwh_per_gpu,
            gpus,
            lifetimes,
            grid,
            self.tokens_out,
        )
    }
}

/// Profile one cell: run the simulator on a seeded trace and convert the
/// report into latency, energy, and carbon per token.
pub fn profile_cell(
    config: &ServingConfig,
    app: &ApplicationProfile,
    qps: f64,
    settings: &ProfileSettings,
    cell_seed: u64,
) -> Result<ProfileRecord> {
    profile_cell_detailed(config, app, qps, settings, cell_seed).map(|d| d.record)
}

/// `profile_cell` with the full per-GPU breakdown retained.
///
/// A short horizon at a low rate can draw an empty arrival stream; the cell
/// deterministically re-derives its seed (bounded attempts) until at least
/// one request lands.
pub fn profile_cell_detailed(
    config: &ServingConfig,
    app: &ApplicationProfile,
    qps: f64,
    settings: &ProfileSettings,
    cell_seed: u64,
) -> Result<CellDetail> {
    let mut trace =
        generate_trace(app, settings.percentile, qps, settings.duration_s, cell_seed)?;
    for attempt in 1..=16u64 {
        if !trace.requests.is_empty() {
            break;
        }
        let reseed = crate::units::derive_seed(cell_seed, attempt);
        trace = generate_trace(app, settings.percentile, qps, settings.duration_s, reseed)?;
    }
    if trace.requests.is_empty() {
        return Err(Error::Contract(format!(
            "profiling cell ({}, {}, {qps}) produced an empty trace; increase duration",
            config.id, app.name
        )));
    }
    let report = match simulate(config, &trace, &settings.link, cell_seed) {
        Ok(r) => r,
        Err(Error::Capacity(_)) => {
            return Ok(CellDetail::infeasible(&config.id, &app.name, qps));
        }
        Err(e) => return Err(e),
    };

    let n = report.per_request.len() as f64;
    let mean_ttft = report.per_request.iter().map(|r| r.ttft_s).sum::<f64>() / n;
    let mean_tpot = report.per_request.iter().map(|r| r.tpot_mean_s).sum::<f64>() / n;

    let mut gpus = vec![&config.new_gpu];
    if let Some(old) = &config.old_gpu {
        gpus.push(old);
    }
    let busy: Vec<f64> = report.per_gpu.iter().map(|g| g.busy_time_s).collect();
    let energy: Vec<f64> = report.per_gpu.iter().map(|g| g.energy_kwh).collect();
    let lifetimes: Vec<LifetimeAssumption> =
        gpus.iter().map(|g| settings.lifetime_for(&g.name)).collect();
    let lifetime_refs: Vec<&LifetimeAssumption> = lifetimes.iter().collect();
    let breakdown = total_carbon(
        &busy,
        &energy,
        &gpus,
        &lifetime_refs,
        &settings.grid,
        report.tokens_out,
    )?;

    let energy_per_token = if report.tokens_out > 0 {
        crate::units::kwh_to_joules(energy.iter().sum::<f64>()) / report.tokens_out as f64
    } else {
        0.0
    };

    let record = ProfileRecord {
        config_id: config.id.clone(),
        application_id: app.name.clone(),
        qps,
        mean_ttft_s: mean_ttft,
        mean_tpot_s: mean_tpot,
        energy_per_token_j: energy_per_token,
        carbon_per_token_g: breakdown.per_token_g,
        slo_attainment: slo_attainment(&report, app)?,
    };
    Ok(CellDetail {
        record,
        operational_g: breakdown.operational_g,
        embodied_g: breakdown.embodied_g,
        gpu_names: gpus.iter().map(|g| g.name.clone()).collect(),
        busy_s_per_gpu: busy,
        energy_kwh_per_gpu: energy,
        tokens_out: report.tokens_out,
        peak_bandwidth_bps: report.peak_bandwidth_demand_bps,
        bytes_transferred: report.bytes_transferred,
    })
}

/// Build the full database: one record per (config, app, qps) triple, in
/// deterministic cell order, each cell on its own derived seed.
pub fn build_profile_database(
    configs: &[ServingConfig],
    apps: &[(ApplicationProfile, Vec<f64>)],
    settings: &ProfileSettings,
) -> Result<Vec<ProfileRecord>> {
    if configs.is_empty() || apps.is_empty() || apps.iter().any(|(_, g)| g.is_empty()) {
        return Err(Error::Contract(
            "profiling needs at least one config, app, and qps".into(),
        ));
    }
    let mut records = Vec::new();
    let mut cell_index = 0u64;
    for config in configs {
        for (app, qps_grid) in apps {
            for &qps in qps_grid {
                let cell_seed = crate::units::derive_seed(settings.seed, cell_index);
                records.push(profile_cell(config, app, qps, settings, cell_seed)?);
                cell_index += 1;
            }
        }
    }
    Ok(records)
}

pub const PROFILE_HEADER: [&str; 8] = [
    "config_id",
    "application_id",
    "qps",
    "mean_ttft_s",
    "mean_tpot_s",
    "energy_per_token_j",
    "carbon_per_token_g",
    "slo_attainment",
];

/// Render records as CSV (with the standard metadata comment).
pub fn profile_csv(records: &[ProfileRecord], meta: &csvio::CsvMeta) -> String {
    let mut w = csvio::CsvWriter::new(meta, &PROFILE_HEADER);
    for r in records {
        w.row(&[
            r.config_id.clone(),
            r.application_id.clone(),
            csvio::fmt_f64(r.qps),
            csvio::fmt_f64(r.mean_ttft_s),
            csvio::fmt_f64(r.mean_tpot_s),
            csvio::fmt_f64(r.energy_per_token_j),
            csvio::fmt_f64(r.carbon_per_token_g),
            csvio::fmt_f64(r.slo_attainment),
        ]);
    }
    w.finish()
}

/// Load a profile database CSV.
pub fn read_profile_csv(path: &Path) -> Result<Vec<ProfileRecord>> {
    let (header, rows) = csvio::read_rows(path)?;
    if header != PROFILE_HEADER {
        return Err(Error::Contract(format!(
            "unexpected profile csv header: {header:?}"
        )));
    }
    rows.iter()
        .map(|f| {
            Ok(ProfileRecord {
                config_id: f[0].clone(),
                application_id: f[1].clone(),
                qps: csvio::parse_f64(&f[2], "qps")?,
                mean_ttft_s: csvio::parse_f64(&f[3], "mean_ttft_s")?,
                mean_tpot_s: csvio::parse_f64(&f[4], "mean_tpot_s")?,
                energy_per_token_j: csvio::parse_f64(&f[5], "energy_per_token_j")?,
                carbon_per_token_g: csvio::parse_f64(&f[6], "carbon_per_token_g")?,
                slo_attainment: csvio::parse_f64(&f[7], "slo_attainment")?,
            })
        })
        .collect()
}

/// Arrange records into scheduler matrices. Row order follows first
/// appearance of (application, qps); column order follows first appearance
/// of config ids. Cells missing from `records` stay unobserved.
pub fn matrices_from_records(records: &[ProfileRecord]) -> Result<PerfMatrices> {
    if records.is_empty() {
        return Err(Error::Contract("no profile records".into()));
    }
    let mut rows: Vec<WorkloadKey> = Vec::new();
    let mut cols: Vec<String> = Vec::new();
    for r in records {
        if !rows
            .iter()
            .any(|k| k.application_id == r.application_id && k.qps == r.qps)
        {
            rows.push(WorkloadKey {
                application_id: r.application_id.clone(),
                qps: r.qps,
            });
        }
        if !cols.contains(&r.config_id) {
            cols.push(r.config_id.clone());
        }
    }
    let mut m = PerfMatrices {
        carbon: vec![vec![0.0; cols.len()]; rows.len()],
        slo_att: vec![vec![0.0; cols.len()]; rows.len()],
        observed: vec![vec![false; cols.len()]; rows.len()],
        rows,
        cols,
    };
    for r in records {
        let i = m
            .rows
            .iter()
            .position(|k| k.application_id == r.application_id && k.qps == r.qps)
            .expect("inserted above");
        let j = m.cols.iter().position(|c| *c == r.config_id).expect("inserted above");
        m.carbon[i][j] = r.carbon_per_token_g;
        m.slo_att[i][j] = r.slo_attainment;
        m.observed[i][j] = true;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carbon::GpuSpec;
    use crate::hardware::ModelSpec;
    use crate::sim::Variant;
    use crate::units::years_to_seconds;

    fn a100() -> GpuSpec {
        GpuSpec {
            name: "A100".into(),
            vram_gib: 40.0,
            mem_bandwidth_gb_s: 1555.0,
            chip_area_mm2: 826.0,
            max_power_w: 400.0,
            idle_power_w: 60.0,
            fp16_tflops: 312.0,
            embodied_carbon_g: 26_340.0,
            release_year: 2020,
            eta_compute: 0.6,
            eta_memory: 0.8,
        }
    }

    fn llama_7b() -> ModelSpec {
        ModelSpec {
            name: "llama-7b".into(),
            params: 7e9,
            layers: 32,
            hidden_dim: 4096,
            bytes_per_param: 2,
            vocab_size: 32_000,
        }
    }

    fn standalone() -> ServingConfig {
        ServingConfig {
            id: "standalone-a100".into(),
            variant: Variant::Standalone,
            new_gpu: a100(),
            old_gpu: None,
            target_model: llama_7b(),
            draft_model: None,
            draft_window: None,
            max_batch: 24,
        }
    }

    fn sharegpt() -> ApplicationProfile {
        ApplicationProfile {
            name: "sharegpt".into(),
            ttft_slo_s: 0.2,
            tpot_slo_s: 0.08,
            p25: (24, 24),
            p50: (160, 140),
            p75: (510, 357),
        }
    }

    fn settings() -> ProfileSettings {
        ProfileSettings {
            grid: GridProfile {
                region: "CISO".into(),
                carbon_intensity_g_kwh: 261.0,
            },
            lifetimes: vec![LifetimeAssumption {
                gpu: "A100".into(),
                lifetime_s: years_to_seconds(7.0),
                elapsed_service_s: 0.0,
            }],
            link: NetworkLink {
                bandwidth_bps: 16e9,
                base_latency_s: 0.0005,
            },
            percentile: SizePercentile::P50,
            duration_s: 10.0,
            seed: 7,
        }
    }

    #[test]
    fn database_cardinality() {
        let apps = vec![(sharegpt(), vec![0.5, 1.0, 2.0])];
        let records = build_profile_database(&[standalone()], &apps, &settings()).unwrap();
        assert_eq!(records.len(), 3);
        for r in &records {
            assert!(!r.is_infeasible());
            assert!(r.carbon_per_token_g > 0.0);
            assert!((0.0..=1.0).contains(&r.slo_attainment));
        }
    }

    #[test]
    fn database_is_deterministic() {
        let apps = vec![(sharegpt(), vec![1.0, 2.0])];
        let a = build_profile_database(&[standalone()], &apps, &settings()).unwrap();
        let b = build_profile_database(&[standalone()], &apps, &settings()).unwrap();
        assert_eq!(a, b);
        let meta = csvio::CsvMeta {
            seed: 7,
            config_hash: 1,
            tool_version: "0.1.0",
        };
        assert_eq!(profile_csv(&a, &meta), profile_csv(&b, &meta));
    }

    #[test]
    fn infeasible_cell_gets_sentinel() {
        let mut config = standalone();
        config.new_gpu.vram_gib = 10.0; // weights alone are ~13 GiB
        let apps = vec![(sharegpt(), vec![1.0])];
        let records = build_profile_database(&[config], &apps, &settings()).unwrap();
        assert_eq!(records.len(), 1);
        assert!(records[0].is_infeasible());
        assert_eq!(records[0].slo_attainment, 0.0);
        assert_eq!(records[0].carbon_per_token_g, f64::INFINITY);
    }

    #[test]
    fn csv_round_trip_including_sentinels() {
        let records = vec![
            ProfileRecord {
                config_id: "a".into(),
                application_id: "sharegpt".into(),
                qps: 1.5,
                mean_ttft_s: 0.012,
                mean_tpot_s: 0.011,
                energy_per_token_j: 3.25,
                carbon_per_token_g: 2.5e-4,
                slo_attainment: 0.97,
            },
            ProfileRecord::infeasible("b", "sharegpt", 1.5),
        ];
        let meta = csvio::CsvMeta {
            seed: 1,
            config_hash: 2,
            tool_version: "0.1.0",
        };
        let text = profile_csv(&records, &meta);
        let dir = std::env::temp_dir().join("carbonsim-profiler-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("profile_db.csv");
        csvio::write_atomic(&path, &text).unwrap();
        let back = read_profile_csv(&path).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn matrices_layout_and_sentinel_mask() {
        let records = vec![
            ProfileRecord {
                config_id: "a".into(),
                application_id: "x".into(),
                qps: 1.0,
                mean_ttft_s: 0.0,
                mean_tpot_s: 0.0,
                energy_per_token_j: 0.0,
                carbon_per_token_g: 3.0,
                slo_attainment: 0.95,
            },
            ProfileRecord::infeasible("b", "x", 1.0),
            ProfileRecord {
                config_id: "a".into(),
                application_id: "x".into(),
                qps: 2.0,
                mean_ttft_s: 0.0,
                mean_tpot_s: 0.0,
                energy_per_token_j: 0.0,
                carbon_per_token_g: 2.0,
                slo_attainment: 0.9,
            },
        ];
        let m = matrices_from_records(&records).unwrap();
        assert_eq!(m.rows.len(), 2);
        assert_eq!(m.cols, vec!["a".to_string(), "b".to_string()]);
        assert!(m.observed[0][0] && m.observed[0][1]);
        assert!(m.observed[1][0] && !m.observed[1][1]);
        assert_eq!(m.carbon[0][1], f64::INFINITY);
        assert_eq!(m.slo_att[0][1], 0.0);
        m.validate().unwrap();
    }
}
