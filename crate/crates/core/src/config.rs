//! Experiment configuration: one JSON file declaring GPUs, models, grids,
//! applications, serving configurations, and sweep axes.
//!
//! GPU keys mirror the usual spec-sheet fields (embodied carbon arrives in
//! kg and is converted to grams on load; every other carbon quantity in the
//! system is grams). Times in data files are seconds, energies kWh.
//! Dotted-path overrides (`sim.duration_s=10`) patch the parsed JSON before
//! validation, so the stamped config hash always reflects the effective
//! configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::carbon::{
    GpuSpec, GridProfile, LifetimeAssumption, DEFAULT_ETA_COMPUTE, DEFAULT_ETA_MEMORY,
    DEFAULT_IDLE_FRACTION,
};
use crate::error::{Error, Result};
use crate::hardware::ModelSpec;
use crate::scheduler::{CompletionParams, Priority};
use crate::sim::{NetworkLink, ServingConfig, Variant};
use crate::spec_decode::DraftWindow;
use crate::workload::{ApplicationProfile, ArrivalProcess, SizePercentile};

#[derive(Debug, Clone, Deserialize, Serialize)]
struct RawGpu {
    name: String,
    vram_gib: f64,
    mem_bandwidth_gb_s: f64,
    chip_area_mm2: f64,
    max_power_w: f64,
    fp16_tflops: f64,
    embodied_carbon_kg: f64,
    release_year: u32,
    #[serde(default)]
    idle_power_w: Option<f64>,
    #[serde(default)]
    eta_compute: Option<f64>,
    #[serde(default)]
    eta_memory: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct RawCalibration {
    #[serde(default = "default_eta_c")]
    eta_compute: f64,
    #[serde(default = "default_eta_m")]
    eta_memory: f64,
    #[serde(default = "default_idle_fraction")]
    idle_fraction: f64,
}

fn default_eta_c() -> f64 {
    DEFAULT_ETA_COMPUTE
}
fn default_eta_m() -> f64 {
    DEFAULT_ETA_MEMORY
}
fn default_idle_fraction() -> f64 {
    DEFAULT_IDLE_FRACTION
}

impl Default for RawCalibration {
    fn default() -> Self {
        RawCalibration {
            eta_compute: DEFAULT_ETA_COMPUTE,
            eta_memory: DEFAULT_ETA_MEMORY,
            idle_fraction: DEFAULT_IDLE_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct RawModel {
    name: String,
    params: f64,
    layers: u32,
    hidden_dim: u32,
    #[serde(default = "default_bytes_per_param")]
    bytes_per_param: u32,
    vocab_size: u32,
}

fn default_bytes_per_param() -> u32 {
    2
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct RawGrid {
    region: String,
    carbon_intensity_g_kwh: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct RawLifetime {
    gpu: String,
    lifetime_years: f64,
    #[serde(default)]
    elapsed_service_years: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct RawLink {
    bandwidth_gbps: f64,
    #[serde(default)]
    base_latency_s: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct RawApplication {
    name: String,
    ttft_slo_s: f64,
    tpot_slo_s: f64,
    p25: (u64, u64),
    p50: (u64, u64),
    p75: (u64, u64),
    qps_grid: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct RawServingConfig {
    id: String,
    variant: Variant,
    new_gpu: String,
    #[serde(default)]
    old_gpu: Option<String>,
    target_model: String,
    #[serde(default)]
    draft_model: Option<String>,
    #[serde(default)]
    draft_k: Option<u32>,
    #[serde(default)]
    acceptance_rate: Option<f64>,
    max_batch: u64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct RawSim {
    #[serde(default = "default_duration")]
    duration_s: f64,
    #[serde(default = "default_percentile")]
    percentile: SizePercentile,
    #[serde(default)]
    disable_overlap: bool,
    #[serde(default = "default_arrival")]
    arrival_process: ArrivalProcess,
}

fn default_duration() -> f64 {
    40.0
}
fn default_percentile() -> SizePercentile {
    SizePercentile::P50
}
fn default_arrival() -> ArrivalProcess {
    ArrivalProcess::Poisson
}

impl Default for RawSim {
    fn default() -> Self {
        RawSim {
            duration_s: default_duration(),
            percentile: default_percentile(),
            disable_overlap: false,
            arrival_process: default_arrival(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct RawScheduler {
    #[serde(default = "default_slo_target")]
    slo_target: f64,
    #[serde(default = "default_priority")]
    priority: Priority,
    #[serde(default = "default_rank")]
    rank: usize,
    #[serde(default = "default_iterations")]
    iterations: usize,
    #[serde(default = "default_tolerance")]
    tolerance: f64,
    #[serde(default = "default_ridge")]
    ridge: f64,
}

fn default_slo_target() -> f64 {
    0.9
}
fn default_priority() -> Priority {
    Priority::Slo
}
fn default_rank() -> usize {
    2
}
fn default_iterations() -> usize {
    200
}
fn default_tolerance() -> f64 {
    1e-8
}
fn default_ridge() -> f64 {
    0.1
}

impl Default for RawScheduler {
    fn default() -> Self {
        RawScheduler {
            slo_target: default_slo_target(),
            priority: default_priority(),
            rank: default_rank(),
            iterations: default_iterations(),
            tolerance: default_tolerance(),
            ridge: default_ridge(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct RawSweeps {
    #[serde(default = "default_ci_axis")]
    carbon_intensity: Vec<f64>,
    #[serde(default = "default_bandwidth_axis")]
    bandwidth_gbps: Vec<f64>,
    #[serde(default = "default_old_lifetimes")]
    lifetime_old_years: Vec<f64>,
    #[serde(default = "default_new_lifetimes")]
    lifetime_new_years: Vec<f64>,
    /// Application driving single-app sweeps.
    #[serde(default = "default_sweep_app")]
    application: String,
    /// Query rate at which intensity/lifetime sweeps are evaluated.
    #[serde(default = "default_sweep_qps")]
    qps: f64,
}

fn default_ci_axis() -> Vec<f64> {
    vec![17.0, 261.0, 501.0]
}
fn default_bandwidth_axis() -> Vec<f64> {
    vec![1.0, 4.0, 16.0]
}
fn default_old_lifetimes() -> Vec<f64> {
    vec![5.0, 6.0, 7.0, 8.0, 9.0, 10.0]
}
fn default_new_lifetimes() -> Vec<f64> {
    vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0]
}
fn default_sweep_app() -> String {
    "sharegpt".into()
}
fn default_sweep_qps() -> f64 {
    2.0
}

impl Default for RawSweeps {
    fn default() -> Self {
        RawSweeps {
            carbon_intensity: default_ci_axis(),
            bandwidth_gbps: default_bandwidth_axis(),
            lifetime_old_years: default_old_lifetimes(),
            lifetime_new_years: default_new_lifetimes(),
            application: default_sweep_app(),
            qps: default_sweep_qps(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
struct RawPlan {
    #[serde(default = "default_plan_name")]
    name: String,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_output_dir")]
    output_dir: String,
    gpus: Vec<RawGpu>,
    #[serde(default)]
    calibration: RawCalibration,
    models: Vec<RawModel>,
    grids: Vec<RawGrid>,
    default_grid: String,
    #[serde(default)]
    lifetimes: Vec<RawLifetime>,
    link: RawLink,
    applications: Vec<RawApplication>,
    configs: Vec<RawServingConfig>,
    default_config: String,
    #[serde(default)]
    sim: RawSim,
    #[serde(default)]
    scheduler: RawScheduler,
    #[serde(default)]
    sweeps: RawSweeps,
}

fn default_output_dir() -> String {
    "out".into()
}

fn default_plan_name() -> String {
    "default".into()
}

/// Fully resolved experiment plan.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub name: String,
    pub seed: u64,
    pub output_dir: String,
    pub gpus: BTreeMap<String, GpuSpec>,
    pub models: BTreeMap<String, ModelSpec>,
    pub grids: Vec<GridProfile>,
    pub default_grid: GridProfile,
    pub lifetimes: Vec<LifetimeAssumption>,
    pub link: NetworkLink,
    /// Applications with their qps grids, in file order.
    pub applications: Vec<(ApplicationProfile, Vec<f64>)>,
    pub configs: Vec<ServingConfig>,
    pub default_config: String,
    pub duration_s: f64,
    pub percentile: SizePercentile,
    pub disable_overlap: bool,
    pub arrival_process: ArrivalProcess,
    pub slo_target: f64,
    pub priority: Priority,
    pub completion: CompletionParams,
    pub sweep_carbon_intensity: Vec<f64>,
    pub sweep_bandwidth_gbps: Vec<f64>,
    pub sweep_lifetime_old_years: Vec<f64>,
    pub sweep_lifetime_new_years: Vec<f64>,
    pub sweep_application: String,
    pub sweep_qps: f64,
    /// FNV-1a hash of the effective (post-override) configuration JSON.
    pub config_hash: u64,
}

impl ExperimentPlan {
    pub fn gpu(&self, name: &str) -> Result<&GpuSpec> {
        self.gpus
            .get(name)
            .ok_or_else(|| Error::Lookup(format!("unknown gpu {name:?}")))
    }

    pub fn application(&self, name: &str) -> Result<&(ApplicationProfile, Vec<f64>)> {
        self.applications
            .iter()
            .find(|(a, _)| a.name == name)
            .ok_or_else(|| Error::Lookup(format!("unknown application {name:?}")))
    }

    pub fn config(&self, id: &str) -> Result<&ServingConfig> {
        self.configs
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::Lookup(format!("unknown serving config {id:?}")))
    }

    pub fn grid(&self, region: &str) -> Result<&GridProfile> {
        self.grids
            .iter()
            .find(|g| g.region == region)
            .ok_or_else(|| Error::Lookup(format!("unknown grid region {region:?}")))
    }

    pub fn lifetime_for(&self, gpu: &str) -> LifetimeAssumption {
        self.lifetimes
            .iter()
            .find(|l| l.gpu == gpu)
            .cloned()
            .unwrap_or_else(|| LifetimeAssumption::default_for(gpu))
    }
}

/// Load a plan from a JSON file, applying `key.path=value` overrides.
pub fn load_plan(path: &Path, overrides: &[String]) -> Result<ExperimentPlan> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    plan_from_json(&text, overrides)
}

/// Parse a plan from JSON text, applying dotted-path overrides.
pub fn plan_from_json(text: &str, overrides: &[String]) -> Result<ExperimentPlan> {
    let mut value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("invalid json: {e}")))?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    // serde_json maps are sorted, so this rendering is canonical.
    let canonical = serde_json::to_string(&value).expect("value reserializes");
    let config_hash = crate::csvio::fnv1a_hash(&canonical);

    let raw: RawPlan = serde_json::from_value(value)
        .map_err(|e| Error::Config(format!("invalid plan: {e}")))?;
    resolve(raw, config_hash)
}

/// Apply one `a.b.c=value` override onto the parsed JSON.
fn apply_override(value: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (path, raw_val) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {spec:?} must be key.path=value")))?;
    let parsed: serde_json::Value = serde_json::from_str(raw_val)
        .unwrap_or_else(|_| serde_json::Value::String(raw_val.to_string()));
    let mut cursor = value;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        let obj = cursor.as_object_mut().ok_or_else(|| {
            Error::Config(format!("override {spec:?}: {part} is not an object field"))
        })?;
        if last {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        cursor = obj
            .entry(part.to_string())
            .or_insert(serde_json::json!({}));
    }
    Ok(())
}

fn resolve(raw: RawPlan, config_hash: u64) -> Result<ExperimentPlan> {
    if raw.gpus.is_empty() || raw.models.is_empty() || raw.grids.is_empty() {
        return Err(Error::Config(
            "gpus, models, and grids must be non-empty".into(),
        ));
    }
    if raw.configs.is_empty() || raw.applications.is_empty() {
        return Err(Error::Config(
            "configs and applications must be non-empty".into(),
        ));
    }
    let cal = &raw.calibration;
    if !(0.0..1.0).contains(&cal.idle_fraction) {
        return Err(Error::Config(format!(
            "calibration.idle_fraction must be in [0, 1), got {}",
            cal.idle_fraction
        )));
    }

    let mut gpus = BTreeMap::new();
    for (i, g) in raw.gpus.iter().enumerate() {
        let spec = GpuSpec {
            name: g.name.clone(),
            vram_gib: g.vram_gib,
            mem_bandwidth_gb_s: g.mem_bandwidth_gb_s,
            chip_area_mm2: g.chip_area_mm2,
            max_power_w: g.max_power_w,
            idle_power_w: g.idle_power_w.unwrap_or(cal.idle_fraction * g.max_power_w),
            fp16_tflops: g.fp16_tflops,
            embodied_carbon_g: g.embodied_carbon_kg * crate::units::GRAMS_PER_KG,
            release_year: g.release_year,
            eta_compute: g.eta_compute.unwrap_or(cal.eta_compute),
            eta_memory: g.eta_memory.unwrap_or(cal.eta_memory),
        };
        spec.validate()
            .map_err(|e| Error::Config(format!("gpus[{i}] ({}): {e}", g.name)))?;
        if gpus.insert(g.name.clone(), spec).is_some() {
            return Err(Error::Config(format!("gpus[{i}]: duplicate name {}", g.name)));
        }
    }

    let mut models = BTreeMap::new();
    for (i, m) in raw.models.iter().enumerate() {
        let spec = ModelSpec {
            name: m.name.clone(),
            params: m.params,
            layers: m.layers,
            hidden_dim: m.hidden_dim,
            bytes_per_param: m.bytes_per_param,
            vocab_size: m.vocab_size,
        };
        spec.validate()
            .map_err(|e| Error::Config(format!("models[{i}] ({}): {e}", m.name)))?;
        if models.insert(m.name.clone(), spec).is_some() {
            return Err(Error::Config(format!(
                "models[{i}]: duplicate name {}",
                m.name
            )));
        }
    }

    let grids: Vec<GridProfile> = raw
        .grids
        .iter()
        .map(|g| GridProfile {
            region: g.region.clone(),
            carbon_intensity_g_kwh: g.carbon_intensity_g_kwh,
        })
        .collect();
    for (i, g) in grids.iter().enumerate() {
        g.validate()
            .map_err(|e| Error::Config(format!("grids[{i}]: {e}")))?;
    }
    let default_grid = grids
        .iter()
        .find(|g| g.region == raw.default_grid)
        .cloned()
        .ok_or_else(|| {
            Error::Config(format!(
                "default_grid: unknown region {:?}",
                raw.default_grid
            ))
        })?;

    let lifetimes: Vec<LifetimeAssumption> = raw
        .lifetimes
        .iter()
        .map(|l| LifetimeAssumption {
            gpu: l.gpu.clone(),
            lifetime_s: crate::units::years_to_seconds(l.lifetime_years),
            elapsed_service_s: crate::units::years_to_seconds(l.elapsed_service_years),
        })
        .collect();
    for (i, l) in lifetimes.iter().enumerate() {
        l.validate()
            .map_err(|e| Error::Config(format!("lifetimes[{i}]: {e}")))?;
        if !gpus.contains_key(&l.gpu) {
            return Err(Error::Config(format!(
                "lifetimes[{i}].gpu: unknown gpu {:?}",
                l.gpu
            )));
        }
    }
    let link = NetworkLink {
        bandwidth_bps: raw.link.bandwidth_gbps * 1e9,
        base_latency_s: raw.link.base_latency_s,
    };
    link.validate()
        .map_err(|e| Error::Config(format!("link: {e}")))?;

    let mut applications = Vec::new();
    for (i, a) in raw.applications.iter().enumerate() {
        let app = ApplicationProfile {
            name: a.name.clone(),
            ttft_slo_s: a.ttft_slo_s,
            tpot_slo_s: a.tpot_slo_s,
            p25: a.p25,
            p50: a.p50,
            p75: a.p75,
        };
        app.validate()
            .map_err(|e| Error::Config(format!("applications[{i}] ({}): {e}", a.name)))?;
        if a.qps_grid.is_empty() || a.qps_grid.iter().any(|q| *q <= 0.0) {
            return Err(Error::Config(format!(
                "applications[{i}].qps_grid: must be non-empty and positive",
                i = i
            )));
        }
        applications.push((app, a.qps_grid.clone()));
    }

    let mut configs = Vec::new();
    for (i, c) in raw.configs.iter().enumerate() {
        let ctx = |field: &str, msg: String| {
            Error::Config(format!("configs[{i}] ({}).{field}: {msg}", c.id))
        };
        let new_gpu = gpus
            .get(&c.new_gpu)
            .cloned()
            .ok_or_else(|| ctx("new_gpu", format!("unknown gpu {:?}", c.new_gpu)))?;
        let old_gpu = match &c.old_gpu {
            Some(name) => Some(
                gpus.get(name)
                    .cloned()
                    .ok_or_else(|| ctx("old_gpu", format!("unknown gpu {name:?}")))?,
            ),
            None => None,
        };
        let target_model = models
            .get(&c.target_model)
            .cloned()
            .ok_or_else(|| ctx("target_model", format!("unknown model {:?}", c.target_model)))?;
        let draft_model = match &c.draft_model {
            Some(name) => Some(
                models
                    .get(name)
                    .cloned()
                    .ok_or_else(|| ctx("draft_model", format!("unknown model {name:?}")))?,
            ),
            None => None,
        };
        let draft_window = if c.variant.uses_speculation() {
            let k = c.draft_k.unwrap_or(crate::spec_decode::DEFAULT_DRAFT_K);
            // Under ~500M parameters a draft behaves like the small class;
            // above, like the 1B class.
            let class_default = match &draft_model {
                Some(m) if m.params < 5e8 => crate::spec_decode::DEFAULT_ACCEPTANCE_300M,
                _ => crate::spec_decode::DEFAULT_ACCEPTANCE_1B,
            };
            let rate = c.acceptance_rate.unwrap_or(class_default);
            Some(
                DraftWindow::new(k, rate)
                    .map_err(|e| ctx("draft_window", e.to_string()))?,
            )
        } else {
            None
        };
        let config = ServingConfig {
            id: c.id.clone(),
            variant: c.variant,
            new_gpu,
            old_gpu,
            target_model,
            draft_model,
            draft_window,
            max_batch: c.max_batch,
        };
        config
            .validate()
            .map_err(|e| Error::Config(format!("configs[{i}] ({}): {e}", c.id)))?;
        if configs.iter().any(|x: &ServingConfig| x.id == config.id) {
            return Err(Error::Config(format!(
                "configs[{i}]: duplicate id {}",
                c.id
            )));
        }
        configs.push(config);
    }

    if !configs.iter().any(|c| c.id == raw.default_config) {
        return Err(Error::Config(format!(
            "default_config: unknown config {:?}",
            raw.default_config
        )));
    }
    if !applications
        .iter()
        .any(|(a, _)| a.name == raw.sweeps.application)
    {
        return Err(Error::Config(format!(
            "sweeps.application: unknown application {:?}",
            raw.sweeps.application
        )));
    }
    if !(0.0..=1.0).contains(&raw.scheduler.slo_target) {
        return Err(Error::Config(format!(
            "scheduler.slo_target must be in [0, 1], got {}",
            raw.scheduler.slo_target
        )));
    }
    if raw.sim.duration_s <= 0.0 || raw.sim.duration_s.is_nan() {
        return Err(Error::Config(format!(
            "sim.duration_s must be > 0, got {}",
            raw.sim.duration_s
        )));
    }

    Ok(ExperimentPlan {
        name: raw.name,
        seed: raw.seed,
        output_dir: raw.output_dir,
        gpus,
        models,
        grids,
        default_grid,
        lifetimes,
        link,
        applications,
        configs,
        default_config: raw.default_config,
        duration_s: raw.sim.duration_s,
        percentile: raw.sim.percentile,
        disable_overlap: raw.sim.disable_overlap,
        arrival_process: raw.sim.arrival_process,
        slo_target: raw.scheduler.slo_target,
        priority: raw.scheduler.priority,
        completion: CompletionParams {
            rank: raw.scheduler.rank,
            iterations: raw.scheduler.iterations,
            tolerance: raw.scheduler.tolerance,
            ridge: raw.scheduler.ridge,
            seed: raw.seed,
        },
        sweep_carbon_intensity: raw.sweeps.carbon_intensity,
        sweep_bandwidth_gbps: raw.sweeps.bandwidth_gbps,
        sweep_lifetime_old_years: raw.sweeps.lifetime_old_years,
        sweep_lifetime_new_years: raw.sweeps.lifetime_new_years,
        sweep_application: raw.sweeps.application,
        sweep_qps: raw.sweeps.qps,
        config_hash,
    })
}
