//! Carbon accounting: embodied amortization, operational emissions, and
//! per-configuration totals.
//!
//! All carbon values are grams CO2eq. Embodied carbon of a GPU is amortized
//! over its lifetime by busy-time share; operational carbon is energy times
//! grid carbon intensity; the total is their sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One GPU type's compute, memory, power, and embodied-carbon parameters.
///
/// `embodied_carbon_g` is stored in grams; spec sheets usually quote
/// kilograms, and the config loader converts on ingest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpuSpec {
    pub name: String,
    /// VRAM capacity in GiB.
    pub vram_gib: f64,
    /// Memory bandwidth in GB/s (1e9 bytes per second).
    pub mem_bandwidth_gb_s: f64,
    /// Die area in mm^2.
    pub chip_area_mm2: f64,
    /// Board power limit in watts.
    pub max_power_w: f64,
    /// Power draw when powered on but not executing, in watts.
    pub idle_power_w: f64,
    /// Dense fp16 throughput in TFLOPS.
    pub fp16_tflops: f64,
    /// Manufacturing-attributed emissions in grams CO2eq.
    pub embodied_carbon_g: f64,
    pub release_year: u32,
    /// Fraction of peak compute throughput actually achieved.
    pub eta_compute: f64,
    /// Fraction of peak memory bandwidth actually achieved.
    pub eta_memory: f64,
}

/// Default achieved fraction of peak compute throughput.
pub const DEFAULT_ETA_COMPUTE: f64 = 0.6;
/// Default achieved fraction of peak memory bandwidth.
pub const DEFAULT_ETA_MEMORY: f64 = 0.8;
/// Default idle power as a fraction of max power.
pub const DEFAULT_IDLE_FRACTION: f64 = 0.15;

impl GpuSpec {
    /// Validate the physical invariants of the spec.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vram_gib", self.vram_gib),
            ("mem_bandwidth_gb_s", self.mem_bandwidth_gb_s),
            ("chip_area_mm2", self.chip_area_mm2),
            ("max_power_w", self.max_power_w),
            ("fp16_tflops", self.fp16_tflops),
            ("embodied_carbon_g", self.embodied_carbon_g),
            ("eta_compute", self.eta_compute),
            ("eta_memory", self.eta_memory),
        ];
        for (field, value) in positive {
            if value <= 0.0 || !value.is_finite() {
                return Err(Error::Contract(format!(
                    "gpu {}: {} must be strictly positive, got {}",
                    self.name, field, value
                )));
            }
        }
        if self.idle_power_w < 0.0 || self.idle_power_w >= self.max_power_w {
            return Err(Error::Contract(format!(
                "gpu {}: idle_power_w {} must be in [0, max_power_w = {})",
                self.name, self.idle_power_w, self.max_power_w
            )));
        }
        Ok(())
    }

    /// VRAM in bytes.
    pub fn vram_bytes(&self) -> f64 {
        self.vram_gib * crate::units::BYTES_PER_GIB
    }

    /// Memory bandwidth in bytes per second.
    pub fn mem_bandwidth_bytes_s(&self) -> f64 {
        self.mem_bandwidth_gb_s * 1e9
    }

    /// Peak fp16 throughput in FLOP/s.
    pub fn fp16_flops(&self) -> f64 {
        self.fp16_tflops * 1e12
    }
}

/// A grid region and its carbon intensity in gCO2 per kWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridProfile {
    pub region: String,
    pub carbon_intensity_g_kwh: f64,
}

impl GridProfile {
    pub fn validate(&self) -> Result<()> {
        if self.carbon_intensity_g_kwh < 0.0 || !self.carbon_intensity_g_kwh.is_finite() {
            return Err(Error::Contract(format!(
                "grid {}: carbon intensity must be finite and >= 0, got {}",
                self.region, self.carbon_intensity_g_kwh
            )));
        }
        Ok(())
    }
}

/// Lifetime assumption for one GPU, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeAssumption {
    pub gpu: String,
    pub lifetime_s: f64,
    /// Time already spent in service; informational, carried into reports.
    pub elapsed_service_s: f64,
}

/// Default GPU lifetime in years used when no override is given.
pub const DEFAULT_LIFETIME_YEARS: f64 = 7.0;

impl LifetimeAssumption {
    /// A default assumption (7-year lifetime, no elapsed service).
    pub fn default_for(gpu: &str) -> Self {
        LifetimeAssumption {
            gpu: gpu.to_string(),
            lifetime_s: crate::units::years_to_seconds(DEFAULT_LIFETIME_YEARS),
            elapsed_service_s: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lifetime_s <= 0.0 || !self.lifetime_s.is_finite() {
            return Err(Error::Contract(format!(
                "lifetime for {}: must be strictly positive, got {}",
                self.gpu, self.lifetime_s
            )));
        }
        if self.elapsed_service_s < 0.0 {
            return Err(Error::Contract(format!(
                "lifetime for {}: elapsed service must be >= 0",
                self.gpu
            )));
        }
        Ok(())
    }
}

/// Operational + embodied + total carbon for a run, with per-token figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarbonBreakdown {
    pub operational_g: f64,
    pub embodied_g: f64,
    pub total_g: f64,
    pub tokens: u64,
    pub per_token_g: f64,
}

/// Embodied carbon of `busy_time_s` seconds of execution on `gpu`, in grams.
///
/// Amortizes the GPU's total embodied carbon over its lifetime by the
/// busy-time share.
pub fn embodied_carbon(busy_time_s: f64, gpu: &GpuSpec, lt: &LifetimeAssumption) -> Result<f64> {
    if !busy_time_s.is_finite() || busy_time_s < 0.0 {
        return Err(Error::Domain(format!(
            "busy time must be finite and >= 0, got {busy_time_s}"
        )));
    }
    lt.validate()?;
    Ok(busy_time_s / lt.lifetime_s * gpu.embodied_carbon_g)
}

/// Operational carbon of `energy_kwh` consumed on `grid`, in grams.
pub fn operational_carbon(energy_kwh: f64, grid: &GridProfile) -> Result<f64> {
    if !energy_kwh.is_finite() || energy_kwh < 0.0 {
        return Err(Error::Domain(format!(
            "energy must be finite and >= 0, got {energy_kwh}"
        )));
    }
    Ok(energy_kwh * grid.carbon_intensity_g_kwh)
}

/// Total carbon for a configuration of one or more GPUs.
///
/// `busy_times_s`, `energies_kwh`, `gpus`, and `lifetimes` are parallel lists
/// with one entry per participating GPU.
pub fn total_carbon(
    busy_times_s: &[f64],
    energies_kwh: &[f64],
    gpus: &[&GpuSpec],
    lifetimes: &[&LifetimeAssumption],
    grid: &GridProfile,
    tokens: u64,
) -> Result<CarbonBreakdown> {
    let n = gpus.len();
    if busy_times_s.len() != n || energies_kwh.len() != n || lifetimes.len() != n {
        return Err(Error::Contract(format!(
            "parallel lists must have equal length: busy={} energy={} gpus={} lifetimes={}",
            busy_times_s.len(),
            energies_kwh.len(),
            n,
            lifetimes.len()
        )));
    }
    let mut operational = 0.0;
    let mut embodied = 0.0;
    for i in 0..n {
        operational += operational_carbon(energies_kwh[i], grid)?;
        embodied += embodied_carbon(busy_times_s[i], gpus[i], lifetimes[i])?;
    }
    let total = operational + embodied;
    let per_token = if tokens > 0 { total / tokens as f64 } else { 0.0 };
    Ok(CarbonBreakdown {
        operational_g: operational,
        embodied_g: embodied,
        total_g: total,
        tokens,
        per_token_g: per_token,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::years_to_seconds;

    pub(crate) fn a100() -> GpuSpec {
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
            eta_compute: DEFAULT_ETA_COMPUTE,
            eta_memory: DEFAULT_ETA_MEMORY,
        }
    }

    fn seven_years(gpu: &str) -> LifetimeAssumption {
        LifetimeAssumption {
            gpu: gpu.into(),
            lifetime_s: years_to_seconds(7.0),
            elapsed_service_s: 0.0,
        }
    }

    fn ciso() -> GridProfile {
        GridProfile {
            region: "CISO".into(),
            carbon_intensity_g_kwh: 261.0,
        }
    }

    #[test]
    fn embodied_zero_time_is_zero() {
        let g = embodied_carbon(0.0, &a100(), &seven_years("A100")).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn embodied_full_lifetime_returns_total() {
        let lt = seven_years("A100");
        let g = embodied_carbon(lt.lifetime_s, &a100(), &lt).unwrap();
        assert!((g - 26_340.0).abs() < 1e-9);
    }

    #[test]
    fn embodied_one_hour_a100_seven_years() {
        // 26_340 g * 3600 s / 220_752_000 s
        let expected = 26_340.0 * 3600.0 / 220_752_000.0;
        let g = embodied_carbon(3600.0, &a100(), &seven_years("A100")).unwrap();
        assert!((g - expected).abs() / expected < 1e-12);
        assert!((g - 0.4295).abs() < 1e-4);
    }

    #[test]
    fn embodied_rejects_negative_and_non_finite() {
        assert!(embodied_carbon(-1.0, &a100(), &seven_years("A100")).is_err());
        assert!(embodied_carbon(f64::NAN, &a100(), &seven_years("A100")).is_err());
        assert!(embodied_carbon(f64::INFINITY, &a100(), &seven_years("A100")).is_err());
    }

    #[test]
    fn operational_zero_energy_is_zero() {
        assert_eq!(operational_carbon(0.0, &ciso()).unwrap(), 0.0);
    }

    #[test]
    fn operational_one_kwh_ciso() {
        assert_eq!(operational_carbon(1.0, &ciso()).unwrap(), 261.0);
    }

    #[test]
    fn operational_half_kwh_miso() {
        let miso = GridProfile {
            region: "MISO".into(),
            carbon_intensity_g_kwh: 501.0,
        };
        assert!((operational_carbon(0.5, &miso).unwrap() - 250.5).abs() < 1e-12);
    }

    #[test]
    fn operational_rejects_negative_energy() {
        assert!(operational_carbon(-0.1, &ciso()).is_err());
    }

    #[test]
    fn total_all_zero() {
        let gpu = a100();
        let lt = seven_years("A100");
        let b = total_carbon(&[0.0], &[0.0], &[&gpu], &[&lt], &ciso(), 0).unwrap();
        assert_eq!(b.operational_g, 0.0);
        assert_eq!(b.embodied_g, 0.0);
        assert_eq!(b.total_g, 0.0);
        assert_eq!(b.per_token_g, 0.0);
    }

    #[test]
    fn total_single_a100_hour() {
        let gpu = a100();
        let lt = seven_years("A100");
        let b = total_carbon(&[3600.0], &[0.4], &[&gpu], &[&lt], &ciso(), 1000).unwrap();
        let emb = 26_340.0 * 3600.0 / 220_752_000.0;
        assert!((b.operational_g - 104.4).abs() < 1e-9);
        assert!((b.embodied_g - emb).abs() < 1e-9);
        assert_eq!(b.total_g, b.operational_g + b.embodied_g);
        assert!((b.total_g - 104.83).abs() < 5e-3);
        assert_eq!(b.per_token_g, b.total_g / 1000.0);
    }

    #[test]
    fn total_two_identical_gpus_doubles() {
        let gpu = a100();
        let lt = seven_years("A100");
        let one = total_carbon(&[3600.0], &[0.4], &[&gpu], &[&lt], &ciso(), 0).unwrap();
        let two = total_carbon(
            &[3600.0, 3600.0],
            &[0.4, 0.4],
            &[&gpu, &gpu],
            &[&lt, &lt],
            &ciso(),
            0,
        )
        .unwrap();
        assert!((two.total_g - 2.0 * one.total_g).abs() < 1e-12);
    }

    #[test]
    fn total_rejects_length_mismatch() {
        let gpu = a100();
        let lt = seven_years("A100");
        assert!(total_carbon(&[1.0, 2.0], &[0.1], &[&gpu], &[&lt], &ciso(), 0).is_err());
    }

    #[test]
    fn embodied_is_linear_in_time() {
        let gpu = a100();
        let lt = seven_years("A100");
        let mut rng = 0x12345u64;
        for _ in 0..200 {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = (rng >> 33) as f64 / 4e6;
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let b = (rng >> 33) as f64 / 4e6;
            let whole = embodied_carbon(a + b, &gpu, &lt).unwrap();
            let split =
                embodied_carbon(a, &gpu, &lt).unwrap() + embodied_carbon(b, &gpu, &lt).unwrap();
            assert!((whole - split).abs() <= 1e-12 * whole.max(1.0));
        }
    }

    #[test]
    fn total_monotone_in_each_argument() {
        let gpu = a100();
        let lt = seven_years("A100");
        let grid = ciso();
        let base = total_carbon(&[100.0], &[0.2], &[&gpu], &[&lt], &grid, 0)
            .unwrap()
            .total_g;

        let more_busy = total_carbon(&[150.0], &[0.2], &[&gpu], &[&lt], &grid, 0)
            .unwrap()
            .total_g;
        assert!(more_busy >= base);

        let more_energy = total_carbon(&[100.0], &[0.3], &[&gpu], &[&lt], &grid, 0)
            .unwrap()
            .total_g;
        assert!(more_energy >= base);

        let hotter_grid = GridProfile {
            region: "X".into(),
            carbon_intensity_g_kwh: 400.0,
        };
        let more_ci = total_carbon(&[100.0], &[0.2], &[&gpu], &[&lt], &hotter_grid, 0)
            .unwrap()
            .total_g;
        assert!(more_ci >= base);

        let mut heavier = gpu.clone();
        heavier.embodied_carbon_g *= 2.0;
        let more_embodied = total_carbon(&[100.0], &[0.2], &[&heavier], &[&lt], &grid, 0)
            .unwrap()
            .total_g;
        assert!(more_embodied >= base);

        let shorter = LifetimeAssumption {
            gpu: "A100".into(),
            lifetime_s: lt.lifetime_s / 2.0,
            elapsed_service_s: 0.0,
        };
        let shorter_life = total_carbon(&[100.0], &[0.2], &[&gpu], &[&shorter], &grid, 0)
            .unwrap()
            .total_g;
        assert!(shorter_life >= base);
    }

    #[test]
    fn gpu_spec_validation() {
        let mut bad = a100();
        bad.idle_power_w = 500.0;
        assert!(bad.validate().is_err());
        let mut bad2 = a100();
        bad2.embodied_carbon_g = 0.0;
        assert!(bad2.validate().is_err());
        assert!(a100().validate().is_ok());
    }
}
