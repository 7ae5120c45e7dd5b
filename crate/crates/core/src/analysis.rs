//! Closed-form carbon-efficiency comparison of standalone serving on a new
//! GPU against disaggregated serving on a new plus an old GPU.
//!
//! Notation: the standalone case consumes energy `n_a` (kWh) on GPU A with
//! embodied share `e_a` (g); the disaggregated case consumes `n_a_prime` on
//! A plus `n_b` on B with embodied shares `e_a_prime` and `e_b`; `alpha` is
//! the grid carbon intensity (g/kWh). Energy is written N and embodied E
//! throughout to keep the two families of symbols apart.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Energy and embodied-carbon parameters of the standalone/disaggregated
/// comparison at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseParams {
    /// Standalone energy on the new GPU, kWh.
    pub n_a: f64,
    /// Disaggregated energy on the new GPU, kWh.
    pub n_a_prime: f64,
    /// Disaggregated energy on the old GPU, kWh.
    pub n_b: f64,
    /// Standalone embodied carbon on the new GPU, g.
    pub e_a: f64,
    /// Disaggregated embodied carbon on the new GPU, g.
    pub e_a_prime: f64,
    /// Disaggregated embodied carbon on the old GPU, g.
    pub e_b: f64,
    /// Grid carbon intensity, g/kWh.
    pub alpha: f64,
}

impl CaseParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("n_a", self.n_a),
            ("n_a_prime", self.n_a_prime),
            ("n_b", self.n_b),
            ("e_a", self.e_a),
            ("e_a_prime", self.e_a_prime),
            ("e_b", self.e_b),
            ("alpha", self.alpha),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Contract(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Execution times, lifetimes, and total embodied carbon needed to rebuild
/// the embodied shares as lifetimes vary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeParams {
    /// New-GPU busy time in the disaggregated case, s.
    pub t_a_prime_s: f64,
    /// New-GPU busy time standalone, s.
    pub t_a_s: f64,
    /// Old-GPU busy time in the disaggregated case, s.
    pub t_b_s: f64,
    /// New-GPU lifetime, s.
    pub big_t_a_s: f64,
    /// Old-GPU lifetime, s.
    pub big_t_b_s: f64,
    /// Total embodied carbon of the new GPU, g.
    pub cal_a_g: f64,
    /// Total embodied carbon of the old GPU, g.
    pub cal_b_g: f64,
    pub n_a: f64,
    pub n_a_prime: f64,
    pub n_b: f64,
    pub alpha: f64,
}

impl LifetimeParams {
    pub fn validate(&self) -> Result<()> {
        if self.big_t_a_s <= 0.0 || self.big_t_b_s <= 0.0 {
            return Err(Error::Contract("lifetimes must be strictly positive".into()));
        }
        for (name, v) in [
            ("t_a_prime_s", self.t_a_prime_s),
            ("t_a_s", self.t_a_s),
            ("t_b_s", self.t_b_s),
            ("cal_a_g", self.cal_a_g),
            ("cal_b_g", self.cal_b_g),
            ("n_a", self.n_a),
            ("n_a_prime", self.n_a_prime),
            ("n_b", self.n_b),
            ("alpha", self.alpha),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::Contract(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// The exact comparison parameters at lifetimes (big_t_a, big_t_b).
    pub fn case_at(&self, big_t_a_s: f64, big_t_b_s: f64) -> CaseParams {
        CaseParams {
            n_a: self.n_a,
            n_a_prime: self.n_a_prime,
            n_b: self.n_b,
            e_a: self.t_a_s / big_t_a_s * self.cal_a_g,
            e_a_prime: self.t_a_prime_s / big_t_a_s * self.cal_a_g,
            e_b: self.t_b_s / big_t_b_s * self.cal_b_g,
            alpha: self.alpha,
        }
    }
}

/// True iff the disaggregated side consumes strictly less energy than the
/// standalone side — the necessary condition for carbon savings when
/// disaggregation adds embodied carbon.
pub fn savings_condition(p: &CaseParams) -> bool {
    p.n_a > p.n_a_prime + p.n_b
}

/// Result of the exact carbon comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SavingsRatio {
    /// Disaggregated total carbon over standalone total carbon.
    pub ratio: f64,
    /// `1 - ratio`; negative when disaggregation emits more.
    pub savings: f64,
}

/// Exact total-carbon ratio of disaggregated to standalone serving:
/// `((n_a' + n_b) alpha + e_a' + e_b) / (n_a alpha + e_a)`.
pub fn savings_ratio(p: &CaseParams) -> Result<SavingsRatio> {
    p.validate()?;
    let denominator = p.n_a * p.alpha + p.e_a;
    if denominator <= 0.0 {
        return Err(Error::Domain(
            "standalone carbon must be strictly positive".into(),
        ));
    }
    let ratio = ((p.n_a_prime + p.n_b) * p.alpha + p.e_a_prime + p.e_b) / denominator;
    Ok(SavingsRatio {
        ratio,
        savings: 1.0 - ratio,
    })
}

/// Savings evaluated at each carbon intensity in `alphas` (sorted ascending).
pub fn ci_sensitivity(p: &CaseParams, alphas: &[f64]) -> Result<Vec<(f64, SavingsRatio)>> {
    if alphas.windows(2).any(|w| w[1] < w[0]) || alphas.iter().any(|a| *a < 0.0) {
        return Err(Error::Contract(
            "alphas must be sorted ascending and >= 0".into(),
        ));
    }
    alphas
        .iter()
        .map(|&alpha| {
            let q = CaseParams { alpha, ..*p };
            savings_ratio(&q).map(|s| (alpha, s))
        })
        .collect()
}

/// One point of the lifetime-sensitivity surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimePoint {
    pub big_t_a_s: f64,
    pub big_t_b_s: f64,
    pub savings_exact: f64,
    /// The dominant lifetime-dependent term of the simplified ratio:
    /// `(t_b / T_B * cal_b) / (n_a alpha + t_a' / T_A * cal_a)`. Reported
    /// alongside the exact value, never instead of it: the simplification
    /// drops constant terms and is an approximation by construction.
    pub approx_term: f64,
}

/// Exact savings over a lifetime grid, with the simplified variable term
/// reported per point.
pub fn lifetime_sensitivity(
    p: &LifetimeParams,
    big_t_a_grid_s: &[f64],
    big_t_b_grid_s: &[f64],
) -> Result<Vec<LifetimePoint>> {
    p.validate()?;
    if big_t_a_grid_s.iter().chain(big_t_b_grid_s).any(|&t| t <= 0.0) {
        return Err(Error::Contract("lifetime grids must be positive".into()));
    }
    let mut out = Vec::with_capacity(big_t_a_grid_s.len() * big_t_b_grid_s.len());
    for &ta in big_t_a_grid_s {
        for &tb in big_t_b_grid_s {
            let case = p.case_at(ta, tb);
            let exact = savings_ratio(&case)?;
            let approx_term = (p.t_b_s / tb * p.cal_b_g)
                / (p.n_a * p.alpha + p.t_a_prime_s / ta * p.cal_a_g);
            out.push(LifetimePoint {
                big_t_a_s: ta,
                big_t_b_s: tb,
                savings_exact: exact.savings,
                approx_term,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carbon::{total_carbon, GpuSpec, GridProfile, LifetimeAssumption};
    use crate::units::years_to_seconds;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn base() -> CaseParams {
        CaseParams {
            n_a: 1.0,
            n_a_prime: 0.4,
            n_b: 0.3,
            e_a: 0.5,
            e_a_prime: 0.45,
            e_b: 0.35,
            alpha: 261.0,
        }
    }

    #[test]
    fn condition_examples() {
        let mut p = base();
        assert!(savings_condition(&p));
        p.n_a_prime = 0.6;
        p.n_b = 0.5;
        assert!(!savings_condition(&p));
        // Equality is not savings: the boundary is strict.
        p.n_a_prime = 0.6;
        p.n_b = 0.4;
        assert!(!savings_condition(&p));
    }

    #[test]
    fn ratio_identity_case() {
        // Old GPU contributes nothing and the new side is unchanged.
        let p = CaseParams {
            n_a: 1.0,
            n_a_prime: 1.0,
            n_b: 0.0,
            e_a: 0.5,
            e_a_prime: 0.5,
            e_b: 0.0,
            alpha: 261.0,
        };
        let s = savings_ratio(&p).unwrap();
        assert!((s.ratio - 1.0).abs() < 1e-15);
        assert!(s.savings.abs() < 1e-15);
    }

    #[test]
    fn ratio_hand_arithmetic() {
        let p = CaseParams {
            n_a: 1.0,
            n_a_prime: 0.5,
            n_b: 0.2,
            e_a: 0.5,
            e_a_prime: 0.45,
            e_b: 0.35,
            alpha: 261.0,
        };
        // (0.7 * 261 + 0.8) / (261 + 0.5) = 183.5 / 261.5
        let s = savings_ratio(&p).unwrap();
        assert!((s.ratio - 183.5 / 261.5).abs() < 1e-12);
        assert!((s.ratio - 0.7017).abs() < 1e-4);
        assert!((s.savings - 0.298).abs() < 2e-3);
    }

    #[test]
    fn ratio_zero_alpha_is_pure_embodied() {
        let mut p = base();
        p.alpha = 0.0;
        let s = savings_ratio(&p).unwrap();
        assert!((s.ratio - (p.e_a_prime + p.e_b) / p.e_a).abs() < 1e-15);
    }

    #[test]
    fn ratio_rejects_zero_denominator() {
        let p = CaseParams {
            n_a: 0.0,
            n_a_prime: 0.0,
            n_b: 0.0,
            e_a: 0.0,
            e_a_prime: 0.0,
            e_b: 0.0,
            alpha: 0.0,
        };
        assert!(savings_ratio(&p).is_err());
    }

    #[test]
    fn ci_sensitivity_increasing_with_diminishing_increments() {
        // Energy saved, embodied added: savings rise with intensity, and the
        // increments shrink (the ratio is a Moebius function of alpha).
        let p = CaseParams {
            n_a: 1.0,
            n_a_prime: 0.4,
            n_b: 0.3,
            e_a: 0.5,
            e_a_prime: 0.5,
            e_b: 0.4,
            alpha: 0.0,
        };
        let points = ci_sensitivity(&p, &[17.0, 261.0, 501.0]).unwrap();
        assert!(points[0].1.savings < points[1].1.savings);
        assert!(points[1].1.savings < points[2].1.savings);
        let d1 = points[1].1.savings - points[0].1.savings;
        let d2 = points[2].1.savings - points[1].1.savings;
        let per_alpha_1 = d1 / (261.0 - 17.0);
        let per_alpha_2 = d2 / (501.0 - 261.0);
        assert!(per_alpha_2 < per_alpha_1, "increments must diminish");

        let single = ci_sensitivity(&p, &[261.0]).unwrap();
        let direct = savings_ratio(&CaseParams { alpha: 261.0, ..p }).unwrap();
        assert_eq!(single[0].1, direct);

        assert!(ci_sensitivity(&p, &[501.0, 261.0]).is_err());
    }

    fn lifetime_base() -> LifetimeParams {
        LifetimeParams {
            t_a_prime_s: 2000.0,
            t_a_s: 6000.0,
            t_b_s: 9000.0,
            big_t_a_s: years_to_seconds(7.0),
            big_t_b_s: years_to_seconds(7.0),
            cal_a_g: 26_340.0,
            cal_b_g: 10_300.0,
            n_a: 0.6,
            n_a_prime: 0.3,
            n_b: 0.1,
            alpha: 261.0,
        }
    }

    #[test]
    fn lifetime_doubling_old_lifetime_increases_savings() {
        let p = lifetime_base();
        let tb = p.big_t_b_s;
        let pts = lifetime_sensitivity(&p, &[p.big_t_a_s], &[tb, 2.0 * tb]).unwrap();
        assert!(pts[1].savings_exact > pts[0].savings_exact);
    }

    #[test]
    fn lifetime_halving_new_lifetime_increases_savings() {
        let p = lifetime_base();
        let ta = p.big_t_a_s;
        let pts = lifetime_sensitivity(&p, &[ta, ta / 2.0], &[p.big_t_b_s]).unwrap();
        assert!(pts[1].savings_exact > pts[0].savings_exact);
    }

    #[test]
    fn lifetime_zero_old_time_flat_in_old_lifetime() {
        let mut p = lifetime_base();
        p.t_b_s = 0.0;
        let tb = p.big_t_b_s;
        let pts = lifetime_sensitivity(&p, &[p.big_t_a_s], &[tb, 2.0 * tb, 3.0 * tb]).unwrap();
        for pt in &pts {
            assert_eq!(pt.approx_term, 0.0);
        }
        assert!((pts[0].savings_exact - pts[1].savings_exact).abs() < 1e-15);
        assert!((pts[1].savings_exact - pts[2].savings_exact).abs() < 1e-15);
    }

    #[test]
    fn savings_strictly_increasing_in_alpha_under_stated_conditions() {
        // Draws satisfying (energy saved) and (embodied added) must show
        // strictly increasing savings in alpha.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        while checked < 1000 {
            let n_a = rng.gen::<f64>() + 0.5;
            let n_a_prime = rng.gen::<f64>() * n_a * 0.8;
            let n_b = rng.gen::<f64>() * (n_a - n_a_prime) * 0.9;
            let e_a = rng.gen::<f64>() + 0.1;
            let e_a_prime = e_a * (0.5 + rng.gen::<f64>() * 0.5);
            let e_b = e_a - e_a_prime + rng.gen::<f64>() + 0.05;
            let p = CaseParams {
                n_a,
                n_a_prime,
                n_b,
                e_a,
                e_a_prime,
                e_b,
                alpha: 0.0,
            };
            if !(savings_condition(&p) && e_a_prime + e_b > e_a) {
                continue;
            }
            let mut prev = f64::NEG_INFINITY;
            for alpha in [0.0, 17.0, 100.0, 261.0, 501.0, 1000.0] {
                let s = savings_ratio(&CaseParams { alpha, ..p }).unwrap();
                assert!(
                    s.savings > prev,
                    "savings not strictly increasing at alpha {alpha}"
                );
                prev = s.savings;
            }
            checked += 1;
        }
    }

    #[test]
    fn ratio_agrees_with_carbon_ledger_composition() {
        // Building both cases through the accounting path and dividing must
        // reproduce the closed form to 1e-12 relative.
        let a100 = GpuSpec {
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
        };
        let t4 = GpuSpec {
            name: "T4".into(),
            vram_gib: 16.0,
            mem_bandwidth_gb_s: 320.0,
            chip_area_mm2: 545.0,
            max_power_w: 70.0,
            idle_power_w: 10.5,
            fp16_tflops: 65.0,
            embodied_carbon_g: 10_300.0,
            release_year: 2018,
            eta_compute: 0.6,
            eta_memory: 0.8,
        };
        let lt_a = LifetimeAssumption {
            gpu: "A100".into(),
            lifetime_s: years_to_seconds(7.0),
            elapsed_service_s: 0.0,
        };
        let lt_b = LifetimeAssumption {
            gpu: "T4".into(),
            lifetime_s: years_to_seconds(5.0),
            elapsed_service_s: 0.0,
        };
        let grid = GridProfile {
            region: "CISO".into(),
            carbon_intensity_g_kwh: 261.0,
        };

        let (t_a, n_a) = (5000.0, 0.7);
        let (t_a_prime, n_a_prime) = (1500.0, 0.25);
        let (t_b, n_b) = (8000.0, 0.15);

        let standalone = total_carbon(&[t_a], &[n_a], &[&a100], &[&lt_a], &grid, 0).unwrap();
        let disagg = total_carbon(
            &[t_a_prime, t_b],
            &[n_a_prime, n_b],
            &[&a100, &t4],
            &[&lt_a, &lt_b],
            &grid,
            0,
        )
        .unwrap();
        let composed = disagg.total_g / standalone.total_g;

        let p = CaseParams {
            n_a,
            n_a_prime,
            n_b,
            e_a: t_a / lt_a.lifetime_s * a100.embodied_carbon_g,
            e_a_prime: t_a_prime / lt_a.lifetime_s * a100.embodied_carbon_g,
            e_b: t_b / lt_b.lifetime_s * t4.embodied_carbon_g,
            alpha: 261.0,
        };
        let closed = savings_ratio(&p).unwrap().ratio;
        assert!((composed - closed).abs() / closed < 1e-12);
    }

    #[test]
    fn lifetime_surface_monotone_over_grids() {
        // Over 2-7 year new-GPU and 5-10 year old-GPU grids: savings
        // non-decreasing in the old lifetime, non-increasing in the new.
        let p = lifetime_base();
        let ta_grid: Vec<f64> = (2..=7).map(|y| years_to_seconds(y as f64)).collect();
        let tb_grid: Vec<f64> = (5..=10).map(|y| years_to_seconds(y as f64)).collect();
        let pts = lifetime_sensitivity(&p, &ta_grid, &tb_grid).unwrap();
        let at = |i: usize, j: usize| pts[i * tb_grid.len() + j].savings_exact;
        for i in 0..ta_grid.len() {
            for j in 1..tb_grid.len() {
                assert!(at(i, j) >= at(i, j - 1) - 1e-15);
            }
        }
        for j in 0..tb_grid.len() {
            for i in 1..ta_grid.len() {
                assert!(at(i, j) <= at(i - 1, j) + 1e-15);
            }
        }
    }
}
