//! SLO-aware configuration scheduler.
//!
//! Profiled carbon and SLO-attainment numbers form two matrices over
//! (application, qps) rows and configuration columns. Missing entries are
//! filled by low-rank alternating least squares; selection then picks the
//! minimum-carbon configuration whose predicted SLO attainment meets the
//! target, with a fallback when nothing qualifies.

use serde::{Deserialize, Serialize};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// One workload row: an application at a query rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadKey {
    pub application_id: String,
    pub qps: f64,
}

/// Carbon and SLO-attainment matrices over workloads x configurations,
/// with a shared observation mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfMatrices {
    pub rows: Vec<WorkloadKey>,
    pub cols: Vec<String>,
    /// gCO2 per token; `f64::INFINITY` marks a profiled-infeasible cell.
    pub carbon: Vec<Vec<f64>>,
    /// Fraction of requests meeting both SLOs, in [0, 1].
    pub slo_att: Vec<Vec<f64>>,
    pub observed: Vec<Vec<bool>>,
}

impl PerfMatrices {
    pub fn validate(&self) -> Result<()> {
        let r = self.rows.len();
        let c = self.cols.len();
        for m in [&self.carbon, &self.slo_att] {
            if m.len() != r || m.iter().any(|row| row.len() != c) {
                return Err(Error::Contract("matrix shape must be rows x cols".into()));
            }
        }
        if self.observed.len() != r || self.observed.iter().any(|row| row.len() != c) {
            return Err(Error::Contract("mask shape must be rows x cols".into()));
        }
        for i in 0..r {
            for j in 0..c {
                if self.observed[i][j] {
                    let s = self.slo_att[i][j];
                    if !(0.0..=1.0).contains(&s) {
                        return Err(Error::Contract(format!(
                            "slo_att[{i}][{j}] = {s} outside [0, 1]"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn row_index(&self, workload: &WorkloadKey) -> Result<usize> {
        self.rows
            .iter()
            .position(|k| k.application_id == workload.application_id && k.qps == workload.qps)
            .ok_or_else(|| {
                Error::Lookup(format!(
                    "unknown workload ({}, {})",
                    workload.application_id, workload.qps
                ))
            })
    }

    pub fn col_index(&self, config_id: &str) -> Result<usize> {
        self.cols
            .iter()
            .position(|c| c == config_id)
            .ok_or_else(|| Error::Lookup(format!("unknown configuration {config_id}")))
    }

    pub fn fully_observed(&self) -> bool {
        self.observed.iter().all(|row| row.iter().all(|&o| o))
    }
}

/// Alternating-least-squares completion parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub rank: usize,
    pub iterations: usize,
    pub tolerance: f64,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for CompletionParams {
    fn default() -> Self {
        CompletionParams {
            rank: 2,
            iterations: 200,
            tolerance: 1e-8,
            ridge: 0.1,
            seed: 0,
        }
    }
}

/// Scheduling priority when no configuration meets the SLO target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Priority {
    /// Fall back to the configuration with the highest predicted attainment.
    Slo,
    /// Fall back to the designated default configuration.
    Default,
}

/// A workload plus its SLO target and fallback priority.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulingRequest {
    pub workload: WorkloadKey,
    pub slo_target: f64,
    pub priority: Priority,
}

impl SchedulingRequest {
    pub fn validate(&self) -> Result<()> {
        // Zero is the degenerate target under which every profiled
        // configuration is feasible.
        if !(0.0..=1.0).contains(&self.slo_target) {
            return Err(Error::Contract(format!(
                "slo_target must be in [0, 1], got {}",
                self.slo_target
            )));
        }
        Ok(())
    }
}

/// The chosen configuration for one workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulingDecision {
    pub config_id: String,
    pub predicted_carbon_g: f64,
    pub predicted_slo_att: f64,
    pub via_fallback: bool,
}

/// Fill missing entries of both matrices by rank-constrained ALS.
///
/// Observed entries are preserved verbatim (including infeasibility
/// sentinels); non-finite observations are excluded from the factor fit.
/// Completed SLO attainment is clamped to [0, 1] and completed carbon to
/// >= 0. Deterministic for a fixed `params.seed`.
pub fn complete_matrices(m: &PerfMatrices, params: &CompletionParams) -> Result<PerfMatrices> {
    m.validate()?;
    let rows = m.rows.len();
    let cols = m.cols.len();
    if rows == 0 || cols == 0 {
        return Err(Error::Completion("matrices must be non-empty".into()));
    }
    if params.rank == 0 || params.rank > rows.min(cols) {
        return Err(Error::Completion(format!(
            "rank {} must be in 1..=min(rows, cols) = {}",
            params.rank,
            rows.min(cols)
        )));
    }
    for i in 0..rows {
        if m.observed[i].iter().all(|&o| !o) {
            return Err(Error::Completion(format!(
                "row ({}, {}) has no observed entry",
                m.rows[i].application_id, m.rows[i].qps
            )));
        }
    }
    for j in 0..cols {
        if (0..rows).all(|i| !m.observed[i][j]) {
            return Err(Error::Completion(format!(
                "column {} has no observed entry",
                m.cols[j]
            )));
        }
    }
    if m.fully_observed() {
        return Ok(m.clone());
    }

    let carbon = complete_one(&m.carbon, &m.observed, params, 0)?;
    let slo = complete_one(&m.slo_att, &m.observed, params, 1)?;

    let mut out = m.clone();
    for i in 0..rows {
        for j in 0..cols {
            if !m.observed[i][j] {
                out.carbon[i][j] = carbon[i][j].max(0.0);
                out.slo_att[i][j] = slo[i][j].clamp(0.0, 1.0);
                out.observed[i][j] = true;
            }
        }
    }
    Ok(out)
}

/// Seeded restarts per completion. ALS occasionally lands in an exact-fit
/// basin with inflated factor norms; restarts plus penalized-objective
/// selection pick the well-behaved solution.
const ALS_RESTARTS: u64 = 5;

/// ALS on one matrix. `salt` decorrelates the factor init between the two
/// matrices sharing a seed.
fn complete_one(
    values: &[Vec<f64>],
    observed: &[Vec<bool>],
    params: &CompletionParams,
    salt: u64,
) -> Result<Vec<Vec<f64>>> {
    let rows = values.len();
    let cols = values[0].len();
    let rank = params.rank;

    // A cell participates in the fit only when observed and finite.
    let fit = |i: usize, j: usize| observed[i][j] && values[i][j].is_finite();

    let scale = {
        let mut sum = 0.0;
        let mut n = 0u64;
        for i in 0..rows {
            for j in 0..cols {
                if fit(i, j) {
                    sum += values[i][j].abs();
                    n += 1;
                }
            }
        }
        if n == 0 {
            0.0
        } else {
            (sum / n as f64).max(1e-12)
        }
    };

    // (objective, factor norms, factors)
    let mut best: Option<(f64, f64, Factors)> = None;
    for restart in 0..ALS_RESTARTS {
        let init_seed = crate::units::derive_seed(params.seed, salt * ALS_RESTARTS + restart);
        let (u, v) = als_fit(values, params, scale, init_seed, &fit)?;
        let mut sse = 0.0;
        for i in 0..rows {
            for j in 0..cols {
                if fit(i, j) {
                    let pred: f64 = (0..rank).map(|r| u[i][r] * v[j][r]).sum();
                    sse += (values[i][j] - pred).powi(2);
                }
            }
        }
        let norms: f64 = u.iter().chain(v.iter()).flatten().map(|x| x * x).sum();
        let objective = sse + params.ridge * norms;
        // Near-tied objectives (e.g. several exact-fit basins at ridge 0)
        // resolve toward the smallest factor norm.
        let obj_tol = 1e-9 * scale * scale;
        let better = match &best {
            None => true,
            Some((obj, nrm, _)) => {
                objective < obj - obj_tol
                    || ((objective - obj).abs() <= obj_tol && norms < *nrm)
            }
        };
        if better {
            best = Some((objective, norms, (u, v)));
        }
    }
    let (_, _, (u, v)) = best.expect("at least one restart ran");

    let mut out = vec![vec![0.0; cols]; rows];
    for i in 0..rows {
        for j in 0..cols {
            out[i][j] = (0..rank).map(|r| u[i][r] * v[j][r]).sum();
        }
    }
    Ok(out)
}

type Factors = (Vec<Vec<f64>>, Vec<Vec<f64>>);

fn als_fit(
    values: &[Vec<f64>],
    params: &CompletionParams,
    scale: f64,
    init_seed: u64,
    fit: &dyn Fn(usize, usize) -> bool,
) -> Result<Factors> {
    let rows = values.len();
    let cols = values[0].len();
    let rank = params.rank;
    let mut rng = ChaCha8Rng::seed_from_u64(init_seed);

    let mut u: Vec<Vec<f64>> = (0..rows)
        .map(|_| (0..rank).map(|_| (rng.gen::<f64>() + 0.1) * scale.sqrt()).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|_| (0..rank).map(|_| (rng.gen::<f64>() + 0.1) * scale.sqrt()).collect())
        .collect();

    let rmse = |u: &[Vec<f64>], v: &[Vec<f64>]| {
        let mut err = 0.0;
        let mut n = 0u64;
        for i in 0..rows {
            for j in 0..cols {
                if fit(i, j) {
                    let pred: f64 = (0..rank).map(|r| u[i][r] * v[j][r]).sum();
                    err += (values[i][j] - pred).powi(2);
                    n += 1;
                }
            }
        }
        (err / n.max(1) as f64).sqrt()
    };

    let mut prev = f64::INFINITY;
    for _ in 0..params.iterations {
        // Fix V, solve each row of U; then fix U, solve each row of V.
        for i in 0..rows {
            let obs: Vec<usize> = (0..cols).filter(|&j| fit(i, j)).collect();
            if obs.is_empty() {
                continue;
            }
            let x: Vec<&[f64]> = obs.iter().map(|&j| v[j].as_slice()).collect();
            let y: Vec<f64> = obs.iter().map(|&j| values[i][j]).collect();
            u[i] = ridge_solve(&x, &y, params.ridge)?;
        }
        for j in 0..cols {
            let obs: Vec<usize> = (0..rows).filter(|&i| fit(i, j)).collect();
            if obs.is_empty() {
                continue;
            }
            let x: Vec<&[f64]> = obs.iter().map(|&i| u[i].as_slice()).collect();
            let y: Vec<f64> = obs.iter().map(|&i| values[i][j]).collect();
            v[j] = ridge_solve(&x, &y, params.ridge)?;
        }
        let err = rmse(&u, &v);
        // Geometric convergence never moves by a fixed fraction of the
        // (vanishing) error itself, so the stopping rule compares the
        // per-iteration change against the data scale.
        if (prev - err).abs() <= params.tolerance * scale.max(1e-300) {
            break;
        }
        prev = err;
    }
    Ok((u, v))
}

/// Solve (X^T X + ridge I) w = X^T y for w, where X rows are factor vectors.
fn ridge_solve(x: &[&[f64]], y: &[f64], ridge: f64) -> Result<Vec<f64>> {
    let rank = x[0].len();
    let mut a = vec![vec![0.0; rank]; rank];
    let mut b = vec![0.0; rank];
    for (row, &target) in x.iter().zip(y) {
        for p in 0..rank {
            b[p] += row[p] * target;
            for q in 0..rank {
                a[p][q] += row[p] * row[q];
            }
        }
    }
    for (p, row) in a.iter_mut().enumerate() {
        row[p] += ridge;
    }
    solve_dense(a, b)
}

/// Gaussian elimination with partial pivoting; systems here are rank x rank.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .expect("non-empty range");
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::Completion(
                "singular normal matrix in least-squares solve".into(),
            ));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        #[allow(clippy::needless_range_loop)]
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut s = b[col];
        for k in col + 1..n {
            s -= a[col][k] * x[k];
        }
        x[col] = s / a[col][col];
    }
    Ok(x)
}

/// Pick the minimum-carbon configuration meeting the SLO target for a
/// workload; delegate to `fallback` when none qualifies.
///
/// Ties on carbon prefer higher attainment, then the lower column ordinal.
pub fn select_config(
    m: &PerfMatrices,
    req: &SchedulingRequest,
    default_config: &str,
) -> Result<SchedulingDecision> {
    req.validate()?;
    m.validate()?;
    let row = m.row_index(&req.workload)?;
    let mut best: Option<usize> = None;
    for j in 0..m.cols.len() {
        if m.slo_att[row][j] < req.slo_target {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => {
                let (cb, sb) = (m.carbon[row][b], m.slo_att[row][b]);
                let (cj, sj) = (m.carbon[row][j], m.slo_att[row][j]);
                cj < cb || (cj == cb && sj > sb)
            }
        };
        if better {
            best = Some(j);
        }
    }
    match best {
        Some(j) => Ok(SchedulingDecision {
            config_id: m.cols[j].clone(),
            predicted_carbon_g: m.carbon[row][j],
            predicted_slo_att: m.slo_att[row][j],
            via_fallback: false,
        }),
        None => fallback(m, row, req.priority, default_config),
    }
}

/// Fallback when the feasible set is empty: highest attainment for
/// `Priority::Slo` (ties prefer lower carbon, then ordinal), or the
/// designated default configuration for `Priority::Default`.
pub fn fallback(
    m: &PerfMatrices,
    row: usize,
    priority: Priority,
    default_config: &str,
) -> Result<SchedulingDecision> {
    let j = match priority {
        Priority::Slo => {
            let mut best = 0usize;
            for j in 1..m.cols.len() {
                let (cb, sb) = (m.carbon[row][best], m.slo_att[row][best]);
                let (cj, sj) = (m.carbon[row][j], m.slo_att[row][j]);
                if sj > sb || (sj == sb && cj < cb) {
                    best = j;
                }
            }
            best
        }
        Priority::Default => m.col_index(default_config)?,
    };
    Ok(SchedulingDecision {
        config_id: m.cols[j].clone(),
        predicted_carbon_g: m.carbon[row][j],
        predicted_slo_att: m.slo_att[row][j],
        via_fallback: true,
    })
}
