//! Seeded request-trace generation matching per-application size statistics
//! and latency SLOs.
//!
//! Each run uses fixed (input, output) token counts taken from one of the
//! application's size percentiles, so latency and carbon are comparable
//! across requests; only arrival times are random.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Request size percentile selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizePercentile {
    P25,
    P50,
    P75,
}

impl SizePercentile {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "p25" => Ok(SizePercentile::P25),
            "p50" => Ok(SizePercentile::P50),
            "p75" => Ok(SizePercentile::P75),
            other => Err(Error::Lookup(format!("unknown percentile {other:?}"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SizePercentile::P25 => "p25",
            SizePercentile::P50 => "p50",
            SizePercentile::P75 => "p75",
        }
    }
}

/// One application's SLOs and request-size percentiles.
///
/// Percentile entries are (input_tokens, output_tokens) pairs and must be
/// non-decreasing in the percentile for both coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApplicationProfile {
    pub name: String,
    pub ttft_slo_s: f64,
    pub tpot_slo_s: f64,
    pub p25: (u64, u64),
    pub p50: (u64, u64),
    pub p75: (u64, u64),
}

impl ApplicationProfile {
    pub fn validate(&self) -> Result<()> {
        if self.ttft_slo_s <= 0.0 || self.tpot_slo_s <= 0.0 {
            return Err(Error::Contract(format!(
                "application {}: SLOs must be strictly positive",
                self.name
            )));
        }
        let ps = [self.p25, self.p50, self.p75];
        for pair in ps {
            if pair.0 < 1 || pair.1 < 1 {
                return Err(Error::Contract(format!(
                    "application {}: token counts must be >= 1",
                    self.name
                )));
            }
        }
        for w in ps.windows(2) {
            if w[1].0 < w[0].0 || w[1].1 < w[0].1 {
                return Err(Error::Contract(format!(
                    "application {}: percentile sizes must be non-decreasing",
                    self.name
                )));
            }
        }
        Ok(())
    }

    /// The configured (input_tokens, output_tokens) pair for a percentile.
    pub fn percentile_size(&self, p: SizePercentile) -> (u64, u64) {
        match p {
            SizePercentile::P25 => self.p25,
            SizePercentile::P50 => self.p50,
            SizePercentile::P75 => self.p75,
        }
    }
}

/// One request in a trace. Arrival is seconds from trace start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub arrival_s: f64,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

/// Arrival process for trace generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalProcess {
    /// Open-loop Poisson arrivals at the labelled rate.
    Poisson,
    /// Deterministic arrivals every 1/qps seconds.
    DeterministicInterval,
}

/// A seeded arrival stream with fixed per-request token counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub requests: Vec<Request>,
    pub qps_label: f64,
    pub seed: u64,
    pub duration_s: f64,
}

pub const TRACE_HEADER: [&str; 4] = ["id", "arrival_s", "input_tokens", "output_tokens"];

impl Trace {
    /// Render the request stream as CSV rows under the standard header.
    pub fn to_csv(&self, meta: &crate::csvio::CsvMeta) -> String {
        let mut w = crate::csvio::CsvWriter::new(meta, &TRACE_HEADER);
        for r in &self.requests {
            w.row(&[
                r.id.to_string(),
                crate::csvio::fmt_f64(r.arrival_s),
                r.input_tokens.to_string(),
                r.output_tokens.to_string(),
            ]);
        }
        w.finish()
    }

    /// Parse a trace back from CSV text; label fields come from the caller
    /// since the CSV carries only the request stream.
    pub fn from_csv(text: &str, qps_label: f64, seed: u64, duration_s: f64) -> Result<Self> {
        let (header, rows) = crate::csvio::parse_rows(text)?;
        if header != TRACE_HEADER {
            return Err(Error::Contract(format!(
                "unexpected trace csv header: {header:?}"
            )));
        }
        let requests = rows
            .iter()
            .map(|f| {
                Ok(Request {
                    id: crate::csvio::parse_u64(&f[0], "id")?,
                    arrival_s: crate::csvio::parse_f64(&f[1], "arrival_s")?,
                    input_tokens: crate::csvio::parse_u64(&f[2], "input_tokens")?,
                    output_tokens: crate::csvio::parse_u64(&f[3], "output_tokens")?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let trace = Trace {
            requests,
            qps_label,
            seed,
            duration_s,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev = 0.0;
        for r in &self.requests {
            if r.arrival_s < prev {
                return Err(Error::Contract("arrivals must be sorted ascending".into()));
            }
            if r.arrival_s >= self.duration_s {
                return Err(Error::Contract(
                    "all arrivals must fall inside the trace duration".into(),
                ));
            }
            if r.input_tokens < 1 || r.output_tokens < 1 {
                return Err(Error::Contract("token counts must be >= 1".into()));
            }
            prev = r.arrival_s;
        }
        Ok(())
    }

    pub fn total_output_tokens(&self) -> u64 {
        self.requests.iter().map(|r| r.output_tokens).sum()
    }
}

/// Generate a Poisson-arrival trace with fixed request sizes.
pub fn generate_trace(
    app: &ApplicationProfile,
    size: SizePercentile,
    qps: f64,
    duration_s: f64,
    seed: u64,
) -> Result<Trace> {
    generate_trace_with(app, size, qps, duration_s, seed, ArrivalProcess::Poisson)
}

/// Generate a trace with an explicit arrival process.
pub fn generate_trace_with(
    app: &ApplicationProfile,
    size: SizePercentile,
    qps: f64,
    duration_s: f64,
    seed: u64,
    arrivals: ArrivalProcess,
) -> Result<Trace> {
    if qps <= 0.0 || qps.is_nan() {
        return Err(Error::Contract(format!("qps must be > 0, got {qps}")));
    }
    if duration_s < 0.0 || !duration_s.is_finite() {
        return Err(Error::Contract(format!(
            "duration must be finite and >= 0, got {duration_s}"
        )));
    }
    let (input_tokens, output_tokens) = app.percentile_size(size);
    use ArrivalProcess::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut requests = Vec::new();
    let mut t = 0.0;
    let mut id = 0;
    loop {
        let gap = match arrivals {
            Poisson => {
                // Inverse-CDF exponential sample; gen() is in [0, 1).
                let u: f64 = rng.gen();
                -(1.0 - u).ln() / qps
            }
            DeterministicInterval => 1.0 / qps,
        };
        t += gap;
        if t >= duration_s {
            break;
        }
        requests.push(Request {
            id,
            arrival_s: t,
            input_tokens,
            output_tokens,
        });
        id += 1;
    }
    Ok(Trace {
        requests,
        qps_label: qps,
        seed,
        duration_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sharegpt() -> ApplicationProfile {
        ApplicationProfile {
            name: "sharegpt".into(),
            ttft_slo_s: 0.2,
            tpot_slo_s: 0.08,
            p25: (24, 24),
            p50: (160, 140),
            p75: (510, 357),
        }
    }

    fn humaneval() -> ApplicationProfile {
        ApplicationProfile {
            name: "humaneval".into(),
            ttft_slo_s: 0.125,
            tpot_slo_s: 0.2,
            p25: (108, 31),
            p50: (136, 55),
            p75: (182, 88),
        }
    }

    fn longbench() -> ApplicationProfile {
        ApplicationProfile {
            name: "longbench".into(),
            ttft_slo_s: 15.0,
            tpot_slo_s: 0.15,
            p25: (1134, 201),
            p50: (1495, 275),
            p75: (1817, 352),
        }
    }

    #[test]
    fn percentile_lookups() {
        assert_eq!(sharegpt().percentile_size(SizePercentile::P50), (160, 140));
        assert_eq!(humaneval().percentile_size(SizePercentile::P25), (108, 31));
        assert_eq!(longbench().percentile_size(SizePercentile::P75), (1817, 352));
    }

    #[test]
    fn percentile_parse() {
        assert_eq!(SizePercentile::parse("P50").unwrap(), SizePercentile::P50);
        assert!(SizePercentile::parse("p95").is_err());
    }

    #[test]
    fn profiles_validate() {
        for app in [sharegpt(), humaneval(), longbench()] {
            app.validate().unwrap();
        }
        let mut bad = sharegpt();
        bad.p75 = (100, 100); // below p50
        assert!(bad.validate().is_err());
    }

    #[test]
    fn poisson_request_count_matches_rate() {
        // qps 2 over 100 s: the mean count over 1000 seeds must sit within
        // 3 sigma of 200 (sigma of the mean = sqrt(200/1000) ~ 0.447).
        let app = sharegpt();
        let mut total = 0usize;
        for seed in 0..1000 {
            let trace = generate_trace(&app, SizePercentile::P50, 2.0, 100.0, seed).unwrap();
            total += trace.requests.len();
        }
        let mean = total as f64 / 1000.0;
        assert!(
            (mean - 200.0).abs() <= 1.4,
            "mean request count {mean} too far from 200"
        );
    }

    #[test]
    fn same_seed_identical_traces() {
        let app = sharegpt();
        let a = generate_trace(&app, SizePercentile::P50, 3.0, 50.0, 99).unwrap();
        let b = generate_trace(&app, SizePercentile::P50, 3.0, 50.0, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_duration_empty_trace() {
        let app = sharegpt();
        let trace = generate_trace(&app, SizePercentile::P50, 2.0, 0.0, 1).unwrap();
        assert!(trace.requests.is_empty());
    }

    #[test]
    fn traces_are_sorted_and_validate() {
        let app = sharegpt();
        for seed in 0..20 {
            let trace = generate_trace(&app, SizePercentile::P25, 5.0, 30.0, seed).unwrap();
            trace.validate().unwrap();
        }
    }

    #[test]
    fn deterministic_interval_arrivals() {
        let app = sharegpt();
        let trace = generate_trace_with(
            &app,
            SizePercentile::P50,
            2.0,
            3.0,
            7,
            ArrivalProcess::DeterministicInterval,
        )
        .unwrap();
        let arrivals: Vec<f64> = trace.requests.iter().map(|r| r.arrival_s).collect();
        assert_eq!(arrivals.len(), 5); // 0.5, 1.0, 1.5, 2.0, 2.5
        for (i, a) in arrivals.iter().enumerate() {
            assert!((a - 0.5 * (i + 1) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn inter_arrival_gaps_match_exponential_moments() {
        // >= 1e5 gaps; mean must match 1/qps within 1%, variance within 5%.
        let app = sharegpt();
        let qps = 4.0;
        let mut gaps = Vec::new();
        let mut seed = 0;
        while gaps.len() < 100_000 {
            let trace = generate_trace(&app, SizePercentile::P50, qps, 200.0, seed).unwrap();
            let mut prev = 0.0;
            for r in &trace.requests {
                gaps.push(r.arrival_s - prev);
                prev = r.arrival_s;
            }
            seed += 1;
        }
        let n = gaps.len() as f64;
        let mean = gaps.iter().sum::<f64>() / n;
        let var = gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n;
        let expected_mean = 1.0 / qps;
        let expected_var = 1.0 / (qps * qps);
        assert!(
            (mean - expected_mean).abs() / expected_mean < 0.01,
            "gap mean {mean} vs {expected_mean}"
        );
        assert!(
            (var - expected_var).abs() / expected_var < 0.05,
            "gap variance {var} vs {expected_var}"
        );
    }

    #[test]
    fn serde_round_trip() {
        let app = sharegpt();
        let trace = generate_trace(&app, SizePercentile::P50, 2.0, 20.0, 42).unwrap();
        let json = serde_json::to_string(&trace).unwrap();
        let back: Trace = serde_json::from_str(&json).unwrap();
        assert_eq!(trace, back);
    }

    #[test]
    fn csv_round_trip() {
        let app = sharegpt();
        let trace = generate_trace(&app, SizePercentile::P50, 2.0, 20.0, 42).unwrap();
        let meta = crate::csvio::CsvMeta {
            seed: 42,
            config_hash: 0,
            tool_version: "0.1.0",
        };
        let text = trace.to_csv(&meta);
        let back = Trace::from_csv(&text, 2.0, 42, 20.0).unwrap();
        assert_eq!(trace, back);
    }
}
