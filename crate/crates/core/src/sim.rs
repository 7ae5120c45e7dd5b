//! Deterministic event-driven serving simulator.
//!
//! Executes a trace under one serving configuration across one or two
//! modeled GPUs and a network link, producing per-request TTFT/TPOT,
//! per-GPU busy time and energy, transferred bytes, and peak bandwidth
//! demand.
//!
//! Scheduling policy: single FIFO per GPU role, no preemption, continuous
//! batching at decode-step granularity (arrived requests join the running
//! batch at step boundaries up to `max_batch`), prefill executed
//! per-request. GPUs are serial resources; a job reserved with an earlier
//! ready time starts no earlier than the previous reservation's end.
//!
//! Variants:
//! - `Standalone`: prefill then autoregressive decode on the new GPU.
//! - `SpecDecodeColocated`: K draft micro-steps plus a verification pass per
//!   step, all on the new GPU.
//! - `DisgPrefillDecode`: prefill on the new GPU, prompt KV shipped over the
//!   link once per request, decode on the old GPU.
//! - `DisgSpecDecode`: draft windows on the old GPU; per step the token ids
//!   cross the link first, verification on the new GPU begins on id arrival,
//!   and the probability payload crosses concurrently with verification; the
//!   step completes at max(verification end, probability arrival).

use serde::{Deserialize, Serialize};

use crate::carbon::GpuSpec;
use crate::error::{Error, Result};
use crate::hardware::{
    ensure_fits, kv_cache_bytes, phase_energy, phase_latency, ModelSpec, Phase, PhaseLoad,
};
use crate::spec_decode::{payload_sizes, sample_accept_count, DraftWindow};
use crate::workload::{ApplicationProfile, Trace};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Bytes per probability entry in speculative payloads (fp16).
pub const BYTES_PER_PROB: u64 = 2;

/// Serving configuration variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Standalone,
    SpecDecodeColocated,
    DisgPrefillDecode,
    DisgSpecDecode,
}

impl Variant {
    pub fn is_disaggregated(&self) -> bool {
        matches!(self, Variant::DisgPrefillDecode | Variant::DisgSpecDecode)
    }

    pub fn uses_speculation(&self) -> bool {
        matches!(self, Variant::SpecDecodeColocated | Variant::DisgSpecDecode)
    }
}

/// One serving configuration: optimizer variant, GPU allocation, models,
/// and batching limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServingConfig {
    pub id: String,
    pub variant: Variant,
    pub new_gpu: GpuSpec,
    pub old_gpu: Option<GpuSpec>,
    pub target_model: ModelSpec,
    pub draft_model: Option<ModelSpec>,
    pub draft_window: Option<DraftWindow>,
    pub max_batch: u64,
}

impl ServingConfig {
    pub fn validate(&self) -> Result<()> {
        self.new_gpu.validate()?;
        self.target_model.validate()?;
        if self.max_batch < 1 {
            return Err(Error::Contract(format!(
                "config {}: max_batch must be >= 1",
                self.id
            )));
        }
        if self.variant.is_disaggregated() != self.old_gpu.is_some() {
            return Err(Error::Contract(format!(
                "config {}: old_gpu must be present iff the variant is disaggregated",
                self.id
            )));
        }
        if self.variant.uses_speculation() != (self.draft_model.is_some() && self.draft_window.is_some())
        {
            return Err(Error::Contract(format!(
                "config {}: draft model and window must be present iff the variant speculates",
                self.id
            )));
        }
        if let Some(g) = &self.old_gpu {
            g.validate()?;
        }
        if let Some(m) = &self.draft_model {
            m.validate()?;
        }
        if let Some(w) = &self.draft_window {
            w.validate()?;
        }
        Ok(())
    }
}

/// Point-to-point link between the two GPUs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkLink {
    pub bandwidth_bps: f64,
    pub base_latency_s: f64,
}

impl NetworkLink {
    pub fn validate(&self) -> Result<()> {
        if self.bandwidth_bps <= 0.0 || self.bandwidth_bps.is_nan() {
            return Err(Error::Contract("link bandwidth must be > 0".into()));
        }
        if self.base_latency_s < 0.0 {
            return Err(Error::Contract("link base latency must be >= 0".into()));
        }
        Ok(())
    }
}

/// Serial transfer time of a payload over the link.
pub fn transfer_time(payload_bytes: u64, link: &NetworkLink) -> f64 {
    link.base_latency_s + payload_bytes as f64 * 8.0 / link.bandwidth_bps
}

/// Simulator toggles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Disable the communication/computation overlap in `DisgSpecDecode`:
    /// the probability payload then transfers strictly before verification.
    pub disable_overlap: bool,
}


/// Per-request latency outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestMetrics {
    pub id: u64,
    pub ttft_s: f64,
    pub tpot_mean_s: f64,
    pub finish_s: f64,
}

/// Per-GPU busy time and energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpuUsage {
    pub gpu: String,
    pub busy_time_s: f64,
    pub energy_kwh: f64,
}

/// Aggregated outcome of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub per_request: Vec<RequestMetrics>,
    pub per_gpu: Vec<GpuUsage>,
    pub bytes_transferred: u64,
    /// Highest per-transfer bandwidth requirement seen in the run: the rate
    /// a payload needs to complete within the computation window that can
    /// hide it (a decode-step slot for shipped KV, the verification pass for
    /// probability payloads, the draft window for token ids).
    pub peak_bandwidth_demand_bps: f64,
    pub tokens_out: u64,
    pub wall_time_s: f64,
}

/// Fraction of requests meeting both the TTFT and TPOT SLOs.
pub fn slo_attainment(report: &SimReport, app: &ApplicationProfile) -> Result<f64> {
    if report.per_request.is_empty() {
        return Err(Error::Contract(
            "slo attainment undefined for an empty report".into(),
        ));
    }
    let within = report
        .per_request
        .iter()
        .filter(|r| r.ttft_s <= app.ttft_slo_s && r.tpot_mean_s <= app.tpot_slo_s)
        .count();
    Ok(within as f64 / report.per_request.len() as f64)
}

// ---------------------------------------------------------------------------
// engine internals
// ---------------------------------------------------------------------------

/// A serial resource (GPU or link): reservations are handed out in call
/// order, each starting no earlier than its ready time or the previous end.
#[derive(Debug, Default)]
struct Resource {
    free_at: f64,
    busy_s: f64,
}

impl Resource {
    fn reserve(&mut self, ready: f64, duration: f64) -> (f64, f64) {
        let start = ready.max(self.free_at);
        let end = start + duration;
        self.free_at = end;
        self.busy_s += duration;
        (start, end)
    }
}

#[derive(Debug, Default)]
struct LinkState {
    res: Resource,
    bytes: u64,
    peak_demand_bps: f64,
}

impl LinkState {
    /// Reserve a payload on the link. `budget_s` is the computation window
    /// this transfer could hide inside; it feeds the demand metric only.
    fn transfer(
        &mut self,
        link: &NetworkLink,
        ready: f64,
        payload_bytes: u64,
        budget_s: f64,
    ) -> (f64, f64) {
        let duration = transfer_time(payload_bytes, link);
        let span = self.res.reserve(ready, duration);
        self.bytes += payload_bytes;
        if budget_s > 0.0 {
            let demand = payload_bytes as f64 * 8.0 / budget_s;
            if demand > self.peak_demand_bps {
                self.peak_demand_bps = demand;
            }
        }
        span
    }
}

#[derive(Debug, Clone)]
struct ReqState {
    id: u64,
    arrival: f64,
    input: u64,
    output: u64,
    /// Time the first token was produced (end of target prefill).
    first_token: f64,
    /// Tokens produced so far (prefill contributes one).
    generated: u64,
    finish: f64,
    /// Per-request acceptance stream: draws depend only on (run seed,
    /// request id, step ordinal), never on how steps interleave across
    /// requests, so schedule perturbations stay comparable.
    rng: ChaCha8Rng,
}

impl ReqState {
    fn metrics(&self) -> RequestMetrics {
        let tpot = if self.output >= 2 {
            (self.finish - self.first_token) / (self.output - 1) as f64
        } else {
            0.0
        };
        RequestMetrics {
            id: self.id,
            ttft_s: self.first_token - self.arrival,
            tpot_mean_s: tpot,
            finish_s: self.finish,
        }
    }
}

fn decode_step_latency(gpu: &GpuSpec, model: &ModelSpec, batch: u64, qps: f64) -> f64 {
    phase_latency(
        gpu,
        model,
        &PhaseLoad {
            phase: Phase::Decode,
            tokens_in_step: 1,
            batch_size: batch,
            qps,
        },
    )
    .expect("decode load is valid by construction")
}

fn prefill_latency(gpu: &GpuSpec, model: &ModelSpec, input_tokens: u64, qps: f64) -> f64 {
    phase_latency(
        gpu,
        model,
        &PhaseLoad {
            phase: Phase::Prefill,
            tokens_in_step: input_tokens,
            batch_size: 1,
            qps,
        },
    )
    .expect("prefill load is valid by construction")
}

/// Verification pass over a K-token draft window for the whole batch.
fn verify_latency(gpu: &GpuSpec, model: &ModelSpec, k: u32, batch: u64, qps: f64) -> f64 {
    phase_latency(
        gpu,
        model,
        &PhaseLoad {
            phase: Phase::Decode,
            tokens_in_step: k as u64,
            batch_size: batch,
            qps,
        },
    )
    .expect("verify load is valid by construction")
}

/// K autoregressive micro-steps of the draft model.
fn draft_window_latency(gpu: &GpuSpec, model: &ModelSpec, k: u32, batch: u64, qps: f64) -> f64 {
    k as f64 * decode_step_latency(gpu, model, batch, qps)
}

fn capacity_checks(config: &ServingConfig, trace: &Trace) -> Result<()> {
    let max_in = trace.requests.iter().map(|r| r.input_tokens).max().unwrap_or(0);
    let max_out = trace.requests.iter().map(|r| r.output_tokens).max().unwrap_or(0);
    let residency = config.max_batch * (max_in + max_out);
    match config.variant {
        Variant::Standalone => {
            ensure_fits(&config.new_gpu, &config.target_model, residency, 0.0)?;
        }
        Variant::SpecDecodeColocated => {
            let draft = config.draft_model.as_ref().expect("validated");
            let extra = draft.weights_bytes() + kv_cache_bytes(draft, residency) as f64;
            ensure_fits(&config.new_gpu, &config.target_model, residency, extra)?;
        }
        Variant::DisgPrefillDecode => {
            let old = config.old_gpu.as_ref().expect("validated");
            // Prefill GPU holds transient prompt KV awaiting transfer.
            let prefill_residency = config.max_batch * (max_in + 1);
            ensure_fits(&config.new_gpu, &config.target_model, prefill_residency, 0.0)?;
            ensure_fits(old, &config.target_model, residency, 0.0)?;
        }
        Variant::DisgSpecDecode => {
            let old = config.old_gpu.as_ref().expect("validated");
            let draft = config.draft_model.as_ref().expect("validated");
            ensure_fits(&config.new_gpu, &config.target_model, residency, 0.0)?;
            ensure_fits(old, draft, residency, 0.0)?;
        }
    }
    Ok(())
}

/// Run a trace under a serving configuration. Deterministic for a fixed
/// (config, trace, link, seed) quadruple.
pub fn simulate(
    config: &ServingConfig,
    trace: &Trace,
    link: &NetworkLink,
    seed: u64,
) -> Result<SimReport> {
    simulate_with(config, trace, link, seed, &SimOptions::default())
}

/// `simulate` with explicit toggles.
pub fn simulate_with(
    config: &ServingConfig,
    trace: &Trace,
    link: &NetworkLink,
    seed: u64,
    options: &SimOptions,
) -> Result<SimReport> {
    config.validate()?;
    link.validate()?;
    trace.validate()?;
    capacity_checks(config, trace)?;

    let mut reqs: Vec<ReqState> = trace
        .requests
        .iter()
        .map(|r| ReqState {
            id: r.id,
            arrival: r.arrival_s,
            input: r.input_tokens,
            output: r.output_tokens,
            first_token: 0.0,
            generated: 0,
            finish: 0.0,
            rng: ChaCha8Rng::seed_from_u64(crate::units::derive_seed(seed, r.id)),
        })
        .collect();

    let qps = trace.qps_label;

    let mut new_gpu = Resource::default();
    let mut old_gpu = Resource::default();
    let mut link_state = LinkState::default();

    match config.variant {
        Variant::Standalone | Variant::SpecDecodeColocated => {
            run_single_gpu(config, qps, &mut reqs, &mut new_gpu);
        }
        Variant::DisgPrefillDecode => {
            run_prefill_decode(config, qps, link, &mut reqs, &mut new_gpu, &mut old_gpu, &mut link_state);
        }
        Variant::DisgSpecDecode => {
            run_disg_spec_decode(
                config,
                qps,
                link,
                options,
                &mut reqs,
                &mut new_gpu,
                &mut old_gpu,
                &mut link_state,
            );
        }
    }

    // The run ends when the last request finishes and every reservation has
    // drained (a trailing prefill can outlast the final completion).
    let wall = reqs
        .iter()
        .map(|r| r.finish)
        .fold(0.0f64, f64::max)
        .max(new_gpu.free_at)
        .max(old_gpu.free_at);
    let mut per_gpu = Vec::new();
    let mut push_usage = |gpu: &GpuSpec, res: &Resource| {
        let utilization = if wall > 0.0 { (res.busy_s / wall).min(1.0) } else { 0.0 };
        let energy_j = if wall > 0.0 {
            phase_energy(gpu, wall, utilization).expect("utilization in range")
        } else {
            0.0
        };
        per_gpu.push(GpuUsage {
            gpu: gpu.name.clone(),
            busy_time_s: res.busy_s,
            energy_kwh: crate::units::joules_to_kwh(energy_j),
        });
    };
    push_usage(&config.new_gpu, &new_gpu);
    if let Some(old) = &config.old_gpu {
        push_usage(old, &old_gpu);
    }

    let tokens_out = reqs.iter().map(|r| r.generated.min(r.output)).sum();
    Ok(SimReport {
        per_request: reqs.iter().map(|r| r.metrics()).collect(),
        per_gpu,
        bytes_transferred: link_state.bytes,
        peak_bandwidth_demand_bps: link_state.peak_demand_bps,
        tokens_out,
        wall_time_s: wall,
    })
}

/// Standalone and colocated speculative decoding: one GPU runs everything.
fn run_single_gpu(config: &ServingConfig, qps: f64, reqs: &mut [ReqState], gpu_res: &mut Resource) {
    let gpu = &config.new_gpu;
    let target = &config.target_model;
    let speculative = config.variant == Variant::SpecDecodeColocated;

    let mut next = 0usize; // next request to admit, in arrival order
    let mut active: Vec<usize> = Vec::new();
    let mut t = 0.0f64;

    while next < reqs.len() || !active.is_empty() {
        if active.is_empty() {
            t = t.max(reqs[next].arrival);
        }
        // Step-boundary admission: prefill each eligible request in FIFO
        // order on this same GPU.
        while next < reqs.len()
            && active.len() < config.max_batch as usize
            && reqs[next].arrival <= t
        {
            let r = &mut reqs[next];
            let pf = prefill_latency(gpu, target, r.input, qps);
            let (_, pf_end) = gpu_res.reserve(t, pf);
            r.first_token = pf_end;
            r.generated = 1;
            t = pf_end;
            if speculative {
                let draft = config.draft_model.as_ref().expect("validated");
                let dpf = prefill_latency(gpu, draft, r.input, qps);
                let (_, dpf_end) = gpu_res.reserve(t, dpf);
                t = dpf_end;
            }
            if r.generated >= r.output {
                r.finish = r.first_token;
            } else {
                active.push(next);
            }
            next += 1;
        }
        if active.is_empty() {
            continue;
        }
        // One decode step for the whole batch.
        let batch = active.len() as u64;
        let dur = if speculative {
            let draft = config.draft_model.as_ref().expect("validated");
            let window = config.draft_window.as_ref().expect("validated");
            draft_window_latency(gpu, draft, window.k, batch, qps)
                + verify_latency(gpu, target, window.k, batch, qps)
        } else {
            decode_step_latency(gpu, target, batch, qps)
        };
        let (_, end) = gpu_res.reserve(t, dur);
        t = end;
        let window = config.draft_window;
        active.retain(|&idx| {
            let r = &mut reqs[idx];
            let gain = if speculative {
                sample_accept_count(&window.expect("validated"), &mut r.rng)
            } else {
                1
            };
            r.generated = (r.generated + gain).min(r.output);
            if r.generated >= r.output {
                r.finish = end;
                false
            } else {
                true
            }
        });
    }
}

/// Prefill on the new GPU, prompt KV shipped once per request, decode on the
/// old GPU. TTFT covers prefill only; the KV transfer gates the request's
/// first decode step.
fn run_prefill_decode(
    config: &ServingConfig,
    qps: f64,
    link: &NetworkLink,
    reqs: &mut [ReqState],
    new_gpu: &mut Resource,
    old_gpu: &mut Resource,
    link_state: &mut LinkState,
) {
    let old = config.old_gpu.as_ref().expect("validated");
    let target = &config.target_model;
    // Reference slot a KV transfer displaces: one decode step.
    let kv_budget = decode_step_latency(old, target, 1, qps);

    // Prefill server and link both run FIFO in arrival order.
    let mut ready = vec![0.0f64; reqs.len()];
    for i in 0..reqs.len() {
        let r = &mut reqs[i];
        let pf = prefill_latency(&config.new_gpu, target, r.input, qps);
        let (_, pf_end) = new_gpu.reserve(r.arrival, pf);
        r.first_token = pf_end;
        r.generated = 1;
        if r.generated >= r.output {
            r.finish = pf_end;
            ready[i] = f64::INFINITY; // never enters the decode pool
        } else {
            let kv = kv_cache_bytes(target, r.input + 1);
            let (_, kv_end) = link_state.transfer(link, pf_end, kv, kv_budget);
            ready[i] = kv_end;
        }
    }

    // Decode loop on the old GPU with KV-arrival-gated admission.
    let pool: Vec<usize> = (0..reqs.len()).filter(|&i| ready[i].is_finite()).collect();
    let mut next = 0usize;
    let mut active: Vec<usize> = Vec::new();
    let mut t = 0.0f64;
    while next < pool.len() || !active.is_empty() {
        if active.is_empty() {
            t = t.max(ready[pool[next]]);
        }
        while next < pool.len()
            && active.len() < config.max_batch as usize
            && ready[pool[next]] <= t
        {
            active.push(pool[next]);
            next += 1;
        }
        if active.is_empty() {
            continue;
        }
        let batch = active.len() as u64;
        let dur = decode_step_latency(old, target, batch, qps);
        let (_, end) = old_gpu.reserve(t, dur);
        t = end;
        active.retain(|&idx| {
            let r = &mut reqs[idx];
            r.generated += 1;
            if r.generated >= r.output {
                r.finish = end;
                false
            } else {
                true
            }
        });
    }
}

/// Disaggregated speculative decoding with communication overlap.
#[allow(clippy::too_many_arguments)]
fn run_disg_spec_decode(
    config: &ServingConfig,
    qps: f64,
    link: &NetworkLink,
    options: &SimOptions,
    reqs: &mut [ReqState],
    new_gpu: &mut Resource,
    old_gpu: &mut Resource,
    link_state: &mut LinkState,
) {
    let old = config.old_gpu.as_ref().expect("validated");
    let target = &config.target_model;
    let draft = config.draft_model.as_ref().expect("validated");
    let window = config.draft_window.as_ref().expect("validated");
    let payload = payload_sizes(draft, window.k, BYTES_PER_PROB).expect("k >= 1");

    let n = reqs.len();
    // Lazy per-request prefill scheduling, in arrival order per GPU.
    let mut tp_end = vec![f64::NAN; n]; // target prefill end (new GPU)
    let mut dp_end = vec![f64::NAN; n]; // draft prefill end (old GPU)
    let mut next_tp = 0usize;
    let mut next_dp = 0usize;

    // Schedules every target prefill for requests that arrived up to `upto`.
    macro_rules! drain_target_prefills {
        ($upto:expr) => {
            while next_tp < n && reqs[next_tp].arrival <= $upto {
                let r = &mut reqs[next_tp];
                let pf = prefill_latency(&config.new_gpu, target, r.input, qps);
                let (_, end) = new_gpu.reserve(r.arrival, pf);
                tp_end[next_tp] = end;
                r.first_token = end;
                r.generated = 1;
                if r.generated >= r.output {
                    r.finish = end;
                }
                next_tp += 1;
            }
        };
    }
    macro_rules! drain_draft_prefills {
        ($upto:expr) => {
            while next_dp < n && reqs[next_dp].arrival <= $upto {
                let arrival = reqs[next_dp].arrival;
                let input = reqs[next_dp].input;
                let pf = prefill_latency(old, draft, input, qps);
                let (_, end) = old_gpu.reserve(arrival, pf);
                dp_end[next_dp] = end;
                next_dp += 1;
            }
        };
    }
    // Forces both prefills of request `i` (and everything queued before it)
    // onto their GPUs, so its admission readiness is known.
    macro_rules! force_prefills {
        ($i:expr) => {
            while next_tp <= $i {
                let upto = reqs[next_tp].arrival;
                drain_target_prefills!(upto);
            }
            while next_dp <= $i {
                let upto = reqs[next_dp].arrival;
                drain_draft_prefills!(upto);
            }
        };
    }

    let mut next_admit = 0usize;
    let mut active: Vec<usize> = Vec::new();
    let mut t = 0.0f64;

    while next_admit < n || !active.is_empty() {
        if active.is_empty() {
            // Forcing the head's prefills is safe only here: nothing is in
            // flight, so the reservations cannot push a pending
            // verification into the future.
            force_prefills!(next_admit);
            if reqs[next_admit].output == 1 {
                // The prefill alone completed it.
                next_admit += 1;
                continue;
            }
            let ready = tp_end[next_admit].max(dp_end[next_admit]);
            t = t.max(ready);
        }
        // Window-boundary admission (FIFO by arrival; both prefills done).
        drain_target_prefills!(t);
        drain_draft_prefills!(t);
        while next_admit < n
            && next_admit < next_tp
            && next_admit < next_dp
            && tp_end[next_admit] <= t
            && dp_end[next_admit] <= t
        {
            if reqs[next_admit].output == 1 {
                next_admit += 1;
                continue;
            }
            if active.len() >= config.max_batch as usize {
                break;
            }
            active.push(next_admit);
            next_admit += 1;
        }
        if active.is_empty() {
            continue;
        }

        let batch = active.len() as u64;
        let draft_dur = draft_window_latency(old, draft, window.k, batch, qps);
        let verify_dur = verify_latency(&config.new_gpu, target, window.k, batch, qps);

        // Draft window on the old GPU.
        let (_, d_end) = old_gpu.reserve(t, draft_dur);
        // Token ids cross first; they can stream out as the window drafts.
        let ids_bytes = batch * payload.token_ids_bytes;
        let (_, ids_end) = link_state.transfer(link, d_end, ids_bytes, draft_dur);

        let step_end = if options.disable_overlap {
            // Probabilities transfer strictly before verification.
            let mut probs_end = ids_end;
            for _ in 0..batch {
                let (_, e) = link_state.transfer(link, d_end, payload.probs_bytes, verify_dur);
                probs_end = e;
            }
            drain_target_prefills!(probs_end);
            let (_, v_end) = new_gpu.reserve(probs_end, verify_dur);
            v_end
        } else {
            // Verification begins on id arrival; probabilities stream
            // concurrently and the verifier completes at
            // max(verification end, probability arrival).
            drain_target_prefills!(ids_end);
            let (_, v_end) = new_gpu.reserve(ids_end, verify_dur);
            let mut probs_end = ids_end;
            for _ in 0..batch {
                let (_, e) = link_state.transfer(link, d_end, payload.probs_bytes, verify_dur);
                probs_end = e;
            }
            v_end.max(probs_end)
        };
        t = step_end;

        active.retain(|&idx| {
            let r = &mut reqs[idx];
            let gain = sample_accept_count(window, &mut r.rng);
            r.generated = (r.generated + gain).min(r.output);
            if r.generated >= r.output {
                r.finish = step_end;
                false
            } else {
                true
            }
        });
    }
}
