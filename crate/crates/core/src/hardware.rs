//! Surrogate performance and energy model for a (GPU, model, phase, load)
//! combination.
//!
//! Latency follows a roofline: a step is compute-bound or memory-bound,
//! whichever is slower, with per-GPU efficiency factors applied to peak
//! throughput and bandwidth. Power is a linear ramp from idle to max with
//! utilization. The model is queue-free; queueing delay is the simulator's
//! business.

use serde::{Deserialize, Serialize};

use crate::carbon::GpuSpec;
use crate::error::{Error, Result};

/// Transformer model shape parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    /// Parameter count (e.g. 7e9).
    pub params: f64,
    pub layers: u32,
    pub hidden_dim: u32,
    /// Bytes per parameter (2 for fp16).
    pub bytes_per_param: u32,
    pub vocab_size: u32,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        if self.params <= 0.0 || !self.params.is_finite() {
            return Err(Error::Contract(format!(
                "model {}: params must be strictly positive",
                self.name
            )));
        }
        for (field, value) in [
            ("layers", self.layers),
            ("hidden_dim", self.hidden_dim),
            ("bytes_per_param", self.bytes_per_param),
            ("vocab_size", self.vocab_size),
        ] {
            if value == 0 {
                return Err(Error::Contract(format!(
                    "model {}: {} must be strictly positive",
                    self.name, field
                )));
            }
        }
        Ok(())
    }

    /// Weight footprint in bytes.
    pub fn weights_bytes(&self) -> f64 {
        self.params * self.bytes_per_param as f64
    }
}

/// Execution phase of a serving step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Prefill,
    Decode,
}

/// Work offered to one step of one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseLoad {
    pub phase: Phase,
    /// Tokens processed per sequence in this step (prompt length for
    /// prefill, 1 for an autoregressive decode step, the draft window size
    /// for a verification step).
    pub tokens_in_step: u64,
    pub batch_size: u64,
    /// Offered request rate; contextual, not used by the roofline itself.
    pub qps: f64,
}

impl PhaseLoad {
    pub fn validate(&self) -> Result<()> {
        if self.tokens_in_step < 1 {
            return Err(Error::Contract(
                "tokens_in_step must be >= 1".to_string(),
            ));
        }
        if self.batch_size < 1 {
            return Err(Error::Contract("batch_size must be >= 1".to_string()));
        }
        if self.qps <= 0.0 || self.qps.is_nan() {
            return Err(Error::Contract("qps must be > 0".to_string()));
        }
        Ok(())
    }
}

/// Roofline latency of one step, in seconds.
///
/// Compute time covers `2 * params` FLOPs per processed token across the
/// batch; memory time covers one pass over the weights per step. The slower
/// of the two wins.
pub fn phase_latency(gpu: &GpuSpec, model: &ModelSpec, load: &PhaseLoad) -> Result<f64> {
    load.validate()?;
    let flops = 2.0 * model.params * load.tokens_in_step as f64 * load.batch_size as f64;
    let compute_time = flops / (gpu.fp16_flops() * gpu.eta_compute);
    let memory_time = model.weights_bytes() / (gpu.mem_bandwidth_bytes_s() * gpu.eta_memory);
    Ok(compute_time.max(memory_time))
}

/// Energy of a busy interval, in joules: `latency * (idle + u * (max - idle))`.
pub fn phase_energy(gpu: &GpuSpec, latency_s: f64, utilization: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&utilization) || !utilization.is_finite() {
        return Err(Error::Domain(format!(
            "utilization must be in [0, 1], got {utilization}"
        )));
    }
    if latency_s < 0.0 || !latency_s.is_finite() {
        return Err(Error::Domain(format!(
            "latency must be finite and >= 0, got {latency_s}"
        )));
    }
    let power = gpu.idle_power_w + utilization * (gpu.max_power_w - gpu.idle_power_w);
    Ok(latency_s * power)
}

/// KV-cache footprint of `seq_len` cached tokens, in bytes:
/// 2 (K and V) x layers x hidden_dim x bytes_per_param per token.
pub fn kv_cache_bytes(model: &ModelSpec, seq_len: u64) -> u64 {
    2 * model.layers as u64 * model.hidden_dim as u64 * model.bytes_per_param as u64 * seq_len
}

/// Check that `model` plus a KV budget of `kv_budget_tokens` cached tokens
/// fits in `gpu`'s VRAM; additional resident models (e.g. a colocated draft)
/// are passed through `extra_resident_bytes`.
pub fn ensure_fits(
    gpu: &GpuSpec,
    model: &ModelSpec,
    kv_budget_tokens: u64,
    extra_resident_bytes: f64,
) -> Result<()> {
    let need =
        model.weights_bytes() + kv_cache_bytes(model, kv_budget_tokens) as f64 + extra_resident_bytes;
    let have = gpu.vram_bytes();
    if need > have {
        return Err(Error::Capacity(format!(
            "model {} needs {:.2} GiB (weights + KV budget for {} tokens) but {} has {:.2} GiB",
            model.name,
            need / crate::units::BYTES_PER_GIB,
            kv_budget_tokens,
            gpu.name,
            gpu.vram_gib
        )));
    }
    Ok(())
}
