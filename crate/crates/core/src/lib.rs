//! carbonsim — deterministic carbon accounting, serving simulation, and
//! SLO-aware scheduling for LLM inference on heterogeneous GPUs.
//!
//! The crate models a serving fleet at desk scale: a roofline surrogate
//! predicts per-phase latency and energy, a discrete-event engine executes
//! seeded request traces under standalone, colocated-speculative, and two
//! disaggregated serving variants, a carbon ledger converts busy time and
//! energy into embodied plus operational grams, and an SLO-aware scheduler
//! completes partially observed performance matrices and picks the
//! minimum-carbon feasible configuration per workload.

pub mod analysis;
pub mod carbon;
pub mod config;
pub mod csvio;
pub mod error;
pub mod hardware;
pub mod profiler;
pub mod scheduler;
pub mod sim;
pub mod spec_decode;
pub mod units;
pub mod workload;

pub use carbon::{
    embodied_carbon, operational_carbon, total_carbon, CarbonBreakdown, GpuSpec, GridProfile,
    LifetimeAssumption,
};
pub use error::{Error, Result};
pub use hardware::{kv_cache_bytes, phase_energy, phase_latency, ModelSpec, Phase, PhaseLoad};
pub use sim::{
    simulate, simulate_with, slo_attainment, transfer_time, NetworkLink, ServingConfig, SimOptions,
    SimReport, Variant,
};
pub use spec_decode::{
    acceptance_probability, expected_accepted, payload_sizes, sample_accept_count, DraftWindow,
    StepPayload,
};
pub use workload::{
    generate_trace, generate_trace_with, ApplicationProfile, ArrivalProcess, Request,
    SizePercentile, Trace,
};
