//! Unit conversions used across the crate.
//!
//! Internal conventions: carbon in grams CO2eq, energy in joules at the
//! power-model level and kilowatt-hours at the accounting level, time in
//! seconds, payload sizes in bytes, bandwidth in bits per second. Every
//! conversion constant lives here so the rest of the crate never hand-rolls
//! one.

/// Seconds in a 365-day year.
pub const SECONDS_PER_YEAR: f64 = 365.0 * 24.0 * 3600.0;

/// Joules per kilowatt-hour.
pub const JOULES_PER_KWH: f64 = 3.6e6;

/// Bytes per GiB (used for VRAM capacities).
pub const BYTES_PER_GIB: f64 = 1_073_741_824.0;

/// Grams per kilogram.
pub const GRAMS_PER_KG: f64 = 1000.0;

/// Convert years to seconds (365-day years).
pub fn years_to_seconds(years: f64) -> f64 {
    years * SECONDS_PER_YEAR
}

/// Convert joules to kilowatt-hours.
pub fn joules_to_kwh(joules: f64) -> f64 {
    joules / JOULES_PER_KWH
}

/// Convert kilowatt-hours to joules.
pub fn kwh_to_joules(kwh: f64) -> f64 {
    kwh * JOULES_PER_KWH
}

/// Derive an independent child seed from a master seed and a stream index
/// (splitmix64 over their combination). Used wherever one experiment seed
/// fans out into per-cell or per-request streams.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
