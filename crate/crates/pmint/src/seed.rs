//! Deterministic sub-seed derivation.
//!
//! Parallel parts of the pipeline (replicates, horizons, methods) each get
//! their own RNG stream, derived from one master seed by hashing the cell
//! coordinates. Results are therefore independent of scheduling order.

/// Purpose tag for simulation streams.
pub const TAG_SIMULATE: u64 = 0x53494d;
/// Purpose tag for scoring streams.
pub const TAG_SCORE: u64 = 0x53434f52;

/// splitmix64 finalizer; bijective on u64.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a sub-seed from a master seed and a list of coordinate tags.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = mix(master);
    for &tag in tags {
        state = mix(state ^ mix(tag));
    }
    state
}
