//! Master-seed fan-out.
//!
//! Every randomized stage derives its own seed from the master seed and a
//! stage tag, so changing the workload of one stage (e.g. the tuning budget)
//! never perturbs the random draws of another.

/// Derives a per-stage seed from the master seed and a stage tag.
///
/// The tag is hashed with FNV-1a and the combination is finalized with the
/// SplitMix64 mixer. Stable across runs and platforms.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in tag.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(master ^ h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
