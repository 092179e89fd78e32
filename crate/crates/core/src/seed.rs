//! Stable seed derivation.
//!
//! All randomness in a run flows from one user seed. Sub-seeds are mixed
//! with SplitMix64 so they do not depend on the standard library's hasher,
//! which is not stable across releases.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a sequence of words into one seed.
pub fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6A09_E667_F3BC_C909, |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

/// Seed for a named component of a run, e.g. `derive(seed, "train")`.
pub fn derive(seed: u64, name: &str) -> u64 {
    // FNV-1a over the name bytes.
    let tag = name.bytes().fold(0xCBF2_9CE4_8422_2325u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01B3)
    });
    mix(&[seed, tag])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_sensitive() {
        assert_eq!(derive(42, "train"), derive(42, "train"));
        assert_ne!(derive(42, "train"), derive(42, "sweep"));
        assert_ne!(derive(42, "train"), derive(43, "train"));
        assert_ne!(mix(&[1, 2]), mix(&[2, 1]));
        // Pinned so that file outputs stay reproducible across releases.
        assert_eq!(mix(&[0]), mix(&[0]));
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }
}
