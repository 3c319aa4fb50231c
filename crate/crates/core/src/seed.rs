//! Seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator seeded from a
//! 64-bit value. Child seeds are derived by folding each component into the
//! parent with the SplitMix64 finalizer:
//!
//! ```text
//! state = parent
//! for c in components: state = splitmix64(state ^ splitmix64(c))
//! ```
//!
//! so derivation depends only on the component values, never on the order in
//! which jobs are scheduled.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(parent: u64, components: &[u64]) -> u64 {
    components
        .iter()
        .fold(parent, |state, &c| splitmix64(state ^ splitmix64(c)))
}

/// Seed component for a ratio such as an edge density.
pub fn ratio_component(x: f64) -> u64 {
    x.to_bits()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_stable_and_order_sensitive() {
        assert_eq!(derive(7, &[1, 2]), derive(7, &[1, 2]));
        assert_ne!(derive(7, &[1, 2]), derive(7, &[2, 1]));
        assert_ne!(derive(7, &[1]), derive(8, &[1]));
        // frozen reference value of the published derivation
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
    }
}
