//! Stable seed derivation. The standard library hasher is not guaranteed to
//! be stable across releases, so seeds use FNV-1a finished with splitmix64.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the unit named by `parts` under `master`. Parts are separated
/// so that `["ab", "c"]` and `["a", "bc"]` differ.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut h = FNV_OFFSET;
    for byte in master.to_le_bytes() {
        h = (h ^ u64::from(byte)).wrapping_mul(FNV_PRIME);
    }
    for part in parts {
        for &byte in part.as_bytes() {
            h = (h ^ u64::from(byte)).wrapping_mul(FNV_PRIME);
        }
        h = (h ^ 0xff).wrapping_mul(FNV_PRIME);
    }
    splitmix64(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_stable_and_separated() {
        assert_eq!(derive_seed(0, &["iris/setosa"]), derive_seed(0, &["iris/setosa"]));
        assert_ne!(derive_seed(0, &["ab", "c"]), derive_seed(0, &["a", "bc"]));
        assert_ne!(derive_seed(0, &["x"]), derive_seed(1, &["x"]));
        // value from an independent implementation; guards result reproducibility
        assert_eq!(derive_seed(42, &["iris/setosa", "0"]), 0x9a2e_3fff_f2f9_6d42);
    }
}
