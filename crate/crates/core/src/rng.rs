//! Counter-based random numbers.
//!
//! Bond outcomes are drawn from Philox4x32-10 (Salmon et al., Random123). A
//! block is a pure function of a 128-bit counter and a 64-bit key, so any bond
//! copy of any trial can be reproduced without replaying a stream and trials
//! can run on any number of workers in any order.
//!
//! Layout used by the sampler:
//!
//! | word          | content                    |
//! |---------------|----------------------------|
//! | key           | master seed (lo, hi)       |
//! | counter[0..2] | trial index (lo, hi)       |
//! | counter[2]    | edge id                    |
//! | counter[3]    | 0 (reserved)               |
//!
//! Lane `c` of the output block is the uniform word for copy `c` of the edge,
//! which caps edge multiplicity at 4.

const M0: u32 = 0xD251_1F53;
const M1: u32 = 0xCD9E_8D57;
const W0: u32 = 0x9E37_79B9;
const W1: u32 = 0xBB67_AE85;

#[inline(always)]
fn mulhilo(a: u32, b: u32) -> (u32, u32) {
    let prod = u64::from(a) * u64::from(b);
    ((prod >> 32) as u32, prod as u32)
}

#[inline(always)]
fn round(ctr: [u32; 4], key: [u32; 2]) -> [u32; 4] {
    let (hi0, lo0) = mulhilo(M0, ctr[0]);
    let (hi1, lo1) = mulhilo(M1, ctr[2]);
    [hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0]
}

/// Philox4x32 with 10 rounds.
#[inline]
pub fn philox4x32_10(mut ctr: [u32; 4], mut key: [u32; 2]) -> [u32; 4] {
    for i in 0..10 {
        if i > 0 {
            key[0] = key[0].wrapping_add(W0);
            key[1] = key[1].wrapping_add(W1);
        }
        ctr = round(ctr, key);
    }
    ctr
}

/// Uniform 32-bit words for the copies of one edge in one trial.
#[inline]
pub fn bond_words(master_seed: u64, trial: u64, edge: u32) -> [u32; 4] {
    philox4x32_10(
        [trial as u32, (trial >> 32) as u32, edge, 0],
        [master_seed as u32, (master_seed >> 32) as u32],
    )
}

/// Acceptance threshold for probability `p`: a word `u` is a success iff
/// `u < threshold(p)`. `p = 1` always succeeds and `p = 0` never does.
#[inline]
pub fn threshold(p: f64) -> u64 {
    let scaled = libm::round(p * 4_294_967_296.0);
    if scaled <= 0.0 {
        0
    } else if scaled >= 4_294_967_296.0 {
        1 << 32
    } else {
        scaled as u64
    }
}

/// Seed for sub-stream `index` of `master`, e.g. one point of a sweep.
pub fn derive_seed(master: u64, tag: u32, index: u64) -> u64 {
    let w = philox4x32_10(
        [index as u32, (index >> 32) as u32, tag, 0x5eed_5eed],
        [master as u32, (master >> 32) as u32],
    );
    u64::from(w[0]) | (u64::from(w[1]) << 32)
}

/// Uniform in [0, 1) from one word.
#[inline]
pub fn unit(word: u32) -> f64 {
    f64::from(word) * (1.0 / 4_294_967_296.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Known-answer vectors shipped with Random123 (kat_vectors, philox4x32 10).
    #[test]
    fn known_answers() {
        assert_eq!(
            philox4x32_10([0; 4], [0; 2]),
            [0x6627_e8d5, 0xe169_c58d, 0xbc57_ac4c, 0x9b00_dbd8]
        );
        assert_eq!(
            philox4x32_10([u32::MAX; 4], [u32::MAX; 2]),
            [0x408f_276d, 0x41c8_3b0e, 0xa20b_c7c6, 0x6d54_51fd]
        );
        assert_eq!(
            philox4x32_10(
                [0x243f_6a88, 0x85a3_08d3, 0x1319_8a2e, 0x0370_7344],
                [0xa409_3822, 0x299f_31d0]
            ),
            [0xd16c_fe09, 0x94fd_cceb, 0x5001_e420, 0x2412_6ea1]
        );
    }

    #[test]
    fn threshold_endpoints() {
        assert_eq!(threshold(0.0), 0);
        assert_eq!(threshold(1.0), 1 << 32);
        assert_eq!(threshold(0.5), 1 << 31);
        // rounding absorbs representation error right below 1
        assert_eq!(threshold(1.0 - 1e-16), 1 << 32);
    }

    #[test]
    fn words_depend_on_every_coordinate() {
        let base = bond_words(7, 3, 11);
        assert_ne!(base, bond_words(8, 3, 11));
        assert_ne!(base, bond_words(7, 4, 11));
        assert_ne!(base, bond_words(7, 3, 12));
        assert_ne!(base, bond_words(7, 3 | (1 << 32), 11));
        assert_eq!(base, bond_words(7, 3, 11));
    }
}
