//! Bit-sliced stimulus packing: up to 64 input vectors evaluated at once,
//! one `u64` per signal with lane `j` holding vector `j`.

use crate::poly::Poly;

pub const LANES: usize = 64;

/// Transposes up to 64 polynomials into `width` lane words.
pub fn pack(values: &[Poly], width: usize) -> Vec<u64> {
    debug_assert!(values.len() <= LANES);
    let mut out = vec![0u64; width];
    for (lane, v) in values.iter().enumerate() {
        for e in v.exponents().take_while(|&e| e < width) {
            out[e] |= 1u64 << lane;
        }
    }
    out
}

/// Same as [`pack`] for values that fit in a machine word.
pub fn pack_words(values: &[u64], width: usize) -> Vec<u64> {
    debug_assert!(values.len() <= LANES);
    let mut out = vec![0u64; width];
    for (lane, &v) in values.iter().enumerate() {
        let mut rest = v;
        while rest != 0 {
            let bit = rest.trailing_zeros() as usize;
            if bit < width {
                out[bit] |= 1u64 << lane;
            }
            rest &= rest - 1;
        }
    }
    out
}

/// Inverse of [`pack`]: reads `count` lanes back out as polynomials.
pub fn unpack(words: &[u64], count: usize) -> Vec<Poly> {
    (0..count)
        .map(|lane| {
            let exps: Vec<usize> = words
                .iter()
                .enumerate()
                .filter(|(_, w)| (*w >> lane) & 1 == 1)
                .map(|(i, _)| i)
                .collect();
            Poly::from_exponents(&exps)
        })
        .collect()
}

/// Inverse of [`pack_words`] for widths up to 64.
pub fn unpack_words(words: &[u64], count: usize) -> Vec<u64> {
    debug_assert!(words.len() <= 64);
    (0..count)
        .map(|lane| {
            words
                .iter()
                .enumerate()
                .fold(0u64, |acc, (i, w)| acc | (((w >> lane) & 1) << i))
        })
        .collect()
}

/// Broadcasts a key assignment to all lanes.
pub fn broadcast_key(key: &[bool]) -> Vec<u64> {
    key.iter().map(|&b| if b { u64::MAX } else { 0 }).collect()
}
