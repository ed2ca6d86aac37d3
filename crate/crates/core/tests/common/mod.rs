#![allow(dead_code)]

use gfobf::lanes;
use gfobf::netlist::Netlist;
use gfobf::Poly;

/// Shift-and-add multiplication modulo `p` (bit `m` set), independent of
/// the library's field arithmetic.
pub fn ref_mul(mut a: u128, b: u128, p: u128, m: usize) -> u128 {
    let top = 1u128 << m;
    let mut acc = 0u128;
    for i in 0..m {
        if (b >> i) & 1 == 1 {
            acc ^= a;
        }
        a <<= 1;
        if a & top != 0 {
            a ^= p;
        }
    }
    acc
}

pub fn bits(p: &Poly) -> u128 {
    p.to_u128().expect("polynomial fits in 128 bits")
}

/// Evaluates a netlist on up to 64 operand pairs (`m <= 64`).
pub fn eval_words(n: &Netlist, a: &[u64], b: &[u64], key: &[bool]) -> Vec<u64> {
    let m = n.m;
    let out = n.eval_lanes(
        &lanes::pack_words(a, m),
        &lanes::pack_words(b, m),
        &lanes::broadcast_key(key),
    );
    lanes::unpack_words(&out, a.len())
}

/// Counts operand pairs on which `n` under `key` differs from
/// multiplication modulo `p`. Exhaustive when `random` is `None`.
pub fn mismatches(n: &Netlist, key: &[bool], p: &Poly, random: Option<(u64, u64)>) -> u64 {
    use rand::{Rng, SeedableRng};
    let m = n.m;
    let pb = bits(p);
    let mask = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
    let pairs: Box<dyn Iterator<Item = (u64, u64)>> = match random {
        None => Box::new((0..1u64 << (2 * m)).map(move |v| (v & mask, v >> m))),
        Some((count, seed)) => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            Box::new((0..count).map(move |_| (rng.gen::<u64>() & mask, rng.gen::<u64>() & mask)))
        }
    };
    let mut bad = 0;
    let mut a = Vec::with_capacity(64);
    let mut b = Vec::with_capacity(64);
    let mut flush = |a: &mut Vec<u64>, b: &mut Vec<u64>| {
        let got = eval_words(n, a, b, key);
        for i in 0..a.len() {
            if got[i] as u128 != ref_mul(a[i] as u128, b[i] as u128, pb, m) {
                bad += 1;
            }
        }
        a.clear();
        b.clear();
    };
    for (x, y) in pairs {
        a.push(x);
        b.push(y);
        if a.len() == 64 {
            flush(&mut a, &mut b);
        }
    }
    if !a.is_empty() {
        flush(&mut a, &mut b);
    }
    bad
}

/// Function index chosen by a logical key: the largest round whose bit is
/// zero, or 0 when every bit is one.
pub fn largest_zero_round(logical: &[bool]) -> usize {
    let mut class = 0;
    for (i, &bit) in logical.iter().enumerate() {
        if !bit {
            class = i + 1;
        }
    }
    class
}

pub fn p(s: &str) -> Poly {
    s.parse().unwrap()
}
