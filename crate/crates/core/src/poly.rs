//! Polynomials over GF(2).
//!
//! A [`Poly`] stores its coefficients LSB-first: bit 0 of the first word is
//! the constant term. Polynomials of any degree are supported; when both
//! operands fit in 128 bits the arithmetic drops to single-word routines.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{BitXor, BitXorAssign};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Highest degree accepted by [`enumerate_irreducible`] unless overridden.
pub const DEFAULT_MAX_DEGREE: usize = 64;

/// Highest degree for which the unfiltered enumeration scans every candidate.
pub const DEFAULT_MAX_EXHAUSTIVE_DEGREE: usize = 20;

/// Degree up to which [`is_irreducible`] uses trial division.
pub const TRIAL_DIVISION_MAX_DEGREE: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("division by the zero polynomial")]
    DivisionByZero,
    #[error("operand of degree {degree} is out of range for a modulus of degree {modulus_degree}")]
    OperandOutOfRange {
        degree: isize,
        modulus_degree: usize,
    },
    #[error("irreducibility is undefined for constant polynomials")]
    ConstantPolynomial,
    #[error("degree {m} is outside the supported range 2..={max}")]
    DegreeOutOfRange { m: usize, max: usize },
    #[error("exhaustive enumeration of degree {m} exceeds the limit of {max}; use a shape filter")]
    EnumerationTooLarge { m: usize, max: usize },
    #[error("cannot parse polynomial `{input}`: {reason}")]
    Parse { input: String, reason: String },
    #[error("{poly} is not irreducible")]
    Reducible { poly: Poly },
    #[error("polynomial {poly} must have degree {expected}")]
    WrongDegree { poly: Poly, expected: usize },
}

/// A polynomial over GF(2).
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Poly {
    // Little-endian words, no trailing zero words.
    words: Vec<u64>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { words: Vec::new() }
    }

    pub fn one() -> Self {
        Poly::from_u64(1)
    }

    pub fn x() -> Self {
        Poly::from_u64(2)
    }

    pub fn monomial(exp: usize) -> Self {
        let mut p = Poly::zero();
        p.set_coeff(exp, true);
        p
    }

    pub fn from_u64(bits: u64) -> Self {
        Poly::from_words(vec![bits])
    }

    pub fn from_u128(bits: u128) -> Self {
        Poly::from_words(vec![bits as u64, (bits >> 64) as u64])
    }

    pub fn from_words(mut words: Vec<u64>) -> Self {
        while words.last() == Some(&0) {
            words.pop();
        }
        Poly { words }
    }

    /// Builds a polynomial from a list of exponents. Repeated exponents cancel.
    pub fn from_exponents(exps: &[usize]) -> Self {
        let mut p = Poly::zero();
        for &e in exps {
            p.flip_coeff(e);
        }
        p
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn is_zero(&self) -> bool {
        self.words.is_empty()
    }

    /// Degree of the polynomial; the zero polynomial has degree -1.
    pub fn degree(&self) -> isize {
        match self.words.last() {
            None => -1,
            Some(&top) => (self.words.len() * 64 - 1 - top.leading_zeros() as usize) as isize,
        }
    }

    pub fn coeff(&self, exp: usize) -> bool {
        self.words
            .get(exp / 64)
            .is_some_and(|w| (w >> (exp % 64)) & 1 == 1)
    }

    pub fn set_coeff(&mut self, exp: usize, value: bool) {
        if self.coeff(exp) != value {
            self.flip_coeff(exp);
        }
    }

    fn flip_coeff(&mut self, exp: usize) {
        let idx = exp / 64;
        if self.words.len() <= idx {
            self.words.resize(idx + 1, 0);
        }
        self.words[idx] ^= 1u64 << (exp % 64);
        self.trim();
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }

    /// Number of nonzero coefficients.
    pub fn weight(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Exponents of the nonzero coefficients in ascending order.
    pub fn exponents(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(i, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let bit = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i * 64 + bit)
            })
        })
    }

    pub fn to_u64(&self) -> Option<u64> {
        match self.words.len() {
            0 => Some(0),
            1 => Some(self.words[0]),
            _ => None,
        }
    }

    pub fn to_u128(&self) -> Option<u128> {
        match self.words.len() {
            0 => Some(0),
            1 => Some(self.words[0] as u128),
            2 => Some(self.words[0] as u128 | (self.words[1] as u128) << 64),
            _ => None,
        }
    }

    /// Multiplies by `x^k`.
    pub fn shl(&self, k: usize) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let (wshift, bshift) = (k / 64, k % 64);
        let mut out = vec![0u64; self.words.len() + wshift + 1];
        for (i, &w) in self.words.iter().enumerate() {
            out[i + wshift] ^= w << bshift;
            if bshift != 0 {
                out[i + wshift + 1] ^= w >> (64 - bshift);
            }
        }
        Poly::from_words(out)
    }

    /// Coefficients rendered MSB-first, e.g. `[1110]` for `x^3+x^2+x`.
    /// `width` pads with leading zeros.
    pub fn to_bit_string(&self, width: usize) -> String {
        let len = width.max((self.degree() + 1) as usize).max(1);
        let bits: String = (0..len)
            .rev()
            .map(|i| if self.coeff(i) { '1' } else { '0' })
            .collect();
        format!("[{bits}]")
    }

    /// Lower-case hex of the coefficient bit pattern without a prefix.
    pub fn to_hex(&self) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut s = format!("{:x}", self.words.last().unwrap());
        for w in self.words.iter().rev().skip(1) {
            s.push_str(&format!("{w:016x}"));
        }
        s
    }

    /// Parses a bare or `0x`-prefixed hex coefficient string.
    pub fn from_hex(text: &str) -> Result<Poly, PolyError> {
        let err = |reason: &str| PolyError::Parse {
            input: text.to_string(),
            reason: reason.to_string(),
        };
        let digits = text
            .trim()
            .strip_prefix("0x")
            .or_else(|| text.trim().strip_prefix("0X"))
            .unwrap_or(text.trim());
        if digits.is_empty() {
            return Err(err("empty hex string"));
        }
        let mut words = Vec::new();
        let bytes = digits.as_bytes();
        let mut end = bytes.len();
        while end > 0 {
            let start = end.saturating_sub(16);
            let chunk = &digits[start..end];
            let w = u64::from_str_radix(chunk, 16).map_err(|_| err("invalid hex digit"))?;
            words.push(w);
            end = start;
        }
        Ok(Poly::from_words(words))
    }

    /// Shape classification used by the trinomial/pentanomial filters.
    pub fn shape(&self) -> PolyShape {
        PolyShape::of(self)
    }
}

impl Ord for Poly {
    fn cmp(&self, other: &Self) -> Ordering {
        self.words
            .len()
            .cmp(&other.words.len())
            .then_with(|| self.words.iter().rev().cmp(other.words.iter().rev()))
    }
}

impl PartialOrd for Poly {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl BitXorAssign<&Poly> for Poly {
    fn bitxor_assign(&mut self, rhs: &Poly) {
        if self.words.len() < rhs.words.len() {
            self.words.resize(rhs.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&rhs.words) {
            *a ^= b;
        }
        self.trim();
    }
}

impl BitXor<&Poly> for &Poly {
    type Output = Poly;
    fn bitxor(self, rhs: &Poly) -> Poly {
        let mut out = self.clone();
        out ^= rhs;
        out
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let exps: Vec<usize> = self.exponents().collect();
        let terms: Vec<String> = exps
            .iter()
            .rev()
            .map(|&e| match e {
                0 => "1".to_string(),
                1 => "x".to_string(),
                _ => format!("x^{e}"),
            })
            .collect();
        f.write_str(&terms.join("+"))
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({self})")
    }
}

impl FromStr for Poly {
    type Err = PolyError;

    /// Accepts `0x`-prefixed hex (LSB is the constant term) or the human
    /// form `x^4+x^3+1`.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let trimmed = text.trim();
        if trimmed.starts_with("0x") || trimmed.starts_with("0X") {
            return Poly::from_hex(trimmed);
        }
        let err = |reason: String| PolyError::Parse {
            input: text.to_string(),
            reason,
        };
        let compact: String = trimmed.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(err("empty polynomial".into()));
        }
        if compact == "0" {
            return Ok(Poly::zero());
        }
        let mut p = Poly::zero();
        for term in compact.split('+') {
            let exp = match term {
                "1" => 0,
                "x" | "X" => 1,
                "" => return Err(err("empty term".into())),
                _ => {
                    let rest = term
                        .strip_prefix("x^")
                        .or_else(|| term.strip_prefix("X^"))
                        .ok_or_else(|| err(format!("unrecognised term `{term}`")))?;
                    let rest = rest.trim_start_matches('{').trim_end_matches('}');
                    rest.parse::<usize>()
                        .map_err(|_| err(format!("bad exponent in `{term}`")))?
                }
            };
            if p.coeff(exp) {
                return Err(err(format!("duplicate term `{term}`")));
            }
            p.set_coeff(exp, true);
        }
        Ok(p)
    }
}

impl Serialize for Poly {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Poly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Coefficient-wise XOR.
pub fn poly_add(a: &Poly, b: &Poly) -> Poly {
    a ^ b
}

/// Carry-less product.
pub fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    if let (Some(x), Some(y)) = (a.to_u64(), b.to_u64()) {
        return Poly::from_u128(small::clmul(x, y));
    }
    let mut acc = Poly::zero();
    for e in b.exponents() {
        acc ^= &a.shl(e);
    }
    acc
}

/// Remainder of carry-less division of `a` by `p`.
pub fn poly_mod(a: &Poly, p: &Poly) -> Result<Poly, PolyError> {
    if p.is_zero() {
        return Err(PolyError::DivisionByZero);
    }
    if let (Some(x), Some(y)) = (a.to_u128(), p.to_u128()) {
        return Ok(Poly::from_u128(small::rem(x, y)));
    }
    let pd = p.degree();
    let mut r = a.clone();
    while r.degree() >= pd {
        let shift = (r.degree() - pd) as usize;
        r ^= &p.shl(shift);
    }
    Ok(r)
}

/// `a * b mod p`. Both operands must have degree below that of `p`.
pub fn poly_mulmod(a: &Poly, b: &Poly, p: &Poly) -> Result<Poly, PolyError> {
    if p.is_zero() {
        return Err(PolyError::DivisionByZero);
    }
    let pd = p.degree();
    for op in [a, b] {
        if op.degree() >= pd {
            return Err(PolyError::OperandOutOfRange {
                degree: op.degree(),
                modulus_degree: pd as usize,
            });
        }
    }
    if pd <= 64 {
        if let (Some(x), Some(y), Some(m)) = (a.to_u64(), b.to_u64(), p.to_u128()) {
            return Ok(Poly::from_u128(small::rem(small::clmul(x, y), m)));
        }
    }
    poly_mod(&poly_mul(a, b), p)
}

pub fn poly_gcd(a: &Poly, b: &Poly) -> Poly {
    let (mut a, mut b) = (a.clone(), b.clone());
    while !b.is_zero() {
        let r = poly_mod(&a, &b).expect("b is nonzero");
        a = b;
        b = r;
    }
    a
}

/// Irreducibility over GF(2). Trial division up to degree 16, the
/// power/gcd test above.
pub fn is_irreducible(p: &Poly) -> Result<bool, PolyError> {
    if p.degree() < 1 {
        return Err(PolyError::ConstantPolynomial);
    }
    if p.degree() as usize <= TRIAL_DIVISION_MAX_DEGREE {
        is_irreducible_trial(p)
    } else {
        is_irreducible_rabin(p)
    }
}

/// Trial division by every polynomial of degree 1..=deg/2.
pub fn is_irreducible_trial(p: &Poly) -> Result<bool, PolyError> {
    let m = p.degree();
    if m < 1 {
        return Err(PolyError::ConstantPolynomial);
    }
    let m = m as usize;
    if m == 1 {
        return Ok(true);
    }
    if !p.coeff(0) {
        return Ok(false);
    }
    for d in 1..=m / 2 {
        // Divisors of a polynomial with nonzero constant term have one too.
        let base = 1u128 << d;
        for low in 0..(1u128 << (d - 1)) {
            let f = Poly::from_u128(base | (low << 1) | 1);
            if poly_mod(p, &f)?.is_zero() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Rabin's test: `x^(2^m) = x mod p` and `gcd(x^(2^(m/q)) - x, p) = 1`
/// for each prime `q` dividing `m`.
pub fn is_irreducible_rabin(p: &Poly) -> Result<bool, PolyError> {
    let m = p.degree();
    if m < 1 {
        return Err(PolyError::ConstantPolynomial);
    }
    let m = m as usize;
    if m == 1 {
        return Ok(true);
    }
    if !p.coeff(0) {
        return Ok(false);
    }
    let x = Poly::x();
    let checkpoints: Vec<usize> = prime_factors(m).into_iter().map(|q| m / q).collect();
    let mut h = x.clone();
    for i in 1..=m {
        h = poly_mulmod(&h, &h, p)?;
        if checkpoints.contains(&i) {
            let g = poly_gcd(&(&h ^ &x), p);
            if g.degree() != 0 {
                return Ok(false);
            }
        }
    }
    Ok(h == x)
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Trinomial,
    Pentanomial,
    Other,
}

/// Term-count classification; `second` is the second-highest exponent
/// (the `a` of `x^m + x^a + ...`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolyShape {
    pub kind: ShapeKind,
    pub second: Option<usize>,
}

impl PolyShape {
    pub fn of(p: &Poly) -> Self {
        let kind = match p.weight() {
            3 => ShapeKind::Trinomial,
            5 => ShapeKind::Pentanomial,
            _ => ShapeKind::Other,
        };
        let second = p
            .exponents()
            .collect::<Vec<_>>()
            .iter()
            .rev()
            .nth(1)
            .copied();
        PolyShape { kind, second }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolyFilter {
    #[default]
    All,
    #[serde(alias = "tri_penta")]
    TrinomialPentanomial,
    #[serde(alias = "nist")]
    NistShape,
}

impl PolyFilter {
    /// Whether `p` (of degree `m`) passes the shape part of the filter.
    pub fn accepts(self, p: &Poly) -> bool {
        let shape = p.shape();
        match self {
            PolyFilter::All => true,
            PolyFilter::TrinomialPentanomial => shape.kind != ShapeKind::Other,
            PolyFilter::NistShape => {
                let m = p.degree().max(0) as usize;
                shape.kind != ShapeKind::Other && shape.second.is_some_and(|a| 2 * (m - a) >= m)
            }
        }
    }
}

impl FromStr for PolyFilter {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "all" => Ok(PolyFilter::All),
            "trinomial_pentanomial" | "tri_penta" => Ok(PolyFilter::TrinomialPentanomial),
            "nist_shape" | "nist" => Ok(PolyFilter::NistShape),
            _ => Err(format!("unknown polynomial filter `{s}`")),
        }
    }
}

/// Bounds on the enumeration scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumLimits {
    pub max_degree: usize,
    pub max_exhaustive_degree: usize,
}

impl Default for EnumLimits {
    fn default() -> Self {
        EnumLimits {
            max_degree: DEFAULT_MAX_DEGREE,
            max_exhaustive_degree: DEFAULT_MAX_EXHAUSTIVE_DEGREE,
        }
    }
}

/// All degree-`m` irreducible polynomials passing `filter`, ascending by
/// coefficient bit pattern.
pub fn enumerate_irreducible(m: usize, filter: PolyFilter) -> Result<Vec<Poly>, PolyError> {
    Ok(irreducibles(m, filter, EnumLimits::default())?.collect())
}

/// Lazy form of [`enumerate_irreducible`]; `.take(k)` only tests as many
/// candidates as needed.
pub fn irreducibles(
    m: usize,
    filter: PolyFilter,
    limits: EnumLimits,
) -> Result<impl Iterator<Item = Poly>, PolyError> {
    if m < 2 || m > limits.max_degree {
        return Err(PolyError::DegreeOutOfRange {
            m,
            max: limits.max_degree,
        });
    }
    let candidates: Box<dyn Iterator<Item = Poly>> = match filter {
        PolyFilter::All => {
            if m > limits.max_exhaustive_degree {
                return Err(PolyError::EnumerationTooLarge {
                    m,
                    max: limits.max_exhaustive_degree,
                });
            }
            let top = Poly::monomial(m);
            let count = 1u64 << (m - 1);
            Box::new((0..count).map(move |low| &top ^ &Poly::from_u64((low << 1) | 1)))
        }
        PolyFilter::TrinomialPentanomial | PolyFilter::NistShape => {
            Box::new(sparse_candidates(m).into_iter())
        }
    };
    Ok(candidates.filter(move |p| {
        filter.accepts(p) && is_irreducible(p).expect("candidate degree is at least 2")
    }))
}

// Trinomials and pentanomials of degree m with constant term 1, ascending.
fn sparse_candidates(m: usize) -> Vec<Poly> {
    let mut out = Vec::new();
    for a in 1..m {
        out.push(Poly::from_exponents(&[m, a, 0]));
        for b in 1..a {
            for c in 1..b {
                out.push(Poly::from_exponents(&[m, a, b, c, 0]));
            }
        }
    }
    out.sort();
    out
}

/// A validated field: `p` is irreducible of degree `m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldSpec {
    pub m: usize,
    pub p: Poly,
}

impl FieldSpec {
    pub fn new(p: Poly) -> Result<Self, PolyError> {
        if p.degree() < 1 {
            return Err(PolyError::ConstantPolynomial);
        }
        if !is_irreducible(&p)? {
            return Err(PolyError::Reducible { poly: p });
        }
        Ok(FieldSpec {
            m: p.degree() as usize,
            p,
        })
    }

    /// Like [`FieldSpec::new`], additionally checking the degree.
    pub fn with_degree(m: usize, p: Poly) -> Result<Self, PolyError> {
        if p.degree() != m as isize {
            return Err(PolyError::WrongDegree {
                poly: p,
                expected: m,
            });
        }
        FieldSpec::new(p)
    }

    pub fn mul(&self, a: &Poly, b: &Poly) -> Result<Poly, PolyError> {
        poly_mulmod(a, b, &self.p)
    }
}

/// Word-level helpers for operands of at most 64 (products 128) bits.
pub(crate) mod small {
    /// Carry-less 64x64 -> 128 multiply.
    pub fn clmul(a: u64, b: u64) -> u128 {
        let mut acc = 0u128;
        let mut rest = b;
        while rest != 0 {
            let bit = rest.trailing_zeros();
            acc ^= (a as u128) << bit;
            rest &= rest - 1;
        }
        acc
    }

    /// Remainder of `a` divided by the nonzero `p`.
    pub fn rem(mut a: u128, p: u128) -> u128 {
        debug_assert!(p != 0);
        let pd = 127 - p.leading_zeros();
        while a != 0 {
            let ad = 127 - a.leading_zeros();
            if ad < pd {
                break;
            }
            a ^= p << (ad - pd);
        }
        a
    }
}

/// Fast multiplier for fields of degree at most 64, used by the simulator
/// to produce reference products in bulk.
#[derive(Debug, Clone, Copy)]
pub struct SmallField {
    modulus: u128,
    mask: u64,
}

impl SmallField {
    pub fn new(p: &Poly) -> Option<Self> {
        let d = p.degree();
        if !(1..=64).contains(&d) {
            return None;
        }
        Some(SmallField {
            modulus: p.to_u128()?,
            mask: if d == 64 { u64::MAX } else { (1u64 << d) - 1 },
        })
    }

    pub fn mul(&self, a: u64, b: u64) -> u64 {
        small::rem(small::clmul(a & self.mask, b & self.mask), self.modulus) as u64
    }
}
