//! Symbolic cell expressions of reduction matrices.

use std::fmt;

/// A key-controlled choice between two cell expressions:
/// `on_true * p_round + on_false * !p_round`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mux {
    pub round: usize,
    pub on_true: Box<ObfEntry>,
    pub on_false: Box<ObfEntry>,
}

/// One cell of a (possibly obfuscated) reduction matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ObfEntry {
    Zero,
    /// Partial-product sum `s_i`.
    Sym(usize),
    /// Obfuscation term inserted at a diff position.
    Delta(Mux),
    /// Pair of opposite-polarity terms folded into a single cell.
    ReducedDelta(Mux),
}

impl ObfEntry {
    pub fn delta(round: usize, on_true: ObfEntry, on_false: ObfEntry) -> Self {
        ObfEntry::Delta(Mux {
            round,
            on_true: Box::new(on_true),
            on_false: Box::new(on_false),
        })
    }

    pub fn reduced(round: usize, on_true: ObfEntry, on_false: ObfEntry) -> Self {
        ObfEntry::ReducedDelta(Mux {
            round,
            on_true: Box::new(on_true),
            on_false: Box::new(on_false),
        })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ObfEntry::Zero)
    }

    pub fn mux(&self) -> Option<&Mux> {
        match self {
            ObfEntry::Delta(m) | ObfEntry::ReducedDelta(m) => Some(m),
            _ => None,
        }
    }

    pub fn is_keyed(&self) -> bool {
        self.mux().is_some()
    }

    /// Highest round index used anywhere in the expression.
    pub fn max_round(&self) -> usize {
        match self.mux() {
            Some(m) => m
                .round
                .max(m.on_true.max_round())
                .max(m.on_false.max_round()),
            None => 0,
        }
    }

    /// Resolves the expression under a scalar key; `key[r - 1]` is `p_r`.
    pub fn select(&self, key: &[bool]) -> ObfEntry {
        match self.mux() {
            Some(m) => {
                if key[m.round - 1] {
                    m.on_true.select(key)
                } else {
                    m.on_false.select(key)
                }
            }
            None => self.clone(),
        }
    }

    /// Bit-sliced evaluation. `sums[i]` holds the lanes of `s_i`,
    /// `key[r - 1]` the lanes of `p_r`.
    pub fn eval_lanes(&self, sums: &[u64], key: &[u64]) -> u64 {
        match self {
            ObfEntry::Zero => 0,
            ObfEntry::Sym(i) => sums[*i],
            ObfEntry::Delta(m) | ObfEntry::ReducedDelta(m) => {
                let p = key[m.round - 1];
                (m.on_true.eval_lanes(sums, key) & p) | (m.on_false.eval_lanes(sums, key) & !p)
            }
        }
    }
}

impl fmt::Display for ObfEntry {
    /// `0`, `s4`, `d1(s4,0)` for a delta of round 1, `r1(s6,s4)` for a
    /// reduced delta; the first operand is selected by `p = 1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObfEntry::Zero => f.write_str("0"),
            ObfEntry::Sym(i) => write!(f, "s{i}"),
            ObfEntry::Delta(m) => write!(f, "d{}({},{})", m.round, m.on_true, m.on_false),
            ObfEntry::ReducedDelta(m) => write!(f, "r{}({},{})", m.round, m.on_true, m.on_false),
        }
    }
}
