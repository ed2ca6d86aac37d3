//! Key-controlled merging of several reduction matrices into one.
//!
//! Each round compares the current matrix with the structure of one more
//! polynomial and replaces every differing cell by a delta term
//! `current * p + next * !p`. Rounds nest: round `r` wraps whatever the
//! previous rounds left in the cell. With logical key bit `p_r = 1` the
//! existing behaviour is kept, so the all-ones key selects the true
//! polynomial and, in general, the function is chosen by the largest round
//! whose bit is zero.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entry::ObfEntry;
use crate::lanes;
use crate::optimize::OptimizationSummary;
use crate::poly::{poly_mulmod, FieldSpec, Poly, PolyError};
use crate::structure::{
    column_of, dump_cells, eval_cells_lanes, gen_structure, MultStructure, ReductionMatrix,
    StructureError, SumVector,
};

/// Key widths above this are not given an explicit class map.
pub const CLASS_MAP_MAX_BITS: usize = 16;

const CLASS_SAMPLE_SEED: u64 = 0x6766_6f62_665f_6b63;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ObfError {
    #[error("matrix dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("round {round} is already used or out of sequence (next free round is {next})")]
    DuplicateRound { round: usize, next: usize },
    #[error("polynomial {0} appears more than once")]
    DuplicatePolynomial(Poly),
    #[error("polynomial {poly} has degree {degree}, expected {m}")]
    WrongDegree { poly: Poly, degree: isize, m: usize },
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("exhaustive exploration of {count} permutations exceeds the budget of {budget}")]
    PermutationBudget { count: u128, budget: u128 },
    #[error("only {have} polynomials of degree {m} pass the filter, {want} requested")]
    NotEnoughPolynomials { m: usize, want: usize, have: usize },
    #[error("exhaustive exploration is limited to {max} obfuscation polynomials, got {got}")]
    TooManyOthers { got: usize, max: usize },
}

/// Key bits of an obfuscated design and the function each assignment selects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeySpec {
    pub n: usize,
    /// Signal names, `p1..pn`; bit `i` of the key port is `bits[i]`.
    pub bits: Vec<String>,
    /// Per-bit polarity: when set, the physical key bit is the complement of
    /// the logical switch.
    pub inverted: Vec<bool>,
    /// Physical assignment selecting the true function.
    pub true_key: Vec<bool>,
    /// `functions[0]` is the true polynomial, `functions[r]` the one merged
    /// in round `r`.
    pub functions: Vec<Poly>,
    /// Function index selected by each physical assignment, indexed by the
    /// assignment read as an integer (bit `i` = key bit `i`). Absent for
    /// keys wider than [`CLASS_MAP_MAX_BITS`].
    pub class_map: Option<Vec<usize>>,
}

impl KeySpec {
    fn plain(p: Poly) -> Self {
        KeySpec {
            n: 0,
            bits: Vec::new(),
            inverted: Vec::new(),
            true_key: Vec::new(),
            functions: vec![p],
            class_map: Some(vec![0]),
        }
    }

    /// Physical key bits to logical switch values.
    pub fn logical(&self, physical: &[bool]) -> Vec<bool> {
        physical
            .iter()
            .zip(&self.inverted)
            .map(|(&k, &inv)| k ^ inv)
            .collect()
    }

    /// Function index predicted by the largest-zero-round rule.
    pub fn rule_class(&self, physical: &[bool]) -> usize {
        let logical = self.logical(physical);
        logical.iter().rposition(|&b| !b).map_or(0, |i| i + 1)
    }

    /// Polynomial predicted for a physical assignment.
    pub fn rule_poly(&self, physical: &[bool]) -> &Poly {
        &self.functions[self.rule_class(physical)]
    }

    /// A physical assignment selecting function `class`.
    pub fn representative(&self, class: usize) -> Vec<bool> {
        let logical: Vec<bool> = (1..=self.n).map(|r| r != class).collect();
        logical
            .iter()
            .zip(&self.inverted)
            .map(|(&p, &inv)| p ^ inv)
            .collect()
    }
}

/// Integer form of a key assignment, bit `i` = `key[i]`.
pub fn key_index(key: &[bool]) -> usize {
    key.iter()
        .enumerate()
        .fold(0usize, |acc, (i, &b)| acc | (usize::from(b) << i))
}

/// Inverse of [`key_index`].
pub fn key_from_index(index: usize, n: usize) -> Vec<bool> {
    (0..n).map(|i| (index >> i) & 1 == 1).collect()
}

/// A reduction matrix whose cells may contain delta terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObfMatrix {
    pub m: usize,
    pub cells: Vec<Vec<ObfEntry>>,
    pub sums: SumVector,
    pub true_field: FieldSpec,
    pub obfuscated_fields: Vec<FieldSpec>,
    pub key_spec: KeySpec,
    pub optimization: Option<OptimizationSummary>,
}

impl ObfMatrix {
    /// Wraps a plain structure as a keyless matrix.
    pub fn plain(s: &MultStructure) -> Self {
        ObfMatrix {
            m: s.m(),
            cells: s.matrix.cells.clone(),
            sums: s.sums.clone(),
            true_field: s.matrix.field.clone(),
            obfuscated_fields: Vec::new(),
            key_spec: KeySpec::plain(s.matrix.field.p.clone()),
            optimization: None,
        }
    }

    pub fn rounds(&self) -> usize {
        self.key_spec.n
    }

    pub fn column(&self, col: usize) -> Vec<&ObfEntry> {
        column_of(&self.cells, col)
    }

    pub fn dump(&self) -> String {
        dump_cells(&self.cells)
    }

    /// Cells holding a delta or reduced delta term.
    pub fn delta_count(&self) -> usize {
        self.cells.iter().flatten().filter(|e| e.is_keyed()).count()
    }

    pub fn reduced_delta_count(&self) -> usize {
        self.cells
            .iter()
            .flatten()
            .filter(|e| matches!(e, ObfEntry::ReducedDelta(_)))
            .count()
    }

    /// Bit-sliced evaluation; `key` holds lane words per physical key bit.
    pub fn eval_lanes(&self, a: &[u64], b: &[u64], key: &[u64]) -> Vec<u64> {
        let logical: Vec<u64> = key
            .iter()
            .zip(&self.key_spec.inverted)
            .map(|(&k, &inv)| if inv { !k } else { k })
            .collect();
        eval_cells_lanes(&self.cells, &self.sums, a, b, &logical)
    }

    /// Product computed under a physical key assignment.
    pub fn eval(&self, a: &Poly, b: &Poly, key: &[bool]) -> Poly {
        let al = lanes::pack(std::slice::from_ref(a), self.m);
        let bl = lanes::pack(std::slice::from_ref(b), self.m);
        let out = self.eval_lanes(&al, &bl, &lanes::broadcast_key(key));
        lanes::unpack(&out, 1).remove(0)
    }

    /// Concrete matrix selected by a physical key (deltas resolved).
    pub fn select(&self, key: &[bool]) -> Vec<Vec<ObfEntry>> {
        let logical = self.key_spec.logical(key);
        self.cells
            .iter()
            .map(|row| row.iter().map(|e| e.select(&logical)).collect())
            .collect()
    }

    /// Recomputes the class map by simulating every key assignment on a
    /// fixed input sample. Keys matching several identical functions map to
    /// the lowest index.
    pub(crate) fn compute_class_map(&self) -> Option<Vec<usize>> {
        let n = self.key_spec.n;
        if n > CLASS_MAP_MAX_BITS {
            return None;
        }
        let (a, b) = class_sample(self.m);
        let al = lanes::pack(&a, self.m);
        let bl = lanes::pack(&b, self.m);
        let expected: Vec<Vec<u64>> = self
            .key_spec
            .functions
            .iter()
            .map(|p| {
                let prods: Vec<Poly> = a
                    .iter()
                    .zip(&b)
                    .map(|(x, y)| poly_mulmod(x, y, p).expect("sample fits the field"))
                    .collect();
                lanes::pack(&prods, self.m)
            })
            .collect();
        let map = (0..1usize << n)
            .map(|idx| {
                let key = lanes::broadcast_key(&key_from_index(idx, n));
                let out = self.eval_lanes(&al, &bl, &key);
                expected
                    .iter()
                    .position(|e| *e == out)
                    .expect("every key assignment selects one of the merged functions")
            })
            .collect();
        Some(map)
    }

    pub(crate) fn refresh_class_map(&mut self) {
        self.key_spec.class_map = self.compute_class_map();
    }
}

impl From<&MultStructure> for ObfMatrix {
    fn from(s: &MultStructure) -> Self {
        ObfMatrix::plain(s)
    }
}

// 64 deterministic operand pairs. The first pair (x^{m-1}, x) yields
// x^m mod P, which differs for every distinct modulus of degree m.
fn class_sample(m: usize) -> (Vec<Poly>, Vec<Poly>) {
    let mut rng = ChaCha8Rng::seed_from_u64(CLASS_SAMPLE_SEED ^ m as u64);
    let mut a = vec![Poly::monomial(m - 1)];
    let mut b = vec![Poly::x()];
    while a.len() < lanes::LANES {
        a.push(random_poly(&mut rng, m));
        b.push(random_poly(&mut rng, m));
    }
    (a, b)
}

/// Uniform element of degree below `m`.
pub(crate) fn random_poly<R: Rng>(rng: &mut R, m: usize) -> Poly {
    let words = m.div_ceil(64);
    let mut w: Vec<u64> = (0..words).map(|_| rng.gen()).collect();
    if !m.is_multiple_of(64) {
        if let Some(last) = w.last_mut() {
            *last &= (1u64 << (m % 64)) - 1;
        }
    }
    Poly::from_words(w)
}

/// Positions `(row, col)`, row-major, where the two cell matrices are not
/// structurally identical.
pub fn diff_matrices(
    a: &[Vec<ObfEntry>],
    b: &[Vec<ObfEntry>],
) -> Result<Vec<(usize, usize)>, ObfError> {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return Err(ObfError::DimensionMismatch(a.len(), b.len()));
    }
    Ok(a.iter()
        .zip(b)
        .enumerate()
        .flat_map(|(r, (ra, rb))| {
            ra.iter()
                .zip(rb)
                .enumerate()
                .filter(|(_, (x, y))| x != y)
                .map(move |(c, _)| (r, c))
        })
        .collect())
}

fn merge_round(
    current: &ObfMatrix,
    next: &ReductionMatrix,
    round: usize,
) -> Result<ObfMatrix, ObfError> {
    if current.m != next.m {
        return Err(ObfError::DimensionMismatch(current.m, next.m));
    }
    let expected = current.key_spec.n + 1;
    if round != expected {
        return Err(ObfError::DuplicateRound {
            round,
            next: expected,
        });
    }
    let mut out = current.clone();
    for (r, c) in diff_matrices(&current.cells, &next.cells)? {
        out.cells[r][c] =
            ObfEntry::delta(round, current.cells[r][c].clone(), next.cells[r][c].clone());
    }
    out.obfuscated_fields.push(next.field.clone());
    let ks = &mut out.key_spec;
    ks.n = round;
    ks.bits.push(format!("p{round}"));
    ks.inverted.push(false);
    ks.true_key.push(true);
    ks.functions.push(next.field.p.clone());
    ks.class_map = None;
    out.optimization = None;
    Ok(out)
}

/// One obfuscation round: every cell differing from `next` becomes
/// `Delta(round, current, next)`.
pub fn obfuscate_pair(
    current: &ObfMatrix,
    next: &ReductionMatrix,
    round: usize,
) -> Result<ObfMatrix, ObfError> {
    let mut out = merge_round(current, next, round)?;
    out.refresh_class_map();
    Ok(out)
}

/// Chains `others` onto the structure of `true_p` in the given order.
pub fn obfuscate_chain(true_p: &Poly, others: &[Poly], m: usize) -> Result<ObfMatrix, ObfError> {
    let mut seen = HashSet::new();
    let mut fields = Vec::with_capacity(others.len() + 1);
    for p in std::iter::once(true_p).chain(others) {
        if p.degree() != m as isize {
            return Err(ObfError::WrongDegree {
                poly: p.clone(),
                degree: p.degree(),
                m,
            });
        }
        if !seen.insert(p.clone()) {
            return Err(ObfError::DuplicatePolynomial(p.clone()));
        }
        fields.push(FieldSpec::with_degree(m, p.clone())?);
    }
    let mut acc = ObfMatrix::plain(&gen_structure(&fields[0])?);
    for (i, f) in fields[1..].iter().enumerate() {
        let next = gen_structure(f)?;
        acc = merge_round(&acc, &next.matrix, i + 1)?;
    }
    acc.refresh_class_map();
    Ok(acc)
}

/// Flips the physical polarity of the selected key bits. The function
/// selected by each logical assignment is unchanged; the true key and the
/// class map are re-indexed accordingly.
pub fn with_inverted_bits(matrix: &ObfMatrix, invert: &[bool]) -> ObfMatrix {
    let mut out = matrix.clone();
    let ks = &mut out.key_spec;
    for (i, &flip) in invert.iter().enumerate().take(ks.n) {
        if flip {
            ks.inverted[i] ^= true;
            ks.true_key[i] ^= true;
        }
    }
    out.refresh_class_map();
    out
}
