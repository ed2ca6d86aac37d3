//! Overhead reductions on obfuscated matrices.
//!
//! * Delta terms with a zero operand collapse to a single AND with the key
//!   (or its complement). Lowering performs the folding; here they are only
//!   counted.
//! * Structurally equal terms are grouped so lowering instantiates each
//!   group once.
//! * Within a column, `s_x * p` and `s_y * !p` of the same round are folded
//!   into one reduced term `s_x * p + s_y * !p`, trading a column XOR for an
//!   OR.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::entry::{Mux, ObfEntry};
use crate::obfuscate::ObfMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducedPair {
    pub col: usize,
    pub round: usize,
    /// Row of the `s_x * p` term; the reduced term is placed at the upper row.
    pub true_row: usize,
    /// Row of the `s_y * !p` term.
    pub false_row: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimizationSummary {
    /// Mux nodes (at any nesting depth) with a constant-zero operand.
    pub constant_propagatable: usize,
    /// Positions sharing one structurally identical keyed term.
    pub merged_groups: Vec<Vec<(usize, usize)>>,
    pub reduced_pairs: Vec<ReducedPair>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Polarity {
    True,
    False,
}

// `Delta(round, Sym x, 0)` or `Delta(round, 0, Sym y)`.
fn single_symbol(e: &ObfEntry) -> Option<(usize, Polarity, usize)> {
    let ObfEntry::Delta(m) = e else { return None };
    match (m.on_true.as_ref(), m.on_false.as_ref()) {
        (ObfEntry::Sym(x), ObfEntry::Zero) => Some((m.round, Polarity::True, *x)),
        (ObfEntry::Zero, ObfEntry::Sym(y)) => Some((m.round, Polarity::False, *y)),
        _ => None,
    }
}

fn count_zero_operands(e: &ObfEntry) -> usize {
    match e.mux() {
        Some(Mux {
            on_true, on_false, ..
        }) => {
            usize::from(on_true.is_zero() || on_false.is_zero())
                + count_zero_operands(on_true)
                + count_zero_operands(on_false)
        }
        None => 0,
    }
}

/// Applies the reductions and records what was done. The class map is
/// recomputed by simulation and must match the input's.
pub fn optimize(matrix: &ObfMatrix) -> ObfMatrix {
    let mut out = matrix.clone();
    let m = out.m;
    let mut summary = OptimizationSummary::default();

    for col in 0..m {
        // Unpaired candidates of this column, in row order.
        let mut pending: Vec<(usize, usize, Polarity, usize)> = Vec::new();
        for row in 0..m {
            let Some((round, pol, sym)) = single_symbol(&out.cells[row][col]) else {
                continue;
            };
            let partner = pending
                .iter()
                .position(|&(_, r, p, s)| r == round && p != pol && s != sym);
            match partner {
                Some(i) => {
                    let (prow, _, ppol, psym) = pending.remove(i);
                    let (true_row, false_row, x, y) = if ppol == Polarity::True {
                        (prow, row, psym, sym)
                    } else {
                        (row, prow, sym, psym)
                    };
                    out.cells[prow][col] =
                        ObfEntry::reduced(round, ObfEntry::Sym(x), ObfEntry::Sym(y));
                    out.cells[row][col] = ObfEntry::Zero;
                    summary.reduced_pairs.push(ReducedPair {
                        col,
                        round,
                        true_row,
                        false_row,
                    });
                }
                None => pending.push((row, round, pol, sym)),
            }
        }
    }

    let mut groups: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for (r, row) in out.cells.iter().enumerate() {
        for (c, e) in row.iter().enumerate() {
            summary.constant_propagatable += count_zero_operands(e);
            if e.is_keyed() {
                groups.entry(e.to_string()).or_default().push((r, c));
            }
        }
    }
    summary.merged_groups = groups.into_values().filter(|pos| pos.len() > 1).collect();
    summary.merged_groups.sort();

    let before = matrix
        .key_spec
        .class_map
        .clone()
        .or_else(|| matrix.compute_class_map());
    out.refresh_class_map();
    assert_eq!(
        before, out.key_spec.class_map,
        "optimization changed the key class map"
    );
    out.optimization = Some(summary);
    out
}
