use std::collections::HashMap;

use super::{Netlist, NetlistBuilder, NodeId};
use crate::entry::ObfEntry;
use crate::obfuscate::ObfMatrix;
use crate::structure::{MultStructure, PartialProductGrid, SumVector};

struct Lowering<'a> {
    b: NetlistBuilder,
    sums: Vec<NodeId>,
    inverted: &'a [bool],
    memo: HashMap<&'a ObfEntry, NodeId>,
}

impl<'a> Lowering<'a> {
    // Logical switch p_round.
    fn switch(&mut self, round: usize) -> NodeId {
        let k = self.b.key(round - 1);
        if self.inverted[round - 1] {
            self.b.not(k)
        } else {
            k
        }
    }

    fn entry(&mut self, e: &'a ObfEntry) -> NodeId {
        if let Some(&id) = self.memo.get(e) {
            return id;
        }
        let id = match e {
            ObfEntry::Zero => self.b.constant(false),
            ObfEntry::Sym(i) => self.sums[*i],
            ObfEntry::Delta(mx) | ObfEntry::ReducedDelta(mx) => {
                let t = self.entry(&mx.on_true);
                let f = self.entry(&mx.on_false);
                let p = self.switch(mx.round);
                let np = self.b.not(p);
                let hi = self.b.and(t, p);
                let lo = self.b.and(f, np);
                self.b.or(hi, lo)
            }
        };
        self.memo.insert(e, id);
        id
    }
}

/// Lowers a matrix with its partial-product grid and sum vector.
///
/// Partial products become AND gates, each `s_q` and each output column a
/// balanced XOR tree, and delta terms `(t & p) | (f & !p)` with constant
/// operands folded away. Identical terms are built once.
pub fn lower(matrix: &ObfMatrix, grid: &PartialProductGrid, sums: &SumVector) -> Netlist {
    let m = matrix.m;
    debug_assert_eq!(grid.m, m);
    let n = matrix.key_spec.n;
    let mut b = NetlistBuilder::new(m, n);
    b.set_delta_counts(matrix.delta_count(), matrix.reduced_delta_count());
    let sum_nodes: Vec<NodeId> = sums
        .terms
        .iter()
        .map(|terms| {
            let pps: Vec<NodeId> = terms
                .iter()
                .map(|&(r, c)| {
                    let (i, j) = grid.operands(r, c);
                    let (x, y) = (b.input_a(i), b.input_b(j));
                    b.and(x, y)
                })
                .collect();
            b.xor_tree(pps)
        })
        .collect();
    let mut l = Lowering {
        b,
        sums: sum_nodes,
        inverted: &matrix.key_spec.inverted,
        memo: HashMap::new(),
    };
    let outputs: Vec<NodeId> = (0..m)
        .map(|col| {
            let terms: Vec<NodeId> = matrix.column(col).into_iter().map(|e| l.entry(e)).collect();
            l.b.xor_tree(terms)
        })
        .collect();
    l.b.finish(outputs)
}

/// [`lower`] using the matrix's own sum vector.
pub fn lower_matrix(matrix: &ObfMatrix) -> Netlist {
    lower(matrix, &PartialProductGrid { m: matrix.m }, &matrix.sums)
}

/// Lowers a plain multiplier.
pub fn lower_structure(s: &MultStructure) -> Netlist {
    lower(&ObfMatrix::plain(s), &s.grid, &s.sums)
}
