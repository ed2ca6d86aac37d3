//! Schoolbook multiplier structure: partial products, their diagonal sums
//! `s_q`, and the reduction matrix whose column XORs give the product bits.
//!
//! Matrix coordinates are `(row, col)` with `col = q` meaning output bit
//! `z_q`. Row 0 carries the unreduced sums `s_0..s_{m-1}`; row `r >= 1`
//! carries `s_{m-1+r}` wherever `x^q` appears in `x^{m-1+r} mod P(x)`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::entry::ObfEntry;
use crate::lanes;
use crate::poly::{poly_mod, FieldSpec, Poly};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("degree 1 has no reduction structure")]
    DegenerateField,
    #[error("operand of degree {degree} does not fit a field of degree {m}")]
    OperandOutOfRange { degree: isize, m: usize },
}

/// The `m x m` grid of partial products `pp[r][c] = a_r & b_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartialProductGrid {
    pub m: usize,
}

impl PartialProductGrid {
    /// Input bit indices `(r, c)` of `pp[r][c]`.
    pub fn operands(&self, r: usize, c: usize) -> (usize, usize) {
        debug_assert!(r < self.m && c < self.m);
        (r, c)
    }
}

/// `s[q]` is the XOR of all `pp[r][c]` with `r + c = q`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SumVector {
    pub terms: Vec<Vec<(usize, usize)>>,
}

impl SumVector {
    pub fn new(m: usize) -> Self {
        let terms = (0..2 * m - 1)
            .map(|q| {
                (0..m)
                    .filter_map(|r| q.checked_sub(r).filter(|&c| c < m).map(|c| (r, c)))
                    .collect()
            })
            .collect();
        SumVector { terms }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Bit-sliced sums given lane words of the input bits.
    pub fn eval_lanes(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        self.terms
            .iter()
            .map(|t| t.iter().fold(0u64, |acc, &(r, c)| acc ^ (a[r] & b[c])))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReductionMatrix {
    pub m: usize,
    /// `cells[row][col]`.
    pub cells: Vec<Vec<ObfEntry>>,
    pub field: FieldSpec,
}

impl ReductionMatrix {
    pub fn cell(&self, row: usize, col: usize) -> &ObfEntry {
        &self.cells[row][col]
    }

    /// Nonzero cells of column `col`, top to bottom.
    pub fn column(&self, col: usize) -> Vec<&ObfEntry> {
        column_of(&self.cells, col)
    }

    /// Renders the matrix MSB column first, one row per line.
    pub fn dump(&self) -> String {
        dump_cells(&self.cells)
    }
}

pub(crate) fn column_of(cells: &[Vec<ObfEntry>], col: usize) -> Vec<&ObfEntry> {
    cells
        .iter()
        .map(|row| &row[col])
        .filter(|e| !e.is_zero())
        .collect()
}

pub(crate) fn dump_cells(cells: &[Vec<ObfEntry>]) -> String {
    let m = cells.len();
    let rendered: Vec<Vec<String>> = cells
        .iter()
        .map(|row| row.iter().rev().map(|e| e.to_string()).collect())
        .collect();
    let width = rendered
        .iter()
        .flatten()
        .map(|s| s.len())
        .max()
        .unwrap_or(1)
        .max(format!("z{}", m.saturating_sub(1)).len());
    let mut out = String::new();
    for row in &rendered {
        let line: Vec<String> = row.iter().map(|s| format!("{s:<width$}")).collect();
        let _ = writeln!(out, "{}", line.join(" | ").trim_end());
    }
    let footer: Vec<String> = (0..m)
        .rev()
        .map(|q| format!("{:<width$}", format!("z{q}")))
        .collect();
    let _ = writeln!(out, "{}", footer.join(" | ").trim_end());
    out
}

/// Partial products, their sums and the reduction matrix for one field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultStructure {
    pub grid: PartialProductGrid,
    pub sums: SumVector,
    pub matrix: ReductionMatrix,
}

impl MultStructure {
    pub fn m(&self) -> usize {
        self.grid.m
    }

    /// Output equation of bit `z_q` as the list of sum indices, e.g.
    /// `[0, 4, 5, 6]` for `z0 = s0 ^ s4 ^ s5 ^ s6`.
    pub fn column_equation(&self, q: usize) -> Vec<usize> {
        self.matrix
            .column(q)
            .into_iter()
            .map(|e| match e {
                ObfEntry::Sym(i) => *i,
                other => unreachable!("plain matrix holds only sums, found {other}"),
            })
            .collect()
    }
}

/// Builds the multiplier structure for `field`.
pub fn gen_structure(field: &FieldSpec) -> Result<MultStructure, StructureError> {
    let m = field.m;
    if m < 2 {
        return Err(StructureError::DegenerateField);
    }
    let mut cells = vec![vec![ObfEntry::Zero; m]; m];
    for (col, cell) in cells[0].iter_mut().enumerate() {
        *cell = ObfEntry::Sym(col);
    }
    for (row, cells) in cells.iter_mut().enumerate().skip(1) {
        let sym = m - 1 + row;
        let rem = poly_mod(&Poly::monomial(sym), &field.p).expect("field modulus is nonzero");
        for q in rem.exponents() {
            cells[q] = ObfEntry::Sym(sym);
        }
    }
    Ok(MultStructure {
        grid: PartialProductGrid { m },
        sums: SumVector::new(m),
        matrix: ReductionMatrix {
            m,
            cells,
            field: field.clone(),
        },
    })
}

/// Evaluates the structure on concrete operands.
pub fn eval_structure(s: &MultStructure, a: &Poly, b: &Poly) -> Result<Poly, StructureError> {
    let m = s.m();
    for op in [a, b] {
        if op.degree() >= m as isize {
            return Err(StructureError::OperandOutOfRange {
                degree: op.degree(),
                m,
            });
        }
    }
    let al = lanes::pack(std::slice::from_ref(a), m);
    let bl = lanes::pack(std::slice::from_ref(b), m);
    let out = eval_cells_lanes(&s.matrix.cells, &s.sums, &al, &bl, &[]);
    Ok(lanes::unpack(&out, 1).remove(0))
}

/// Bit-sliced evaluation of any cell matrix: returns the `m` output lane words.
pub(crate) fn eval_cells_lanes(
    cells: &[Vec<ObfEntry>],
    sums: &SumVector,
    a: &[u64],
    b: &[u64],
    key: &[u64],
) -> Vec<u64> {
    let s = sums.eval_lanes(a, b);
    let m = cells.len();
    (0..m)
        .map(|col| {
            cells
                .iter()
                .fold(0u64, |acc, row| acc ^ row[col].eval_lanes(&s, key))
        })
        .collect()
}

/// Converts a 1-based display coordinate `(R, C)`, with column 1 the MSB,
/// to the canonical `(row, col)` index.
pub fn display_to_index(m: usize, (r, c): (usize, usize)) -> (usize, usize) {
    (r - 1, m - c)
}

/// Inverse of [`display_to_index`].
pub fn index_to_display(m: usize, (row, col): (usize, usize)) -> (usize, usize) {
    (row + 1, m - col)
}
