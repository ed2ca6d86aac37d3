mod common;

use gfobf::entry::ObfEntry;
use gfobf::obfuscate::diff_matrices;
use gfobf::poly::{enumerate_irreducible, poly_mod, Poly, PolyFilter};
use gfobf::structure::eval_structure;
use gfobf::{gen_structure, FieldSpec};

use common::{bits, ref_mul};

fn structures(m: usize) -> Vec<gfobf::MultStructure> {
    enumerate_irreducible(m, PolyFilter::All)
        .unwrap()
        .into_iter()
        .map(|p| gen_structure(&FieldSpec::new(p).unwrap()).unwrap())
        .collect()
}

#[test]
fn row_weights_follow_reduction_of_monomials() {
    for m in 2..=10 {
        for s in structures(m) {
            for r in 1..m {
                let reduced = poly_mod(&Poly::monomial(m - 1 + r), &s.matrix.field.p).unwrap();
                let row = &s.matrix.cells[r];
                let nonzero = row.iter().filter(|e| !e.is_zero()).count();
                assert_eq!(nonzero, reduced.weight());
                for (col, e) in row.iter().enumerate() {
                    let want = if reduced.coeff(col) {
                        ObfEntry::Sym(m - 1 + r)
                    } else {
                        ObfEntry::Zero
                    };
                    assert_eq!(*e, want);
                }
            }
        }
    }
}

#[test]
fn first_row_is_shared_by_all_polynomials() {
    for m in 2..=8 {
        let all = structures(m);
        for s in &all {
            assert_eq!(s.matrix.cells[0], all[0].matrix.cells[0]);
            let diffs = diff_matrices(&all[0].matrix.cells, &s.matrix.cells).unwrap();
            assert!(diffs.iter().all(|&(r, _)| r > 0));
        }
    }
}

#[test]
fn structure_evaluation_is_multiplication() {
    for m in 2..=6 {
        for s in structures(m) {
            let p = bits(&s.matrix.field.p);
            for a in 0..1u64 << m {
                for b in 0..1u64 << m {
                    let got = eval_structure(&s, &Poly::from_u64(a), &Poly::from_u64(b)).unwrap();
                    assert_eq!(bits(&got), ref_mul(a as u128, b as u128, p, m));
                }
            }
        }
    }
}

#[test]
fn operand_range_checked() {
    let s = &structures(4)[0];
    assert!(eval_structure(s, &Poly::monomial(4), &Poly::one()).is_err());
}
