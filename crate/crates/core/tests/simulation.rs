mod common;

use gfobf::netlist::{emit_verilog, lower_matrix, lower_structure, EmitMode};
use gfobf::sim::{eval_netlist, read_verilog_subset, verify_equiv, StimulusPlan, Verdict};
use gfobf::{gen_structure, obfuscate_chain, FieldSpec, Poly};

use common::p;

fn two_poly_design() -> gfobf::ObfMatrix {
    obfuscate_chain(&p("x^4+x^3+1"), &[p("x^4+x+1")], 4).unwrap()
}

#[test]
fn locked_example_per_key() {
    let n = lower_matrix(&two_poly_design());
    let plan = StimulusPlan::exhaustive(4);
    assert!(verify_equiv(&n, &[true], &p("x^4+x^3+1"), &plan)
        .unwrap()
        .passed());
    assert!(verify_equiv(&n, &[false], &p("x^4+x+1"), &plan)
        .unwrap()
        .passed());
    let wrong = verify_equiv(&n, &[false], &p("x^4+x^3+1"), &plan).unwrap();
    assert_eq!(wrong.verdict, Verdict::Fail);
    assert!(!wrong.mismatches.is_empty() && wrong.mismatches.len() <= 16);
    // Mismatches are reported in stimulus order.
    let order: Vec<u64> = wrong
        .mismatches
        .iter()
        .map(|mm| mm.a.to_u64().unwrap() | mm.b.to_u64().unwrap() << 4)
        .collect();
    assert!(order.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn zero_operand_gives_zero() {
    let n = lower_matrix(&two_poly_design());
    for b in 0..16 {
        for key in [[false], [true]] {
            assert!(eval_netlist(&n, &Poly::zero(), &Poly::from_u64(b), &key)
                .unwrap()
                .is_zero());
        }
    }
}

#[test]
fn random_reports_are_reproducible() {
    let s = gen_structure(&FieldSpec::new(p("x^16+x^5+x^3+x+1")).unwrap()).unwrap();
    let n = lower_structure(&s);
    let plan = StimulusPlan::random(16, 5_000, 42);
    let a = verify_equiv(&n, &[], &p("x^16+x^5+x^3+x+1"), &plan).unwrap();
    let b = verify_equiv(&n, &[], &p("x^16+x^5+x^3+x+1"), &plan).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.checked, 5_000);
    let wrong = verify_equiv(&n, &[], &p("x^16+x^5+x^3+x^2+1"), &plan).unwrap();
    assert_eq!(wrong.mismatches.len(), 16);
}

#[test]
fn reader_roundtrip_of_locked_example() {
    let n = lower_matrix(&two_poly_design());
    let text = emit_verilog(&n, &EmitMode::Locked, "example").unwrap();
    let back = read_verilog_subset(&text).unwrap();
    let plan = StimulusPlan::exhaustive(4);
    assert!(verify_equiv(&back, &[true], &p("x^4+x^3+1"), &plan)
        .unwrap()
        .passed());
    assert!(verify_equiv(&back, &[false], &p("x^4+x+1"), &plan)
        .unwrap()
        .passed());
    assert_eq!(
        emit_verilog(&back, &EmitMode::Locked, "example").unwrap(),
        text
    );
}

#[test]
fn reader_reports_unknown_nets() {
    let text = "module t (A, B, Z);\n  input [0:0] A;\n  input [0:0] B;\n  output [0:0] Z;\n  assign Z[0] = ghost;\nendmodule\n";
    let err = read_verilog_subset(text).unwrap_err();
    assert_eq!(err.line, 5);
    assert!(err.message.contains("ghost"));
}
