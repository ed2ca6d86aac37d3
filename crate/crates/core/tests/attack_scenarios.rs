mod common;

use gfobf::attack::{
    di_attack, field_oracle, poly_hypothesis_attack, AttackConfig, AttackProblem, AttackVerdict,
};
use gfobf::netlist::lower_matrix;
use gfobf::poly::{enumerate_irreducible, irreducibles, EnumLimits, PolyFilter};
use gfobf::sim::{verify_equiv, StimulusPlan};
use gfobf::trend::first_functions;
use gfobf::{obfuscate_chain, optimize};

#[test]
fn solves_every_small_design_within_query_budget() {
    for m in [6, 8, 10] {
        for k in [2, 5, 8] {
            let polys = first_functions(m, k, PolyFilter::All).unwrap();
            let truth = polys[k / 2].clone();
            let others: Vec<_> = polys.iter().filter(|p| **p != truth).cloned().collect();
            let obf = optimize(&obfuscate_chain(&truth, &others, m).unwrap());
            let locked = lower_matrix(&obf);
            let candidates = enumerate_irreducible(m, PolyFilter::All).unwrap();
            let problem = AttackProblem {
                locked: &locked,
                candidates: &candidates,
                config: AttackConfig::default(),
            };
            let r = di_attack(&problem, &mut field_oracle(truth.clone())).unwrap();
            assert_eq!(r.verdict, AttackVerdict::Solved, "m={m} k={k}");
            assert_eq!(r.recovered_poly.as_ref(), Some(&truth));
            assert!(r.queries_used < k as u64);
            // Soundness: the recovered key passes an independent sample.
            let key = r.recovered_key.unwrap();
            let report =
                verify_equiv(&locked, &key, &truth, &StimulusPlan::random(m, 2_000, 99)).unwrap();
            assert!(report.passed());
        }
    }
}

#[test]
fn wide_keys_are_sampled() {
    let polys = first_functions(8, 19, PolyFilter::All).unwrap();
    let truth = polys[0].clone();
    let obf = obfuscate_chain(&truth, &polys[1..], 8).unwrap();
    assert!(obf.key_spec.n > 16);
    let locked = lower_matrix(&obf);
    let candidates = enumerate_irreducible(8, PolyFilter::All).unwrap();
    let problem = AttackProblem {
        locked: &locked,
        candidates: &candidates,
        config: AttackConfig::default(),
    };
    let r = di_attack(&problem, &mut field_oracle(truth.clone())).unwrap();
    assert_eq!(r.verdict, AttackVerdict::Solved);
    assert_eq!(r.recovered_poly, Some(truth));
}

#[test]
fn key_width_limit() {
    let polys = first_functions(8, 4, PolyFilter::All).unwrap();
    let locked = lower_matrix(&obfuscate_chain(&polys[0], &polys[1..], 8).unwrap());
    let problem = AttackProblem {
        locked: &locked,
        candidates: &polys,
        config: AttackConfig {
            max_key_bits: 2,
            ..AttackConfig::default()
        },
    };
    assert!(di_attack(&problem, &mut field_oracle(polys[0].clone())).is_err());
    let empty = AttackProblem {
        locked: &locked,
        candidates: &[],
        config: AttackConfig::default(),
    };
    assert!(di_attack(&empty, &mut field_oracle(polys[0].clone())).is_err());
}

#[test]
fn hypothesis_attack_at_degree_64() {
    let candidates: Vec<_> =
        irreducibles(64, PolyFilter::TrinomialPentanomial, EnumLimits::default())
            .unwrap()
            .take(10)
            .collect();
    for (i, truth) in candidates.iter().enumerate() {
        let cfg = AttackConfig {
            seed: i as u64,
            ..AttackConfig::default()
        };
        let r = poly_hypothesis_attack(&mut field_oracle(truth.clone()), 64, &candidates, &cfg)
            .unwrap();
        assert_eq!(r.verdict, AttackVerdict::Solved);
        assert_eq!(r.recovered_poly.as_ref(), Some(truth));
        assert!(r.queries_used <= 10 * 64);
    }
}

#[test]
fn hypothesis_attack_reports_ambiguity() {
    let candidates = enumerate_irreducible(8, PolyFilter::All).unwrap();
    let cfg = AttackConfig {
        max_queries: 0,
        ..AttackConfig::default()
    };
    let r = poly_hypothesis_attack(
        &mut field_oracle(candidates[3].clone()),
        8,
        &candidates,
        &cfg,
    )
    .unwrap();
    assert_eq!(r.verdict, AttackVerdict::Exhausted);
    assert_eq!(r.surviving, candidates.len());
}
