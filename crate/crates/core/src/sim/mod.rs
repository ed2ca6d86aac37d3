//! Functional evaluation and equivalence checking against the GF(2^m)
//! reference multiplier.

mod reader;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lanes::{self, LANES};
use crate::netlist::Netlist;
use crate::obfuscate::random_poly;
use crate::poly::{poly_mulmod, Poly, SmallField};

pub use reader::{read_verilog_subset, ParseError};

/// Exhaustive plans may cover at most this many input bits (`2m`).
pub const DEFAULT_EXHAUSTIVE_CAP_BITS: usize = 24;

/// Mismatch lists are truncated to this length.
pub const MAX_REPORTED_MISMATCHES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("key has {got} bits, netlist expects {expected}")]
    KeyWidth { got: usize, expected: usize },
    #[error("operand of degree {degree} does not fit the {m}-bit input ports")]
    InputWidth { degree: isize, m: usize },
    #[error("plan is for m = {plan}, netlist has m = {netlist}")]
    PlanWidth { plan: usize, netlist: usize },
    #[error("exhaustive plan needs {bits} input bits, cap is {cap}")]
    ExhaustiveTooLarge { bits: usize, cap: usize },
    #[error("reference polynomial {poly} does not have degree {m}")]
    ReferenceDegree { poly: Poly, m: usize },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Product computed by the netlist under `key`.
pub fn eval_netlist(n: &Netlist, a: &Poly, b: &Poly, key: &[bool]) -> Result<Poly, SimError> {
    if key.len() != n.key_bits {
        return Err(SimError::KeyWidth {
            got: key.len(),
            expected: n.key_bits,
        });
    }
    for op in [a, b] {
        if op.degree() >= n.m as isize {
            return Err(SimError::InputWidth {
                degree: op.degree(),
                m: n.m,
            });
        }
    }
    let al = lanes::pack(std::slice::from_ref(a), n.m);
    let bl = lanes::pack(std::slice::from_ref(b), n.m);
    let out = n.eval_lanes(&al, &bl, &lanes::broadcast_key(key));
    Ok(lanes::unpack(&out, 1).remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StimulusMode {
    Exhaustive,
    Random { count: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusPlan {
    pub mode: StimulusMode,
    pub m: usize,
    pub key: Option<Vec<bool>>,
    pub exhaustive_cap_bits: usize,
}

impl StimulusPlan {
    pub fn exhaustive(m: usize) -> Self {
        StimulusPlan {
            mode: StimulusMode::Exhaustive,
            m,
            key: None,
            exhaustive_cap_bits: DEFAULT_EXHAUSTIVE_CAP_BITS,
        }
    }

    pub fn random(m: usize, count: u64, seed: u64) -> Self {
        StimulusPlan {
            mode: StimulusMode::Random { count, seed },
            m,
            key: None,
            exhaustive_cap_bits: DEFAULT_EXHAUSTIVE_CAP_BITS,
        }
    }

    /// Exhaustive when it fits under the cap, otherwise `count` random vectors.
    pub fn auto(m: usize, count: u64, seed: u64) -> Self {
        if 2 * m <= DEFAULT_EXHAUSTIVE_CAP_BITS {
            StimulusPlan::exhaustive(m)
        } else {
            StimulusPlan::random(m, count, seed)
        }
    }

    pub fn with_key(mut self, key: Vec<bool>) -> Self {
        self.key = Some(key);
        self
    }

    pub fn total(&self) -> u64 {
        match self.mode {
            StimulusMode::Exhaustive => 1u64 << (2 * self.m),
            StimulusMode::Random { count, .. } => count,
        }
    }

    fn chunks(&self) -> u64 {
        self.total().div_ceil(LANES as u64)
    }

    /// Operand pairs of chunk `c` (at most 64 vectors). Random chunks draw
    /// from an independent stream of the seed; the first three vectors of a
    /// random plan are the edge patterns 0, 1 and all-ones.
    pub fn chunk(&self, c: u64) -> (Vec<Poly>, Vec<Poly>) {
        let start = c * LANES as u64;
        let end = (start + LANES as u64).min(self.total());
        let m = self.m;
        match self.mode {
            StimulusMode::Exhaustive => {
                let mask = (1u64 << m) - 1;
                (start..end)
                    .map(|v| (Poly::from_u64(v & mask), Poly::from_u64(v >> m)))
                    .unzip()
            }
            StimulusMode::Random { seed, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(c);
                let ones = Poly::from_exponents(&(0..m).collect::<Vec<_>>());
                (start..end)
                    .map(|v| match v {
                        0 => (Poly::zero(), Poly::zero()),
                        1 => (Poly::one(), Poly::one()),
                        2 => (ones.clone(), ones.clone()),
                        _ => (random_poly(&mut rng, m), random_poly(&mut rng, m)),
                    })
                    .unzip()
            }
        }
    }

    /// Every stimulus of the plan, in order.
    pub fn vectors(&self) -> Vec<(Poly, Poly)> {
        (0..self.chunks())
            .flat_map(|c| {
                let (a, b) = self.chunk(c);
                a.into_iter().zip(b)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub a: Poly,
    pub b: Poly,
    pub expected: Poly,
    pub actual: Poly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivReport {
    pub checked: u64,
    pub mismatches: Vec<Mismatch>,
    pub verdict: Verdict,
}

impl EquivReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Reference products for a batch of operands.
pub(crate) fn reference_products(p: &Poly, a: &[Poly], b: &[Poly]) -> Vec<Poly> {
    match SmallField::new(p) {
        Some(f) => a
            .iter()
            .zip(b)
            .map(|(x, y)| Poly::from_u64(f.mul(x.to_u64().unwrap(), y.to_u64().unwrap())))
            .collect(),
        None => a
            .iter()
            .zip(b)
            .map(|(x, y)| poly_mulmod(x, y, p).expect("operands fit the field"))
            .collect(),
    }
}

/// Compares the netlist under `key` with multiplication modulo `p` on every
/// stimulus of the plan. A key in the plan overrides the `key` argument.
pub fn verify_equiv(
    n: &Netlist,
    key: &[bool],
    p: &Poly,
    plan: &StimulusPlan,
) -> Result<EquivReport, SimError> {
    let key = plan.key.as_deref().unwrap_or(key);
    if key.len() != n.key_bits {
        return Err(SimError::KeyWidth {
            got: key.len(),
            expected: n.key_bits,
        });
    }
    if plan.m != n.m {
        return Err(SimError::PlanWidth {
            plan: plan.m,
            netlist: n.m,
        });
    }
    if p.degree() != n.m as isize {
        return Err(SimError::ReferenceDegree {
            poly: p.clone(),
            m: n.m,
        });
    }
    if plan.mode == StimulusMode::Exhaustive && 2 * plan.m > plan.exhaustive_cap_bits {
        return Err(SimError::ExhaustiveTooLarge {
            bits: 2 * plan.m,
            cap: plan.exhaustive_cap_bits,
        });
    }
    let key_lanes = lanes::broadcast_key(key);
    let per_chunk: Vec<(u64, Vec<Mismatch>)> = (0..plan.chunks())
        .into_par_iter()
        .map(|c| {
            let (a, b) = plan.chunk(c);
            let out = n.eval_lanes(&lanes::pack(&a, n.m), &lanes::pack(&b, n.m), &key_lanes);
            let want = reference_products(p, &a, &b);
            let want_lanes = lanes::pack(&want, n.m);
            let bad = out
                .iter()
                .zip(&want_lanes)
                .fold(0u64, |acc, (x, y)| acc | (x ^ y));
            let mut mismatches = Vec::new();
            if bad != 0 {
                let actual = lanes::unpack(&out, a.len());
                for lane in 0..a.len() {
                    if (bad >> lane) & 1 == 1 && mismatches.len() < MAX_REPORTED_MISMATCHES {
                        mismatches.push(Mismatch {
                            a: a[lane].clone(),
                            b: b[lane].clone(),
                            expected: want[lane].clone(),
                            actual: actual[lane].clone(),
                        });
                    }
                }
            }
            (a.len() as u64, mismatches)
        })
        .collect();
    let checked = per_chunk.iter().map(|(c, _)| c).sum();
    let mismatches: Vec<Mismatch> = per_chunk
        .into_iter()
        .flat_map(|(_, m)| m)
        .take(MAX_REPORTED_MISMATCHES)
        .collect();
    let verdict = if mismatches.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(EquivReport {
        checked,
        mismatches,
        verdict,
    })
}
