//! Obfuscation-order exploration: build, optimize, lower and cost the chain
//! for every permutation (or a seeded sample) of the additional polynomials.

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::netlist::{cost, lower_matrix, CostModel, CostReport};
use crate::obfuscate::{key_from_index, obfuscate_chain, ObfError, ObfMatrix};
use crate::optimize::optimize;
use crate::poly::Poly;
use crate::sim::{verify_equiv, StimulusPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OrderMode {
    Exhaustive,
    Sample { count: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderOptions {
    pub mode: OrderMode,
    pub cost_model: CostModel,
    pub optimize: bool,
    /// Random vectors checked per key class of every design.
    pub verify_vectors: u64,
    pub verify_seed: u64,
    pub max_exhaustive_others: usize,
    pub permutation_budget: u128,
}

impl Default for OrderOptions {
    fn default() -> Self {
        OrderOptions {
            mode: OrderMode::Exhaustive,
            cost_model: CostModel::default(),
            optimize: true,
            verify_vectors: 256,
            verify_seed: 0,
            max_exhaustive_others: 8,
            permutation_budget: 40_320,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderResult {
    /// Lexicographic permutation index (exhaustive) or sample number.
    pub index: usize,
    /// Positions into the `others` list, in merge order.
    pub order: Vec<usize>,
    pub cost: CostReport,
    pub reduced_delta_count: usize,
    /// Every key class matched its predicted polynomial and the class map
    /// agreed with the largest-zero-round rule.
    pub verified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub bins: Vec<HistogramBin>,
}

pub const HISTOGRAM_BINS: usize = 20;

impl Distribution {
    pub fn of(values: &[f64], bins: usize) -> Self {
        let count = values.len();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if count == 0 {
            return Distribution {
                count,
                min: 0.0,
                max: 0.0,
                mean: 0.0,
                bins: Vec::new(),
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let bins = bins.max(1);
        let width = (max - min) / bins as f64;
        let mut out: Vec<HistogramBin> = (0..bins)
            .map(|i| HistogramBin {
                lo: min + width * i as f64,
                hi: if i + 1 == bins {
                    max
                } else {
                    min + width * (i + 1) as f64
                },
                count: 0,
            })
            .collect();
        for &v in values {
            let i = if width > 0.0 {
                (((v - min) / width) as usize).min(bins - 1)
            } else {
                0
            };
            out[i].count += 1;
        }
        Distribution {
            count,
            min,
            max,
            mean,
            bins: out,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStudy {
    pub results: Vec<OrderResult>,
    pub area: Distribution,
    pub delay: Distribution,
}

fn orders(k: usize, opts: &OrderOptions) -> Result<Vec<Vec<usize>>, ObfError> {
    match opts.mode {
        OrderMode::Exhaustive => {
            if k > opts.max_exhaustive_others {
                return Err(ObfError::TooManyOthers {
                    got: k,
                    max: opts.max_exhaustive_others,
                });
            }
            let count: u128 = (1..=k as u128).product();
            if count > opts.permutation_budget {
                return Err(ObfError::PermutationBudget {
                    count,
                    budget: opts.permutation_budget,
                });
            }
            Ok((0..k).permutations(k).collect())
        }
        OrderMode::Sample { count, seed } => Ok((0..count)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let mut order: Vec<usize> = (0..k).collect();
                order.shuffle(&mut rng);
                order
            })
            .collect()),
    }
}

/// Checks every key class of a design: the class map must follow the rule
/// and a representative key of each class must multiply modulo its
/// polynomial on `vectors` random stimuli.
pub fn check_design(matrix: &ObfMatrix, vectors: u64, seed: u64) -> bool {
    let ks = &matrix.key_spec;
    if let Some(map) = &ks.class_map {
        let rule_ok = map
            .iter()
            .enumerate()
            .all(|(idx, &class)| class == ks.rule_class(&key_from_index(idx, ks.n)));
        if !rule_ok {
            return false;
        }
    }
    let netlist = lower_matrix(matrix);
    (0..=ks.n).all(|class| {
        let key = ks.representative(class);
        let plan = StimulusPlan::random(matrix.m, vectors, seed);
        verify_equiv(&netlist, &key, &ks.functions[class], &plan).is_ok_and(|r| r.passed())
    })
}

fn evaluate(
    true_p: &Poly,
    others: &[Poly],
    m: usize,
    index: usize,
    order: Vec<usize>,
    opts: &OrderOptions,
) -> Result<OrderResult, ObfError> {
    let chain: Vec<Poly> = order.iter().map(|&i| others[i].clone()).collect();
    let mut matrix = obfuscate_chain(true_p, &chain, m)?;
    if opts.optimize {
        matrix = optimize(&matrix);
    }
    let report = cost(&lower_matrix(&matrix), &opts.cost_model);
    Ok(OrderResult {
        index,
        order,
        cost: report,
        reduced_delta_count: matrix.reduced_delta_count(),
        verified: check_design(&matrix, opts.verify_vectors, opts.verify_seed),
    })
}

/// Runs every order in parallel. Results are sorted by index.
pub fn explore_orders(
    true_p: &Poly,
    others: &[Poly],
    m: usize,
    opts: &OrderOptions,
) -> Result<OrderStudy, ObfError> {
    let all = orders(others.len(), opts)?;
    let results: Vec<OrderResult> = all
        .into_par_iter()
        .enumerate()
        .map(|(index, order)| evaluate(true_p, others, m, index, order, opts))
        .collect::<Result<_, _>>()?;
    let area: Vec<f64> = results.iter().map(|r| r.cost.area).collect();
    let delay: Vec<f64> = results.iter().map(|r| r.cost.delay).collect();
    Ok(OrderStudy {
        area: Distribution::of(&area, HISTOGRAM_BINS),
        delay: Distribution::of(&delay, HISTOGRAM_BINS),
        results,
    })
}
