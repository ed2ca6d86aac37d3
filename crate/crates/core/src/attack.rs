//! Oracle-guided key recovery against locked multipliers.
//!
//! The attacker holds the locked netlist and black-box access to the true
//! multiplier. Key assignments are grouped into classes by simulation, then
//! distinguishing inputs found by random search prune the classes until one
//! remains.

use std::collections::BTreeMap;
use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lanes::{self, LANES};
use crate::netlist::Netlist;
use crate::obfuscate::{key_from_index, random_poly};
use crate::poly::{poly_mulmod, Poly};
use crate::sim::reference_products;

/// Keys up to this width are enumerated when forming classes; wider keys
/// are sampled.
pub const ENUMERATE_KEY_BITS: usize = 16;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("oracle failure: {0}")]
    Oracle(String),
    #[error("locked netlist has {got} key bits, the attack is limited to {max}")]
    TooManyKeyBits { got: usize, max: usize },
    #[error("no candidate polynomials given")]
    NoCandidates,
    #[error("candidate {poly} does not have degree {m}")]
    CandidateDegree { poly: Poly, m: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Black-box access to the true multiplier.
pub trait Oracle {
    fn query(&mut self, a: &Poly, b: &Poly) -> Result<Poly, AttackError>;
}

/// In-process oracle around a closure.
pub struct FnOracle<F>(pub F);

impl<F: FnMut(&Poly, &Poly) -> Poly> Oracle for FnOracle<F> {
    fn query(&mut self, a: &Poly, b: &Poly) -> Result<Poly, AttackError> {
        Ok((self.0)(a, b))
    }
}

/// Oracle for multiplication modulo `p`.
pub fn field_oracle(p: Poly) -> FnOracle<impl FnMut(&Poly, &Poly) -> Poly> {
    FnOracle(move |a: &Poly, b: &Poly| poly_mulmod(a, b, &p).expect("operands fit the field"))
}

/// Child process speaking the line protocol: request `A_hex B_hex`,
/// response `Z_hex`.
pub struct SubprocessOracle {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl SubprocessOracle {
    pub fn spawn(mut command: Command) -> Result<Self, AttackError> {
        let mut child = command
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(SubprocessOracle {
            child,
            stdin,
            stdout,
        })
    }
}

impl Oracle for SubprocessOracle {
    fn query(&mut self, a: &Poly, b: &Poly) -> Result<Poly, AttackError> {
        writeln!(self.stdin, "{} {}", a.to_hex(), b.to_hex())?;
        self.stdin.flush()?;
        let mut line = String::new();
        if self.stdout.read_line(&mut line)? == 0 {
            return Err(AttackError::Oracle(
                "oracle process closed its output".into(),
            ));
        }
        Poly::from_hex(line.trim()).map_err(|e| AttackError::Oracle(e.to_string()))
    }
}

impl Drop for SubprocessOracle {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Serves the line protocol until end of input. Returns the number of
/// answered queries. A request `f` rejects ends the session with an
/// `InvalidData` error.
pub fn serve_oracle<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    mut f: impl FnMut(&Poly, &Poly) -> Result<Poly, String>,
) -> io::Result<u64> {
    let mut served = 0;
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: String| io::Error::new(io::ErrorKind::InvalidData, msg);
        let mut parts = line.split_whitespace();
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(bad(format!("expected `A_hex B_hex`, got `{line}`")));
        };
        let a = Poly::from_hex(a).map_err(|e| bad(e.to_string()))?;
        let b = Poly::from_hex(b).map_err(|e| bad(e.to_string()))?;
        let z = f(&a, &b).map_err(bad)?;
        writeln!(output, "{}", z.to_hex())?;
        output.flush()?;
        served += 1;
    }
    Ok(served)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackVerdict {
    Solved,
    Exhausted,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub recovered_poly: Option<Poly>,
    pub recovered_key: Option<Vec<bool>>,
    /// Oracle queries spent on distinguishing inputs.
    pub queries_used: u64,
    /// Oracle queries spent on the final equivalence check.
    pub verification_queries: u64,
    pub elapsed_secs: f64,
    pub verdict: AttackVerdict,
    /// Key classes (or candidate polynomials) still consistent with the
    /// oracle when the attack stopped.
    pub surviving: usize,
    /// Candidate polynomials matching the surviving classes.
    pub surviving_polys: Vec<Poly>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub max_queries: u64,
    pub time_budget: Duration,
    pub seed: u64,
    /// Random 64-vector batches tried per distinguishing round is
    /// `trials_per_round / 64`.
    pub trials_per_round: u64,
    pub max_key_bits: usize,
    /// Random vectors in the final check when exhaustive checking is too
    /// large.
    pub verify_vectors: u64,
    /// Total input bits up to which the final check is exhaustive.
    pub exhaustive_verify_bits: usize,
    /// Random keys added to the structured sample for keys wider than
    /// [`ENUMERATE_KEY_BITS`].
    pub sampled_keys: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            max_queries: 1_000,
            time_budget: Duration::from_secs(60),
            seed: 0,
            trials_per_round: 10_000,
            max_key_bits: 32,
            verify_vectors: 10_000,
            exhaustive_verify_bits: 16,
            sampled_keys: 64,
        }
    }
}

pub struct AttackProblem<'a> {
    pub locked: &'a Netlist,
    pub candidates: &'a [Poly],
    pub config: AttackConfig,
}

struct KeyClass {
    key: Vec<bool>,
    key_lanes: Vec<u64>,
}

fn batch<R: Rng>(rng: &mut R, m: usize) -> (Vec<Poly>, Vec<Poly>) {
    (0..LANES)
        .map(|_| (random_poly(rng, m), random_poly(rng, m)))
        .unzip()
}

// Keys to simulate when grouping into classes.
fn key_sample(n: usize, cfg: &AttackConfig) -> Vec<Vec<bool>> {
    if n <= ENUMERATE_KEY_BITS {
        return (0..1usize << n).map(|i| key_from_index(i, n)).collect();
    }
    let mut keys = vec![vec![true; n], vec![false; n]];
    for i in 0..n {
        let mut k = vec![true; n];
        k[i] = false;
        keys.push(k);
        let mut k = vec![false; n];
        k[i] = true;
        keys.push(k);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x6b65_7973);
    keys.extend((0..cfg.sampled_keys).map(|_| (0..n).map(|_| rng.gen()).collect()));
    keys
}

fn classes(locked: &Netlist, cfg: &AttackConfig) -> (Vec<KeyClass>, Vec<Poly>, Vec<Poly>) {
    let m = locked.m;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x636c_6173);
    let (mut a, mut b) = batch(&mut rng, m);
    // x^{m-1} * x exposes the reduction of x^m.
    a[0] = Poly::monomial(m - 1);
    b[0] = Poly::x();
    let (al, bl) = (lanes::pack(&a, m), lanes::pack(&b, m));
    let mut groups: BTreeMap<Vec<u64>, KeyClass> = BTreeMap::new();
    for key in key_sample(locked.key_bits, cfg) {
        let key_lanes = lanes::broadcast_key(&key);
        let sig = locked.eval_lanes(&al, &bl, &key_lanes);
        groups.entry(sig).or_insert(KeyClass { key, key_lanes });
    }
    let mut out: Vec<KeyClass> = groups.into_values().collect();
    // All-ones first, then by key, for a stable order.
    out.sort_by_key(|c| {
        (
            !c.key.iter().all(|&k| k),
            c.key.iter().map(|&k| !k).collect::<Vec<_>>(),
        )
    });
    (out, a, b)
}

fn candidate_for(
    locked: &Netlist,
    class: &KeyClass,
    candidates: &[Poly],
    a: &[Poly],
    b: &[Poly],
) -> Option<Poly> {
    let m = locked.m;
    let out = locked.eval_lanes(&lanes::pack(a, m), &lanes::pack(b, m), &class.key_lanes);
    let got = lanes::unpack(&out, a.len());
    candidates
        .iter()
        .find(|p| reference_products(p, a, b) == got)
        .cloned()
}

fn validate_candidates(m: usize, candidates: &[Poly]) -> Result<(), AttackError> {
    if candidates.is_empty() {
        return Err(AttackError::NoCandidates);
    }
    if let Some(p) = candidates.iter().find(|p| p.degree() != m as isize) {
        return Err(AttackError::CandidateDegree { poly: p.clone(), m });
    }
    Ok(())
}

// Compares `predict` with the oracle on the final-check stimuli. Returns
// (passed, queries).
fn final_check(
    oracle: &mut dyn Oracle,
    m: usize,
    cfg: &AttackConfig,
    mut predict: impl FnMut(&[Poly], &[Poly]) -> Vec<Poly>,
) -> Result<(bool, u64), AttackError> {
    let mut queries = 0;
    let exhaustive = 2 * m <= cfg.exhaustive_verify_bits;
    let total = if exhaustive {
        1u64 << (2 * m)
    } else {
        cfg.verify_vectors
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7665_7269);
    let mut start = 0;
    while start < total {
        let len = (total - start).min(LANES as u64);
        let (a, b): (Vec<Poly>, Vec<Poly>) = (start..start + len)
            .map(|v| {
                if exhaustive {
                    let mask = (1u64 << m) - 1;
                    (Poly::from_u64(v & mask), Poly::from_u64(v >> m))
                } else {
                    (random_poly(&mut rng, m), random_poly(&mut rng, m))
                }
            })
            .unzip();
        let predicted = predict(&a, &b);
        for ((x, y), z) in a.iter().zip(&b).zip(&predicted) {
            queries += 1;
            if oracle.query(x, y)? != *z {
                return Ok((false, queries));
            }
        }
        start += len;
    }
    Ok((true, queries))
}

/// Distinguishing-input attack on a locked netlist.
pub fn di_attack(
    problem: &AttackProblem,
    oracle: &mut dyn Oracle,
) -> Result<AttackResult, AttackError> {
    let started = Instant::now();
    let cfg = &problem.config;
    let locked = problem.locked;
    let m = locked.m;
    if locked.key_bits > cfg.max_key_bits {
        return Err(AttackError::TooManyKeyBits {
            got: locked.key_bits,
            max: cfg.max_key_bits,
        });
    }
    validate_candidates(m, problem.candidates)?;
    let (mut survivors, sig_a, sig_b) = classes(locked, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut queries = 0u64;
    let finish = |survivors: &[KeyClass],
                  verdict,
                  recovered: Option<(Vec<bool>, Option<Poly>)>,
                  queries,
                  verification_queries| {
        let (recovered_key, recovered_poly) = match recovered {
            Some((k, p)) => (Some(k), p),
            None => (None, None),
        };
        AttackResult {
            recovered_poly,
            recovered_key,
            queries_used: queries,
            verification_queries,
            elapsed_secs: started.elapsed().as_secs_f64(),
            verdict,
            surviving: survivors.len(),
            surviving_polys: survivors
                .iter()
                .filter_map(|c| candidate_for(locked, c, problem.candidates, &sig_a, &sig_b))
                .collect(),
        }
    };
    while survivors.len() > 1 {
        if started.elapsed() > cfg.time_budget {
            return Ok(finish(&survivors, AttackVerdict::Timeout, None, queries, 0));
        }
        if queries >= cfg.max_queries {
            return Ok(finish(
                &survivors,
                AttackVerdict::Exhausted,
                None,
                queries,
                0,
            ));
        }
        let mut found = None;
        let rounds = cfg.trials_per_round.div_ceil(LANES as u64).max(1);
        for round in 0..=rounds {
            // Fall back to the class signature sample, on which all
            // surviving classes differ by construction.
            let (a, b) = if round == rounds {
                (sig_a.clone(), sig_b.clone())
            } else {
                batch(&mut rng, m)
            };
            let (al, bl) = (lanes::pack(&a, m), lanes::pack(&b, m));
            let outs: Vec<Vec<Poly>> = survivors
                .iter()
                .map(|c| lanes::unpack(&locked.eval_lanes(&al, &bl, &c.key_lanes), LANES))
                .collect();
            if let Some(lane) = (0..LANES).find(|&l| outs.iter().any(|o| o[l] != outs[0][l])) {
                let predicted: Vec<Poly> = outs.iter().map(|o| o[lane].clone()).collect();
                found = Some((a[lane].clone(), b[lane].clone(), predicted));
                break;
            }
        }
        let Some((a, b, predicted)) = found else {
            break;
        };
        let z = oracle.query(&a, &b)?;
        queries += 1;
        let before = survivors.len();
        survivors = survivors
            .into_iter()
            .zip(predicted)
            .filter(|(_, p)| *p == z)
            .map(|(c, _)| c)
            .collect();
        debug_assert!(survivors.len() < before);
    }
    let Some(winner) = survivors.first() else {
        return Ok(finish(
            &survivors,
            AttackVerdict::Exhausted,
            None,
            queries,
            0,
        ));
    };
    let (ok, vq) = final_check(oracle, m, cfg, |a, b| {
        let out = locked.eval_lanes(&lanes::pack(a, m), &lanes::pack(b, m), &winner.key_lanes);
        lanes::unpack(&out, a.len())
    })?;
    let poly = candidate_for(locked, winner, problem.candidates, &sig_a, &sig_b);
    let verdict = if ok {
        AttackVerdict::Solved
    } else {
        AttackVerdict::Exhausted
    };
    let recovered = ok.then(|| (winner.key.clone(), poly));
    if !ok {
        survivors.clear();
    }
    Ok(finish(&survivors, verdict, recovered, queries, vq))
}

/// Recovers the modulus from oracle access alone by testing candidates on
/// random operand pairs.
pub fn poly_hypothesis_attack(
    oracle: &mut dyn Oracle,
    m: usize,
    candidates: &[Poly],
    cfg: &AttackConfig,
) -> Result<AttackResult, AttackError> {
    let started = Instant::now();
    validate_candidates(m, candidates)?;
    let mut survivors: Vec<Poly> = candidates.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut queries = 0u64;
    let mut verdict = None;
    while survivors.len() > 1 {
        if started.elapsed() > cfg.time_budget {
            verdict = Some(AttackVerdict::Timeout);
            break;
        }
        if queries >= cfg.max_queries {
            verdict = Some(AttackVerdict::Exhausted);
            break;
        }
        let (a, b) = (random_poly(&mut rng, m), random_poly(&mut rng, m));
        let z = oracle.query(&a, &b)?;
        queries += 1;
        survivors.retain(|p| poly_mulmod(&a, &b, p).expect("operands fit the field") == z);
    }
    let mut verification_queries = 0;
    let mut recovered = None;
    if verdict.is_none() {
        verdict = Some(AttackVerdict::Exhausted);
        if let [p] = survivors.as_slice() {
            let check = AttackConfig {
                verify_vectors: cfg.verify_vectors.min(LANES as u64),
                ..cfg.clone()
            };
            let (ok, vq) = final_check(oracle, m, &check, |a, b| reference_products(p, a, b))?;
            verification_queries = vq;
            if ok {
                verdict = Some(AttackVerdict::Solved);
                recovered = Some(p.clone());
            } else {
                survivors.clear();
            }
        }
    }
    Ok(AttackResult {
        recovered_poly: recovered,
        recovered_key: None,
        queries_used: queries,
        verification_queries,
        elapsed_secs: started.elapsed().as_secs_f64(),
        verdict: verdict.expect("set above"),
        surviving: survivors.len(),
        surviving_polys: survivors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::lower_matrix;
    use crate::obfuscate::obfuscate_chain;
    use crate::poly::enumerate_irreducible;

    fn p(s: &str) -> Poly {
        s.parse().unwrap()
    }

    #[test]
    fn recovers_degree_four_chain() {
        let truth = p("x^4+x^3+1");
        let obf = obfuscate_chain(&truth, &[p("x^4+x+1"), p("x^4+x^3+x^2+x+1")], 4).unwrap();
        let locked = lower_matrix(&obf);
        let candidates = enumerate_irreducible(4, Default::default()).unwrap();
        let problem = AttackProblem {
            locked: &locked,
            candidates: &candidates,
            config: AttackConfig::default(),
        };
        let r = di_attack(&problem, &mut field_oracle(truth.clone())).unwrap();
        assert_eq!(r.verdict, AttackVerdict::Solved);
        assert_eq!(r.recovered_poly, Some(truth));
        assert!(r.queries_used <= 2);
        assert_eq!(
            obf.key_spec.rule_class(r.recovered_key.as_ref().unwrap()),
            0
        );
        assert_eq!(r.verification_queries, 256);
    }

    #[test]
    fn single_function_needs_no_queries() {
        let truth = p("x^4+x+1");
        let obf = obfuscate_chain(&truth, &[], 4).unwrap();
        let locked = lower_matrix(&obf);
        let problem = AttackProblem {
            locked: &locked,
            candidates: std::slice::from_ref(&truth),
            config: AttackConfig::default(),
        };
        let r = di_attack(&problem, &mut field_oracle(truth.clone())).unwrap();
        assert_eq!(r.verdict, AttackVerdict::Solved);
        assert_eq!(r.queries_used, 0);
        assert_eq!(r.recovered_key, Some(vec![]));
    }

    #[test]
    fn inconsistent_oracle_exhausts() {
        let obf = obfuscate_chain(&p("x^4+x^3+1"), &[p("x^4+x+1")], 4).unwrap();
        let locked = lower_matrix(&obf);
        let candidates = enumerate_irreducible(4, Default::default()).unwrap();
        let problem = AttackProblem {
            locked: &locked,
            candidates: &candidates,
            config: AttackConfig::default(),
        };
        let mut liar = FnOracle(|a: &Poly, _: &Poly| a ^ &Poly::one());
        let r = di_attack(&problem, &mut liar).unwrap();
        assert_eq!(r.verdict, AttackVerdict::Exhausted);
        assert_eq!(r.surviving, 0);
        assert!(r.recovered_poly.is_none());
    }

    #[test]
    fn zero_budget_exhausts() {
        let obf = obfuscate_chain(&p("x^4+x^3+1"), &[p("x^4+x+1")], 4).unwrap();
        let locked = lower_matrix(&obf);
        let candidates = enumerate_irreducible(4, Default::default()).unwrap();
        let problem = AttackProblem {
            locked: &locked,
            candidates: &candidates,
            config: AttackConfig {
                max_queries: 0,
                ..AttackConfig::default()
            },
        };
        let r = di_attack(&problem, &mut field_oracle(p("x^4+x^3+1"))).unwrap();
        assert_eq!(r.verdict, AttackVerdict::Exhausted);
        assert_eq!(r.surviving, 2);
        assert_eq!(r.queries_used, 0);
    }

    #[test]
    fn hypothesis_attack_degree_four_triple() {
        let candidates = enumerate_irreducible(4, Default::default()).unwrap();
        let truth = p("x^4+x^3+1");
        let r = poly_hypothesis_attack(
            &mut field_oracle(truth.clone()),
            4,
            &candidates,
            &AttackConfig::default(),
        )
        .unwrap();
        assert_eq!(r.verdict, AttackVerdict::Solved);
        assert_eq!(r.recovered_poly, Some(truth.clone()));
        assert!(r.queries_used <= 48);
        let single = poly_hypothesis_attack(
            &mut field_oracle(truth.clone()),
            4,
            &[truth],
            &AttackConfig::default(),
        )
        .unwrap();
        assert_eq!(single.queries_used, 0);
    }

    #[test]
    fn line_protocol_server() {
        let input = b"3 5\n\n0x8 0x8\n" as &[u8];
        let mut out = Vec::new();
        let f = p("x^4+x^3+1");
        let served = serve_oracle(input, &mut out, |a, b| {
            poly_mulmod(a, b, &f).map_err(|e| e.to_string())
        })
        .unwrap();
        assert_eq!(served, 2);
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            poly_mulmod(&Poly::from_u64(3), &Poly::from_u64(5), &f)
                .unwrap()
                .to_hex()
        );
        assert_eq!(
            lines[1],
            poly_mulmod(&Poly::from_u64(8), &Poly::from_u64(8), &f)
                .unwrap()
                .to_hex()
        );
        assert!(serve_oracle(b"zz\n" as &[u8], Vec::new(), |a, _| Ok(a.clone())).is_err());
        assert!(serve_oracle(b"10 1\n" as &[u8], Vec::new(), |a, b| {
            poly_mulmod(a, b, &f).map_err(|e| e.to_string())
        })
        .is_err());
    }
}
