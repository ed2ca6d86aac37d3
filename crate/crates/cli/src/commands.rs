use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, ensure, Context, Result};
use gfobf::attack::{
    di_attack, poly_hypothesis_attack, serve_oracle, AttackConfig, AttackProblem, AttackVerdict,
    FnOracle, Oracle, SubprocessOracle,
};
use gfobf::gen_structure;
use gfobf::netlist::{cost, emit_verilog, lower_matrix, lower_structure, EmitMode, Netlist};
use gfobf::obfuscate::KeySpec;
use gfobf::orders::{explore_orders, OrderMode, OrderOptions};
use gfobf::poly::{enumerate_irreducible, irreducibles, EnumLimits, Poly, PolyFilter};
use gfobf::sim::{eval_netlist, read_verilog_subset, verify_equiv, EquivReport, StimulusPlan};
use gfobf::trend::trend_row;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{key_string, parse_key, DesignConfig};
use crate::{
    AttackArgs, AttackMethod, BuildArgs, OracleArgs, OrdersArgs, PlanMode, PolyFormat, PolysArgs,
    Status, SweepArgs, VerifyArgs,
};

const LOCKED: &str = "design.locked.v";
const RESOLVED: &str = "design.resolved.v";
const KEYSPEC: &str = "keyspec.json";
const COST: &str = "cost.json";
const REPORT: &str = "report.json";

// Input bits up to which build-time checks are exhaustive.
const BUILD_EXHAUSTIVE_BITS: usize = 16;

fn parse_filter(s: &str) -> Result<PolyFilter> {
    s.parse().map_err(anyhow::Error::msg)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_netlist(path: &Path) -> Result<Netlist> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    read_verilog_subset(&text).with_context(|| format!("parsing {}", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

pub fn polys(a: PolysArgs) -> Result<Status> {
    let filter = parse_filter(&a.filter)?;
    let list: Vec<Poly> = irreducibles(a.m, filter, EnumLimits::default())?
        .take(a.limit.unwrap_or(usize::MAX))
        .collect();
    match a.format {
        PolyFormat::Text => list.iter().for_each(|p| println!("{p}")),
        PolyFormat::Hex => list.iter().for_each(|p| println!("{}", p.to_hex())),
        PolyFormat::Json => print_json(&list)?,
    }
    Ok(Status::Ok)
}

/// Contents of `report.json`.
#[derive(Debug, Serialize, Deserialize)]
struct BuildReport {
    m: usize,
    true_poly: Poly,
    functions: Vec<Poly>,
    key_bits: usize,
    classes: usize,
    delta_count: usize,
    reduced_delta_count: usize,
    cost_locked: gfobf::netlist::CostReport,
    cost_resolved: gfobf::netlist::CostReport,
    cost_plain: gfobf::netlist::CostReport,
    area_overhead: f64,
    delay_overhead: f64,
    checks: Vec<ClassCheck>,
    config: DesignConfig,
}

#[derive(Debug, Serialize, Deserialize)]
struct ClassCheck {
    class: usize,
    key: String,
    poly: Poly,
    report: EquivReport,
}

fn class_count(ks: &KeySpec) -> usize {
    match &ks.class_map {
        Some(map) => map.iter().collect::<BTreeSet<_>>().len(),
        None => ks.functions.len(),
    }
}

fn check_classes(
    locked: &Netlist,
    ks: &KeySpec,
    plan: &StimulusPlan,
    all: bool,
) -> Result<Vec<ClassCheck>> {
    let classes = if all { ks.functions.len() } else { 1 };
    (0..classes)
        .map(|class| {
            let key = if class == 0 {
                ks.true_key.clone()
            } else {
                ks.representative(class)
            };
            let report = verify_equiv(locked, &key, &ks.functions[class], plan)?;
            Ok(ClassCheck {
                class,
                key: key_string(&key),
                poly: ks.functions[class].clone(),
                report,
            })
        })
        .collect()
}

pub fn build(a: BuildArgs) -> Result<Status> {
    let cfg = DesignConfig::load(&a.config)?;
    let model = cfg.cost_model()?;
    let matrix = cfg.matrix()?;
    let ks = &matrix.key_spec;
    let locked = lower_matrix(&matrix);
    let resolved = locked.resolve_key(&ks.true_key)?;
    let plain = lower_structure(&gen_structure(&matrix.true_field)?);
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let write = |name: &str, text: String| {
        let path = a.out.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    };
    write(
        LOCKED,
        emit_verilog(&locked, &EmitMode::Locked, &cfg.module_name)?,
    )?;
    write(
        RESOLVED,
        emit_verilog(
            &locked,
            &EmitMode::Resolved(ks.true_key.clone()),
            &cfg.module_name,
        )?,
    )?;
    let keyspec_path = a.out.join(KEYSPEC);
    if ks.n > 0 {
        write_json(&keyspec_path, ks)?;
    } else if keyspec_path.exists() {
        fs::remove_file(&keyspec_path)?;
    }
    let cost_locked = cost(&locked, &model);
    write_json(&a.out.join(COST), &cost_locked)?;
    let plan = if 2 * cfg.m <= BUILD_EXHAUSTIVE_BITS {
        StimulusPlan::exhaustive(cfg.m)
    } else {
        StimulusPlan::random(cfg.m, cfg.verify_vectors, cfg.seed)
    };
    let checks = check_classes(&locked, ks, &plan, true)?;
    let passed = checks.iter().all(|c| c.report.passed());
    let cost_plain = cost(&plain, &model);
    let rel = |x: f64, base: f64| if base > 0.0 { (x - base) / base } else { 0.0 };
    let report = BuildReport {
        m: cfg.m,
        true_poly: ks.functions[0].clone(),
        functions: ks.functions.clone(),
        key_bits: ks.n,
        classes: class_count(ks),
        delta_count: matrix.delta_count(),
        reduced_delta_count: matrix.reduced_delta_count(),
        area_overhead: rel(cost_locked.area, cost_plain.area),
        delay_overhead: rel(cost_locked.delay, cost_plain.delay),
        cost_resolved: cost(&resolved, &model),
        cost_locked,
        cost_plain,
        checks,
        config: cfg.clone(),
    };
    write_json(&a.out.join(REPORT), &report)?;
    println!(
        "{}: m={} functions={} key_bits={} classes={} area={} delay={:.1} check={}",
        a.out.display(),
        report.m,
        report.functions.len(),
        report.key_bits,
        report.classes,
        report.cost_locked.area,
        report.cost_locked.delay,
        if passed { "pass" } else { "FAIL" }
    );
    Ok(if passed { Status::Ok } else { Status::Failed })
}

struct Bundle {
    locked: Netlist,
    keyspec: KeySpec,
}

fn load_bundle(dir: &Path) -> Result<Bundle> {
    let report: BuildReport = read_json(&dir.join(REPORT))?;
    let locked = read_netlist(&dir.join(LOCKED))?;
    ensure!(
        locked.m == report.m,
        "{LOCKED} has width {}, {REPORT} says {}",
        locked.m,
        report.m
    );
    let keyspec_path = dir.join(KEYSPEC);
    let mut keyspec: KeySpec = if keyspec_path.exists() {
        read_json(&keyspec_path)?
    } else {
        ensure!(
            locked.key_bits == 0,
            "locked design has a key port but {KEYSPEC} is missing"
        );
        KeySpec {
            n: 0,
            bits: Vec::new(),
            inverted: Vec::new(),
            true_key: Vec::new(),
            functions: vec![report.true_poly.clone()],
            class_map: None,
        }
    };
    ensure!(
        keyspec.true_key.len() == locked.key_bits && keyspec.inverted.len() == locked.key_bits,
        "{KEYSPEC} describes {} key bits, the design has {}",
        keyspec.true_key.len(),
        locked.key_bits
    );
    // The report is the reference for the true function.
    keyspec.functions[0] = report.true_poly;
    Ok(Bundle { locked, keyspec })
}

pub fn verify(a: VerifyArgs) -> Result<Status> {
    let bundle = load_bundle(&a.bundle)?;
    let m = bundle.locked.m;
    let plan = match a.mode {
        PlanMode::Exhaustive => StimulusPlan::exhaustive(m),
        PlanMode::Random => StimulusPlan::random(m, a.vectors, a.seed),
        PlanMode::Auto => StimulusPlan::auto(m, a.vectors, a.seed),
    };
    let checks = check_classes(&bundle.locked, &bundle.keyspec, &plan, a.all_classes)?;
    let passed = checks.iter().all(|c| c.report.passed());
    print_json(&json!({ "passed": passed, "checks": checks }))?;
    Ok(if passed { Status::Ok } else { Status::Failed })
}

fn read_candidates(path: Option<&PathBuf>, m: usize) -> Result<Vec<Poly>> {
    match path {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(|l| l.parse::<Poly>().map_err(anyhow::Error::from))
                .collect()
        }
        None => enumerate_irreducible(m, PolyFilter::All)
            .with_context(|| format!("pass --candidates for m={m}")),
    }
}

pub fn attack(a: AttackArgs) -> Result<Status> {
    let (locked, local_oracle) = match (&a.bundle, &a.verilog) {
        (Some(dir), _) => (
            read_netlist(&dir.join(LOCKED))?,
            Some(read_netlist(&dir.join(RESOLVED))?),
        ),
        (None, Some(path)) => (read_netlist(path)?, None),
        (None, None) => bail!("give --bundle or --verilog"),
    };
    let m = locked.m;
    ensure!(m >= 2, "design width must be at least 2");
    let candidates = read_candidates(a.candidates.as_ref(), m)?;
    ensure!(
        a.timeout_secs.is_finite() && a.timeout_secs >= 0.0,
        "timeout must be non-negative"
    );
    let config = AttackConfig {
        max_queries: a.max_queries,
        time_budget: Duration::from_secs_f64(a.timeout_secs),
        seed: a.seed,
        ..AttackConfig::default()
    };
    let mut oracle: Box<dyn Oracle> = match (&a.oracle_cmd, local_oracle) {
        (Some(cmd), _) => {
            let mut command = std::process::Command::new(cmd);
            command.args(&a.oracle_args);
            Box::new(SubprocessOracle::spawn(command).with_context(|| format!("starting `{cmd}`"))?)
        }
        (None, Some(resolved)) => {
            ensure!(resolved.key_bits == 0, "{RESOLVED} still has a key port");
            Box::new(FnOracle(move |x: &Poly, y: &Poly| {
                eval_netlist(&resolved, x, y, &[])
                    .expect("operands are drawn below the field width")
            }))
        }
        (None, None) => bail!("--verilog needs --oracle-cmd"),
    };
    let result = match a.method {
        AttackMethod::Di => {
            let problem = AttackProblem {
                locked: &locked,
                candidates: &candidates,
                config,
            };
            di_attack(&problem, oracle.as_mut())?
        }
        AttackMethod::Hypothesis => {
            poly_hypothesis_attack(oracle.as_mut(), m, &candidates, &config)?
        }
    };
    if let Some(out) = &a.out {
        write_json(out, &result)?;
    }
    print_json(&result)?;
    Ok(if result.verdict == AttackVerdict::Solved {
        Status::Ok
    } else {
        Status::Failed
    })
}

pub fn sweep(a: SweepArgs) -> Result<Status> {
    let filter = parse_filter(&a.filter)?;
    let model = Default::default();
    let sink: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for &m in &a.m {
        for &k in &a.k {
            ensure!(k >= 1, "k must be at least 1");
            let row = trend_row(m, k, filter, !a.no_optimize, &model)
                .with_context(|| format!("m={m}, k={k}"))?;
            w.serialize(row)?;
        }
    }
    w.flush()?;
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct OrderRow {
    permutation: String,
    area: f64,
    delay: f64,
    delta_count: usize,
    reduced_delta_count: usize,
}

pub fn orders(a: OrdersArgs) -> Result<Status> {
    let cfg = DesignConfig::load(&a.config)?;
    let (truth, others) = cfg.polynomials()?;
    let opts = OrderOptions {
        mode: match a.sample {
            Some(count) => OrderMode::Sample {
                count,
                seed: a.seed.unwrap_or(cfg.seed),
            },
            None => OrderMode::Exhaustive,
        },
        cost_model: cfg.cost_model()?,
        optimize: cfg.optimize,
        verify_seed: cfg.seed,
        max_exhaustive_others: a.max_others,
        permutation_budget: a.budget,
        ..OrderOptions::default()
    };
    let study = explore_orders(&truth, &others, cfg.m, &opts)?;
    let sink: Box<dyn Write> = match &a.csv {
        Some(path) => Box::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for r in &study.results {
        w.serialize(OrderRow {
            permutation: r
                .order
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join("-"),
            area: r.cost.area,
            delay: r.cost.delay,
            delta_count: r.cost.delta_count,
            reduced_delta_count: r.reduced_delta_count,
        })?;
    }
    w.flush()?;
    let verified = study.results.iter().filter(|r| r.verified).count();
    if let Some(path) = &a.histogram {
        write_json(
            path,
            &json!({
                "count": study.results.len(),
                "verified": verified,
                "area": study.area,
                "delay": study.delay,
            }),
        )?;
    }
    if verified < study.results.len() {
        eprintln!(
            "{} of {} orders failed verification",
            study.results.len() - verified,
            study.results.len()
        );
        return Ok(Status::Failed);
    }
    Ok(Status::Ok)
}

type Multiply = Box<dyn FnMut(&Poly, &Poly) -> Result<Poly, String>>;

pub fn oracle(a: OracleArgs) -> Result<Status> {
    let mut f: Multiply = match (&a.poly, &a.verilog, &a.bundle) {
        (Some(p), _, _) => {
            let p: Poly = p.parse()?;
            ensure!(p.degree() >= 2, "modulus must have degree at least 2");
            Box::new(move |x: &Poly, y: &Poly| {
                gfobf::poly::poly_mulmod(x, y, &p).map_err(|e| e.to_string())
            })
        }
        (None, Some(path), _) => {
            let n = read_netlist(path)?;
            let key = match &a.key {
                Some(k) => parse_key(k)?,
                None => Vec::new(),
            };
            ensure!(
                key.len() == n.key_bits,
                "design has {} key bits, --key gives {}",
                n.key_bits,
                key.len()
            );
            Box::new(move |x: &Poly, y: &Poly| {
                eval_netlist(&n, x, y, &key).map_err(|e| e.to_string())
            })
        }
        (None, None, Some(dir)) => {
            let n = read_netlist(&dir.join(RESOLVED))?;
            Box::new(move |x: &Poly, y: &Poly| {
                eval_netlist(&n, x, y, &[]).map_err(|e| e.to_string())
            })
        }
        (None, None, None) => bail!("give --poly, --verilog or --bundle"),
    };
    serve_oracle(io::stdin().lock(), io::stdout().lock(), |x, y| f(x, y))?;
    Ok(Status::Ok)
}
