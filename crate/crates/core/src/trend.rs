//! Area/delay overhead of obfuscated multipliers relative to the plain one.

use serde::{Deserialize, Serialize};

use crate::netlist::{cost, lower_matrix, lower_structure, CostModel};
use crate::obfuscate::{obfuscate_chain, ObfError};
use crate::optimize::optimize;
use crate::poly::{irreducibles, EnumLimits, FieldSpec, Poly, PolyFilter};
use crate::structure::gen_structure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendRow {
    pub m: usize,
    /// Number of functions, the true one included.
    pub k: usize,
    pub area: f64,
    pub delay: f64,
    pub plain_area: f64,
    pub plain_delay: f64,
    pub area_overhead: f64,
    pub delay_overhead: f64,
    pub delta_count: usize,
    pub key_bits: usize,
}

/// The first `k` irreducible polynomials of degree `m` passing `filter`, in
/// ascending order.
pub fn first_functions(m: usize, k: usize, filter: PolyFilter) -> Result<Vec<Poly>, ObfError> {
    let polys: Vec<Poly> = irreducibles(m, filter, EnumLimits::default())?
        .take(k)
        .collect();
    if polys.len() < k {
        return Err(ObfError::NotEnoughPolynomials {
            m,
            want: k,
            have: polys.len(),
        });
    }
    Ok(polys)
}

/// Builds the `k`-function design (first polynomial true, the rest merged in
/// ascending order) and compares it with the plain multiplier.
pub fn trend_row(
    m: usize,
    k: usize,
    filter: PolyFilter,
    optimized: bool,
    model: &CostModel,
) -> Result<TrendRow, ObfError> {
    let polys = first_functions(m, k.max(1), filter)?;
    let mut matrix = obfuscate_chain(&polys[0], &polys[1..], m)?;
    if optimized {
        matrix = optimize(&matrix);
    }
    let obf = cost(&lower_matrix(&matrix), model);
    let plain = cost(
        &lower_structure(&gen_structure(&FieldSpec::with_degree(
            m,
            polys[0].clone(),
        )?)?),
        model,
    );
    let rel = |x: f64, base: f64| if base > 0.0 { (x - base) / base } else { 0.0 };
    Ok(TrendRow {
        m,
        k,
        area: obf.area,
        delay: obf.delay,
        plain_area: plain.area,
        plain_delay: plain.delay,
        area_overhead: rel(obf.area, plain.area),
        delay_overhead: rel(obf.delay, plain.delay),
        delta_count: obf.delta_count,
        key_bits: obf.key_bits,
    })
}
