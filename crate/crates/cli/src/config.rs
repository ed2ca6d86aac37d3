use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use gfobf::netlist::CostModel;
use gfobf::obfuscate::{obfuscate_chain, with_inverted_bits, ObfMatrix};
use gfobf::optimize;
use gfobf::poly::{irreducibles, EnumLimits, Poly, PolyFilter};
use serde::{Deserialize, Serialize};

fn yes() -> bool {
    true
}

fn default_module() -> String {
    "gf_mul".to_string()
}

fn default_vectors() -> u64 {
    10_000
}

/// One design, as read from the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub m: usize,
    /// Defaults to the first polynomial passing `filter`.
    #[serde(default)]
    pub true_poly: Option<Poly>,
    /// Merged in this order. Mutually exclusive with `functions`.
    #[serde(default)]
    pub obfuscation_polys: Option<Vec<Poly>>,
    /// Total function count when the list is taken from the filter.
    #[serde(default)]
    pub functions: Option<usize>,
    #[serde(default)]
    pub filter: PolyFilter,
    #[serde(default = "yes")]
    pub optimize: bool,
    #[serde(default)]
    pub cost_model: Option<CostModel>,
    /// Physical polarity per key bit.
    #[serde(default)]
    pub invert_bits: Option<Vec<bool>>,
    /// Seeds every random stimulus derived from this config.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_module")]
    pub module_name: String,
    /// Random vectors per key class in the build-time check when the field
    /// is too large for exhaustive checking.
    #[serde(default = "default_vectors")]
    pub verify_vectors: u64,
}

impl DesignConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn cost_model(&self) -> Result<CostModel> {
        let model = self.cost_model.unwrap_or_default();
        ensure!(
            model.area.is_valid() && model.delay.is_valid(),
            "cost model weights must be finite and non-negative"
        );
        Ok(model)
    }

    /// The true polynomial and the ordered obfuscation list.
    pub fn polynomials(&self) -> Result<(Poly, Vec<Poly>)> {
        ensure!(self.m >= 2, "m must be at least 2, got {}", self.m);
        let filtered =
            || -> Result<_> { Ok(irreducibles(self.m, self.filter, EnumLimits::default())?) };
        let truth = match &self.true_poly {
            Some(p) => p.clone(),
            None => filtered()?
                .next()
                .with_context(|| format!("no polynomial of degree {} passes the filter", self.m))?,
        };
        let others = match (&self.obfuscation_polys, self.functions) {
            (Some(_), Some(_)) => {
                bail!("`obfuscation_polys` and `functions` are mutually exclusive")
            }
            (Some(list), None) => list.clone(),
            (None, k) => {
                let k = k.unwrap_or(1);
                ensure!(k >= 1, "`functions` must be at least 1");
                let others: Vec<Poly> = filtered()?.filter(|p| *p != truth).take(k - 1).collect();
                ensure!(
                    others.len() == k - 1,
                    "only {} polynomials of degree {} pass the filter, {k} functions requested",
                    others.len() + 1,
                    self.m
                );
                others
            }
        };
        ensure!(
            !others.contains(&truth),
            "the true polynomial {truth} also appears in `obfuscation_polys`"
        );
        Ok((truth, others))
    }

    /// Chains, applies polarity and optimizes.
    pub fn matrix(&self) -> Result<ObfMatrix> {
        self.cost_model()?;
        ensure!(
            is_identifier(&self.module_name),
            "`module_name` must be a plain identifier"
        );
        let (truth, others) = self.polynomials()?;
        let mut matrix = obfuscate_chain(&truth, &others, self.m)?;
        if let Some(invert) = &self.invert_bits {
            ensure!(
                invert.len() == others.len(),
                "`invert_bits` has {} entries for {} key bits",
                invert.len(),
                others.len()
            );
            matrix = with_inverted_bits(&matrix, invert);
        }
        if self.optimize {
            matrix = optimize(&matrix);
        }
        Ok(matrix)
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parses `--key` strings: character `i` is key bit `i` (`p{i+1}`).
pub fn parse_key(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => bail!("key must be a string of 0 and 1, got `{s}`"),
        })
        .collect()
}

pub fn key_string(key: &[bool]) -> String {
    key.iter().map(|&b| if b { '1' } else { '0' }).collect()
}
