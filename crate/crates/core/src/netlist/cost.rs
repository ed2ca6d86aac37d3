use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Gate, GateKind, Netlist};

/// Per-kind weights for the four logic gate kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateWeights {
    pub and: f64,
    pub or: f64,
    pub xor: f64,
    pub not: f64,
}

impl GateWeights {
    pub fn of(&self, kind: GateKind) -> f64 {
        match kind {
            GateKind::And => self.and,
            GateKind::Or => self.or,
            GateKind::Xor => self.xor,
            GateKind::Not => self.not,
            _ => 0.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.and, self.or, self.xor, self.not]
            .iter()
            .all(|w| w.is_finite() && *w >= 0.0)
    }
}

/// Unit-less area and delay proxy. XOR is weighted as roughly two simple
/// gates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub area: GateWeights,
    pub delay: GateWeights,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            area: GateWeights {
                and: 1.0,
                or: 1.0,
                xor: 2.0,
                not: 0.5,
            },
            delay: GateWeights {
                and: 1.0,
                or: 1.0,
                xor: 1.4,
                not: 0.3,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub area: f64,
    /// Longest weighted input-to-output path.
    pub delay: f64,
    pub gates: BTreeMap<String, usize>,
    pub delta_count: usize,
    pub key_bits: usize,
}

pub fn cost(n: &Netlist, model: &CostModel) -> CostReport {
    let mut arrival = vec![0.0f64; n.gates().len()];
    let mut area = 0.0;
    let mut gates = BTreeMap::new();
    for (i, g) in n.gates().iter().enumerate() {
        let kind = g.kind();
        if !kind.is_logic() {
            continue;
        }
        area += model.area.of(kind);
        *gates.entry(kind.name().to_string()).or_insert(0) += 1;
        let input = match *g {
            Gate::And(x, y) | Gate::Or(x, y) | Gate::Xor(x, y) => arrival[x].max(arrival[y]),
            Gate::Not(x) => arrival[x],
            _ => 0.0,
        };
        arrival[i] = input + model.delay.of(kind);
    }
    let delay = n.outputs().iter().map(|&o| arrival[o]).fold(0.0, f64::max);
    CostReport {
        area,
        delay,
        gates,
        delta_count: n.delta_count,
        key_bits: n.key_bits,
    }
}
