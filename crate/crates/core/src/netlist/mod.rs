//! Gate-level netlists.
//!
//! Nodes are stored in topological order: every operand index is smaller
//! than the index of the node using it. Node `i < m` is `A[i]`, `m + i` is
//! `B[i]`, `2m + r` is key bit `P[r]`.

mod cost;
mod lower;
mod verilog;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cost::{cost, CostModel, CostReport, GateWeights};
pub use lower::{lower, lower_matrix, lower_structure};
pub use verilog::{emit_verilog, EmitMode};

pub type NodeId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetlistError {
    #[error("key has {got} bits, netlist expects {expected}")]
    KeyWidth { got: usize, expected: usize },
    #[error("module name `{0}` is not a usable identifier")]
    InvalidModuleName(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    InputA(usize),
    InputB(usize),
    Key(usize),
    Const(bool),
    And(NodeId, NodeId),
    Or(NodeId, NodeId),
    Xor(NodeId, NodeId),
    Not(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    InputA,
    InputB,
    Key,
    Const0,
    Const1,
    And,
    Or,
    Xor,
    Not,
}

impl GateKind {
    pub fn is_logic(self) -> bool {
        matches!(
            self,
            GateKind::And | GateKind::Or | GateKind::Xor | GateKind::Not
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::InputA => "input_a",
            GateKind::InputB => "input_b",
            GateKind::Key => "key",
            GateKind::Const0 => "const0",
            GateKind::Const1 => "const1",
            GateKind::And => "and",
            GateKind::Or => "or",
            GateKind::Xor => "xor",
            GateKind::Not => "not",
        }
    }
}

impl Gate {
    pub fn kind(&self) -> GateKind {
        match self {
            Gate::InputA(_) => GateKind::InputA,
            Gate::InputB(_) => GateKind::InputB,
            Gate::Key(_) => GateKind::Key,
            Gate::Const(false) => GateKind::Const0,
            Gate::Const(true) => GateKind::Const1,
            Gate::And(..) => GateKind::And,
            Gate::Or(..) => GateKind::Or,
            Gate::Xor(..) => GateKind::Xor,
            Gate::Not(_) => GateKind::Not,
        }
    }

    pub fn operands(&self) -> impl Iterator<Item = NodeId> {
        let (a, b) = match *self {
            Gate::And(x, y) | Gate::Or(x, y) | Gate::Xor(x, y) => (Some(x), Some(y)),
            Gate::Not(x) => (Some(x), None),
            _ => (None, None),
        };
        a.into_iter().chain(b)
    }
}

/// Combinational netlist computing `Z = A * B` under key `P`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    pub m: usize,
    pub key_bits: usize,
    gates: Vec<Gate>,
    outputs: Vec<NodeId>,
    /// Delta terms of the matrix this netlist was lowered from.
    pub delta_count: usize,
    pub reduced_delta_count: usize,
}

impl Netlist {
    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn outputs(&self) -> &[NodeId] {
        &self.outputs
    }

    pub fn gate(&self, id: NodeId) -> Gate {
        self.gates[id]
    }

    /// Number of AND/OR/XOR/NOT nodes.
    pub fn logic_gate_count(&self) -> usize {
        self.gates.iter().filter(|g| g.kind().is_logic()).count()
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind() == kind).count()
    }

    pub fn has_key_nodes(&self) -> bool {
        self.key_bits > 0
    }

    /// Bit-sliced evaluation. `a`, `b` hold `m` lane words, `key` one per
    /// key bit; returns the `m` output lane words.
    pub fn eval_lanes(&self, a: &[u64], b: &[u64], key: &[u64]) -> Vec<u64> {
        let mut v = vec![0u64; self.gates.len()];
        for (i, g) in self.gates.iter().enumerate() {
            v[i] = match *g {
                Gate::InputA(j) => a[j],
                Gate::InputB(j) => b[j],
                Gate::Key(r) => key[r],
                Gate::Const(c) => {
                    if c {
                        u64::MAX
                    } else {
                        0
                    }
                }
                Gate::And(x, y) => v[x] & v[y],
                Gate::Or(x, y) => v[x] | v[y],
                Gate::Xor(x, y) => v[x] ^ v[y],
                Gate::Not(x) => !v[x],
            };
        }
        self.outputs.iter().map(|&o| v[o]).collect()
    }

    /// Replaces key inputs by constants, propagates them and removes dead
    /// logic. The result has no key port.
    pub fn resolve_key(&self, key: &[bool]) -> Result<Netlist, NetlistError> {
        if key.len() != self.key_bits {
            return Err(NetlistError::KeyWidth {
                got: key.len(),
                expected: self.key_bits,
            });
        }
        let mut b = NetlistBuilder::new(self.m, 0);
        let mut map = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let id = match *g {
                Gate::InputA(j) => b.input_a(j),
                Gate::InputB(j) => b.input_b(j),
                Gate::Key(r) => b.constant(key[r]),
                Gate::Const(c) => b.constant(c),
                Gate::And(x, y) => b.and(map[x], map[y]),
                Gate::Or(x, y) => b.or(map[x], map[y]),
                Gate::Xor(x, y) => b.xor(map[x], map[y]),
                Gate::Not(x) => b.not(map[x]),
            };
            map.push(id);
        }
        let outputs = self.outputs.iter().map(|&o| map[o]).collect();
        Ok(b.finish(outputs))
    }
}

/// Structural-hashing builder with local constant folding.
///
/// Folding never introduces a gate that was not already present: `x ^ 1`
/// is kept as an XOR rather than rewritten to an inverter.
#[derive(Debug, Clone)]
pub struct NetlistBuilder {
    m: usize,
    key_bits: usize,
    gates: Vec<Gate>,
    index: HashMap<Gate, NodeId>,
    delta_count: usize,
    reduced_delta_count: usize,
}

impl NetlistBuilder {
    pub fn new(m: usize, key_bits: usize) -> Self {
        let mut b = NetlistBuilder {
            m,
            key_bits,
            gates: Vec::new(),
            index: HashMap::new(),
            delta_count: 0,
            reduced_delta_count: 0,
        };
        for i in 0..m {
            b.intern(Gate::InputA(i));
        }
        for i in 0..m {
            b.intern(Gate::InputB(i));
        }
        for r in 0..key_bits {
            b.intern(Gate::Key(r));
        }
        b
    }

    pub fn set_delta_counts(&mut self, deltas: usize, reduced: usize) {
        self.delta_count = deltas;
        self.reduced_delta_count = reduced;
    }

    fn intern(&mut self, g: Gate) -> NodeId {
        if let Some(&id) = self.index.get(&g) {
            return id;
        }
        let id = self.gates.len();
        self.gates.push(g);
        self.index.insert(g, id);
        id
    }

    pub fn input_a(&self, i: usize) -> NodeId {
        debug_assert!(i < self.m);
        i
    }

    pub fn input_b(&self, i: usize) -> NodeId {
        debug_assert!(i < self.m);
        self.m + i
    }

    pub fn key(&self, r: usize) -> NodeId {
        debug_assert!(r < self.key_bits);
        2 * self.m + r
    }

    pub fn constant(&mut self, c: bool) -> NodeId {
        self.intern(Gate::Const(c))
    }

    fn const_value(&self, id: NodeId) -> Option<bool> {
        match self.gates[id] {
            Gate::Const(c) => Some(c),
            _ => None,
        }
    }

    fn complements(&self, x: NodeId, y: NodeId) -> bool {
        self.gates[x] == Gate::Not(y) || self.gates[y] == Gate::Not(x)
    }

    pub fn and(&mut self, x: NodeId, y: NodeId) -> NodeId {
        let (x, y) = (x.min(y), x.max(y));
        match (self.const_value(x), self.const_value(y)) {
            (Some(false), _) | (_, Some(false)) => return self.constant(false),
            (Some(true), _) => return y,
            (_, Some(true)) => return x,
            _ => {}
        }
        if x == y {
            return x;
        }
        if self.complements(x, y) {
            return self.constant(false);
        }
        self.intern(Gate::And(x, y))
    }

    pub fn or(&mut self, x: NodeId, y: NodeId) -> NodeId {
        let (x, y) = (x.min(y), x.max(y));
        match (self.const_value(x), self.const_value(y)) {
            (Some(true), _) | (_, Some(true)) => return self.constant(true),
            (Some(false), _) => return y,
            (_, Some(false)) => return x,
            _ => {}
        }
        if x == y {
            return x;
        }
        if self.complements(x, y) {
            return self.constant(true);
        }
        self.intern(Gate::Or(x, y))
    }

    pub fn xor(&mut self, x: NodeId, y: NodeId) -> NodeId {
        let (x, y) = (x.min(y), x.max(y));
        match (self.const_value(x), self.const_value(y)) {
            (Some(a), Some(b)) => return self.constant(a ^ b),
            (Some(false), _) => return y,
            (_, Some(false)) => return x,
            _ => {}
        }
        if x == y {
            return self.constant(false);
        }
        self.intern(Gate::Xor(x, y))
    }

    pub fn not(&mut self, x: NodeId) -> NodeId {
        match self.gates[x] {
            Gate::Const(c) => self.constant(!c),
            Gate::Not(inner) => inner,
            _ => self.intern(Gate::Not(x)),
        }
    }

    /// Balanced XOR tree over the operands, taken in ascending node order.
    pub fn xor_tree(&mut self, mut nodes: Vec<NodeId>) -> NodeId {
        if nodes.is_empty() {
            return self.constant(false);
        }
        nodes.sort_unstable();
        while nodes.len() > 1 {
            let next: Vec<NodeId> = nodes
                .chunks(2)
                .map(|pair| match *pair {
                    [x, y] => self.xor(x, y),
                    [x] => x,
                    _ => unreachable!(),
                })
                .collect();
            nodes = next;
        }
        nodes[0]
    }

    /// Drops logic unreachable from the outputs and renumbers the rest.
    /// Primary inputs and key bits are always kept.
    pub fn finish(self, outputs: Vec<NodeId>) -> Netlist {
        let fixed = 2 * self.m + self.key_bits;
        let mut live = vec![false; self.gates.len()];
        live[..fixed].iter_mut().for_each(|l| *l = true);
        for &o in &outputs {
            live[o] = true;
        }
        for i in (0..self.gates.len()).rev() {
            if live[i] {
                for op in self.gates[i].operands() {
                    live[op] = true;
                }
            }
        }
        let mut remap = vec![usize::MAX; self.gates.len()];
        let mut gates = Vec::new();
        for (i, g) in self.gates.iter().enumerate() {
            if !live[i] {
                continue;
            }
            remap[i] = gates.len();
            gates.push(match *g {
                Gate::And(x, y) => Gate::And(remap[x], remap[y]),
                Gate::Or(x, y) => Gate::Or(remap[x], remap[y]),
                Gate::Xor(x, y) => Gate::Xor(remap[x], remap[y]),
                Gate::Not(x) => Gate::Not(remap[x]),
                other => other,
            });
        }
        Netlist {
            m: self.m,
            key_bits: self.key_bits,
            gates,
            outputs: outputs.iter().map(|&o| remap[o]).collect(),
            delta_count: self.delta_count,
            reduced_delta_count: self.reduced_delta_count,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding_rules() {
        let mut b = NetlistBuilder::new(1, 1);
        let (a, k) = (b.input_a(0), b.key(0));
        let zero = b.constant(false);
        let one = b.constant(true);
        assert_eq!(b.and(a, zero), zero);
        assert_eq!(b.and(one, a), a);
        assert_eq!(b.or(a, zero), a);
        assert_eq!(b.or(a, one), one);
        assert_eq!(b.xor(a, a), zero);
        let nk = b.not(k);
        assert_eq!(b.not(nk), k);
        assert_eq!(b.and(k, nk), zero);
        assert_eq!(b.or(nk, k), one);
        let x1 = b.xor(a, one);
        assert!(matches!(b.gates[x1], Gate::Xor(..)));
        assert_eq!(b.and(a, k), b.and(k, a));
    }

    #[test]
    fn finish_removes_dead_logic() {
        let mut b = NetlistBuilder::new(2, 0);
        let (a0, b0) = (b.input_a(0), b.input_b(0));
        let dead = b.and(a0, b0);
        let _ = b.not(dead);
        let live = b.xor(a0, b0);
        let n = b.finish(vec![live, a0]);
        assert_eq!(n.logic_gate_count(), 1);
        assert_eq!(n.outputs(), &[4, 0]);
    }

    #[test]
    fn resolve_rejects_short_key() {
        let b = NetlistBuilder::new(1, 2);
        let n = b.finish(vec![0]);
        assert_eq!(
            n.resolve_key(&[true]),
            Err(NetlistError::KeyWidth {
                got: 1,
                expected: 2
            })
        );
    }
}
