//! Structural Verilog-1995 output: one `assign` per gate, operators
//! `& | ^ ~` only, nets named after their topological index.

use std::fmt::Write as _;

use super::{Gate, Netlist, NetlistError, NodeId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmitMode {
    /// Key bits stay as the input port `P`.
    Locked,
    /// Key bits are tied to the given values and propagated away.
    Resolved(Vec<bool>),
}

const RESERVED: &[&str] = &[
    "A",
    "B",
    "P",
    "Z",
    "module",
    "endmodule",
    "input",
    "output",
    "wire",
    "assign",
];

fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !RESERVED.contains(&name)
        && !is_net_name(name)
}

fn is_net_name(name: &str) -> bool {
    name.strip_prefix('n')
        .is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
}

fn net(n: &Netlist, id: NodeId) -> String {
    match n.gate(id) {
        Gate::InputA(i) => format!("A[{i}]"),
        Gate::InputB(i) => format!("B[{i}]"),
        Gate::Key(r) => format!("P[{r}]"),
        Gate::Const(false) => "1'b0".to_string(),
        Gate::Const(true) => "1'b1".to_string(),
        _ => format!("n{id}"),
    }
}

pub fn emit_verilog(
    n: &Netlist,
    mode: &EmitMode,
    module_name: &str,
) -> Result<String, NetlistError> {
    if !valid_identifier(module_name) {
        return Err(NetlistError::InvalidModuleName(module_name.to_string()));
    }
    let resolved;
    let n = match mode {
        EmitMode::Locked => n,
        EmitMode::Resolved(key) => {
            resolved = n.resolve_key(key)?;
            &resolved
        }
    };
    let m = n.m;
    let hi = m.saturating_sub(1);
    let mut out = String::new();
    let ports = if n.key_bits > 0 {
        "A, B, P, Z"
    } else {
        "A, B, Z"
    };
    let _ = writeln!(out, "module {module_name} ({ports});");
    let _ = writeln!(out, "  input [{hi}:0] A;");
    let _ = writeln!(out, "  input [{hi}:0] B;");
    if n.key_bits > 0 {
        let _ = writeln!(out, "  input [{}:0] P;", n.key_bits - 1);
    }
    let _ = writeln!(out, "  output [{hi}:0] Z;");
    let logic: Vec<NodeId> = (0..n.gates().len())
        .filter(|&i| n.gate(i).kind().is_logic())
        .collect();
    for &id in &logic {
        let _ = writeln!(out, "  wire n{id};");
    }
    for &id in &logic {
        let rhs = match n.gate(id) {
            Gate::And(x, y) => format!("{} & {}", net(n, x), net(n, y)),
            Gate::Or(x, y) => format!("{} | {}", net(n, x), net(n, y)),
            Gate::Xor(x, y) => format!("{} ^ {}", net(n, x), net(n, y)),
            Gate::Not(x) => format!("~{}", net(n, x)),
            _ => unreachable!(),
        };
        let _ = writeln!(out, "  assign n{id} = {rhs};");
    }
    for (q, &o) in n.outputs().iter().enumerate() {
        let _ = writeln!(out, "  assign Z[{q}] = {};", net(n, o));
    }
    out.push_str("endmodule\n");
    Ok(out)
}
