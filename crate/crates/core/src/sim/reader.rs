//! Reader for the structural Verilog subset produced by the emitter.
//!
//! Accepted: one module with ports `A`, `B`, optional key `P`, output `Z`;
//! `input`/`output`/`wire` declarations; continuous `assign` statements over
//! `& | ^ ~`, parentheses, bit-selects and the constants `1'b0`/`1'b1`.
//! Assignments may appear in any order.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::netlist::{Netlist, NetlistBuilder, NodeId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(usize),
    Bit(bool),
    Sym(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, message: String| ParseError { line, col, message };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let mut advance = |i: &mut usize, n: usize, chars: &[char]| {
            for _ in 0..n {
                if chars[*i] == '\n' {
                    line += 1;
                    col = 1;
                } else {
                    col += 1;
                }
                *i += 1;
            }
        };
        if c.is_whitespace() {
            advance(&mut i, 1, &chars);
        } else if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, 1, &chars);
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance(&mut i, 2, &chars);
            loop {
                if i + 1 >= chars.len() {
                    return Err(err(tl, tc, "unterminated comment".into()));
                }
                if chars[i] == '*' && chars[i + 1] == '/' {
                    advance(&mut i, 2, &chars);
                    break;
                }
                advance(&mut i, 1, &chars);
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(&mut i, 1, &chars);
            }
            let word: String = chars[start..i].iter().collect();
            out.push(Token {
                tok: Tok::Ident(word),
                line: tl,
                col: tc,
            });
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(&mut i, 1, &chars);
            }
            let digits: String = chars[start..i].iter().collect();
            if chars.get(i) == Some(&'\'') {
                let lit: String = chars[i..(i + 3).min(chars.len())].iter().collect();
                let value = match (digits.as_str(), lit.as_str()) {
                    ("1", "'b0") => false,
                    ("1", "'b1") => true,
                    _ => return Err(err(tl, tc, format!("unsupported literal `{digits}{lit}`"))),
                };
                advance(&mut i, 3, &chars);
                out.push(Token {
                    tok: Tok::Bit(value),
                    line: tl,
                    col: tc,
                });
            } else {
                let n = digits
                    .parse()
                    .map_err(|_| err(tl, tc, format!("number `{digits}` out of range")))?;
                out.push(Token {
                    tok: Tok::Num(n),
                    line: tl,
                    col: tc,
                });
            }
        } else if "()[];:,=&|^~".contains(c) {
            advance(&mut i, 1, &chars);
            out.push(Token {
                tok: Tok::Sym(c),
                line: tl,
                col: tc,
            });
        } else {
            return Err(err(tl, tc, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Ref {
    Net(String),
    Bit(String, usize),
}

impl fmt::Display for Ref {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ref::Net(n) => f.write_str(n),
            Ref::Bit(n, i) => write!(f, "{n}[{i}]"),
        }
    }
}

#[derive(Debug, Clone)]
enum Expr {
    Const(bool),
    Ref(Ref, usize, usize),
    Not(Box<Expr>),
    Bin(char, Box<Expr>, Box<Expr>),
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map_or(self.end, |t| (t.line, t.col))
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError {
            line,
            col,
            message: message.into(),
        })
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected `{c}`"))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.error("expected identifier"),
        }
    }

    fn num(&mut self) -> Result<usize, ParseError> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => self.error("expected number"),
        }
    }

    fn reference(&mut self) -> Result<Ref, ParseError> {
        let name = self.ident()?;
        if self.peek() == Some(&Tok::Sym('[')) {
            self.pos += 1;
            let idx = self.num()?;
            self.expect_sym(']')?;
            Ok(Ref::Bit(name, idx))
        } else {
            Ok(Ref::Net(name))
        }
    }

    // expr := xor ('|' xor)* ; xor := and ('^' and)* ; and := unary ('&' unary)*
    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> Result<Expr, ParseError> {
        const OPS: [char; 3] = ['|', '^', '&'];
        if level == OPS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while self.peek() == Some(&Tok::Sym(OPS[level])) {
            self.pos += 1;
            let rhs = self.binary(level + 1)?;
            lhs = Expr::Bin(OPS[level], Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        let (line, col) = self.here();
        match self.peek() {
            Some(Tok::Sym('~')) => {
                self.pos += 1;
                Ok(Expr::Not(Box::new(self.unary()?)))
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Some(Tok::Bit(b)) => {
                let b = *b;
                self.pos += 1;
                Ok(Expr::Const(b))
            }
            Some(Tok::Ident(_)) => Ok(Expr::Ref(self.reference()?, line, col)),
            _ => self.error("expected expression"),
        }
    }
}

#[derive(Default)]
struct Module {
    inputs: HashMap<String, usize>,
    outputs: HashMap<String, usize>,
    wires: HashMap<String, ()>,
    assigns: HashMap<Ref, (Expr, usize, usize)>,
    order: Vec<Ref>,
}

fn parse_module(text: &str) -> Result<Module, ParseError> {
    let toks = tokenize(text)?;
    let end = toks.last().map_or((1, 1), |t| (t.line, t.col + 1));
    let mut p = Parser { toks, pos: 0, end };
    let mut module = Module::default();
    if p.ident()? != "module" {
        p.pos -= 1;
        return p.error("expected `module`");
    }
    p.ident()?;
    let mut ports = Vec::new();
    if p.peek() == Some(&Tok::Sym('(')) {
        p.pos += 1;
        while p.peek() != Some(&Tok::Sym(')')) {
            ports.push(p.ident()?);
            if p.peek() == Some(&Tok::Sym(',')) {
                p.pos += 1;
            }
        }
        p.expect_sym(')')?;
    }
    p.expect_sym(';')?;
    loop {
        let (line, col) = p.here();
        let kw = match p.next() {
            Some(Tok::Ident(kw)) => kw,
            None => return p.error("missing `endmodule`"),
            _ => {
                p.pos -= 1;
                return p.error("expected a declaration or `assign`");
            }
        };
        match kw.as_str() {
            "endmodule" => break,
            "input" | "output" | "wire" => {
                let width = if p.peek() == Some(&Tok::Sym('[')) {
                    p.pos += 1;
                    let hi = p.num()?;
                    p.expect_sym(':')?;
                    let lo = p.num()?;
                    p.expect_sym(']')?;
                    if lo != 0 || hi < lo {
                        return Err(ParseError {
                            line,
                            col,
                            message: format!("unsupported range [{hi}:{lo}]"),
                        });
                    }
                    hi + 1
                } else {
                    1
                };
                loop {
                    let name = p.ident()?;
                    match kw.as_str() {
                        "input" => {
                            module.inputs.insert(name, width);
                        }
                        "output" => {
                            module.outputs.insert(name, width);
                        }
                        _ => {
                            if width != 1 {
                                return Err(ParseError {
                                    line,
                                    col,
                                    message: "vector wires are not supported".into(),
                                });
                            }
                            module.wires.insert(name, ());
                        }
                    }
                    if p.peek() == Some(&Tok::Sym(',')) {
                        p.pos += 1;
                    } else {
                        break;
                    }
                }
                p.expect_sym(';')?;
            }
            "assign" => {
                let (l, c) = p.here();
                let lhs = p.reference()?;
                p.expect_sym('=')?;
                let rhs = p.expr()?;
                p.expect_sym(';')?;
                module.order.push(lhs.clone());
                if module.assigns.insert(lhs.clone(), (rhs, l, c)).is_some() {
                    return Err(ParseError {
                        line: l,
                        col: c,
                        message: format!("`{lhs}` is assigned twice"),
                    });
                }
            }
            other => {
                return Err(ParseError {
                    line,
                    col,
                    message: format!("unsupported construct `{other}`"),
                })
            }
        }
    }
    if p.peek().is_some() {
        return p.error("text after `endmodule`");
    }
    for port in &ports {
        if !module.inputs.contains_key(port) && !module.outputs.contains_key(port) {
            return Err(ParseError {
                line: 1,
                col: 1,
                message: format!("port `{port}` is not declared"),
            });
        }
    }
    Ok(module)
}

struct Elaborator<'a> {
    module: &'a Module,
    b: NetlistBuilder,
    m: usize,
    keys: usize,
    done: HashMap<Ref, NodeId>,
    active: Vec<Ref>,
}

impl Elaborator<'_> {
    fn at(line: usize, col: usize, message: String) -> ParseError {
        ParseError { line, col, message }
    }

    fn resolve(&mut self, r: &Ref, line: usize, col: usize) -> Result<NodeId, ParseError> {
        match r {
            Ref::Bit(name, i) if name == "A" || name == "B" || name == "P" => {
                let width = if name == "P" { self.keys } else { self.m };
                if *i >= width {
                    return Err(Self::at(
                        line,
                        col,
                        format!("index {i} out of range for `{name}`"),
                    ));
                }
                return Ok(match name.as_str() {
                    "A" => self.b.input_a(*i),
                    "B" => self.b.input_b(*i),
                    _ => self.b.key(*i),
                });
            }
            Ref::Net(name) if ["A", "B", "P", "Z"].contains(&name.as_str()) => {
                return Err(Self::at(
                    line,
                    col,
                    format!("bus `{name}` used without a bit-select"),
                ));
            }
            _ => {}
        }
        if let Some(&id) = self.done.get(r) {
            return Ok(id);
        }
        if self.active.contains(r) {
            return Err(Self::at(
                line,
                col,
                format!("combinational loop through `{r}`"),
            ));
        }
        if let Ref::Net(name) = r {
            if !self.module.wires.contains_key(name) {
                return Err(Self::at(line, col, format!("undeclared net `{name}`")));
            }
        }
        let (expr, _, _) = self
            .module
            .assigns
            .get(r)
            .ok_or_else(|| Self::at(line, col, format!("`{r}` is never assigned")))?;
        self.active.push(r.clone());
        let id = self.expr(expr)?;
        self.active.pop();
        self.done.insert(r.clone(), id);
        Ok(id)
    }

    fn expr(&mut self, e: &Expr) -> Result<NodeId, ParseError> {
        Ok(match e {
            Expr::Const(v) => self.b.constant(*v),
            Expr::Ref(r, l, c) => self.resolve(r, *l, *c)?,
            Expr::Not(x) => {
                let x = self.expr(x)?;
                self.b.not(x)
            }
            Expr::Bin(op, x, y) => {
                let x = self.expr(x)?;
                let y = self.expr(y)?;
                match op {
                    '&' => self.b.and(x, y),
                    '|' => self.b.or(x, y),
                    _ => self.b.xor(x, y),
                }
            }
        })
    }
}

/// Parses emitted Verilog back into a [`Netlist`].
pub fn read_verilog_subset(text: &str) -> Result<Netlist, ParseError> {
    let module = parse_module(text)?;
    let unsupported = |name: &String| ParseError {
        line: 1,
        col: 1,
        message: format!("unsupported port `{name}`"),
    };
    for name in module.inputs.keys() {
        if !["A", "B", "P"].contains(&name.as_str()) {
            return Err(unsupported(name));
        }
    }
    for name in module.outputs.keys() {
        if name != "Z" {
            return Err(unsupported(name));
        }
    }
    let m = module.inputs.get("A").copied().unwrap_or(0);
    for (port, w) in [
        ("B", module.inputs.get("B")),
        ("Z", module.outputs.get("Z")),
    ] {
        if w.copied().unwrap_or(0) != m {
            return Err(ParseError {
                line: 1,
                col: 1,
                message: format!("port `{port}` must be {m} bits wide"),
            });
        }
    }
    let keys = module.inputs.get("P").copied().unwrap_or(0);
    let mut el = Elaborator {
        module: &module,
        b: NetlistBuilder::new(m, keys),
        m,
        keys,
        done: HashMap::new(),
        active: Vec::new(),
    };
    // Source order first so that re-emitting keeps net numbering.
    for r in &module.order {
        if let Ref::Net(_) = r {
            el.resolve(r, 1, 1)?;
        }
    }
    let mut outputs = Vec::with_capacity(m);
    for q in 0..m {
        outputs.push(el.resolve(&Ref::Bit("Z".into(), q), 1, 1)?);
    }
    Ok(el.b.finish(outputs))
}
