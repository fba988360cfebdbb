//! Text front ends.
//!
//! Native format:
//!
//! ```text
//! # comment
//! qubits 3;
//! h 0;
//! rz(0.5) 1;
//! cz 0 1;
//! ```
//!
//! Documents starting with `OPENQASM` are read through a small interchange
//! shim: `qreg` declarations, `cz` and named single-qubit gates with
//! parameter expressions over numbers and `pi`. `creg`, `barrier` and
//! `include` are accepted and ignored.

use super::{Circuit, CircuitError, Gate};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Punct(char),
    Arrow,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, CircuitError> {
    let mut out = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            let push = |out: &mut Vec<Token>, tok| out.push(Token { tok, line: li + 1, column });
            if c.is_whitespace() {
                i += 1;
            } else if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
                break;
            } else if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
            } else if c.is_ascii_digit() || c == '.' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    i += 1;
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        i += 1;
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let v = s.parse::<f64>().map_err(|_| CircuitError::Syntax {
                    line: li + 1,
                    column,
                    message: format!("bad number `{s}`"),
                })?;
                push(&mut out, Tok::Number(v));
            } else if c == '"' {
                let start = i + 1;
                i += 1;
                while i < chars.len() && chars[i] != '"' {
                    i += 1;
                }
                if i == chars.len() {
                    return Err(CircuitError::Syntax {
                        line: li + 1,
                        column,
                        message: "unterminated string".into(),
                    });
                }
                push(&mut out, Tok::Str(chars[start..i].iter().collect()));
                i += 1;
            } else if c == '-' && chars.get(i + 1) == Some(&'>') {
                push(&mut out, Tok::Arrow);
                i += 2;
            } else if "();,[]+-*/".contains(c) {
                push(&mut out, Tok::Punct(c));
                i += 1;
            } else {
                return Err(CircuitError::Syntax {
                    line: li + 1,
                    column,
                    message: format!("unexpected character `{c}`"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn new(text: &str) -> Result<Self, CircuitError> {
        let toks = lex(text)?;
        let lines = text.lines().count().max(1);
        let last = text.lines().last().map_or(0, |l| l.chars().count());
        Ok(Self {
            toks,
            pos: 0,
            end: (lines, last + 1),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map_or(self.end, |t| (t.line, t.column))
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, CircuitError> {
        let (line, column) = self.here();
        Err(CircuitError::Syntax {
            line,
            column,
            message: message.into(),
        })
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn expect_punct(&mut self, c: char) -> Result<(), CircuitError> {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected `{c}`"))
        }
    }

    fn eat_punct(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Punct(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, CircuitError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.error("expected identifier"),
        }
    }

    fn index(&mut self) -> Result<usize, CircuitError> {
        match self.peek() {
            Some(&Tok::Number(v)) if v >= 0.0 && v.fract() == 0.0 => {
                self.pos += 1;
                Ok(v as usize)
            }
            _ => self.error("expected non-negative integer"),
        }
    }

    // expr := term (('+'|'-') term)*
    fn expr(&mut self) -> Result<f64, CircuitError> {
        let mut v = self.term()?;
        loop {
            if self.eat_punct('+') {
                v += self.term()?;
            } else if self.eat_punct('-') {
                v -= self.term()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn term(&mut self) -> Result<f64, CircuitError> {
        let mut v = self.atom()?;
        loop {
            if self.eat_punct('*') {
                v *= self.atom()?;
            } else if self.eat_punct('/') {
                v /= self.atom()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn atom(&mut self) -> Result<f64, CircuitError> {
        if self.eat_punct('-') {
            return Ok(-self.atom()?);
        }
        if self.eat_punct('(') {
            let v = self.expr()?;
            self.expect_punct(')')?;
            return Ok(v);
        }
        match self.peek().cloned() {
            Some(Tok::Number(v)) => {
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Ident(s)) if s == "pi" => {
                self.pos += 1;
                Ok(std::f64::consts::PI)
            }
            _ => self.error("expected number"),
        }
    }

    fn params(&mut self) -> Result<Vec<f64>, CircuitError> {
        let mut params = Vec::new();
        if self.eat_punct('(') {
            if !self.eat_punct(')') {
                loop {
                    params.push(self.expr()?);
                    if self.eat_punct(')') {
                        break;
                    }
                    self.expect_punct(',')?;
                }
            }
        }
        Ok(params)
    }
}

fn check_range(c: &Circuit, q: usize, line: usize) -> Result<(), CircuitError> {
    if q >= c.num_qubits {
        Err(CircuitError::QubitOutOfRange {
            line,
            qubit: q,
            num_qubits: c.num_qubits,
        })
    } else {
        Ok(())
    }
}

/// Parses the native circuit format, or the OpenQASM subset when the text
/// starts with an `OPENQASM` header.
pub fn parse_circuit(text: &str) -> Result<Circuit, CircuitError> {
    let mut p = Parser::new(text)?;
    match p.peek() {
        Some(Tok::Ident(s)) if s == "OPENQASM" => parse_qasm(&mut p),
        _ => parse_native(&mut p),
    }
}

fn parse_native(p: &mut Parser) -> Result<Circuit, CircuitError> {
    if p.ident().ok().as_deref() != Some("qubits") {
        p.pos = p.pos.saturating_sub(1);
        return p.error("expected `qubits N;` header");
    }
    let n = p.index()?;
    p.expect_punct(';')?;
    let mut c = Circuit::new(n);
    while p.peek().is_some() {
        let line = p.here().0;
        let name = p.ident()?;
        if name == "cz" {
            let a = p.index()?;
            p.eat_punct(',');
            let b = p.index()?;
            p.expect_punct(';')?;
            check_range(&c, a, line)?;
            check_range(&c, b, line)?;
            if a == b {
                return Err(CircuitError::SelfInteraction(a));
            }
            c.gates.push(Gate::Cz(a, b));
        } else {
            let params = p.params()?;
            let q = p.index()?;
            p.expect_punct(';')?;
            check_range(&c, q, line)?;
            c.gates.push(Gate::Single {
                name,
                params,
                qubit: q,
            });
        }
    }
    Ok(c)
}

/// A register reference: either one qubit or the whole register.
fn qasm_arg(p: &mut Parser, regs: &[(String, usize, usize)]) -> Result<Vec<usize>, CircuitError> {
    let line = p.here().0;
    let name = p.ident()?;
    let Some((_, base, size)) = regs.iter().find(|r| r.0 == name).cloned() else {
        return p.error(format!("unknown register `{name}`"));
    };
    if p.eat_punct('[') {
        let i = p.index()?;
        p.expect_punct(']')?;
        if i >= size {
            return Err(CircuitError::QubitOutOfRange {
                line,
                qubit: i,
                num_qubits: size,
            });
        }
        Ok(vec![base + i])
    } else {
        Ok((base..base + size).collect())
    }
}

fn skip_statement(p: &mut Parser) {
    while let Some(t) = p.next() {
        if t == Tok::Punct(';') {
            break;
        }
    }
}

fn parse_qasm(p: &mut Parser) -> Result<Circuit, CircuitError> {
    p.pos += 1;
    match p.next() {
        Some(Tok::Number(_)) => {}
        _ => {
            p.pos -= 1;
            return p.error("expected version");
        }
    }
    p.expect_punct(';')?;
    let mut regs: Vec<(String, usize, usize)> = Vec::new();
    let mut c = Circuit::new(0);
    while p.peek().is_some() {
        let name = p.ident()?;
        match name.as_str() {
            "include" => {
                if !matches!(p.next(), Some(Tok::Str(_))) {
                    p.pos -= 1;
                    return p.error("expected file name");
                }
                p.expect_punct(';')?;
            }
            "qreg" => {
                let r = p.ident()?;
                p.expect_punct('[')?;
                let size = p.index()?;
                p.expect_punct(']')?;
                p.expect_punct(';')?;
                regs.push((r, c.num_qubits, size));
                c.num_qubits += size;
            }
            "creg" | "barrier" => skip_statement(p),
            "measure" | "reset" | "if" | "gate" | "opaque" => {
                p.pos -= 1;
                return p.error(format!("`{name}` is not supported"));
            }
            "cz" => {
                let a = qasm_arg(p, &regs)?;
                p.expect_punct(',')?;
                let b = qasm_arg(p, &regs)?;
                p.expect_punct(';')?;
                if a.len() != 1 || b.len() != 1 {
                    return p.error("cz expects single qubits");
                }
                if a[0] == b[0] {
                    return Err(CircuitError::SelfInteraction(a[0]));
                }
                c.gates.push(Gate::Cz(a[0], b[0]));
            }
            _ => {
                let params = p.params()?;
                let qs = qasm_arg(p, &regs)?;
                if p.peek() == Some(&Tok::Punct(',')) {
                    return p.error(format!("`{name}` is not a native single-qubit gate"));
                }
                p.expect_punct(';')?;
                for q in qs {
                    c.gates.push(Gate::Single {
                        name: name.clone(),
                        params: params.clone(),
                        qubit: q,
                    });
                }
            }
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal() {
        let c = parse_circuit("qubits 2; cz 0 1;").unwrap();
        assert_eq!(c.num_qubits, 2);
        assert_eq!(c.gates, vec![Gate::Cz(0, 1)]);
    }

    #[test]
    fn keeps_textual_order() {
        let c = parse_circuit("qubits 3; rz(0.5) 0; cz 0 1; cz 1 2;").unwrap();
        assert_eq!(
            c.gates,
            vec![Gate::single("rz", vec![0.5], 0), Gate::Cz(0, 1), Gate::Cz(1, 2)]
        );
    }

    #[test]
    fn out_of_range() {
        assert!(matches!(
            parse_circuit("qubits 2; cz 0 5;"),
            Err(CircuitError::QubitOutOfRange { qubit: 5, .. })
        ));
    }

    #[test]
    fn comments_and_whitespace() {
        let c = parse_circuit("# header\nqubits 2 ;\n\n  h   0 ; # trailing\ncz 1 0;").unwrap();
        assert_eq!(c.gates.len(), 2);
    }

    #[test]
    fn syntax_error_location() {
        let err = parse_circuit("qubits 2;\ncz 0 ;").unwrap_err();
        assert_eq!(
            err,
            CircuitError::Syntax {
                line: 2,
                column: 6,
                message: "expected non-negative integer".into()
            }
        );
    }

    #[test]
    fn missing_header() {
        assert!(matches!(parse_circuit("cz 0 1;"), Err(CircuitError::Syntax { line: 1, column: 1, .. })));
    }

    #[test]
    fn self_cz_rejected() {
        assert_eq!(parse_circuit("qubits 2; cz 1 1;"), Err(CircuitError::SelfInteraction(1)));
    }

    #[test]
    fn qasm_subset() {
        let src = r#"OPENQASM 2.0;
include "qelib1.inc";
qreg q[2];
qreg r[1];
creg c[3];
h q;
rz(pi/2) r[0];
cz q[0],r[0];
barrier q;
"#;
        let c = parse_circuit(src).unwrap();
        assert_eq!(c.num_qubits, 3);
        assert_eq!(c.gates.len(), 4);
        assert_eq!(c.gates[3], Gate::Cz(0, 2));
        match &c.gates[2] {
            Gate::Single { params, .. } => assert!((params[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12),
            g => panic!("unexpected {g:?}"),
        }
    }

    #[test]
    fn qasm_rejects_measure_and_foreign_two_qubit_gates() {
        let head = "OPENQASM 2.0; qreg q[2]; creg c[2];";
        assert!(parse_circuit(&format!("{head} measure q[0] -> c[0];")).is_err());
        assert!(parse_circuit(&format!("{head} cx q[0],q[1];")).is_err());
    }

    #[test]
    fn display_roundtrip() {
        let c = parse_circuit("qubits 3; rz(0.25) 0; cz 0 1; h 2;").unwrap();
        assert_eq!(parse_circuit(&c.to_string()).unwrap(), c);
    }
}
