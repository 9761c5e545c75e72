//! Line-oriented text dump of a [`ConicProblem`] for replay in other tools.
//!
//! ```text
//! # conic-problem v1
//! var W1 hermitian 4 psd
//! var t1 scalar 0
//! objective minimize <affine>
//! eq <family> <affine>
//! ge <family> <affine>
//! soc <family> <len>
//!   bound <affine>
//!   comp <affine>            (len times)
//! lmi <family> <dim>
//!   entry <i> <j> <affine-re> | <affine-im>   (upper triangle, i <= j)
//! ```
//!
//! `<affine>` is `<constant> [<index>:<coef> ...]`. Parameter indices follow
//! the declaration order of the variable table: each `n×n` Hermitian
//! variable occupies `n²` consecutive slots (upper-triangle real parts
//! row-major, then strict-upper imaginary parts), each scalar one slot.
//! Floats are written in shortest round-trip form.

use std::fmt::Write;

use thiserror::Error;

use super::expr::{CExpr, HermExpr, LinExpr};
use super::{ConicProblem, Constraint, ConstraintKind, Sense, VarDecl, VarKind};

const HEADER: &str = "# conic-problem v1";

#[derive(Debug, Error)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

fn affine(e: &LinExpr) -> String {
    let mut s = format!("{:?}", e.constant);
    for &(i, c) in e.terms() {
        write!(s, " {i}:{c:?}").unwrap();
    }
    s
}

pub(super) fn write(p: &ConicProblem) -> String {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    for v in p.vars() {
        match v.kind {
            VarKind::Hermitian { dim, psd } => {
                let flag = if psd { "psd" } else { "free" };
                writeln!(out, "var {} hermitian {dim} {flag}", v.name).unwrap();
            }
            VarKind::Scalar { lower } => {
                let lb = lower.map(|l| format!("{l:?}")).unwrap_or_else(|| "-".into());
                writeln!(out, "var {} scalar {lb}", v.name).unwrap();
            }
        }
    }
    let sense = match p.sense() {
        Sense::Minimize => "minimize",
        Sense::Maximize => "maximize",
    };
    writeln!(out, "objective {sense} {}", affine(p.objective())).unwrap();
    for c in p.constraints() {
        match &c.kind {
            ConstraintKind::Eq(e) => writeln!(out, "eq {} {}", c.family, affine(e)).unwrap(),
            ConstraintKind::Ge(e) => writeln!(out, "ge {} {}", c.family, affine(e)).unwrap(),
            ConstraintKind::Soc { bound, vector } => {
                writeln!(out, "soc {} {}", c.family, vector.len()).unwrap();
                writeln!(out, "  bound {}", affine(bound)).unwrap();
                for v in vector {
                    writeln!(out, "  comp {}", affine(v)).unwrap();
                }
            }
            ConstraintKind::Lmi(m) => {
                writeln!(out, "lmi {} {}", c.family, m.dim()).unwrap();
                for i in 0..m.dim() {
                    for j in i..m.dim() {
                        let e = m.get(i, j);
                        writeln!(out, "  entry {i} {j} {} | {}", affine(&e.re), affine(&e.im))
                            .unwrap();
                    }
                }
            }
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    current: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Option<&'a str> {
        for (n, l) in self.inner.by_ref() {
            self.current = n + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Some(t);
            }
        }
        None
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError { line: self.current, msg: msg.into() }
    }

    fn expect(&mut self, keyword: &str) -> Result<Vec<&'a str>, ParseError> {
        let l = self.next().ok_or_else(|| self.err(format!("expected `{keyword}`")))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks[0] != keyword {
            return Err(self.err(format!("expected `{keyword}`, found `{}`", toks[0])));
        }
        Ok(toks[1..].to_vec())
    }
}

fn parse_f64(lines: &Lines, s: &str) -> Result<f64, ParseError> {
    s.parse().map_err(|_| lines.err(format!("bad number `{s}`")))
}

fn parse_usize(lines: &Lines, s: &str) -> Result<usize, ParseError> {
    s.parse().map_err(|_| lines.err(format!("bad integer `{s}`")))
}

fn parse_affine(lines: &Lines, toks: &[&str]) -> Result<LinExpr, ParseError> {
    let (first, rest) = toks.split_first().ok_or_else(|| lines.err("missing constant"))?;
    let mut e = LinExpr::constant(parse_f64(lines, first)?);
    for t in rest {
        let (i, c) = t.split_once(':').ok_or_else(|| lines.err(format!("bad term `{t}`")))?;
        e.add_term(parse_usize(lines, i)?, parse_f64(lines, c)?);
    }
    Ok(e)
}

pub(super) fn read(text: &str) -> Result<ConicProblem, ParseError> {
    let mut lines = Lines { inner: text.lines().enumerate(), current: 0 };
    match lines.next() {
        Some(HEADER) => {}
        _ => return Err(lines.err(format!("missing header `{HEADER}`"))),
    }
    let mut vars: Vec<VarDecl> = Vec::new();
    let mut offset = 0;
    let mut sense = Sense::Minimize;
    let mut objective = LinExpr::zero();
    let mut constraints = Vec::new();

    while let Some(l) = lines.next() {
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.as_slice() {
            ["var", name, "hermitian", dim, flag] => {
                let dim = parse_usize(&lines, dim)?;
                let psd = match *flag {
                    "psd" => true,
                    "free" => false,
                    other => return Err(lines.err(format!("bad PSD flag `{other}`"))),
                };
                let decl = VarDecl {
                    name: name.to_string(),
                    kind: VarKind::Hermitian { dim, psd },
                    offset,
                };
                offset += decl.len();
                vars.push(decl);
            }
            ["var", name, "scalar", lb] => {
                let lower = if *lb == "-" { None } else { Some(parse_f64(&lines, lb)?) };
                vars.push(VarDecl {
                    name: name.to_string(),
                    kind: VarKind::Scalar { lower },
                    offset,
                });
                offset += 1;
            }
            ["objective", s, rest @ ..] => {
                sense = match *s {
                    "minimize" => Sense::Minimize,
                    "maximize" => Sense::Maximize,
                    other => return Err(lines.err(format!("bad sense `{other}`"))),
                };
                objective = parse_affine(&lines, rest)?;
            }
            ["eq", family, rest @ ..] => constraints.push(Constraint {
                family: family.to_string(),
                kind: ConstraintKind::Eq(parse_affine(&lines, rest)?),
            }),
            ["ge", family, rest @ ..] => constraints.push(Constraint {
                family: family.to_string(),
                kind: ConstraintKind::Ge(parse_affine(&lines, rest)?),
            }),
            ["soc", family, len] => {
                let len = parse_usize(&lines, len)?;
                let bound_toks = lines.expect("bound")?;
                let bound = parse_affine(&lines, &bound_toks)?;
                let mut vector = Vec::with_capacity(len);
                for _ in 0..len {
                    let t = lines.expect("comp")?;
                    vector.push(parse_affine(&lines, &t)?);
                }
                constraints.push(Constraint {
                    family: family.to_string(),
                    kind: ConstraintKind::Soc { bound, vector },
                });
            }
            ["lmi", family, dim] => {
                let dim = parse_usize(&lines, dim)?;
                let mut m = HermExpr::zeros(dim);
                for _ in 0..dim * (dim + 1) / 2 {
                    let t = lines.expect("entry")?;
                    if t.len() < 2 {
                        return Err(lines.err("entry needs row and column"));
                    }
                    let (i, j) = (parse_usize(&lines, t[0])?, parse_usize(&lines, t[1])?);
                    if i > j || j >= dim {
                        return Err(lines.err(format!("entry ({i}, {j}) out of range")));
                    }
                    let bar = t.iter().position(|s| *s == "|").ok_or_else(|| lines.err("missing `|`"))?;
                    let re = parse_affine(&lines, &t[2..bar])?;
                    let im = parse_affine(&lines, &t[bar + 1..])?;
                    m.set_upper(i, j, CExpr { re, im });
                }
                constraints.push(Constraint {
                    family: family.to_string(),
                    kind: ConstraintKind::Lmi(m),
                });
            }
            _ => return Err(lines.err(format!("unrecognized line `{l}`"))),
        }
    }
    let p = ConicProblem::from_parts(vars, sense, objective, constraints);
    p.validate().map_err(|e| ParseError { line: 0, msg: e.to_string() })?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{CMat, C64};

    #[test]
    fn text_round_trip() {
        let mut p = ConicProblem::new();
        let w = p.add_hermitian("W", 2, true);
        let t = p.add_scalar("t", Some(0.0));
        let z = p.add_scalar("z", None);
        p.add_eq("power", w.trace(), 1.5);
        p.add_ge("gain", w.inner(&CMat::from_fn(2, 2, |i, j| C64::new(1.0, i as f64 - j as f64))), 0.1);
        p.add_soc("mismatch", w.expr().frobenius_components(), t.expr() + 0.25);
        let mut lmi = w.expr();
        lmi.add_diagonal(&z.expr());
        p.add_lmi("shifted", HermExpr::bordered(t.expr() - 1.0 / 3.0, &lmi.left_mul(&crate::linalg::CVec::from_element(2, C64::new(0.5, 0.5))), &lmi));
        p.set_objective(Sense::Maximize, z.expr() * 2.0 - 0.1);

        let text = p.to_text();
        let q = ConicProblem::from_text(&text).unwrap();
        assert_eq!(q.to_text(), text);
        assert_eq!(q.vars(), p.vars());
        assert_eq!(q.objective(), p.objective());
    }

    #[test]
    fn rejects_garbage() {
        assert!(ConicProblem::from_text("hello").is_err());
        let e = ConicProblem::from_text("# conic-problem v1\nvar x scalar 0\neq a 1 5:1\n");
        assert!(e.is_err());
    }
}
