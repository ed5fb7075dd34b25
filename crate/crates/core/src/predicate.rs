//! Threshold/mod predicates over input counts, their text syntax, and
//! verdict-level boolean combination.
//!
//! Syntax: `le(a1,a2,...;b)` for a·x ≤ b, `mod(a1,...;b;m)` for
//! a·x ≡ b (mod m), and `and(...)`, `or(...)`, `not(...)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decide::{compile_mod_atom, compile_threshold_atom, halting_verdict, Crd, DecideError, VerdictKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredicateError {
    #[error("predicate syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("atoms disagree on the number of inputs ({0} vs {1})")]
    ArityMismatch(usize, usize),
    #[error("predicate has no atoms")]
    NoAtoms,
    #[error("atom {atom} is {kind:?} on this input")]
    NotDecided { atom: usize, kind: VerdictKind },
    #[error(transparent)]
    Decide(#[from] DecideError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Atom {
    /// a·x ≤ b
    Threshold { a: Vec<i64>, b: i64 },
    /// a·x ≡ b (mod m), with 0 ≤ b < m after normalisation
    Mod { a: Vec<i64>, b: i64, m: i64 },
}

impl Atom {
    pub fn modulo(a: Vec<i64>, b: i64, m: i64) -> Result<Atom, PredicateError> {
        if m < 2 {
            return Err(DecideError::InvalidModulus { b, m }.into());
        }
        Ok(Atom::Mod {
            a,
            b: b.rem_euclid(m),
            m,
        })
    }

    pub fn arity(&self) -> usize {
        match self {
            Atom::Threshold { a, .. } | Atom::Mod { a, .. } => a.len(),
        }
    }

    pub fn holds(&self, x: &[u64]) -> bool {
        let dot = |a: &[i64]| -> i128 { a.iter().zip(x).map(|(&ai, &xi)| ai as i128 * xi as i128).sum() };
        match self {
            Atom::Threshold { a, b } => dot(a) <= *b as i128,
            Atom::Mod { a, b, m } => (dot(a) - *b as i128).rem_euclid(*m as i128) == 0,
        }
    }

    pub fn compile(&self) -> Result<Crd, DecideError> {
        match self {
            Atom::Threshold { a, b } => compile_threshold_atom(a, *b),
            Atom::Mod { a, b, m } => compile_mod_atom(a, *b, *m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Atom(Atom),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Not(Box<Expr>),
}

impl Expr {
    pub fn holds(&self, x: &[u64]) -> bool {
        match self {
            Expr::Atom(a) => a.holds(x),
            Expr::And(es) => es.iter().all(|e| e.holds(x)),
            Expr::Or(es) => es.iter().any(|e| e.holds(x)),
            Expr::Not(e) => !e.holds(x),
        }
    }

    /// Atoms in left-to-right order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Expr::Atom(a) => out.push(a),
            Expr::And(es) | Expr::Or(es) => es.iter().for_each(|e| e.collect(out)),
            Expr::Not(e) => e.collect(out),
        }
    }

    fn eval_with(&self, values: &[bool], next: &mut usize) -> bool {
        match self {
            Expr::Atom(_) => {
                let v = values[*next];
                *next += 1;
                v
            }
            Expr::And(es) => es.iter().fold(true, |acc, e| e.eval_with(values, next) && acc),
            Expr::Or(es) => es.iter().fold(false, |acc, e| e.eval_with(values, next) || acc),
            Expr::Not(e) => !e.eval_with(values, next),
        }
    }
}

pub fn parse_predicate(text: &str) -> Result<Expr, PredicateError> {
    let mut p = Parser { s: text.as_bytes(), i: 0 };
    let e = p.expr()?;
    p.ws();
    if p.i != p.s.len() {
        return Err(p.err("trailing input"));
    }
    let atoms = e.atoms();
    if let Some(first) = atoms.first() {
        if let Some(bad) = atoms.iter().find(|a| a.arity() != first.arity()) {
            return Err(PredicateError::ArityMismatch(first.arity(), bad.arity()));
        }
    }
    Ok(e)
}

struct Parser<'a> {
    s: &'a [u8],
    i: usize,
}

impl Parser<'_> {
    fn err(&self, m: &str) -> PredicateError {
        PredicateError::Syntax {
            offset: self.i,
            message: m.to_string(),
        }
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn eat(&mut self, c: u8) -> Result<(), PredicateError> {
        self.ws();
        if self.s.get(self.i) == Some(&c) {
            self.i += 1;
            Ok(())
        } else {
            Err(self.err(&format!("expected `{}`", c as char)))
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.ws();
        self.s.get(self.i).copied()
    }

    fn ident(&mut self) -> String {
        self.ws();
        let start = self.i;
        while self.i < self.s.len() && self.s[self.i].is_ascii_alphabetic() {
            self.i += 1;
        }
        String::from_utf8_lossy(&self.s[start..self.i]).to_lowercase()
    }

    fn int(&mut self) -> Result<i64, PredicateError> {
        self.ws();
        let start = self.i;
        if matches!(self.s.get(self.i), Some(b'-') | Some(b'+')) {
            self.i += 1;
        }
        while self.i < self.s.len() && self.s[self.i].is_ascii_digit() {
            self.i += 1;
        }
        std::str::from_utf8(&self.s[start..self.i])
            .ok()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| {
                self.i = start;
                self.err("expected an integer")
            })
    }

    fn ints(&mut self) -> Result<Vec<i64>, PredicateError> {
        let mut v = vec![self.int()?];
        while self.peek() == Some(b',') {
            self.i += 1;
            v.push(self.int()?);
        }
        Ok(v)
    }

    fn expr(&mut self) -> Result<Expr, PredicateError> {
        let at = self.i;
        let name = self.ident();
        self.eat(b'(')?;
        let e = match name.as_str() {
            "le" => {
                let a = self.ints()?;
                self.eat(b';')?;
                let b = self.int()?;
                Expr::Atom(Atom::Threshold { a, b })
            }
            "mod" => {
                let a = self.ints()?;
                self.eat(b';')?;
                let b = self.int()?;
                self.eat(b';')?;
                let m = self.int()?;
                Expr::Atom(Atom::modulo(a, b, m)?)
            }
            "and" | "or" => {
                let mut es = Vec::new();
                if self.peek() != Some(b')') {
                    es.push(self.expr()?);
                    while self.peek() == Some(b',') {
                        self.i += 1;
                        es.push(self.expr()?);
                    }
                }
                if name == "and" {
                    Expr::And(es)
                } else {
                    Expr::Or(es)
                }
            }
            "not" => Expr::Not(Box::new(self.expr()?)),
            _ => {
                self.i = at;
                return Err(self.err("expected le, mod, and, or or not"));
            }
        };
        self.eat(b')')?;
        Ok(e)
    }
}

/// An expression with one compiled CRD per atom, in [`Expr::atoms`] order.
#[derive(Debug, Clone)]
pub struct CompiledPredicate {
    pub expr: Expr,
    pub atoms: Vec<Crd>,
}

impl CompiledPredicate {
    pub fn new(expr: Expr) -> Result<Self, PredicateError> {
        let atoms = expr
            .atoms()
            .into_iter()
            .map(|a| a.compile())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CompiledPredicate { expr, atoms })
    }

    pub fn arity(&self) -> Option<usize> {
        self.expr.atoms().first().map(|a| a.arity())
    }
}

/// Evaluates the expression over the halting verdicts of its atoms on `input`
/// (counts over X1..Xk). Atom verdicts are computed in parallel.
pub fn eval_predicate(pred: &CompiledPredicate, input: &[u64], bound: usize) -> Result<bool, PredicateError> {
    let verdicts: Vec<Result<bool, PredicateError>> = pred
        .atoms
        .par_iter()
        .enumerate()
        .map(|(i, crd)| {
            let v = halting_verdict(crd, &crd.pad(input), bound)?;
            v.as_bool().ok_or(PredicateError::NotDecided { atom: i, kind: v.kind })
        })
        .collect();
    let values = verdicts.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(pred.expr.eval_with(&values, &mut 0))
}
