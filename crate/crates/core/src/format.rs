//! The line-oriented `.crn` text format.
//!
//! ```text
//! % comment
//! X + Y -> Z [k=2.5]
//! 0 -> A
//! #input X Y
//! #vote1 Z
//! #init 3X + 5Y
//! #volume 10
//! ```
//!
//! `#species A B` declares species that appear in no reaction.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crn::{is_name_char, is_valid_name, Crn, CrnBuilder, CrnError, State, MAX_COEFFICIENT, MAX_COUNT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    fn at(line: usize, column: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            column,
            message: message.into(),
        }
    }
}

/// Species named by the role directives, in the order written.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roles {
    pub input: Vec<String>,
    pub vote0: Vec<String>,
    pub vote1: Vec<String>,
    pub output: Vec<String>,
}

/// A parsed `.crn` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrnFile {
    pub crn: Crn,
    pub roles: Roles,
    pub init: Option<State>,
    pub volume: Option<f64>,
}

impl CrnFile {
    pub fn new(crn: Crn) -> Self {
        CrnFile {
            crn,
            roles: Roles::default(),
            init: None,
            volume: None,
        }
    }
}

type Terms = Vec<(String, u64)>;

struct Pending {
    line: usize,
    names: Vec<(usize, String)>,
}

pub fn parse_crn(text: &str) -> Result<CrnFile, ParseError> {
    let mut builder = CrnBuilder::new();
    let mut roles: [Vec<Pending>; 4] = Default::default();
    let mut init: Option<(usize, Vec<(usize, String, u64)>)> = None;
    let mut volume = None;

    for (ln0, raw) in text.lines().enumerate() {
        let line = ln0 + 1;
        let body = match raw.find('%') {
            Some(p) => &raw[..p],
            None => raw,
        };
        if body.trim().is_empty() {
            continue;
        }
        let lead = body.len() - body.trim_start().len();
        let trimmed = body.trim();
        if let Some(rest) = trimmed.strip_prefix('#') {
            let name_len = rest.find(char::is_whitespace).unwrap_or(rest.len());
            let name = &rest[..name_len];
            let args_off = lead + 1 + name_len;
            let args = &body[args_off..];
            match name {
                "input" | "vote0" | "vote1" | "output" | "species" => {
                    let names: Vec<(usize, String)> = words(args, args_off)
                        .into_iter()
                        .map(|(off, w)| (col(raw, off), w))
                        .collect();
                    for (c, w) in &names {
                        if !is_valid_name(w) {
                            return Err(ParseError::at(line, *c, format!("invalid species name `{w}`")));
                        }
                    }
                    let slot = match name {
                        "input" => 0,
                        "vote0" => 1,
                        "vote1" => 2,
                        "output" => 3,
                        _ => {
                            for (_, w) in names {
                                builder.species(w);
                            }
                            continue;
                        }
                    };
                    roles[slot].push(Pending { line, names });
                }
                "init" => {
                    if init.is_some() {
                        return Err(ParseError::at(line, col(raw, lead), "duplicate #init directive"));
                    }
                    let terms = parse_side(raw, args, args_off, line, MAX_COUNT)?
                        .into_iter()
                        .map(|(off, s, n)| (col(raw, off), s, n))
                        .collect();
                    init = Some((line, terms));
                }
                "volume" => {
                    let v: f64 = args.trim().parse().map_err(|_| {
                        ParseError::at(line, col(raw, args_off), "expected a positive decimal volume")
                    })?;
                    if !(v.is_finite() && v > 0.0) {
                        return Err(ParseError::at(line, col(raw, args_off), "volume must be positive"));
                    }
                    volume = Some(v);
                }
                other => {
                    return Err(ParseError::at(line, col(raw, lead), format!("unknown directive `#{other}`")));
                }
            }
            continue;
        }
        let (lhs, rhs, rate) = parse_reaction_line(raw, body, line)?;
        let r: Terms = lhs.into_iter().map(|(_, s, n)| (s, n)).collect();
        let p: Terms = rhs.into_iter().map(|(_, s, n)| (s, n)).collect();
        builder.reaction(&r, &p, rate);
    }

    let crn = builder.build().map_err(|e| ParseError::at(0, 0, e.to_string()))?;
    let known: BTreeSet<&str> = builder.names().iter().map(String::as_str).collect();

    let mut out_roles = Roles::default();
    for (slot, pend) in roles.into_iter().enumerate() {
        let target = match slot {
            0 => &mut out_roles.input,
            1 => &mut out_roles.vote0,
            2 => &mut out_roles.vote1,
            _ => &mut out_roles.output,
        };
        for p in pend {
            for (c, w) in p.names {
                if !known.contains(w.as_str()) {
                    return Err(ParseError::at(p.line, c, format!("unknown species `{w}` in directive")));
                }
                if !target.contains(&w) {
                    target.push(w);
                }
            }
        }
    }

    let init = match init {
        None => None,
        Some((line, terms)) => {
            let mut c = crn.zero_state();
            for (column, name, n) in terms {
                let i = crn
                    .index_of(&name)
                    .ok_or_else(|| ParseError::at(line, column, format!("unknown species `{name}` in directive")))?;
                c.0[i] = c.0[i]
                    .checked_add(n)
                    .filter(|&v| v <= MAX_COUNT)
                    .ok_or_else(|| ParseError::at(line, column, "count exceeds 2^63-1"))?;
            }
            Some(c)
        }
    };

    Ok(CrnFile {
        crn,
        roles: out_roles,
        init,
        volume,
    })
}

/// Parses `A + 2C` (or `0`) against the species of `crn`.
pub fn parse_state(crn: &Crn, text: &str) -> Result<State, ParseError> {
    let terms = parse_side(text, text, 0, 1, MAX_COUNT)?;
    let mut c = crn.zero_state();
    for (off, name, n) in terms {
        let i = crn
            .index_of(&name)
            .ok_or_else(|| ParseError::at(1, col(text, off), format!("unknown species `{name}`")))?;
        c.0[i] = c.0[i]
            .checked_add(n)
            .filter(|&v| v <= MAX_COUNT)
            .ok_or_else(|| ParseError::at(1, col(text, off), "count exceeds 2^63-1"))?;
    }
    Ok(c)
}

/// Parses `A + 2C` into name/count pairs without resolving names.
pub fn parse_terms(text: &str) -> Result<Vec<(String, u64)>, ParseError> {
    Ok(parse_side(text, text, 0, 1, MAX_COUNT)?
        .into_iter()
        .map(|(_, s, n)| (s, n))
        .collect())
}

type Side = Vec<(usize, String, u64)>;

fn parse_reaction_line(raw: &str, body: &str, line: usize) -> Result<(Side, Side, f64), ParseError> {
    let arrow = body
        .find("->")
        .ok_or_else(|| ParseError::at(line, col(raw, body.len() - body.trim_start().len()), "expected `->`"))?;
    if body[arrow + 2..].contains("->") {
        let second = arrow + 2 + body[arrow + 2..].find("->").unwrap_or(0);
        return Err(ParseError::at(line, col(raw, second), "more than one `->`"));
    }
    let lhs_text = &body[..arrow];
    let mut rhs_text = &body[arrow + 2..];
    let mut rate = 1.0;
    if let Some(open) = rhs_text.find('[') {
        let ann_off = arrow + 2 + open;
        let ann = rhs_text[open..].trim_end();
        let inner = ann
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| ParseError::at(line, col(raw, ann_off), "malformed rate annotation"))?;
        let value = inner
            .trim()
            .strip_prefix("k")
            .map(str::trim_start)
            .and_then(|s| s.strip_prefix('='))
            .ok_or_else(|| ParseError::at(line, col(raw, ann_off), "expected `[k=<rate>]`"))?;
        let k: f64 = value
            .trim()
            .parse()
            .map_err(|_| ParseError::at(line, col(raw, ann_off), "rate constant is not a decimal number"))?;
        if !(k.is_finite() && k > 0.0) {
            return Err(ParseError::at(line, col(raw, ann_off), "nonpositive rate constant"));
        }
        rate = k;
        rhs_text = &rhs_text[..open];
    }
    let lhs = parse_side(raw, lhs_text, 0, line, MAX_COEFFICIENT)?;
    let rhs = parse_side(raw, rhs_text, arrow + 2, line, MAX_COEFFICIENT)?;
    Ok((lhs, rhs, rate))
}

/// Parses one side `t (+ t)*` or `0`; offsets are byte offsets into `raw`.
fn parse_side(raw: &str, side: &str, base: usize, line: usize, max: u64) -> Result<Side, ParseError> {
    let lead = side.len() - side.trim_start().len();
    if side.trim().is_empty() {
        return Err(ParseError::at(line, col(raw, base + lead), "expected a term or `0`"));
    }
    if side.trim() == "0" {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    let mut start = 0;
    for piece in side.split('+') {
        let off = base + start;
        start += piece.len() + 1;
        let plead = piece.len() - piece.trim_start().len();
        let term = piece.trim();
        let toff = off + plead;
        if term.is_empty() {
            return Err(ParseError::at(line, col(raw, toff), "empty term"));
        }
        let digits = term.chars().take_while(char::is_ascii_digit).count();
        let coeff = if digits == 0 {
            1
        } else {
            term[..digits]
                .parse::<u64>()
                .ok()
                .filter(|&n| n <= max)
                .ok_or_else(|| ParseError::at(line, col(raw, toff), "coefficient too large"))?
        };
        let name = term[digits..].trim_start();
        if coeff == 0 {
            return Err(ParseError::at(line, col(raw, toff), "coefficient must be positive"));
        }
        let name_off = toff + (term.len() - name.len());
        if let Some(bad) = name.find(|c: char| !is_name_char(c)) {
            return Err(ParseError::at(
                line,
                col(raw, name_off + bad),
                format!("unexpected character in `{term}`"),
            ));
        }
        if !is_valid_name(name) {
            return Err(ParseError::at(line, col(raw, name_off), format!("invalid species name in `{term}`")));
        }
        out.push((name_off, name.to_string(), coeff));
    }
    Ok(out)
}

fn words(s: &str, base: usize) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    let mut i = 0;
    for w in s.split(char::is_whitespace) {
        if !w.is_empty() {
            out.push((base + i, w.to_string()));
        }
        i += w.len() + 1;
    }
    out
}

/// 1-based character column of byte offset `off` in `raw`.
fn col(raw: &str, off: usize) -> usize {
    raw.get(..off.min(raw.len()))
        .map(|s| s.chars().count() + 1)
        .unwrap_or(off + 1)
}

fn format_rate(k: f64) -> String {
    format!("{k:?}")
}

/// Serialises a network as reaction lines, declaring species that occur in no
/// reaction with `#species`.
pub fn render_crn(crn: &Crn) -> String {
    let mut out = String::new();
    let mut used = vec![false; crn.num_species()];
    for r in crn.reactions() {
        for x in r.reactants().species().chain(r.products().species()) {
            used[x] = true;
        }
    }
    let isolated: Vec<&str> = crn
        .species()
        .iter()
        .zip(&used)
        .filter(|(_, &u)| !u)
        .map(|(s, _)| s.as_str())
        .collect();
    if !isolated.is_empty() {
        let _ = writeln!(out, "#species {}", isolated.join(" "));
    }
    for (j, r) in crn.reactions().iter().enumerate() {
        out.push_str(&crn.format_reaction(j));
        if r.rate() != 1.0 {
            let _ = write!(out, " [k={}]", format_rate(r.rate()));
        }
        out.push('\n');
    }
    out
}

pub fn render(file: &CrnFile) -> String {
    let mut out = render_crn(&file.crn);
    for (tag, names) in [
        ("input", &file.roles.input),
        ("vote0", &file.roles.vote0),
        ("vote1", &file.roles.vote1),
        ("output", &file.roles.output),
    ] {
        if !names.is_empty() {
            let _ = writeln!(out, "#{tag} {}", names.join(" "));
        }
    }
    if let Some(c) = &file.init {
        let _ = writeln!(out, "#init {}", file.crn.format_state(c));
    }
    if let Some(v) = file.volume {
        let _ = writeln!(out, "#volume {}", format_rate(v));
    }
    out
}

impl From<CrnError> for ParseError {
    fn from(e: CrnError) -> Self {
        ParseError::at(0, 0, e.to_string())
    }
}
