//! Counter automata, a reference interpreter, compilation to stochastic CRNs
//! with a clock gadget, and an empirical error-rate harness.
//!
//! Text format:
//!
//! ```text
//! #start q0
//! #halt h
//! #input x
//! state q0: dec x -> q1 else h
//! state q1: inc y -> q0
//! ```

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crn::{is_valid_name, Crn, CrnBuilder, CrnError, State};
use crate::stochastic::{simulate_observed, Control, StochasticConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing #{0} directive")]
    MissingDirective(&'static str),
    #[error("state `{0}` has more than one instruction")]
    DuplicateInstruction(String),
    #[error("state `{0}` has no instruction")]
    MissingInstruction(String),
    #[error("halting state `{0}` must not have an instruction")]
    HaltHasInstruction(String),
    #[error("`{0}` is used both as a state and as a counter")]
    NameClash(String),
    #[error("`{0}` is reserved for the clock gadget")]
    ReservedName(String),
    #[error("clock length must be at least 1")]
    ZeroClock,
    #[error("automaton does not halt on input {input} within {steps} steps")]
    OracleNonHalting { input: u64, steps: u64 },
    #[error(transparent)]
    Crn(#[from] CrnError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Instruction {
    Inc { counter: String, next: String },
    Dec { counter: String, next: String, zero: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterAutomaton {
    pub start: String,
    pub halt: String,
    pub input: String,
    /// One instruction per non-halting state.
    pub program: BTreeMap<String, Instruction>,
}

impl CounterAutomaton {
    pub fn new(
        start: &str,
        halt: &str,
        input: &str,
        program: BTreeMap<String, Instruction>,
    ) -> Result<Self, CaError> {
        let ca = CounterAutomaton {
            start: start.into(),
            halt: halt.into(),
            input: input.into(),
            program,
        };
        ca.validate()?;
        Ok(ca)
    }

    pub fn states(&self) -> BTreeSet<String> {
        let mut s: BTreeSet<String> = [self.start.clone(), self.halt.clone()].into();
        for (q, ins) in &self.program {
            s.insert(q.clone());
            match ins {
                Instruction::Inc { next, .. } => {
                    s.insert(next.clone());
                }
                Instruction::Dec { next, zero, .. } => {
                    s.insert(next.clone());
                    s.insert(zero.clone());
                }
            }
        }
        s
    }

    pub fn counters(&self) -> BTreeSet<String> {
        let mut c: BTreeSet<String> = [self.input.clone()].into();
        for ins in self.program.values() {
            match ins {
                Instruction::Inc { counter, .. } | Instruction::Dec { counter, .. } => {
                    c.insert(counter.clone());
                }
            }
        }
        c
    }

    pub fn num_inc(&self) -> usize {
        self.program.values().filter(|i| matches!(i, Instruction::Inc { .. })).count()
    }

    pub fn num_dec(&self) -> usize {
        self.program.len() - self.num_inc()
    }

    fn validate(&self) -> Result<(), CaError> {
        if self.program.contains_key(&self.halt) {
            return Err(CaError::HaltHasInstruction(self.halt.clone()));
        }
        let states = self.states();
        let counters = self.counters();
        for q in &states {
            if q != &self.halt && !self.program.contains_key(q) {
                return Err(CaError::MissingInstruction(q.clone()));
            }
            if counters.contains(q) {
                return Err(CaError::NameClash(q.clone()));
            }
        }
        for n in states.iter().chain(&counters) {
            if !is_valid_name(n) {
                return Err(CrnError::InvalidSpeciesName(n.clone()).into());
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("#start {}\n#halt {}\n#input {}\n", self.start, self.halt, self.input);
        for (q, ins) in &self.program {
            match ins {
                Instruction::Inc { counter, next } => out.push_str(&format!("state {q}: inc {counter} -> {next}\n")),
                Instruction::Dec { counter, next, zero } => {
                    out.push_str(&format!("state {q}: dec {counter} -> {next} else {zero}\n"))
                }
            }
        }
        out
    }
}

pub fn parse_ca(text: &str) -> Result<CounterAutomaton, CaError> {
    let mut start = None;
    let mut halt = None;
    let mut input = None;
    let mut program = BTreeMap::new();
    for (ln0, raw) in text.lines().enumerate() {
        let line = ln0 + 1;
        let body = raw.split('%').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let syntax = |m: &str| CaError::Syntax {
            line,
            message: m.to_string(),
        };
        let toks: Vec<&str> = body.split_whitespace().collect();
        match toks[0] {
            "#start" | "#halt" | "#input" => {
                if toks.len() != 2 {
                    return Err(syntax("expected exactly one name"));
                }
                let slot = match toks[0] {
                    "#start" => &mut start,
                    "#halt" => &mut halt,
                    _ => &mut input,
                };
                if slot.replace(toks[1].to_string()).is_some() {
                    return Err(syntax("duplicate directive"));
                }
            }
            "state" => {
                let rest = body["state".len()..].trim();
                let (q, ins) = rest.split_once(':').ok_or_else(|| syntax("expected `:`"))?;
                let q = q.trim().to_string();
                let t: Vec<&str> = ins.split_whitespace().collect();
                let ins = match t.as_slice() {
                    ["inc", c, "->", n] => Instruction::Inc {
                        counter: c.to_string(),
                        next: n.to_string(),
                    },
                    ["dec", c, "->", n, "else", z] => Instruction::Dec {
                        counter: c.to_string(),
                        next: n.to_string(),
                        zero: z.to_string(),
                    },
                    _ => return Err(syntax("expected `inc c -> q` or `dec c -> q else q`")),
                };
                if program.insert(q.clone(), ins).is_some() {
                    return Err(CaError::DuplicateInstruction(q));
                }
            }
            _ => return Err(syntax("expected `state`, `#start`, `#halt` or `#input`")),
        }
    }
    CounterAutomaton::new(
        &start.ok_or(CaError::MissingDirective("start"))?,
        &halt.ok_or(CaError::MissingDirective("halt"))?,
        &input.ok_or(CaError::MissingDirective("input"))?,
        program,
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaRun {
    pub halted: bool,
    pub steps: u64,
    pub counters: BTreeMap<String, u64>,
}

/// Deterministic interpreter.
pub fn run_ca(ca: &CounterAutomaton, input: u64, max_steps: u64) -> CaRun {
    let mut counters: BTreeMap<String, u64> = ca.counters().into_iter().map(|c| (c, 0)).collect();
    counters.insert(ca.input.clone(), input);
    let mut q = ca.start.clone();
    let mut steps = 0;
    while q != ca.halt && steps < max_steps {
        q = match &ca.program[&q] {
            Instruction::Inc { counter, next } => {
                *counters.get_mut(counter).expect("declared") += 1;
                next.clone()
            }
            Instruction::Dec { counter, next, zero } => {
                let v = counters.get_mut(counter).expect("declared");
                if *v > 0 {
                    *v -= 1;
                    next.clone()
                } else {
                    zero.clone()
                }
            }
        };
        steps += 1;
    }
    CaRun {
        halted: q == ca.halt,
        steps,
        counters,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledCa {
    pub crn: Crn,
    pub l: usize,
    /// Species index of every control state, counter, clock stage and D.
    pub species: BTreeMap<String, usize>,
    pub states: Vec<usize>,
    pub counters: Vec<usize>,
    /// T1..Tl.
    pub clock: Vec<usize>,
    pub d: usize,
    pub start: usize,
    pub halt: usize,
    pub input: usize,
    /// Zero-branch reaction index and the counter it tests.
    pub zero_branches: Vec<(usize, usize)>,
}

pub fn clock_name(i: usize) -> String {
    format!("T{i}")
}

pub const DELAY_SPECIES: &str = "D";

/// Inc(q,c,q') → `q -> c + q'`; Dec(q,c,q',q'') → `q + c -> q' + D` and
/// `T1 + q -> q'' + Tl`; clock `Ti + D -> T(i+1) + D`, `T(i+1) -> Ti`.
pub fn compile_ca(ca: &CounterAutomaton, l: usize) -> Result<CompiledCa, CaError> {
    if l == 0 {
        return Err(CaError::ZeroClock);
    }
    let states = ca.states();
    let counters = ca.counters();
    let reserved: Vec<String> = (1..=l).map(clock_name).chain([DELAY_SPECIES.to_string()]).collect();
    if let Some(r) = reserved.iter().find(|r| states.contains(*r) || counters.contains(*r)) {
        return Err(CaError::ReservedName(r.clone()));
    }
    let t1 = clock_name(1);
    let tl = clock_name(l);
    let mut b = CrnBuilder::new();
    for n in states.iter().chain(&counters).chain(&reserved) {
        b.species(n.clone());
    }
    let mut zero = Vec::new();
    let mut j = 0;
    for (q, ins) in &ca.program {
        match ins {
            Instruction::Inc { counter, next } => {
                b.reaction(&[(q.as_str(), 1)], &[(counter.as_str(), 1), (next.as_str(), 1)], 1.0);
                j += 1;
            }
            Instruction::Dec { counter, next, zero: z } => {
                b.reaction(
                    &[(q.as_str(), 1), (counter.as_str(), 1)],
                    &[(next.as_str(), 1), (DELAY_SPECIES, 1)],
                    1.0,
                );
                b.reaction(&[(t1.as_str(), 1), (q.as_str(), 1)], &[(z.as_str(), 1), (tl.as_str(), 1)], 1.0);
                zero.push((j + 1, counter.clone()));
                j += 2;
            }
        }
    }
    for i in 1..l {
        let (ti, tn) = (clock_name(i), clock_name(i + 1));
        b.reaction(
            &[(ti.as_str(), 1), (DELAY_SPECIES, 1)],
            &[(tn.as_str(), 1), (DELAY_SPECIES, 1)],
            1.0,
        );
        b.reaction(&[(tn.as_str(), 1)], &[(ti.as_str(), 1)], 1.0);
    }
    let crn = b.build()?;
    let idx = |n: &str| crn.index_of(n).expect("declared species");
    let species = states
        .iter()
        .chain(&counters)
        .chain(&reserved)
        .map(|n| (n.clone(), idx(n)))
        .collect();
    Ok(CompiledCa {
        l,
        species,
        states: states.iter().map(|n| idx(n)).collect(),
        counters: counters.iter().map(|n| idx(n)).collect(),
        clock: (1..=l).map(|i| idx(&clock_name(i))).collect(),
        d: idx(DELAY_SPECIES),
        start: idx(&ca.start),
        halt: idx(&ca.halt),
        input: idx(&ca.input),
        zero_branches: zero.into_iter().map(|(j, c)| (j, idx(&c))).collect(),
        crn,
    })
}

/// Default number of D molecules for input ν.
pub fn default_n_d(nu: u64) -> u64 {
    10 * nu + 10
}

/// q_start + ν·input + Tl + n_D·D.
pub fn initial_state(compiled: &CompiledCa, nu: u64, n_d: u64) -> State {
    let mut c = compiled.crn.zero_state();
    c.0[compiled.start] += 1;
    c.0[compiled.input] += nu;
    c.0[*compiled.clock.last().expect("l >= 1")] += 1;
    c.0[compiled.d] += n_d;
    c
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunOutcome {
    Correct,
    Wrong,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub outcome: RunOutcome,
    /// Zero-branch firings while the tested counter was positive.
    pub errant_zero_branches: u64,
    /// Steps violating the single-control-token or single-clock-token invariant.
    pub invariant_violations: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub l: usize,
    pub nu: u64,
    pub n_d: u64,
    pub volume: f64,
    pub n_runs: usize,
    pub errors: usize,
    pub timeouts: usize,
    pub rate: f64,
    /// Wilson 95% interval.
    pub ci: (f64, f64),
    /// Runs with no errant zero-branch firing whose counters still disagree
    /// with the interpreter.
    pub clean_mismatches: usize,
    pub invariant_violations: u64,
    pub runs: Vec<RunRecord>,
}

/// Simulates the compiled network `n_runs` times and compares the counters
/// at the first appearance of q_halt with the interpreter's result.
pub fn error_probability(
    ca: &CounterAutomaton,
    compiled: &CompiledCa,
    nu: u64,
    n_d: u64,
    config: &StochasticConfig,
    n_runs: usize,
) -> Result<ErrorReport, CaError> {
    let oracle = run_ca(ca, nu, config.max_steps);
    if !oracle.halted {
        return Err(CaError::OracleNonHalting {
            input: nu,
            steps: config.max_steps,
        });
    }
    let expected: Vec<(usize, u64)> = oracle
        .counters
        .iter()
        .map(|(n, &v)| (compiled.species[n], v))
        .collect();
    let init = initial_state(compiled, nu, n_d);
    let cfg = StochasticConfig {
        record: false,
        ..config.clone()
    };
    let runs: Vec<RunRecord> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| {
            let mut errant = 0;
            let mut violations = 0;
            let tr = simulate_observed(&compiled.crn, &init, &cfg, i, |c, _, j| {
                if let Some(j) = j {
                    if let Some(&(_, ctr)) = compiled.zero_branches.iter().find(|z| z.0 == j) {
                        if c.get(ctr) > 0 {
                            errant += 1;
                        }
                    }
                }
                let control: u64 = compiled.states.iter().map(|&q| c.get(q)).sum();
                let clock: u64 = compiled.clock.iter().map(|&t| c.get(t)).sum();
                if control != 1 || clock != 1 {
                    violations += 1;
                }
                if c.get(compiled.halt) > 0 {
                    Control::Stop
                } else {
                    Control::Continue
                }
            });
            let outcome = if tr.final_state.get(compiled.halt) == 0 {
                RunOutcome::Timeout
            } else if expected.iter().all(|&(x, v)| tr.final_state.get(x) == v) {
                RunOutcome::Correct
            } else {
                RunOutcome::Wrong
            };
            RunRecord {
                outcome,
                errant_zero_branches: errant,
                invariant_violations: violations,
            }
        })
        .collect();
    let errors = runs.iter().filter(|r| r.outcome != RunOutcome::Correct).count();
    let timeouts = runs.iter().filter(|r| r.outcome == RunOutcome::Timeout).count();
    let clean_mismatches = runs
        .iter()
        .filter(|r| r.errant_zero_branches == 0 && r.outcome != RunOutcome::Correct)
        .count();
    Ok(ErrorReport {
        l: compiled.l,
        nu,
        n_d,
        volume: config.volume,
        n_runs,
        errors,
        timeouts,
        rate: errors as f64 / n_runs.max(1) as f64,
        ci: wilson_interval(errors, n_runs, 1.96),
        clean_mismatches,
        invariant_violations: runs.iter().map(|r| r.invariant_violations).sum(),
        runs,
    })
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Pooled two-proportion z statistic for H1: p1 > p2.
pub fn two_proportion_z(k1: usize, n1: usize, k2: usize, n2: usize) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let p1 = k1 as f64 / n1f;
    let p2 = k2 as f64 / n2f;
    let p = (k1 + k2) as f64 / (n1f + n2f);
    let se = (p * (1.0 - p) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    if se == 0.0 {
        0.0
    } else {
        (p1 - p2) / se
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::DOUBLING_CA;

    fn doubling() -> CounterAutomaton {
        parse_ca(DOUBLING_CA).unwrap()
    }

    #[test]
    fn interpreter() {
        let ca = doubling();
        let r = run_ca(&ca, 3, 1000);
        assert!(r.halted);
        assert_eq!(r.counters["y"], 6);
        assert_eq!(r.counters["x"], 0);
        let r = run_ca(&ca, 0, 1000);
        assert!(r.halted);
        assert_eq!(r.counters["y"], 0);
        let spin = parse_ca("#start a\n#halt h\n#input x\nstate a: inc x -> a").unwrap();
        let r = run_ca(&spin, 0, 50);
        assert!(!r.halted);
        assert_eq!(r.steps, 50);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_ca("#halt h\n#input x"), Err(CaError::MissingDirective("start"))));
        assert!(matches!(
            parse_ca("#start a\n#halt h\n#input x\nstate a: inc x -> b"),
            Err(CaError::MissingInstruction(_))
        ));
        assert!(matches!(
            parse_ca("#start a\n#halt h\n#input x\nstate a: inc x -> h\nstate a: inc x -> h"),
            Err(CaError::DuplicateInstruction(_))
        ));
        assert!(matches!(
            parse_ca("#start a\n#halt h\n#input x\nstate a: jmp h"),
            Err(CaError::Syntax { line: 4, .. })
        ));
        assert!(matches!(
            parse_ca("#start a\n#halt h\n#input a\nstate a: inc a -> h"),
            Err(CaError::NameClash(_))
        ));
        assert_eq!(parse_ca(&doubling().to_text()).unwrap(), doubling());
    }

    #[test]
    fn single_dec_structure() {
        let ca = parse_ca("#start q\n#halt h\n#input c\nstate q: dec c -> r else h\nstate r: inc c -> h").unwrap();
        let comp = compile_ca(&ca, 2).unwrap();
        let rendered: Vec<String> = (0..comp.crn.reactions().len()).map(|j| comp.crn.format_reaction(j)).collect();
        assert_eq!(
            rendered,
            vec!["c + q -> D + r", "T1 + q -> T2 + h", "r -> c + h", "D + T1 -> D + T2", "T2 -> T1"]
        );
        assert_eq!(comp.zero_branches, vec![(1, comp.species["c"])]);
    }

    #[test]
    fn structural_counts() {
        let ca = doubling();
        for l in 1..6 {
            let comp = compile_ca(&ca, l).unwrap();
            assert_eq!(
                comp.crn.num_species(),
                ca.states().len() + ca.counters().len() + l + 1
            );
            assert_eq!(
                comp.crn.reactions().len(),
                ca.num_inc() + 2 * ca.num_dec() + 2 * (l - 1)
            );
        }
        let inc_only = parse_ca("#start a\n#halt h\n#input x\nstate a: inc x -> h").unwrap();
        let comp = compile_ca(&inc_only, 4).unwrap();
        assert_eq!(comp.crn.reactions().len(), 1 + 6);
        let one = compile_ca(&ca, 1).unwrap();
        assert!(one.crn.format_reaction(one.zero_branches[0].0).contains("T1 + q0 -> T1 + halt"));
    }

    #[test]
    fn reserved_names() {
        let ca = parse_ca("#start T2\n#halt h\n#input x\nstate T2: inc x -> h").unwrap();
        assert!(compile_ca(&ca, 1).is_ok());
        assert_eq!(compile_ca(&ca, 2), Err(CaError::ReservedName("T2".into())));
        assert_eq!(compile_ca(&doubling(), 0), Err(CaError::ZeroClock));
    }

    #[test]
    fn initial_states() {
        let comp = compile_ca(&doubling(), 4).unwrap();
        let c = initial_state(&comp, 3, 50);
        assert_eq!(c.get(comp.start), 1);
        assert_eq!(c.get(comp.input), 3);
        assert_eq!(c.get(comp.clock[3]), 1);
        assert_eq!(c.get(comp.d), 50);
        assert_eq!(c.support().count(), 4);
        let c0 = initial_state(&comp, 0, 50);
        assert_eq!(c0.get(comp.input), 0);
    }

    #[test]
    fn increment_only_automaton_never_errs() {
        let ca = parse_ca("#start a\n#halt h\n#input x\nstate a: inc y -> b\nstate b: inc y -> h").unwrap();
        let comp = compile_ca(&ca, 3).unwrap();
        let cfg = StochasticConfig {
            volume: 20.0,
            ..Default::default()
        };
        let rep = error_probability(&ca, &comp, 2, 30, &cfg, 50).unwrap();
        assert_eq!(rep.errors, 0);
        assert_eq!(rep.invariant_violations, 0);
    }

    #[test]
    fn short_clock_errs_sometimes() {
        let ca = doubling();
        let comp = compile_ca(&ca, 1).unwrap();
        let cfg = StochasticConfig {
            volume: 20.0,
            ..Default::default()
        };
        let rep = error_probability(&ca, &comp, 3, 40, &cfg, 200).unwrap();
        assert!(rep.errors > 0 && rep.errors < 200, "{}", rep.errors);
        assert_eq!(rep.clean_mismatches, 0);
        assert_eq!(rep.invariant_violations, 0);
    }

    #[test]
    fn non_halting_oracle_is_rejected() {
        let spin = parse_ca("#start a\n#halt h\n#input x\nstate a: inc x -> a").unwrap();
        let comp = compile_ca(&spin, 2).unwrap();
        let cfg = StochasticConfig {
            max_steps: 100,
            ..Default::default()
        };
        assert!(matches!(
            error_probability(&spin, &comp, 1, 10, &cfg, 5),
            Err(CaError::OracleNonHalting { .. })
        ));
    }

    #[test]
    fn statistics_helpers() {
        let (lo, hi) = wilson_interval(0, 200, 1.96);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.03);
        let (lo, hi) = wilson_interval(100, 200, 1.96);
        assert!(lo < 0.5 && hi > 0.5);
        assert!(two_proportion_z(50, 100, 10, 100) > 1.645);
        assert_eq!(two_proportion_z(0, 100, 0, 100), 0.0);
    }
}
