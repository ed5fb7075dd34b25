//! Deciders and computers: output classification, halting and stabilizing
//! verdicts over finite closures, speed-fault search, and atom compilers.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::crn::{fresh_name, Crn, CrnBuilder, CrnError, State};
use crate::format::CrnFile;
use crate::reach::{self, is_kfast, post, ReachError, ReachResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecideError {
    #[error("input state is zero")]
    ZeroInput,
    #[error("species `{0}` is not an input species")]
    NotAnInput(String),
    #[error("species `{0}` is both a 0-voter and a 1-voter")]
    OverlappingVoters(String),
    #[error("species `{0}` is both an input and an output")]
    OverlappingRoles(String),
    #[error("every species must be a voter, `{0}` is not")]
    NotVoterTotal(String),
    #[error("modulus must be at least 2 and 0 <= b < m, got b={b}, m={m}")]
    InvalidModulus { b: i64, m: i64 },
    #[error("input is not stably decided ({0:?})")]
    NotStablyDecided(VerdictKind),
    #[error(transparent)]
    Crn(#[from] CrnError),
    #[error(transparent)]
    Reach(#[from] ReachError),
}

/// A chemical reaction decider (N, Σ, Λ0, Λ1).
#[derive(Debug, Clone, PartialEq)]
pub struct Crd {
    crn: Crn,
    input: Vec<usize>,
    vote0: Vec<bool>,
    vote1: Vec<bool>,
}

impl Crd {
    /// `input` fixes the order used by [`Crd::pad`].
    pub fn new<S: AsRef<str>>(crn: Crn, input: &[S], vote0: &[S], vote1: &[S]) -> Result<Self, DecideError> {
        let idx = |names: &[S]| -> Result<Vec<usize>, DecideError> {
            names.iter().map(|n| Ok(crn.require(n.as_ref())?)).collect()
        };
        let input = idx(input)?;
        let mut v0 = vec![false; crn.num_species()];
        let mut v1 = vec![false; crn.num_species()];
        for i in idx(vote0)? {
            v0[i] = true;
        }
        for i in idx(vote1)? {
            if v0[i] {
                return Err(DecideError::OverlappingVoters(crn.species()[i].to_string()));
            }
            v1[i] = true;
        }
        Ok(Crd {
            crn,
            input,
            vote0: v0,
            vote1: v1,
        })
    }

    /// Like [`Crd::new`] but also requires Λ0 ∪ Λ1 = Λ.
    pub fn new_voter_total<S: AsRef<str>>(
        crn: Crn,
        input: &[S],
        vote0: &[S],
        vote1: &[S],
    ) -> Result<Self, DecideError> {
        let crd = Crd::new(crn, input, vote0, vote1)?;
        if let Some(i) = (0..crd.crn.num_species()).find(|&i| !crd.vote0[i] && !crd.vote1[i]) {
            return Err(DecideError::NotVoterTotal(crd.crn.species()[i].to_string()));
        }
        Ok(crd)
    }

    pub fn from_file(f: &CrnFile) -> Result<Self, DecideError> {
        Crd::new(f.crn.clone(), &f.roles.input, &f.roles.vote0, &f.roles.vote1)
    }

    pub fn to_file(&self) -> CrnFile {
        let names = self.crn.species_names();
        let pick = |m: &[bool]| -> Vec<String> {
            (0..names.len()).filter(|&i| m[i]).map(|i| names[i].clone()).collect()
        };
        let mut f = CrnFile::new(self.crn.clone());
        f.roles.input = self.input.iter().map(|&i| names[i].clone()).collect();
        f.roles.vote0 = pick(&self.vote0);
        f.roles.vote1 = pick(&self.vote1);
        f
    }

    pub fn crn(&self) -> &Crn {
        &self.crn
    }

    pub fn input_species(&self) -> &[usize] {
        &self.input
    }

    pub fn is_voter_total(&self) -> bool {
        self.vote0.iter().zip(&self.vote1).all(|(a, b)| *a || *b)
    }

    pub fn is_voter(&self, x: usize, b: bool) -> bool {
        if b {
            self.vote1[x]
        } else {
            self.vote0[x]
        }
    }

    /// Output b if c holds b-voters and no (1-b)-voters.
    pub fn output_of(&self, c: &State) -> Option<bool> {
        let mut has0 = false;
        let mut has1 = false;
        for x in c.support() {
            has0 |= self.vote0[x];
            has1 |= self.vote1[x];
        }
        match (has0, has1) {
            (false, true) => Some(true),
            (true, false) => Some(false),
            _ => None,
        }
    }

    /// ι(x): counts in input-species order, zeros elsewhere.
    pub fn pad(&self, counts: &[u64]) -> State {
        pad(&self.crn, &self.input, counts)
    }

    fn check_input(&self, c: &State) -> Result<(), DecideError> {
        check_input(&self.crn, &self.input, c)
    }
}

fn pad(crn: &Crn, input: &[usize], counts: &[u64]) -> State {
    assert_eq!(counts.len(), input.len(), "one count per input species");
    let mut c = crn.zero_state();
    for (&i, &n) in input.iter().zip(counts) {
        c.0[i] += n;
    }
    c
}

fn check_input(crn: &Crn, input: &[usize], c: &State) -> Result<(), DecideError> {
    crn.check_state(c)?;
    if let Some(x) = c.support().find(|x| !input.contains(x)) {
        return Err(DecideError::NotAnInput(crn.species()[x].to_string()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerdictKind {
    Accept,
    Reject,
    Undecided,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub witness: Option<State>,
    pub states_explored: usize,
    pub truncated: bool,
}

impl Verdict {
    pub fn is_decided(&self) -> bool {
        matches!(self.kind, VerdictKind::Accept | VerdictKind::Reject)
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self.kind {
            VerdictKind::Accept => Some(true),
            VerdictKind::Reject => Some(false),
            _ => None,
        }
    }

    pub fn to_json(&self, crn: &Crn) -> Value {
        let mut v = json!({
            "kind": self.kind,
            "states_explored": self.states_explored,
            "truncated": self.truncated,
        });
        if let Some(w) = &self.witness {
            v["witness"] = json!(crn.format_state(w));
        }
        v
    }
}

fn inconclusive(r: &ReachResult) -> Verdict {
    Verdict {
        kind: VerdictKind::Inconclusive,
        witness: None,
        states_explored: r.len(),
        truncated: true,
    }
}

/// Accept iff every state reaches `good1`, Reject iff every state reaches `good0`.
fn classify(r: &ReachResult, good0: &[bool], good1: &[bool]) -> Verdict {
    let pre1 = r.pre_within(good1);
    let pre0 = r.pre_within(good0);
    let kind = if pre1.iter().all(|&b| b) {
        VerdictKind::Accept
    } else if pre0.iter().all(|&b| b) {
        VerdictKind::Reject
    } else {
        VerdictKind::Undecided
    };
    let witness = (kind == VerdictKind::Undecided).then(|| {
        let i = (0..r.len())
            .find(|&i| !pre0[i] && !pre1[i])
            .or_else(|| (0..r.len()).find(|&i| !pre1[i]))
            .expect("some state misses pre(T_1)");
        r.states[i].clone()
    });
    Verdict {
        kind,
        witness,
        states_explored: r.len(),
        truncated: false,
    }
}

/// Output-b halting check: every reachable state can reach a terminal state
/// with output b.
pub fn halting_verdict(crd: &Crd, input: &State, bound: usize) -> Result<Verdict, DecideError> {
    crd.check_input(input)?;
    if input.is_zero() {
        return Err(DecideError::ZeroInput);
    }
    let r = post(&crd.crn, input, bound);
    if r.truncated {
        return Ok(inconclusive(&r));
    }
    let terminal: Vec<bool> = r.states.iter().map(|c| crd.crn.is_terminal(c)).collect();
    let outs: Vec<Option<bool>> = r.states.iter().map(|c| crd.output_of(c)).collect();
    let t0: Vec<bool> = (0..r.len()).map(|i| terminal[i] && outs[i] == Some(false)).collect();
    let t1: Vec<bool> = (0..r.len()).map(|i| terminal[i] && outs[i] == Some(true)).collect();
    Ok(classify(&r, &t0, &t1))
}

/// Output-b stable states of a closure: states none of whose successors has an
/// output other than b.
fn stable_sets(crd: &Crd, r: &ReachResult) -> (Vec<bool>, Vec<bool>) {
    let outs: Vec<Option<bool>> = r.states.iter().map(|c| crd.output_of(c)).collect();
    let not_b = |b: bool| -> Vec<bool> {
        let bad: Vec<bool> = outs.iter().map(|o| *o != Some(b)).collect();
        r.pre_within(&bad).into_iter().map(|x| !x).collect()
    };
    (not_b(false), not_b(true))
}

/// Output-b stabilizing check: every reachable state can reach an output-b
/// stable state.
pub fn stable_verdict(crd: &Crd, input: &State, bound: usize) -> Result<Verdict, DecideError> {
    crd.check_input(input)?;
    if input.is_zero() {
        return Err(DecideError::ZeroInput);
    }
    let r = post(&crd.crn, input, bound);
    if r.truncated {
        return Ok(inconclusive(&r));
    }
    let (s0, s1) = stable_sets(crd, &r);
    Ok(classify(&r, &s0, &s1))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpeedFault {
    /// Every reachable state has a k-fast route to an output-stable state.
    Free,
    Witness(State),
    /// The closure hit the bound.
    Inconclusive,
}

/// Searches post(ι(input)) for a state with no k-fast path to an output-b
/// stable state, b being the decided output.
pub fn speed_fault_witness(crd: &Crd, input: &State, k: u64, bound: usize) -> Result<SpeedFault, DecideError> {
    reach::check_elementary(&crd.crn)?;
    let v = stable_verdict(crd, input, bound)?;
    let b = match v.kind {
        VerdictKind::Accept => true,
        VerdictKind::Reject => false,
        VerdictKind::Inconclusive => return Ok(SpeedFault::Inconclusive),
        kind => return Err(DecideError::NotStablyDecided(kind)),
    };
    let r = post(&crd.crn, input, bound);
    let (s0, s1) = stable_sets(crd, &r);
    let target = if b { s1 } else { s0 };
    let fast = r.pre_within_filtered(&target, |&(f, j, _)| is_kfast(&crd.crn, &r.states[f], j, k));
    Ok(match fast.iter().position(|&m| !m) {
        Some(i) => SpeedFault::Witness(r.states[i].clone()),
        None => SpeedFault::Free,
    })
}

/// A chemical reaction computer (N, Σ, Γ).
#[derive(Debug, Clone, PartialEq)]
pub struct Crc {
    crn: Crn,
    input: Vec<usize>,
    output: Vec<usize>,
}

impl Crc {
    pub fn new<S: AsRef<str>>(crn: Crn, input: &[S], output: &[S]) -> Result<Self, DecideError> {
        let input: Vec<usize> = input
            .iter()
            .map(|n| crn.require(n.as_ref()))
            .collect::<Result<_, _>>()?;
        let output: Vec<usize> = output
            .iter()
            .map(|n| crn.require(n.as_ref()))
            .collect::<Result<_, _>>()?;
        if let Some(&x) = output.iter().find(|x| input.contains(x)) {
            return Err(DecideError::OverlappingRoles(crn.species()[x].to_string()));
        }
        Ok(Crc { crn, input, output })
    }

    pub fn from_file(f: &CrnFile) -> Result<Self, DecideError> {
        Crc::new(f.crn.clone(), &f.roles.input, &f.roles.output)
    }

    pub fn crn(&self) -> &Crn {
        &self.crn
    }

    pub fn input_species(&self) -> &[usize] {
        &self.input
    }

    pub fn output_species(&self) -> &[usize] {
        &self.output
    }

    pub fn pad(&self, counts: &[u64]) -> State {
        pad(&self.crn, &self.input, counts)
    }

    /// Projection onto Γ, in output-species order.
    pub fn output_of(&self, c: &State) -> Vec<u64> {
        self.output.iter().map(|&i| c.get(i)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrcVerdict {
    /// Stabilized output counts over Γ, when the input is output-stabilizing.
    pub output: Option<Vec<u64>>,
    pub witness: Option<State>,
    pub states_explored: usize,
    pub truncated: bool,
}

/// Finds the o for which ι(input) is output-o stabilizing, if any.
pub fn crc_output_verdict(crc: &Crc, input: &State, bound: usize) -> Result<CrcVerdict, DecideError> {
    check_input(&crc.crn, &crc.input, input)?;
    Ok(crc_verdict_from(crc, input, bound))
}

/// As [`crc_output_verdict`] but from an arbitrary start state.
pub fn crc_verdict_from(crc: &Crc, start: &State, bound: usize) -> CrcVerdict {
    let r = post(&crc.crn, start, bound);
    if r.truncated {
        return CrcVerdict {
            output: None,
            witness: None,
            states_explored: r.len(),
            truncated: true,
        };
    }
    let outs: Vec<Vec<u64>> = r.states.iter().map(|c| crc.output_of(c)).collect();
    let mut ids: HashMap<&Vec<u64>, usize> = HashMap::new();
    let cls: Vec<usize> = outs
        .iter()
        .map(|o| {
            let n = ids.len();
            *ids.entry(o).or_insert(n)
        })
        .collect();
    let mut first_stable: Option<Vec<bool>> = None;
    // Candidates in order of first appearance.
    for o in 0..ids.len() {
        let bad: Vec<bool> = cls.iter().map(|&c| c != o).collect();
        let stable: Vec<bool> = r.pre_within(&bad).into_iter().map(|x| !x).collect();
        if !stable.iter().any(|&s| s) {
            continue;
        }
        let reach = r.pre_within(&stable);
        if reach.iter().all(|&m| m) {
            let i = stable.iter().position(|&s| s).expect("nonempty");
            return CrcVerdict {
                output: Some(outs[i].clone()),
                witness: None,
                states_explored: r.len(),
                truncated: false,
            };
        }
        if first_stable.is_none() {
            first_stable = Some(reach);
        }
    }
    let witness = match first_stable {
        Some(reach) => reach.iter().position(|&m| !m).map(|i| r.states[i].clone()),
        None => Some(r.states[0].clone()),
    };
    CrcVerdict {
        output: None,
        witness,
        states_explored: r.len(),
        truncated: false,
    }
}

fn input_names(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("X{i}")).collect()
}

/// CRD haltingly deciding a·x ≡ b (mod m) over inputs `X1..Xk`.
pub fn compile_mod_atom(a: &[i64], b: i64, m: i64) -> Result<Crd, DecideError> {
    compile_mod_atom_named(&input_names(a.len()), a, b, m)
}

/// Residue tokens R0..R(m-1): each input molecule becomes the residue of its
/// coefficient, tokens merge by adding residues, and the last token votes.
pub fn compile_mod_atom_named<S: AsRef<str>>(inputs: &[S], a: &[i64], b: i64, m: i64) -> Result<Crd, DecideError> {
    assert_eq!(inputs.len(), a.len(), "one coefficient per input");
    if m < 2 || b < 0 || b >= m {
        return Err(DecideError::InvalidModulus { b, m });
    }
    let mut taken: BTreeSet<String> = inputs.iter().map(|s| s.as_ref().to_string()).collect();
    let tokens: Vec<String> = (0..m)
        .map(|r| {
            let n = fresh_name(&format!("R{r}"), &taken);
            taken.insert(n.clone());
            n
        })
        .collect();
    let mut bld = CrnBuilder::new();
    for (x, &ai) in inputs.iter().zip(a) {
        let r = ai.rem_euclid(m) as usize;
        bld.reaction(&[(x.as_ref(), 1)], &[(tokens[r].as_str(), 1)], 1.0);
    }
    for r in 0..m as usize {
        for s in r..m as usize {
            let t = (r + s) % m as usize;
            let lhs: Vec<(&str, u64)> = if r == s {
                vec![(tokens[r].as_str(), 2)]
            } else {
                vec![(tokens[r].as_str(), 1), (tokens[s].as_str(), 1)]
            };
            bld.reaction(&lhs, &[(tokens[t].as_str(), 1)], 1.0);
        }
    }
    let crn = bld.build()?;
    let vote1 = vec![tokens[b as usize].clone()];
    let vote0: Vec<String> = tokens
        .iter()
        .enumerate()
        .filter(|&(r, _)| r != b as usize)
        .map(|(_, t)| t.clone())
        .collect();
    let inputs: Vec<String> = inputs.iter().map(|s| s.as_ref().to_string()).collect();
    Crd::new(crn, &inputs, &vote0, &vote1)
}

/// CRD haltingly deciding a·x ≤ b over inputs `X1..Xk`.
pub fn compile_threshold_atom(a: &[i64], b: i64) -> Result<Crd, DecideError> {
    compile_threshold_atom_named(&input_names(a.len()), a, b)
}

/// Leader-driven summation with saturation at ±s, s = max(|b|+1, max|a_i|).
///
/// Inputs become leaders `L<u>` carrying value u. Two leaders merge into one
/// leader holding the clamped sum and a non-leader `N<r><o>` holding the
/// remainder r and the leader's opinion o. A leader absorbs value from
/// non-leaders the same way and stamps its opinion on them. Every voter
/// carries an opinion, and the unique leader left in a terminal state holds the
/// clamped total.
pub fn compile_threshold_atom_named<S: AsRef<str>>(inputs: &[S], a: &[i64], b: i64) -> Result<Crd, DecideError> {
    assert_eq!(inputs.len(), a.len(), "one coefficient per input");
    let s = a.iter().map(|x| x.abs()).max().unwrap_or(0).max(b.abs() + 1);
    let mut taken: BTreeSet<String> = inputs.iter().map(|x| x.as_ref().to_string()).collect();
    let mut fresh = |base: String| {
        let n = fresh_name(&base, &taken);
        taken.insert(n.clone());
        n
    };
    let tag = |u: i64| if u < 0 { format!("m{}", -u) } else { format!("p{u}") };
    let vals: Vec<i64> = (-s..=s).collect();
    let leader: HashMap<i64, String> = vals.iter().map(|&u| (u, fresh(format!("L{}", tag(u))))).collect();
    let follower: HashMap<(i64, bool), String> = vals
        .iter()
        .flat_map(|&v| [(v, false), (v, true)])
        .map(|(v, o)| ((v, o), fresh(format!("N{}_{}", tag(v), o as u8))))
        .collect();
    let opinion = |u: i64| u <= b;
    let clamp = |x: i64| x.clamp(-s, s);

    let mut bld = CrnBuilder::new();
    for u in &vals {
        bld.species(leader[u].clone());
    }
    for (x, &ai) in inputs.iter().zip(a) {
        bld.reaction(&[(x.as_ref(), 1)], &[(leader[&ai].as_str(), 1)], 1.0);
    }
    for (i, &u) in vals.iter().enumerate() {
        for &v in &vals[i..] {
            let c = clamp(u + v);
            let r = u + v - c;
            let lhs: Vec<(&str, u64)> = if u == v {
                vec![(leader[&u].as_str(), 2)]
            } else {
                vec![(leader[&u].as_str(), 1), (leader[&v].as_str(), 1)]
            };
            let rhs = [(leader[&c].as_str(), 1), (follower[&(r, opinion(c))].as_str(), 1)];
            bld.reaction(&lhs, &rhs, 1.0);
        }
    }
    for &u in &vals {
        for &v in &vals {
            for o in [false, true] {
                let c = clamp(u + v);
                let r = u + v - c;
                if c == u && r == v && opinion(c) == o {
                    continue;
                }
                bld.reaction(
                    &[(leader[&u].as_str(), 1), (follower[&(v, o)].as_str(), 1)],
                    &[(leader[&c].as_str(), 1), (follower[&(r, opinion(c))].as_str(), 1)],
                    1.0,
                );
            }
        }
    }
    let crn = bld.build()?;
    let inputs: Vec<String> = inputs.iter().map(|s| s.as_ref().to_string()).collect();
    let mut vote0 = Vec::new();
    let mut vote1 = Vec::new();
    for &u in &vals {
        if opinion(u) { &mut vote1 } else { &mut vote0 }.push(leader[&u].clone());
    }
    for (&(_, o), name) in &follower {
        if o { &mut vote1 } else { &mut vote0 }.push(name.clone());
    }
    Crd::new(crn, &inputs, &vote0, &vote1)
}
