//! Domain-level DNA strand displacement compilation of uni- and bimolecular
//! CRNs, with empirical co-simulation against the abstract network.
//!
//! A bimolecular reaction α: A + B → P becomes
//!
//! ```text
//! A + L_α <-> H_α + B_α    (toehold exchange)
//! B + H_α  -> O_α + W1_α
//! O_α + T_α -> P + W2_α
//! ```
//!
//! and a unimolecular A → P becomes `A + L_α -> O_α + W1_α`, `O_α + T_α -> P + W2_α`.
//! Reactions without products skip the T_α stage.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::crn::{fresh_name, Crn, CrnError, Multiset, Reaction, State};
use crate::reach::post;
use crate::stochastic::{simulate_observed, Control, StochasticConfig, StopReason, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DsdError {
    #[error("reaction {index} (`{reaction}`) has {order} reactants; only 1 or 2 are supported")]
    Arity { index: usize, reaction: String, order: u64 },
    #[error("fuel count must be positive")]
    ZeroFuel,
    #[error("abstract reachable set exceeds {0} states")]
    AbstractTruncated(usize),
    #[error("initial state has {got} entries, abstract network has {expected} species")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Crn(#[from] CrnError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DomainKind {
    Toehold,
    Recognition,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    pub kind: DomainKind,
    pub complement: bool,
}

impl Domain {
    fn toehold(name: String) -> Self {
        Domain {
            name,
            kind: DomainKind::Toehold,
            complement: false,
        }
    }

    fn recognition(name: String) -> Self {
        Domain {
            name,
            kind: DomainKind::Recognition,
            complement: false,
        }
    }

    pub fn complement(&self) -> Self {
        Domain {
            complement: !self.complement,
            ..self.clone()
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}{}", self.name, if self.complement { "*" } else { "" })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DsdRole {
    Signal(String),
    FuelL(usize),
    FuelT(usize),
    IntermediateH(usize),
    StrandB(usize),
    StrandO(usize),
    Waste1(usize),
    Waste2(usize),
}

/// An implementation species: a complex of strands, each an ordered domain list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DsdSpecies {
    pub name: String,
    pub role: DsdRole,
    pub strands: Vec<Vec<Domain>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupShape {
    Bimolecular,
    Unimolecular,
}

/// Implementation reactions emitted for one abstract reaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReactionGroup {
    pub shape: GroupShape,
    /// Implementation reaction indices in emission order.
    pub reactions: Vec<usize>,
    /// The reverse partner of the toehold-exchange step, if any.
    pub reverse: Option<usize>,
    /// The reaction whose firing completes α.
    pub completing: usize,
    pub l: usize,
    pub t: Option<usize>,
    pub h: Option<usize>,
    pub o: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsdProgram {
    pub abstract_crn: Crn,
    pub implementation: Crn,
    /// Indexed by implementation species.
    pub species: Vec<DsdSpecies>,
    /// Abstract species index to implementation species index.
    pub signal: Vec<usize>,
    pub groups: Vec<ReactionGroup>,
    pub fuel_count: u64,
    /// Conventions applied beyond the plain A + B → C scheme.
    pub conventions: Vec<String>,
}

/// ‖init‖ × 20, at least 1.
pub fn default_fuel(init: &State) -> u64 {
    (20 * init.norm()).max(1)
}

struct Emitter {
    names: BTreeSet<String>,
    species: Vec<DsdSpecies>,
    reactions: Vec<(Vec<(String, u64)>, Vec<(String, u64)>)>,
}

impl Emitter {
    fn add(&mut self, base: &str, role: DsdRole, strands: Vec<Vec<Domain>>) -> String {
        let name = fresh_name(base, &self.names);
        self.names.insert(name.clone());
        self.species.push(DsdSpecies {
            name: name.clone(),
            role,
            strands,
        });
        name
    }

    fn react(&mut self, r: &[(&str, u64)], p: &[(&str, u64)]) -> usize {
        let conv = |v: &[(&str, u64)]| v.iter().map(|&(s, n)| (s.to_string(), n)).collect();
        self.reactions.push((conv(r), conv(p)));
        self.reactions.len() - 1
    }
}

fn star(ds: &[Domain]) -> Vec<Domain> {
    ds.iter().rev().map(Domain::complement).collect()
}

/// Compiles every reaction of `crn` into its strand displacement group. All
/// implementation rate constants are 1.
pub fn compile_dsd(crn: &Crn, fuel_count: u64) -> Result<DsdProgram, DsdError> {
    if fuel_count == 0 {
        return Err(DsdError::ZeroFuel);
    }
    for (index, r) in crn.reactions().iter().enumerate() {
        if !(1..=2).contains(&r.order()) {
            return Err(DsdError::Arity {
                index,
                reaction: crn.format_reaction(index),
                order: r.order(),
            });
        }
    }
    let names = crn.species_names();
    let mut em = Emitter {
        names: names.iter().cloned().collect(),
        species: Vec::new(),
        reactions: Vec::new(),
    };
    // Identifier domains of each signal strand: history, incoming toehold,
    // recognition, outgoing toehold.
    let ident = |x: &str| -> Vec<Domain> {
        vec![
            Domain::recognition(format!("h_{x}")),
            Domain::toehold(format!("i_{x}")),
            Domain::recognition(format!("s_{x}")),
            Domain::toehold(format!("o_{x}")),
        ]
    };
    for x in &names {
        em.species.push(DsdSpecies {
            name: x.clone(),
            role: DsdRole::Signal(x.clone()),
            strands: vec![ident(x)],
        });
    }
    let mut conventions = BTreeSet::new();
    let mut groups = Vec::new();
    for (j, r) in crn.reactions().iter().enumerate() {
        let reactants: Vec<String> = r
            .reactants()
            .iter()
            .flat_map(|(x, n)| std::iter::repeat_n(names[x].clone(), n as usize))
            .collect();
        let products: Vec<(String, u64)> = r.products().iter().map(|(x, n)| (names[x].clone(), n as u64)).collect();
        let prod_ref: Vec<(&str, u64)> = products.iter().map(|(s, n)| (s.as_str(), *n)).collect();
        let r_dom = Domain::recognition(format!("r{j}"));
        let a = ident(&reactants[0]);
        let (ia, sa, oa) = (&a[1], &a[2], &a[3]);

        // T_α: a bottom strand covering o-toehold and r_α, holding one strand
        // per product molecule.
        let o_toe = if reactants.len() == 2 { ident(&reactants[1])[3].clone() } else { oa.clone() };
        let mut t_bottom = vec![o_toe.complement(), r_dom.complement()];
        let mut t_strands = Vec::new();
        for (p, n) in &products {
            let id = ident(p);
            for _ in 0..*n {
                t_bottom.extend(star(&id[1..3]));
                t_strands.push(id.clone());
            }
        }
        let t_complex = |strands: &[Vec<Domain>]| -> Vec<Vec<Domain>> {
            std::iter::once(t_bottom.clone()).chain(strands.iter().cloned()).collect()
        };

        if reactants.len() == 2 {
            let b = ident(&reactants[1]);
            let (ib, sb, ob) = (&b[1], &b[2], &b[3]);
            let bottom = star(&[ia.clone(), sa.clone(), ib.clone(), sb.clone(), ob.clone()]);
            let b_strand = vec![sa.clone(), ib.clone()];
            let o_strand = vec![sb.clone(), ob.clone(), r_dom.clone()];
            let has_products = !products.is_empty();
            let mut l_strands = vec![bottom.clone(), b_strand.clone()];
            if has_products {
                l_strands.push(o_strand.clone());
            }
            let l = em.add(&format!("L_{j}"), DsdRole::FuelL(j), l_strands);
            let mut h_strands = vec![bottom.clone(), a.clone()];
            if has_products {
                h_strands.push(o_strand.clone());
            }
            let h = em.add(&format!("H_{j}"), DsdRole::IntermediateH(j), h_strands);
            let bs = em.add(&format!("B_{j}"), DsdRole::StrandB(j), vec![b_strand]);
            let w1 = em.add(&format!("W1_{j}"), DsdRole::Waste1(j), vec![bottom, a.clone(), b.clone()]);
            let (ra, rb) = (reactants[0].as_str(), reactants[1].as_str());
            let fwd = em.react(&[(ra, 1), (&l, 1)], &[(&h, 1), (&bs, 1)]);
            let rev = em.react(&[(&h, 1), (&bs, 1)], &[(ra, 1), (&l, 1)]);
            let (o, t, step2, completing) = if has_products {
                let o = em.add(&format!("O_{j}"), DsdRole::StrandO(j), vec![o_strand.clone()]);
                let t = em.add(&format!("T_{j}"), DsdRole::FuelT(j), t_complex(&t_strands));
                let w2 = em.add(&format!("W2_{j}"), DsdRole::Waste2(j), t_complex(&[o_strand]));
                let s2 = em.react(&[(rb, 1), (&h, 1)], &[(&o, 1), (&w1, 1)]);
                let mut out = prod_ref.clone();
                out.push((&w2, 1));
                let s3 = em.react(&[(&o, 1), (&t, 1)], &out);
                (Some(o), Some(t), vec![s2, s3], s3)
            } else {
                conventions.insert("bimolecular reactions without products stop after B + H -> W1".to_string());
                let s2 = em.react(&[(rb, 1), (&h, 1)], &[(&w1, 1)]);
                (None, None, vec![s2], s2)
            };
            groups.push(ReactionGroup {
                shape: GroupShape::Bimolecular,
                reactions: [fwd, rev].into_iter().chain(step2).collect(),
                reverse: Some(rev),
                completing,
                l: species_index(&em, &l),
                t: t.map(|t| species_index(&em, &t)),
                h: Some(species_index(&em, &h)),
                o: o.map(|o| species_index(&em, &o)),
            });
        } else {
            conventions.insert("unimolecular reactions use A + L -> O + W1, O + T -> products + W2".to_string());
            let bottom = star(&[ia.clone(), sa.clone(), oa.clone()]);
            let o_strand = vec![sa.clone(), oa.clone(), r_dom.clone()];
            let ra = reactants[0].as_str();
            if products.is_empty() {
                conventions.insert("reactions without products compile to A + L -> W1".to_string());
                let l = em.add(&format!("L_{j}"), DsdRole::FuelL(j), vec![bottom.clone()]);
                let w1 = em.add(&format!("W1_{j}"), DsdRole::Waste1(j), vec![bottom, a.clone()]);
                let s1 = em.react(&[(ra, 1), (&l, 1)], &[(&w1, 1)]);
                groups.push(ReactionGroup {
                    shape: GroupShape::Unimolecular,
                    reactions: vec![s1],
                    reverse: None,
                    completing: s1,
                    l: species_index(&em, &l),
                    t: None,
                    h: None,
                    o: None,
                });
            } else {
                let l = em.add(&format!("L_{j}"), DsdRole::FuelL(j), vec![bottom.clone(), o_strand.clone()]);
                let o = em.add(&format!("O_{j}"), DsdRole::StrandO(j), vec![o_strand.clone()]);
                let w1 = em.add(&format!("W1_{j}"), DsdRole::Waste1(j), vec![bottom, a.clone()]);
                let t = em.add(&format!("T_{j}"), DsdRole::FuelT(j), t_complex(&t_strands));
                let w2 = em.add(&format!("W2_{j}"), DsdRole::Waste2(j), t_complex(&[o_strand]));
                let s1 = em.react(&[(ra, 1), (&l, 1)], &[(&o, 1), (&w1, 1)]);
                let mut out = prod_ref.clone();
                out.push((&w2, 1));
                let s2 = em.react(&[(&o, 1), (&t, 1)], &out);
                groups.push(ReactionGroup {
                    shape: GroupShape::Unimolecular,
                    reactions: vec![s1, s2],
                    reverse: None,
                    completing: s2,
                    l: species_index(&em, &l),
                    t: Some(species_index(&em, &t)),
                    h: None,
                    o: Some(species_index(&em, &o)),
                });
            }
        }
        if products.iter().map(|(_, n)| n).sum::<u64>() > 1 {
            conventions.insert("T releases all product strands in a single reaction".to_string());
        }
    }

    // The implementation orders species by name; remap emission indices.
    let all: Vec<String> = em.species.iter().map(|s| s.name.clone()).collect();
    let mut sorted = all.clone();
    sorted.sort();
    let pos: BTreeMap<&str, usize> = sorted.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let side = |v: &[(String, u64)]| Multiset::from_pairs(v.iter().map(|(s, n)| (pos[s.as_str()], *n)));
    let reactions = em
        .reactions
        .iter()
        .map(|(r, p)| Reaction::new(side(r)?, side(p)?, 1.0))
        .collect::<Result<Vec<_>, CrnError>>()?;
    let implementation = Crn::from_parts(&sorted, &reactions)?;
    let remap = |i: usize| pos[all[i].as_str()];
    let mut species: Vec<Option<DsdSpecies>> = vec![None; sorted.len()];
    for s in em.species {
        let i = pos[s.name.as_str()];
        species[i] = Some(s);
    }
    for g in &mut groups {
        g.l = remap(g.l);
        g.t = g.t.map(remap);
        g.h = g.h.map(remap);
        g.o = g.o.map(remap);
    }
    Ok(DsdProgram {
        signal: names.iter().map(|n| pos[n.as_str()]).collect(),
        abstract_crn: crn.clone(),
        implementation,
        species: species.into_iter().map(|s| s.expect("every species emitted")).collect(),
        groups,
        fuel_count,
        conventions: conventions.into_iter().collect(),
    })
}

fn species_index(em: &Emitter, name: &str) -> usize {
    em.species.iter().position(|s| s.name == name).expect("emitted")
}

impl DsdProgram {
    /// Signals from the abstract state plus `fuel_count` of every fuel.
    pub fn initial_state(&self, init: &State) -> Result<State, DsdError> {
        if init.len() != self.abstract_crn.num_species() {
            return Err(DsdError::DimensionMismatch {
                expected: self.abstract_crn.num_species(),
                got: init.len(),
            });
        }
        let mut c = self.implementation.zero_state();
        for (x, &i) in self.signal.iter().enumerate() {
            c.0[i] = init.get(x);
        }
        for &f in &self.fuels() {
            c.0[f] = self.fuel_count;
        }
        Ok(c)
    }

    pub fn fuels(&self) -> Vec<usize> {
        self.groups.iter().flat_map(|g| std::iter::once(g.l).chain(g.t)).collect()
    }

    /// Number of strands in each implementation complex.
    pub fn strand_weights(&self) -> Vec<u64> {
        self.species.iter().map(|s| s.strands.len() as u64).collect()
    }

    /// Reactions whose strand-weighted reactant and product totals differ.
    pub fn strand_imbalances(&self) -> Vec<usize> {
        let w = self.strand_weights();
        let total = |m: &Multiset| m.iter().map(|(x, n)| w[x] * n as u64).sum::<u64>();
        self.implementation
            .reactions()
            .iter()
            .enumerate()
            .filter(|(_, r)| total(r.reactants()) != total(r.products()))
            .map(|(j, _)| j)
            .collect()
    }

    /// Signal counts and the number of in-flight H/O intermediates.
    pub fn project(&self, c: &State) -> (State, u64) {
        let sig = State(self.signal.iter().map(|&i| c.get(i)).collect());
        let pending = self
            .groups
            .iter()
            .flat_map(|g| g.h.into_iter().chain(g.o))
            .map(|i| c.get(i))
            .sum();
        (sig, pending)
    }

    /// Projection with pending H reverted to its first reactant and pending O
    /// committed to its products.
    pub fn resolved_projection(&self, c: &State) -> State {
        let (mut sig, _) = self.project(c);
        for (j, g) in self.groups.iter().enumerate() {
            let r = self.abstract_crn.reaction(j);
            if let Some(h) = g.h {
                let n = c.get(h);
                let first = r.reactants().iter().next().expect("order ≥ 1").0;
                sig.0[first] += n;
            }
            if let Some(o) = g.o {
                let n = c.get(o);
                for (x, k) in r.products().iter() {
                    sig.0[x] += n * k as u64;
                }
            }
        }
        sig
    }

    /// Pairs (j, k) of implementation reactions that undo each other.
    pub fn reversible_pairs(&self) -> Vec<(usize, usize)> {
        let rs = self.implementation.reactions();
        let mut out = Vec::new();
        for j in 0..rs.len() {
            for k in (j + 1)..rs.len() {
                if rs[j].reactants() == rs[k].products() && rs[j].products() == rs[k].reactants() {
                    out.push((j, k));
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let imp = &self.implementation;
        json!({
            "abstract": crate::format::render_crn(&self.abstract_crn),
            "implementation": crate::format::render_crn(imp),
            "fuel_count": self.fuel_count,
            "signal_map": self.abstract_crn.species_names().iter().zip(&self.signal)
                .map(|(a, &i)| (a.clone(), Value::String(imp.species()[i].to_string())))
                .collect::<serde_json::Map<_, _>>(),
            "species": self.species.iter().map(|s| json!({
                "name": s.name,
                "role": s.role,
                "strands": s.strands.iter().map(|st| st.iter().map(|d| d.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "groups": self.groups.iter().enumerate().map(|(j, g)| json!({
                "abstract": self.abstract_crn.format_reaction(j),
                "shape": g.shape,
                "reactions": g.reactions.iter().map(|&k| imp.format_reaction(k)).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "conventions": self.conventions,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuelUse {
    pub l_consumed: i64,
    pub t_consumed: i64,
    pub completed: u64,
    pub pending_h: u64,
    pub pending_o: u64,
    pub balanced: bool,
}

/// Per-reaction fuel consumption over a recorded trajectory. Completed
/// firings are counted from the event log; consumption from fuel counts.
pub fn fuel_audit(prog: &DsdProgram, tr: &Trajectory) -> Vec<FuelUse> {
    let mut completed = vec![0u64; prog.groups.len()];
    let completing: BTreeMap<usize, usize> = prog.groups.iter().enumerate().map(|(j, g)| (g.completing, j)).collect();
    for e in &tr.events {
        if let Some(&j) = completing.get(&e.reaction) {
            completed[j] += 1;
        }
    }
    let (c0, c1) = (&tr.initial, &tr.final_state);
    let used = |i: usize| c0.get(i) as i64 - c1.get(i) as i64;
    prog.groups
        .iter()
        .zip(completed)
        .map(|(g, done)| {
            let pending_h = g.h.map_or(0, |h| c1.get(h));
            let pending_o = g.o.map_or(0, |o| c1.get(o));
            let l_consumed = used(g.l);
            let t_consumed = g.t.map_or(0, used);
            let t_expected = if g.t.is_some() { done as i64 } else { 0 };
            FuelUse {
                l_consumed,
                t_consumed,
                completed: done,
                pending_h,
                pending_o,
                balanced: l_consumed == (done + pending_h + pending_o) as i64 && t_consumed == t_expected,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosimRun {
    /// Projected signal state when the run stopped.
    pub final_projection: State,
    /// Reached a state with nothing pending whose projection is terminal.
    pub quiescent: bool,
    pub fuel_exhausted: bool,
    /// Zero-pending projections outside the abstract reachable set.
    pub unreachable_projections: u64,
    /// Resolved projections outside the abstract reachable set.
    pub unreachable_resolved: u64,
    pub audit_balanced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CosimReport {
    pub n_runs: usize,
    pub abstract_states: usize,
    pub abstract_terminals: Vec<State>,
    pub runs: Vec<CosimRun>,
    /// Count of runs per final projected state.
    pub final_histogram: BTreeMap<State, usize>,
}

impl CosimReport {
    /// Every run quiesced at an abstract terminal state with consistent
    /// projections, unexhausted fuel and a balanced audit.
    pub fn passed(&self) -> bool {
        let terminals: HashSet<&State> = self.abstract_terminals.iter().collect();
        self.runs.iter().all(|r| {
            r.quiescent
                && !r.fuel_exhausted
                && r.unreachable_projections == 0
                && r.unreachable_resolved == 0
                && r.audit_balanced
                && terminals.contains(&r.final_projection)
        })
    }

    pub fn to_text(&self, abstract_crn: &Crn) -> String {
        let mut out = format!(
            "runs: {}\nabstract reachable states: {}\nabstract terminal states: {}\n",
            self.n_runs,
            self.abstract_states,
            self.abstract_terminals
                .iter()
                .map(|c| abstract_crn.format_state(c))
                .collect::<Vec<_>>()
                .join(", ")
        );
        for (c, n) in &self.final_histogram {
            out.push_str(&format!("final {}: {} runs\n", abstract_crn.format_state(c), n));
        }
        let count = |f: fn(&CosimRun) -> bool| self.runs.iter().filter(|r| f(r)).count();
        out.push_str(&format!(
            "quiescent: {}\nfuel exhausted: {}\nprojection violations: {}\nunbalanced audits: {}\nresult: {}\n",
            count(|r| r.quiescent),
            count(|r| r.fuel_exhausted),
            count(|r| r.unreachable_projections + r.unreachable_resolved > 0),
            count(|r| !r.audit_balanced),
            if self.passed() { "pass" } else { "fail" }
        ));
        out
    }
}

/// Simulates the implementation `n_runs` times from the compiled image of
/// `init` and compares projections with the abstract reachable set.
pub fn cosimulate_check(
    prog: &DsdProgram,
    init: &State,
    config: &StochasticConfig,
    n_runs: usize,
    bound: usize,
) -> Result<CosimReport, DsdError> {
    let closure = post(&prog.abstract_crn, init, bound);
    if closure.truncated {
        return Err(DsdError::AbstractTruncated(bound));
    }
    let reachable: HashSet<&State> = closure.states.iter().collect();
    let abstract_terminals: Vec<State> = closure
        .states
        .iter()
        .filter(|c| prog.abstract_crn.is_terminal(c))
        .cloned()
        .collect();
    let start = prog.initial_state(init)?;
    let fuels = prog.fuels();
    let cfg = StochasticConfig {
        record: true,
        ..config.clone()
    };
    let runs: Vec<CosimRun> = (0..n_runs as u64)
        .into_par_iter()
        .map(|run| {
            let mut bad = 0;
            let mut bad_resolved = 0;
            let mut quiescent = false;
            let mut exhausted = false;
            let tr = simulate_observed(&prog.implementation, &start, &cfg, run, |c, _, _| {
                let (sig, pending) = prog.project(c);
                if pending == 0 && !reachable.contains(&sig) {
                    bad += 1;
                }
                if !reachable.contains(&prog.resolved_projection(c)) {
                    bad_resolved += 1;
                }
                if fuels.iter().any(|&f| c.get(f) == 0) {
                    exhausted = true;
                    return Control::Stop;
                }
                if pending == 0 && prog.abstract_crn.is_terminal(&sig) {
                    quiescent = true;
                    return Control::Stop;
                }
                Control::Continue
            });
            let audit = fuel_audit(prog, &tr);
            CosimRun {
                final_projection: prog.project(&tr.final_state).0,
                quiescent: quiescent || (tr.stop == StopReason::Terminal && prog.project(&tr.final_state).1 == 0),
                fuel_exhausted: exhausted,
                unreachable_projections: bad,
                unreachable_resolved: bad_resolved,
                audit_balanced: audit.iter().all(|a| a.balanced),
            }
        })
        .collect();
    let mut final_histogram = BTreeMap::new();
    for r in &runs {
        *final_histogram.entry(r.final_projection.clone()).or_insert(0) += 1;
    }
    Ok(CosimReport {
        n_runs,
        abstract_states: closure.len(),
        abstract_terminals,
        runs,
        final_histogram,
    })
}
