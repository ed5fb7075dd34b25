//! Explicit-state reachability with a caller-supplied state bound.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use serde_json::{json, Value};
use thiserror::Error;

use crate::crn::{Crn, State};

/// Default cap on explored states.
pub const DEFAULT_BOUND: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReachError {
    #[error("reaction {0} has more than two reactants; k-fast edges are defined for uni- and bimolecular reactions only")]
    NotElementary(usize),
}

/// Breadth-first closure. States are stored in discovery order; edges are
/// `(from, reaction, to)` index triples.
#[derive(Debug, Clone)]
pub struct ReachResult {
    pub states: Vec<State>,
    pub edges: Vec<(usize, usize, usize)>,
    pub truncated: bool,
    pub bound: usize,
    /// Number of (state, mute reaction) pairs where the mute reaction was applicable.
    pub mute_applicable: usize,
    index: HashMap<State, usize>,
}

impl ReachResult {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, c: &State) -> Option<usize> {
        self.index.get(c).copied()
    }

    pub fn contains(&self, c: &State) -> bool {
        self.index.contains_key(c)
    }

    /// Indices of states with no outgoing edge in this graph.
    pub fn sinks(&self) -> Vec<bool> {
        let mut has_out = vec![false; self.states.len()];
        for &(f, _, _) in &self.edges {
            has_out[f] = true;
        }
        has_out.into_iter().map(|b| !b).collect()
    }

    /// Backward closure of `target` over all edges.
    pub fn pre_within(&self, target: &[bool]) -> Vec<bool> {
        self.pre_within_filtered(target, |_| true)
    }

    /// Backward closure of `target` over the edges accepted by `keep`.
    pub fn pre_within_filtered(
        &self,
        target: &[bool],
        keep: impl Fn(&(usize, usize, usize)) -> bool,
    ) -> Vec<bool> {
        let n = self.states.len();
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in &self.edges {
            if keep(e) {
                rev[e.2].push(e.0);
            }
        }
        let mut mark = target.to_vec();
        let mut queue: VecDeque<usize> = (0..n).filter(|&i| mark[i]).collect();
        while let Some(t) = queue.pop_front() {
            for &f in &rev[t] {
                if !mark[f] {
                    mark[f] = true;
                    queue.push_back(f);
                }
            }
        }
        mark
    }

    /// JSON with states as count maps and edges as index triples.
    pub fn to_json(&self, crn: &Crn) -> Value {
        let names = crn.species_names();
        let states: Vec<Value> = self
            .states
            .iter()
            .map(|c| {
                let m: serde_json::Map<String, Value> = c
                    .support()
                    .map(|i| (names[i].clone(), json!(c.get(i))))
                    .collect();
                Value::Object(m)
            })
            .collect();
        json!({
            "states": states,
            "edges": self.edges.iter().map(|&(a, j, b)| json!([a, j, b])).collect::<Vec<_>>(),
            "truncated": self.truncated,
            "bound": self.bound,
        })
    }

    pub fn to_dot(&self, crn: &Crn) -> String {
        let mut out = String::from("digraph reach {\n");
        for (i, c) in self.states.iter().enumerate() {
            let _ = writeln!(out, "  s{i} [label=\"{}\"];", crn.format_state(c));
        }
        for &(a, j, b) in &self.edges {
            let _ = writeln!(out, "  s{a} -> s{b} [label=\"{j}\"];");
        }
        out.push_str("}\n");
        out
    }
}

/// `post(c)` explored breadth first, trying reactions in declaration order.
pub fn post(crn: &Crn, c: &State, bound: usize) -> ReachResult {
    explore(crn, c, bound, |_, _| true)
}

/// Like [`post`] but admitting only k-fast edges: some reactant has count ≥ k.
/// Reactions without reactants are never k-fast.
pub fn post_kfast(crn: &Crn, c: &State, k: u64, bound: usize) -> Result<ReachResult, ReachError> {
    check_elementary(crn)?;
    Ok(explore(crn, c, bound, |s, j| is_kfast(crn, s, j, k)))
}

pub fn check_elementary(crn: &Crn) -> Result<(), ReachError> {
    match crn.reactions().iter().position(|r| r.order() > 2) {
        Some(j) => Err(ReachError::NotElementary(j)),
        None => Ok(()),
    }
}

pub fn is_kfast(crn: &Crn, c: &State, j: usize, k: u64) -> bool {
    crn.reaction(j).reactants().species().any(|x| c.get(x) >= k)
}

pub fn is_terminal(crn: &Crn, c: &State) -> bool {
    crn.is_terminal(c)
}

fn explore(crn: &Crn, c: &State, bound: usize, admit: impl Fn(&State, usize) -> bool) -> ReachResult {
    let bound = bound.max(1);
    let mut res = ReachResult {
        states: vec![c.clone()],
        edges: Vec::new(),
        truncated: false,
        bound,
        mute_applicable: 0,
        index: HashMap::from([(c.clone(), 0)]),
    };
    let mut head = 0;
    'outer: while head < res.states.len() {
        let cur = res.states[head].clone();
        for (j, r) in crn.reactions().iter().enumerate() {
            if !r.applicable(&cur) {
                continue;
            }
            if r.is_mute() {
                res.mute_applicable += 1;
                continue;
            }
            if !admit(&cur, j) {
                continue;
            }
            let Ok(next) = crn.apply(&cur, j) else {
                res.truncated = true;
                continue;
            };
            let to = match res.index.get(&next) {
                Some(&i) => i,
                None => {
                    if res.states.len() >= bound {
                        res.truncated = true;
                        break 'outer;
                    }
                    let i = res.states.len();
                    res.index.insert(next.clone(), i);
                    res.states.push(next);
                    i
                }
            };
            res.edges.push((head, j, to));
        }
        head += 1;
    }
    res
}

/// Set-based backward closure: states of `universe` that reach `target`
/// through states of `universe`.
pub fn pre_within(crn: &Crn, target: &[State], universe: &[State]) -> Vec<State> {
    let index: HashMap<&State, usize> = universe.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); universe.len()];
    for (i, c) in universe.iter().enumerate() {
        for j in 0..crn.reactions().len() {
            if crn.reaction(j).is_mute() || !crn.applicable(c, j) {
                continue;
            }
            if let Ok(next) = crn.apply(c, j) {
                if let Some(&t) = index.get(&next) {
                    rev[t].push(i);
                }
            }
        }
    }
    let mut mark = vec![false; universe.len()];
    let mut queue = VecDeque::new();
    for t in target {
        if let Some(&i) = index.get(t) {
            if !mark[i] {
                mark[i] = true;
                queue.push_back(i);
            }
        }
    }
    while let Some(t) = queue.pop_front() {
        for &f in &rev[t] {
            if !mark[f] {
                mark[f] = true;
                queue.push_back(f);
            }
        }
    }
    universe
        .iter()
        .zip(mark)
        .filter(|(_, m)| *m)
        .map(|(c, _)| c.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ex21() -> Crn {
        "3A -> 2B\nB + C -> A\nC -> B\nB -> C".parse().unwrap()
    }

    #[test]
    fn worked_example_closure() {
        let crn = ex21();
        let c = crn.parse_state("A + 2C").unwrap();
        let r = post(&crn, &c, 100);
        assert!(!r.truncated);
        assert!(r.contains(&crn.parse_state("A + B + C").unwrap()));
        let two_a = crn.parse_state("2A").unwrap();
        assert!(r.contains(&two_a));
        assert!(is_terminal(&crn, &two_a));
        let pre = pre_within(&crn, std::slice::from_ref(&two_a), &r.states);
        assert!(pre.contains(&c));
    }

    #[test]
    fn isolated_state_is_its_own_closure() {
        let crn = ex21();
        let c = crn.parse_state("2A").unwrap();
        let r = post(&crn, &c, 10);
        assert_eq!(r.states, vec![c]);
        assert!(r.edges.is_empty());
    }

    #[test]
    fn unbounded_growth_truncates_at_bound() {
        let crn: Crn = "0 -> A".parse().unwrap();
        let r = post(&crn, &crn.zero_state(), 10);
        assert!(r.truncated);
        assert_eq!(r.len(), 10);
        assert!(r.edges.iter().all(|&(a, _, b)| a < 10 && b < 10));
    }

    #[test]
    fn pre_within_edge_cases() {
        let crn = ex21();
        let c = crn.parse_state("A + 2C").unwrap();
        let r = post(&crn, &c, 100);
        assert_eq!(pre_within(&crn, &r.states, &r.states).len(), r.len());
        let two_a = crn.parse_state("2A").unwrap();
        assert_eq!(pre_within(&crn, std::slice::from_ref(&two_a), &[two_a.clone(), c]), vec![two_a]);
    }

    #[test]
    fn zero_state_is_terminal_without_sources() {
        assert!(is_terminal(&ex21(), &ex21().zero_state()));
        let src: Crn = "0 -> A".parse().unwrap();
        assert!(!is_terminal(&src, &src.zero_state()));
    }

    #[test]
    fn kfast_edges() {
        let crn: Crn = "X + Y -> Z".parse().unwrap();
        let c = crn.parse_state("X + Y").unwrap();
        let r = post_kfast(&crn, &c, 2, 10).unwrap();
        assert_eq!(r.states, vec![c]);
        let c = crn.parse_state("5X + Y").unwrap();
        let r = post_kfast(&crn, &c, 5, 10).unwrap();
        assert_eq!(r.edges.len(), 1);
        let tri: Crn = "3A -> B".parse().unwrap();
        assert_eq!(
            post_kfast(&tri, &tri.zero_state(), 1, 10).unwrap_err(),
            ReachError::NotElementary(0)
        );
    }

    #[test]
    fn exports() {
        let crn: Crn = "A -> B".parse().unwrap();
        let r = post(&crn, &crn.parse_state("A").unwrap(), 10);
        let j = r.to_json(&crn);
        assert_eq!(j["edges"], json!([[0, 0, 1]]));
        assert_eq!(j["states"][1], json!({"B": 1}));
        assert!(r.to_dot(&crn).contains("s0 -> s1"));
    }

    fn arb_case() -> impl Strategy<Value = (Crn, State)> {
        let names = ["A", "B", "C"];
        let side = prop::collection::vec((0usize..3, 1u64..3), 0..3);
        (prop::collection::vec((side.clone(), side), 1..4), prop::collection::vec(0u64..3, 3)).prop_map(
            move |(rs, init)| {
                let mut b = crate::CrnBuilder::new();
                for n in names {
                    b.species(n);
                }
                for (r, p) in rs {
                    let r: Vec<(&str, u64)> = r.iter().map(|&(i, n)| (names[i], n)).collect();
                    let p: Vec<(&str, u64)> = p.iter().map(|&(i, n)| (names[i], n)).collect();
                    b.reaction(&r, &p, 1.0);
                }
                (b.build().unwrap(), State(init))
            },
        )
    }

    proptest! {
        #[test]
        fn post_is_monotone_in_bound((crn, c) in arb_case(), b1 in 1usize..20, extra in 0usize..40) {
            let small = post(&crn, &c, b1);
            let large = post(&crn, &c, b1 + extra);
            prop_assert_eq!(&small.states[..], &large.states[..small.len()]);
            if large.truncated {
                prop_assert!(small.truncated);
            }
            if !small.truncated {
                prop_assert_eq!(small.len(), large.len());
            }
        }

        #[test]
        fn closure_contains_its_root((crn, c) in arb_case()) {
            let r = post(&crn, &c, 200);
            prop_assert!(pre_within(&crn, std::slice::from_ref(&c), &r.states).contains(&c));
            let mark = r.pre_within(&r.states.iter().map(|s| s == &c).collect::<Vec<_>>());
            prop_assert!(mark[0]);
        }

        #[test]
        fn one_fast_equals_nonmute_edges((crn, c) in arb_case()) {
            // Source reactions have no reactant and are never k-fast.
            prop_assume!(crn.reactions().iter().all(|r| (1..=2).contains(&r.order())));
            let all = post(&crn, &c, 200);
            let fast = post_kfast(&crn, &c, 1, 200).unwrap();
            prop_assert_eq!(all.states, fast.states);
            prop_assert_eq!(all.edges, fast.edges);
        }

        #[test]
        fn conserved_weight_is_constant_on_closures((crn, c) in arb_case()) {
            if let Some(v) = crn.conservation_vector() {
                let r = post(&crn, &c, 5000);
                prop_assert!(!r.truncated);
                let w = c.dot(&v);
                prop_assert!(r.states.iter().all(|s| s.dot(&v) == w));
            }
        }
    }
}
