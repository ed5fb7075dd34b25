//! Rate-independent reachability over nonnegative rational concentrations.

use num::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::crn::Crn;
use crate::linprog::{LinearProgram, LpOutcome, Rational};

/// Converts an integer vector to rationals.
pub fn rational_state(counts: &[i64]) -> Vec<Rational> {
    counts.iter().map(|&n| Rational::from_integer(n.into())).collect()
}

fn reactants_present(crn: &Crn, j: usize, x: &[Rational]) -> bool {
    crn.reaction(j).reactants().iter().all(|(s, _)| x[s].is_positive())
}

/// c + M u, or `None` when `u` violates the support condition at `c` or the
/// result has a negative entry.
pub fn apply_flux(crn: &Crn, c: &[Rational], u: &[Rational]) -> Option<Vec<Rational>> {
    if u.iter().any(|v| v.is_negative()) {
        return None;
    }
    let mut x = c.to_vec();
    for (j, uj) in u.iter().enumerate() {
        if uj.is_zero() {
            continue;
        }
        if !reactants_present(crn, j, c) {
            return None;
        }
        let r = crn.reaction(j);
        for s in 0..x.len() {
            let net = r.net(s);
            if net != 0 {
                x[s] += uj * Rational::from_integer(net.into());
            }
        }
    }
    x.iter().all(|v| !v.is_negative()).then_some(x)
}

/// Replays a chain of straight-line segments from `c`.
pub fn replay(crn: &Crn, c: &[Rational], segments: &[Vec<Rational>]) -> Option<Vec<Rational>> {
    segments.iter().try_fold(c.to_vec(), |x, u| apply_flux(crn, &x, u))
}

/// Finds u ≥ 0 with c + M u = d where every reaction in the support of u has
/// all its reactants present in c.
pub fn straight_line_reach(crn: &Crn, c: &[Rational], d: &[Rational]) -> Option<Vec<Rational>> {
    let n = crn.num_species();
    assert_eq!(c.len(), n);
    assert_eq!(d.len(), n);
    if d.iter().chain(c).any(|v| v.is_negative()) {
        return None;
    }
    let kept: Vec<usize> = (0..crn.reactions().len())
        .filter(|&j| !crn.reaction(j).is_mute() && reactants_present(crn, j, c))
        .collect();
    let rows: Vec<Vec<Rational>> = (0..n)
        .map(|s| {
            kept.iter()
                .map(|&j| Rational::from_integer(crn.reaction(j).net(s).into()))
                .collect()
        })
        .collect();
    let rhs: Vec<Rational> = (0..n).map(|s| &d[s] - &c[s]).collect();
    let x = match LinearProgram::new(rows, rhs, kept.len()).solve() {
        LpOutcome::Infeasible => return None,
        out => out.point().expect("feasible").to_vec(),
    };
    let mut u = vec![Rational::zero(); crn.reactions().len()];
    for (k, &j) in kept.iter().enumerate() {
        u[j] = x[k].clone();
    }
    Some(u)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SegmentOutcome {
    /// Flux vectors of each segment, in order.
    Reachable(Vec<Vec<Rational>>),
    /// A conservation law separates c from d, so no depth can succeed.
    Unreachable,
    /// Exhaustively ruled out for every depth up to the bound.
    NotWithin(usize),
    /// The support enumeration hit its cutoff before finishing.
    Inconclusive { depth: usize, programs_solved: usize },
}

impl SegmentOutcome {
    pub fn witness(&self) -> Option<&[Vec<Rational>]> {
        match self {
            SegmentOutcome::Reachable(w) => Some(w),
            _ => None,
        }
    }
}

/// Default cap on the number of support combinations tried.
pub const DEFAULT_SUPPORT_CUTOFF: usize = 200_000;

/// Searches for c ⇒ x1 ⇒ … ⇒ d with at most `max_segments` straight-line
/// segments by iterative deepening over the support of each segment.
pub fn segment_reach(crn: &Crn, c: &[Rational], d: &[Rational], max_segments: usize) -> SegmentOutcome {
    segment_reach_with_cutoff(crn, c, d, max_segments, DEFAULT_SUPPORT_CUTOFF)
}

pub fn segment_reach_with_cutoff(
    crn: &Crn,
    c: &[Rational],
    d: &[Rational],
    max_segments: usize,
    cutoff: usize,
) -> SegmentOutcome {
    assert!(max_segments >= 1, "max_segments must be at least 1");
    if d.iter().chain(c).any(|v| v.is_negative()) {
        return SegmentOutcome::Unreachable;
    }
    if let Some(v) = crn.conservation_vector() {
        let dot = |x: &[Rational]| -> Rational {
            x.iter()
                .zip(&v)
                .map(|(a, &w)| a * Rational::from_integer(w.into()))
                .sum()
        };
        if dot(c) != dot(d) {
            return SegmentOutcome::Unreachable;
        }
    }
    if let Some(u) = straight_line_reach(crn, c, d) {
        return SegmentOutcome::Reachable(vec![u]);
    }
    let live: Vec<usize> = (0..crn.reactions().len())
        .filter(|&j| !crn.reaction(j).is_mute())
        .collect();
    let mut solved = 0;
    for depth in 2..=max_segments {
        let mut search = Search {
            crn,
            c,
            d,
            live: &live,
            depth,
            supports: Vec::new(),
            solved: &mut solved,
            cutoff,
        };
        let present: Vec<bool> = c.iter().map(|v| v.is_positive()).collect();
        match search.extend(&present) {
            Step::Found(w) => return SegmentOutcome::Reachable(w),
            Step::Cutoff => {
                return SegmentOutcome::Inconclusive {
                    depth,
                    programs_solved: solved,
                }
            }
            Step::Exhausted => {}
        }
    }
    SegmentOutcome::NotWithin(max_segments)
}

enum Step {
    Found(Vec<Vec<Rational>>),
    Cutoff,
    Exhausted,
}

struct Search<'a> {
    crn: &'a Crn,
    c: &'a [Rational],
    d: &'a [Rational],
    live: &'a [usize],
    depth: usize,
    supports: Vec<Vec<usize>>,
    solved: &'a mut usize,
    cutoff: usize,
}

impl Search<'_> {
    /// `possible[s]`: species s may be present after the segments chosen so far.
    fn extend(&mut self, possible: &[bool]) -> Step {
        if self.supports.len() == self.depth {
            if *self.solved >= self.cutoff {
                return Step::Cutoff;
            }
            *self.solved += 1;
            return match support_program(self.crn, self.c, self.d, &self.supports) {
                Some(w) => Step::Found(w),
                None => Step::Exhausted,
            };
        }
        let usable: Vec<usize> = self
            .live
            .iter()
            .copied()
            .filter(|&j| self.crn.reaction(j).reactants().iter().all(|(s, _)| possible[s]))
            .collect();
        if usable.len() >= 63 {
            return Step::Cutoff;
        }
        for mask in 1u64..(1u64 << usable.len()) {
            let support: Vec<usize> = usable
                .iter()
                .enumerate()
                .filter(|&(b, _)| mask >> b & 1 == 1)
                .map(|(_, &j)| j)
                .collect();
            let mut next = possible.to_vec();
            for &j in &support {
                for (s, _) in self.crn.reaction(j).products().iter() {
                    next[s] = true;
                }
            }
            self.supports.push(support);
            let step = self.extend(&next);
            self.supports.pop();
            match step {
                Step::Exhausted => {}
                other => return other,
            }
        }
        Step::Exhausted
    }
}

/// Solves for fluxes with the given per-segment supports, maximising a margin ε
/// that every support entry and every required reactant concentration exceeds.
fn support_program(crn: &Crn, c: &[Rational], d: &[Rational], supports: &[Vec<usize>]) -> Option<Vec<Vec<Rational>>> {
    let n = crn.num_species();
    let k = supports.len();
    // Variable layout: fluxes, then ε, then one slack per inequality.
    let offsets: Vec<usize> = supports
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.len();
            Some(o)
        })
        .collect();
    let n_flux: usize = supports.iter().map(Vec::len).sum();
    let eps = n_flux;
    let mut rows: Vec<Vec<(usize, Rational)>> = Vec::new();
    let mut rhs: Vec<Rational> = Vec::new();
    let mut slacks = 0usize;
    let one = Rational::one();
    let int = |v: i64| Rational::from_integer(v.into());

    // Cumulative state after segment i (1-based) as a sparse row over fluxes.
    let state_row = |s: usize, upto: usize| -> Vec<(usize, Rational)> {
        let mut row = Vec::new();
        for i in 0..upto {
            for (q, &j) in supports[i].iter().enumerate() {
                let net = crn.reaction(j).net(s);
                if net != 0 {
                    row.push((offsets[i] + q, int(net)));
                }
            }
        }
        row
    };

    for (i, support) in supports.iter().enumerate() {
        for q in 0..support.len() {
            // u - ε - slack = 0
            let row = vec![
                (offsets[i] + q, one.clone()),
                (eps, -one.clone()),
                (eps + 1 + slacks, -one.clone()),
            ];
            slacks += 1;
            rows.push(row);
            rhs.push(Rational::zero());
        }
        // Reactants of this segment must be present where it starts.
        let mut needed = vec![false; n];
        for &j in support {
            for (s, _) in crn.reaction(j).reactants().iter() {
                needed[s] = true;
            }
        }
        for s in 0..n {
            if i == 0 {
                if needed[s] && !c[s].is_positive() {
                    return None;
                }
                continue;
            }
            let mut row = state_row(s, i);
            if needed[s] {
                // c + Σ M u - ε - slack = 0
                row.push((eps, -one.clone()));
            } else if row.is_empty() {
                continue;
            }
            row.push((eps + 1 + slacks, -one.clone()));
            slacks += 1;
            rows.push(row);
            rhs.push(-c[s].clone());
        }
    }
    for s in 0..n {
        rows.push(state_row(s, k));
        rhs.push(&d[s] - &c[s]);
    }
    // ε ≤ 1 keeps the program bounded.
    rows.push(vec![(eps, one.clone()), (eps + 1 + slacks, one.clone())]);
    rhs.push(one.clone());
    slacks += 1;

    let width = n_flux + 1 + slacks;
    let dense: Vec<Vec<Rational>> = rows
        .into_iter()
        .map(|row| {
            let mut v = vec![Rational::zero(); width];
            for (col, q) in row {
                v[col] += q;
            }
            v
        })
        .collect();
    let mut cost = vec![Rational::zero(); width];
    cost[eps] = one;
    let x = match LinearProgram::new(dense, rhs, width).maximize(cost).solve() {
        LpOutcome::Optimal(x) | LpOutcome::Unbounded(x) => x,
        LpOutcome::Infeasible => return None,
    };
    if !x[eps].is_positive() {
        return None;
    }
    let m = crn.reactions().len();
    Some(
        supports
            .iter()
            .enumerate()
            .map(|(i, support)| {
                let mut u = vec![Rational::zero(); m];
                for (q, &j) in support.iter().enumerate() {
                    u[j] = x[offsets[i] + q].clone();
                }
                u
            })
            .collect(),
    )
}

/// Per-segment flux maps with rationals rendered as exact strings.
pub fn witness_to_json(crn: &Crn, segments: &[Vec<Rational>]) -> Value {
    let segs: Vec<Value> = segments
        .iter()
        .map(|u| {
            let map: serde_json::Map<String, Value> = u
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_zero())
                .map(|(j, v)| (crn.format_reaction(j), Value::String(v.to_string())))
                .collect();
            Value::Object(map)
        })
        .collect();
    json!({ "segments": segs })
}
