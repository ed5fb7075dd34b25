//! Heuristic check that points on mass-action trajectories are
//! segment-reachable from the initial state at small depth.
//!
//! Each network is augmented with one counter species per reaction so the ODE
//! also tracks reaction extents. The sampled extents are converted to exact
//! rationals and define the target c + M·e, which must then be reachable.

use crnkit::continuous::segment::replay;
use crnkit::continuous::{integrate_with, segment_reach, OdeOptions, SegmentOutcome};
use crnkit::linprog::Rational;
use crnkit::parse_crn;
use num::ToPrimitive;

fn with_extent_counters(text: &str) -> String {
    text.lines()
        .enumerate()
        .map(|(j, l)| format!("{l} + E{j}\n"))
        .collect()
}

fn check(text: &str, x0: &[(&str, i64)]) {
    let crn = parse_crn(text).unwrap().crn;
    let aug = parse_crn(&with_extent_counters(text)).unwrap().crn;
    let mut start = vec![0.0; aug.num_species()];
    let mut c = vec![Rational::from_integer(0.into()); crn.num_species()];
    for &(name, v) in x0 {
        start[aug.index_of(name).unwrap()] = v as f64;
        c[crn.index_of(name).unwrap()] = Rational::from_integer(v.into());
    }
    let opts = OdeOptions {
        tol: 1e-10,
        detect_fixpoint: false,
        ..Default::default()
    };
    let traj = integrate_with(&aug, &start, 5.0, &opts).unwrap();
    for t in [0.5, 1.0, 2.0, 5.0] {
        let i = traj.times.iter().position(|&s| s >= t).unwrap_or(traj.times.len() - 1);
        let x = &traj.states[i];
        let extents: Vec<Rational> = (0..crn.reactions().len())
            .map(|j| Rational::from_float(x[aug.index_of(&format!("E{j}")).unwrap()]).unwrap())
            .collect();
        let mut d = c.clone();
        for (j, e) in extents.iter().enumerate() {
            for (s, ds) in d.iter_mut().enumerate() {
                *ds += e * Rational::from_integer(crn.reaction(j).net(s).into());
            }
        }
        for s in 0..crn.num_species() {
            let name = crn.species()[s].as_str();
            let approx = x[aug.index_of(name).unwrap()];
            let exact = d[s].to_f64().unwrap();
            assert!((approx - exact).abs() < 1e-6, "{name} at t={t}: {approx} vs {exact}");
        }
        if d.iter().any(|v| *v < Rational::from_integer(0.into())) {
            continue;
        }
        match segment_reach(&crn, &c, &d, 3) {
            SegmentOutcome::Reachable(w) => assert_eq!(replay(&crn, &c, &w).as_deref(), Some(&d[..])),
            other => panic!("t={t} in\n{text}\n: {other:?}"),
        }
    }
}

#[test]
fn chain_trajectory_is_segment_reachable() {
    check("A -> B\nB -> C", &[("A", 1)]);
}

#[test]
fn binding_with_release_is_segment_reachable() {
    check("A + B -> C\nC -> A", &[("A", 1), ("B", 2)]);
}

#[test]
fn dimer_cycle_is_segment_reachable() {
    check("2A -> B\nB -> C + A", &[("A", 3)]);
}
