//! Stochastic mass-action semantics and Gillespie direct-method sampling.
//!
//! Runs draw from ChaCha8 seeded with `seed_from_u64(seed)` and stream
//! `run_index`, so batch results do not depend on thread scheduling.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::crn::{Crn, State};
use crate::reach;

pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.3): seed_from_u64(seed), set_stream(run_index)";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StochasticError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("none of the {0} runs reached the target")]
    AllRunsMissed(usize),
    #[error("reachable state space exceeds {0} states; stationary sampling needs a finite space")]
    InfiniteStateSpace(usize),
    #[error("need at least {need} runs, got {got}")]
    TooFewRuns { need: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StochasticConfig {
    pub volume: f64,
    pub seed: u64,
    /// Simulated-time horizon; `f64::INFINITY` for none.
    pub max_time: f64,
    pub max_steps: u64,
    /// Multiplier for the stationary sampling time.
    pub stationary_factor: f64,
    /// ‖c‖/v above which a warning is logged.
    pub density_cap: f64,
    /// Keep every event and state in the trajectory.
    pub record: bool,
}

impl Default for StochasticConfig {
    fn default() -> Self {
        StochasticConfig {
            volume: 1.0,
            seed: 0,
            max_time: f64::INFINITY,
            max_steps: 10_000_000,
            stationary_factor: 100.0,
            density_cap: 1e6,
            record: true,
        }
    }
}

impl StochasticConfig {
    pub fn validate(&self) -> Result<(), StochasticError> {
        if !(self.volume.is_finite() && self.volume > 0.0) {
            return Err(StochasticError::InvalidConfig("volume must be positive".into()));
        }
        if self.max_time.is_nan() || self.max_time < 0.0 {
            return Err(StochasticError::InvalidConfig("max_time must be nonnegative".into()));
        }
        if self.max_steps == 0 {
            return Err(StochasticError::InvalidConfig("max_steps must be positive".into()));
        }
        if !(self.stationary_factor > 0.0) {
            return Err(StochasticError::InvalidConfig("stationary_factor must be positive".into()));
        }
        Ok(())
    }
}

/// Generator for run `run` of a batch seeded with `seed`.
pub fn rng_for(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// ρ(c, α) = k / v^(‖r‖-1) · Π_X c(X)(c(X)-1)···(c(X)-r(X)+1).
pub fn propensity(crn: &Crn, c: &State, j: usize, volume: f64) -> f64 {
    let r = crn.reaction(j);
    let mut p = r.rate();
    for (x, n) in r.reactants().iter() {
        let cx = c.get(x);
        if cx < n as u64 {
            return 0.0;
        }
        for i in 0..n as u64 {
            p *= (cx - i) as f64;
        }
    }
    let order = r.order() as i32;
    if order != 1 {
        p /= volume.powi(order - 1);
    }
    p
}

/// ρ(c, N), mute reactions included.
pub fn total_rate(crn: &Crn, c: &State, volume: f64) -> f64 {
    (0..crn.reactions().len()).map(|j| propensity(crn, c, j, volume)).sum()
}

/// One direct-method step from `c`: waiting time and reaction index, or
/// `None` when no reaction can occur.
pub fn sample_step<R: Rng>(crn: &Crn, c: &State, volume: f64, rng: &mut R) -> Option<(f64, usize)> {
    let props: Vec<f64> = (0..crn.reactions().len()).map(|j| propensity(crn, c, j, volume)).collect();
    let total: f64 = props.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let dt: f64 = Distribution::<f64>::sample(&Exp1, rng) / total;
    Some((dt, choose(&props, total, rng)))
}

fn choose<R: Rng>(props: &[f64], total: f64, rng: &mut R) -> usize {
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (j, &p) in props.iter().enumerate() {
        if p > 0.0 {
            last = j;
            if u < p {
                return j;
            }
            u -= p;
        }
    }
    last
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    /// Only mute reactions (or none) are applicable.
    Terminal,
    MaxTime,
    MaxSteps,
    /// A caller-supplied condition became true.
    Predicate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub reaction: usize,
    pub mute: bool,
    pub state: State,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub initial: State,
    /// Every firing, when recording is on.
    pub events: Vec<Event>,
    pub final_state: State,
    pub final_time: f64,
    pub steps: u64,
    pub stop: StopReason,
}

impl Trajectory {
    pub fn terminated(&self) -> bool {
        self.stop == StopReason::Terminal
    }

    /// State at time `t` (requires recorded events).
    pub fn state_at(&self, t: f64) -> &State {
        match self.events.iter().rposition(|e| e.time <= t) {
            Some(i) => &self.events[i].state,
            None => &self.initial,
        }
    }

    pub fn to_csv(&self, crn: &Crn) -> String {
        let mut out = String::from("time");
        for s in crn.species() {
            let _ = write!(out, ",{s}");
        }
        out.push('\n');
        let mut row = |t: f64, c: &State| {
            let _ = write!(out, "{t}");
            for n in c.counts() {
                let _ = write!(out, ",{n}");
            }
            out.push('\n');
        };
        row(0.0, &self.initial);
        if self.events.is_empty() && self.steps > 0 {
            row(self.final_time, &self.final_state);
        }
        for e in &self.events {
            row(e.time, &e.state);
        }
        out
    }

    pub fn to_json(&self, crn: &Crn) -> Value {
        json!({
            "species": crn.species_names(),
            "initial": self.initial.counts(),
            "events": self.events.iter().map(|e| json!({
                "time": e.time, "reaction": e.reaction, "mute": e.mute, "state": e.state.counts(),
            })).collect::<Vec<_>>(),
            "final_state": self.final_state.counts(),
            "final_time": self.final_time,
            "steps": self.steps,
            "stop": self.stop,
        })
    }
}

/// Per-event decision of an observer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Reactions whose propensity may change when reaction j fires.
fn dependency_graph(crn: &Crn) -> Vec<Vec<usize>> {
    let n = crn.num_species();
    let mut by_species: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, r) in crn.reactions().iter().enumerate() {
        for x in r.reactants().species() {
            by_species[x].push(j);
        }
    }
    (0..crn.reactions().len())
        .map(|j| {
            let r = crn.reaction(j);
            let mut deps: Vec<usize> = (0..n)
                .filter(|&x| r.net(x) != 0)
                .flat_map(|x| by_species[x].iter().copied())
                .collect();
            deps.sort_unstable();
            deps.dedup();
            deps
        })
        .collect()
}

/// Direct-method simulation. `observe` sees the state after every firing
/// (and the initial state, with reaction `None`) and may stop the run.
pub fn simulate_observed(
    crn: &Crn,
    init: &State,
    config: &StochasticConfig,
    run: u64,
    mut observe: impl FnMut(&State, f64, Option<usize>) -> Control,
) -> Trajectory {
    let v = config.volume;
    if init.norm() as f64 / v > config.density_cap {
        log::warn!("initial density {} exceeds cap {}", init.norm() as f64 / v, config.density_cap);
    }
    let mut rng = rng_for(config.seed, run);
    let deps = dependency_graph(crn);
    let mut c = init.clone();
    let mut props: Vec<f64> = (0..crn.reactions().len()).map(|j| propensity(crn, &c, j, v)).collect();
    let mute: Vec<bool> = crn.reactions().iter().map(|r| r.is_mute()).collect();
    let mut t = 0.0;
    let mut steps = 0u64;
    let mut events = Vec::new();

    let finish = |c: State, t: f64, steps: u64, stop: StopReason, events: Vec<Event>| Trajectory {
        initial: init.clone(),
        events,
        final_state: c,
        final_time: t,
        steps,
        stop,
    };

    if observe(&c, t, None) == Control::Stop {
        return finish(c, t, steps, StopReason::Predicate, events);
    }
    loop {
        let live = props.iter().zip(&mute).any(|(&p, &m)| p > 0.0 && !m);
        if !live {
            return finish(c, t, steps, StopReason::Terminal, events);
        }
        if steps >= config.max_steps {
            return finish(c, t, steps, StopReason::MaxSteps, events);
        }
        let total: f64 = props.iter().sum();
        let dt: f64 = Distribution::<f64>::sample(&Exp1, &mut rng) / total;
        if t + dt > config.max_time {
            return finish(c, config.max_time, steps, StopReason::MaxTime, events);
        }
        t += dt;
        let j = choose(&props, total, &mut rng);
        crn.fire_in_place(&mut c, j);
        steps += 1;
        for &d in &deps[j] {
            props[d] = propensity(crn, &c, d, v);
        }
        if config.record {
            events.push(Event {
                time: t,
                reaction: j,
                mute: mute[j],
                state: c.clone(),
            });
        }
        if observe(&c, t, Some(j)) == Control::Stop {
            return finish(c, t, steps, StopReason::Predicate, events);
        }
    }
}

pub fn simulate(crn: &Crn, init: &State, config: &StochasticConfig, run: u64) -> Trajectory {
    simulate_observed(crn, init, config, run, |_, _, _| Control::Continue)
}

/// Runs until `pred` holds, the state is terminal, or a limit is hit.
pub fn simulate_until(
    crn: &Crn,
    init: &State,
    config: &StochasticConfig,
    run: u64,
    pred: impl Fn(&State) -> bool,
) -> Trajectory {
    simulate_observed(crn, init, config, run, |c, _, _| {
        if pred(c) {
            Control::Stop
        } else {
            Control::Continue
        }
    })
}

/// `n_runs` independent trajectories, in run-index order.
pub fn simulate_batch(crn: &Crn, init: &State, config: &StochasticConfig, n_runs: usize) -> Vec<Trajectory> {
    (0..n_runs as u64)
        .into_par_iter()
        .map(|i| simulate(crn, init, config, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_hit: usize,
    pub n_miss: usize,
}

/// Monte-Carlo mean hitting time of `pred`. Runs that stop without hitting are
/// counted in `n_miss` and excluded from the mean.
pub fn estimate_time_to(
    crn: &Crn,
    init: &State,
    pred: impl Fn(&State) -> bool + Sync,
    config: &StochasticConfig,
    n_runs: usize,
) -> Result<TimeEstimate, StochasticError> {
    config.validate()?;
    if n_runs < 2 {
        return Err(StochasticError::TooFewRuns { need: 2, got: n_runs });
    }
    let cfg = StochasticConfig {
        record: false,
        ..config.clone()
    };
    let times: Vec<Option<f64>> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| {
            let tr = simulate_until(crn, init, &cfg, i, &pred);
            (tr.stop == StopReason::Predicate).then_some(tr.final_time)
        })
        .collect();
    let hits: Vec<f64> = times.iter().flatten().copied().collect();
    if hits.is_empty() {
        return Err(StochasticError::AllRunsMissed(n_runs));
    }
    let (mean, stderr) = mean_stderr(&hits);
    Ok(TimeEstimate {
        mean,
        stderr,
        n_hit: hits.len(),
        n_miss: n_runs - hits.len(),
    })
}

pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SampleTime {
    At(f64),
    /// Sample at factor · ‖init‖ / (min positive propensity at init).
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    pub time: f64,
    /// True when `time` comes from the stationary heuristic.
    pub heuristic: bool,
    pub n_runs: usize,
    pub frequencies: BTreeMap<State, f64>,
}

impl EmpiricalDistribution {
    pub fn frequency(&self, c: &State) -> f64 {
        self.frequencies.get(c).copied().unwrap_or(0.0)
    }
}

/// Sampling time used for stationary estimates.
pub fn stationary_time(crn: &Crn, init: &State, config: &StochasticConfig) -> f64 {
    let min = (0..crn.reactions().len())
        .map(|j| propensity(crn, init, j, config.volume))
        .filter(|&p| p > 0.0)
        .fold(f64::INFINITY, f64::min);
    if min.is_finite() {
        config.stationary_factor * init.norm().max(1) as f64 / min
    } else {
        0.0
    }
}

pub fn empirical_distribution(
    crn: &Crn,
    init: &State,
    when: SampleTime,
    config: &StochasticConfig,
    n_runs: usize,
) -> Result<EmpiricalDistribution, StochasticError> {
    config.validate()?;
    if n_runs == 0 {
        return Err(StochasticError::TooFewRuns { need: 1, got: 0 });
    }
    let (time, heuristic) = match when {
        SampleTime::At(t) if t >= 0.0 => (t, false),
        SampleTime::At(t) => return Err(StochasticError::InvalidConfig(format!("negative time {t}"))),
        SampleTime::Stationary => {
            let closure = reach::post(crn, init, reach::DEFAULT_BOUND);
            if closure.truncated {
                return Err(StochasticError::InfiniteStateSpace(reach::DEFAULT_BOUND));
            }
            (stationary_time(crn, init, config), true)
        }
    };
    let cfg = StochasticConfig {
        max_time: time,
        max_steps: u64::MAX,
        record: false,
        ..config.clone()
    };
    let finals: Vec<State> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| simulate(crn, init, &cfg, i).final_state)
        .collect();
    let mut counts: BTreeMap<State, usize> = BTreeMap::new();
    for s in finals {
        *counts.entry(s).or_default() += 1;
    }
    let frequencies = counts
        .into_iter()
        .map(|(s, n)| (s, n as f64 / n_runs as f64))
        .collect();
    Ok(EmpiricalDistribution {
        time,
        heuristic,
        n_runs,
        frequencies,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn propensity_values() {
        let crn: Crn = "A + B -> C\n2A -> C\nA -> B [k=2]".parse().unwrap();
        let c = crn.state(&[("A", 2), ("B", 3)]).unwrap();
        assert_eq!(propensity(&crn, &c, 0, 1.0), 6.0);
        let c4 = crn.state(&[("A", 4)]).unwrap();
        assert_eq!(propensity(&crn, &c4, 1, 1.0), 12.0);
        let c7 = crn.state(&[("A", 7)]).unwrap();
        assert_eq!(propensity(&crn, &c7, 2, 1.0), 14.0);
        assert_eq!(propensity(&crn, &c7, 2, 5.0), 14.0);
        assert_eq!(propensity(&crn, &c7, 1, 2.0), 21.0);
        assert_eq!(total_rate(&crn, &crn.zero_state(), 1.0), 0.0);
    }

    #[test]
    fn next_reaction_share() {
        let crn: Crn = "A + B -> C\n2A -> D".parse().unwrap();
        let c = crn.state(&[("A", 3), ("B", 2)]).unwrap();
        let share = propensity(&crn, &c, 0, 1.0) / total_rate(&crn, &c, 1.0);
        assert_eq!(share, 0.5);
    }

    #[test]
    fn leader_election_ends_with_one_leader() {
        let crn = crate::catalog::leader_election();
        let cfg = StochasticConfig {
            volume: 100.0,
            ..Default::default()
        };
        let tr = simulate(&crn, &crn.state(&[("L", 100)]).unwrap(), &cfg, 0);
        assert!(tr.terminated());
        assert_eq!(tr.final_state, crn.state(&[("L", 1)]).unwrap());
        assert_eq!(tr.events.len(), 99);
    }

    #[test]
    fn terminal_init_has_no_events() {
        let crn: Crn = "A -> B".parse().unwrap();
        let tr = simulate(&crn, &crn.state(&[("B", 3)]).unwrap(), &Default::default(), 0);
        assert!(tr.events.is_empty());
        assert!(tr.terminated());
    }

    #[test]
    fn mute_reactions_fire_but_do_not_keep_runs_alive() {
        let crn: Crn = "A -> A\nA -> B".parse().unwrap();
        let tr = simulate(&crn, &crn.state(&[("A", 1)]).unwrap(), &Default::default(), 3);
        assert!(tr.terminated());
        assert_eq!(tr.events.last().unwrap().reaction, 1);
        assert!(tr.events.iter().filter(|e| e.reaction == 0).all(|e| e.mute));
        let only_mute: Crn = "A -> A".parse().unwrap();
        let tr = simulate(&only_mute, &only_mute.state(&[("A", 1)]).unwrap(), &Default::default(), 0);
        assert!(tr.terminated() && tr.events.is_empty());
    }

    #[test]
    fn limits_stop_runs() {
        let crn: Crn = "0 -> A".parse().unwrap();
        let cfg = StochasticConfig {
            max_steps: 5,
            ..Default::default()
        };
        let tr = simulate(&crn, &crn.zero_state(), &cfg, 0);
        assert_eq!(tr.stop, StopReason::MaxSteps);
        assert_eq!(tr.final_state.get(0), 5);
        let cfg = StochasticConfig {
            max_time: 2.0,
            ..Default::default()
        };
        let tr = simulate(&crn, &crn.zero_state(), &cfg, 0);
        assert_eq!(tr.stop, StopReason::MaxTime);
        assert_eq!(tr.final_time, 2.0);
    }

    #[test]
    fn hitting_time_edge_cases() {
        let crn: Crn = "A -> B".parse().unwrap();
        let init = crn.state(&[("A", 2)]).unwrap();
        let est = estimate_time_to(&crn, &init, |c| c.get(0) == 2, &Default::default(), 10).unwrap();
        assert_eq!(est.mean, 0.0);
        let err = estimate_time_to(&crn, &init, |c| c.get(0) == 5, &Default::default(), 10).unwrap_err();
        assert_eq!(err, StochasticError::AllRunsMissed(10));
    }

    #[test]
    fn distributions() {
        let crn: Crn = "A -> B".parse().unwrap();
        let init = crn.state(&[("A", 1)]).unwrap();
        let d = empirical_distribution(&crn, &init, SampleTime::At(0.0), &Default::default(), 50).unwrap();
        assert_eq!(d.frequency(&init), 1.0);
        let d = empirical_distribution(&crn, &init, SampleTime::At(1e3), &Default::default(), 50).unwrap();
        assert!((d.frequency(&crn.state(&[("B", 1)]).unwrap()) - 1.0).abs() < 1e-12);
        let src: Crn = "0 -> A".parse().unwrap();
        assert!(matches!(
            empirical_distribution(&src, &src.zero_state(), SampleTime::Stationary, &Default::default(), 5),
            Err(StochasticError::InfiniteStateSpace(_))
        ));
    }

    #[test]
    fn two_state_chain_is_balanced() {
        let crn: Crn = "A -> B\nB -> A".parse().unwrap();
        let init = crn.state(&[("A", 1)]).unwrap();
        let d = empirical_distribution(&crn, &init, SampleTime::Stationary, &Default::default(), 2000).unwrap();
        assert!(d.heuristic);
        assert!((d.frequency(&init) - 0.5).abs() < 0.05);
        let total: f64 = d.frequencies.values().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn waiting_times_are_exponential() {
        let crn: Crn = "A + B -> C\n2A -> D".parse().unwrap();
        let c = crn.state(&[("A", 3), ("B", 2)]).unwrap();
        let total = total_rate(&crn, &c, 1.0);
        let mut rng = rng_for(7, 0);
        let dts: Vec<f64> = (0..10_000).map(|_| sample_step(&crn, &c, 1.0, &mut rng).unwrap().0).collect();
        let (mean, se) = mean_stderr(&dts);
        assert!((mean - 1.0 / total).abs() < 3.0 * se);
    }

    #[test]
    fn csv_export() {
        let crn: Crn = "A -> B".parse().unwrap();
        let tr = simulate(&crn, &crn.state(&[("A", 1)]).unwrap(), &Default::default(), 0);
        let csv = tr.to_csv(&crn);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "time,A,B");
        assert_eq!(lines[1], "0,1,0");
        assert!(lines[2].ends_with(",0,1"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn volume_scaling(a in 0u64..20, b in 0u64..20, v in 0.1f64..100.0) {
            let crn: Crn = "A + B -> C\nA -> B".parse().unwrap();
            let c = crn.state(&[("A", a), ("B", b)]).unwrap();
            let p1 = propensity(&crn, &c, 0, v);
            let p2 = propensity(&crn, &c, 0, 2.0 * v);
            prop_assert!((p2 - p1 / 2.0).abs() <= 1e-12 * p1.max(1.0));
            prop_assert_eq!(propensity(&crn, &c, 1, v), propensity(&crn, &c, 1, 2.0 * v));
        }

        #[test]
        fn replay_and_determinism(seed in 0u64..1000, a in 1u64..30, b in 0u64..30) {
            let crn: Crn = "A + B -> 2B\nB -> A\n2A -> A + C\nC -> C".parse().unwrap();
            let init = crn.state(&[("A", a), ("B", b)]).unwrap();
            let cfg = StochasticConfig { seed, max_steps: 500, ..Default::default() };
            let tr = simulate(&crn, &init, &cfg, 1);
            prop_assert_eq!(&tr, &simulate(&crn, &init, &cfg, 1));
            let mut c = init.clone();
            let mut last = 0.0;
            for e in &tr.events {
                prop_assert!(e.time > last);
                last = e.time;
                c = crn.apply(&c, e.reaction).unwrap();
                prop_assert_eq!(&c, &e.state);
            }
            prop_assert_eq!(&c, &tr.final_state);
        }
    }
}
