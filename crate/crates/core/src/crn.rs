//! Reaction networks, discrete states and the operations that act on them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num::{BigInt, BigRational, Integer, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linprog::{LinearProgram, LpOutcome};

/// Largest stoichiometric coefficient accepted anywhere in a network.
pub const MAX_COEFFICIENT: u64 = i32::MAX as u64;
/// Largest molecule count a state may hold.
pub const MAX_COUNT: u64 = i64::MAX as u64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CrnError {
    #[error("invalid species name `{0}`")]
    InvalidSpeciesName(String),
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("rate constant must be positive and finite, got {0}")]
    NonPositiveRate(f64),
    #[error("stoichiometric coefficient exceeds 2^31-1")]
    CoefficientOverflow,
    #[error("molecule count exceeds 2^63-1")]
    CountOverflow,
    #[error("reaction {0} is not applicable")]
    NotApplicable(usize),
    #[error("state has {got} entries, network has {expected} species")]
    DimensionMismatch { expected: usize, got: usize },
}

/// A species name: nonempty, no whitespace, does not start with a digit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Species(String);

impl Species {
    pub fn new(name: impl Into<String>) -> Result<Self, CrnError> {
        let name = name.into();
        if is_valid_name(&name) {
            Ok(Species(name))
        } else {
            Err(CrnError::InvalidSpeciesName(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Species {
    type Error = CrnError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Species::new(s)
    }
}

impl From<Species> for String {
    fn from(s: Species) -> String {
        s.0
    }
}

impl fmt::Display for Species {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub(crate) fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '\'' | '.' | '^')
}

pub fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if !c.is_ascii_digit() && is_name_char(c) => chars.all(is_name_char),
        _ => false,
    }
}

/// Returns `base` if it is not taken, otherwise `base_1`, `base_2`, ...
pub fn fresh_name(base: &str, taken: &BTreeSet<String>) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (1..)
        .map(|i| format!("{base}_{i}"))
        .find(|n| !taken.contains(n))
        .expect("unbounded suffix search")
}

/// Sparse multiset over species indices, sorted by index with no zero entries.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Multiset(Vec<(usize, u32)>);

impl Multiset {
    pub fn empty() -> Self {
        Multiset(Vec::new())
    }

    /// Builds a multiset, merging repeated indices.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, u64)>) -> Result<Self, CrnError> {
        let mut acc: BTreeMap<usize, u64> = BTreeMap::new();
        for (i, n) in pairs {
            let e = acc.entry(i).or_default();
            *e = e.checked_add(n).ok_or(CrnError::CoefficientOverflow)?;
            if *e > MAX_COEFFICIENT {
                return Err(CrnError::CoefficientOverflow);
            }
        }
        Ok(Multiset(
            acc.into_iter()
                .filter(|&(_, n)| n > 0)
                .map(|(i, n)| (i, n as u32))
                .collect(),
        ))
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.0.iter().copied()
    }

    pub fn get(&self, species: usize) -> u32 {
        self.0
            .binary_search_by_key(&species, |&(i, _)| i)
            .map(|k| self.0[k].1)
            .unwrap_or(0)
    }

    /// Cardinality ‖r‖.
    pub fn size(&self) -> u64 {
        self.0.iter().map(|&(_, n)| n as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn species(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().map(|&(i, _)| i)
    }

    fn remap(&self, map: &[usize]) -> Multiset {
        let mut v: Vec<(usize, u32)> = self.0.iter().map(|&(i, n)| (map[i], n)).collect();
        v.sort_unstable();
        Multiset(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reaction {
    reactants: Multiset,
    products: Multiset,
    rate: f64,
}

impl Reaction {
    pub fn new(reactants: Multiset, products: Multiset, rate: f64) -> Result<Self, CrnError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(CrnError::NonPositiveRate(rate));
        }
        Ok(Reaction {
            reactants,
            products,
            rate,
        })
    }

    pub fn reactants(&self) -> &Multiset {
        &self.reactants
    }

    pub fn products(&self) -> &Multiset {
        &self.products
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// r = p: firing leaves every state unchanged.
    pub fn is_mute(&self) -> bool {
        self.reactants == self.products
    }

    /// ‖r‖, the number of reactant molecules.
    pub fn order(&self) -> u64 {
        self.reactants.size()
    }

    pub fn is_unimolecular(&self) -> bool {
        self.order() == 1
    }

    pub fn is_bimolecular(&self) -> bool {
        self.order() == 2
    }

    /// Some species is both consumed and produced.
    pub fn is_catalyst_like(&self) -> bool {
        self.reactants.species().any(|x| self.products.get(x) > 0)
    }

    /// Net change p(X) - r(X) for species `x`.
    pub fn net(&self, x: usize) -> i64 {
        self.products.get(x) as i64 - self.reactants.get(x) as i64
    }

    pub fn applicable(&self, c: &State) -> bool {
        self.reactants.iter().all(|(x, n)| c.0[x] >= n as u64)
    }
}

/// Species-indexed vector of molecule counts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct State(pub Vec<u64>);

impl State {
    pub fn zeros(n: usize) -> Self {
        State(vec![0; n])
    }

    pub fn counts(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Cardinality ‖c‖.
    pub fn norm(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&n| n == 0)
    }

    pub fn get(&self, x: usize) -> u64 {
        self.0[x]
    }

    /// Entrywise ≤.
    pub fn le(&self, other: &State) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn dot(&self, weights: &[u64]) -> u128 {
        self.0
            .iter()
            .zip(weights)
            .map(|(&a, &w)| a as u128 * w as u128)
            .sum()
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(i, _)| i)
    }
}

/// A chemical reaction network (Λ, R). Species are kept in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Crn {
    species: Vec<Species>,
    reactions: Vec<Reaction>,
}

/// Name-based construction; `build` sorts species and resolves indices.
#[derive(Debug, Clone, Default)]
pub struct CrnBuilder {
    species: BTreeSet<String>,
    reactions: Vec<(Vec<(String, u64)>, Vec<(String, u64)>, f64)>,
}

impl CrnBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn species(&mut self, name: impl Into<String>) -> &mut Self {
        self.species.insert(name.into());
        self
    }

    pub fn reaction<S: AsRef<str>>(
        &mut self,
        reactants: &[(S, u64)],
        products: &[(S, u64)],
        rate: f64,
    ) -> &mut Self {
        let conv = |side: &[(S, u64)]| {
            side.iter()
                .map(|(s, n)| (s.as_ref().to_string(), *n))
                .collect::<Vec<_>>()
        };
        let (r, p) = (conv(reactants), conv(products));
        for (s, _) in r.iter().chain(&p) {
            self.species.insert(s.clone());
        }
        self.reactions.push((r, p, rate));
        self
    }

    pub fn names(&self) -> &BTreeSet<String> {
        &self.species
    }

    pub fn build(&self) -> Result<Crn, CrnError> {
        let species = self
            .species
            .iter()
            .map(|s| Species::new(s.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let index: BTreeMap<&str, usize> = self
            .species
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let side = |v: &[(String, u64)]| Multiset::from_pairs(v.iter().map(|(s, n)| (index[s.as_str()], *n)));
        let reactions = self
            .reactions
            .iter()
            .map(|(r, p, k)| Reaction::new(side(r)?, side(p)?, *k))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Crn { species, reactions })
    }
}

impl Crn {
    /// Builds a network from species names (in any order) and index-based reactions
    /// referring to that order.
    pub fn from_parts(names: &[String], reactions: &[Reaction]) -> Result<Crn, CrnError> {
        let mut order: Vec<usize> = (0..names.len()).collect();
        order.sort_by(|&a, &b| names[a].cmp(&names[b]));
        let mut map = vec![0; names.len()];
        for (new, &old) in order.iter().enumerate() {
            map[old] = new;
        }
        let species = order
            .iter()
            .map(|&i| Species::new(names[i].clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let reactions = reactions
            .iter()
            .map(|r| Reaction {
                reactants: r.reactants.remap(&map),
                products: r.products.remap(&map),
                rate: r.rate,
            })
            .collect();
        Ok(Crn { species, reactions })
    }

    pub fn species(&self) -> &[Species] {
        &self.species
    }

    pub fn species_names(&self) -> Vec<String> {
        self.species.iter().map(|s| s.0.clone()).collect()
    }

    pub fn num_species(&self) -> usize {
        self.species.len()
    }

    pub fn reactions(&self) -> &[Reaction] {
        &self.reactions
    }

    pub fn reaction(&self, j: usize) -> &Reaction {
        &self.reactions[j]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.species
            .binary_search_by(|s| s.0.as_str().cmp(name))
            .ok()
    }

    pub fn require(&self, name: &str) -> Result<usize, CrnError> {
        self.index_of(name)
            .ok_or_else(|| CrnError::UnknownSpecies(name.to_string()))
    }

    pub fn zero_state(&self) -> State {
        State::zeros(self.num_species())
    }

    /// State from `(name, count)` pairs; unnamed species are zero.
    pub fn state<S: AsRef<str>>(&self, terms: &[(S, u64)]) -> Result<State, CrnError> {
        let mut c = self.zero_state();
        for (name, n) in terms {
            let i = self.require(name.as_ref())?;
            c.0[i] = c.0[i].checked_add(*n).ok_or(CrnError::CountOverflow)?;
            if c.0[i] > MAX_COUNT {
                return Err(CrnError::CountOverflow);
            }
        }
        Ok(c)
    }

    /// Parses an additive state such as `A + 2C` (or `0`).
    pub fn parse_state(&self, text: &str) -> Result<State, crate::format::ParseError> {
        crate::format::parse_state(self, text)
    }

    pub fn format_state(&self, c: &State) -> String {
        let terms: Vec<String> = c
            .support()
            .map(|i| format_term(c.0[i], self.species[i].as_str()))
            .collect();
        if terms.is_empty() {
            "0".to_string()
        } else {
            terms.join(" + ")
        }
    }

    pub fn format_multiset(&self, m: &Multiset) -> String {
        if m.is_empty() {
            return "0".to_string();
        }
        m.iter()
            .map(|(i, n)| format_term(n as u64, self.species[i].as_str()))
            .collect::<Vec<_>>()
            .join(" + ")
    }

    pub fn format_reaction(&self, j: usize) -> String {
        let r = &self.reactions[j];
        format!(
            "{} -> {}",
            self.format_multiset(&r.reactants),
            self.format_multiset(&r.products)
        )
    }

    pub fn check_state(&self, c: &State) -> Result<(), CrnError> {
        if c.len() != self.num_species() {
            return Err(CrnError::DimensionMismatch {
                expected: self.num_species(),
                got: c.len(),
            });
        }
        Ok(())
    }

    pub fn applicable(&self, c: &State, j: usize) -> bool {
        self.reactions[j].applicable(c)
    }

    /// c - r + p for an applicable reaction.
    pub fn apply(&self, c: &State, j: usize) -> Result<State, CrnError> {
        let rx = &self.reactions[j];
        if !rx.applicable(c) {
            return Err(CrnError::NotApplicable(j));
        }
        let mut next = c.clone();
        for (x, n) in rx.reactants.iter() {
            next.0[x] -= n as u64;
        }
        for (x, n) in rx.products.iter() {
            let v = next.0[x]
                .checked_add(n as u64)
                .filter(|&v| v <= MAX_COUNT)
                .ok_or(CrnError::CountOverflow)?;
            next.0[x] = v;
        }
        Ok(next)
    }

    /// Applies reaction `j` in place. Caller guarantees applicability and
    /// that no count overflows.
    pub fn fire_in_place(&self, c: &mut State, j: usize) {
        let rx = &self.reactions[j];
        for (x, n) in rx.reactants.iter() {
            c.0[x] -= n as u64;
        }
        for (x, n) in rx.products.iter() {
            c.0[x] += n as u64;
        }
    }

    /// No non-mute reaction is applicable.
    pub fn is_terminal(&self, c: &State) -> bool {
        self.reactions
            .iter()
            .all(|r| r.is_mute() || !r.applicable(c))
    }

    pub fn stoichiometry(&self) -> StoichMatrix {
        let (rows, cols) = (self.num_species(), self.reactions.len());
        let mut data = vec![0i64; rows * cols];
        for (j, r) in self.reactions.iter().enumerate() {
            for (x, n) in r.reactants.iter() {
                data[x * cols + j] -= n as i64;
            }
            for (x, n) in r.products.iter() {
                data[x * cols + j] += n as i64;
            }
        }
        StoichMatrix { rows, cols, data }
    }

    /// A strictly positive integer vector v with vᵀM = 0, if the network is
    /// mass-conserving.
    ///
    /// Solved exactly over the rationals: v = 1 + w with w ≥ 0 and
    /// Mᵀw = -Mᵀ1, minimising Σw, then scaled to coprime integers.
    pub fn conservation_vector(&self) -> Option<Vec<u64>> {
        let m = self.stoichiometry();
        let n = self.num_species();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for j in 0..m.cols {
            let col: Vec<BigRational> = (0..n).map(|x| BigRational::from_integer(m.get(x, j).into())).collect();
            let s: BigRational = col.iter().cloned().sum();
            if col.iter().all(|q| q.is_zero()) {
                continue;
            }
            rows.push(col);
            rhs.push(-s);
        }
        let cost = vec![-BigRational::one(); n];
        let lp = LinearProgram::new(rows, rhs, n).maximize(cost);
        let w = match lp.solve() {
            LpOutcome::Optimal(w) | LpOutcome::Unbounded(w) => w,
            LpOutcome::Infeasible => return None,
        };
        let v: Vec<BigRational> = w.into_iter().map(|q| q + BigRational::one()).collect();
        Some(to_coprime_integers(&v))
    }

    /// Replaces every catalyst-like reaction (r, p) by (r, Q) and (Q, p) through
    /// a fresh species Q.
    pub fn split_catalysts(&self) -> SplitCrn {
        let mut names: BTreeSet<String> = self.species_names().into_iter().collect();
        let mut all_names = self.species_names();
        let mut reactions = Vec::new();
        let mut intermediates = Vec::new();
        for (j, r) in self.reactions.iter().enumerate() {
            if !r.is_catalyst_like() {
                reactions.push(r.clone());
                continue;
            }
            let q = fresh_name(&format!("Q_{j}"), &names);
            names.insert(q.clone());
            let qi = all_names.len();
            all_names.push(q.clone());
            let single = Multiset(vec![(qi, 1)]);
            reactions.push(Reaction {
                reactants: r.reactants.clone(),
                products: single.clone(),
                rate: r.rate,
            });
            reactions.push(Reaction {
                reactants: single,
                products: r.products.clone(),
                rate: r.rate,
            });
            intermediates.push(q);
        }
        let crn = Crn::from_parts(&all_names, &reactions).expect("fresh names are valid");
        let intermediates = intermediates
            .iter()
            .map(|q| crn.index_of(q).expect("intermediate present"))
            .collect();
        SplitCrn { crn, intermediates }
    }

    /// Re-indexes a state of `self` into `other` by species name. Species
    /// missing from `other` must have zero count.
    pub fn embed_state(&self, c: &State, other: &Crn) -> Result<State, CrnError> {
        let mut out = other.zero_state();
        for i in c.support() {
            let j = other.require(self.species[i].as_str())?;
            out.0[j] = c.0[i];
        }
        Ok(out)
    }
}

impl FromStr for Crn {
    type Err = crate::format::ParseError;

    /// Parses `.crn` text and keeps only the network.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        crate::format::parse_crn(s).map(|f| f.crn)
    }
}

/// Result of [`Crn::split_catalysts`]: the transformed network and the indices
/// of the fresh intermediate species in it.
#[derive(Debug, Clone)]
pub struct SplitCrn {
    pub crn: Crn,
    pub intermediates: Vec<usize>,
}

fn format_term(n: u64, name: &str) -> String {
    if n == 1 {
        name.to_string()
    } else {
        format!("{n}{name}")
    }
}

pub(crate) fn to_coprime_integers(v: &[BigRational]) -> Vec<u64> {
    let lcm = v
        .iter()
        .fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
    let ints: Vec<BigInt> = v.iter().map(|q| (q * &lcm).to_integer()).collect();
    let g = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    let g = if g.is_zero() { BigInt::one() } else { g };
    ints.iter()
        .map(|x| (x / &g).abs().to_u64().unwrap_or(u64::MAX))
        .collect()
}

/// Species × reaction matrix of net changes M[X, α] = p(X) - r(X).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StoichMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i64>,
}

impl StoichMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, species: usize, reaction: usize) -> i64 {
        self.data[species * self.cols + reaction]
    }

    pub fn column(&self, reaction: usize) -> Vec<i64> {
        (0..self.rows).map(|x| self.get(x, reaction)).collect()
    }

    /// vᵀM as a row vector over reactions.
    pub fn left_mul(&self, v: &[i64]) -> Vec<i64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|x| v[x] * self.get(x, j)).sum())
            .collect()
    }
}
