//! Chemical reaction networks as a programming language: discrete, stochastic
//! and continuous semantics, exact reachability, and compilers from counter
//! automata and predicates to networks and from networks to strand-displacement
//! implementations.

pub mod catalog;
pub mod continuous;
pub mod counter;
pub mod crn;
pub mod decide;
pub mod dsd;
pub mod format;
pub mod linprog;
pub mod predicate;
pub mod reach;
pub mod stochastic;

pub use crn::{Crn, CrnBuilder, CrnError, Multiset, Reaction, Species, State, StoichMatrix};
pub use format::{parse_crn, render, render_crn, CrnFile, ParseError, Roles};
