//! Continuous-state semantics: mass-action ODEs, rate-independent
//! reachability and dual-rail computation.

pub mod dual_rail;
pub mod ode;
pub mod segment;

pub use dual_rail::{dual_rail_eval, DualRailCrc, DualRailError, DualRailValue, EvalMode};
pub use ode::{integrate, integrate_with, ode_rhs, OdeError, OdeOptions, OdeTrajectory};
pub use segment::{segment_reach, straight_line_reach, SegmentOutcome};
