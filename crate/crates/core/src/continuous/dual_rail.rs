//! Dual-rail function computation: each value is a pair (plus, minus) of
//! species and represents plus − minus.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ode::{integrate_with, OdeError, OdeOptions};
use crate::crn::{Crn, State};
use crate::decide::{crc_verdict_from, Crc, DecideError};
use crate::reach::DEFAULT_BOUND;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DualRailError {
    #[error("expected {expected} input values, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("discrete mode needs nonnegative integral rails, got {0}")]
    NonIntegral(f64),
    #[error("input does not stabilize an output{}", .witness.as_ref().map(|w| format!(" (from {w})")).unwrap_or_default())]
    NotStabilizing { witness: Option<String> },
    #[error("reachable set exceeds the bound of {0} states")]
    Truncated(usize),
    #[error("ODE did not reach a fixpoint by t = {0}")]
    NoFixpoint(f64),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Decide(#[from] DecideError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualRailValue {
    pub plus: f64,
    pub minus: f64,
}

impl DualRailValue {
    pub fn new(plus: f64, minus: f64) -> Self {
        assert!(plus >= 0.0 && minus >= 0.0, "rails must be nonnegative");
        DualRailValue { plus, minus }
    }

    /// (max(v, 0), max(−v, 0)).
    pub fn from_int(v: i64) -> Self {
        DualRailValue::new(v.max(0) as f64, (-v).max(0) as f64)
    }

    pub fn value(&self) -> f64 {
        self.plus - self.minus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMode {
    Discrete,
    Continuous,
}

/// A CRC whose inputs and output are (plus, minus) species pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct DualRailCrc {
    crc: Crc,
    inputs: Vec<(usize, usize)>,
    output: (usize, usize),
}

impl DualRailCrc {
    pub fn new(crn: Crn, inputs: &[(&str, &str)], output: (&str, &str)) -> Result<Self, DecideError> {
        let flat: Vec<&str> = inputs.iter().flat_map(|&(p, m)| [p, m]).collect();
        let crc = Crc::new(crn, &flat, &[output.0, output.1])?;
        let ids = crc.input_species().to_vec();
        let out = crc.output_species().to_vec();
        Ok(DualRailCrc {
            inputs: ids.chunks(2).map(|p| (p[0], p[1])).collect(),
            output: (out[0], out[1]),
            crc,
        })
    }

    /// `X⁺ + Y⁺ → Z⁺`, `X⁻ → Y⁺ + Z⁻`, `Y⁻ → X⁺ + Z⁻`.
    pub fn min() -> Self {
        let crn: Crn = "Xp + Yp -> Zp\nXm -> Yp + Zm\nYm -> Xp + Zm".parse().expect("valid");
        DualRailCrc::new(crn, &[("Xp", "Xm"), ("Yp", "Ym")], ("Zp", "Zm")).expect("valid roles")
    }

    /// The min gadget with plus and minus rails exchanged.
    pub fn max() -> Self {
        let crn: Crn = "Xm + Ym -> Zm\nXp -> Ym + Zp\nYp -> Xm + Zp".parse().expect("valid");
        DualRailCrc::new(crn, &[("Xp", "Xm"), ("Yp", "Ym")], ("Zp", "Zm")).expect("valid roles")
    }

    pub fn crc(&self) -> &Crc {
        &self.crc
    }

    pub fn crn(&self) -> &Crn {
        self.crc.crn()
    }

    pub fn inputs(&self) -> &[(usize, usize)] {
        &self.inputs
    }

    pub fn output(&self) -> (usize, usize) {
        self.output
    }

    fn check_arity(&self, values: &[DualRailValue]) -> Result<(), DualRailError> {
        if values.len() != self.inputs.len() {
            return Err(DualRailError::Arity {
                expected: self.inputs.len(),
                got: values.len(),
            });
        }
        Ok(())
    }

    pub fn discrete_state(&self, values: &[DualRailValue]) -> Result<State, DualRailError> {
        self.check_arity(values)?;
        let mut c = self.crn().zero_state();
        for (&(p, m), v) in self.inputs.iter().zip(values) {
            for (x, r) in [(p, v.plus), (m, v.minus)] {
                if r.fract() != 0.0 || r < 0.0 || r > u32::MAX as f64 {
                    return Err(DualRailError::NonIntegral(r));
                }
                c.0[x] += r as u64;
            }
        }
        Ok(c)
    }

    pub fn continuous_state(&self, values: &[DualRailValue]) -> Result<Vec<f64>, DualRailError> {
        self.check_arity(values)?;
        let mut x = vec![0.0; self.crn().num_species()];
        for (&(p, m), v) in self.inputs.iter().zip(values) {
            x[p] += v.plus;
            x[m] += v.minus;
        }
        Ok(x)
    }

    /// (in⁺ − in⁻) + (out⁺ − out⁻) for input `i`.
    pub fn signed_sum(&self, c: &State, i: usize) -> i64 {
        let (p, m) = self.inputs[i];
        let (zp, zm) = self.output;
        c.get(p) as i64 - c.get(m) as i64 + c.get(zp) as i64 - c.get(zm) as i64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub bound: usize,
    pub tol: f64,
    pub t_end: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            bound: DEFAULT_BOUND,
            tol: 1e-9,
            t_end: 1e7,
        }
    }
}

pub fn dual_rail_eval(dr: &DualRailCrc, inputs: &[DualRailValue], mode: EvalMode) -> Result<DualRailValue, DualRailError> {
    dual_rail_eval_with(dr, inputs, mode, &EvalOptions::default())
}

/// Discrete mode requires every reachable state to reach an output-stable
/// state; continuous mode integrates the mass-action ODE to a fixpoint. The
/// output rails are returned as they are, without cancelling.
pub fn dual_rail_eval_with(
    dr: &DualRailCrc,
    inputs: &[DualRailValue],
    mode: EvalMode,
    opts: &EvalOptions,
) -> Result<DualRailValue, DualRailError> {
    match mode {
        EvalMode::Discrete => {
            let c = dr.discrete_state(inputs)?;
            let v = crc_verdict_from(&dr.crc, &c, opts.bound);
            if v.truncated {
                return Err(DualRailError::Truncated(opts.bound));
            }
            match v.output {
                Some(o) => Ok(DualRailValue::new(o[0] as f64, o[1] as f64)),
                None => Err(DualRailError::NotStabilizing {
                    witness: v.witness.map(|w| dr.crn().format_state(&w)),
                }),
            }
        }
        EvalMode::Continuous => {
            let x0 = dr.continuous_state(inputs)?;
            let tr = integrate_with(
                dr.crn(),
                &x0,
                opts.t_end,
                &OdeOptions {
                    tol: opts.tol,
                    ..Default::default()
                },
            )?;
            if !tr.fixpoint {
                return Err(DualRailError::NoFixpoint(opts.t_end));
            }
            let x = tr.final_state();
            Ok(DualRailValue::new(x[dr.output.0], x[dr.output.1]))
        }
    }
}
