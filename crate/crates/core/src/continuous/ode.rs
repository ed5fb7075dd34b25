//! Mass-action ODEs and an adaptive Dormand–Prince 5(4) integrator.

use log::warn;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::crn::Crn;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("t_end and tol must be positive and finite")]
    InvalidArguments,
    #[error("expected {expected} concentrations, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("initial concentrations must be finite and nonnegative")]
    InvalidInitialState,
    #[error("step size underflow at t = {t} (system too stiff for an explicit method)")]
    StepUnderflow { t: f64 },
    #[error("step limit {0} reached")]
    StepLimit(usize),
}

/// d[X]/dt = Σ_α k_α M_{X,α} Π_Y [Y]^{r_α(Y)}.
pub fn ode_rhs(crn: &Crn, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; crn.num_species()];
    rhs_into(crn, x, &mut out);
    out
}

fn rhs_into(crn: &Crn, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for r in crn.reactions() {
        if r.is_mute() {
            continue;
        }
        let flux = r
            .reactants()
            .iter()
            .fold(r.rate(), |acc, (y, n)| acc * x[y].powi(n as i32));
        if flux == 0.0 {
            continue;
        }
        for (y, n) in r.reactants().iter() {
            out[y] -= flux * n as f64;
        }
        for (y, n) in r.products().iter() {
            out[y] += flux * n as f64;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeOptions {
    /// Local error bound (absolute and relative to |x|) and fixpoint threshold.
    /// Steps are controlled to tol/100 so that integration noise near an
    /// equilibrium stays below the fixpoint threshold.
    pub tol: f64,
    pub max_steps: usize,
    /// Stop once ‖rhs‖∞ < tol for this many consecutive accepted steps.
    pub fixpoint_window: usize,
    pub detect_fixpoint: bool,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            tol: 1e-9,
            max_steps: 5_000_000,
            fixpoint_window: 10,
            detect_fixpoint: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Integration stopped early because the right-hand side vanished.
    pub fixpoint: bool,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Number of accepted steps where small negative entries were clipped to 0.
    pub clipped_steps: usize,
}

impl OdeTrajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory holds the initial time")
    }

    pub fn to_csv(&self, crn: &Crn) -> String {
        let mut out = String::from("t");
        for s in crn.species() {
            out.push(',');
            out.push_str(s.as_str());
        }
        out.push('\n');
        for (t, x) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:?}"));
            for v in x {
                out.push_str(&format!(",{v:?}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self, crn: &Crn) -> Value {
        json!({
            "species": crn.species_names(),
            "times": self.times,
            "states": self.states,
            "fixpoint": self.fixpoint,
            "accepted_steps": self.accepted_steps,
            "rejected_steps": self.rejected_steps,
        })
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus embedded fourth-order weights.
const E: [f64; 7] = [
    35.0 / 384.0 - 5179.0 / 57600.0,
    0.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
];

/// Integrates from `x0` over [0, t_end] with default options and the given tolerance.
pub fn integrate(crn: &Crn, x0: &[f64], t_end: f64, tol: f64) -> Result<OdeTrajectory, OdeError> {
    integrate_with(
        crn,
        x0,
        t_end,
        &OdeOptions {
            tol,
            ..Default::default()
        },
    )
}

pub fn integrate_with(crn: &Crn, x0: &[f64], t_end: f64, opts: &OdeOptions) -> Result<OdeTrajectory, OdeError> {
    let n = crn.num_species();
    if x0.len() != n {
        return Err(OdeError::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if !(t_end.is_finite() && t_end > 0.0 && opts.tol.is_finite() && opts.tol > 0.0) {
        return Err(OdeError::InvalidArguments);
    }
    if x0.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(OdeError::InvalidInitialState);
    }
    let tol = opts.tol;
    let step_tol = tol / 100.0;
    let mut traj = OdeTrajectory {
        times: vec![0.0],
        states: vec![x0.to_vec()],
        fixpoint: false,
        accepted_steps: 0,
        rejected_steps: 0,
        clipped_steps: 0,
    };
    let mut y = x0.to_vec();
    let mut k = vec![vec![0.0; n]; 7];
    rhs_into(crn, &y, &mut k[0]);
    let mut quiet = 0;
    let inf_norm = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if opts.detect_fixpoint && inf_norm(&k[0]) == 0.0 {
        // Exactly stationary: nothing will ever change.
        traj.fixpoint = true;
        traj.times.push(t_end);
        traj.states.push(y);
        return Ok(traj);
    }
    let mut t = 0.0;
    let mut h = {
        let (d0, d1) = (inf_norm(&y), inf_norm(&k[0]));
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0.min(t_end)
    };
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    while t < t_end {
        if traj.accepted_steps + traj.rejected_steps >= opts.max_steps {
            return Err(OdeError::StepLimit(opts.max_steps));
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        for s in 1..7 {
            for i in 0..n {
                stage[i] = y[i] + h * (0..s).map(|q| A[s][q] * k[q][i]).sum::<f64>();
            }
            rhs_into(crn, &stage, &mut k[s]);
        }
        // Stage 6 is evaluated at the fifth-order solution (FSAL).
        y_new.copy_from_slice(&stage);
        let err = (0..n)
            .map(|i| {
                let e = h * (0..7).map(|q| E[q] * k[q][i]).sum::<f64>();
                e.abs() / (step_tol + step_tol * y[i].abs().max(y_new[i].abs()))
            })
            .fold(0.0f64, f64::max);
        let negative = y_new.iter().any(|&v| v < -tol);
        if err <= 1.0 && !negative {
            t = if last { t_end } else { t + h };
            let mut clipped = false;
            for v in y_new.iter_mut().filter(|v| **v < 0.0) {
                *v = 0.0;
                clipped = true;
            }
            std::mem::swap(&mut y, &mut y_new);
            if clipped {
                traj.clipped_steps += 1;
                rhs_into(crn, &y, &mut k[0]);
                warn!("clipped negative concentrations at t = {t}");
            } else {
                let (first, rest) = k.split_at_mut(6);
                first[0].copy_from_slice(&rest[0]);
            }
            traj.accepted_steps += 1;
            traj.times.push(t);
            traj.states.push(y.clone());
            if opts.detect_fixpoint {
                if inf_norm(&k[0]) < tol {
                    quiet += 1;
                    if quiet >= opts.fixpoint_window {
                        traj.fixpoint = true;
                        break;
                    }
                } else {
                    quiet = 0;
                }
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h *= factor;
        } else {
            traj.rejected_steps += 1;
            h *= if negative { 0.5 } else { (0.9 * err.powf(-0.2)).clamp(0.1, 1.0) };
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(OdeError::StepUnderflow { t });
        }
    }
    Ok(traj)
}
