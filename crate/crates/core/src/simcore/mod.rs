// SPDX-License-Identifier: Apache-2.0

//! Shared numerical core.
//!
//! Circuits are formulated with modified nodal analysis: one unknown per
//! non-ground node plus one branch current per voltage source. Nonlinear
//! devices (level-1 MOSFETs and table-driven VCCS elements) are linearized
//! around the current iterate and the dense system is solved by LU. A
//! `gmin` conductance ties every node to ground so purely capacitive nodes
//! stay solvable at DC.

mod engine;
mod mosfet;
mod vccs;
mod waveform;

use thiserror::Error;

pub use engine::{
    dc_operating_point, transient, transient_full, DcSweeper, OperatingPoint, StepMethod, TransientResult,
};
pub use mosfet::{mosfet_current, mosfet_eval, MosfetEval};
pub use vccs::{UniformGrid, VccsSample, VccsTable};
pub use waveform::Waveform;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(
        "Newton iteration did not converge at t={time_s:e} s after {iterations} iterations (residual {residual_a:e} A)"
    )]
    NonConvergence {
        time_s: f64,
        iterations: usize,
        residual_a: f64,
    },
    #[error("singular circuit matrix at t={time_s:e} s")]
    Singular { time_s: f64 },
    #[error("invalid simulation options: {0}")]
    InvalidOptions(String),
    #[error("invalid VCCS table: {0}")]
    InvalidTable(String),
    #[error("invalid waveform: {0}")]
    InvalidWaveform(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown voltage source `{0}`")]
    UnknownSource(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Newton tolerances shared by DC and transient solves.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOptions {
    pub reltol: f64,
    pub vabstol_v: f64,
    pub iabstol_a: f64,
    pub max_newton_iters: usize,
    pub gmin_s: f64,
    /// Largest node-voltage change applied in one iteration.
    pub max_voltage_step_v: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            reltol: 1e-3,
            vabstol_v: 1e-6,
            iabstol_a: 1e-9,
            max_newton_iters: 50,
            gmin_s: 1e-12,
            max_voltage_step_v: 0.5,
        }
    }
}

impl NewtonOptions {
    pub fn validate(&self) -> Result<(), SimError> {
        let pos = [
            ("reltol", self.reltol),
            ("vabstol", self.vabstol_v),
            ("iabstol", self.iabstol_a),
            ("gmin", self.gmin_s),
            ("max voltage step", self.max_voltage_step_v),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::InvalidOptions(format!("{name} must be positive")));
            }
        }
        if self.max_newton_iters < 1 {
            return Err(SimError::InvalidOptions("max_newton_iters must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub dt_s: f64,
    pub t_stop_s: f64,
    pub newton: NewtonOptions,
    pub max_step_halvings: u32,
}

impl SimOptions {
    /// Default options for a run to `t_stop_s` with `dt = t_stop / 2000`.
    pub fn new(t_stop_s: f64) -> Self {
        Self {
            dt_s: t_stop_s / 2000.0,
            t_stop_s,
            newton: NewtonOptions::default(),
            max_step_halvings: 8,
        }
    }

    pub fn with_dt(mut self, dt_s: f64) -> Self {
        self.dt_s = dt_s;
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.t_stop_s > 0.0 && self.t_stop_s.is_finite()) {
            return Err(SimError::InvalidOptions("t_stop must be positive".into()));
        }
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return Err(SimError::InvalidOptions("dt must be positive".into()));
        }
        self.newton.validate()
    }
}

impl Default for SimOptions {
    fn default() -> Self {
        Self::new(1e-9)
    }
}

#[cfg(test)]
mod tests;
