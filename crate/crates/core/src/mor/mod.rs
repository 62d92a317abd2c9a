// SPDX-License-Identifier: Apache-2.0

//! Driving-point reduction of RC interconnect.
//!
//! Each net is reduced on its own, with the far plate of every coupling
//! capacitor grounded, to a π model (near capacitor, series resistor, far
//! capacitor) matching the first three moments of its driving-point
//! admittance. The nets are then tied back together by lumping each pair's
//! total coupling between their far nodes.

mod coupled;
mod moments;
mod pi;

use thiserror::Error;

use crate::netlist::NetlistError;

pub use coupled::{build_coupled_pi, split_interconnect, CoupledPiModel, Coupling, NetPi, NetSpec, PiNodes};
pub use moments::{admittance_moments, AdmittanceMoments};
pub use pi::{pi_moments, reduce_to_pi, PiFit, PiModel};

#[derive(Debug, Error)]
pub enum MorError {
    #[error("element `{0}` is not a resistor or capacitor")]
    NotRc(String),
    #[error("unknown port node `{0}`")]
    UnknownPort(String),
    #[error("resistor `{0}` gives the net a DC path to ground")]
    ResistorToGround(String),
    #[error("node `{node}` of net `{net}` has no resistive path to the port (singular conductance matrix)")]
    Singular { net: String, node: String },
    #[error("net `{net}`: total capacitance m1 = {m1:e} F must be positive")]
    NonPositive { net: String, m1: f64 },
    #[error("node `{0}` belongs to no declared net")]
    Unassigned(String),
    #[error("node `{node}` is reached from the ports of both `{a}` and `{b}`")]
    Shorted { node: String, a: String, b: String },
    #[error("invalid reduced model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}
