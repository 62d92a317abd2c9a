// SPDX-License-Identifier: Apache-2.0

//! Noise-cluster macromodel: VCCS victim driver, Thevenin aggressors and the
//! coupled-π interconnect, solved together; plus the linear-superposition
//! baseline, peak alignment, noise metrics and NRC verdicts.

mod align;
mod assemble;
mod metrics;
mod oracle;
mod superpose;

use std::sync::Arc;

use thiserror::Error;

use crate::characterize::{CharacterizeError, ReceiverModel, TheveninDriver};
use crate::mor::{CoupledPiModel, MorError};
use crate::netlist::{NetlistError, SourceSpec};
use crate::simcore::{SimError, VccsTable};

pub use align::{worst_case_alignment, Alignment, Contributor};
pub use assemble::{assemble_macromodel, simulate_combined, Macromodel, VictimProbes};
pub use metrics::{noise_metrics, nrc_check, NoiseMetrics, Verdict, VERDICT_BAND_V};
pub use oracle::{build_oracle, simulate_oracle, OracleAggressor, OracleCell, OracleNet, OracleSpec, OracleVictim};
pub use superpose::{simulate_superposition, SuperpositionParts};

/// Contributors whose peak stays below this are left alone by the alignment.
pub const MIN_PEAK_V: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Mor(#[from] MorError),
    #[error(transparent)]
    Characterize(#[from] CharacterizeError),
    #[error("invalid cluster: {0}")]
    Invalid(String),
    #[error("cluster has no noise contributor")]
    NoContributor,
}

#[derive(Debug, Clone)]
pub struct VictimSpec {
    /// Net name in the interconnect model.
    pub net: String,
    pub vccs: Arc<VccsTable>,
    pub v_in_q: f64,
    pub v_out_q: f64,
    /// Absolute voltage at the driver input; a constant `v_in_q` means no
    /// propagated noise.
    pub input_noise: SourceSpec,
    pub receiver: ReceiverModel,
}

impl VictimSpec {
    /// Victim with its quiescent output taken from the table's zero-current
    /// point at `v_in_q` and a quiet input.
    pub fn at_rest(
        net: &str,
        vccs: Arc<VccsTable>,
        v_in_q: f64,
        receiver: ReceiverModel,
    ) -> Result<Self, ClusterError> {
        let v_out_q = vccs
            .zero_current_output(v_in_q)
            .ok_or_else(|| ClusterError::Invalid(format!("table has no holding output at v_in = {v_in_q} V")))?;
        Ok(Self {
            net: net.to_string(),
            vccs,
            v_in_q,
            v_out_q,
            input_noise: SourceSpec::Dc { volts: v_in_q },
            receiver,
        })
    }

    pub fn with_input_noise(mut self, noise: SourceSpec) -> Self {
        self.input_noise = noise;
        self
    }

    pub fn has_input_noise(&self) -> bool {
        !(self.input_noise.is_constant() && self.input_noise.eval(0.0) == self.v_in_q)
    }
}

#[derive(Debug, Clone)]
pub struct AggressorSpec {
    pub net: String,
    pub driver: TheveninDriver,
    pub receiver: ReceiverModel,
    /// Extra delay applied to the driver ramp.
    pub offset_s: f64,
}

#[derive(Debug, Clone)]
pub struct ClusterSpec {
    pub victim: VictimSpec,
    pub aggressors: Vec<AggressorSpec>,
    pub interconnect: CoupledPiModel,
    pub vdd: f64,
}

impl ClusterSpec {
    pub fn validate(&self) -> Result<(), ClusterError> {
        let bad = |m: String| Err(ClusterError::Invalid(m));
        if !(self.vdd > 0.0 && self.vdd.is_finite()) {
            return bad(format!("vdd {} must be positive", self.vdd));
        }
        let v = &self.victim;
        if !v.vccs.contains(v.v_in_q, v.v_out_q) {
            return bad(format!(
                "quiescent point ({}, {}) lies outside the VCCS grid",
                v.v_in_q, v.v_out_q
            ));
        }
        v.input_noise.validate().map_err(ClusterError::Invalid)?;
        let mut seen = vec![v.net.as_str()];
        for a in &self.aggressors {
            if !a.offset_s.is_finite() {
                return bad(format!("aggressor `{}` offset is not finite", a.net));
            }
            if seen.contains(&a.net.as_str()) {
                return bad(format!("net `{}` used twice", a.net));
            }
            seen.push(&a.net);
        }
        for net in seen {
            if self.interconnect.net(net).is_none() {
                return bad(format!("net `{net}` is missing from the interconnect model"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests;
