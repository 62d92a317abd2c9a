// SPDX-License-Identifier: Apache-2.0

//! Pre-characterization of library cells: DC current tables for table
//! driven victims, holding resistance, Thevenin aggressor fits, receiver
//! input capacitance and noise rejection curves.

mod nrc;
mod rcap;
mod sweep;
mod thevenin;

use std::io::{Read, Write};

use thiserror::Error;

use crate::netlist::{Circuit, NetlistError, SaturatedRamp, SourceSpec};
use crate::simcore::SimError;

pub use nrc::{build_nrc, dc_switching_threshold, glitch_fails, NoiseRejectionCurve, NrcOptions, NrcPoint};
pub use rcap::receiver_cap;
pub use sweep::{build_vccs_table, holding_resistance, select_side_inputs, sweep_range, vccs_testbench};
pub use thevenin::{fit_thevenin, unit_ramp_rc, TheveninDriver};

#[derive(Debug, Error)]
pub enum CharacterizeError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error("DC solve failed at vin={vin} V, vout={vout} V: {source}")]
    GridPoint {
        vin: f64,
        vout: f64,
        #[source]
        source: SimError,
    },
    #[error("driver is not holding at the quiescent point (dI/dVout = {slope:e} S)")]
    NotHolding { slope: f64 },
    #[error("output never crossed {pct}% of the swing")]
    NoCrossing { pct: u32 },
    #[error("no transistor gate connects to pin `{0}`")]
    NoGate(String),
    #[error("unknown pin `{0}`")]
    UnknownPin(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// How a cell is biased for characterization: the swept input, the output,
/// and every other pin (supply and side inputs) held at a fixed voltage.
#[derive(Debug, Clone, PartialEq)]
pub struct CellPins {
    pub input: String,
    pub output: String,
    pub fixed: Vec<(String, f64)>,
}

impl CellPins {
    pub fn new(input: &str, output: &str) -> Self {
        Self {
            input: input.to_ascii_lowercase(),
            output: output.to_ascii_lowercase(),
            fixed: Vec::new(),
        }
    }

    pub fn with_fixed(mut self, pin: &str, volts: f64) -> Self {
        self.fixed.push((pin.to_ascii_lowercase(), volts));
        self
    }

    fn check(&self, cell: &Circuit) -> Result<(), CharacterizeError> {
        for pin in std::iter::once(&self.input)
            .chain(std::iter::once(&self.output))
            .chain(self.fixed.iter().map(|(p, _)| p))
        {
            if cell.find_node(pin).is_none() {
                return Err(CharacterizeError::UnknownPin(pin.clone()));
            }
        }
        Ok(())
    }

    /// Adds DC sources holding every fixed pin.
    fn drive_fixed(&self, tb: &mut Circuit) -> Result<(), CharacterizeError> {
        for (k, (pin, v)) in self.fixed.iter().enumerate() {
            tb.add_vsource(&format!("VTB_FIX{k}"), pin, "0", SourceSpec::Dc { volts: *v })?;
        }
        Ok(())
    }
}

/// Receiver modeled by its input capacitance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverModel {
    pub cap_f: f64,
}

impl ReceiverModel {
    pub fn new(cap_f: f64) -> Result<Self, CharacterizeError> {
        if !(cap_f > 0.0 && cap_f.is_finite()) {
            return Err(CharacterizeError::InvalidArgument(format!(
                "receiver cap {cap_f} must be positive"
            )));
        }
        Ok(Self { cap_f })
    }
}

pub(crate) fn write_ramp_csv<W: Write>(w: W, r_th: f64, ramp: &SaturatedRamp) -> Result<(), CharacterizeError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["r_th_ohms", "t0_s", "slew_s", "v_start_v", "v_end_v"])?;
    wr.write_record([r_th, ramp.t0_s, ramp.slew_s, ramp.v_start, ramp.v_end].map(|x| format!("{x:e}")))?;
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub(crate) fn read_single_row<R: Read>(r: R, header: &[&str]) -> Result<Vec<f64>, CharacterizeError> {
    let mut rd = csv::Reader::from_reader(r);
    if rd.headers()?.iter().collect::<Vec<_>>() != header {
        return Err(CharacterizeError::InvalidArgument(format!(
            "expected header {}",
            header.join(",")
        )));
    }
    let rec = rd
        .records()
        .next()
        .ok_or_else(|| CharacterizeError::InvalidArgument("missing data row".into()))??;
    rec.iter()
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CharacterizeError::InvalidArgument(format!("bad number `{s}`")))
        })
        .collect()
}
