// SPDX-License-Identifier: Apache-2.0

//! Transistor-level reference: the driver cells instantiated into the full
//! extracted RC network, receivers as their input capacitance.

use super::assemble::VictimProbes;
use super::{ClusterError, ClusterSpec};
use crate::characterize::CellPins;
use crate::netlist::{Circuit, SourceSpec};
use crate::simcore::{transient, SimOptions};

/// A cell netlist with its signal pins and DC-biased pins.
#[derive(Debug, Clone)]
pub struct OracleCell {
    pub cell: Circuit,
    pub pins: CellPins,
}

/// Where a net is driven and where its receiver sits in the RC network.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleNet {
    pub name: String,
    pub driving: String,
    pub receiver: String,
}

#[derive(Debug, Clone)]
pub struct OracleVictim {
    pub net: String,
    pub cell: OracleCell,
    pub input_noise: SourceSpec,
    pub receiver_cap_f: f64,
}

#[derive(Debug, Clone)]
pub struct OracleAggressor {
    pub net: String,
    pub cell: OracleCell,
    /// Input waveform before `offset_s` is applied.
    pub input: SourceSpec,
    pub offset_s: f64,
    pub receiver_cap_f: f64,
}

#[derive(Debug, Clone)]
pub struct OracleSpec {
    pub interconnect: Circuit,
    pub nets: Vec<OracleNet>,
    pub victim: OracleVictim,
    pub aggressors: Vec<OracleAggressor>,
}

impl OracleSpec {
    fn net(&self, name: &str) -> Result<&OracleNet, ClusterError> {
        self.nets
            .iter()
            .find(|n| n.name == name)
            .ok_or_else(|| ClusterError::Invalid(format!("net `{name}` has no taps")))
    }

    /// Copies the victim input noise and the aggressor offsets (matched by
    /// net name) from a macromodel spec.
    pub fn with_timing_of(&self, spec: &ClusterSpec) -> Result<Self, ClusterError> {
        let mut out = self.clone();
        out.victim.input_noise = spec.victim.input_noise.clone();
        for a in &mut out.aggressors {
            let m = spec
                .aggressors
                .iter()
                .find(|m| m.net == a.net)
                .ok_or_else(|| ClusterError::Invalid(format!("aggressor `{}` missing from the spec", a.net)))?;
            a.offset_s = m.offset_s;
        }
        Ok(out)
    }
}

fn place(
    c: &mut Circuit,
    prefix: &str,
    cell: &OracleCell,
    input: SourceSpec,
    output: &str,
) -> Result<(), ClusterError> {
    let in_node = format!("{prefix}_in");
    let pins = cell
        .pins
        .fixed
        .iter()
        .map(|(p, _)| p)
        .chain([&cell.pins.input, &cell.pins.output]);
    for p in pins {
        if cell.cell.find_node(p).is_none() {
            return Err(ClusterError::Invalid(format!("cell has no pin `{p}`")));
        }
    }
    c.instantiate(
        &cell.cell,
        prefix,
        &[
            (cell.pins.input.as_str(), in_node.as_str()),
            (cell.pins.output.as_str(), output),
        ],
    )?;
    c.add_vsource(&format!("V{prefix}_IN"), &in_node, "0", input)?;
    for (pin, v) in &cell.pins.fixed {
        c.add_vsource(
            &format!("V{prefix}_{pin}"),
            &format!("{prefix}.{pin}"),
            "0",
            SourceSpec::Dc { volts: *v },
        )?;
    }
    Ok(())
}

/// The full RC network with every driver cell placed at its driving node and
/// a receiver capacitor at every receiver node.
pub fn build_oracle(spec: &OracleSpec) -> Result<Circuit, ClusterError> {
    let mut c = spec.interconnect.clone();
    let v = &spec.victim;
    let vn = spec.net(&v.net)?.clone();
    place(&mut c, "xv", &v.cell, v.input_noise.clone(), &vn.driving)?;
    c.add_capacitor("CORX_V", &vn.receiver, "0", v.receiver_cap_f)?;
    for (k, a) in spec.aggressors.iter().enumerate() {
        let an = spec.net(&a.net)?.clone();
        place(
            &mut c,
            &format!("xa{k}"),
            &a.cell,
            a.input.shifted(a.offset_s),
            &an.driving,
        )?;
        c.add_capacitor(&format!("CORX_A{k}"), &an.receiver, "0", a.receiver_cap_f)?;
    }
    Ok(c)
}

/// Transient of the transistor-level cluster, as victim deviations from the
/// initial operating point.
pub fn simulate_oracle(spec: &OracleSpec, opts: &SimOptions) -> Result<VictimProbes, ClusterError> {
    let c = build_oracle(spec)?;
    let vn = spec.net(&spec.victim.net)?;
    let waves = transient(&c, opts, &[&vn.driving, &vn.receiver])?;
    let dev = |name: &str| {
        let w = &waves[&name.to_ascii_lowercase()];
        w.deviation(w.first_value())
    };
    Ok(VictimProbes {
        driving: dev(&vn.driving),
        far: dev(&vn.receiver),
    })
}
