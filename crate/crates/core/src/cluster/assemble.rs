// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use super::{ClusterError, ClusterSpec};
use crate::mor::PiNodes;
use crate::netlist::{Circuit, SourceSpec};
use crate::simcore::{transient, SimOptions, Waveform};

pub(crate) const VICTIM_IN: &str = "victim_in";

/// Assembled cluster circuit and the near/far node of every net.
#[derive(Debug, Clone)]
pub struct Macromodel {
    pub circuit: Circuit,
    pub nodes: BTreeMap<String, PiNodes>,
    pub victim_net: String,
}

impl Macromodel {
    pub fn victim_nodes(&self) -> &PiNodes {
        &self.nodes[&self.victim_net]
    }
}

/// Victim deviation from its initial (quiescent) level at the driving point
/// and at the receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct VictimProbes {
    pub driving: Waveform,
    pub far: Waveform,
}

/// How the victim driver appears in the assembled circuit.
#[derive(Debug, Clone, Copy)]
pub(crate) enum VictimDrive {
    Vccs { input_noise: bool },
    Holding { r_ohms: f64 },
}

/// Assembles the cluster with only the aggressors selected by `active`
/// switching; the others hold their initial level.
pub(crate) fn build(
    spec: &ClusterSpec,
    victim: VictimDrive,
    active: &dyn Fn(usize) -> bool,
) -> Result<Macromodel, ClusterError> {
    spec.validate()?;
    let mut c = Circuit::new();
    let nodes = spec.interconnect.stamp(&mut c)?;
    let v = &spec.victim;
    let vn = &nodes[&v.net];
    match victim {
        VictimDrive::Vccs { input_noise } => {
            let src = if input_noise {
                v.input_noise.clone()
            } else {
                SourceSpec::Dc { volts: v.v_in_q }
            };
            c.add_vsource("VVICTIM_IN", VICTIM_IN, "0", src)?;
            c.add_table_vccs("GVICTIM", VICTIM_IN, &vn.near, v.vccs.clone())?;
        }
        VictimDrive::Holding { r_ohms } => {
            c.add_vsource("VVICTIM_HOLD", "victim_hold", "0", SourceSpec::Dc { volts: v.v_out_q })?;
            c.add_resistor("RVICTIM_HOLD", "victim_hold", &vn.near, r_ohms)?;
        }
    }
    c.add_capacitor(&format!("CRX_{}", v.net), &vn.far, "0", v.receiver.cap_f)?;
    for (k, a) in spec.aggressors.iter().enumerate() {
        let an = &nodes[&a.net];
        let ramp = a.driver.ramp.shifted(a.offset_s);
        let src = if active(k) {
            SourceSpec::SaturatedRamp(ramp)
        } else {
            SourceSpec::Dc { volts: ramp.v_start }
        };
        let drv = format!("agg{k}_th");
        c.add_vsource(&format!("VAGG{k}"), &drv, "0", src)?;
        c.add_resistor(&format!("RAGG{k}_TH"), &drv, &an.near, a.driver.r_th_ohms)?;
        c.add_capacitor(&format!("CRX_{}", a.net), &an.far, "0", a.receiver.cap_f)?;
    }
    Ok(Macromodel {
        circuit: c,
        nodes,
        victim_net: v.net.clone(),
    })
}

/// Victim driver as a table VCCS controlled by the input-noise source, each
/// aggressor as its ramp behind `r_th` at the near π node, and a receiver
/// capacitor at the far node of every net.
pub fn assemble_macromodel(spec: &ClusterSpec) -> Result<Macromodel, ClusterError> {
    build(spec, VictimDrive::Vccs { input_noise: true }, &|_| true)
}

pub(crate) fn run(model: &Macromodel, opts: &SimOptions) -> Result<VictimProbes, ClusterError> {
    let n = model.victim_nodes();
    let waves = transient(&model.circuit, opts, &[&n.near, &n.far])?;
    let dev = |name: &str| {
        let w = &waves[&name.to_ascii_lowercase()];
        w.deviation(w.first_value())
    };
    Ok(VictimProbes {
        driving: dev(&n.near),
        far: dev(&n.far),
    })
}

/// Nonlinear transient of the full macromodel.
pub fn simulate_combined(spec: &ClusterSpec, opts: &SimOptions) -> Result<VictimProbes, ClusterError> {
    run(&assemble_macromodel(spec)?, opts)
}
