// SPDX-License-Identifier: Apache-2.0

//! Generic desk-scale technology and the reference noise clusters built on
//! it: parallel coupled RC lines, an inverter aggressor and a 2-input NAND
//! victim whose input carries a triangular glitch.

use std::sync::Arc;

use crate::characterize::{build_vccs_table, fit_thevenin, receiver_cap, select_side_inputs, CellPins, ReceiverModel};
use crate::cluster::{
    AggressorSpec, ClusterError, ClusterSpec, OracleAggressor, OracleCell, OracleNet, OracleSpec, OracleVictim,
    VictimSpec,
};
use crate::mor::{build_coupled_pi, split_interconnect};
use crate::netlist::{parse_netlist, Circuit, SaturatedRamp, SourceSpec, TriangleGlitch};
use crate::simcore::{NewtonOptions, SimOptions};

pub const VDD: f64 = 1.2;

/// Level-1 inverter, pins `a`, `y`, `vdd`.
pub const INVERTER: &str = "\
* reference inverter
.model nch NMOS VT0=0.4 KP=200u LAMBDA=0.05
.model pch PMOS VT0=-0.4 KP=100u LAMBDA=0.05
MN y a 0 0 nch W=0.26u L=0.13u
MP y a vdd vdd pch W=0.52u L=0.13u
.end
";

/// Level-1 2-input NAND, pins `a`, `b`, `y`, `vdd`; `a` drives the top of
/// the series stack.
pub const NAND2: &str = "\
* reference 2-input nand
.model nch NMOS VT0=0.4 KP=200u LAMBDA=0.05
.model pch PMOS VT0=-0.4 KP=100u LAMBDA=0.05
MPA y a vdd vdd pch W=0.52u L=0.13u
MPB y b vdd vdd pch W=0.52u L=0.13u
MNA y a x 0 nch W=0.52u L=0.13u
MNB x b 0 0 nch W=0.52u L=0.13u
.end
";

pub fn inverter() -> Circuit {
    parse_netlist(INVERTER).expect("reference inverter parses")
}

pub fn nand2() -> Circuit {
    parse_netlist(NAND2).expect("reference nand parses")
}

/// Per-line totals of a uniform coupled bus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineParams {
    pub segments: usize,
    pub r_total_ohms: f64,
    pub c_ground_total_f: f64,
    /// Coupling to each neighbour.
    pub c_couple_total_f: f64,
}

impl LineParams {
    /// 500 µm line at 0.1 Ω/µm, 0.05 fF/µm to ground and as much again to a
    /// neighbour.
    pub fn reference(segments: usize) -> Self {
        Self {
            segments,
            r_total_ohms: 50.0,
            c_ground_total_f: 25e-15,
            c_couple_total_f: 25e-15,
        }
    }
}

pub fn driving_node(net: &str) -> String {
    format!("{net}_0")
}

pub fn receiver_node(net: &str, p: &LineParams) -> String {
    format!("{net}_{}", p.segments)
}

/// Parallel lines in the listed order, each a chain of `segments` R/C
/// sections from `{net}_0` to `{net}_{segments}`. Neighbouring lines couple
/// at every section node.
pub fn coupled_lines(nets: &[&str], p: &LineParams) -> Circuit {
    let n = p.segments;
    let (r, cg, cc) = (
        p.r_total_ohms / n as f64,
        p.c_ground_total_f / n as f64,
        p.c_couple_total_f / n as f64,
    );
    let mut c = Circuit::new();
    for net in nets {
        for k in 1..=n {
            let (a, b) = (format!("{net}_{}", k - 1), format!("{net}_{k}"));
            c.add_resistor(&format!("R{net}_{k}"), &a, &b, r).expect("unique names");
            c.add_capacitor(&format!("C{net}_{k}"), &b, "0", cg)
                .expect("unique names");
        }
    }
    for pair in nets.windows(2) {
        for k in 1..=n {
            let (a, b) = (format!("{}_{k}", pair[0]), format!("{}_{k}", pair[1]));
            c.add_capacitor(&format!("CC{}_{}_{k}", pair[0], pair[1]), &a, &b, cc)
                .expect("unique names");
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceOptions {
    pub aggressors: usize,
    pub line: LineParams,
    pub grid_points: usize,
    /// Half-height width of the victim input glitch.
    pub glitch_width_s: f64,
    pub glitch_start_s: f64,
    /// Glitch depth as a fraction of vdd.
    pub glitch_depth: f64,
    pub aggressor_start_s: f64,
    pub aggressor_slew_s: f64,
    pub t_stop_s: f64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        Self {
            aggressors: 1,
            line: LineParams::reference(10),
            grid_points: 25,
            glitch_width_s: 300e-12,
            glitch_start_s: 200e-12,
            glitch_depth: 0.4,
            aggressor_start_s: 200e-12,
            aggressor_slew_s: 800e-12,
            t_stop_s: 4e-9,
        }
    }
}

/// Macromodel and transistor-level views of the same cluster.
#[derive(Debug, Clone)]
pub struct ReferenceCluster {
    pub spec: ClusterSpec,
    pub oracle: OracleSpec,
    pub sim: SimOptions,
}

/// Victim `v`; aggressor nets `a0` (and `a1` on the other side).
pub fn net_order(aggressors: usize) -> Vec<String> {
    match aggressors {
        0 => vec!["v".into()],
        1 => vec!["v".into(), "a0".into()],
        n => {
            let mut v = vec!["a0".to_string(), "v".to_string()];
            v.extend((1..n).map(|k| format!("a{k}")));
            v
        }
    }
}

/// Characterizes the reference cells and reduces the reference lines into
/// a cluster with the victim input glitching down from vdd.
pub fn reference_cluster(o: &ReferenceOptions) -> Result<ReferenceCluster, ClusterError> {
    let newton = NewtonOptions::default();
    let order = net_order(o.aggressors);
    let names: Vec<&str> = order.iter().map(String::as_str).collect();
    let lines = coupled_lines(&names, &o.line);
    let ports: Vec<(String, String)> = order.iter().map(|n| (n.clone(), driving_node(n))).collect();
    let port_refs: Vec<(&str, &str)> = ports.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    let (nets, couplings) = split_interconnect(&lines, &port_refs)?;
    let interconnect = build_coupled_pi(&nets, &couplings)?;

    let inv = inverter();
    let rx = ReceiverModel::new(receiver_cap(&inv, "a")?)?;

    let nand = nand2();
    let glitch_low = VDD * (1.0 - o.glitch_depth);
    let side = select_side_inputs(
        &nand,
        &CellPins::new("a", "y").with_fixed("vdd", VDD),
        &["b"],
        VDD,
        VDD,
        glitch_low,
        &newton,
    )?;
    let mut v_pins = CellPins::new("a", "y").with_fixed("vdd", VDD);
    for (p, v) in &side {
        v_pins = v_pins.with_fixed(p, *v);
    }
    let table = Arc::new(build_vccs_table(&nand, &v_pins, VDD, o.grid_points, &newton)?);
    let noise = SourceSpec::TriangleGlitch(TriangleGlitch::symmetric(
        o.glitch_start_s,
        o.glitch_width_s,
        VDD,
        glitch_low,
    ));
    let victim = VictimSpec::at_rest("v", table, VDD, rx)?.with_input_noise(noise.clone());

    let a_pins = CellPins::new("a", "y").with_fixed("vdd", VDD);
    let input = SaturatedRamp {
        t0_s: o.aggressor_start_s,
        slew_s: o.aggressor_slew_s,
        v_start: VDD,
        v_end: 0.0,
    };
    let mut aggressors = Vec::new();
    let mut o_aggs = Vec::new();
    for name in order.iter().filter(|n| n.as_str() != "v") {
        // probe load: the net's own capacitance (couplings grounded) plus its receiver
        let load = interconnect.net(name).expect("reduced").pi.total_cap() + rx.cap_f;
        let driver = fit_thevenin(&inv, &a_pins, &input, VDD, load, &newton)?;
        aggressors.push(AggressorSpec {
            net: name.clone(),
            driver,
            receiver: rx,
            offset_s: 0.0,
        });
        o_aggs.push(OracleAggressor {
            net: name.clone(),
            cell: OracleCell {
                cell: inv.clone(),
                pins: a_pins.clone(),
            },
            input: SourceSpec::SaturatedRamp(input),
            offset_s: 0.0,
            receiver_cap_f: rx.cap_f,
        });
    }
    let oracle = OracleSpec {
        nets: order
            .iter()
            .map(|n| OracleNet {
                name: n.clone(),
                driving: driving_node(n),
                receiver: receiver_node(n, &o.line),
            })
            .collect(),
        interconnect: lines,
        victim: OracleVictim {
            net: "v".into(),
            cell: OracleCell {
                cell: nand,
                pins: v_pins,
            },
            input_noise: noise,
            receiver_cap_f: rx.cap_f,
        },
        aggressors: o_aggs,
    };
    let spec = ClusterSpec {
        victim,
        aggressors,
        interconnect,
        vdd: VDD,
    };
    spec.validate()?;
    Ok(ReferenceCluster {
        spec,
        oracle,
        sim: SimOptions::new(o.t_stop_s),
    })
}
