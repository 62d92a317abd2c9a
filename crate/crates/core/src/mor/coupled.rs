// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::moments::resistive_reach;
use super::{admittance_moments, reduce_to_pi, MorError, PiModel};
use crate::netlist::{Circuit, ElementKind};

/// One net of a cluster: its RC elements (coupling capacitors removed) and
/// the node its driver connects to.
#[derive(Debug, Clone, PartialEq)]
pub struct NetSpec {
    pub name: String,
    pub circuit: Circuit,
    pub port: String,
}

/// A coupling capacitor between nodes of two different nets.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub node_a: String,
    pub node_b: String,
    pub farads: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetPi {
    pub pi: PiModel,
    pub fallback: bool,
}

/// Node names of one net's π once stamped into a circuit. For a collapsed
/// net both names are the same node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiNodes {
    pub near: String,
    pub far: String,
}

/// Per-net π models tied together by lumped far-node couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPiModel {
    nets: Vec<(String, NetPi)>,
    coupling: BTreeMap<(String, String), f64>,
}

fn pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl CoupledPiModel {
    /// Couplings between the same pair of nets are summed.
    pub fn new(nets: Vec<(String, NetPi)>, couplings: &[(String, String, f64)]) -> Result<Self, MorError> {
        for (k, (name, np)) in nets.iter().enumerate() {
            np.pi.validate()?;
            if name.is_empty() || name == "coupling" || name.contains([',', ' ']) {
                return Err(MorError::Invalid(format!("bad net name `{name}`")));
            }
            if nets[..k].iter().any(|(n, _)| n == name) {
                return Err(MorError::Invalid(format!("net `{name}` listed twice")));
            }
        }
        let mut coupling = BTreeMap::new();
        for (a, b, f) in couplings {
            if a == b || !nets.iter().any(|(n, _)| n == a) || !nets.iter().any(|(n, _)| n == b) {
                return Err(MorError::Invalid(format!("coupling between `{a}` and `{b}`")));
            }
            if !(*f >= 0.0 && f.is_finite()) {
                return Err(MorError::Invalid(format!("coupling {f:e} F")));
            }
            *coupling.entry(pair(a, b)).or_insert(0.0) += f;
        }
        Ok(Self { nets, coupling })
    }

    pub fn nets(&self) -> &[(String, NetPi)] {
        &self.nets
    }

    pub fn net(&self, name: &str) -> Option<&NetPi> {
        self.nets.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    /// Lumped coupling between two nets (0 if none), in either order.
    pub fn coupling(&self, a: &str, b: &str) -> f64 {
        self.coupling.get(&pair(a, b)).copied().unwrap_or(0.0)
    }

    pub fn couplings(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.coupling.iter().map(|((a, b), f)| (a.as_str(), b.as_str(), *f))
    }

    /// Total coupling of one net to all others.
    pub fn net_coupling(&self, name: &str) -> f64 {
        self.couplings()
            .filter(|(a, b, _)| *a == name || *b == name)
            .map(|(_, _, f)| f)
            .sum()
    }

    /// Adds the interconnect to `c` with nodes `<net>_near` and `<net>_far`.
    /// Each π's far capacitance already contains the net's grounded coupling,
    /// so the coupling placed between far nodes is taken out of the far
    /// capacitor (and, if that is too small, out of the near one) to keep
    /// every net's total capacitance at its first moment.
    pub fn stamp(&self, c: &mut Circuit) -> Result<BTreeMap<String, PiNodes>, MorError> {
        let mut out = BTreeMap::new();
        for (name, np) in &self.nets {
            let pi = np.pi;
            let near = format!("{name}_near");
            let far = if pi.r_ohms > 0.0 {
                format!("{name}_far")
            } else {
                near.clone()
            };
            let mut far_g = pi.c_far_f - self.net_coupling(name);
            let mut near_g = pi.c_near_f;
            if far_g < 0.0 {
                near_g = (near_g + far_g).max(0.0);
                far_g = 0.0;
            }
            c.node(&near);
            if pi.r_ohms > 0.0 {
                c.add_resistor(&format!("RPI_{name}"), &near, &far, pi.r_ohms)?;
            }
            if near_g > 0.0 {
                c.add_capacitor(&format!("CPI_{name}_N"), &near, "0", near_g)?;
            }
            if far_g > 0.0 {
                c.add_capacitor(&format!("CPI_{name}_F"), &far, "0", far_g)?;
            }
            out.insert(name.clone(), PiNodes { near, far });
        }
        for (a, b, f) in self.couplings() {
            if f > 0.0 {
                c.add_capacitor(&format!("CCPL_{a}_{b}"), &out[a].far, &out[b].far, f)?;
            }
        }
        Ok(out)
    }

    /// Net rows `net,c_near_f,r_ohms,c_far_f` followed by
    /// `coupling,netA,netB,c_f` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), MorError> {
        let mut wr = csv::WriterBuilder::new().flexible(true).from_writer(w);
        wr.write_record(["net", "c_near_f", "r_ohms", "c_far_f"])?;
        for (name, np) in &self.nets {
            let p = np.pi;
            wr.write_record([
                name.clone(),
                format!("{:e}", p.c_near_f),
                format!("{:e}", p.r_ohms),
                format!("{:e}", p.c_far_f),
            ])?;
        }
        for (a, b, f) in self.couplings() {
            wr.write_record(["coupling", a, b, &format!("{f:e}")])?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Nets with zero series resistance are marked as collapsed.
    pub fn read_csv<R: Read>(r: R) -> Result<Self, MorError> {
        let mut rd = csv::ReaderBuilder::new().flexible(true).from_reader(r);
        if rd.headers()?.iter().collect::<Vec<_>>() != ["net", "c_near_f", "r_ohms", "c_far_f"] {
            return Err(MorError::Invalid("expected header net,c_near_f,r_ohms,c_far_f".into()));
        }
        let num = |s: &str| -> Result<f64, MorError> {
            s.trim()
                .parse()
                .map_err(|_| MorError::Invalid(format!("bad number `{s}`")))
        };
        let mut nets = Vec::new();
        let mut couplings = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != 4 {
                return Err(MorError::Invalid(format!("expected 4 fields, got {}", rec.len())));
            }
            if &rec[0] == "coupling" {
                couplings.push((rec[1].to_string(), rec[2].to_string(), num(&rec[3])?));
            } else {
                let pi = PiModel {
                    c_near_f: num(&rec[1])?,
                    r_ohms: num(&rec[2])?,
                    c_far_f: num(&rec[3])?,
                };
                nets.push((
                    rec[0].to_string(),
                    NetPi {
                        pi,
                        fallback: pi.r_ohms == 0.0,
                    },
                ));
            }
        }
        Self::new(nets, &couplings)
    }
}

fn owning_net<'a>(nets: &'a [NetSpec], node: &str) -> Result<&'a str, MorError> {
    let mut owners = nets
        .iter()
        .filter(|n| n.circuit.find_node(node).is_some_and(|id| !id.is_ground()));
    match (owners.next(), owners.next()) {
        (Some(n), None) => Ok(&n.name),
        (Some(a), Some(b)) => Err(MorError::Shorted {
            node: node.to_string(),
            a: a.name.clone(),
            b: b.name.clone(),
        }),
        _ => Err(MorError::Unassigned(node.to_string())),
    }
}

/// Reduces every net (with the far plates of its couplings grounded) and
/// lumps couplings per net pair.
pub fn build_coupled_pi(nets: &[NetSpec], couplings: &[Coupling]) -> Result<CoupledPiModel, MorError> {
    let mut reduced = Vec::with_capacity(nets.len());
    let mut pairs = Vec::with_capacity(couplings.len());
    let mut grounded: Vec<Circuit> = nets.iter().map(|n| n.circuit.clone()).collect();
    for (k, cp) in couplings.iter().enumerate() {
        let a = owning_net(nets, &cp.node_a)?;
        let b = owning_net(nets, &cp.node_b)?;
        if a == b {
            return Err(MorError::Invalid(format!(
                "coupling between `{}` and `{}` stays inside net `{a}`",
                cp.node_a, cp.node_b
            )));
        }
        for (net, node) in [(a, &cp.node_a), (b, &cp.node_b)] {
            let idx = nets.iter().position(|n| n.name == net).expect("owner exists");
            grounded[idx].add_capacitor(&format!("CGND_CPL{k}"), node, "0", cp.farads)?;
        }
        pairs.push((a.to_string(), b.to_string(), cp.farads));
    }
    for (net, circuit) in nets.iter().zip(&grounded) {
        let m = admittance_moments(circuit, &net.port).map_err(|e| match e {
            MorError::Singular { node, .. } => MorError::Singular {
                net: net.name.clone(),
                node,
            },
            other => other,
        })?;
        let fit = reduce_to_pi(&m).map_err(|e| match e {
            MorError::NonPositive { m1, .. } => MorError::NonPositive {
                net: net.name.clone(),
                m1,
            },
            other => other,
        })?;
        reduced.push((
            net.name.clone(),
            NetPi {
                pi: fit.model,
                fallback: fit.fallback,
            },
        ));
    }
    CoupledPiModel::new(reduced, &pairs)
}

/// Splits a combined interconnect netlist into nets by resistive
/// connectivity from each declared `(net, port)`. Capacitors between two
/// nets become couplings; everything else goes to the net of its nodes.
pub fn split_interconnect(
    circuit: &Circuit,
    ports: &[(&str, &str)],
) -> Result<(Vec<NetSpec>, Vec<Coupling>), MorError> {
    let mut owner: Vec<Option<usize>> = vec![None; circuit.node_count()];
    for (k, (net, port)) in ports.iter().enumerate() {
        let p = circuit
            .find_node(port)
            .filter(|id| !id.is_ground())
            .ok_or_else(|| MorError::UnknownPort(port.to_string()))?;
        for (id, reached) in resistive_reach(circuit, p).into_iter().enumerate() {
            if !reached || id == 0 {
                continue;
            }
            if let Some(prev) = owner[id] {
                if prev != k {
                    return Err(MorError::Shorted {
                        node: circuit.nodes()[id].clone(),
                        a: ports[prev].0.to_string(),
                        b: net.to_string(),
                    });
                }
            }
            owner[id] = Some(k);
        }
    }
    let mut nets: Vec<NetSpec> = ports
        .iter()
        .map(|(net, port)| {
            let mut c = Circuit::new();
            c.node(port);
            NetSpec {
                name: net.to_string(),
                circuit: c,
                port: port.to_ascii_lowercase(),
            }
        })
        .collect();
    let mut couplings = Vec::new();
    let name = |id: crate::netlist::NodeId| circuit.node_name(id).to_string();
    for e in circuit.elements() {
        let (a, b) = match e.kind {
            ElementKind::Resistor { a, b, .. } | ElementKind::Capacitor { a, b, .. } => (a, b),
            _ => return Err(MorError::NotRc(e.name.clone())),
        };
        let net_of = |id: crate::netlist::NodeId| -> Result<Option<usize>, MorError> {
            if id.is_ground() {
                Ok(None)
            } else {
                owner[id.0].map(Some).ok_or_else(|| MorError::Unassigned(name(id)))
            }
        };
        let (na, nb) = (net_of(a)?, net_of(b)?);
        match (&e.kind, na, nb) {
            (ElementKind::Resistor { .. }, None, _) | (ElementKind::Resistor { .. }, _, None) => {
                return Err(MorError::ResistorToGround(e.name.clone()))
            }
            (ElementKind::Resistor { ohms, .. }, Some(k), _) => {
                nets[k].circuit.add_resistor(&e.name, &name(a), &name(b), *ohms)?;
            }
            (ElementKind::Capacitor { farads, .. }, Some(ka), Some(kb)) if ka != kb => couplings.push(Coupling {
                node_a: name(a),
                node_b: name(b),
                farads: *farads,
            }),
            (ElementKind::Capacitor { farads, .. }, ka, kb) => {
                let k = ka.or(kb).ok_or_else(|| MorError::Unassigned(e.name.clone()))?;
                nets[k].circuit.add_capacitor(&e.name, &name(a), &name(b), *farads)?;
            }
            _ => unreachable!(),
        }
    }
    Ok((nets, couplings))
}
