// SPDX-License-Identifier: Apache-2.0

use nalgebra::{DMatrix, DVector};

use super::MorError;
use crate::netlist::{Circuit, ElementKind, NodeId};

/// `Y(s) = m[0] s + m[1] s² + m[2] s³ + O(s⁴)` at a driving point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmittanceMoments {
    pub m: [f64; 3],
}

/// Resistive connected component of every node, by breadth-first search
/// from `start`.
pub(crate) fn resistive_reach(net: &Circuit, start: NodeId) -> Vec<bool> {
    let mut adj = vec![Vec::new(); net.node_count()];
    for e in net.elements() {
        if let ElementKind::Resistor { a, b, .. } = e.kind {
            adj[a.0].push(b);
            adj[b.0].push(a);
        }
    }
    let mut seen = vec![false; net.node_count()];
    let mut queue = vec![start];
    seen[start.0] = true;
    while let Some(n) = queue.pop() {
        for &m in &adj[n.0] {
            if !seen[m.0] {
                seen[m.0] = true;
                queue.push(m);
            }
        }
    }
    seen
}

/// First three driving-point admittance moments of an RC network seen from
/// `port`. With the port held at a unit voltage the internal node voltages
/// expand as `x0 + x1 s + x2 s² + ...`, where `x0` is the DC solution
/// (all ones) and `G x_k = -C x_{k-1} - c_port [k = 1]`. The port current
/// moments follow from the port row.
pub fn admittance_moments(net: &Circuit, port: &str) -> Result<AdmittanceMoments, MorError> {
    let p = net
        .find_node(port)
        .ok_or_else(|| MorError::UnknownPort(port.to_string()))?;
    if p.is_ground() {
        return Err(MorError::UnknownPort(port.to_string()));
    }
    for e in net.elements() {
        match e.kind {
            ElementKind::Resistor { a, b, .. } if a.is_ground() || b.is_ground() => {
                return Err(MorError::ResistorToGround(e.name.clone()))
            }
            ElementKind::Resistor { .. } | ElementKind::Capacitor { .. } => {}
            _ => return Err(MorError::NotRc(e.name.clone())),
        }
    }
    let reach = resistive_reach(net, p);
    // internal unknowns: every non-ground node other than the port
    let mut index = vec![None; net.node_count()];
    let mut n = 0;
    for id in 1..net.node_count() {
        if id == p.0 {
            continue;
        }
        if !reach[id] {
            return Err(MorError::Singular {
                net: port.to_string(),
                node: net.node_name(NodeId(id)).to_string(),
            });
        }
        index[id] = Some(n);
        n += 1;
    }

    // port row (pp, pi) and internal block (ii, ip) of G and C
    let mut g = DMatrix::<f64>::zeros(n, n);
    let mut c = DMatrix::<f64>::zeros(n, n);
    let mut g_ip = DVector::<f64>::zeros(n);
    let mut c_ip = DVector::<f64>::zeros(n);
    for e in net.elements() {
        let (a, b, val, is_cap) = match e.kind {
            ElementKind::Resistor { a, b, ohms } => (a, b, 1.0 / ohms, false),
            ElementKind::Capacitor { a, b, farads } => (a, b, farads, true),
            _ => unreachable!("checked above"),
        };
        let (m, v) = if is_cap {
            (&mut c, &mut c_ip)
        } else {
            (&mut g, &mut g_ip)
        };
        let (ia, ib) = (index[a.0], index[b.0]);
        if let Some(i) = ia {
            m[(i, i)] += val;
        }
        if let Some(j) = ib {
            m[(j, j)] += val;
        }
        if let (Some(i), Some(j)) = (ia, ib) {
            m[(i, j)] -= val;
            m[(j, i)] -= val;
        }
        // coupling to the port
        if a == p {
            if let Some(j) = ib {
                v[j] -= val;
            }
        }
        if b == p {
            if let Some(i) = ia {
                v[i] -= val;
            }
        }
    }

    // With no resistor to ground every node sits at the port voltage at DC, so
    // m1 is exactly the sum of grounded capacitance.
    let mut y = [0.0; 3];
    let m1: f64 = net
        .elements()
        .iter()
        .filter_map(|e| match e.kind {
            ElementKind::Capacitor { a, b, farads } if a.is_ground() != b.is_ground() => Some(farads),
            _ => None,
        })
        .sum();
    if n > 0 {
        let lu = g.lu();
        let solve = |rhs: &DVector<f64>| -> Result<DVector<f64>, MorError> {
            lu.solve(rhs).ok_or_else(|| MorError::Singular {
                net: port.to_string(),
                node: port.to_string(),
            })
        };
        // C_pi = C_ip^T and G_pi = G_ip^T by symmetry
        let mut prev = DVector::from_element(n, 1.0);
        for (k, yk) in y.iter_mut().enumerate() {
            let rhs = if k == 0 { -(&c * &prev) - &c_ip } else { -(&c * &prev) };
            let x = solve(&rhs)?;
            // Y_{k+1} = G_pi x_{k+1} + C_pi x_k; the port's own C only enters m1
            *yk = g_ip.dot(&x) + c_ip.dot(&prev);
            prev = x;
        }
    }
    y[0] = m1;
    Ok(AdmittanceMoments { m: y })
}
