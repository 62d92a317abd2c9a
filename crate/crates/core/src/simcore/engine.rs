// SPDX-License-Identifier: Apache-2.0

//! MNA assembly, Newton iteration, DC operating point and trapezoidal transient.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::mosfet::mosfet_eval;
use super::{SimError, SimOptions, VccsTable, Waveform};
use crate::netlist::{Circuit, ElementKind, MosfetModel, NodeId, SourceSpec};

type Idx = Option<usize>;

enum Stamp {
    Conductance {
        a: Idx,
        b: Idx,
        g: f64,
    },
    Capacitor {
        a: Idx,
        b: Idx,
        farads: f64,
        slot: usize,
    },
    Source {
        pos: Idx,
        neg: Idx,
        branch: usize,
        slot: usize,
    },
    Mosfet {
        d: Idx,
        g: Idx,
        s: Idx,
        model: MosfetModel,
        width_m: f64,
        length_m: f64,
    },
    Vccs {
        input: Idx,
        output: Idx,
        table: Arc<VccsTable>,
    },
}

/// Integration rule applied to capacitors for one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepMethod {
    BackwardEuler,
    Trapezoidal,
}

#[derive(Clone, Copy)]
enum Mode {
    Dc,
    Step { method: StepMethod, h: f64 },
}

/// Circuit compiled to unknown indices.
struct System {
    n_nodes: usize,
    size: usize,
    stamps: Vec<Stamp>,
    sources: Vec<(String, SourceSpec)>,
    caps: Vec<String>,
}

fn idx(id: NodeId) -> Idx {
    (!id.is_ground()).then(|| id.0 - 1)
}

impl System {
    fn compile(circuit: &Circuit) -> Result<Self, SimError> {
        let n_nodes = circuit.node_count() - 1;
        let mut stamps = Vec::new();
        let mut sources = Vec::new();
        let mut caps = Vec::new();
        for e in circuit.elements() {
            match &e.kind {
                ElementKind::Resistor { a, b, ohms } => stamps.push(Stamp::Conductance {
                    a: idx(*a),
                    b: idx(*b),
                    g: 1.0 / ohms,
                }),
                ElementKind::Capacitor { a, b, farads } => {
                    stamps.push(Stamp::Capacitor {
                        a: idx(*a),
                        b: idx(*b),
                        farads: *farads,
                        slot: caps.len(),
                    });
                    caps.push(e.name.clone());
                }
                ElementKind::VSource { pos, neg, spec } => {
                    stamps.push(Stamp::Source {
                        pos: idx(*pos),
                        neg: idx(*neg),
                        branch: n_nodes + sources.len(),
                        slot: sources.len(),
                    });
                    sources.push((e.name.to_ascii_lowercase(), spec.clone()));
                }
                ElementKind::Mosfet {
                    d,
                    g,
                    s,
                    model,
                    width_m,
                    length_m,
                    ..
                } => {
                    let model = circuit
                        .model(model)
                        .ok_or_else(|| SimError::UnknownModel(model.clone()))?
                        .clone();
                    stamps.push(Stamp::Mosfet {
                        d: idx(*d),
                        g: idx(*g),
                        s: idx(*s),
                        model,
                        width_m: *width_m,
                        length_m: *length_m,
                    });
                }
                ElementKind::TableVccs { input, output, table } => stamps.push(Stamp::Vccs {
                    input: idx(*input),
                    output: idx(*output),
                    table: table.clone(),
                }),
            }
        }
        Ok(Self {
            n_nodes,
            size: n_nodes + sources.len(),
            stamps,
            sources,
            caps,
        })
    }

    fn source_values(&self, t: f64, overrides: &HashMap<String, f64>) -> Vec<f64> {
        self.sources
            .iter()
            .map(|(name, spec)| overrides.get(name).copied().unwrap_or_else(|| spec.eval(t)))
            .collect()
    }

    /// Linearized system `a * x_next = z` around `x`.
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        &self,
        a: &mut DMatrix<f64>,
        z: &mut DVector<f64>,
        x: &DVector<f64>,
        mode: Mode,
        src: &[f64],
        hist: &CapHistory,
        gmin: f64,
    ) {
        a.fill(0.0);
        z.fill(0.0);
        let v = |i: Idx| i.map_or(0.0, |k| x[k]);
        for k in 0..self.n_nodes {
            a[(k, k)] += gmin;
        }
        let add = |a: &mut DMatrix<f64>, r: Idx, c: Idx, val: f64| {
            if let (Some(r), Some(c)) = (r, c) {
                a[(r, c)] += val;
            }
        };
        let inject = |z: &mut DVector<f64>, r: Idx, val: f64| {
            if let Some(r) = r {
                z[r] += val;
            }
        };
        for s in &self.stamps {
            match s {
                Stamp::Conductance { a: p, b: n, g } => {
                    add(a, *p, *p, *g);
                    add(a, *n, *n, *g);
                    add(a, *p, *n, -g);
                    add(a, *n, *p, -g);
                }
                Stamp::Capacitor {
                    a: p,
                    b: n,
                    farads,
                    slot,
                } => {
                    let Mode::Step { method, h } = mode else {
                        continue;
                    };
                    let (geq, ihist) = match method {
                        StepMethod::BackwardEuler => {
                            let g = farads / h;
                            (g, g * hist.v[*slot])
                        }
                        StepMethod::Trapezoidal => {
                            let g = 2.0 * farads / h;
                            (g, g * hist.v[*slot] + hist.i[*slot])
                        }
                    };
                    add(a, *p, *p, geq);
                    add(a, *n, *n, geq);
                    add(a, *p, *n, -geq);
                    add(a, *n, *p, -geq);
                    inject(z, *p, ihist);
                    inject(z, *n, -ihist);
                }
                Stamp::Source { pos, neg, branch, slot } => {
                    add(a, *pos, Some(*branch), 1.0);
                    add(a, *neg, Some(*branch), -1.0);
                    add(a, Some(*branch), *pos, 1.0);
                    add(a, Some(*branch), *neg, -1.0);
                    z[*branch] = src[*slot];
                }
                Stamp::Mosfet {
                    d,
                    g,
                    s: so,
                    model,
                    width_m,
                    length_m,
                } => {
                    let vgs = v(*g) - v(*so);
                    let vds = v(*d) - v(*so);
                    let e = mosfet_eval(model, *width_m, *length_m, vgs, vds);
                    let ieq = e.id - e.gm * vgs - e.gds * vds;
                    add(a, *d, *g, e.gm);
                    add(a, *d, *d, e.gds);
                    add(a, *d, *so, -(e.gm + e.gds));
                    add(a, *so, *g, -e.gm);
                    add(a, *so, *d, -e.gds);
                    add(a, *so, *so, e.gm + e.gds);
                    inject(z, *d, -ieq);
                    inject(z, *so, ieq);
                }
                Stamp::Vccs { input, output, table } => {
                    let (vi, vo) = (v(*input), v(*output));
                    let smp = table.eval(vi, vo);
                    add(a, *output, *input, -smp.di_dvin);
                    add(a, *output, *output, -smp.di_dvout);
                    inject(z, *output, smp.i_a - smp.di_dvin * vi - smp.di_dvout * vo);
                }
            }
        }
    }
}

/// Capacitor voltages and currents at the last accepted point.
#[derive(Clone)]
struct CapHistory {
    v: Vec<f64>,
    i: Vec<f64>,
}

impl CapHistory {
    fn zeros(n: usize) -> Self {
        Self {
            v: vec![0.0; n],
            i: vec![0.0; n],
        }
    }
}

enum NewtonFailure {
    Singular,
    NoConvergence { residual: f64, iterations: usize },
}

struct Solver<'a> {
    sys: &'a System,
    opts: &'a SimOptions,
    a: DMatrix<f64>,
    z: DVector<f64>,
}

impl<'a> Solver<'a> {
    fn new(sys: &'a System, opts: &'a SimOptions) -> Self {
        Self {
            sys,
            opts,
            a: DMatrix::zeros(sys.size, sys.size),
            z: DVector::zeros(sys.size),
        }
    }

    /// Damped Newton iteration. Converges when both the residual (at the
    /// current iterate) and the update are within tolerance.
    fn newton(
        &mut self,
        x: &mut DVector<f64>,
        mode: Mode,
        src: &[f64],
        hist: &CapHistory,
    ) -> Result<usize, NewtonFailure> {
        let n = &self.opts.newton;
        let nn = self.sys.n_nodes;
        let mut last_residual = f64::INFINITY;
        for iter in 1..=n.max_newton_iters {
            self.sys
                .assemble(&mut self.a, &mut self.z, x, mode, src, hist, n.gmin_s);
            let r = &self.a * &*x - &self.z;
            let residual_ok = r.iter().enumerate().all(|(k, &rk)| {
                if k < nn {
                    rk.abs() <= n.iabstol_a
                } else {
                    rk.abs() <= n.vabstol_v
                }
            });
            last_residual = r.iter().take(nn).fold(0.0f64, |m, &q| m.max(q.abs()));
            let Some(next) = self.a.clone().lu().solve(&self.z) else {
                return Err(NewtonFailure::Singular);
            };
            if next.iter().any(|q| !q.is_finite()) {
                return Err(NewtonFailure::Singular);
            }
            let mut delta_ok = true;
            let mut limited = false;
            for k in 0..self.sys.size {
                let mut d = next[k] - x[k];
                if k < nn && d.abs() > n.max_voltage_step_v {
                    d = n.max_voltage_step_v.copysign(d);
                    limited = true;
                }
                let scale = next[k].abs().max(x[k].abs());
                let tol = if k < nn {
                    n.vabstol_v + n.reltol * scale
                } else {
                    n.iabstol_a + n.reltol * scale
                };
                if d.abs() > tol {
                    delta_ok = false;
                }
                x[k] += d;
            }
            if residual_ok && delta_ok && !limited {
                return Ok(iter);
            }
        }
        Err(NewtonFailure::NoConvergence {
            residual: last_residual,
            iterations: n.max_newton_iters,
        })
    }

    fn cap_voltages(&self, x: &DVector<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.sys.caps.len()];
        for s in &self.sys.stamps {
            if let Stamp::Capacitor { a, b, slot, .. } = s {
                let v = |i: &Idx| i.map_or(0.0, |k| x[k]);
                out[*slot] = v(a) - v(b);
            }
        }
        out
    }

    fn cap_currents(&self, hist: &CapHistory, v_new: &[f64], method: StepMethod, h: f64) -> Vec<f64> {
        let mut out = vec![0.0; v_new.len()];
        for s in &self.sys.stamps {
            if let Stamp::Capacitor { farads, slot, .. } = s {
                let dv = v_new[*slot] - hist.v[*slot];
                out[*slot] = match method {
                    StepMethod::BackwardEuler => farads / h * dv,
                    StepMethod::Trapezoidal => 2.0 * farads / h * dv - hist.i[*slot],
                };
            }
        }
        out
    }

    fn dc(&mut self, t: f64, overrides: &HashMap<String, f64>) -> Result<DVector<f64>, SimError> {
        let src = self.sys.source_values(t, overrides);
        let mut x = DVector::zeros(self.sys.size);
        let hist = CapHistory::zeros(self.sys.caps.len());
        match self.newton(&mut x, Mode::Dc, &src, &hist) {
            Ok(_) => Ok(x),
            Err(NewtonFailure::Singular) => Err(SimError::Singular { time_s: t }),
            Err(NewtonFailure::NoConvergence { residual, iterations }) => Err(SimError::NonConvergence {
                time_s: t,
                iterations,
                residual_a: residual,
            }),
        }
    }
}

/// DC node voltages and source branch currents.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    names: Vec<String>,
    voltages: Vec<f64>,
    branch: BTreeMap<String, f64>,
}

impl OperatingPoint {
    pub fn voltage(&self, node: &str) -> Option<f64> {
        let key = node.to_ascii_lowercase();
        self.names.iter().position(|n| *n == key).map(|k| self.voltages[k])
    }

    /// Node voltages keyed by node name (ground included).
    pub fn voltages(&self) -> BTreeMap<String, f64> {
        self.names.iter().cloned().zip(self.voltages.iter().copied()).collect()
    }

    /// Current entering the source at its `+` terminal and leaving at `-`.
    pub fn source_current(&self, name: &str) -> Option<f64> {
        self.branch.get(&name.to_ascii_lowercase()).copied()
    }
}

fn unpack(circuit: &Circuit, sys: &System, x: &DVector<f64>) -> OperatingPoint {
    let mut voltages = vec![0.0];
    voltages.extend(x.iter().take(sys.n_nodes));
    let branch = sys
        .sources
        .iter()
        .enumerate()
        .map(|(k, (name, _))| (name.clone(), x[sys.n_nodes + k]))
        .collect();
    OperatingPoint {
        names: circuit.nodes().to_vec(),
        voltages,
        branch,
    }
}

fn check_overrides(sys: &System, overrides: &HashMap<String, f64>) -> Result<HashMap<String, f64>, SimError> {
    let mut out = HashMap::new();
    for (k, &v) in overrides {
        let key = k.to_ascii_lowercase();
        if !sys.sources.iter().any(|(n, _)| *n == key) {
            return Err(SimError::UnknownSource(k.clone()));
        }
        out.insert(key, v);
    }
    Ok(out)
}

/// Newton-converged DC solution with the sources at their `t = 0` values,
/// except those named in `source_values`.
pub fn dc_operating_point(
    circuit: &Circuit,
    source_values: &HashMap<String, f64>,
    opts: &SimOptions,
) -> Result<OperatingPoint, SimError> {
    opts.newton.validate()?;
    let sys = System::compile(circuit)?;
    let overrides = check_overrides(&sys, source_values)?;
    let mut solver = Solver::new(&sys, opts);
    let x = solver.dc(0.0, &overrides)?;
    Ok(unpack(circuit, &sys, &x))
}

/// Reusable DC solver for sweeps over source values on a fixed circuit.
/// Every solve starts cold, so results match [`dc_operating_point`] exactly.
pub struct DcSweeper {
    circuit: Circuit,
    sys: System,
    opts: SimOptions,
}

impl DcSweeper {
    pub fn new(circuit: &Circuit, opts: &SimOptions) -> Result<Self, SimError> {
        opts.newton.validate()?;
        Ok(Self {
            circuit: circuit.clone(),
            sys: System::compile(circuit)?,
            opts: opts.clone(),
        })
    }

    pub fn solve(&self, source_values: &HashMap<String, f64>) -> Result<OperatingPoint, SimError> {
        let overrides = check_overrides(&self.sys, source_values)?;
        let mut solver = Solver::new(&self.sys, &self.opts);
        let x = solver.dc(0.0, &overrides)?;
        Ok(unpack(&self.circuit, &self.sys, &x))
    }
}

/// Every accepted time point of a transient run.
#[derive(Debug, Clone)]
pub struct TransientResult {
    names: Vec<String>,
    size: usize,
    n_nodes: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    cap_names: Vec<String>,
    cap_currents: Vec<f64>,
    methods: Vec<StepMethod>,
}

impl TransientResult {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Integration method of each accepted step (`methods()[k]` advanced the
    /// solution from `times()[k]` to `times()[k + 1]`).
    pub fn methods(&self) -> &[StepMethod] {
        &self.methods
    }

    fn node_column(&self, node: &str) -> Option<Option<usize>> {
        let key = node.to_ascii_lowercase();
        let k = self.names.iter().position(|n| *n == key)?;
        Some((k > 0).then(|| k - 1))
    }

    pub fn waveform(&self, node: &str) -> Option<Waveform> {
        let col = self.node_column(node)?;
        let v = (0..self.times.len())
            .map(|s| col.map_or(0.0, |c| self.states[s * self.size + c]))
            .collect();
        Waveform::new(self.times.clone(), v).ok()
    }

    /// Current through a capacitor (from its first to its second node) at
    /// every accepted time point, as computed by the integration rule.
    pub fn capacitor_current(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.cap_names.iter().position(|n| n.eq_ignore_ascii_case(name))?;
        let n = self.cap_names.len();
        Some((0..self.times.len()).map(|s| self.cap_currents[s * n + k]).collect())
    }

    pub fn node_count(&self) -> usize {
        self.n_nodes
    }
}

/// Transient analysis from the `t = 0` operating point with a fixed base
/// step. A step whose Newton solve fails is retried with the step halved,
/// up to `max_step_halvings` times; the first step and the first sub-step
/// after a halving use backward Euler, all others the trapezoidal rule.
pub fn transient_full(circuit: &Circuit, opts: &SimOptions) -> Result<TransientResult, SimError> {
    opts.validate()?;
    let sys = System::compile(circuit)?;
    let mut solver = Solver::new(&sys, opts);
    let none = HashMap::new();
    let mut x = solver.dc(0.0, &none)?;
    let ncap = sys.caps.len();
    let mut hist = CapHistory {
        v: solver.cap_voltages(&x),
        i: vec![0.0; ncap],
    };

    let steps = (opts.t_stop_s / opts.dt_s - 1e-9).ceil().max(1.0) as usize;
    let mut times = vec![0.0];
    let mut states: Vec<f64> = x.iter().copied().collect();
    let mut cap_currents = hist.i.clone();
    let mut methods = Vec::new();

    for n in 1..=steps {
        let t_from = *times.last().unwrap_or(&0.0);
        let t_to = if n == steps {
            opts.t_stop_s
        } else {
            (n as f64 * opts.dt_s).min(opts.t_stop_s)
        };
        let mut level = 0u32;
        loop {
            let subs = 1usize << level;
            let h = (t_to - t_from) / subs as f64;
            let mut xs = x.clone();
            let mut hs = hist.clone();
            let mut accepted = Vec::with_capacity(subs);
            let mut failure = None;
            for k in 0..subs {
                let t = if k + 1 == subs {
                    t_to
                } else {
                    t_from + h * (k + 1) as f64
                };
                let method = if (n == 1 && k == 0) || (level > 0 && k == 0) {
                    StepMethod::BackwardEuler
                } else {
                    StepMethod::Trapezoidal
                };
                let src = sys.source_values(t, &none);
                match solver.newton(&mut xs, Mode::Step { method, h }, &src, &hs) {
                    Ok(_) => {
                        let v_new = solver.cap_voltages(&xs);
                        let i_new = solver.cap_currents(&hs, &v_new, method, h);
                        hs = CapHistory { v: v_new, i: i_new };
                        accepted.push((t, xs.clone(), hs.i.clone(), method));
                    }
                    Err(e) => {
                        failure = Some((t, e));
                        break;
                    }
                }
            }
            match failure {
                None => {
                    for (t, xv, iv, m) in accepted {
                        times.push(t);
                        states.extend(xv.iter());
                        cap_currents.extend(iv);
                        methods.push(m);
                    }
                    x = xs;
                    hist = hs;
                    break;
                }
                Some((t, e)) if level >= opts.max_step_halvings => {
                    return Err(match e {
                        NewtonFailure::Singular => SimError::Singular { time_s: t },
                        NewtonFailure::NoConvergence { residual, iterations } => SimError::NonConvergence {
                            time_s: t,
                            iterations,
                            residual_a: residual,
                        },
                    });
                }
                Some(_) => level += 1,
            }
        }
    }

    Ok(TransientResult {
        names: circuit.nodes().to_vec(),
        size: sys.size,
        n_nodes: sys.n_nodes,
        times,
        states,
        cap_names: sys.caps,
        cap_currents,
        methods,
    })
}

/// Transient analysis returning only the requested node waveforms.
pub fn transient(
    circuit: &Circuit,
    opts: &SimOptions,
    probes: &[&str],
) -> Result<BTreeMap<String, Waveform>, SimError> {
    for p in probes {
        if circuit.find_node(p).is_none() {
            return Err(SimError::UnknownNode(p.to_string()));
        }
    }
    let res = transient_full(circuit, opts)?;
    probes
        .iter()
        .map(|p| {
            let w = res.waveform(p).ok_or_else(|| SimError::UnknownNode(p.to_string()))?;
            Ok((p.to_ascii_lowercase(), w))
        })
        .collect()
}
