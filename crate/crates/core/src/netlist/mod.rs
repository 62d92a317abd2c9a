// SPDX-License-Identifier: Apache-2.0

//! Circuit graph and the SPICE-subset netlist frontend.
//!
//! ```text
//! * comment
//! R<name> n1 n2 <value>
//! C<name> n1 n2 <value>
//! V<name> n+ n- DC <value>
//! V<name> n+ n- PWL( t1 v1 t2 v2 ... )
//! V<name> n+ n- SRAMP( t0 slew v0 v1 )
//! V<name> n+ n- TRI( t0 tpeak tend vbase vpeak )
//! M<name> nd ng ns nb <model> W=<value> L=<value>
//! .model <name> NMOS|PMOS VT0=<v> KP=<v> LAMBDA=<v> [CGATE=<v>]
//! .end
//! ```
//!
//! Keywords, node names and model names are case-insensitive and stored
//! lower-cased. Element names keep their spelling but must be unique
//! ignoring case. Ground is the node `0`.

mod parse;
mod source;
pub mod units;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::simcore::VccsTable;
pub use parse::parse_netlist;
pub use source::{SaturatedRamp, SourceSpec, TriangleGlitch};
use units::format_value;

/// Gate capacitance per unit area used when a model card omits `CGATE`
/// (8 fF/µm²).
pub const DEFAULT_CGATE_F_PER_M2: f64 = 8e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetlistError {
    #[error("line {line}: syntax error: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: duplicate element name `{name}`")]
    DuplicateElement { line: usize, name: String },
    #[error("line {line}: element `{element}` references unknown model `{model}`")]
    UnknownModel {
        line: usize,
        element: String,
        model: String,
    },
    /// `line` is the line just past the end of the text.
    #[error("line {line}: missing `.end` card")]
    MissingEnd { line: usize },
    #[error("line {line}: element `{element}`: {what} must be positive")]
    NonPositive {
        line: usize,
        element: String,
        what: &'static str,
    },
    #[error("line {line}: element `{element}`: {msg}")]
    InvalidSource { line: usize, element: String, msg: String },
}

/// Index into [`Circuit::nodes`]; `NodeId::GROUND` is node `0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

impl NodeId {
    pub const GROUND: NodeId = NodeId(0);

    pub fn is_ground(self) -> bool {
        self.0 == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Nmos,
    Pmos,
}

/// Level-1 device parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct MosfetModel {
    pub polarity: Polarity,
    pub vt0_v: f64,
    pub kp_a_per_v2: f64,
    pub lambda_per_v: f64,
    /// Gate capacitance per area, F/m².
    pub cgate_f_per_m2: f64,
}

impl MosfetModel {
    pub fn nmos(vt0_v: f64, kp_a_per_v2: f64, lambda_per_v: f64) -> Self {
        Self {
            polarity: Polarity::Nmos,
            vt0_v,
            kp_a_per_v2,
            lambda_per_v,
            cgate_f_per_m2: DEFAULT_CGATE_F_PER_M2,
        }
    }

    pub fn pmos(vt0_v: f64, kp_a_per_v2: f64, lambda_per_v: f64) -> Self {
        Self {
            polarity: Polarity::Pmos,
            ..Self::nmos(vt0_v, kp_a_per_v2, lambda_per_v)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElementKind {
    Resistor {
        a: NodeId,
        b: NodeId,
        ohms: f64,
    },
    Capacitor {
        a: NodeId,
        b: NodeId,
        farads: f64,
    },
    VSource {
        pos: NodeId,
        neg: NodeId,
        spec: SourceSpec,
    },
    /// Bulk is carried for completeness; it is tied to the source electrically.
    Mosfet {
        d: NodeId,
        g: NodeId,
        s: NodeId,
        b: NodeId,
        model: String,
        width_m: f64,
        length_m: f64,
    },
    /// Table-driven current source pushing `I(v(input), v(output))` from
    /// ground into `output`. The input is a pure voltage sense.
    TableVccs {
        input: NodeId,
        output: NodeId,
        table: Arc<VccsTable>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub kind: ElementKind,
}

impl Element {
    pub fn nodes(&self) -> Vec<NodeId> {
        match &self.kind {
            ElementKind::Resistor { a, b, .. } | ElementKind::Capacitor { a, b, .. } => vec![*a, *b],
            ElementKind::VSource { pos, neg, .. } => vec![*pos, *neg],
            ElementKind::Mosfet { d, g, s, b, .. } => vec![*d, *g, *s, *b],
            ElementKind::TableVccs { input, output, .. } => vec![*input, *output],
        }
    }
}

/// Elaborated circuit. Nodes are numbered in order of first use, ground first.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    nodes: Vec<String>,
    index: HashMap<String, NodeId>,
    elements: Vec<Element>,
    names: HashSet<String>,
    models: BTreeMap<String, MosfetModel>,
}

impl Default for Circuit {
    fn default() -> Self {
        Self::new()
    }
}

impl Circuit {
    pub fn new() -> Self {
        let mut index = HashMap::new();
        index.insert("0".to_string(), NodeId::GROUND);
        Self {
            nodes: vec!["0".to_string()],
            index,
            elements: Vec::new(),
            names: HashSet::new(),
            models: BTreeMap::new(),
        }
    }

    /// Returns the id for `name`, creating the node on first use.
    pub fn node(&mut self, name: &str) -> NodeId {
        let key = name.to_ascii_lowercase();
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(key.clone());
        self.index.insert(key, id);
        id
    }

    pub fn find_node(&self, name: &str) -> Option<NodeId> {
        self.index.get(&name.to_ascii_lowercase()).copied()
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.nodes[id.0]
    }

    /// All node names, ground first.
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name.eq_ignore_ascii_case(name))
    }

    pub fn models(&self) -> &BTreeMap<String, MosfetModel> {
        &self.models
    }

    pub fn model(&self, name: &str) -> Option<&MosfetModel> {
        self.models.get(&name.to_ascii_lowercase())
    }

    pub fn add_model(&mut self, name: &str, model: MosfetModel) {
        self.models.insert(name.to_ascii_lowercase(), model);
    }

    /// Appends an element after checking name uniqueness, positivity and
    /// model references. `line` is only used for error reporting.
    pub fn add_element_at(&mut self, element: Element, line: usize) -> Result<(), NetlistError> {
        let key = element.name.to_ascii_lowercase();
        if self.names.contains(&key) {
            return Err(NetlistError::DuplicateElement {
                line,
                name: element.name,
            });
        }
        let nonpositive = |what| NetlistError::NonPositive {
            line,
            element: element.name.clone(),
            what,
        };
        match &element.kind {
            ElementKind::Resistor { ohms, .. } if !(*ohms > 0.0 && ohms.is_finite()) => {
                return Err(nonpositive("resistance"));
            }
            ElementKind::Capacitor { farads, .. } if !(*farads > 0.0 && farads.is_finite()) => {
                return Err(nonpositive("capacitance"));
            }
            ElementKind::Mosfet {
                model,
                width_m,
                length_m,
                ..
            } => {
                if !(*width_m > 0.0 && width_m.is_finite()) {
                    return Err(nonpositive("W"));
                }
                if !(*length_m > 0.0 && length_m.is_finite()) {
                    return Err(nonpositive("L"));
                }
                if !self.models.contains_key(&model.to_ascii_lowercase()) {
                    return Err(NetlistError::UnknownModel {
                        line,
                        element: element.name.clone(),
                        model: model.clone(),
                    });
                }
            }
            ElementKind::VSource { spec, .. } => {
                if let Err(msg) = spec.validate() {
                    return Err(NetlistError::InvalidSource {
                        line,
                        element: element.name.clone(),
                        msg,
                    });
                }
            }
            _ => {}
        }
        self.names.insert(key);
        self.elements.push(element);
        Ok(())
    }

    pub fn add_element(&mut self, element: Element) -> Result<(), NetlistError> {
        self.add_element_at(element, 0)
    }

    pub fn add_resistor(&mut self, name: &str, a: &str, b: &str, ohms: f64) -> Result<(), NetlistError> {
        let (a, b) = (self.node(a), self.node(b));
        self.add_element(Element {
            name: name.into(),
            kind: ElementKind::Resistor { a, b, ohms },
        })
    }

    pub fn add_capacitor(&mut self, name: &str, a: &str, b: &str, farads: f64) -> Result<(), NetlistError> {
        let (a, b) = (self.node(a), self.node(b));
        self.add_element(Element {
            name: name.into(),
            kind: ElementKind::Capacitor { a, b, farads },
        })
    }

    pub fn add_vsource(&mut self, name: &str, pos: &str, neg: &str, spec: SourceSpec) -> Result<(), NetlistError> {
        let (pos, neg) = (self.node(pos), self.node(neg));
        self.add_element(Element {
            name: name.into(),
            kind: ElementKind::VSource { pos, neg, spec },
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn add_mosfet(
        &mut self,
        name: &str,
        d: &str,
        g: &str,
        s: &str,
        b: &str,
        model: &str,
        width_m: f64,
        length_m: f64,
    ) -> Result<(), NetlistError> {
        let (d, g, s, b) = (self.node(d), self.node(g), self.node(s), self.node(b));
        self.add_element(Element {
            name: name.into(),
            kind: ElementKind::Mosfet {
                d,
                g,
                s,
                b,
                model: model.to_ascii_lowercase(),
                width_m,
                length_m,
            },
        })
    }

    pub fn add_table_vccs(
        &mut self,
        name: &str,
        input: &str,
        output: &str,
        table: Arc<VccsTable>,
    ) -> Result<(), NetlistError> {
        let (input, output) = (self.node(input), self.node(output));
        self.add_element(Element {
            name: name.into(),
            kind: ElementKind::TableVccs { input, output, table },
        })
    }

    /// Copies every element of `cell` into `self`. Nodes listed in
    /// `pin_map` are renamed to the mapped node; other non-ground nodes get
    /// `prefix.` prepended. Element and model names gain `prefix_` after
    /// their type letter.
    pub fn instantiate(&mut self, cell: &Circuit, prefix: &str, pin_map: &[(&str, &str)]) -> Result<(), NetlistError> {
        let mapped: HashMap<String, String> = pin_map
            .iter()
            .map(|(p, n)| (p.to_ascii_lowercase(), n.to_ascii_lowercase()))
            .collect();
        let rename = |circuit: &mut Circuit, id: NodeId| -> NodeId {
            let name = cell.node_name(id);
            if id.is_ground() {
                NodeId::GROUND
            } else if let Some(target) = mapped.get(name) {
                circuit.node(target)
            } else {
                circuit.node(&format!("{prefix}.{name}"))
            }
        };
        for (name, model) in &cell.models {
            self.add_model(&format!("{prefix}_{name}"), model.clone());
        }
        for e in &cell.elements {
            let mut chars = e.name.chars();
            let head: String = chars.next().into_iter().collect();
            let name = format!("{head}{prefix}_{}", chars.as_str());
            let kind = match &e.kind {
                ElementKind::Resistor { a, b, ohms } => ElementKind::Resistor {
                    a: rename(self, *a),
                    b: rename(self, *b),
                    ohms: *ohms,
                },
                ElementKind::Capacitor { a, b, farads } => ElementKind::Capacitor {
                    a: rename(self, *a),
                    b: rename(self, *b),
                    farads: *farads,
                },
                ElementKind::VSource { pos, neg, spec } => ElementKind::VSource {
                    pos: rename(self, *pos),
                    neg: rename(self, *neg),
                    spec: spec.clone(),
                },
                ElementKind::Mosfet {
                    d,
                    g,
                    s,
                    b,
                    model,
                    width_m,
                    length_m,
                } => ElementKind::Mosfet {
                    d: rename(self, *d),
                    g: rename(self, *g),
                    s: rename(self, *s),
                    b: rename(self, *b),
                    model: format!("{prefix}_{model}"),
                    width_m: *width_m,
                    length_m: *length_m,
                },
                ElementKind::TableVccs { input, output, table } => ElementKind::TableVccs {
                    input: rename(self, *input),
                    output: rename(self, *output),
                    table: table.clone(),
                },
            };
            self.add_element(Element { name, kind })?;
        }
        Ok(())
    }

    /// Replaces the specification of an existing voltage source.
    pub fn set_source(&mut self, name: &str, spec: SourceSpec) -> bool {
        for e in &mut self.elements {
            if e.name.eq_ignore_ascii_case(name) {
                if let ElementKind::VSource { spec: s, .. } = &mut e.kind {
                    *s = spec;
                    return true;
                }
            }
        }
        false
    }

    /// Pretty-prints the circuit in the netlist grammar. Table-driven
    /// sources have no textual form and are emitted as comments.
    pub fn to_netlist(&self) -> String {
        let f = format_value;
        let mut out = String::new();
        for (name, m) in &self.models {
            let pol = match m.polarity {
                Polarity::Nmos => "NMOS",
                Polarity::Pmos => "PMOS",
            };
            let _ = writeln!(
                out,
                ".model {name} {pol} VT0={} KP={} LAMBDA={} CGATE={}",
                f(m.vt0_v),
                f(m.kp_a_per_v2),
                f(m.lambda_per_v),
                f(m.cgate_f_per_m2)
            );
        }
        let n = |id: &NodeId| self.node_name(*id);
        for e in &self.elements {
            let _ = match &e.kind {
                ElementKind::Resistor { a, b, ohms } => {
                    writeln!(out, "{} {} {} {}", e.name, n(a), n(b), f(*ohms))
                }
                ElementKind::Capacitor { a, b, farads } => {
                    writeln!(out, "{} {} {} {}", e.name, n(a), n(b), f(*farads))
                }
                ElementKind::VSource { pos, neg, spec } => {
                    writeln!(out, "{} {} {} {}", e.name, n(pos), n(neg), spec.to_netlist())
                }
                ElementKind::Mosfet {
                    d,
                    g,
                    s,
                    b,
                    model,
                    width_m,
                    length_m,
                } => writeln!(
                    out,
                    "{} {} {} {} {} {} W={} L={}",
                    e.name,
                    n(d),
                    n(g),
                    n(s),
                    n(b),
                    model,
                    f(*width_m),
                    f(*length_m)
                ),
                ElementKind::TableVccs { input, output, .. } => {
                    writeln!(out, "* table vccs {} {} {}", e.name, n(input), n(output))
                }
            };
        }
        out.push_str(".end\n");
        out
    }
}
