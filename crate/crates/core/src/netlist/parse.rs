// SPDX-License-Identifier: Apache-2.0

use super::units::parse_value;
use super::{
    Circuit, Element, ElementKind, MosfetModel, NetlistError, Polarity, SaturatedRamp, SourceSpec, TriangleGlitch,
    DEFAULT_CGATE_F_PER_M2,
};

/// Element line held back until all `.model` cards are known.
struct Pending {
    line: usize,
    tokens: Vec<String>,
}

fn syntax(line: usize, msg: impl Into<String>) -> NetlistError {
    NetlistError::Syntax { line, msg: msg.into() }
}

/// Splits a line into tokens; parentheses are separate tokens.
fn tokenize(line: &str) -> Vec<String> {
    line.replace('(', " ( ")
        .replace(')', " ) ")
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn value(line: usize, tok: &str) -> Result<f64, NetlistError> {
    parse_value(tok).ok_or_else(|| syntax(line, format!("invalid value `{tok}`")))
}

/// `KEY=value` parameter; returns the lower-cased key.
fn param(line: usize, tok: &str) -> Result<(String, f64), NetlistError> {
    let (k, v) = tok
        .split_once('=')
        .ok_or_else(|| syntax(line, format!("expected KEY=value, found `{tok}`")))?;
    Ok((k.to_ascii_lowercase(), value(line, v)?))
}

/// Values between `(` and `)` starting at `tokens[at]`.
fn paren_values(line: usize, tokens: &[String], at: usize) -> Result<Vec<f64>, NetlistError> {
    if tokens.get(at).map(String::as_str) != Some("(") {
        return Err(syntax(line, "expected `(`"));
    }
    let close = tokens[at..]
        .iter()
        .position(|t| t == ")")
        .ok_or_else(|| syntax(line, "missing `)`"))?
        + at;
    if close + 1 != tokens.len() {
        return Err(syntax(line, "unexpected tokens after `)`"));
    }
    tokens[at + 1..close].iter().map(|t| value(line, t)).collect()
}

fn parse_model(line: usize, tokens: &[String]) -> Result<(String, MosfetModel), NetlistError> {
    if tokens.len() < 3 {
        return Err(syntax(line, ".model needs a name and a type"));
    }
    let polarity = match tokens[2].to_ascii_lowercase().as_str() {
        "nmos" => Polarity::Nmos,
        "pmos" => Polarity::Pmos,
        other => return Err(syntax(line, format!("unsupported model type `{other}`"))),
    };
    let (mut vt0, mut kp, mut lambda, mut cgate) = (None, None, 0.0, DEFAULT_CGATE_F_PER_M2);
    for tok in &tokens[3..] {
        let (k, v) = param(line, tok)?;
        match k.as_str() {
            "vt0" => vt0 = Some(v),
            "kp" => kp = Some(v),
            "lambda" => lambda = v,
            "cgate" => cgate = v,
            _ => return Err(syntax(line, format!("unknown model parameter `{k}`"))),
        }
    }
    let vt0_v = vt0.ok_or_else(|| syntax(line, "model is missing VT0"))?;
    let kp_a_per_v2 = kp.ok_or_else(|| syntax(line, "model is missing KP"))?;
    if kp_a_per_v2 <= 0.0 {
        return Err(syntax(line, "KP must be positive"));
    }
    if lambda < 0.0 {
        return Err(syntax(line, "LAMBDA must be non-negative"));
    }
    if cgate <= 0.0 {
        return Err(syntax(line, "CGATE must be positive"));
    }
    Ok((
        tokens[1].to_ascii_lowercase(),
        MosfetModel {
            polarity,
            vt0_v,
            kp_a_per_v2,
            lambda_per_v: lambda,
            cgate_f_per_m2: cgate,
        },
    ))
}

fn parse_source(line: usize, tokens: &[String]) -> Result<SourceSpec, NetlistError> {
    let Some(kind) = tokens.get(3) else {
        return Err(syntax(line, "voltage source needs a value"));
    };
    let upper = kind.to_ascii_uppercase();
    let expect = |vals: Vec<f64>, n: usize, what: &str| {
        if vals.len() == n {
            Ok(vals)
        } else {
            Err(syntax(line, format!("{what} takes {n} values, found {}", vals.len())))
        }
    };
    match upper.as_str() {
        "DC" => {
            if tokens.len() != 5 {
                return Err(syntax(line, "expected `DC <value>`"));
            }
            Ok(SourceSpec::Dc {
                volts: value(line, &tokens[4])?,
            })
        }
        "PWL" => {
            let vals = paren_values(line, tokens, 4)?;
            if vals.is_empty() || vals.len() % 2 != 0 {
                return Err(syntax(line, "PWL needs time/value pairs"));
            }
            Ok(SourceSpec::Pwl {
                points: vals.chunks(2).map(|c| (c[0], c[1])).collect(),
            })
        }
        "SRAMP" => {
            let v = expect(paren_values(line, tokens, 4)?, 4, "SRAMP")?;
            Ok(SourceSpec::SaturatedRamp(SaturatedRamp {
                t0_s: v[0],
                slew_s: v[1],
                v_start: v[2],
                v_end: v[3],
            }))
        }
        "TRI" => {
            let v = expect(paren_values(line, tokens, 4)?, 5, "TRI")?;
            Ok(SourceSpec::TriangleGlitch(TriangleGlitch {
                t0_s: v[0],
                t_peak_s: v[1],
                t_end_s: v[2],
                v_base: v[3],
                v_peak: v[4],
            }))
        }
        _ if tokens.len() == 4 => Ok(SourceSpec::Dc {
            volts: value(line, kind)?,
        }),
        _ => Err(syntax(line, format!("unknown source type `{kind}`"))),
    }
}

fn parse_element(c: &mut Circuit, p: &Pending) -> Result<(), NetlistError> {
    let t = &p.tokens;
    let line = p.line;
    let name = t[0].clone();
    let head = name.chars().next().unwrap_or(' ').to_ascii_uppercase();
    let need = |n: usize| {
        if t.len() < n {
            Err(syntax(line, format!("`{name}`: too few fields")))
        } else {
            Ok(())
        }
    };
    let kind = match head {
        'R' | 'C' => {
            need(4)?;
            if t.len() != 4 {
                return Err(syntax(line, format!("`{name}`: unexpected trailing fields")));
            }
            let v = value(line, &t[3])?;
            let (a, b) = (c.node(&t[1]), c.node(&t[2]));
            if head == 'R' {
                ElementKind::Resistor { a, b, ohms: v }
            } else {
                ElementKind::Capacitor { a, b, farads: v }
            }
        }
        'V' => {
            need(4)?;
            let spec = parse_source(line, t)?;
            let (pos, neg) = (c.node(&t[1]), c.node(&t[2]));
            ElementKind::VSource { pos, neg, spec }
        }
        'M' => {
            need(6)?;
            let (mut w, mut l) = (None, None);
            for tok in &t[6..] {
                match param(line, tok)? {
                    (k, v) if k == "w" => w = Some(v),
                    (k, v) if k == "l" => l = Some(v),
                    (k, _) => return Err(syntax(line, format!("unknown device parameter `{k}`"))),
                }
            }
            let width_m = w.ok_or_else(|| syntax(line, format!("`{name}`: missing W")))?;
            let length_m = l.ok_or_else(|| syntax(line, format!("`{name}`: missing L")))?;
            let (d, g, s, b) = (c.node(&t[1]), c.node(&t[2]), c.node(&t[3]), c.node(&t[4]));
            ElementKind::Mosfet {
                d,
                g,
                s,
                b,
                model: t[5].to_ascii_lowercase(),
                width_m,
                length_m,
            }
        }
        _ => return Err(syntax(line, format!("unsupported element `{name}`"))),
    };
    c.add_element_at(Element { name, kind }, line)
}

/// Parses netlist text into an elaborated [`Circuit`]. Anything after
/// `.end` is ignored.
pub fn parse_netlist(text: &str) -> Result<Circuit, NetlistError> {
    let mut circuit = Circuit::new();
    let mut pending = Vec::new();
    let mut ended = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('*') {
            continue;
        }
        let tokens = tokenize(trimmed);
        let head = tokens[0].to_ascii_lowercase();
        if head == ".end" {
            if tokens.len() != 1 {
                return Err(syntax(line, "unexpected tokens after .end"));
            }
            ended = true;
            break;
        } else if head == ".model" {
            let (name, model) = parse_model(line, &tokens)?;
            circuit.add_model(&name, model);
        } else if head.starts_with('.') {
            return Err(syntax(line, format!("unsupported control card `{}`", tokens[0])));
        } else {
            pending.push(Pending { line, tokens });
        }
    }
    if !ended {
        return Err(NetlistError::MissingEnd {
            line: text.lines().count() + 1,
        });
    }
    for p in &pending {
        parse_element(&mut circuit, p)?;
    }
    Ok(circuit)
}
