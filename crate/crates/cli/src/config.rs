// SPDX-License-Identifier: Apache-2.0

//! Cluster configuration file (TOML) and its translation into macromodel
//! and transistor-level cluster descriptions.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use snacluster::characterize::{
    build_vccs_table, fit_thevenin, CellPins, NoiseRejectionCurve, ReceiverModel, TheveninDriver,
};
use snacluster::cluster::{
    AggressorSpec, ClusterSpec, OracleAggressor, OracleCell, OracleNet, OracleSpec, OracleVictim, VictimSpec,
};
use snacluster::mor::{build_coupled_pi, split_interconnect, CoupledPiModel};
use snacluster::netlist::units::parse_value;
use snacluster::netlist::{parse_netlist, Circuit, SaturatedRamp, SourceSpec, TriangleGlitch};
use snacluster::simcore::{NewtonOptions, SimOptions, VccsTable};

/// A number written either as a TOML float/integer or as a string with an
/// engineering suffix (`"200p"`, `"25f"`).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Num {
    pub fn get(&self) -> Result<f64> {
        match self {
            Num::Float(v) => Ok(*v),
            Num::Int(v) => Ok(*v as f64),
            Num::Text(s) => parse_value(s).with_context(|| format!("bad number `{s}`")),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub vdd: Num,
    pub interconnect: InterconnectCfg,
    pub victim: VictimCfg,
    #[serde(default)]
    pub aggressor: BTreeMap<String, AggressorCfg>,
    pub sim: SimCfg,
    pub nrc: Option<NrcCfg>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterconnectCfg {
    /// Full RC network of every cluster net.
    pub netlist: PathBuf,
    /// Reduced-model CSV; the netlist is reduced on load when absent.
    pub reduced: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlitchCfg {
    pub t0: Num,
    /// Time above half height.
    pub width: Num,
    /// Input level at the tip of the glitch.
    pub peak: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VictimCfg {
    pub net: String,
    pub driving: String,
    pub receiver: String,
    pub cell: PathBuf,
    pub input: String,
    pub output: String,
    #[serde(default)]
    pub fixed: BTreeMap<String, Num>,
    pub vccs: Option<PathBuf>,
    pub grid: Option<usize>,
    pub v_in_q: Num,
    pub receiver_cap: Num,
    pub glitch: Option<GlitchCfg>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampCfg {
    pub t0: Num,
    pub slew: Num,
    pub from: Num,
    pub to: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggressorCfg {
    pub net: String,
    pub driving: String,
    pub receiver: String,
    pub cell: PathBuf,
    pub input: String,
    pub output: String,
    #[serde(default)]
    pub fixed: BTreeMap<String, Num>,
    /// Input ramp of the aggressor cell.
    pub ramp: RampCfg,
    /// Thevenin CSV fitted for `ramp`; fitted on load when absent.
    pub thevenin: Option<PathBuf>,
    /// Probe load for an on-load fit (default: the net's capacitance plus its receiver).
    pub load: Option<Num>,
    pub offset: Option<Num>,
    pub receiver_cap: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimCfg {
    pub t_stop: Num,
    pub dt: Option<Num>,
    #[serde(default)]
    pub align: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NrcCfg {
    pub curve: PathBuf,
}

/// Everything the three analysis modes need.
#[derive(Debug, Clone)]
pub struct LoadedCluster {
    pub spec: ClusterSpec,
    pub oracle: OracleSpec,
    pub sim: SimOptions,
    pub align: bool,
    pub nrc: Option<NoiseRejectionCurve>,
}

pub fn read_cell(path: &Path) -> Result<Circuit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_netlist(&text).with_context(|| format!("parsing {}", path.display()))
}

fn pins(input: &str, output: &str, fixed: &BTreeMap<String, Num>) -> Result<CellPins> {
    let mut p = CellPins::new(input, output);
    for (pin, v) in fixed {
        p = p.with_fixed(pin, v.get()?);
    }
    Ok(p)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

impl Config {
    pub fn read(path: &Path) -> Result<(Self, PathBuf)> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Config = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn load(&self, base: &Path) -> Result<LoadedCluster> {
        let at = |p: &Path| base.join(p);
        let vdd = self.vdd.get()?;
        let newton = NewtonOptions::default();
        let lines = read_cell(&at(&self.interconnect.netlist))?;

        let v = &self.victim;
        let mut nets = vec![OracleNet {
            name: v.net.clone(),
            driving: v.driving.clone(),
            receiver: v.receiver.clone(),
        }];
        for a in self.aggressor.values() {
            nets.push(OracleNet {
                name: a.net.clone(),
                driving: a.driving.clone(),
                receiver: a.receiver.clone(),
            });
        }
        let interconnect = match &self.interconnect.reduced {
            Some(p) => CoupledPiModel::read_csv(open(&at(p))?).with_context(|| format!("reading {}", p.display()))?,
            None => {
                let ports: Vec<(&str, &str)> = nets.iter().map(|n| (n.name.as_str(), n.driving.as_str())).collect();
                let (specs, couplings) = split_interconnect(&lines, &ports)?;
                build_coupled_pi(&specs, &couplings)?
            }
        };

        let v_cell = read_cell(&at(&v.cell))?;
        let v_pins = pins(&v.input, &v.output, &v.fixed)?;
        let table = match &v.vccs {
            Some(p) => VccsTable::read_csv(open(&at(p))?).with_context(|| format!("reading {}", p.display()))?,
            None => build_vccs_table(&v_cell, &v_pins, vdd, v.grid.unwrap_or(25), &newton)?,
        };
        let v_in_q = v.v_in_q.get()?;
        let rx = ReceiverModel::new(v.receiver_cap.get()?)?;
        let mut victim = VictimSpec::at_rest(&v.net, Arc::new(table), v_in_q, rx)?;
        if let Some(g) = &v.glitch {
            let glitch = TriangleGlitch::symmetric(g.t0.get()?, g.width.get()?, v_in_q, g.peak.get()?);
            victim = victim.with_input_noise(SourceSpec::TriangleGlitch(glitch));
        }
        let o_victim = OracleVictim {
            net: v.net.clone(),
            cell: OracleCell {
                cell: v_cell,
                pins: v_pins,
            },
            input_noise: victim.input_noise.clone(),
            receiver_cap_f: rx.cap_f,
        };

        let mut aggressors = Vec::new();
        let mut o_aggs = Vec::new();
        for (key, a) in &self.aggressor {
            let cell = read_cell(&at(&a.cell))?;
            let a_pins = pins(&a.input, &a.output, &a.fixed)?;
            let ramp = SaturatedRamp {
                t0_s: a.ramp.t0.get()?,
                slew_s: a.ramp.slew.get()?,
                v_start: a.ramp.from.get()?,
                v_end: a.ramp.to.get()?,
            };
            let rx = ReceiverModel::new(a.receiver_cap.get()?)?;
            let driver = match &a.thevenin {
                Some(p) => {
                    TheveninDriver::read_csv(open(&at(p))?).with_context(|| format!("reading {}", p.display()))?
                }
                None => {
                    let load = match &a.load {
                        Some(l) => l.get()?,
                        None => {
                            let net = interconnect.net(&a.net).with_context(|| {
                                format!("aggressor.{key}: net `{}` is not in the interconnect", a.net)
                            })?;
                            net.pi.total_cap() + rx.cap_f
                        }
                    };
                    fit_thevenin(&cell, &a_pins, &ramp, vdd, load, &newton)
                        .with_context(|| format!("aggressor.{key}: Thevenin fit"))?
                }
            };
            let offset = a.offset.as_ref().map(Num::get).transpose()?.unwrap_or(0.0);
            aggressors.push(AggressorSpec {
                net: a.net.clone(),
                driver,
                receiver: rx,
                offset_s: offset,
            });
            o_aggs.push(OracleAggressor {
                net: a.net.clone(),
                cell: OracleCell { cell, pins: a_pins },
                input: SourceSpec::SaturatedRamp(ramp),
                offset_s: offset,
                receiver_cap_f: rx.cap_f,
            });
        }

        let spec = ClusterSpec {
            victim,
            aggressors,
            interconnect,
            vdd,
        };
        spec.validate()?;
        let t_stop = self.sim.t_stop.get()?;
        let mut sim = SimOptions::new(t_stop);
        if let Some(dt) = &self.sim.dt {
            sim = sim.with_dt(dt.get()?);
        }
        let nrc = match &self.nrc {
            Some(n) => Some(
                NoiseRejectionCurve::read_csv(open(&at(&n.curve))?)
                    .with_context(|| format!("reading {}", n.curve.display()))?,
            ),
            None => None,
        };
        for n in &nets {
            for node in [&n.driving, &n.receiver] {
                if lines.find_node(node).is_none() {
                    bail!("net `{}`: node `{node}` is not in the interconnect netlist", n.name);
                }
            }
        }
        let oracle = OracleSpec {
            interconnect: lines,
            nets,
            victim: o_victim,
            aggressors: o_aggs,
        };
        Ok(LoadedCluster {
            spec,
            oracle,
            sim,
            align: self.sim.align,
            nrc,
        })
    }
}
