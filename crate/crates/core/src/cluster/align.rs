// SPDX-License-Identifier: Apache-2.0

use super::assemble::{build, run, VictimDrive};
use super::{ClusterError, ClusterSpec, MIN_PEAK_V};
use crate::simcore::SimOptions;

/// One noise source measured alone on the victim driving point.
#[derive(Debug, Clone, PartialEq)]
pub struct Contributor {
    /// Aggressor net name, or `propagated` for the victim input glitch.
    pub name: String,
    pub peak_time_s: f64,
    pub peak_v: f64,
    /// Delay added by the alignment.
    pub shift_s: f64,
    /// Peak below [`MIN_PEAK_V`]; left unshifted.
    pub flagged: bool,
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub spec: ClusterSpec,
    pub contributors: Vec<Contributor>,
}

impl Alignment {
    pub fn flagged(&self) -> impl Iterator<Item = &Contributor> {
        self.contributors.iter().filter(|c| c.flagged)
    }
}

/// Runs every contributor alone on the macromodel and delays each so that
/// all individual peaks fall on the latest one.
pub fn worst_case_alignment(spec: &ClusterSpec, opts: &SimOptions) -> Result<Alignment, ClusterError> {
    let mut contributors = Vec::new();
    if spec.victim.has_input_noise() {
        let w = run(&build(spec, VictimDrive::Vccs { input_noise: true }, &|_| false)?, opts)?.driving;
        contributors.push(measure("propagated", w.peak_abs()));
    }
    for (k, a) in spec.aggressors.iter().enumerate() {
        let w = run(
            &build(spec, VictimDrive::Vccs { input_noise: false }, &|j| j == k)?,
            opts,
        )?
        .driving;
        contributors.push(measure(&a.net, w.peak_abs()));
    }
    if contributors.is_empty() {
        return Err(ClusterError::NoContributor);
    }
    let latest = contributors
        .iter()
        .filter(|c| !c.flagged)
        .map(|c| c.peak_time_s)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out = spec.clone();
    let first_aggressor = usize::from(spec.victim.has_input_noise());
    for (i, c) in contributors.iter_mut().enumerate() {
        if !c.flagged {
            c.shift_s = latest - c.peak_time_s;
        }
        if i < first_aggressor {
            out.victim.input_noise = spec.victim.input_noise.shifted(c.shift_s);
        } else {
            out.aggressors[i - first_aggressor].offset_s += c.shift_s;
        }
    }
    Ok(Alignment {
        spec: out,
        contributors,
    })
}

fn measure(name: &str, (t, v): (f64, f64)) -> Contributor {
    Contributor {
        name: name.to_string(),
        peak_time_s: t,
        peak_v: v,
        shift_s: 0.0,
        flagged: v.abs() < MIN_PEAK_V,
    }
}
