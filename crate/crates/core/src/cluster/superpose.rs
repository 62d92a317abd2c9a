// SPDX-License-Identifier: Apache-2.0

use super::assemble::{build, run, VictimDrive};
use super::{ClusterError, ClusterSpec, MIN_PEAK_V};
use crate::characterize::holding_resistance;
use crate::simcore::{SimOptions, Waveform};

/// Components of the superposition baseline, as driving-point deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpositionParts {
    pub holding_r_ohms: f64,
    pub propagated: Waveform,
    /// One entry per aggressor, in spec order.
    pub injected: Vec<Waveform>,
    /// Peak-aligned sum on the time axis of the propagated run.
    pub total: Waveform,
}

/// Linear-superposition estimate of the victim driving-point noise.
/// Propagated noise comes from the macromodel with quiet aggressors; each
/// aggressor's injected noise from the linear circuit with the victim replaced
/// by its holding resistance. Components are shifted so their peaks coincide
/// with the latest one, then summed.
pub fn simulate_superposition(spec: &ClusterSpec, opts: &SimOptions) -> Result<SuperpositionParts, ClusterError> {
    let v = &spec.victim;
    let r_hold = holding_resistance(&v.vccs, v.v_in_q, v.v_out_q)?;
    let propagated = run(&build(spec, VictimDrive::Vccs { input_noise: true }, &|_| false)?, opts)?.driving;
    let mut injected = Vec::with_capacity(spec.aggressors.len());
    for k in 0..spec.aggressors.len() {
        let model = build(spec, VictimDrive::Holding { r_ohms: r_hold }, &|j| j == k)?;
        injected.push(run(&model, opts)?.driving);
    }

    let grid = propagated.times().to_vec();
    let parts: Vec<&Waveform> = std::iter::once(&propagated).chain(&injected).collect();
    let peaks: Vec<(f64, f64)> = parts.iter().map(|w| w.peak_abs()).collect();
    let latest = peaks
        .iter()
        .filter(|p| p.1.abs() >= MIN_PEAK_V)
        .map(|p| p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut sum = vec![0.0; grid.len()];
    for (w, &(t_pk, v_pk)) in parts.iter().zip(&peaks) {
        let shift = if v_pk.abs() >= MIN_PEAK_V { latest - t_pk } else { 0.0 };
        for (s, x) in sum.iter_mut().zip(w.delayed_onto(&grid, shift)) {
            *s += x;
        }
    }
    Ok(SuperpositionParts {
        holding_r_ohms: r_hold,
        propagated,
        injected,
        total: Waveform::new(grid, sum)?,
    })
}
