// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;

use super::{CellPins, CharacterizeError};
use crate::netlist::{Circuit, SourceSpec};
use crate::simcore::{DcSweeper, NewtonOptions, OperatingPoint, SimOptions, UniformGrid, VccsTable};

pub(crate) const SRC_IN: &str = "vtb_in";
pub(crate) const SRC_OUT: &str = "vtb_out";

/// Sweep limits `[-0.2 vdd, 1.2 vdd]` used on both table axes.
pub fn sweep_range(vdd: f64) -> (f64, f64) {
    (-0.2 * vdd, 1.2 * vdd)
}

/// The cell with its input and output forced by ideal sources (`VTB_IN`,
/// `VTB_OUT`) and every fixed pin tied to its level.
pub fn vccs_testbench(cell: &Circuit, pins: &CellPins) -> Result<Circuit, CharacterizeError> {
    pins.check(cell)?;
    let mut tb = cell.clone();
    tb.add_vsource("VTB_IN", &pins.input, "0", SourceSpec::Dc { volts: 0.0 })?;
    tb.add_vsource("VTB_OUT", &pins.output, "0", SourceSpec::Dc { volts: 0.0 })?;
    pins.drive_fixed(&mut tb)?;
    Ok(tb)
}

/// Tabulates the DC current the cell delivers into its output for every
/// `(v_in, v_out)` pair of a `grid_points x grid_points` sweep.
pub fn build_vccs_table(
    cell: &Circuit,
    pins: &CellPins,
    vdd: f64,
    grid_points: usize,
    newton: &NewtonOptions,
) -> Result<VccsTable, CharacterizeError> {
    if grid_points < 2 {
        return Err(CharacterizeError::InvalidArgument(
            "grid needs at least 2 points per axis".into(),
        ));
    }
    if !(vdd > 0.0) {
        return Err(CharacterizeError::InvalidArgument("vdd must be positive".into()));
    }
    let tb = vccs_testbench(cell, pins)?;
    let opts = SimOptions {
        newton: newton.clone(),
        ..SimOptions::default()
    };
    let sweeper = DcSweeper::new(&tb, &opts)?;
    let (lo, hi) = sweep_range(vdd);
    let grid = UniformGrid::new(lo, hi, grid_points)?;
    let mut current = Vec::with_capacity(grid_points * grid_points);
    for i in 0..grid_points {
        for j in 0..grid_points {
            let (vin, vout) = (grid.value(i), grid.value(j));
            let map: HashMap<String, f64> = [(SRC_IN.to_string(), vin), (SRC_OUT.to_string(), vout)].into();
            let op = sweeper
                .solve(&map)
                .map_err(|source| CharacterizeError::GridPoint { vin, vout, source })?;
            current.push(cell_current(&op, vout, newton));
        }
    }
    Ok(VccsTable::new(grid, grid, current)?)
}

/// Current the cell pushes into the forced output. The output source also
/// feeds the solver's gmin shunt on that node, which is not part of the cell.
pub(crate) fn cell_current(op: &OperatingPoint, vout: f64, newton: &NewtonOptions) -> f64 {
    op.source_current(SRC_OUT).unwrap_or(0.0) + newton.gmin_s * vout
}

/// Small-signal output resistance `-1 / (dI/dVout)` at the quiescent point.
/// On a grid line the slopes of the cells on either side are averaged, so
/// the result does not depend on which neighbour the point is assigned to.
pub fn holding_resistance(table: &VccsTable, v_in_q: f64, v_out_q: f64) -> Result<f64, CharacterizeError> {
    let eps = 1e-6 * table.vout_grid().step();
    let slope = 0.5 * (table.eval(v_in_q, v_out_q - eps).di_dvout + table.eval(v_in_q, v_out_q + eps).di_dvout);
    if !(slope < 0.0) || !slope.is_finite() {
        return Err(CharacterizeError::NotHolding { slope });
    }
    Ok(-1.0 / slope)
}

/// Chooses levels (0 or `vdd`) for the side inputs of a multi-input cell:
/// the assignment whose DC output moves the most when the noisy input goes
/// from `v_in_q` to `v_in_noisy`. Ties keep the first assignment in binary
/// order (all-low first).
pub fn select_side_inputs(
    cell: &Circuit,
    pins: &CellPins,
    side: &[&str],
    vdd: f64,
    v_in_q: f64,
    v_in_noisy: f64,
    newton: &NewtonOptions,
) -> Result<Vec<(String, f64)>, CharacterizeError> {
    if side.len() > 16 {
        return Err(CharacterizeError::InvalidArgument("too many side inputs".into()));
    }
    let opts = SimOptions {
        newton: newton.clone(),
        ..SimOptions::default()
    };
    let mut best: Option<(f64, Vec<(String, f64)>)> = None;
    for mask in 0..(1u32 << side.len()) {
        let assignment: Vec<(String, f64)> = side
            .iter()
            .enumerate()
            .map(|(k, p)| (p.to_ascii_lowercase(), if mask >> k & 1 == 1 { vdd } else { 0.0 }))
            .collect();
        let mut tb_pins = pins.clone();
        tb_pins.fixed.extend(assignment.iter().cloned());
        tb_pins.check(cell)?;
        let mut tb = cell.clone();
        tb.add_vsource("VTB_IN", &tb_pins.input, "0", SourceSpec::Dc { volts: v_in_q })?;
        tb_pins.drive_fixed(&mut tb)?;
        let sweeper = DcSweeper::new(&tb, &opts)?;
        let out = |v: f64| -> Result<f64, CharacterizeError> {
            let map: HashMap<String, f64> = [(SRC_IN.to_string(), v)].into();
            Ok(sweeper.solve(&map)?.voltage(&tb_pins.output).unwrap_or(0.0))
        };
        let delta = (out(v_in_noisy)? - out(v_in_q)?).abs();
        if best.as_ref().map_or(true, |(d, _)| delta > *d) {
            best = Some((delta, assignment));
        }
    }
    Ok(best.map(|(_, a)| a).unwrap_or_default())
}
