// SPDX-License-Identifier: Apache-2.0

//! Thevenin aggressor fit: a saturated ramp behind a resistor that
//! reproduces the cell's 20/50/80 % output crossings on a probe load.

use std::io::{Read, Write};

use super::{read_single_row, write_ramp_csv, CellPins, CharacterizeError};
use crate::netlist::{Circuit, SaturatedRamp, SourceSpec};
use crate::simcore::{transient, NewtonOptions, SimOptions, Waveform};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheveninDriver {
    pub r_th_ohms: f64,
    pub ramp: SaturatedRamp,
}

impl TheveninDriver {
    pub fn new(r_th_ohms: f64, ramp: SaturatedRamp) -> Result<Self, CharacterizeError> {
        if !(r_th_ohms > 0.0 && r_th_ohms.is_finite()) {
            return Err(CharacterizeError::InvalidArgument(format!(
                "r_th {r_th_ohms} must be positive"
            )));
        }
        if !(ramp.slew_s > 0.0) {
            return Err(CharacterizeError::InvalidArgument("ramp slew must be positive".into()));
        }
        Ok(Self { r_th_ohms, ramp })
    }

    /// Writes `r_th_ohms,t0_s,slew_s,v_start_v,v_end_v`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CharacterizeError> {
        write_ramp_csv(w, self.r_th_ohms, &self.ramp)
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, CharacterizeError> {
        let v = read_single_row(r, &["r_th_ohms", "t0_s", "slew_s", "v_start_v", "v_end_v"])?;
        if v.len() != 5 {
            return Err(CharacterizeError::InvalidArgument("expected 5 columns".into()));
        }
        Self::new(
            v[0],
            SaturatedRamp {
                t0_s: v[1],
                slew_s: v[2],
                v_start: v[3],
                v_end: v[4],
            },
        )
    }
}

/// Normalized response of an RC low-pass (time constant `r`) to a unit
/// ramp of unit duration starting at `t = 0`.
pub fn unit_ramp_rc(t: f64, r: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if r <= 0.0 {
        t.min(1.0)
    } else if t <= 1.0 {
        t - r * (1.0 - (-t / r).exp())
    } else {
        1.0 - r * (((1.0 - t) / r).exp() - (-t / r).exp())
    }
}

fn unit_crossing(p: f64, r: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 2.0 + 60.0 * r);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if unit_ramp_rc(mid, r) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `(t50 - t20) / (t80 - t20)` of the normalized RC ramp response.
fn shape_ratio(r: f64) -> f64 {
    let (c20, c50, c80) = (unit_crossing(0.2, r), unit_crossing(0.5, r), unit_crossing(0.8, r));
    (c50 - c20) / (c80 - c20)
}

const MIN_RATIO: f64 = 1e-6;
const MAX_RATIO: f64 = 1e3;

/// Ratio at which `shape_ratio` peaks. The ratio rises from 0.5 at zero
/// time constant to a small maximum, then falls towards ln(1.6)/ln(4).
fn peak_ratio() -> f64 {
    let (mut lo, mut hi) = (1e-3f64.ln(), 1f64.ln());
    for _ in 0..100 {
        let (a, b) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if shape_ratio(a.exp()) < shape_ratio(b.exp()) {
            lo = a;
        } else {
            hi = b;
        }
    }
    (0.5 * (lo + hi)).exp()
}

/// Root of `shape_ratio(r) = q` on a branch where it is monotone, by
/// bisection in log r. Targets outside the branch clamp to an end.
fn branch_root(q: f64, lo: f64, hi: f64) -> f64 {
    let (ql, qh) = (shape_ratio(lo), shape_ratio(hi));
    let rising = qh > ql;
    if (q - ql) * (qh - ql) <= 0.0 {
        return lo;
    }
    if (q - qh) * (ql - qh) <= 0.0 {
        return hi;
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        if (shape_ratio(mid.exp()) < q) == rising {
            a = mid;
        } else {
            b = mid;
        }
    }
    (0.5 * (a + b)).exp()
}

/// Ramp and driver resistance reproducing crossings `t20 < t50 < t80` on
/// load `c_load`. The ratio of RC time constant to slew is found from the
/// crossing shape `(t50 - t20) / (t80 - t20)`: below 0.5 only the falling
/// branch can produce it; at or above 0.5 the small time constant root is
/// taken.
pub(crate) fn thevenin_from_crossings(
    t20: f64,
    t50: f64,
    t80: f64,
    v_start: f64,
    v_end: f64,
    c_load: f64,
) -> Result<TheveninDriver, CharacterizeError> {
    let q = (t50 - t20) / (t80 - t20);
    let peak = peak_ratio();
    let ratio = if q >= 0.5 {
        branch_root(q, MIN_RATIO, peak)
    } else {
        branch_root(q, peak, MAX_RATIO)
    };
    let (c20, c80) = (unit_crossing(0.2, ratio), unit_crossing(0.8, ratio));
    let slew = (t80 - t20) / (c80 - c20);
    let t0 = t20 - slew * c20;
    TheveninDriver::new(
        ratio * slew / c_load,
        SaturatedRamp {
            t0_s: t0,
            slew_s: slew,
            v_start,
            v_end,
        },
    )
}

fn crossings(w: &Waveform, v_start: f64, v_end: f64) -> Option<[Option<f64>; 3]> {
    let rising = v_end > v_start;
    let at = |p: f64| w.crossing(v_start + p * (v_end - v_start), rising);
    Some([at(0.2), at(0.5), at(0.8)])
}

/// Simulates the transistor cell driving `c_probe_f` from `input_ramp` and
/// fits a [`TheveninDriver`] to the output's 20/50/80 % crossings. The ramp
/// runs between the two rails, starting at the rail nearest the initial
/// output.
pub fn fit_thevenin(
    cell: &Circuit,
    pins: &CellPins,
    input_ramp: &SaturatedRamp,
    vdd: f64,
    c_probe_f: f64,
    newton: &NewtonOptions,
) -> Result<TheveninDriver, CharacterizeError> {
    if !(c_probe_f > 0.0) {
        return Err(CharacterizeError::InvalidArgument(
            "probe capacitance must be positive".into(),
        ));
    }
    pins.check(cell)?;
    let mut tb = cell.clone();
    tb.add_vsource("VTB_IN", &pins.input, "0", SourceSpec::SaturatedRamp(*input_ramp))?;
    tb.add_capacitor("CTB_LOAD", &pins.output, "0", c_probe_f)?;
    pins.drive_fixed(&mut tb)?;

    let mut t_stop = 2.0 * (input_ramp.t0_s.max(0.0) + input_ramp.slew_s);
    let mut last = [None; 3];
    for _ in 0..16 {
        let mut opts = SimOptions::new(t_stop).with_dt(t_stop / 4000.0);
        opts.newton = newton.clone();
        let w = transient(&tb, &opts, &[&pins.output])?
            .remove(&pins.output)
            .expect("probe exists");
        let (v_start, v_end) = if w.first_value() < 0.5 * vdd {
            (0.0, vdd)
        } else {
            (vdd, 0.0)
        };
        let c = crossings(&w, v_start, v_end).unwrap_or([None; 3]);
        if let [Some(t20), Some(t50), Some(t80)] = c {
            return thevenin_from_crossings(t20, t50, t80, v_start, v_end, c_probe_f);
        }
        last = c;
        t_stop *= 2.0;
    }
    let pct = match last {
        [None, ..] => 20,
        [_, None, _] => 50,
        _ => 80,
    };
    Err(CharacterizeError::NoCrossing { pct })
}
