// SPDX-License-Identifier: Apache-2.0

//! Noise rejection curves: for each glitch width, the smallest triangular
//! input glitch amplitude that swings the receiver output by half a supply.

use std::collections::HashMap;
use std::io::{Read, Write};

use super::{CellPins, CharacterizeError};
use crate::netlist::{Circuit, SourceSpec, TriangleGlitch};
use crate::simcore::{dc_operating_point, transient, DcSweeper, NewtonOptions, SimOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NrcPoint {
    pub width_s: f64,
    pub amplitude_v: f64,
    /// The receiver never failed at this width; the amplitude was capped at vdd.
    pub saturated: bool,
}

/// Failure boundary in the (width, amplitude) plane. Glitches above the
/// curve fail.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRejectionCurve {
    points: Vec<NrcPoint>,
}

impl NoiseRejectionCurve {
    pub fn new(points: Vec<NrcPoint>) -> Result<Self, CharacterizeError> {
        if points.is_empty() {
            return Err(CharacterizeError::InvalidArgument(
                "curve needs at least one point".into(),
            ));
        }
        for p in &points {
            if !(p.width_s > 0.0 && p.width_s.is_finite()) || !(p.amplitude_v > 0.0 && p.amplitude_v.is_finite()) {
                return Err(CharacterizeError::InvalidArgument(format!(
                    "bad curve point ({:e}, {:e})",
                    p.width_s, p.amplitude_v
                )));
            }
        }
        for w in points.windows(2) {
            if w[1].width_s <= w[0].width_s {
                return Err(CharacterizeError::InvalidArgument("widths must increase".into()));
            }
            if w[1].amplitude_v > w[0].amplitude_v {
                return Err(CharacterizeError::InvalidArgument(
                    "amplitudes must not increase with width".into(),
                ));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[NrcPoint] {
        &self.points
    }

    /// Linear interpolation in width; outside the sampled widths the end
    /// amplitudes are held.
    pub fn amplitude_at(&self, width_s: f64) -> f64 {
        let p = &self.points;
        if width_s <= p[0].width_s {
            return p[0].amplitude_v;
        }
        for w in p.windows(2) {
            if width_s <= w[1].width_s {
                let f = (width_s - w[0].width_s) / (w[1].width_s - w[0].width_s);
                return w[0].amplitude_v + f * (w[1].amplitude_v - w[0].amplitude_v);
            }
        }
        p[p.len() - 1].amplitude_v
    }

    /// Writes `width_s,amplitude_v`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CharacterizeError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["width_s", "amplitude_v"])?;
        for p in &self.points {
            wr.write_record([format!("{:e}", p.width_s), format!("{:e}", p.amplitude_v)])?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, CharacterizeError> {
        let mut rd = csv::Reader::from_reader(r);
        if rd.headers()?.iter().collect::<Vec<_>>() != ["width_s", "amplitude_v"] {
            return Err(CharacterizeError::InvalidArgument(
                "expected header width_s,amplitude_v".into(),
            ));
        }
        let mut points = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let num = |k: usize| -> Result<f64, CharacterizeError> {
                let s = rec.get(k).unwrap_or("").trim();
                s.parse()
                    .map_err(|_| CharacterizeError::InvalidArgument(format!("bad number `{s}`")))
            };
            points.push(NrcPoint {
                width_s: num(0)?,
                amplitude_v: num(1)?,
                saturated: false,
            });
        }
        Self::new(points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NrcOptions {
    /// Quiet level of the receiver input; glitches move it towards the
    /// opposite rail.
    pub quiet_input_v: f64,
    /// Minimum time simulated after the glitch ends.
    pub settle_s: f64,
    /// Bisection stops when the bracket is narrower than this.
    pub resolution_v: f64,
}

impl Default for NrcOptions {
    fn default() -> Self {
        Self {
            quiet_input_v: 0.0,
            settle_s: 500e-12,
            resolution_v: 1e-3,
        }
    }
}

const SRC_GLITCH: &str = "VTB_IN";

struct Bench {
    tb: Circuit,
    output: String,
    vdd: f64,
    quiet_in: f64,
    quiet_out: f64,
    settle_s: f64,
    newton: NewtonOptions,
}

impl Bench {
    fn new(
        receiver: &Circuit,
        pins: &CellPins,
        vdd: f64,
        load_f: f64,
        opts: &NrcOptions,
        newton: &NewtonOptions,
    ) -> Result<Self, CharacterizeError> {
        if !(vdd > 0.0) {
            return Err(CharacterizeError::InvalidArgument("vdd must be positive".into()));
        }
        pins.check(receiver)?;
        let mut tb = receiver.clone();
        tb.add_vsource(
            SRC_GLITCH,
            &pins.input,
            "0",
            SourceSpec::Dc {
                volts: opts.quiet_input_v,
            },
        )?;
        if load_f > 0.0 {
            tb.add_capacitor("CTB_LOAD", &pins.output, "0", load_f)?;
        }
        pins.drive_fixed(&mut tb)?;
        let sim = SimOptions {
            newton: newton.clone(),
            ..SimOptions::default()
        };
        let quiet_out = dc_operating_point(&tb, &HashMap::new(), &sim)?
            .voltage(&pins.output)
            .unwrap_or(0.0);
        Ok(Self {
            tb,
            output: pins.output.clone(),
            vdd,
            quiet_in: opts.quiet_input_v,
            quiet_out,
            settle_s: opts.settle_s,
            newton: newton.clone(),
        })
    }

    fn glitch(&self, width_s: f64, amplitude_v: f64) -> TriangleGlitch {
        let dir = if self.quiet_in < 0.5 * self.vdd { 1.0 } else { -1.0 };
        TriangleGlitch::symmetric(0.1 * width_s, width_s, self.quiet_in, self.quiet_in + dir * amplitude_v)
    }

    /// Largest output excursion from the quiet level under the glitch.
    fn response(&self, width_s: f64, amplitude_v: f64) -> Result<f64, CharacterizeError> {
        let g = self.glitch(width_s, amplitude_v);
        let mut tb = self.tb.clone();
        tb.set_source(SRC_GLITCH, SourceSpec::TriangleGlitch(g));
        let t_stop = g.t_end_s + (2.0 * width_s).max(self.settle_s);
        let mut opts = SimOptions::new(t_stop);
        opts.dt_s = opts.dt_s.min(width_s / 25.0);
        opts.newton = self.newton.clone();
        let w = transient(&tb, &opts, &[&self.output])?
            .remove(&self.output)
            .expect("probe exists");
        Ok(w.values()
            .iter()
            .map(|v| (v - self.quiet_out).abs())
            .fold(0.0, f64::max))
    }

    fn fails(&self, width_s: f64, amplitude_v: f64) -> Result<bool, CharacterizeError> {
        if amplitude_v <= 0.0 {
            return Ok(false);
        }
        Ok(self.response(width_s, amplitude_v)? >= 0.5 * self.vdd)
    }
}

/// Whether a symmetric triangular glitch of `width_s` (full width at half
/// height) and `amplitude_v` on the receiver input swings its output by at
/// least `vdd / 2`.
#[allow(clippy::too_many_arguments)]
pub fn glitch_fails(
    receiver: &Circuit,
    pins: &CellPins,
    vdd: f64,
    width_s: f64,
    amplitude_v: f64,
    load_f: f64,
    opts: &NrcOptions,
    newton: &NewtonOptions,
) -> Result<bool, CharacterizeError> {
    Bench::new(receiver, pins, vdd, load_f, opts, newton)?.fails(width_s, amplitude_v)
}

/// Input excursion from the quiet level at which the DC output has moved by
/// `vdd / 2`: the limit of the curve for very wide glitches.
pub fn dc_switching_threshold(
    receiver: &Circuit,
    pins: &CellPins,
    vdd: f64,
    opts: &NrcOptions,
    newton: &NewtonOptions,
) -> Result<f64, CharacterizeError> {
    let bench = Bench::new(receiver, pins, vdd, 0.0, opts, newton)?;
    let sim = SimOptions {
        newton: newton.clone(),
        ..SimOptions::default()
    };
    let sweeper = DcSweeper::new(&bench.tb, &sim)?;
    let dir = if bench.quiet_in < 0.5 * vdd { 1.0 } else { -1.0 };
    let moved = |a: f64| -> Result<bool, CharacterizeError> {
        let map: HashMap<String, f64> = [(SRC_GLITCH.to_ascii_lowercase(), bench.quiet_in + dir * a)].into();
        let v = sweeper.solve(&map)?.voltage(&bench.output).unwrap_or(0.0);
        Ok((v - bench.quiet_out).abs() >= 0.5 * vdd)
    };
    let (mut lo, mut hi) = (0.0, vdd);
    if !moved(hi)? {
        return Err(CharacterizeError::InvalidArgument(
            "receiver output never switches".into(),
        ));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if moved(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bisects the failing amplitude for every width. `widths` must be
/// ascending. Widths that never fail up to `vdd` are recorded at `vdd` and
/// flagged as saturated. Amplitudes are made non-increasing by carrying the
/// running minimum forward.
pub fn build_nrc(
    receiver: &Circuit,
    pins: &CellPins,
    vdd: f64,
    widths: &[f64],
    load_f: f64,
    opts: &NrcOptions,
    newton: &NewtonOptions,
) -> Result<NoiseRejectionCurve, CharacterizeError> {
    if widths.is_empty() || widths.windows(2).any(|w| w[1] <= w[0]) || widths[0] <= 0.0 {
        return Err(CharacterizeError::InvalidArgument(
            "widths must be positive and ascending".into(),
        ));
    }
    if !(opts.resolution_v > 0.0) {
        return Err(CharacterizeError::InvalidArgument("resolution must be positive".into()));
    }
    let bench = Bench::new(receiver, pins, vdd, load_f, opts, newton)?;
    let mut points = Vec::with_capacity(widths.len());
    let mut running = f64::INFINITY;
    for &width_s in widths {
        let (amp, saturated) = if !bench.fails(width_s, vdd)? {
            (vdd, true)
        } else {
            let (mut lo, mut hi) = (0.0, vdd);
            while hi - lo > opts.resolution_v {
                let mid = 0.5 * (lo + hi);
                if bench.fails(width_s, mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            (hi, false)
        };
        running = running.min(amp);
        points.push(NrcPoint {
            width_s,
            amplitude_v: running,
            saturated: saturated && running == amp,
        });
    }
    NoiseRejectionCurve::new(points)
}
