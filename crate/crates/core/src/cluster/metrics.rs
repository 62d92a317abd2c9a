// SPDX-License-Identifier: Apache-2.0

use std::fmt;

use crate::characterize::NoiseRejectionCurve;
use crate::simcore::Waveform;

/// Half-width of the band around the NRC in which the verdict is `Boundary`.
pub const VERDICT_BAND_V: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseMetrics {
    pub peak_v: f64,
    /// Total time spent at or above half the peak.
    pub width_s: f64,
    pub area_v_s: f64,
}

/// Peak, half-height width and area of `|w - quiescent|`. The width sums,
/// over every sample interval, the part where the linearly interpolated
/// deviation is at or above half the peak.
pub fn noise_metrics(w: &Waveform, quiescent: f64) -> NoiseMetrics {
    let t = w.times();
    let d: Vec<f64> = w.values().iter().map(|v| (v - quiescent).abs()).collect();
    let peak = d.iter().copied().fold(0.0, f64::max);
    let mut width = 0.0;
    let mut area = 0.0;
    let half = 0.5 * peak;
    for k in 1..t.len() {
        let (h, a, b) = (t[k] - t[k - 1], d[k - 1], d[k]);
        area += 0.5 * (a + b) * h;
        if peak == 0.0 {
            continue;
        }
        width += match (a >= half, b >= half) {
            (true, true) => h,
            (false, false) => 0.0,
            (true, false) => h * (a - half) / (a - b),
            (false, true) => h * (b - half) / (b - a),
        };
    }
    NoiseMetrics {
        peak_v: peak,
        width_s: width,
        area_v_s: area,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Boundary,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Boundary => "boundary",
        })
    }
}

/// Compares the peak with the curve interpolated at the noise width.
pub fn nrc_check(m: &NoiseMetrics, nrc: &NoiseRejectionCurve) -> Verdict {
    let limit = nrc.amplitude_at(m.width_s);
    if m.peak_v > limit + VERDICT_BAND_V {
        Verdict::Fail
    } else if m.peak_v < limit - VERDICT_BAND_V {
        Verdict::Pass
    } else {
        Verdict::Boundary
    }
}
