// SPDX-License-Identifier: Apache-2.0

use super::{AdmittanceMoments, MorError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiModel {
    pub c_near_f: f64,
    pub r_ohms: f64,
    pub c_far_f: f64,
}

impl PiModel {
    pub fn validate(&self) -> Result<(), MorError> {
        let ok = |x: f64| x >= 0.0 && x.is_finite();
        if !(ok(self.c_near_f) && ok(self.r_ohms) && ok(self.c_far_f)) {
            return Err(MorError::Invalid(format!("π values must be non-negative: {self:?}")));
        }
        Ok(())
    }

    pub fn total_cap(&self) -> f64 {
        self.c_near_f + self.c_far_f
    }
}

/// Result of [`reduce_to_pi`]. `fallback` is set when the moments are
/// degenerate and the net was collapsed to a single capacitor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiFit {
    pub model: PiModel,
    pub fallback: bool,
}

/// Moments of the π model itself.
pub fn pi_moments(pi: &PiModel) -> AdmittanceMoments {
    let (c2, r) = (pi.c_far_f, pi.r_ohms);
    AdmittanceMoments {
        m: [pi.c_near_f + c2, -r * c2 * c2, r * r * c2 * c2 * c2],
    }
}

/// π model matching `m`: `c_far = m2²/m3`, `r = -m3²/m2³`,
/// `c_near = m1 - c_far`.
pub fn reduce_to_pi(moments: &AdmittanceMoments) -> Result<PiFit, MorError> {
    let [m1, m2, m3] = moments.m;
    if !(m1 > 0.0 && m1.is_finite()) {
        return Err(MorError::NonPositive { net: String::new(), m1 });
    }
    let lumped = PiFit {
        model: PiModel {
            c_near_f: m1,
            r_ohms: 0.0,
            c_far_f: 0.0,
        },
        fallback: true,
    };
    if m2 == 0.0 || m3 == 0.0 {
        return Ok(lumped);
    }
    let c_far = m2 * m2 / m3;
    let r = -(m3 * m3) / (m2 * m2 * m2);
    // a far capacitance a few ulps above m1 is rounding, not degeneracy
    if !(c_far.is_finite() && r.is_finite()) || c_far > m1 * (1.0 + 1e-12) || c_far < 0.0 || r < 0.0 {
        return Ok(lumped);
    }
    Ok(PiFit {
        model: PiModel {
            c_near_f: (m1 - c_far).max(0.0),
            r_ohms: r,
            c_far_f: c_far,
        },
        fallback: false,
    })
}
