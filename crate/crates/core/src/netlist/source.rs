// SPDX-License-Identifier: Apache-2.0

//! Independent voltage-source waveforms.

use super::units::format_value;

/// Holds `v_start` until `t0_s`, ramps linearly to `v_end` over `slew_s`, then holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturatedRamp {
    pub t0_s: f64,
    pub slew_s: f64,
    pub v_start: f64,
    pub v_end: f64,
}

impl SaturatedRamp {
    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.t0_s {
            self.v_start
        } else if t >= self.t0_s + self.slew_s {
            self.v_end
        } else {
            let frac = (t - self.t0_s) / self.slew_s;
            self.v_start + (self.v_end - self.v_start) * frac
        }
    }

    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            t0_s: self.t0_s + dt,
            ..*self
        }
    }
}

/// Piecewise-linear `v_base -> v_peak -> v_base` glitch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleGlitch {
    pub t0_s: f64,
    pub t_peak_s: f64,
    pub t_end_s: f64,
    pub v_base: f64,
    pub v_peak: f64,
}

impl TriangleGlitch {
    /// Symmetric triangle whose time above half its height is `width_s`
    /// (the base is twice that).
    pub fn symmetric(t0_s: f64, width_s: f64, v_base: f64, v_peak: f64) -> Self {
        Self {
            t0_s,
            t_peak_s: t0_s + width_s,
            t_end_s: t0_s + 2.0 * width_s,
            v_base,
            v_peak,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let dv = self.v_peak - self.v_base;
        if t <= self.t0_s || t >= self.t_end_s {
            self.v_base
        } else if t <= self.t_peak_s {
            self.v_base + dv * (t - self.t0_s) / (self.t_peak_s - self.t0_s)
        } else {
            self.v_base + dv * (self.t_end_s - t) / (self.t_end_s - self.t_peak_s)
        }
    }

    pub fn shifted(&self, dt: f64) -> Self {
        Self {
            t0_s: self.t0_s + dt,
            t_peak_s: self.t_peak_s + dt,
            t_end_s: self.t_end_s + dt,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Dc {
        volts: f64,
    },
    /// Holds the first value before the first point and the last value after
    /// the last point.
    Pwl {
        points: Vec<(f64, f64)>,
    },
    SaturatedRamp(SaturatedRamp),
    TriangleGlitch(TriangleGlitch),
}

impl SourceSpec {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            SourceSpec::Dc { volts } => *volts,
            SourceSpec::Pwl { points } => eval_pwl(points, t),
            SourceSpec::SaturatedRamp(r) => r.eval(t),
            SourceSpec::TriangleGlitch(g) => g.eval(t),
        }
    }

    /// Same waveform delayed by `dt` seconds. DC sources are unchanged.
    pub fn shifted(&self, dt: f64) -> Self {
        match self {
            SourceSpec::Dc { .. } => self.clone(),
            SourceSpec::Pwl { points } => SourceSpec::Pwl {
                points: points.iter().map(|&(t, v)| (t + dt, v)).collect(),
            },
            SourceSpec::SaturatedRamp(r) => SourceSpec::SaturatedRamp(r.shifted(dt)),
            SourceSpec::TriangleGlitch(g) => SourceSpec::TriangleGlitch(g.shifted(dt)),
        }
    }

    /// True when the source never changes value.
    pub fn is_constant(&self) -> bool {
        match self {
            SourceSpec::Dc { .. } => true,
            SourceSpec::Pwl { points } => points.windows(2).all(|w| w[0].1 == w[1].1),
            SourceSpec::SaturatedRamp(r) => r.v_start == r.v_end,
            SourceSpec::TriangleGlitch(g) => g.v_base == g.v_peak,
        }
    }

    /// Checks the per-variant invariants, returning a description of the first violation.
    pub fn validate(&self) -> Result<(), String> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        match self {
            SourceSpec::Dc { volts } if !volts.is_finite() => Err("non-finite DC value".into()),
            SourceSpec::Dc { .. } => Ok(()),
            SourceSpec::Pwl { points } => {
                if points.is_empty() {
                    return Err("PWL needs at least one point".into());
                }
                if !points.iter().all(|&(t, v)| t.is_finite() && v.is_finite()) {
                    return Err("non-finite PWL point".into());
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err("PWL times must be strictly increasing".into());
                }
                Ok(())
            }
            SourceSpec::SaturatedRamp(r) => {
                if !finite(&[r.t0_s, r.slew_s, r.v_start, r.v_end]) {
                    Err("non-finite ramp parameter".into())
                } else if r.slew_s <= 0.0 {
                    Err("ramp slew must be positive".into())
                } else {
                    Ok(())
                }
            }
            SourceSpec::TriangleGlitch(g) => {
                if !finite(&[g.t0_s, g.t_peak_s, g.t_end_s, g.v_base, g.v_peak]) {
                    Err("non-finite glitch parameter".into())
                } else if !(g.t0_s < g.t_peak_s && g.t_peak_s < g.t_end_s) {
                    Err("glitch needs t0 < tpeak < tend".into())
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Netlist text for the source specification (everything after the nodes).
    pub fn to_netlist(&self) -> String {
        let f = format_value;
        match self {
            SourceSpec::Dc { volts } => format!("DC {}", f(*volts)),
            SourceSpec::Pwl { points } => {
                let body: Vec<String> = points.iter().map(|&(t, v)| format!("{} {}", f(t), f(v))).collect();
                format!("PWL( {} )", body.join(" "))
            }
            SourceSpec::SaturatedRamp(r) => {
                format!("SRAMP( {} {} {} {} )", f(r.t0_s), f(r.slew_s), f(r.v_start), f(r.v_end))
            }
            SourceSpec::TriangleGlitch(g) => format!(
                "TRI( {} {} {} {} {} )",
                f(g.t0_s),
                f(g.t_peak_s),
                f(g.t_end_s),
                f(g.v_base),
                f(g.v_peak)
            ),
        }
    }
}

fn eval_pwl(points: &[(f64, f64)], t: f64) -> f64 {
    let Some(&(t_first, v_first)) = points.first() else {
        return 0.0;
    };
    if t <= t_first {
        return v_first;
    }
    // points are sorted by time
    let k = points.partition_point(|&(tp, _)| tp <= t);
    if k >= points.len() {
        return points[points.len() - 1].1;
    }
    let (t0, v0) = points[k - 1];
    let (t1, v1) = points[k];
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> SourceSpec {
        SourceSpec::SaturatedRamp(SaturatedRamp {
            t0_s: 1e-9,
            slew_s: 2e-9,
            v_start: 0.0,
            v_end: 1.2,
        })
    }

    fn tri() -> SourceSpec {
        SourceSpec::TriangleGlitch(TriangleGlitch {
            t0_s: 0.0,
            t_peak_s: 100e-12,
            t_end_s: 300e-12,
            v_base: 0.0,
            v_peak: 0.4,
        })
    }

    #[test]
    fn ramp_values() {
        assert_eq!(ramp().eval(0.0), 0.0);
        assert!((ramp().eval(2e-9) - 0.6).abs() < 1e-12);
        assert_eq!(ramp().eval(5e-9), 1.2);
    }

    #[test]
    fn triangle_falling_edge_midpoint() {
        assert!((tri().eval(200e-12) - 0.2).abs() < 1e-12);
        assert!((tri().eval(100e-12) - 0.4).abs() < 1e-12);
        assert_eq!(tri().eval(400e-12), 0.0);
    }

    #[test]
    fn pwl_holds_outside_range() {
        let s = SourceSpec::Pwl {
            points: vec![(1e-9, 0.5), (2e-9, 1.0), (3e-9, 0.0)],
        };
        assert_eq!(s.eval(0.0), 0.5);
        assert!((s.eval(1.5e-9) - 0.75).abs() < 1e-12);
        assert!((s.eval(2.5e-9) - 0.5).abs() < 1e-12);
        assert_eq!(s.eval(4e-9), 0.0);
    }

    #[test]
    fn validation() {
        let bad = SourceSpec::Pwl {
            points: vec![(1e-9, 0.0), (1e-9, 1.0)],
        };
        assert!(bad.validate().is_err());
        let bad = SourceSpec::TriangleGlitch(TriangleGlitch {
            t0_s: 0.0,
            t_peak_s: 0.0,
            t_end_s: 1.0,
            v_base: 0.0,
            v_peak: 1.0,
        });
        assert!(bad.validate().is_err());
        assert!(tri().validate().is_ok());
    }

    #[test]
    fn continuity_on_dense_grids() {
        let sources = [
            ramp(),
            tri(),
            SourceSpec::Pwl {
                points: vec![(0.1e-9, 0.0), (0.2e-9, 1.0), (0.5e-9, -0.3)],
            },
            SourceSpec::Dc { volts: 0.7 },
        ];
        for s in &sources {
            for n in [1_000usize, 10_000, 100_000] {
                let dt = 5e-9 / n as f64;
                let max_jump = (0..n)
                    .map(|k| (s.eval((k + 1) as f64 * dt) - s.eval(k as f64 * dt)).abs())
                    .fold(0.0, f64::max);
                // slopes are bounded, so the largest sample-to-sample jump shrinks with dt
                assert!(max_jump <= 1.3 / 0.1e-9 * dt * 1.0001, "{s:?} jump {max_jump} at n={n}");
            }
        }
    }
}
