// SPDX-License-Identifier: Apache-2.0

//! Bilinear DC current table `I_DC = f(v_in, v_out)` for table-driven drivers.

use std::io::{Read, Write};

use super::SimError;

/// Uniform ascending grid described by its end points. Node values are
/// computed as `start + step * i` except the last, which is `stop` itself,
/// so a grid rebuilt from its printed end points is identical.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    start: f64,
    stop: f64,
    len: usize,
}

impl UniformGrid {
    pub fn new(start: f64, stop: f64, len: usize) -> Result<Self, SimError> {
        if len < 2 || !(stop > start) || !start.is_finite() || !stop.is_finite() {
            return Err(SimError::InvalidTable(format!(
                "grid needs >= 2 ascending finite points (got {len} over [{start}, {stop}])"
            )));
        }
        Ok(Self { start, stop, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn stop(&self) -> f64 {
        self.stop
    }

    pub fn step(&self) -> f64 {
        (self.stop - self.start) / (self.len - 1) as f64
    }

    pub fn value(&self, i: usize) -> f64 {
        if i + 1 == self.len {
            self.stop
        } else {
            self.start + self.step() * i as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.value(i)).collect()
    }

    /// Cell index and fractional position in `[0, 1]` of a (clamped) value.
    /// Values that sit on a node snap to it exactly.
    fn locate(&self, v: f64) -> (usize, f64) {
        let v = v.clamp(self.start, self.stop);
        let step = self.step();
        let pos = (v - self.start) / step;
        let nearest = (pos.round() as usize).min(self.len - 1);
        let snap = (v - self.value(nearest)).abs() <= 1e-12 * step;
        if snap {
            if nearest + 1 == self.len {
                (nearest - 1, 1.0)
            } else {
                (nearest, 0.0)
            }
        } else {
            let i = (pos.floor() as usize).min(self.len - 2);
            (i, ((v - self.value(i)) / step).clamp(0.0, 1.0))
        }
    }
}

/// Interpolated current and the bilinear slopes of the enclosing cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VccsSample {
    pub i_a: f64,
    pub di_dvin: f64,
    pub di_dvout: f64,
}

/// DC current delivered by a driver into its output node, tabulated on a
/// uniform `(v_in, v_out)` grid, stored row-major with `v_in` outer.
#[derive(Debug, Clone, PartialEq)]
pub struct VccsTable {
    vin: UniformGrid,
    vout: UniformGrid,
    current: Vec<f64>,
}

impl VccsTable {
    pub fn new(vin: UniformGrid, vout: UniformGrid, current: Vec<f64>) -> Result<Self, SimError> {
        if current.len() != vin.len() * vout.len() {
            return Err(SimError::InvalidTable(format!(
                "expected {}x{} currents, got {}",
                vin.len(),
                vout.len(),
                current.len()
            )));
        }
        if current.iter().any(|c| !c.is_finite()) {
            return Err(SimError::InvalidTable("non-finite current".into()));
        }
        Ok(Self { vin, vout, current })
    }

    /// Tabulates `f` on the grid.
    pub fn from_fn(vin: UniformGrid, vout: UniformGrid, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self, SimError> {
        let mut current = Vec::with_capacity(vin.len() * vout.len());
        for i in 0..vin.len() {
            for j in 0..vout.len() {
                current.push(f(vin.value(i), vout.value(j)));
            }
        }
        Self::new(vin, vout, current)
    }

    pub fn vin_grid(&self) -> &UniformGrid {
        &self.vin
    }

    pub fn vout_grid(&self) -> &UniformGrid {
        &self.vout
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.current[i * self.vout.len() + j]
    }

    pub fn contains(&self, vin: f64, vout: f64) -> bool {
        (self.vin.start..=self.vin.stop).contains(&vin) && (self.vout.start..=self.vout.stop).contains(&vout)
    }

    /// Bilinear interpolation; arguments outside the grid are clamped.
    pub fn eval(&self, vin: f64, vout: f64) -> VccsSample {
        let (i, a) = self.vin.locate(vin);
        let (j, b) = self.vout.locate(vout);
        let f00 = self.at(i, j);
        let f10 = self.at(i + 1, j);
        let f01 = self.at(i, j + 1);
        let f11 = self.at(i + 1, j + 1);
        let i_a = (1.0 - a) * (1.0 - b) * f00 + a * (1.0 - b) * f10 + (1.0 - a) * b * f01 + a * b * f11;
        let di_dvin = ((1.0 - b) * (f10 - f00) + b * (f11 - f01)) / self.vin.step();
        let di_dvout = ((1.0 - a) * (f01 - f00) + a * (f11 - f10)) / self.vout.step();
        VccsSample { i_a, di_dvin, di_dvout }
    }

    /// Output voltage where the driver delivers no current for input `vin`,
    /// searched over the output grid by bisection on the interpolant.
    pub fn zero_current_output(&self, vin: f64) -> Option<f64> {
        let g = self.vout.values();
        let f = |v: f64| self.eval(vin, v).i_a;
        for w in g.windows(2) {
            let (mut lo, mut hi) = (w[0], w[1]);
            let (flo, fhi) = (f(lo), f(hi));
            if flo == 0.0 {
                return Some(lo);
            }
            if flo.signum() == fhi.signum() {
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid).signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        (f(g[g.len() - 1]) == 0.0).then(|| g[g.len() - 1])
    }

    /// Writes `vin_v,vout_v,i_a` rows, `v_in` outer.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SimError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["vin_v", "vout_v", "i_a"])?;
        for i in 0..self.vin.len() {
            for j in 0..self.vout.len() {
                wr.write_record([
                    format!("{:e}", self.vin.value(i)),
                    format!("{:e}", self.vout.value(j)),
                    format!("{:e}", self.at(i, j)),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, SimError> {
        let mut rd = csv::Reader::from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["vin_v", "vout_v", "i_a"] {
            return Err(SimError::InvalidTable("expected header vin_v,vout_v,i_a".into()));
        }
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64, SimError> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| SimError::InvalidTable(format!("bad number in row {:?}", rec)))
            };
            rows.push((parse(0)?, parse(1)?, parse(2)?));
        }
        let Some(&(vin0, vout0, _)) = rows.first() else {
            return Err(SimError::InvalidTable("empty table".into()));
        };
        let n_out = rows.iter().take_while(|r| r.0 == vin0).count();
        if n_out < 2 || rows.len() % n_out != 0 {
            return Err(SimError::InvalidTable("rows do not form a grid".into()));
        }
        let n_in = rows.len() / n_out;
        let vin = UniformGrid::new(vin0, rows[rows.len() - 1].0, n_in)?;
        let vout = UniformGrid::new(vout0, rows[n_out - 1].1, n_out)?;
        let tol = |g: &UniformGrid| 1e-9 * g.step();
        for (k, &(a, b, _)) in rows.iter().enumerate() {
            let (i, j) = (k / n_out, k % n_out);
            if (a - vin.value(i)).abs() > tol(&vin) || (b - vout.value(j)).abs() > tol(&vout) {
                return Err(SimError::InvalidTable(format!("row {} is off the uniform grid", k + 2)));
            }
        }
        Self::new(vin, vout, rows.into_iter().map(|r| r.2).collect())
    }
}
