// SPDX-License-Identifier: Apache-2.0

use std::io::{Read, Write};

use super::SimError;

/// Sampled voltage trace with strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    t: Vec<f64>,
    v: Vec<f64>,
}

impl Waveform {
    pub fn new(t: Vec<f64>, v: Vec<f64>) -> Result<Self, SimError> {
        if t.is_empty() || t.len() != v.len() {
            return Err(SimError::InvalidWaveform("empty or mismatched samples".into()));
        }
        if t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SimError::InvalidWaveform("times must be strictly increasing".into()));
        }
        Ok(Self { t, v })
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.v
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn first_value(&self) -> f64 {
        self.v[0]
    }

    pub fn last_value(&self) -> f64 {
        self.v[self.v.len() - 1]
    }

    pub fn duration(&self) -> f64 {
        self.t[self.t.len() - 1] - self.t[0]
    }

    /// Linear interpolation, holding the end values outside the sampled span.
    pub fn value_at(&self, t: f64) -> f64 {
        if t <= self.t[0] {
            return self.v[0];
        }
        let k = self.t.partition_point(|&x| x <= t);
        if k >= self.t.len() {
            return self.last_value();
        }
        let (t0, t1) = (self.t[k - 1], self.t[k]);
        self.v[k - 1] + (self.v[k] - self.v[k - 1]) * (t - t0) / (t1 - t0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            t: self.t.clone(),
            v: self.v.iter().map(|&x| f(x)).collect(),
        }
    }

    /// `v - base` sample by sample.
    pub fn deviation(&self, base: f64) -> Self {
        self.map(|x| x - base)
    }

    /// Time and value of the sample with the largest magnitude.
    pub fn peak_abs(&self) -> (f64, f64) {
        let mut best = (self.t[0], self.v[0]);
        for (&t, &v) in self.t.iter().zip(&self.v) {
            if v.abs() > best.1.abs() {
                best = (t, v);
            }
        }
        best
    }

    /// Resamples onto `times`, shifted right by `dt` (values before the shifted
    /// start hold the first sample).
    pub fn delayed_onto(&self, times: &[f64], dt: f64) -> Vec<f64> {
        times.iter().map(|&t| self.value_at(t - dt)).collect()
    }

    /// First time the trace crosses `level` moving in the direction `rising`,
    /// with linear interpolation between samples.
    pub fn crossing(&self, level: f64, rising: bool) -> Option<f64> {
        for k in 1..self.t.len() {
            let (a, b) = (self.v[k - 1], self.v[k]);
            let crossed = if rising {
                a < level && b >= level
            } else {
                a > level && b <= level
            };
            if crossed {
                let frac = (level - a) / (b - a);
                return Some(self.t[k - 1] + frac * (self.t[k] - self.t[k - 1]));
            }
        }
        None
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SimError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["time_s", "voltage_v"])?;
        for (t, v) in self.t.iter().zip(&self.v) {
            wr.write_record([format!("{t:e}"), format!("{v:e}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, SimError> {
        let mut rd = csv::Reader::from_reader(r);
        if rd.headers()?.iter().collect::<Vec<_>>() != ["time_s", "voltage_v"] {
            return Err(SimError::InvalidWaveform("expected header time_s,voltage_v".into()));
        }
        let (mut t, mut v) = (Vec::new(), Vec::new());
        for rec in rd.records() {
            let rec = rec?;
            let num = |k: usize| {
                rec.get(k)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| SimError::InvalidWaveform(format!("bad row {rec:?}")))
            };
            t.push(num(0)?);
            v.push(num(1)?);
        }
        Self::new(t, v)
    }
}
