// SPDX-License-Identifier: Apache-2.0

use std::time::Instant;

use anyhow::{bail, Context, Result};

use snacluster::characterize::{
    build_nrc, build_vccs_table, fit_thevenin, receiver_cap, select_side_inputs, CellPins, NrcOptions,
};
use snacluster::cluster::{
    noise_metrics, nrc_check, simulate_combined, simulate_oracle, simulate_superposition, worst_case_alignment,
    ClusterError, NoiseMetrics, Verdict,
};
use snacluster::mor::{build_coupled_pi, split_interconnect};
use snacluster::netlist::SaturatedRamp;
use snacluster::simcore::{NewtonOptions, Waveform};

use crate::config::{read_cell, Config, LoadedCluster};
use crate::output::write_atomic;
use crate::{
    AnalyzeArgs, CellArgs, CompareArgs, Mode, NrcArgs, RcapArgs, ReduceArgs, SimFlags, TheveninArgs, VccsArgs,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 2;
pub const EXIT_FAIL: u8 = 3;
pub const EXIT_BOUNDARY: u8 = 4;

fn cell_pins(a: &CellArgs, cell: &snacluster::netlist::Circuit) -> CellPins {
    let mut pins = CellPins::new(&a.in_pin, &a.out_pin);
    let supply = a.supply.to_ascii_lowercase();
    if cell.find_node(&supply).is_some() && !a.fixed.iter().any(|(p, _)| p.eq_ignore_ascii_case(&supply)) {
        pins = pins.with_fixed(&supply, a.vdd);
    }
    for (p, v) in &a.fixed {
        pins = pins.with_fixed(p, *v);
    }
    pins
}

pub fn characterize_vccs(a: &VccsArgs) -> Result<u8> {
    let cell = read_cell(&a.cell.cell)?;
    let mut pins = cell_pins(&a.cell, &cell);
    let newton = NewtonOptions::default();
    if !a.side.is_empty() {
        let (Some(q), Some(noisy)) = (a.vin_q, a.vin_noisy) else {
            bail!("--side needs --vin-q and --vin-noisy");
        };
        let side: Vec<&str> = a.side.iter().map(String::as_str).collect();
        for (p, v) in select_side_inputs(&cell, &pins, &side, a.cell.vdd, q, noisy, &newton)? {
            pins = pins.with_fixed(&p, v);
        }
    }
    let table = build_vccs_table(&cell, &pins, a.cell.vdd, a.grid, &newton)?;
    write_atomic(&a.output, |w| Ok(table.write_csv(w)?))?;
    let fixed: Vec<String> = pins.fixed.iter().map(|(p, v)| format!("{p}={v}")).collect();
    println!(
        "vccs: {}x{} table over [{}, {}] V with {} -> {}",
        a.grid,
        a.grid,
        table.vin_grid().start(),
        table.vin_grid().stop(),
        fixed.join(" "),
        a.output.display()
    );
    Ok(EXIT_OK)
}

pub fn characterize_thevenin(a: &TheveninArgs) -> Result<u8> {
    let cell = read_cell(&a.cell.cell)?;
    let pins = cell_pins(&a.cell, &cell);
    let ramp = SaturatedRamp {
        t0_s: a.t0,
        slew_s: a.slew,
        v_start: a.from.unwrap_or(0.0),
        v_end: a.to.unwrap_or(a.cell.vdd),
    };
    let d = fit_thevenin(&cell, &pins, &ramp, a.cell.vdd, a.load, &NewtonOptions::default())?;
    write_atomic(&a.output, |w| Ok(d.write_csv(w)?))?;
    println!(
        "thevenin: r_th {:.1} ohm, t0 {:.2} ps, slew {:.2} ps -> {}",
        d.r_th_ohms,
        d.ramp.t0_s * 1e12,
        d.ramp.slew_s * 1e12,
        a.output.display()
    );
    Ok(EXIT_OK)
}

pub fn characterize_nrc(a: &NrcArgs) -> Result<u8> {
    let cell = read_cell(&a.cell.cell)?;
    let pins = cell_pins(&a.cell, &cell);
    let opts = NrcOptions {
        quiet_input_v: a.quiet_in,
        ..NrcOptions::default()
    };
    let nrc = build_nrc(
        &cell,
        &pins,
        a.cell.vdd,
        &a.widths,
        a.load,
        &opts,
        &NewtonOptions::default(),
    )?;
    write_atomic(&a.output, |w| Ok(nrc.write_csv(w)?))?;
    let amps: Vec<String> = nrc.points().iter().map(|p| format!("{:.3}", p.amplitude_v)).collect();
    println!(
        "nrc: {} points, amplitudes [{}] V -> {}",
        amps.len(),
        amps.join(", "),
        a.output.display()
    );
    Ok(EXIT_OK)
}

pub fn characterize_rcap(a: &RcapArgs) -> Result<u8> {
    let cell = read_cell(&a.cell)?;
    let cap = receiver_cap(&cell, &a.input)?;
    write_atomic(&a.output, |w| {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["pin", "cap_f"])?;
        wr.write_record([a.input.to_ascii_lowercase(), format!("{cap:e}")])?;
        wr.flush()?;
        Ok(())
    })?;
    println!("rcap: {} = {:.4} fF -> {}", a.input, cap * 1e15, a.output.display());
    Ok(EXIT_OK)
}

pub fn reduce(a: &ReduceArgs) -> Result<u8> {
    let lines = read_cell(&a.netlist)?;
    let ports: Vec<(&str, &str)> = a.nets.iter().map(|(n, p)| (n.as_str(), p.as_str())).collect();
    let (nets, couplings) = split_interconnect(&lines, &ports)?;
    let model = build_coupled_pi(&nets, &couplings)?;
    write_atomic(&a.output, |w| Ok(model.write_csv(w)?))?;
    for (name, np) in model.nets() {
        let p = np.pi;
        println!(
            "reduce: {name}: c_near {:.4} fF, r {:.3} ohm, c_far {:.4} fF{}",
            p.c_near_f * 1e15,
            p.r_ohms,
            p.c_far_f * 1e15,
            if np.fallback { " (lumped)" } else { "" }
        );
    }
    println!(
        "reduce: {} nets, {} coupling pairs -> {}",
        model.nets().len(),
        model.couplings().count(),
        a.output.display()
    );
    Ok(EXIT_OK)
}

/// Loads the cluster, applies command-line overrides and, when requested,
/// the worst-case alignment shared by every mode.
fn prepare(config: &std::path::Path, flags: &SimFlags) -> Result<LoadedCluster> {
    let (cfg, base) = Config::read(config)?;
    let mut l = cfg.load(&base)?;
    if let Some(t) = flags.t_stop {
        let dt_explicit = cfg.sim.dt.is_some() || flags.dt.is_some();
        l.sim.t_stop_s = t;
        if !dt_explicit {
            l.sim.dt_s = t / 2000.0;
        }
    }
    if let Some(dt) = flags.dt {
        l.sim.dt_s = dt;
    }
    if l.align || flags.align {
        match worst_case_alignment(&l.spec, &l.sim) {
            Ok(al) => {
                for c in al.flagged() {
                    eprintln!("warning: contributor `{}` peaks below 1 mV and was not aligned", c.name);
                }
                l.oracle = l.oracle.with_timing_of(&al.spec)?;
                l.spec = al.spec;
            }
            Err(ClusterError::NoContributor) => {}
            Err(e) => return Err(e).context("alignment"),
        }
    }
    Ok(l)
}

/// Victim driving-point deviation and the wall-clock time of the solve.
fn run_mode(l: &LoadedCluster, mode: Mode) -> Result<(Waveform, f64)> {
    let t = Instant::now();
    let w = match mode {
        Mode::Oracle => simulate_oracle(&l.oracle, &l.sim)?.driving,
        Mode::Macromodel => simulate_combined(&l.spec, &l.sim)?.driving,
        Mode::Superposition => simulate_superposition(&l.spec, &l.sim)?.total,
    };
    Ok((w, t.elapsed().as_secs_f64()))
}

fn verdict(l: &LoadedCluster, m: &NoiseMetrics) -> Option<Verdict> {
    l.nrc.as_ref().map(|nrc| nrc_check(m, nrc))
}

fn verdict_label(v: Option<Verdict>) -> String {
    v.map_or_else(|| "none".to_string(), |v| v.to_string())
}

pub fn analyze(a: &AnalyzeArgs) -> Result<u8> {
    let l = prepare(&a.config, &a.sim)?;
    let (w, secs) = run_mode(&l, a.mode).with_context(|| format!("{} mode", a.mode.label()))?;
    let m = noise_metrics(&w, 0.0);
    let v = verdict(&l, &m);
    let label = a.mode.label();
    write_atomic(&a.out_dir.join(format!("victim_{label}.csv")), |out| {
        Ok(w.write_csv(out)?)
    })?;
    write_atomic(&a.out_dir.join(format!("report_{label}.csv")), |out| {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record(["mode", "peak_v", "width_s", "area_v_s", "verdict"])?;
        wr.write_record([
            label.to_string(),
            format!("{:e}", m.peak_v),
            format!("{:e}", m.width_s),
            format!("{:e}", m.area_v_s),
            verdict_label(v),
        ])?;
        wr.flush()?;
        Ok(())
    })?;
    println!(
        "{label}: peak {:.4} V, width {:.2} ps, area {:.3} V·ps, verdict {}, solve {secs:.4} s",
        m.peak_v,
        m.width_s * 1e12,
        m.area_v_s * 1e12,
        verdict_label(v)
    );
    Ok(match v {
        None | Some(Verdict::Pass) => EXIT_OK,
        Some(Verdict::Fail) => EXIT_FAIL,
        Some(Verdict::Boundary) => EXIT_BOUNDARY,
    })
}

fn err_pct(x: f64, reference: f64) -> String {
    if reference == 0.0 {
        "nan".into()
    } else {
        format!("{:.3}", (x - reference) / reference * 100.0)
    }
}

pub fn compare(a: &CompareArgs) -> Result<u8> {
    let l = prepare(&a.config, &a.sim)?;
    let mut results = Vec::new();
    for mode in [Mode::Oracle, Mode::Superposition, Mode::Macromodel] {
        let (w, secs) = run_mode(&l, mode).with_context(|| format!("{} mode", mode.label()))?;
        results.push((mode, noise_metrics(&w, 0.0), secs));
    }
    let (o, s, m) = (results[0].1, results[1].1, results[2].1);
    write_atomic(&a.output, |out| {
        let mut wr = csv::Writer::from_writer(out);
        wr.write_record([
            "metric",
            "oracle",
            "superposition",
            "superposition_err_pct",
            "macromodel",
            "macromodel_err_pct",
        ])?;
        let rows: [(&str, fn(&NoiseMetrics) -> f64); 2] = [("peak_v", |x| x.peak_v), ("area_v_s", |x| x.area_v_s)];
        for (name, f) in rows {
            wr.write_record([
                name.to_string(),
                format!("{:e}", f(&o)),
                format!("{:e}", f(&s)),
                err_pct(f(&s), f(&o)),
                format!("{:e}", f(&m)),
                err_pct(f(&m), f(&o)),
            ])?;
        }
        wr.flush()?;
        Ok(())
    })?;
    for (mode, met, secs) in &results {
        println!(
            "{:>13}: peak {:.4} V, area {:.3} V·ps, verdict {}, solve {secs:.4} s",
            mode.label(),
            met.peak_v,
            met.area_v_s * 1e12,
            verdict_label(verdict(&l, met))
        );
    }
    println!(
        "errors vs oracle: superposition peak {}% area {}%, macromodel peak {}% area {}% -> {}",
        err_pct(s.peak_v, o.peak_v),
        err_pct(s.area_v_s, o.area_v_s),
        err_pct(m.peak_v, o.peak_v),
        err_pct(m.area_v_s, o.area_v_s),
        a.output.display()
    );
    Ok(EXIT_OK)
}
