// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::sync::Arc;

use super::*;
use crate::netlist::{parse_netlist, Circuit, SourceSpec};

const INVERTER: &str = "\
.model nch NMOS VT0=0.4 KP=200u LAMBDA=0
.model pch PMOS VT0=-0.4 KP=100u LAMBDA=0
VDD vdd 0 DC 1.2
VIN in 0 DC 0
MN out in 0 0 nch W=2u L=1u
MP out in vdd vdd pch W=4u L=1u
.end";

fn dc(c: &Circuit, overrides: &[(&str, f64)]) -> OperatingPoint {
    let map: HashMap<String, f64> = overrides.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    dc_operating_point(c, &map, &SimOptions::default()).unwrap()
}

#[test]
fn resistor_divider() {
    let c = parse_netlist("V1 a 0 DC 1\nR1 a m 1k\nR2 m 0 1k\n.end").unwrap();
    let op = dc(&c, &[]);
    assert!((op.voltage("m").unwrap() - 0.5).abs() < 1e-9);
    // 0.5 mA enters the source's + terminal from the outside as -0.5 mA
    assert!((op.source_current("V1").unwrap() + 0.5e-3).abs() < 1e-9);
}

#[test]
fn inverter_with_input_low_pulls_high() {
    let c = parse_netlist(INVERTER).unwrap();
    let op = dc(&c, &[]);
    assert!((op.voltage("out").unwrap() - 1.2).abs() < 1e-6);
}

/// Independent square-law current for the balance oracle below.
fn square_law(beta: f64, lambda: f64, vov: f64, vds: f64) -> f64 {
    let clm = 1.0 + lambda * vds;
    if vov <= 0.0 {
        0.0
    } else if vds < vov {
        beta * (vov * vds - vds * vds / 2.0) * clm
    } else {
        beta / 2.0 * vov * vov * clm
    }
}

#[test]
fn inverter_midpoint_matches_scalar_root_find() {
    // With matched betas and no channel-length modulation both devices
    // saturate at equal current over a whole range of outputs, so the
    // midpoint is only unique with lambda > 0.
    let (vdd, vin, lambda) = (1.2, 0.6, 0.05);
    // Id,N(v) - Id,P(v) is increasing in v; bisect for the balance point.
    let imbalance = |v: f64| {
        square_law(200e-6 * 2.0, lambda, vin - 0.4, v) - square_law(100e-6 * 4.0, lambda, vdd - vin - 0.4, vdd - v)
    };
    let (mut lo, mut hi) = (0.0, vdd);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if imbalance(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let expected = 0.5 * (lo + hi);
    let c = parse_netlist(&INVERTER.replace("LAMBDA=0", "LAMBDA=0.05")).unwrap();
    let got = dc(&c, &[("VIN", vin)]).voltage("out").unwrap();
    assert!((got - expected).abs() < 1e-5, "{got} vs {expected}");
}

#[test]
fn voltage_limiting_does_not_move_the_fixed_point() {
    let c = parse_netlist(INVERTER).unwrap();
    let map: HashMap<String, f64> = [("vin".to_string(), 0.55)].into();
    let mut unlimited = SimOptions::default();
    unlimited.newton.max_voltage_step_v = 1e3;
    let a = dc_operating_point(&c, &map, &SimOptions::default()).unwrap();
    let b = dc_operating_point(&c, &map, &unlimited).unwrap();
    let (va, vb) = (a.voltage("out").unwrap(), b.voltage("out").unwrap());
    assert!((va - vb).abs() < 1e-6 + 1e-3 * va.abs(), "{va} vs {vb}");
}

#[test]
fn unknown_override_is_an_error() {
    let c = parse_netlist(INVERTER).unwrap();
    let map: HashMap<String, f64> = [("vx".to_string(), 0.5)].into();
    assert!(matches!(
        dc_operating_point(&c, &map, &SimOptions::default()),
        Err(SimError::UnknownSource(_))
    ));
}

#[test]
fn rc_step_matches_closed_form() {
    let (r, cap) = (1e3, 1e-12);
    let tau = r * cap;
    let c = parse_netlist("V1 in 0 PWL(0 0 1f 1)\nR1 in out 1k\nC1 out 0 1p\n.end").unwrap();
    let opts = SimOptions::new(5.0 * tau).with_dt(tau / 100.0);
    let w = &transient(&c, &opts, &["out"]).unwrap()["out"];
    let worst = w
        .times()
        .iter()
        .zip(w.values())
        .map(|(&t, &v)| (v - (1.0 - (-t / tau).exp())).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.005, "max error {worst}");
}

#[test]
fn zero_input_gives_zero_output() {
    let c = parse_netlist("V1 in 0 DC 0\nR1 in a 1k\nC1 a 0 1p\nR2 a b 2k\nC2 b 0 3p\nC3 a b 1p\n.end").unwrap();
    let res = transient(&c, &SimOptions::new(1e-8), &["a", "b"]).unwrap();
    for w in res.values() {
        assert!(w.values().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn capacitor_charge_balance() {
    let c = parse_netlist(
        "V1 in 0 PWL(0 0 0.2n 1 0.5n 0.3 1.2n 0.9)\nR1 in a 500\nC1 a 0 1p\nR2 a b 2k\nC2 b 0 0.4p\nC3 a b 0.2p\n.end",
    )
    .unwrap();
    let res = transient_full(&c, &SimOptions::new(2e-9)).unwrap();
    for (name, (p, n)) in [("C1", ("a", "0")), ("C2", ("b", "0")), ("C3", ("a", "b"))] {
        let i = res.capacitor_current(name).unwrap();
        let t = res.times();
        let q: f64 = res
            .methods()
            .iter()
            .enumerate()
            .map(|(k, m)| {
                let h = t[k + 1] - t[k];
                match m {
                    StepMethod::BackwardEuler => h * i[k + 1],
                    StepMethod::Trapezoidal => 0.5 * h * (i[k] + i[k + 1]),
                }
            })
            .sum();
        let vp = res.waveform(p).unwrap();
        let vn = res.waveform(n).unwrap();
        let dv = (vp.last_value() - vn.last_value()) - (vp.first_value() - vn.first_value());
        let farads = match name {
            "C1" => 1e-12,
            "C2" => 0.4e-12,
            _ => 0.2e-12,
        };
        assert!(
            (q - farads * dv).abs() <= 1e-3 * (farads * dv).abs(),
            "{name}: {q} vs {}",
            farads * dv
        );
    }
}

fn two_source_circuit(a: SourceSpec, b: SourceSpec) -> Circuit {
    let mut c = Circuit::new();
    c.add_vsource("VA", "sa", "0", a).unwrap();
    c.add_vsource("VB", "sb", "0", b).unwrap();
    c.add_resistor("RA", "sa", "x", 1e3).unwrap();
    c.add_resistor("RB", "sb", "y", 2e3).unwrap();
    c.add_capacitor("CX", "x", "0", 20e-15).unwrap();
    c.add_capacitor("CY", "y", "0", 30e-15).unwrap();
    c.add_capacitor("CXY", "x", "y", 25e-15).unwrap();
    c.add_resistor("RX", "x", "0", 5e3).unwrap();
    c
}

#[test]
fn linear_superposition_holds() {
    let ramp = SourceSpec::Pwl {
        points: vec![(50e-12, 0.0), (150e-12, 1.2)],
    };
    let glitch = SourceSpec::Pwl {
        points: vec![(100e-12, 0.0), (200e-12, -0.5), (400e-12, 0.0)],
    };
    let zero = SourceSpec::Dc { volts: 0.0 };
    let opts = SimOptions::new(1e-9);
    let run = |a: SourceSpec, b: SourceSpec| {
        transient(&two_source_circuit(a, b), &opts, &["x"])
            .unwrap()
            .remove("x")
            .unwrap()
    };
    let wa = run(ramp.clone(), zero.clone());
    let wb = run(zero, glitch.clone());
    let wab = run(ramp, glitch);
    let scale = wab.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for k in 0..wab.len() {
        let gap = (wab.values()[k] - wa.values()[k] - wb.values()[k]).abs();
        assert!(gap <= 10.0 * 1e-3 * scale, "sample {k}: gap {gap}");
    }
}

#[test]
fn table_vccs_behaves_like_a_transconductor() {
    // I = G (vin - vout): a unity follower through conductance G.
    let g = 1e-3;
    let grid = UniformGrid::new(-1.0, 2.0, 13).unwrap();
    let table = VccsTable::from_fn(grid, grid, |vi, vo| g * (vi - vo)).unwrap();
    let mut c = Circuit::new();
    c.add_vsource("VIN", "in", "0", SourceSpec::Dc { volts: 0.8 }).unwrap();
    c.add_table_vccs("G1", "in", "out", Arc::new(table)).unwrap();
    c.add_resistor("RL", "out", "0", 1e3).unwrap();
    let v = dc(&c, &[]).voltage("out").unwrap();
    assert!((v - 0.4).abs() < 1e-6, "{v}");
}

#[test]
fn rejects_bad_options() {
    let c = parse_netlist("R1 a 0 1k\n.end").unwrap();
    let mut opts = SimOptions::new(1e-9);
    opts.t_stop_s = 0.0;
    assert!(matches!(transient_full(&c, &opts), Err(SimError::InvalidOptions(_))));
    assert!(matches!(
        transient(&c, &SimOptions::new(1e-9), &["nope"]),
        Err(SimError::UnknownNode(_))
    ));
}

#[test]
fn nonlinear_transient_is_deterministic() {
    let mut text = INVERTER.replace("VIN in 0 DC 0", "VIN in 0 SRAMP(50p 100p 0 1.2)");
    text = text.replace(".end", "CL out 0 20f\n.end");
    let c = parse_netlist(&text).unwrap();
    let opts = SimOptions::new(1e-9);
    let a = transient(&c, &opts, &["out"]).unwrap();
    let b = transient(&c, &opts, &["out"]).unwrap();
    assert_eq!(a, b);
    let w = &a["out"];
    assert!(w.first_value() > 1.19 && w.last_value() < 0.01);
}
