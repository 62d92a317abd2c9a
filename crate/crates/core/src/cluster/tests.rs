// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::sync::OnceLock;

use super::*;
use crate::characterize::{build_nrc, CellPins, NoiseRejectionCurve, NrcOptions, NrcPoint};
use crate::mor::CoupledPiModel;
use crate::netlist::{ElementKind, SaturatedRamp, SourceSpec, TriangleGlitch};
use crate::reference::{inverter, reference_cluster, ReferenceCluster, ReferenceOptions, VDD};
use crate::simcore::{dc_operating_point, SimOptions, Waveform};

fn one_aggressor() -> &'static ReferenceCluster {
    static RC: OnceLock<ReferenceCluster> = OnceLock::new();
    RC.get_or_init(|| reference_cluster(&ReferenceOptions::default()).unwrap())
}

fn two_aggressors() -> &'static ReferenceCluster {
    static RC: OnceLock<ReferenceCluster> = OnceLock::new();
    RC.get_or_init(|| {
        reference_cluster(&ReferenceOptions {
            aggressors: 2,
            ..ReferenceOptions::default()
        })
        .unwrap()
    })
}

fn quiet_input(spec: &ClusterSpec) -> ClusterSpec {
    let mut s = spec.clone();
    s.victim.input_noise = SourceSpec::Dc { volts: s.victim.v_in_q };
    s
}

fn max_gap(a: &Waveform, b: &Waveform) -> f64 {
    a.times()
        .iter()
        .map(|&t| (a.value_at(t) - b.value_at(t)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn quiet_cluster_sits_at_the_quiescent_point() {
    let mut spec = quiet_input(&two_aggressors().spec);
    spec.aggressors.clear();
    let model = assemble_macromodel(&spec).unwrap();
    let opts = SimOptions::default();
    let op = dc_operating_point(&model.circuit, &HashMap::new(), &opts).unwrap();
    let n = model.victim_nodes();
    for node in [&n.near, &n.far] {
        let v = op.voltage(node).unwrap();
        assert!((v - spec.victim.v_out_q).abs() < opts.newton.vabstol_v, "{node}: {v}");
    }
}

#[test]
fn two_aggressor_macromodel_has_the_cluster_topology() {
    let model = assemble_macromodel(&two_aggressors().spec).unwrap();
    let el = model.circuit.elements();
    let count = |f: &dyn Fn(&str, &ElementKind) -> bool| el.iter().filter(|e| f(&e.name, &e.kind)).count();
    assert_eq!(count(&|_, k| matches!(k, ElementKind::TableVccs { .. })), 1);
    assert_eq!(count(&|_, k| matches!(k, ElementKind::VSource { .. })), 3);
    assert_eq!(count(&|n, _| n.starts_with("VAGG")), 2);
    assert_eq!(count(&|n, _| n.starts_with("RAGG")), 2);
    for net in ["a0", "v", "a1"] {
        assert!(model.circuit.element(&format!("RPI_{net}")).is_some());
        assert!(model.circuit.element(&format!("CPI_{net}_N")).is_some());
        assert!(model.circuit.element(&format!("CPI_{net}_F")).is_some());
        assert!(model.circuit.element(&format!("CRX_{net}")).is_some());
    }
    assert_eq!(count(&|n, _| n.starts_with("CCPL_")), 2);
    assert_eq!(el.len(), 1 + 1 + 2 * 2 + 3 * 3 + 2 + 3);
    // every aggressor resistor lands on its net's near node
    for (k, net) in ["a0", "a1"].iter().enumerate() {
        let ElementKind::Resistor { b, .. } = model.circuit.element(&format!("RAGG{k}_TH")).unwrap().kind else {
            panic!()
        };
        assert_eq!(model.circuit.node_name(b), model.nodes[*net].near);
    }
}

#[test]
fn uncoupled_aggressor_leaves_the_victim_alone() {
    let rc = one_aggressor();
    let mut spec = rc.spec.clone();
    spec.interconnect =
        CoupledPiModel::new(spec.interconnect.nets().to_vec(), &[("v".into(), "a0".into(), 0.0)]).unwrap();
    let with = simulate_combined(&spec, &rc.sim).unwrap();
    spec.aggressors.clear();
    let without = simulate_combined(&spec, &rc.sim).unwrap();
    assert!(max_gap(&with.driving, &without.driving) < 1e-6);
    assert!(max_gap(&with.far, &without.far) < 1e-6);
}

#[test]
fn injected_noise_dies_out() {
    let rc = one_aggressor();
    let w = simulate_combined(&quiet_input(&rc.spec), &rc.sim).unwrap().driving;
    assert!(w.peak_abs().1 > 0.05);
    assert!(w.last_value().abs() < 1e-3, "{}", w.last_value());
}

#[test]
fn propagated_glitch_is_inverted() {
    let rc = one_aggressor();
    let mut spec = rc.spec.clone();
    spec.aggressors.clear();
    let w = simulate_combined(&spec, &rc.sim).unwrap().driving;
    // input dips below vdd, output rises off the low rail
    assert!(w.peak_abs().1 > 1e-3);
    assert!(w.values().iter().all(|&v| v > -1e-6));
}

#[test]
fn superposition_without_aggressors_is_the_propagated_run() {
    let rc = one_aggressor();
    let mut spec = rc.spec.clone();
    spec.aggressors.clear();
    let sup = simulate_superposition(&spec, &rc.sim).unwrap();
    let comb = simulate_combined(&spec, &rc.sim).unwrap();
    assert_eq!(sup.total, comb.driving);
}

fn small_aggressor(swing: f64) -> ClusterSpec {
    let mut spec = quiet_input(&one_aggressor().spec);
    let r = &mut spec.aggressors[0].driver.ramp;
    r.v_end = r.v_start + swing;
    spec
}

#[test]
fn small_signal_superposition_matches_the_macromodel() {
    let rc = one_aggressor();
    for swing in [0.1, 0.25] {
        let spec = small_aggressor(swing);
        let comb = simulate_combined(&spec, &rc.sim).unwrap().driving;
        let sup = simulate_superposition(&spec, &rc.sim).unwrap().total;
        let peak = comb.peak_abs().1.abs().max(sup.peak_abs().1.abs());
        assert!(peak <= 0.05, "peak {peak}");
        let gap = max_gap(&comb, &sup);
        assert!(gap <= 0.02 * peak, "swing {swing}: gap {gap} of {peak}");
        let (mc, ms) = (noise_metrics(&comb, 0.0), noise_metrics(&sup, 0.0));
        assert!((ms.peak_v - mc.peak_v).abs() <= 0.02 * mc.peak_v);
        assert!((ms.area_v_s - mc.area_v_s).abs() <= 0.02 * mc.area_v_s);
    }
}

#[test]
fn superposition_underestimates_overlapping_noise() {
    for rc in [one_aggressor(), two_aggressors()] {
        let spec = worst_case_alignment(&rc.spec, &rc.sim).unwrap().spec;
        let comb = noise_metrics(&simulate_combined(&spec, &rc.sim).unwrap().driving, 0.0);
        let sup = noise_metrics(&simulate_superposition(&spec, &rc.sim).unwrap().total, 0.0);
        assert!(sup.area_v_s <= comb.area_v_s, "{sup:?} vs {comb:?}");
        assert!(sup.peak_v <= comb.peak_v, "{sup:?} vs {comb:?}");
    }
}

#[test]
fn identical_aggressors_are_already_aligned() {
    let rc = two_aggressors();
    let spec = quiet_input(&rc.spec);
    let al = worst_case_alignment(&spec, &rc.sim).unwrap();
    assert_eq!(al.contributors.len(), 2);
    for (a, b) in al.spec.aggressors.iter().zip(&spec.aggressors) {
        assert_eq!(a.offset_s, b.offset_s);
    }
}

#[test]
fn later_peak_sets_the_common_time() {
    let rc = two_aggressors();
    let mut spec = quiet_input(&rc.spec);
    spec.aggressors[1].offset_s = 300e-12;
    let al = worst_case_alignment(&spec, &rc.sim).unwrap();
    let c = &al.contributors;
    assert!((c[1].peak_time_s - c[0].peak_time_s - 300e-12).abs() <= 2.0 * rc.sim.dt_s);
    assert!((al.spec.aggressors[0].offset_s - 300e-12).abs() <= 2.0 * rc.sim.dt_s);
    assert_eq!(al.spec.aggressors[1].offset_s, 300e-12);
    assert_eq!(c[1].shift_s, 0.0);
}

#[test]
fn propagated_glitch_is_shifted_onto_the_aggressor_peak() {
    let rc = one_aggressor();
    let al = worst_case_alignment(&rc.spec, &rc.sim).unwrap();
    assert_eq!(al.contributors[0].name, "propagated");
    let shift = al.contributors[0].shift_s;
    assert_eq!(al.spec.victim.input_noise, rc.spec.victim.input_noise.shifted(shift));
    // the shifted contributor now peaks with the other one
    let mut alone = al.spec.clone();
    alone.aggressors.clear();
    let t = simulate_combined(&alone, &rc.sim).unwrap().driving.peak_abs().0;
    assert!((t - al.contributors[1].peak_time_s).abs() <= 2.0 * rc.sim.dt_s);
}

#[test]
fn silent_contributor_is_flagged_and_left_in_place() {
    let rc = two_aggressors();
    let mut spec = quiet_input(&rc.spec);
    let r = &mut spec.aggressors[1].driver.ramp;
    r.v_end = r.v_start;
    spec.aggressors[1].offset_s = -50e-12;
    let al = worst_case_alignment(&spec, &rc.sim).unwrap();
    let flagged: Vec<_> = al.flagged().map(|c| c.name.as_str()).collect();
    assert_eq!(flagged, ["a1"]);
    assert_eq!(al.spec.aggressors[1].offset_s, -50e-12);
    assert_eq!(al.spec.aggressors[0].offset_s, 0.0);
}

#[test]
fn alignment_needs_a_contributor() {
    let mut spec = quiet_input(&one_aggressor().spec);
    spec.aggressors.clear();
    assert!(matches!(
        worst_case_alignment(&spec, &one_aggressor().sim),
        Err(ClusterError::NoContributor)
    ));
}

fn triangle(t0: f64, base: f64, h: f64, t_stop: f64, n: usize) -> Waveform {
    let g = TriangleGlitch {
        t0_s: t0,
        t_peak_s: t0 + base / 2.0,
        t_end_s: t0 + base,
        v_base: 0.0,
        v_peak: h,
    };
    let t: Vec<f64> = (0..=n).map(|k| t_stop * k as f64 / n as f64).collect();
    let v = t.iter().map(|&x| g.eval(x)).collect();
    Waveform::new(t, v).unwrap()
}

#[test]
fn triangle_metrics() {
    let w = triangle(0.0, 300e-12, 0.4, 300e-12, 300);
    let m = noise_metrics(&w, 0.0);
    assert!((m.peak_v - 0.4).abs() < 1e-12);
    assert!((m.width_s - 150e-12).abs() < 1e-20);
    assert!((m.area_v_s - 60e-12).abs() < 1e-20);
    // taken about a nonzero quiescent level, and below it
    let shifted = w.map(|v| 0.5 - v);
    let m2 = noise_metrics(&shifted, 0.5);
    assert!((m2.peak_v - m.peak_v).abs() < 1e-12 && (m2.area_v_s - m.area_v_s).abs() < 1e-20);
    assert!((m2.width_s - m.width_s).abs() < 1e-20);
}

#[test]
fn quiet_metrics_are_zero() {
    let w = Waveform::new(vec![0.0, 1e-9, 2e-9], vec![0.3; 3]).unwrap();
    assert_eq!(
        noise_metrics(&w, 0.3),
        NoiseMetrics {
            peak_v: 0.0,
            width_s: 0.0,
            area_v_s: 0.0
        }
    );
}

#[test]
fn disjoint_triangles_add_up() {
    let one = noise_metrics(&triangle(0.0, 300e-12, 0.4, 1e-9, 1000), 0.0);
    let a = triangle(0.0, 300e-12, 0.4, 1e-9, 1000);
    let b = triangle(500e-12, 300e-12, 0.4, 1e-9, 1000);
    let v: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| x + y).collect();
    let two = noise_metrics(&Waveform::new(a.times().to_vec(), v).unwrap(), 0.0);
    assert!((two.peak_v - one.peak_v).abs() < 1e-12);
    assert!((two.width_s - 2.0 * one.width_s).abs() < 1e-18);
    assert!((two.area_v_s - 2.0 * one.area_v_s).abs() < 1e-18);
}

fn flat_curve() -> NoiseRejectionCurve {
    let p = |w: f64, a: f64| NrcPoint {
        width_s: w,
        amplitude_v: a,
        saturated: false,
    };
    NoiseRejectionCurve::new(vec![p(100e-12, 0.8), p(300e-12, 0.5), p(1e-9, 0.45)]).unwrap()
}

fn metrics(peak: f64, width: f64) -> NoiseMetrics {
    NoiseMetrics {
        peak_v: peak,
        width_s: width,
        area_v_s: peak * width,
    }
}

#[test]
fn verdicts_against_a_curve() {
    let nrc = flat_curve();
    assert_eq!(nrc_check(&metrics(0.2, 300e-12), &nrc), Verdict::Pass);
    assert_eq!(nrc_check(&metrics(0.5, 300e-12), &nrc), Verdict::Boundary);
    assert_eq!(nrc_check(&metrics(0.65, 200e-12), &nrc), Verdict::Boundary);
    assert_eq!(nrc_check(&metrics(0.6505, 200e-12), &nrc), Verdict::Boundary);
    assert_eq!(nrc_check(&metrics(0.6515, 200e-12), &nrc), Verdict::Fail);
    assert_eq!(nrc_check(&metrics(0.6485, 200e-12), &nrc), Verdict::Pass);
    // beyond the last width the last amplitude holds
    assert_eq!(nrc_check(&metrics(0.46, 5e-9), &nrc), Verdict::Fail);
    assert_eq!(nrc_check(&metrics(0.44, 5e-9), &nrc), Verdict::Pass);
    assert_eq!(nrc_check(&metrics(0.0, 0.0), &nrc), Verdict::Pass);
}

#[test]
fn large_wide_glitch_fails_a_characterized_curve() {
    let inv = inverter();
    let pins = CellPins::new("a", "y").with_fixed("vdd", VDD);
    let widths = [100e-12, 400e-12, 1.6e-9];
    let nrc = build_nrc(
        &inv,
        &pins,
        VDD,
        &widths,
        2e-15,
        &NrcOptions::default(),
        &Default::default(),
    )
    .unwrap();
    let last = nrc.points().last().unwrap();
    assert!(!last.saturated && last.amplitude_v < 0.9 * VDD);
    assert_eq!(nrc_check(&metrics(0.9 * VDD, 3e-9), &nrc), Verdict::Fail);
    assert_eq!(nrc_check(&metrics(0.05, 1e-9), &nrc), Verdict::Pass);
}

#[test]
fn reruns_are_bit_identical() {
    let rc = one_aggressor();
    let csv = |w: &Waveform| {
        let mut out = Vec::new();
        w.write_csv(&mut out).unwrap();
        out
    };
    let a = simulate_combined(&rc.spec, &rc.sim).unwrap();
    let b = simulate_combined(&rc.spec, &rc.sim).unwrap();
    assert_eq!(csv(&a.driving), csv(&b.driving));
    assert_eq!(csv(&a.far), csv(&b.far));
    let s1 = simulate_superposition(&rc.spec, &rc.sim).unwrap().total;
    let s2 = simulate_superposition(&rc.spec, &rc.sim).unwrap().total;
    assert_eq!(csv(&s1), csv(&s2));
}

#[test]
fn invalid_specs_are_rejected() {
    let base = one_aggressor().spec.clone();
    let mut s = base.clone();
    s.victim.v_out_q = 5.0;
    assert!(matches!(assemble_macromodel(&s), Err(ClusterError::Invalid(_))));
    let mut s = base.clone();
    s.aggressors[0].offset_s = f64::NAN;
    assert!(matches!(assemble_macromodel(&s), Err(ClusterError::Invalid(_))));
    let mut s = base.clone();
    s.aggressors[0].net = "v".into();
    assert!(matches!(assemble_macromodel(&s), Err(ClusterError::Invalid(_))));
    let mut s = base.clone();
    s.aggressors[0].net = "nowhere".into();
    assert!(matches!(assemble_macromodel(&s), Err(ClusterError::Invalid(_))));
    let mut s = base;
    s.victim.input_noise = SourceSpec::SaturatedRamp(SaturatedRamp {
        t0_s: 0.0,
        slew_s: -1.0,
        v_start: 0.0,
        v_end: 1.0,
    });
    assert!(matches!(assemble_macromodel(&s), Err(ClusterError::Invalid(_))));
}

#[test]
fn oracle_follows_the_macromodel_timing() {
    let rc = two_aggressors();
    let mut spec = rc.spec.clone();
    spec.aggressors[1].offset_s = 123e-12;
    spec.victim.input_noise = spec.victim.input_noise.shifted(40e-12);
    let o = rc.oracle.with_timing_of(&spec).unwrap();
    assert_eq!(o.aggressors[1].offset_s, 123e-12);
    assert_eq!(o.aggressors[0].offset_s, 0.0);
    assert_eq!(o.victim.input_noise, spec.victim.input_noise);
    let c = build_oracle(&o).unwrap();
    assert_eq!(
        c.elements()
            .iter()
            .filter(|e| matches!(e.kind, ElementKind::Mosfet { .. }))
            .count(),
        4 + 2 + 2
    );
}

#[test]
fn oracle_quiet_cluster_stays_put() {
    let rc = one_aggressor();
    let mut o = rc.oracle.clone();
    o.victim.input_noise = SourceSpec::Dc { volts: VDD };
    o.aggressors[0].input = SourceSpec::Dc { volts: VDD };
    let p = simulate_oracle(&o, &SimOptions::new(500e-12)).unwrap();
    assert!(p.driving.peak_abs().1.abs() < 1e-9);
    assert_eq!(noise_metrics(&p.driving, 0.0).peak_v, p.driving.peak_abs().1.abs());
}
