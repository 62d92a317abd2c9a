// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/reference")
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snacluster"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records()
        .map(|x| x.unwrap().iter().map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

fn inv() -> String {
    data().join("inv.sp").display().to_string()
}

/// Reference cluster config rewritten with absolute artifact paths and
/// optional replacement lines.
fn reference_config(dir: &Path, edit: impl Fn(&str) -> Option<String>) -> PathBuf {
    let text = fs::read_to_string(data().join("cluster.toml")).unwrap();
    let mut out = String::new();
    for line in text.lines() {
        let line = edit(line).unwrap_or_else(|| line.to_string());
        let mut fixed = line.clone();
        for f in [
            "lines.sp",
            "reduced.csv",
            "nand2.sp",
            "nand2_vccs.csv",
            "inv.sp",
            "inv_thevenin.csv",
            "inv_nrc.csv",
        ] {
            fixed = fixed.replace(&format!("\"{f}\""), &format!("\"{}\"", data().join(f).display()));
        }
        writeln!(out, "{fixed}").unwrap();
    }
    let p = dir.join("cluster.toml");
    fs::write(&p, out).unwrap();
    p
}

#[test]
fn vccs_table_has_grid_squared_rows() {
    let d = TempDir::new().unwrap();
    let o = run(
        d.path(),
        &[
            "characterize",
            "vccs",
            "--cell",
            &inv(),
            "--in",
            "a",
            "--out",
            "y",
            "--vdd",
            "1.2",
            "--grid",
            "25",
            "-o",
            "t.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(d.path().join("t.csv")).unwrap();
    assert_eq!(text.lines().count(), 626);
}

#[test]
fn nrc_rows_are_non_increasing() {
    let d = TempDir::new().unwrap();
    let o = run(
        d.path(),
        &[
            "characterize",
            "nrc",
            "--cell",
            &inv(),
            "--in",
            "a",
            "--out",
            "y",
            "--vdd",
            "1.2",
            "--widths",
            "50p,100p,200p,400p",
            "-o",
            "n.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = rows(&d.path().join("n.csv"));
    assert_eq!(r.len(), 4);
    let amps: Vec<f64> = r.iter().map(|x| num(&x[1])).collect();
    assert!(amps.windows(2).all(|w| w[1] <= w[0]), "{amps:?}");
}

#[test]
fn missing_end_reports_line() {
    let d = TempDir::new().unwrap();
    fs::write(d.path().join("n.sp"), "R1 a_0 a_1 10\nC1 a_1 0 5f\n").unwrap();
    let o = run(
        d.path(),
        &["reduce", "--netlist", "n.sp", "--net", "a=a_0", "-o", "r.csv"],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!d.path().join("r.csv").exists());
}

#[test]
fn decoupled_nets_have_no_coupling_rows() {
    let d = TempDir::new().unwrap();
    fs::write(
        d.path().join("n.sp"),
        "Ra a_0 a_1 10\nCa a_1 0 5f\nRb b_0 b_1 20\nCb b_1 0 3f\n.end\n",
    )
    .unwrap();
    let o = run(
        d.path(),
        &[
            "reduce",
            "--netlist",
            "n.sp",
            "--net",
            "a=a_0",
            "--net",
            "b=b_0",
            "-o",
            "r.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = rows(&d.path().join("r.csv"));
    assert_eq!(r.len(), 2);
    assert!(r.iter().all(|x| x[0] != "coupling"));
}

#[test]
fn ladder_keeps_total_capacitance() {
    let d = TempDir::new().unwrap();
    let mut n = String::new();
    for k in 1..=10 {
        writeln!(n, "R{k} a_{} a_{k} 10\nC{k} a_{k} 0 5f", k - 1).unwrap();
    }
    n.push_str(".end\n");
    fs::write(d.path().join("n.sp"), n).unwrap();
    let o = run(
        d.path(),
        &["reduce", "--netlist", "n.sp", "--net", "a=a_0", "-o", "r.csv"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = rows(&d.path().join("r.csv"));
    let total = num(&r[0][1]) + num(&r[0][3]);
    assert!((total - 50e-15).abs() < 1e-9 * 50e-15, "{total:e}");
}

#[test]
fn non_rc_element_is_named() {
    let d = TempDir::new().unwrap();
    fs::write(d.path().join("n.sp"), "R1 a_0 a_1 10\nC1 a_1 0 5f\nV9 a_1 0 1\n.end\n").unwrap();
    let o = run(
        d.path(),
        &["reduce", "--netlist", "n.sp", "--net", "a=a_0", "-o", "r.csv"],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("V9"), "{}", stderr(&o));
}

fn quiet_config(dir: &Path) -> PathBuf {
    fs::write(dir.join("line.sp"), "R1 v_0 v_1 50\nC1 v_1 0 25f\n.end\n").unwrap();
    let cfg = format!(
        r#"vdd = 1.2
[interconnect]
netlist = "line.sp"
[victim]
net = "v"
driving = "v_0"
receiver = "v_1"
cell = "{}"
input = "a"
output = "y"
fixed = {{ vdd = 1.2 }}
grid = 9
v_in_q = 0
receiver_cap = "1f"
[sim]
t_stop = "1n"
"#,
        inv()
    );
    let p = dir.join("quiet.toml");
    fs::write(&p, cfg).unwrap();
    p
}

#[test]
fn quiet_cluster_has_no_noise() {
    let d = TempDir::new().unwrap();
    let cfg = quiet_config(d.path());
    for mode in ["oracle", "macromodel", "superposition"] {
        let o = run(
            d.path(),
            &["analyze", "--config", cfg.to_str().unwrap(), "--mode", mode],
        );
        assert_eq!(code(&o), 0, "{mode}: {}", stderr(&o));
        let r = rows(&d.path().join(format!("report_{mode}.csv")));
        for k in 1..=3 {
            assert!(num(&r[0][k]).abs() < 1e-9, "{mode}: {:?}", r[0]);
        }
        assert_eq!(r[0][4], "none");
    }
}

#[test]
fn analyze_is_reproducible() {
    let d = TempDir::new().unwrap();
    let cfg = reference_config(d.path(), |_| None);
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let o = run(
            d.path(),
            &["analyze", "--config", cfg.to_str().unwrap(), "--mode", "macromodel"],
        );
        let files: Vec<Vec<u8>> = ["victim_macromodel.csv", "report_macromodel.csv"]
            .iter()
            .map(|f| fs::read(d.path().join(f)).unwrap())
            .collect();
        outputs.push((code(&o), files));
    }
    assert_eq!(outputs[0].0, 0);
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn unknown_mode_is_usage_error() {
    let d = TempDir::new().unwrap();
    let cfg = reference_config(d.path(), |_| None);
    let o = run(
        d.path(),
        &["analyze", "--config", cfg.to_str().unwrap(), "--mode", "spice"],
    );
    assert_eq!(code(&o), 2);
    assert!(
        stderr(&o).contains("possible values: oracle, macromodel, superposition"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn compare_table_shape() {
    let d = TempDir::new().unwrap();
    let cfg = reference_config(d.path(), |_| None);
    let o = run(d.path(), &["compare", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = rows(&d.path().join("compare.csv"));
    assert_eq!(r.len(), 2);
    assert_eq!(r[0][0], "peak_v");
    assert_eq!(r[1][0], "area_v_s");
    assert!(num(&r[1][3]) < 0.0, "{:?}", r[1]);
}

fn solve_time(out: &str, mode: &str) -> f64 {
    let line = out
        .lines()
        .find(|l| l.trim_start().starts_with(&format!("{mode}:")))
        .unwrap();
    let s = line.rsplit("solve ").next().unwrap();
    num(s.trim_end_matches(" s"))
}

#[test]
fn macromodel_is_faster_on_long_lines() {
    let d = TempDir::new().unwrap();
    let segs = 50;
    let nets = ["a0", "v", "a1"];
    let mut n = String::new();
    for k in 1..=segs {
        for net in nets {
            writeln!(n, "R{net}_{k} {net}_{} {net}_{k} 1\nC{net}_{k} {net}_{k} 0 0.5f", k - 1).unwrap();
        }
        for pair in nets.windows(2) {
            writeln!(n, "CC{}_{}_{k} {}_{k} {}_{k} 0.5f", pair[0], pair[1], pair[0], pair[1]).unwrap();
        }
    }
    n.push_str(".end\n");
    fs::write(d.path().join("lines.sp"), n).unwrap();
    let agg = |k: usize| {
        format!(
            r#"[aggressor.{k}]
net = "a{k}"
driving = "a{k}_0"
receiver = "a{k}_{segs}"
cell = "{inv}"
input = "a"
output = "y"
fixed = {{ vdd = 1.2 }}
ramp = {{ t0 = "200p", slew = "800p", from = 1.2, to = 0.0 }}
thevenin = "{th}"
receiver_cap = "0.8112f"
"#,
            inv = inv(),
            th = data().join("inv_thevenin.csv").display()
        )
    };
    let cfg = format!(
        r#"vdd = 1.2
[interconnect]
netlist = "lines.sp"
[victim]
net = "v"
driving = "v_0"
receiver = "v_{segs}"
cell = "{nand}"
input = "a"
output = "y"
fixed = {{ vdd = 1.2, b = 1.2 }}
vccs = "{vccs}"
v_in_q = 1.2
receiver_cap = "0.8112f"
glitch = {{ t0 = "200p", width = "300p", peak = 0.72 }}
{a0}{a1}[sim]
t_stop = "4n"
"#,
        nand = data().join("nand2.sp").display(),
        vccs = data().join("nand2_vccs.csv").display(),
        a0 = agg(0),
        a1 = agg(1),
    );
    let p = d.path().join("c.toml");
    fs::write(&p, cfg).unwrap();
    let o = run(d.path(), &["compare", "--config", p.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let (t_oracle, t_macro) = (solve_time(&out, "oracle"), solve_time(&out, "macromodel"));
    assert!(t_macro < t_oracle, "{out}");
}

#[test]
fn shipped_artifacts_regenerate() {
    let d = TempDir::new().unwrap();
    for f in ["inv.sp", "nand2.sp", "lines.sp"] {
        fs::copy(data().join(f), d.path().join(f)).unwrap();
    }
    let cell = |c: &str| {
        ["--cell", c, "--in", "a", "--out", "y", "--vdd", "1.2"]
            .map(String::from)
            .to_vec()
    };
    let cmds: Vec<Vec<String>> = vec![
        [
            vec!["characterize".into(), "vccs".into()],
            cell("nand2.sp"),
            [
                "--side",
                "b",
                "--vin-q",
                "1.2",
                "--vin-noisy",
                "0.72",
                "-o",
                "nand2_vccs.csv",
            ]
            .map(String::from)
            .to_vec(),
        ]
        .concat(),
        [
            vec!["characterize".into(), "thevenin".into()],
            cell("inv.sp"),
            [
                "--load",
                "50.8112f",
                "--t0",
                "200p",
                "--slew",
                "800p",
                "--from",
                "1.2",
                "--to",
                "0",
                "-o",
                "inv_thevenin.csv",
            ]
            .map(String::from)
            .to_vec(),
        ]
        .concat(),
        [
            vec!["characterize".into(), "nrc".into()],
            cell("inv.sp"),
            [
                "--widths",
                "50p,100p,200p,400p,800p,1.6n",
                "--load",
                "2f",
                "-o",
                "inv_nrc.csv",
            ]
            .map(String::from)
            .to_vec(),
        ]
        .concat(),
        [
            "characterize",
            "rcap",
            "--cell",
            "inv.sp",
            "--in",
            "a",
            "-o",
            "inv_rcap.csv",
        ]
        .map(String::from)
        .to_vec(),
        [
            "reduce",
            "--netlist",
            "lines.sp",
            "--net",
            "v=v_0",
            "--net",
            "a0=a0_0",
            "-o",
            "reduced.csv",
        ]
        .map(String::from)
        .to_vec(),
    ];
    for c in &cmds {
        let args: Vec<&str> = c.iter().map(String::as_str).collect();
        let o = run(d.path(), &args);
        assert_eq!(code(&o), 0, "{c:?}: {}", stderr(&o));
        let out = c.iter().skip_while(|a| *a != "-o").nth(1).unwrap();
        let got = fs::read(d.path().join(out)).unwrap();
        assert!(got == fs::read(data().join(out)).unwrap(), "{out} differs");
    }
}

/// Peak reported by the macromodel mode without a curve.
fn reference_peak(dir: &Path) -> f64 {
    let cfg = reference_config(dir, |l| {
        (l.starts_with("[nrc]") || l.starts_with("curve")).then(String::new)
    });
    let o = run(
        dir,
        &["analyze", "--config", cfg.to_str().unwrap(), "--mode", "macromodel"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = rows(&dir.join("report_macromodel.csv"));
    assert_eq!(r[0][4], "none");
    num(&r[0][1])
}

fn flat_curve_verdict(level: f64) -> (i32, String) {
    let d = TempDir::new().unwrap();
    let peak = reference_peak(d.path());
    let curve = d.path().join("flat.csv");
    fs::write(
        &curve,
        format!("width_s,amplitude_v\n1e-12,{0:e}\n1e-8,{0:e}\n", level * peak),
    )
    .unwrap();
    let cfg = reference_config(d.path(), |l| {
        l.starts_with("curve")
            .then(|| format!("curve = \"{}\"", curve.display()))
    });
    let o = run(
        d.path(),
        &["analyze", "--config", cfg.to_str().unwrap(), "--mode", "macromodel"],
    );
    let r = rows(&d.path().join("report_macromodel.csv"));
    (code(&o), r[0][4].clone())
}

#[test]
fn low_curve_fails() {
    assert_eq!(flat_curve_verdict(0.05), (3, "fail".to_string()));
}

#[test]
fn curve_at_peak_is_boundary() {
    assert_eq!(flat_curve_verdict(1.0), (4, "boundary".to_string()));
}

#[test]
fn missing_artifact_is_error() {
    let d = TempDir::new().unwrap();
    let cfg = reference_config(d.path(), |l| {
        l.starts_with("vccs").then(|| "vccs = \"nowhere.csv\"".to_string())
    });
    let o = run(
        d.path(),
        &["analyze", "--config", cfg.to_str().unwrap(), "--mode", "macromodel"],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("nowhere.csv"), "{}", stderr(&o));
}
