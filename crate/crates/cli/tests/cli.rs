use krylovkn::problems::build_halfline_1d;
use krylovkn::reference::{reference_transfer, ReferenceOptions};
use num_complex::Complex64;
use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn krylovkn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_krylovkn")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Row {
    m: usize,
    rule: String,
    s: Complex64,
    value: Complex64,
    error: Option<f64>,
}

fn parse_csv(text: &str) -> Vec<Row> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().expect("header").split(',').collect();
    let col: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (*h, i)).collect();
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let x = |name: &str| f[col[name]].parse::<f64>().unwrap();
            Row {
                m: f[col["m"]].parse().unwrap(),
                rule: f[col["rule"]].to_string(),
                s: Complex64::new(x("re_s"), x("im_s")),
                value: Complex64::new(x("value_re_1_1"), x("value_im_1_1")),
                error: f[col["error"]].parse().ok(),
            }
        })
        .collect()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn gen_halfline_writes_tridiagonal_market_file() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = krylovkn(&["gen", "--problem", "halfline", "--n", "20000", "--out", out]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("n=20000") && s.contains("nnz=59998") && s.contains("p=1"), "{s}");
    let a = fs::read_to_string(dir.path().join("A.mtx")).unwrap();
    let mut lines = a.lines();
    assert_eq!(lines.next().unwrap(), "%%MatrixMarket matrix coordinate real symmetric");
    assert_eq!(lines.next().unwrap(), "20000 20000 39999");
    assert!(dir.path().join("B.mtx").exists() && dir.path().join("meta.kv").exists());
}

#[test]
fn gen_diffusion_grid_size() {
    let dir = TempDir::new().unwrap();
    let o = krylovkn(&["gen", "--problem", "diffusion2d", "--nx", "120", "--ny", "120", "--nopt", "10", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("n=19600 "), "{}", stdout(&o));
}

#[test]
fn gen_without_problem_exits_2_with_usage() {
    let o = krylovkn(&["gen", "--n", "10"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("--problem") && err.contains("Usage: krylovkn gen"), "{err}");
}

#[test]
fn bad_values_are_configuration_errors() {
    for args in [
        &["sweep", "--problem", "halfline", "--n", "50", "--m", "x", "--shifts", "1"][..],
        &["sweep", "--problem", "halfline", "--n", "50", "--m", "5"][..],
        &["sweep", "--problem", "halfline", "--n", "50", "--m", "5", "--shifts", "1", "--rules", "simpson"][..],
        &["gen", "--problem", "halfline", "--config", "/nonexistent/krylovkn.kv"][..],
    ] {
        assert_eq!(krylovkn(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn gauss_error_column_is_distance_to_direct_solve() {
    let o = krylovkn(&["run", "--problem", "halfline", "--n", "20000", "--m", "100", "--stride", "100", "--rules", "gauss", "--shifts", "1e-2", "--reference", "on"]);
    assert!(o.status.success());
    let rows = parse_csv(&stdout(&o));
    assert_eq!(rows.len(), 1);
    let p = build_halfline_1d(20000).unwrap();
    let s = Complex64::new(1e-2, 0.0);
    let r = reference_transfer(&p.operator, &p.rhs, s, &ReferenceOptions::default()).unwrap();
    let want = (rows[0].value - r.value[(0, 0)]).norm();
    let got = rows[0].error.unwrap();
    assert!((got - want).abs() <= 1e-12 * want.max(1e-300) + 1e-16, "{got} vs {want}");
}

#[test]
fn gauss_and_radau_rows_bracket_the_reference() {
    let o = krylovkn(&["run", "--problem", "halfline", "--n", "3000", "--m", "40", "--stride", "10", "--rules", "gauss,radau", "--sweep", "1e-3:1:6:real", "--reference", "on"]);
    assert!(o.status.success());
    let rows = parse_csv(&stdout(&o));
    assert_eq!(rows.len(), 4 * 2 * 6);
    let p = build_halfline_1d(3000).unwrap();
    let mut checked = 0;
    for pair in rows.chunks(12) {
        let (g, r) = pair.split_at(6);
        for (g, r) in g.iter().zip(r) {
            assert_eq!((g.rule.as_str(), r.rule.as_str(), g.m, g.s), ("gauss", "radau", r.m, r.s));
            let exact = reference_transfer(&p.operator, &p.rhs, g.s, &ReferenceOptions::default()).unwrap().value[(0, 0)].re;
            let tol = 1e-12 * exact.abs();
            assert!(g.value.re <= exact + tol && exact <= r.value.re + tol, "m={} s={}: {} {} {}", g.m, g.s, g.value.re, exact, r.value.re);
            checked += 1;
        }
    }
    assert_eq!(checked, 24);
}

#[test]
fn one_step_toy_matches_hand_values() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "A.mtx", "%%MatrixMarket matrix coordinate real symmetric\n2 2 3\n1 1 2\n2 1 1\n2 2 2\n");
    let b = write(dir.path(), "B.mtx", "%%MatrixMarket matrix array real general\n2 1\n1\n0\n");
    let o = krylovkn(&["sweep", "--matrix", &a, "--rhs", &b, "--m", "1", "--rules", "gauss,radau,avg", "--shifts", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = parse_csv(&stdout(&o));
    let want = [("gauss", 1.0 / 3.0), ("radau", 1.0), ("avg", 2.0 / 3.0)];
    for (row, (rule, v)) in rows.iter().zip(want) {
        assert_eq!(row.rule, rule);
        assert!((row.value.re - v).abs() < 1e-14 && row.value.im == 0.0, "{rule}: {}", row.value);
    }
}

#[test]
fn imaginary_sweep_row_count() {
    let o = krylovkn(&["sweep", "--problem", "halfline", "--n", "500", "--m", "20", "--rules", "gauss,radau,avg", "--sweep", "1e-3:10:30:imag"]);
    assert!(o.status.success());
    let rows = parse_csv(&stdout(&o));
    assert_eq!(rows.len(), 30 * 3);
    assert!(rows.iter().all(|r| r.s.re == 0.0 && r.s.im > 0.0 && r.m == 20 && r.error.is_none()));
}

#[test]
fn invariant_subspace_sweep_is_exact_for_every_rule() {
    let dir = TempDir::new().unwrap();
    let mut a = String::from("%%MatrixMarket matrix coordinate real symmetric\n10 10 10\n");
    let mut b = String::from("%%MatrixMarket matrix array real general\n10 1\n");
    for k in 1..=10 {
        a.push_str(&format!("{k} {k} {}\n", k as f64));
        b.push_str(&format!("{:.17e}\n", 1.0 / 10f64.sqrt()));
    }
    let (a, b) = (write(dir.path(), "A.mtx", &a), write(dir.path(), "B.mtx", &b));
    let o = krylovkn(&["sweep", "--matrix", &a, "--rhs", &b, "--m", "10", "--sweep", "1e-2:1e2:9:real", "--sweep", "1e-2:1e2:9:imag", "--reference", "on"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = parse_csv(&stdout(&o));
    assert_eq!(rows.len(), 5 * 18);
    for r in &rows {
        let e = r.error.unwrap();
        assert!(e < 1e-14, "{} at {}: {e}", r.rule, r.s);
    }
}

#[test]
fn spectral_rule_beats_average_on_halfline_before_convergence() {
    let o = krylovkn(&["sweep", "--problem", "halfline", "--n", "20000", "--m", "100", "--rules", "avg,kn-spectral", "--sweep", "1e-4:1e-1:7:real", "--sweep", "1e-4:1e-1:7:imag", "--reference", "on"]);
    assert!(o.status.success());
    let rows = parse_csv(&stdout(&o));
    let (avg, kn) = rows.split_at(14);
    let mut compared = 0;
    for (a, k) in avg.iter().zip(kn) {
        assert_eq!((a.rule.as_str(), k.rule.as_str(), a.s), ("avg", "kn-spectral", k.s));
        let (ea, ek) = (a.error.unwrap(), k.error.unwrap());
        assert!(ea.is_finite() && ea >= 0.0 && ek.is_finite() && ek >= 0.0);
        if ea > 1e-12 {
            assert!(ek <= ea, "s={}: kn {ek:e} > avg {ea:e}", a.s);
            compared += 1;
        }
    }
    assert!(compared >= 8, "only {compared} shifts before convergence");
}

#[test]
fn csv_is_byte_identical_without_timing() {
    let args = ["run", "--problem", "diffusion2d", "--nx", "20", "--ny", "20", "--nopt", "4", "--m", "20", "--stride", "10", "--sweep", "1e-3:1:5:imag", "--timing", "off", "--seed", "3"];
    let (a, b) = (krylovkn(&args), krylovkn(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(parse_csv(&stdout(&a)).len(), 2 * 5 * 5);
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.kv", "# study\nproblem = halfline\nn = 400\nm = 5\nrules = gauss\nshifts = 0.5\n");
    let out = dir.path().join("out.csv");
    let o = krylovkn(&["run", "--config", &cfg, "--m", "7", "--stride", "7", "--output", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = parse_csv(&fs::read_to_string(out).unwrap());
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].m, rows[0].rule.as_str()), (7, "gauss"));
}

#[test]
fn runtime_failure_exits_1_and_keeps_header() {
    // the damping term needs sqrt(s), which has no principal value on the negative real axis
    let o = krylovkn(&["sweep", "--problem", "halfline", "--n", "200", "--m", "10", "--rules", "gauss,kn-spectral", "--shifts", "-0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("m,rule,re_s,im_s,"));
}

#[test]
fn selftest_passes_and_is_deterministic() {
    let (a, b) = (krylovkn(&["selftest"]), krylovkn(&["selftest"]));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).ends_with("selftest passed\n"));
}

#[test]
fn thread_count_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_krylovkn")).args(["selftest"]).env("KRYLOVKN_THREADS", "2").output().unwrap();
    assert!(o.status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_krylovkn")).args(["selftest"]).env("KRYLOVKN_THREADS", "zero").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
