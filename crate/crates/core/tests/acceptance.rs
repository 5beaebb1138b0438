//! Acceptance criteria AC-1 .. AC-9.
//!
//! Each criterion prints one `AC-k PASS|FAIL` line with its measured quantities
//! and wall time. The criteria run one at a time so the runtime budgets are
//! measured without competing for cores.

use krylovkn::knselect::{nelder_mead, omega_support_d, NelderMeadOptions, OmegaObjective, SelectionConfig, GAUSS_LIMIT_PHI, RADAU_PROXY};
use krylovkn::lanczos::LanczosOptions;
use krylovkn::linalg::DenseBlock;
use krylovkn::problems::{
    build_diffusion_2d, build_halfline_1d, build_maxwell_yee_3d, GridSpec, LoopSource, ProblemInstance, SigmaField,
    YeeGrid,
};
use krylovkn::quadrature::{
    eval_averaged, eval_cf, eval_gauss, eval_kn, eval_radau, moments, operator_moments, KNParams, Rule, Terminator,
};
use krylovkn::reference::{reference_transfer, reference_transfer_many, ReferenceOptions};
use krylovkn::stieltjes::{extract, pencil_dense, reconstruct};
use krylovkn::sweep::{decompose, log_shifts, Checkpoint};
use krylovkn::synthetic::{random_block_tridiagonal, random_shifts, random_symmetric_operator};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

// Tolerances and budgets, one per criterion.
const AC1_REL: f64 = 1e-10;
const AC1_BUDGET: Duration = Duration::from_secs(10);
const AC2_REL: f64 = 1e-11;
const AC2_BUDGET: Duration = Duration::from_secs(5);
const AC3_MATCH_REL: f64 = 1e-8;
const AC3_MISMATCH_REL: f64 = 1e-3;
const AC3_MIN_MISMATCHED: usize = 18;
const AC3_BUDGET: Duration = Duration::from_secs(5);
const AC4_SLACK: f64 = -1e-10;
const AC4_BUDGET: Duration = Duration::from_secs(120);
const AC5_BUDGET: Duration = Duration::from_secs(10);
const AC6_KN_FACTOR: f64 = 0.5;
const AC6_BUDGET: Duration = Duration::from_secs(120);
const AC7_UNCONVERGED: f64 = 1e-9;
const AC7_MIN_SHARE: f64 = 0.8;
const AC7_BUDGET: Duration = Duration::from_secs(15 * 60);
const AC8_ROSENBROCK: f64 = 1e-3;
const AC8_BUDGET: Duration = Duration::from_secs(60);
const AC9_NULL: f64 = 1e-12;
const AC9_BUDGET: Duration = Duration::from_secs(180);

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(name: &str, ok: bool, elapsed: Duration, budget: Duration, detail: &str) -> bool {
    let in_time = elapsed <= budget;
    let pass = ok && in_time;
    println!(
        "{name} {} {detail} [{:.1}s of {:.0}s{}]",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64(),
        if in_time { "" } else { ", over budget" }
    );
    pass
}

fn rel(a: &DenseBlock<Complex64>, b: &DenseBlock<Complex64>) -> f64 {
    (a - b).frobenius_norm() / b.frobenius_norm()
}

fn re(b: &DenseBlock<Complex64>) -> f64 {
    b[(0, 0)].re
}

#[test]
fn ac1_cross_method_equivalence() {
    let _g = serial();
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for k in 0..50 {
        let p = if k % 2 == 0 { 1 } else { 3 };
        let m = rng.gen_range(1..=25);
        let (t, _) = random_block_tridiagonal(&mut rng, m, p);
        let params = extract(&t).unwrap();
        let kn = KNParams::scalar(p, 10f64.powf(rng.gen_range(-2.0..2.0)), 10f64.powf(rng.gen_range(-2.0..1.0)));
        for s in random_shifts(&mut rng, 20) {
            let pairs = [
                (eval_gauss(&t, s).unwrap(), eval_cf(&params, s, &Terminator::GaussZero).unwrap()),
                (eval_radau(&t, &params, s).unwrap(), eval_cf(&params, s, &Terminator::RadauLimit).unwrap()),
                (eval_kn(&t, &params, s, &kn).unwrap(), eval_cf(&params, s, &Terminator::KreinNudelman(kn.clone())).unwrap()),
            ];
            for (a, b) in &pairs {
                worst = worst.max(rel(a, b));
            }
        }
    }
    let ok = worst <= AC1_REL;
    let detail = format!("50 tridiagonals x 20 shifts x 3 rules, worst rel diff {worst:.2e} (tol {AC1_REL:e})");
    assert!(verdict("AC-1", ok, t0.elapsed(), AC1_BUDGET, &detail));
}

#[test]
fn ac2_round_trip() {
    let _g = serial();
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst_rt, mut worst_pencil): (f64, f64) = (0.0, 0.0);
    for k in 0..100 {
        let p = 1 + k % 3;
        let m = rng.gen_range(1..=25);
        let (t, _) = random_block_tridiagonal(&mut rng, m, p);
        let dense = t.to_dense();
        let norm = dense.frobenius_norm();
        let params = extract(&t).unwrap();
        let back = reconstruct(&params).unwrap();
        worst_rt = worst_rt.max((&back.to_dense() - &dense).frobenius_norm() / norm);
        worst_pencil = worst_pencil.max((&pencil_dense(&params) - &dense).frobenius_norm() / norm);
    }
    let ok = worst_rt <= AC2_REL && worst_pencil <= AC2_REL;
    let detail = format!("100 instances, reconstruct {worst_rt:.2e}, pencil {worst_pencil:.2e} (tol {AC2_REL:e})");
    assert!(verdict("AC-2", ok, t0.elapsed(), AC2_BUDGET, &detail));
}

#[test]
fn ac3_moment_matching() {
    let _g = serial();
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut mismatched = 0;
    for k in 0..20 {
        let p = 1 + k % 2;
        let n = rng.gen_range(30..=50);
        let m = rng.gen_range(1..=6);
        // spectrum in [-1, 1], so ||A|| <= 1
        let (op, b) = random_symmetric_operator(&mut rng, n, p, -1.0, 1.0);
        let dec = decompose(&op, &b, m, &LanczosOptions::default()).unwrap();
        assert_eq!(dec.m(), m);
        let mt = moments(&dec.tridiag, 2 * m + 1);
        let ma = operator_moments(&op, &b, 2 * m + 1);
        let r = |i: usize| (&mt[i] - &ma[i]).frobenius_norm() / ma[i].frobenius_norm();
        for i in 0..2 * m {
            worst = worst.max(r(i));
        }
        if r(2 * m) > AC3_MISMATCH_REL {
            mismatched += 1;
        }
    }
    let ok = worst <= AC3_MATCH_REL && mismatched >= AC3_MIN_MISMATCHED;
    let detail = format!(
        "moments 1..2m worst {worst:.2e} (tol {AC3_MATCH_REL:e}); moment 2m+1 off by >{AC3_MISMATCH_REL:e} on {mismatched}/20 (need {AC3_MIN_MISMATCHED})"
    );
    assert!(verdict("AC-3", ok, t0.elapsed(), AC3_BUDGET, &detail));
}

/// Relative slack of the bound chain at one shift; the minimum over all links.
fn chain_slack(cps: &[Checkpoint; 2], s: Complex64, reference: f64) -> (f64, f64) {
    let [a, b] = cps;
    let scale = reference.abs();
    let g0 = re(&eval_gauss(&a.tridiag, s).unwrap());
    let g1 = re(&eval_gauss(&b.tridiag, s).unwrap());
    let r0 = re(&eval_radau(&a.tridiag, &a.params, s).unwrap());
    let r1 = re(&eval_radau(&b.tridiag, &b.params, s).unwrap());
    let k0 = re(&a.eval(Rule::KnSpectral, s).unwrap());
    let kn_slack = ((k0 - g0).min(r0 - k0)) / scale;
    let links = [g1 - g0, reference - g1, r1 - reference, r0 - r1];
    let chain = links.iter().copied().fold(f64::INFINITY, f64::min) / scale;
    (kn_slack, chain)
}

fn checkpoints_at(p: &ProblemInstance, ms: &[usize]) -> Vec<[Checkpoint; 2]> {
    let top = ms.iter().max().unwrap() + 1;
    let dec = decompose(&p.operator, &p.rhs, top, &LanczosOptions::default()).unwrap();
    assert_eq!(dec.m(), top);
    ms.iter()
        .map(|&m| {
            let mut a = Checkpoint::from_decomposition(&dec, m).unwrap();
            a.select(&[Rule::KnSpectral], &SelectionConfig::default()).unwrap();
            let b = Checkpoint::from_decomposition(&dec, m + 1).unwrap();
            [a, b]
        })
        .collect()
}

fn bound_chain(name: &str, p: &ProblemInstance, shifts: &[Complex64], ms: &[usize]) -> (f64, f64, String) {
    let refs = reference_transfer_many(&p.operator, &p.rhs, shifts, &ReferenceOptions::default()).unwrap();
    let (mut kn_min, mut chain_min) = (f64::INFINITY, f64::INFINITY);
    for cps in checkpoints_at(p, ms) {
        for (s, r) in shifts.iter().zip(&refs) {
            let (k, c) = chain_slack(&cps, *s, re(&r.value));
            kn_min = kn_min.min(k);
            chain_min = chain_min.min(c);
        }
    }
    let detail = format!("{name}: min slack kn-sandwich {kn_min:.2e}, gauss/radau chain {chain_min:.2e}");
    (kn_min, chain_min, detail)
}

fn diffusion_sigma() -> SigmaField {
    // illustrative layered medium with a resistive and a conductive inclusion
    "1;-1000:1000,20:1000=0.5;10:30,30:45=0.05;35:50,10:25=4".parse().unwrap()
}

#[test]
fn ac4_two_sided_bounds() {
    let _g = serial();
    let t0 = Instant::now();
    let shifts = log_shifts(1e-3, 10.0, 20, false);
    let ms = [10, 25, 50];
    let half = build_halfline_1d(5000).unwrap();
    let (k1, c1, d1) = bound_chain("halfline n=5000", &half, &shifts, &ms);
    let spec = GridSpec::new(vec![60, 60], 10);
    let diff = build_diffusion_2d(&spec, &diffusion_sigma(), &[[30, 30]]).unwrap();
    let (k2, c2, d2) = bound_chain("diffusion 60x60+10", &diff, &shifts, &ms);
    let ok = [k1, c1, k2, c2].iter().all(|&v| v >= AC4_SLACK);
    let detail = format!("{d1}; {d2} (floor {AC4_SLACK:e})");
    assert!(verdict("AC-4", ok, t0.elapsed(), AC4_BUDGET, &detail));
}

#[test]
fn ac5_stieltjes_sign_and_monotonicity() {
    let _g = serial();
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sign_fail = 0;
    let mut ladder_fail = 0;
    let mut shifts_checked = 0;
    for _ in 0..10 {
        let m = rng.gen_range(2..=20);
        let (t, params) = random_block_tridiagonal(&mut rng, m, 1);
        let kn = KNParams::scalar(1, 10f64.powf(rng.gen_range(-2.0..2.0)), 10f64.powf(rng.gen_range(-2.0..1.0)));
        for _ in 0..10 {
            let r = 10f64.powf(rng.gen_range(-2.0..2.0));
            let mut theta = rng.gen_range(0.05..0.95) * std::f64::consts::PI;
            if rng.gen_bool(0.5) {
                theta = -theta;
            }
            let s = Complex64::from_polar(r, theta);
            let f = eval_kn(&t, &params, s, &kn).unwrap()[(0, 0)];
            shifts_checked += 1;
            if f.im.signum() != -s.im.signum() || f.im == 0.0 {
                sign_fail += 1;
            }
        }
        // short strings at small shifts, so the terminator moves the value well above roundoff
        let short = rng.gen_range(1..=4);
        let (t, params) = random_block_tridiagonal(&mut rng, short, 1);
        let s = Complex64::new(10f64.powf(rng.gen_range(-2.0..0.0)), 0.0);
        let (phi, varphi) = kn.scalars();
        let f_at = |a: f64, b: f64| re(&eval_kn(&t, &params, s, &KNParams::scalar(1, a, b)).unwrap());
        let by_phi = [f_at(phi / 4.0, varphi), f_at(phi, varphi), f_at(4.0 * phi, varphi)];
        let by_varphi = [f_at(phi, varphi / 4.0), f_at(phi, varphi), f_at(phi, 4.0 * varphi)];
        for l in [by_phi, by_varphi] {
            if !(l[0] > l[1] && l[1] > l[2]) {
                ladder_fail += 1;
            }
        }
    }
    let ok = sign_fail == 0 && ladder_fail == 0 && shifts_checked == 100;
    let detail = format!("sign violations {sign_fail}/100, non-decreasing ladders {ladder_fail}/20");
    assert!(verdict("AC-5", ok, t0.elapsed(), AC5_BUDGET, &detail));
}

struct DenseRun {
    /// Time spent building the run, charged to the criterion that owns it.
    build: Duration,
    checkpoint: Checkpoint,
    shifts: Vec<Complex64>,
    refs: Vec<DenseBlock<Complex64>>,
}

fn halfline_run() -> &'static DenseRun {
    static RUN: OnceLock<DenseRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let t0 = Instant::now();
        let p = build_halfline_1d(20_000).unwrap();
        let dec = decompose(&p.operator, &p.rhs, 150, &LanczosOptions::default()).unwrap();
        let mut checkpoint = Checkpoint::from_decomposition(&dec, 150).unwrap();
        checkpoint.select(&[Rule::KnSpectral], &SelectionConfig::default()).unwrap();
        let shifts = vec![Complex64::new(1e-2, 0.0), Complex64::new(0.0, 1e-2)];
        let refs = shifts
            .iter()
            .map(|&s| reference_transfer(&p.operator, &p.rhs, s, &ReferenceOptions::default()).unwrap().value)
            .collect();
        DenseRun { build: t0.elapsed(), checkpoint, shifts, refs }
    })
}

fn diffusion_run() -> &'static DenseRun {
    static RUN: OnceLock<DenseRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let t0 = Instant::now();
        let spec = GridSpec::new(vec![120, 120], 10);
        let p = build_diffusion_2d(&spec, &diffusion_sigma(), &[[60, 60]]).unwrap();
        assert_eq!(p.n(), 19_600);
        let dec = decompose(&p.operator, &p.rhs, 200, &LanczosOptions::default()).unwrap();
        let mut checkpoint = Checkpoint::from_decomposition(&dec, 200).unwrap();
        checkpoint.select(&[Rule::KnSpectral], &SelectionConfig::default()).unwrap();
        let mut shifts = log_shifts(1e-5, 1.0, 20, false);
        shifts.extend(log_shifts(1e-5, 1.0, 20, true));
        let refs = reference_transfer_many(&p.operator, &p.rhs, &shifts, &ReferenceOptions::default())
            .unwrap()
            .into_iter()
            .map(|r| r.value)
            .collect();
        DenseRun { build: t0.elapsed(), checkpoint, shifts, refs }
    })
}

/// Relative errors of gauss, avg and kn-spectral at shift `j`.
fn errors(run: &DenseRun, j: usize) -> [f64; 3] {
    let cp = &run.checkpoint;
    let s = run.shifts[j];
    let r = &run.refs[j];
    [
        rel(&eval_gauss(&cp.tridiag, s).unwrap(), r),
        rel(&eval_averaged(&cp.tridiag, &cp.params, s).unwrap(), r),
        rel(&cp.eval(Rule::KnSpectral, s).unwrap(), r),
    ]
}

#[test]
fn ac6_dense_spectrum_acceleration() {
    let _g = serial();
    let run = halfline_run();
    let t0 = Instant::now();
    let (phi, varphi) = run.checkpoint.spectral.as_ref().unwrap().kn.scalars();
    let mut ok = true;
    let mut parts = vec![format!("phi={phi:.4e} varphi={varphi:.4e}")];
    for j in 0..run.shifts.len() {
        let [g, a, k] = errors(run, j);
        let pass = a < g && k <= AC6_KN_FACTOR * a;
        ok &= pass;
        parts.push(format!(
            "s={}: gauss {g:.3e} avg {a:.3e} kn {k:.3e} kn/avg {:.3} [{}]",
            run.shifts[j],
            k / a,
            if pass { "ok" } else { "miss" }
        ));
    }
    let detail = format!("{} (need avg < gauss, kn <= {AC6_KN_FACTOR} avg)", parts.join("; "));
    assert!(verdict("AC-6", ok, run.build + t0.elapsed(), AC6_BUDGET, &detail));
}

#[test]
fn ac7_sweep_shape() {
    let _g = serial();
    let run = diffusion_run();
    let t0 = Instant::now();
    let mut unconverged = 0;
    let mut ordered = 0;
    let mut misses = Vec::new();
    for j in 0..run.shifts.len() {
        let [g, a, k] = errors(run, j);
        if g <= AC7_UNCONVERGED {
            continue;
        }
        unconverged += 1;
        if k <= a && a <= g {
            ordered += 1;
        } else {
            misses.push(format!("{}", run.shifts[j]));
        }
    }
    let share = if unconverged > 0 { ordered as f64 / unconverged as f64 } else { 0.0 };
    let ok = unconverged > 0 && share >= AC7_MIN_SHARE;
    let detail = format!(
        "kn <= avg <= gauss at {ordered}/{unconverged} unconverged shifts ({:.0}%, need {:.0}%); misses at [{}]",
        100.0 * share,
        100.0 * AC7_MIN_SHARE,
        misses.join(", ")
    );
    assert!(verdict("AC-7", ok, run.build + t0.elapsed(), AC7_BUDGET, &detail));
}

fn omega_margins(cp: &Checkpoint) -> (f64, f64, f64) {
    let cfg = SelectionConfig::default();
    let support = omega_support_d(&cp.tridiag, &cp.beta_next, &cfg).unwrap();
    let obj = OmegaObjective::new(&cp.tridiag, &cp.beta_next, &support, &cfg).unwrap();
    let at = |kn: &KNParams| obj.value(&cp.tridiag, &cp.params, kn).unwrap();
    let p = cp.tridiag.p();
    let selected = at(&cp.spectral.as_ref().unwrap().kn);
    let gauss = at(&KNParams::scalar(p, GAUSS_LIMIT_PHI, GAUSS_LIMIT_PHI));
    let radau = at(&KNParams::scalar(p, RADAU_PROXY, RADAU_PROXY));
    (selected, gauss, radau)
}

#[test]
fn ac8_optimizer_sanity() {
    let _g = serial();
    // the two runs are shared with AC-6 and AC-7 and timed there
    let runs = [("AC-6", halfline_run()), ("AC-7", diffusion_run())];
    let t0 = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, run) in runs {
        let (sel, g, r) = omega_margins(&run.checkpoint);
        ok &= sel <= g && sel <= r;
        parts.push(format!("{name} run: omega {sel:.4e} vs gauss-limit {g:.4e}, radau-proxy {r:.4e}"));
    }
    let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
    let nm = nelder_mead(rosen, &[-1.2, 1.0], &NelderMeadOptions { max_iter: 400, ..Default::default() }).unwrap();
    let dist = ((nm.x[0] - 1.0).powi(2) + (nm.x[1] - 1.0).powi(2)).sqrt();
    ok &= dist <= AC8_ROSENBROCK;
    parts.push(format!("rosenbrock distance {dist:.2e} (tol {AC8_ROSENBROCK:e})"));
    assert!(verdict("AC-8", ok, t0.elapsed(), AC8_BUDGET, &parts.join("; ")));
}

fn gradient_residual(p: &ProblemInstance, grid: &YeeGrid, sigma: &SigmaField) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let phi: Vec<f64> = (0..grid.n_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let e = grid.gradient_field(&phi, &grid.edge_mass(sigma, 1.0));
    let mut y = vec![0.0; p.n()];
    p.operator.apply_vec(&e, &mut y);
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    norm(&y) / (p.operator.norm1() * norm(&e))
}

#[test]
fn ac9_maxwell_smoke() {
    let _g = serial();
    let t0 = Instant::now();
    let spec = GridSpec::new(vec![12, 12, 12], 6);
    let sigma = SigmaField::constant(1.0);
    let (p, grid) = build_maxwell_yee_3d(&spec, &sigma, 1.0, &[LoopSource { node: [5, 5, 6], normal: 2 }]).unwrap();
    let null = gradient_residual(&p, &grid, &sigma);
    let s = [Complex64::new(0.05, 0.0)];
    let (k, c, d) = bound_chain(&format!("yee n={}", p.n()), &p, &s, &[60]);
    let ok = k >= AC4_SLACK && c >= AC4_SLACK && null <= AC9_NULL;
    let detail = format!("{d}; |A grad phi| / (|A| |grad phi|) = {null:.2e} (tol {AC9_NULL:e})");
    assert!(verdict("AC-9", ok, t0.elapsed(), AC9_BUDGET, &detail));
}
