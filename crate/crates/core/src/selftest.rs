//! Fixed-seed consistency suites behind `krylovkn selftest`.

use crate::linalg::{BlockTridiagonal, DenseBlock};
use crate::quadrature::{eval_cf, eval_gauss, eval_kn, eval_radau, moments, operator_moments, KNParams, Terminator};
use crate::stieltjes::{extract, pencil_dense, reconstruct, StieltjesError, StieltjesParams};
use crate::sweep::decompose;
use crate::synthetic::{random_block_tridiagonal, random_shifts, random_symmetric_operator};
use crate::lanczos::LanczosOptions;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;

pub type Extractor = fn(&BlockTridiagonal) -> Result<StieltjesParams, StieltjesError>;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub checks: usize,
    /// Largest violation measure seen (relative error or negative slack).
    pub worst: f64,
    pub tol: f64,
    pub error: Option<String>,
}

impl SuiteOutcome {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.worst <= self.tol
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelftestReport {
    pub suites: Vec<SuiteOutcome>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteOutcome::passed)
    }

    pub fn first_failure(&self) -> Option<&SuiteOutcome> {
        self.suites.iter().find(|s| !s.passed())
    }

    /// Plain-text report; contains no timings, so equal runs render identically.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            let status = if s.passed() { "PASS" } else { "FAIL" };
            let _ = write!(out, "{status} {:<12} checks={:<5} worst={:.3e} tol={:.1e}", s.name, s.checks, s.worst, s.tol);
            if let Some(e) = &s.error {
                let _ = write!(out, " error={e}");
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "{}",
            match self.first_failure() {
                None => "selftest passed".to_string(),
                Some(f) => format!("selftest failed: {}", f.name),
            }
        );
        out
    }
}

fn rel(a: &DenseBlock<Complex64>, b: &DenseBlock<Complex64>) -> f64 {
    (a - b).frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

struct Tally {
    checks: usize,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Self { checks: 0, worst: 0.0 }
    }

    fn record(&mut self, v: f64) {
        self.checks += 1;
        // NaN must count as a failure
        if !(v <= self.worst) {
            self.worst = if v.is_nan() { f64::INFINITY } else { v };
        }
    }

    fn finish(self, name: &'static str, tol: f64, res: Result<(), String>) -> SuiteOutcome {
        SuiteOutcome {
            name,
            checks: self.checks,
            worst: self.worst,
            tol,
            error: res.err(),
        }
    }
}

fn random_kn(rng: &mut ChaCha8Rng, p: usize) -> KNParams {
    KNParams::scalar(p, 10f64.powf(rng.gen_range(-2.0..2.0)), 10f64.powf(rng.gen_range(-2.0..1.0)))
}

/// Modified-last-block evaluation against the continued fraction, for Gauß,
/// Gauß-Radau and Kreĭn-Nudelman.
fn cross_method(extractor: Extractor) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut tally = Tally::new();
    let res = (|| -> Result<(), String> {
        for k in 0..20 {
            let p = if k % 2 == 0 { 1 } else { 3 };
            let m = rng.gen_range(1..=12);
            let (t, _) = random_block_tridiagonal(&mut rng, m, p);
            let params = extractor(&t).map_err(|e| e.to_string())?;
            let kn = random_kn(&mut rng, p);
            for s in random_shifts(&mut rng, 10) {
                let g = eval_gauss(&t, s).map_err(|e| e.to_string())?;
                tally.record(rel(&g, &eval_cf(&params, s, &Terminator::GaussZero).map_err(|e| e.to_string())?));
                let r = eval_radau(&t, &params, s).map_err(|e| e.to_string())?;
                tally.record(rel(&r, &eval_cf(&params, s, &Terminator::RadauLimit).map_err(|e| e.to_string())?));
                let q = eval_kn(&t, &params, s, &kn).map_err(|e| e.to_string())?;
                let c = eval_cf(&params, s, &Terminator::KreinNudelman(kn.clone())).map_err(|e| e.to_string())?;
                tally.record(rel(&q, &c));
            }
        }
        Ok(())
    })();
    tally.finish("cross-method", 1e-10, res)
}

/// `gauss <= kn <= radau` at real positive shifts (p = 1); records the negative slack.
fn sandwich(extractor: Extractor) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut tally = Tally::new();
    let res = (|| -> Result<(), String> {
        for _ in 0..20 {
            let m = rng.gen_range(1..=15);
            let (t, _) = random_block_tridiagonal(&mut rng, m, 1);
            let params = extractor(&t).map_err(|e| e.to_string())?;
            let kn = random_kn(&mut rng, 1);
            for _ in 0..10 {
                let s = Complex64::new(10f64.powf(rng.gen_range(-3.0..2.0)), 0.0);
                let g = eval_gauss(&t, s).map_err(|e| e.to_string())?[(0, 0)].re;
                let k = eval_kn(&t, &params, s, &kn).map_err(|e| e.to_string())?[(0, 0)].re;
                let r = eval_radau(&t, &params, s).map_err(|e| e.to_string())?[(0, 0)].re;
                let scale = r.abs();
                tally.record(((g - k) / scale).max(0.0));
                tally.record(((k - r) / scale).max(0.0));
            }
        }
        Ok(())
    })();
    tally.finish("sandwich", 1e-10, res)
}

/// `reconstruct(extract(T)) == T` and the dense pencil identity.
fn round_trip(extractor: Extractor) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut tally = Tally::new();
    let res = (|| -> Result<(), String> {
        for k in 0..30 {
            let p = 1 + k % 3;
            let m = rng.gen_range(1..=15);
            let (t, _) = random_block_tridiagonal(&mut rng, m, p);
            let params = extractor(&t).map_err(|e| e.to_string())?;
            let back = reconstruct(&params).map_err(|e| e.to_string())?;
            let dense = t.to_dense();
            let norm = dense.frobenius_norm();
            tally.record((&back.to_dense() - &dense).frobenius_norm() / norm);
            tally.record((&pencil_dense(&params) - &dense).frobenius_norm() / norm);
        }
        Ok(())
    })();
    tally.finish("round-trip", 1e-11, res)
}

/// The first `2m` moments of `T_m` equal those of `(A, B)`.
fn moment() -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut tally = Tally::new();
    let res = (|| -> Result<(), String> {
        for k in 0..10 {
            let p = 1 + k % 2;
            let n = rng.gen_range(20..=40);
            let m = rng.gen_range(1..=4);
            let (op, b) = random_symmetric_operator(&mut rng, n, p, 0.05, 1.0);
            let dec = decompose(&op, &b, m, &LanczosOptions::default()).map_err(|e| e.to_string())?;
            let mt = moments(&dec.tridiag, 2 * dec.m());
            let ma = operator_moments(&op, &b, 2 * dec.m());
            for (x, y) in mt.iter().zip(&ma) {
                tally.record((x - y).frobenius_norm() / y.frobenius_norm());
            }
        }
        Ok(())
    })();
    tally.finish("moment", 1e-8, res)
}

/// Runs every suite with the library's extraction routine.
pub fn run_selftest() -> SelftestReport {
    run_selftest_with(extract)
}

/// Runs every suite with a substitute extraction routine (mutation testing).
pub fn run_selftest_with(extractor: Extractor) -> SelftestReport {
    SelftestReport {
        suites: vec![cross_method(extractor), sandwich(extractor), round_trip(extractor), moment()],
    }
}
