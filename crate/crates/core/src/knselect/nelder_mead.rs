//! Derivative-free Nelder–Mead simplex minimizer.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NelderMeadError {
    #[error("objective is not finite at the starting point {x:?}")]
    NonFiniteStart { x: Vec<f64> },
    #[error("objective stayed non-finite for {count} consecutive evaluations near {best:?}")]
    NonFiniteObjective { count: usize, best: Vec<f64> },
}

#[derive(Clone, Copy, Debug)]
pub struct NelderMeadOptions {
    /// Stop when every vertex lies within this distance of the best one.
    pub tol: f64,
    pub max_iter: usize,
    /// Edge length of the initial simplex along each coordinate axis.
    pub initial_step: f64,
    /// Abort after this many consecutive non-finite evaluations.
    pub max_non_finite: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 400,
            initial_step: 0.5,
            max_non_finite: 64,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

struct Counted<F> {
    f: F,
    evaluations: usize,
    non_finite_run: usize,
    max_non_finite: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counted<F> {
    /// Non-finite values rank as `+inf`, so the simplex moves away from them.
    fn eval(&mut self, x: &[f64], best: &[f64]) -> Result<f64, NelderMeadError> {
        self.evaluations += 1;
        let v = (self.f)(x);
        if v.is_finite() {
            self.non_finite_run = 0;
            Ok(v)
        } else {
            self.non_finite_run += 1;
            if self.non_finite_run >= self.max_non_finite {
                return Err(NelderMeadError::NonFiniteObjective {
                    count: self.non_finite_run,
                    best: best.to_vec(),
                });
            }
            Ok(f64::INFINITY)
        }
    }
}

fn combine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    // a + t (b - a)
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Minimizes `f` from `x0` with reflection, expansion, contraction and shrink
/// coefficients `(1, 2, 1/2, 1/2)`.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    opts: &NelderMeadOptions,
) -> Result<NelderMeadResult, NelderMeadError> {
    let n = x0.len();
    let mut obj = Counted {
        f,
        evaluations: 0,
        non_finite_run: 0,
        max_non_finite: opts.max_non_finite,
    };
    let f0 = obj.eval(x0, x0)?;
    if !f0.is_finite() {
        return Err(NelderMeadError::NonFiniteStart { x: x0.to_vec() });
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.initial_step;
        let v = obj.eval(&x, x0)?;
        simplex.push((x, v));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        // Stable sort keeps earlier vertices first among ties.
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if diameter(&simplex) < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let best = simplex[0].0.clone();
        let worst = simplex[n].clone();
        let second_worst = simplex[n - 1].1;
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(x, _)| x[j]).sum::<f64>() / n as f64)
            .collect();

        let xr = combine(&centroid, &worst.0, -REFLECT);
        let fr = obj.eval(&xr, &best)?;
        if fr < simplex[0].1 {
            let xe = combine(&centroid, &worst.0, -EXPAND);
            let fe = obj.eval(&xe, &best)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < second_worst {
            simplex[n] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = combine(&centroid, &xr, CONTRACT);
            let fc = obj.eval(&xc, &best)?;
            (xc, fc)
        } else {
            let xc = combine(&centroid, &worst.0, CONTRACT);
            let fc = obj.eval(&xc, &best)?;
            (xc, fc)
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        for k in 1..=n {
            let x = combine(&best, &simplex[k].0, SHRINK);
            let v = obj.eval(&x, &best)?;
            simplex[k] = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Ok(NelderMeadResult {
        x,
        f,
        iterations,
        evaluations: obj.evaluations,
        converged,
    })
}
