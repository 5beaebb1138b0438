//! Selection of the Kreĭn-Nudelman damping pair `(phi, varphi)`.
//!
//! Two selectors are provided. [`select_spectral`] minimizes the residual-weighted
//! energy `Omega` of the quadrature along a contour just above the negative real
//! axis. [`select_matching`] fits the rule to the averaged Gauß/Gauß-Radau value
//! at large real shifts where the two bounds nearly agree.
//!
//! Both optimize over `(u, v)` with `phi = e^u I_p` and `varphi = v^2 I_p`.

mod nelder_mead;

pub use nelder_mead::{nelder_mead, NelderMeadError, NelderMeadOptions, NelderMeadResult};

use crate::linalg::{mul_rc, BlockTridiagonal, DenseBlock, LinalgError};
use crate::par;
use crate::quadrature::{eval_averaged, eval_gauss, eval_kn, eval_radau, modified_last_alpha, KNParams, QuadratureError};
use crate::stieltjes::StieltjesParams;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// `phi` used as the Gauß-limit endpoint of the parameter family.
pub const GAUSS_LIMIT_PHI: f64 = 1e12;
/// `phi = varphi` used as the Gauß-Radau proxy endpoint.
pub const RADAU_PROXY: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SelectError {
    #[error("residual weight is below the support threshold everywhere")]
    EmptySupport,
    #[error("relative Gauß/Gauß-Radau gap never drops below {gap_tol:e}; more Lanczos steps are needed")]
    NoMatchRegion { gap_tol: f64 },
    #[error("invalid selection config: {0}")]
    Config(String),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error(transparent)]
    NelderMead(#[from] NelderMeadError),
}

impl From<LinalgError> for SelectError {
    fn from(e: LinalgError) -> Self {
        SelectError::Quadrature(e.into())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionConfig {
    /// Absolute contour lift. When `None` the lift is `epsilon_rel * d`.
    pub epsilon: Option<f64>,
    pub epsilon_rel: f64,
    /// Nodes of the support scan and of the `Omega` quadrature.
    pub n_quad: usize,
    pub d_fraction: f64,
    /// `omega >= support_threshold * max omega` defines the support.
    pub support_threshold: f64,
    pub nm_tol: f64,
    pub nm_max_iter: usize,
    /// Number of starting points for the spectral selector.
    pub restarts: usize,
    /// Seeds the extra random starting points used when `restarts > 3`.
    pub seed: u64,
    /// Relative Gauß/Gauß-Radau gap below which a shift counts for matching.
    pub match_gap: f64,
    /// Number of matching shifts.
    pub match_count: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            epsilon: None,
            epsilon_rel: 1e-3,
            n_quad: 2000,
            d_fraction: 0.1,
            support_threshold: 1e-3,
            nm_tol: 1e-6,
            nm_max_iter: 400,
            restarts: 3,
            seed: 0,
            match_gap: 1e-3,
            match_count: 8,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), SelectError> {
        let bad = |m: &str| Err(SelectError::Config(m.into()));
        if self.epsilon.is_some_and(|e| !(e > 0.0)) || !(self.epsilon_rel > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.d_fraction > 0.0 && self.d_fraction <= 1.0) {
            return bad("d_fraction must lie in (0, 1]");
        }
        if self.n_quad < 2 {
            return bad("n_quad must be at least 2");
        }
        if !(self.support_threshold > 0.0 && self.support_threshold < 1.0) {
            return bad("support_threshold must lie in (0, 1)");
        }
        if self.restarts == 0 || self.match_count == 0 {
            return bad("restarts and match_count must be positive");
        }
        Ok(())
    }

    fn nm_options(&self) -> NelderMeadOptions {
        NelderMeadOptions {
            tol: self.nm_tol,
            max_iter: self.nm_max_iter,
            ..Default::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionMethod {
    Spectral,
    Matching,
}

#[derive(Clone, Debug)]
pub struct SelectionResult {
    pub kn: KNParams,
    pub objective_value: f64,
    pub d_used: f64,
    pub evaluations: usize,
    pub method: SelectionMethod,
}

/// Support interval of `omega` on the negative real axis and the derived `d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OmegaSupport {
    pub x_lo: f64,
    pub x_hi: f64,
    pub d: f64,
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| {
            if k + 1 == n {
                hi
            } else {
                (a + (b - a) * k as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

fn omega_and_last(t: &BlockTridiagonal, beta_next: &DenseBlock<f64>, s: Complex64) -> Result<f64, QuadratureError> {
    let sol = t.solve_shifted_e1(s)?;
    Ok(mul_rc(beta_next, sol.last()).frobenius_norm() / sol.frobenius_norm())
}

/// Scans `omega(-x + i eps)` on a log grid over `[lambda_min/10, 10 lambda_max]` of
/// the Ritz values and returns `d = x_lo + d_fraction (x_hi - x_lo)`.
///
/// The scan uses a lift of `1e-8 lambda_max`, which only keeps the solves
/// regular; `omega` itself has finite limits at the Ritz values.
pub fn omega_support_d(t: &BlockTridiagonal, beta_next: &DenseBlock<f64>, cfg: &SelectionConfig) -> Result<OmegaSupport, SelectError> {
    cfg.validate()?;
    if beta_next.max_abs() == 0.0 {
        return Err(SelectError::EmptySupport);
    }
    let ev = t.eigenvalues();
    let (lmin, lmax) = (ev[0], ev[ev.len() - 1]);
    if !(lmin > 0.0) {
        return Err(QuadratureError::InvalidParams("T_m is not positive definite".into()).into());
    }
    let xs = log_grid(lmin / 10.0, 10.0 * lmax, cfg.n_quad);
    let lift = 1e-8 * lmax;
    let omegas = par::map(&xs, |&x| omega_and_last(t, beta_next, Complex64::new(-x, lift)));
    let omegas: Vec<f64> = omegas.into_iter().collect::<Result<_, _>>()?;
    let wmax = omegas.iter().copied().fold(0.0, f64::max);
    if !(wmax > 0.0) {
        return Err(SelectError::EmptySupport);
    }
    let cut = cfg.support_threshold * wmax;
    let inside: Vec<usize> = (0..xs.len()).filter(|&k| omegas[k] >= cut).collect();
    let (x_lo, x_hi) = (xs[inside[0]], xs[*inside.last().unwrap()]);
    Ok(OmegaSupport {
        x_lo,
        x_hi,
        d: x_lo + cfg.d_fraction * (x_hi - x_lo),
    })
}

/// Per-node data of the `Omega` integral, precomputed once so that each objective
/// evaluation costs `O(n_quad p^3)`.
///
/// With `M = T_m + sI` and `Delta = alpha_hat_m - alpha_m`, the rule equals
/// `R_11 - R_1m Delta (I + R_mm Delta)^{-1} R_m1` where `R_ij = E_i^T M^{-1} E_j`.
#[derive(Clone, Debug)]
pub struct OmegaObjective {
    xs: Vec<f64>,
    weights: Vec<f64>,
    epsilon: f64,
    nodes: Vec<Node>,
    p: usize,
    d: f64,
}

#[derive(Clone, Debug)]
struct Node {
    s: Complex64,
    omega2: f64,
    r11: DenseBlock<Complex64>,
    rm1: DenseBlock<Complex64>,
    rmm: DenseBlock<Complex64>,
}

impl OmegaObjective {
    /// Nodes on `s = -x + i epsilon`, `x` log-spaced over `[max(x_lo, epsilon/10), d]`.
    pub fn new(
        t: &BlockTridiagonal,
        beta_next: &DenseBlock<f64>,
        support: &OmegaSupport,
        cfg: &SelectionConfig,
    ) -> Result<Self, SelectError> {
        cfg.validate()?;
        let d = support.d;
        let epsilon = cfg.epsilon.unwrap_or(cfg.epsilon_rel * d);
        let x_min = support.x_lo.max(epsilon / 10.0);
        if !(x_min < d) {
            return Err(SelectError::Config(format!("empty integration interval [{x_min:e}, {d:e}]")));
        }
        let xs = log_grid(x_min, d, cfg.n_quad);
        let n = xs.len();
        let weights: Vec<f64> = (0..n)
            .map(|k| {
                let left = if k > 0 { xs[k] - xs[k - 1] } else { 0.0 };
                let right = if k + 1 < n { xs[k + 1] - xs[k] } else { 0.0 };
                0.5 * (left + right)
            })
            .collect();
        let (m, p) = (t.m(), t.p());
        let nodes = par::map(&xs, |&x| -> Result<Node, QuadratureError> {
            let s = Complex64::new(-x, epsilon);
            let first = t.solve_shifted_e1(s)?;
            let mut em = vec![DenseBlock::zeros(p, p); m];
            em[m - 1] = DenseBlock::identity(p);
            let last = t.solve_shifted(s, &em)?;
            let omega = mul_rc(beta_next, first.last()).frobenius_norm() / first.frobenius_norm();
            Ok(Node {
                s,
                omega2: omega * omega,
                r11: first.first().symmetrize(),
                rm1: first.last().clone(),
                rmm: last.last().symmetrize(),
            })
        });
        let nodes = nodes.into_iter().collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            xs,
            weights,
            epsilon,
            nodes,
            p,
            d,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn nodes(&self) -> &[f64] {
        &self.xs
    }

    /// The rule value at node `k` via the low-rank update of the Gauß resolvent.
    fn rule_at(&self, k: usize, params: &StieltjesParams, alpha_m: &DenseBlock<f64>, kn: &KNParams) -> Result<DenseBlock<Complex64>, QuadratureError> {
        let nd = &self.nodes[k];
        let delta = &modified_last_alpha(params, alpha_m, nd.s, kn)? - &alpha_m.to_complex();
        let inner = &DenseBlock::identity(self.p) + &nd.rmm.matmul(&delta);
        let x = inner.solve(&nd.rm1)?;
        let corr = nd.rm1.transpose().matmul(&delta).matmul(&x);
        Ok((&nd.r11 - &corr).symmetrize())
    }

    /// `Omega` for the damping pair `kn`.
    pub fn value(&self, t: &BlockTridiagonal, params: &StieltjesParams, kn: &KNParams) -> Result<f64, QuadratureError> {
        let alpha_m = t.alpha(t.m());
        let mut acc = 0.0;
        for k in 0..self.nodes.len() {
            let f = self.rule_at(k, params, alpha_m, kn)?;
            acc += self.weights[k] * self.nodes[k].omega2 * f.frobenius_norm().powi(2);
        }
        Ok(acc)
    }

    /// `Omega` evaluated with a full shifted solve per node; slower, used to check [`Self::value`].
    pub fn value_direct(&self, t: &BlockTridiagonal, params: &StieltjesParams, kn: &KNParams) -> Result<f64, QuadratureError> {
        let mut acc = 0.0;
        for (k, nd) in self.nodes.iter().enumerate() {
            let f = eval_kn(t, params, nd.s, kn)?;
            acc += self.weights[k] * nd.omega2 * f.frobenius_norm().powi(2);
        }
        Ok(acc)
    }

    /// The same integral with the Gauß rule in place of the Kreĭn-Nudelman rule.
    pub fn value_gauss(&self) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(nd, w)| w * nd.omega2 * nd.r11.frobenius_norm().powi(2))
            .sum()
    }
}

/// `Omega(phi, varphi)` on the contour ending at `d`.
pub fn objective_omega(
    t: &BlockTridiagonal,
    params: &StieltjesParams,
    beta_next: &DenseBlock<f64>,
    kn: &KNParams,
    cfg: &SelectionConfig,
    d: f64,
) -> Result<f64, SelectError> {
    let support = omega_support_d(t, beta_next, cfg)?;
    let support = OmegaSupport { d, ..support };
    Ok(OmegaObjective::new(t, beta_next, &support, cfg)?.value(t, params, kn)?)
}

fn uv_of(kn: &KNParams) -> [f64; 2] {
    let (phi, varphi) = kn.scalars();
    [phi.ln(), varphi.max(0.0).sqrt()]
}

/// Starting points in `(u, v)`: the impedance guess `||beta_{m+1}|| / sqrt(d)`, the
/// string impedance `sqrt(||gamma_hat_m|| / ||gamma_m||)` of the last level with
/// `varphi = 0` and with `varphi = sqrt(||gamma_hat_m||)`, then seeded perturbations.
fn starting_points(params: &StieltjesParams, beta_next: &DenseBlock<f64>, d: f64, cfg: &SelectionConfig) -> Vec<[f64; 2]> {
    let m = params.m();
    let gh = params.gammas_hat()[m - 1].frobenius_norm();
    let g = params.gammas()[m - 1].frobenius_norm();
    let phi_beta = (beta_next.frobenius_norm() / d.sqrt()).max(f64::MIN_POSITIVE);
    let phi_string = (gh / g).sqrt();
    let mut starts = vec![[phi_beta.ln(), 0.0], [phi_string.ln(), 0.0], [phi_string.ln(), gh.sqrt().sqrt()]];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    while starts.len() < cfg.restarts {
        let base = starts[1];
        starts.push([base[0] + rng.gen_range(-2.0..2.0), rng.gen_range(0.0..2.0) * base[1].max(1.0)]);
    }
    starts.truncate(cfg.restarts);
    starts
}

/// Minimizes `Omega` over `(phi, varphi)` by Nelder–Mead from several starts.
///
/// The Gauß-limit and Gauß-Radau-proxy endpoints are kept as candidates, so the
/// returned `Omega` never exceeds either of them.
pub fn select_spectral(
    t: &BlockTridiagonal,
    params: &StieltjesParams,
    beta_next: &DenseBlock<f64>,
    cfg: &SelectionConfig,
) -> Result<SelectionResult, SelectError> {
    let support = omega_support_d(t, beta_next, cfg)?;
    let obj = OmegaObjective::new(t, beta_next, &support, cfg)?;
    let p = t.p();
    let f = |x: &[f64]| obj.value(t, params, &KNParams::from_uv(p, x[0], x[1])).unwrap_or(f64::NAN);

    let mut evaluations = 0;
    let mut best: Option<([f64; 2], f64)> = None;
    let consider = |x: [f64; 2], v: f64, best: &mut Option<([f64; 2], f64)>| {
        if v.is_finite() && best.is_none_or(|b| v < b.1) {
            *best = Some((x, v));
        }
    };
    let gauss_end = [GAUSS_LIMIT_PHI.ln(), GAUSS_LIMIT_PHI.sqrt()];
    let radau_end = [RADAU_PROXY.ln(), RADAU_PROXY.sqrt()];
    for x in [gauss_end, radau_end] {
        evaluations += 1;
        consider(x, f(&x), &mut best);
    }
    for x0 in starting_points(params, beta_next, support.d, cfg) {
        // One restart from the converged point guards against a collapsed simplex.
        let first = nelder_mead(f, &x0, &cfg.nm_options())?;
        let again = nelder_mead(f, &first.x, &cfg.nm_options())?;
        evaluations += first.evaluations + again.evaluations;
        consider([again.x[0], again.x[1]], again.f, &mut best);
    }
    let (x, objective_value) = best.ok_or(SelectError::EmptySupport)?;
    Ok(SelectionResult {
        kn: KNParams::from_uv(p, x[0], x[1]),
        objective_value,
        d_used: support.d,
        evaluations,
        method: SelectionMethod::Spectral,
    })
}

/// Real shifts on a log grid whose relative Gauß/Gauß-Radau gap is below
/// `cfg.match_gap`, closest to the edge of that region first.
pub fn matching_shifts(t: &BlockTridiagonal, params: &StieltjesParams, cfg: &SelectionConfig) -> Result<Vec<f64>, SelectError> {
    let ev = t.eigenvalues();
    let (lmin, lmax) = (ev[0].abs().max(1e-300), ev[ev.len() - 1]);
    let grid = log_grid(lmin.min(lmax * 1e-6), lmax * 1e6, 241);
    let gaps = par::map(&grid, |&s| -> Result<f64, QuadratureError> {
        let sc = Complex64::new(s, 0.0);
        let g = eval_gauss(t, sc)?;
        let r = eval_radau(t, params, sc)?;
        Ok((&r - &g).frobenius_norm() / g.frobenius_norm())
    });
    let mut chosen = Vec::new();
    for (s, gap) in grid.iter().zip(gaps) {
        if gap? < cfg.match_gap {
            chosen.push(*s);
            if chosen.len() == cfg.match_count {
                break;
            }
        }
    }
    if chosen.is_empty() {
        return Err(SelectError::NoMatchRegion { gap_tol: cfg.match_gap });
    }
    Ok(chosen)
}

/// Least-squares fit of the Kreĭn-Nudelman rule to the averaged rule at `shifts`.
pub fn select_matching_at(
    t: &BlockTridiagonal,
    params: &StieltjesParams,
    beta_next: &DenseBlock<f64>,
    shifts: &[f64],
    cfg: &SelectionConfig,
) -> Result<SelectionResult, SelectError> {
    let p = t.p();
    let x0 = starting_points(params, beta_next, 1.0, cfg)[1];
    if beta_next.max_abs() == 0.0 {
        return Ok(SelectionResult {
            kn: KNParams::from_uv(p, x0[0], x0[1]),
            objective_value: 0.0,
            d_used: f64::NAN,
            evaluations: 0,
            method: SelectionMethod::Matching,
        });
    }
    let targets: Vec<(Complex64, DenseBlock<Complex64>)> = shifts
        .iter()
        .map(|&s| {
            let sc = Complex64::new(s, 0.0);
            eval_averaged(t, params, sc).map(|v| (sc, v))
        })
        .collect::<Result<_, _>>()?;
    let f = |x: &[f64]| {
        let kn = KNParams::from_uv(p, x[0], x[1]);
        targets
            .iter()
            .map(|(s, v)| eval_kn(t, params, *s, &kn).map(|k| (&k - v).frobenius_norm().powi(2)))
            .sum::<Result<f64, _>>()
            .unwrap_or(f64::NAN)
    };
    let first = nelder_mead(f, &x0, &cfg.nm_options())?;
    let again = nelder_mead(f, &first.x, &cfg.nm_options())?;
    Ok(SelectionResult {
        kn: KNParams::from_uv(p, again.x[0], again.x[1]),
        objective_value: again.f,
        d_used: f64::NAN,
        evaluations: first.evaluations + again.evaluations,
        method: SelectionMethod::Matching,
    })
}

/// Matching selector on the shifts from [`matching_shifts`].
pub fn select_matching(
    t: &BlockTridiagonal,
    params: &StieltjesParams,
    beta_next: &DenseBlock<f64>,
    cfg: &SelectionConfig,
) -> Result<SelectionResult, SelectError> {
    cfg.validate()?;
    if beta_next.max_abs() == 0.0 {
        return select_matching_at(t, params, beta_next, &[], cfg);
    }
    let shifts = matching_shifts(t, params, cfg)?;
    select_matching_at(t, params, beta_next, &shifts, cfg)
}

/// Exponential smoothing of `(u, v)` across successive selections.
#[derive(Clone, Debug)]
pub struct ParamSmoother {
    weight: f64,
    state: Option<[f64; 2]>,
}

impl ParamSmoother {
    /// `weight` is the share of the new selection, in `(0, 1]`.
    pub fn new(weight: f64) -> Self {
        assert!(weight > 0.0 && weight <= 1.0, "smoothing weight must lie in (0, 1]");
        Self { weight, state: None }
    }

    pub fn update(&mut self, kn: &KNParams) -> KNParams {
        let x = uv_of(kn);
        let next = match self.state {
            None => x,
            Some(prev) => [
                prev[0] + self.weight * (x[0] - prev[0]),
                prev[1] + self.weight * (x[1] - prev[1]),
            ],
        };
        self.state = Some(next);
        KNParams::from_uv(kn.phi.rows(), next[0], next[1])
    }
}
