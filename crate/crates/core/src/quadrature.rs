//! Quadrature rules for `B^T (A + sI)^{-1} B` from the block Lanczos coefficients.
//!
//! Every rule is available in two algebraically equivalent forms: a shifted
//! block-tridiagonal solve with a (possibly modified) last diagonal block, and
//! the backward continued-fraction recursion over the string parameters.

use crate::linalg::{mul_cr, mul_rc, solve_shifted_blocktridiag, BlockTridiagonal, BlockVector, DenseBlock, LinalgError, SparseSymOperator};
use crate::stieltjes::StieltjesParams;
use num_complex::Complex64;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadratureError {
    #[error("singular pivot block {block} in shifted solve")]
    SingularPivot { block: usize },
    #[error("continued fraction level {i} is singular")]
    SingularLevel { i: usize },
    #[error("shift {0} lies on the branch cut of sqrt(s)")]
    OnBranchCut(Complex64),
    #[error("invalid damping parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Linalg(LinalgError),
}

impl From<LinalgError> for QuadratureError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::SingularPivot { block } => QuadratureError::SingularPivot { block },
            other => QuadratureError::Linalg(other),
        }
    }
}

type Block = DenseBlock<Complex64>;

/// Kreĭn-Nudelman damping pair `(phi, varphi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct KNParams {
    pub phi: DenseBlock<f64>,
    pub varphi: DenseBlock<f64>,
}

impl KNParams {
    /// `phi * I_p`, `varphi * I_p`.
    pub fn scalar(p: usize, phi: f64, varphi: f64) -> Self {
        Self {
            phi: DenseBlock::scaled_identity(p, phi),
            varphi: DenseBlock::scaled_identity(p, varphi),
        }
    }

    /// `phi` SPD and `varphi` symmetric positive semidefinite.
    pub fn validate(&self) -> Result<(), QuadratureError> {
        if !self.phi.is_spd() {
            return Err(QuadratureError::InvalidParams("phi must be symmetric positive definite".into()));
        }
        let ok = self.varphi.is_symmetric(1e-12)
            && self.varphi.sym_eigenvalues().first().is_some_and(|&l| l >= -1e-14 * self.varphi.max_abs());
        if !ok {
            return Err(QuadratureError::InvalidParams("varphi must be symmetric positive semidefinite".into()));
        }
        Ok(())
    }

    /// `(phi, varphi)` from the unconstrained coordinates `phi = e^u`, `varphi = v^2`.
    pub fn from_uv(p: usize, u: f64, v: f64) -> Self {
        Self::scalar(p, u.exp(), v * v)
    }

    /// Leading diagonal entries, which carry the whole pair in the scalar case.
    pub fn scalars(&self) -> (f64, f64) {
        (self.phi[(0, 0)], self.varphi[(0, 0)])
    }

    /// Impedance block `varphi + sqrt(s) phi`.
    fn impedance(&self, sqrt_s: Complex64) -> Block {
        &self.varphi.to_complex() + &self.phi.to_complex().scale(sqrt_s)
    }
}

/// How the continued fraction is closed after level `m`.
#[derive(Clone, Debug, PartialEq)]
pub enum Terminator {
    GaussZero,
    RadauLimit,
    KreinNudelman(KNParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    Gauss,
    Radau,
    Averaged,
    KnSpectral,
    KnMatching,
}

impl Rule {
    pub const ALL: [Rule; 5] = [Rule::Gauss, Rule::Radau, Rule::Averaged, Rule::KnSpectral, Rule::KnMatching];

    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Gauss => "gauss",
            Rule::Radau => "radau",
            Rule::Averaged => "avg",
            Rule::KnSpectral => "kn-spectral",
            Rule::KnMatching => "kn-matching",
        }
    }

    pub fn is_kn(self) -> bool {
        matches!(self, Rule::KnSpectral | Rule::KnMatching)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Rule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rule::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown rule '{s}' (expected gauss, radau, avg, kn-spectral or kn-matching)"))
    }
}

/// One evaluated rule at one shift.
#[derive(Clone, Debug)]
pub struct TransferSample {
    pub s: Complex64,
    pub value: Block,
    pub rule: Rule,
    pub error_vs_reference: Option<f64>,
}

impl TransferSample {
    pub fn new(s: Complex64, value: Block, rule: Rule) -> Self {
        Self {
            s,
            value,
            rule,
            error_vs_reference: None,
        }
    }

    /// Fills the error column as `||value - reference||_F`.
    pub fn with_reference(mut self, reference: &Block) -> Self {
        self.error_vs_reference = Some((&self.value - reference).frobenius_norm());
        self
    }
}

/// Principal square root, refusing shifts on the negative real axis.
pub fn principal_sqrt(s: Complex64) -> Result<Complex64, QuadratureError> {
    if s.im == 0.0 && s.re < 0.0 {
        return Err(QuadratureError::OnBranchCut(s));
    }
    Ok(s.sqrt())
}

fn lifted_diag(t: &BlockTridiagonal) -> Vec<Block> {
    t.alphas().iter().map(|a| a.to_complex()).collect()
}

fn solve_first(diag: &[Block], t: &BlockTridiagonal, s: Complex64) -> Result<Block, QuadratureError> {
    let rhs = crate::linalg::e1_column(t.m(), t.p());
    let sol = solve_shifted_blocktridiag(diag, t.betas(), s, &rhs)?;
    Ok(sol.first().symmetrize())
}

/// Block Gauß rule `E_1^T (T_m + sI)^{-1} E_1`.
pub fn eval_gauss(t: &BlockTridiagonal, s: Complex64) -> Result<Block, QuadratureError> {
    solve_first(&lifted_diag(t), t, s)
}

/// Backward S-fraction recursion `C_i = (s gamma_hat_i + (gamma_i + C_{i+1})^{-1})^{-1}`.
pub fn eval_cf(params: &StieltjesParams, s: Complex64, term: &Terminator) -> Result<Block, QuadratureError> {
    let m = params.m();
    let p = params.p();
    let level = |i: usize, inner: Block| -> Result<Block, QuadratureError> {
        let g = &params.gammas_hat()[i].to_complex().scale(s) + &inner;
        g.inverse().map_err(|_| QuadratureError::SingularLevel { i: i + 1 })
    };
    let inv_of = |b: &Block, i: usize| b.inverse().map_err(|_| QuadratureError::SingularLevel { i: i + 1 });

    let mut c = match term {
        Terminator::GaussZero => level(m - 1, params.gamma_invs()[m - 1].to_complex())?,
        Terminator::RadauLimit => level(m - 1, DenseBlock::zeros(p, p))?,
        Terminator::KreinNudelman(kn) => {
            let c_next = inv_of(&kn.impedance(principal_sqrt(s)?), m)?;
            let inner = inv_of(&(&params.gammas()[m - 1].to_complex() + &c_next), m - 1)?;
            level(m - 1, inner)?
        }
    };
    for i in (0..m - 1).rev() {
        let inner = inv_of(&(&params.gammas()[i].to_complex() + &c), i)?;
        c = level(i, inner)?;
    }
    Ok(c.symmetrize())
}

/// `alpha_hat_m = alpha_m - K^{-T} g (g + varphi + sqrt(s) phi)^{-1} g K^{-1}` with
/// `g = gamma_m^{-1}` and `K = kappa_hat_m`.
pub fn modified_last_alpha(
    params: &StieltjesParams,
    alpha_m: &DenseBlock<f64>,
    s: Complex64,
    kn: &KNParams,
) -> Result<Block, QuadratureError> {
    let m = params.m();
    let g = &params.gamma_invs()[m - 1];
    let kinv = &params.kappa_hat_invs()[m - 1];
    let inner = (&g.to_complex() + &kn.impedance(principal_sqrt(s)?)).inverse()?;
    // g K^{-1} is real; wrap the complex core with it on both sides.
    let gk = g.matmul(kinv);
    let corr = mul_rc(&gk.transpose(), &mul_cr(&inner, &gk));
    Ok((&alpha_m.to_complex() - &corr).symmetrize())
}

/// `s`-independent Radau block `alpha_m - K^{-T} gamma_m^{-1} K^{-1}`.
pub fn radau_last_alpha(params: &StieltjesParams, alpha_m: &DenseBlock<f64>) -> DenseBlock<f64> {
    let m = params.m();
    let g = &params.gamma_invs()[m - 1];
    let kinv = &params.kappa_hat_invs()[m - 1];
    (alpha_m - &kinv.tr_matmul(g).matmul(kinv)).symmetrize()
}

/// Kreĭn-Nudelman rule via the modified last diagonal block.
pub fn eval_kn(t: &BlockTridiagonal, params: &StieltjesParams, s: Complex64, kn: &KNParams) -> Result<Block, QuadratureError> {
    let mut diag = lifted_diag(t);
    diag[t.m() - 1] = modified_last_alpha(params, t.alpha(t.m()), s, kn)?;
    solve_first(&diag, t, s)
}

/// Gauß-Radau rule via the modified last diagonal block.
pub fn eval_radau(t: &BlockTridiagonal, params: &StieltjesParams, s: Complex64) -> Result<Block, QuadratureError> {
    let mut diag = lifted_diag(t);
    diag[t.m() - 1] = radau_last_alpha(params, t.alpha(t.m())).to_complex();
    solve_first(&diag, t, s)
}

/// Mean of the Gauß and Gauß-Radau values.
pub fn eval_averaged(t: &BlockTridiagonal, params: &StieltjesParams, s: Complex64) -> Result<Block, QuadratureError> {
    let g = eval_gauss(t, s)?;
    let r = eval_radau(t, params, s)?;
    Ok((&g + &r).scale(Complex64::new(0.5, 0.0)))
}

/// Evaluates `rule`; Kreĭn-Nudelman rules need `kn`.
pub fn eval_rule(
    rule: Rule,
    t: &BlockTridiagonal,
    params: &StieltjesParams,
    s: Complex64,
    kn: Option<&KNParams>,
) -> Result<Block, QuadratureError> {
    match rule {
        Rule::Gauss => eval_gauss(t, s),
        Rule::Radau => eval_radau(t, params, s),
        Rule::Averaged => eval_averaged(t, params, s),
        Rule::KnSpectral | Rule::KnMatching => {
            let kn = kn.ok_or_else(|| QuadratureError::InvalidParams(format!("{rule} needs damping parameters")))?;
            eval_kn(t, params, s, kn)
        }
    }
}

/// Relative residual weight `||beta_{m+1} E_m^T U|| / ||U||` with `U = (T_m + sI)^{-1} E_1`.
/// Both norms are Frobenius norms, which for `p = 1` are the Euclidean norms.
pub fn weight_omega(t: &BlockTridiagonal, beta_next: &DenseBlock<f64>, s: Complex64) -> Result<f64, QuadratureError> {
    let sol = t.solve_shifted_e1(s)?;
    let num = mul_rc(beta_next, sol.last()).frobenius_norm();
    Ok(num / sol.frobenius_norm())
}

/// `E_1^T (-T_m)^{i-1} E_1` for `i = 1..=k_max`, by repeated block matvec.
///
/// Only the first `2m` agree with the moments of `(A, B)`; later ones are
/// returned as well so callers can check where matching stops.
pub fn moments(t: &BlockTridiagonal, k_max: usize) -> Vec<DenseBlock<f64>> {
    let mut x = crate::linalg::e1_column::<f64>(t.m(), t.p());
    let mut out = Vec::with_capacity(k_max);
    for _ in 0..k_max {
        out.push(x[0].clone());
        x = t.apply(&x).iter().map(|b| -b).collect();
    }
    out
}

/// `B^T (-A)^{i-1} B` for `i = 1..=k_max`.
pub fn operator_moments(op: &SparseSymOperator, b: &BlockVector, k_max: usize) -> Vec<DenseBlock<f64>> {
    let mut x = b.clone();
    let mut out = Vec::with_capacity(k_max);
    for _ in 0..k_max {
        out.push(b.t_dot(&x));
        let mut y = op.apply(&x);
        y.as_mut_slice().iter_mut().for_each(|v| *v = -*v);
        x = y;
    }
    out
}
