//! Stieltjes string parameters of a block tridiagonal matrix.
//!
//! `T_m` factors as `K^{-T} J Gamma^{-1} J^T K^{-1}` with `K = diag(kappa_hat_i)`,
//! `Gamma = diag(gamma_i)` and `J` the lower block bidiagonal matrix with `I` on the
//! diagonal and `-I` below it. [`extract`] recovers `gamma_i` and `kappa_hat_i` from
//! the Lanczos coefficients, [`reconstruct`] goes the other way.

use crate::linalg::{solve_shifted_blocktridiag, BlockTridiagonal, DenseBlock, LinalgError};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StieltjesError {
    /// `gamma_step^{-1}` is singular or not positive definite, or `kappa_hat_step`
    /// could not be formed.
    #[error("Stieltjes breakdown at step {step}")]
    Breakdown { step: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// String parameters `gamma_i`, `kappa_hat_i` and `gamma_hat_i = kappa_hat_i^T kappa_hat_i`.
///
/// Inverses of `gamma_i` and `kappa_hat_i` are kept because every consumer
/// needs them and recomputing them loses accuracy.
#[derive(Clone, Debug)]
pub struct StieltjesParams {
    p: usize,
    gammas: Vec<DenseBlock<f64>>,
    gamma_invs: Vec<DenseBlock<f64>>,
    kappas_hat: Vec<DenseBlock<f64>>,
    kappa_hat_invs: Vec<DenseBlock<f64>>,
    gammas_hat: Vec<DenseBlock<f64>>,
}

impl StieltjesParams {
    /// Builds parameters from `gamma_i` and `kappa_hat_i` (`kappa_hat_1` must be `I`).
    pub fn new(gammas: Vec<DenseBlock<f64>>, kappas_hat: Vec<DenseBlock<f64>>) -> Result<Self, StieltjesError> {
        let m = gammas.len();
        if m == 0 || kappas_hat.len() != m {
            return Err(LinalgError::Shape("need m >= 1 matching gamma and kappa_hat blocks".into()).into());
        }
        let p = gammas[0].rows();
        if kappas_hat[0] != DenseBlock::identity(p) {
            return Err(LinalgError::Shape("kappa_hat_1 must be the identity".into()).into());
        }
        let mut gamma_invs = Vec::with_capacity(m);
        let mut kappa_hat_invs = Vec::with_capacity(m);
        let mut gammas_hat = Vec::with_capacity(m);
        for i in 0..m {
            let g = gammas[i].symmetrize();
            if !g.is_spd() {
                return Err(StieltjesError::Breakdown { step: i + 1 });
            }
            gamma_invs.push(g.inverse()?.symmetrize());
            kappa_hat_invs.push(kappas_hat[i].inverse().map_err(|_| StieltjesError::Breakdown { step: i + 1 })?);
            gammas_hat.push(kappas_hat[i].tr_matmul(&kappas_hat[i]).symmetrize());
        }
        Ok(Self {
            p,
            gammas: gammas.into_iter().map(|g| g.symmetrize()).collect(),
            gamma_invs,
            kappas_hat,
            kappa_hat_invs,
            gammas_hat,
        })
    }

    pub fn m(&self) -> usize {
        self.gammas.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn gammas(&self) -> &[DenseBlock<f64>] {
        &self.gammas
    }

    pub fn gamma_invs(&self) -> &[DenseBlock<f64>] {
        &self.gamma_invs
    }

    pub fn kappas_hat(&self) -> &[DenseBlock<f64>] {
        &self.kappas_hat
    }

    pub fn kappa_hat_invs(&self) -> &[DenseBlock<f64>] {
        &self.kappa_hat_invs
    }

    pub fn gammas_hat(&self) -> &[DenseBlock<f64>] {
        &self.gammas_hat
    }

    /// Leading `k` levels of the string.
    pub fn truncated(&self, k: usize) -> Self {
        assert!(k >= 1 && k <= self.m());
        Self {
            p: self.p,
            gammas: self.gammas[..k].to_vec(),
            gamma_invs: self.gamma_invs[..k].to_vec(),
            kappas_hat: self.kappas_hat[..k].to_vec(),
            kappa_hat_invs: self.kappa_hat_invs[..k].to_vec(),
            gammas_hat: self.gammas_hat[..k].to_vec(),
        }
    }

    /// Primary-grid positions `x_i = gamma_1 + ... + gamma_i` (trace for `p > 1`).
    pub fn positions(&self) -> Vec<f64> {
        self.gammas
            .iter()
            .scan(0.0, |acc, g| {
                *acc += (0..self.p).map(|i| g[(i, i)]).sum::<f64>();
                Some(*acc)
            })
            .collect()
    }
}

/// Extracts the string parameters of `t` (block Cholesky-like sweep from the top).
pub fn extract(t: &BlockTridiagonal) -> Result<StieltjesParams, StieltjesError> {
    let (m, p) = (t.m(), t.p());
    let mut gammas = Vec::with_capacity(m);
    let mut gamma_invs = Vec::with_capacity(m);
    let mut kappas_hat = Vec::with_capacity(m);
    let mut kappa_hat_invs = Vec::with_capacity(m);
    let mut gammas_hat = Vec::with_capacity(m);

    let checked_inverse = |ginv: &DenseBlock<f64>, step: usize| -> Result<DenseBlock<f64>, StieltjesError> {
        if !ginv.is_spd() {
            return Err(StieltjesError::Breakdown { step });
        }
        Ok(ginv.inverse().map_err(|_| StieltjesError::Breakdown { step })?.symmetrize())
    };

    let g1inv = t.alpha(1).symmetrize();
    gammas.push(checked_inverse(&g1inv, 1)?);
    gamma_invs.push(g1inv);
    kappas_hat.push(DenseBlock::identity(p));
    kappa_hat_invs.push(DenseBlock::identity(p));
    gammas_hat.push(DenseBlock::identity(p));

    for i in 1..m {
        // kappa_hat_i^{-1} = -gamma_{i-1} kappa_hat_{i-1}^T beta_i^T
        let kinv = -&gammas[i - 1].matmul(&kappas_hat[i - 1].transpose()).matmul(&t.betas()[i - 1].transpose());
        let k = kinv.inverse().map_err(|_| StieltjesError::Breakdown { step: i + 1 })?;
        // gamma_i^{-1} = kappa_hat_i^T alpha_i kappa_hat_i - gamma_{i-1}^{-1}
        let ginv = (&k.tr_matmul(&t.alphas()[i]).matmul(&k) - &gamma_invs[i - 1]).symmetrize();
        gammas.push(checked_inverse(&ginv, i + 1)?);
        gamma_invs.push(ginv);
        gammas_hat.push(k.tr_matmul(&k).symmetrize());
        kappas_hat.push(k);
        kappa_hat_invs.push(kinv);
    }
    Ok(StieltjesParams {
        p,
        gammas,
        gamma_invs,
        kappas_hat,
        kappa_hat_invs,
        gammas_hat,
    })
}

/// Rebuilds `T_m` from the string parameters.
pub fn reconstruct(params: &StieltjesParams) -> Result<BlockTridiagonal, StieltjesError> {
    let m = params.m();
    let gi = &params.gamma_invs;
    let ki = &params.kappa_hat_invs;
    let mut alphas = Vec::with_capacity(m);
    let mut betas = Vec::with_capacity(m.saturating_sub(1));
    alphas.push(gi[0].clone());
    for i in 1..m {
        let sum = &gi[i - 1] + &gi[i];
        alphas.push(ki[i].tr_matmul(&sum).matmul(&ki[i]).symmetrize());
        betas.push(-&ki[i].tr_matmul(&gi[i - 1]).matmul(&ki[i - 1]));
    }
    Ok(BlockTridiagonal::new(alphas, betas)?)
}

/// The stiffness part `Z_m = J Gamma^{-1} J^T` of the pencil as a block tridiagonal.
pub fn pencil_stiffness(params: &StieltjesParams) -> BlockTridiagonal {
    let gi = &params.gamma_invs;
    let m = params.m();
    let alphas = (0..m)
        .map(|i| if i == 0 { gi[0].clone() } else { &gi[i - 1] + &gi[i] })
        .collect();
    let betas = (1..m).map(|i| -&gi[i - 1]).collect();
    BlockTridiagonal::new(alphas, betas).expect("shapes follow from params")
}

/// Dense `K^{-T} J Gamma^{-1} J^T K^{-1}`, assembled entry by entry for checking
/// against `T_m`.
pub fn pencil_dense(params: &StieltjesParams) -> DenseBlock<f64> {
    let (m, p) = (params.m(), params.p());
    let n = m * p;
    let z = pencil_stiffness(params).to_dense();
    let mut kinv = DenseBlock::zeros(n, n);
    for (b, k) in params.kappa_hat_invs.iter().enumerate() {
        for i in 0..p {
            for j in 0..p {
                kinv[(b * p + i, b * p + j)] = k[(i, j)];
            }
        }
    }
    kinv.tr_matmul(&z).matmul(&kinv)
}

/// `E_1^T (Z_m + s Gamma_hat_m)^{-1} E_1`, the Gauß value in pencil form.
pub fn pencil_resolvent(params: &StieltjesParams, s: Complex64) -> Result<DenseBlock<Complex64>, LinalgError> {
    let z = pencil_stiffness(params);
    let diag: Vec<DenseBlock<Complex64>> = z
        .alphas()
        .iter()
        .zip(&params.gammas_hat)
        .map(|(a, gh)| &a.to_complex() + &gh.to_complex().scale(s))
        .collect();
    let rhs = crate::linalg::e1_column(params.m(), params.p());
    let sol = solve_shifted_blocktridiag(&diag, z.betas(), Complex64::new(0.0, 0.0), &rhs)?;
    Ok(sol.first().symmetrize())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-14 * b.abs().max(1.0)
    }

    #[test]
    fn two_level_string() {
        let t = BlockTridiagonal::from_scalars(&[2.0, 2.0], &[1.0]).unwrap();
        let sp = extract(&t).unwrap();
        let g: Vec<f64> = sp.gammas().iter().map(|b| b[(0, 0)]).collect();
        let k: Vec<f64> = sp.kappas_hat().iter().map(|b| b[(0, 0)]).collect();
        let gh: Vec<f64> = sp.gammas_hat().iter().map(|b| b[(0, 0)]).collect();
        assert!(close(g[0], 0.5) && close(g[1], 1.0 / 6.0));
        assert!(close(k[0], 1.0) && close(k[1], -2.0));
        assert!(close(gh[0], 1.0) && close(gh[1], 4.0));
        let back = reconstruct(&sp).unwrap();
        assert!((&back.to_dense() - &t.to_dense()).max_abs() < 1e-14);
    }

    #[test]
    fn single_level() {
        let t = BlockTridiagonal::from_scalars(&[2.0], &[]).unwrap();
        let sp = extract(&t).unwrap();
        assert_eq!(sp.gammas()[0][(0, 0)], 0.5);
        assert_eq!(sp.gammas_hat()[0], DenseBlock::identity(1));
        assert_eq!(reconstruct(&sp).unwrap(), t);
    }

    #[test]
    fn singular_matrix_breaks_down() {
        let t = BlockTridiagonal::from_scalars(&[1.0, 1.0], &[1.0]).unwrap();
        assert_eq!(extract(&t).unwrap_err(), StieltjesError::Breakdown { step: 2 });
    }

    #[test]
    fn indefinite_first_block_breaks_down() {
        let t = BlockTridiagonal::from_scalars(&[-1.0, 3.0], &[1.0]).unwrap();
        assert_eq!(extract(&t).unwrap_err(), StieltjesError::Breakdown { step: 1 });
    }

    #[test]
    fn pencil_matches_tridiagonal() {
        let t = BlockTridiagonal::from_scalars(&[2.0, 3.0, 2.5], &[1.0, -0.5]).unwrap();
        let sp = extract(&t).unwrap();
        assert!((&pencil_dense(&sp) - &t.to_dense()).max_abs() < 1e-13);
        let s = Complex64::new(0.3, 0.7);
        let g = t.solve_shifted_e1(s).unwrap();
        let v = pencil_resolvent(&sp, s).unwrap();
        assert!((v[(0, 0)] - g.first()[(0, 0)]).norm() < 1e-14);
    }

    #[test]
    fn positions_are_prefix_sums() {
        let t = BlockTridiagonal::from_scalars(&[2.0, 2.0], &[1.0]).unwrap();
        let x = extract(&t).unwrap().positions();
        assert!(close(x[0], 0.5) && close(x[1], 2.0 / 3.0));
    }

    #[test]
    fn new_rejects_non_identity_first_kappa() {
        let r = StieltjesParams::new(vec![DenseBlock::scalar(0.5)], vec![DenseBlock::scalar(2.0)]);
        assert!(matches!(r, Err(StieltjesError::Linalg(LinalgError::Shape(_)))));
    }
}
