//! Test-problem generators.
//!
//! * [`build_halfline_1d`]: `tridiag(-1, 2, -1)` with `B = e_1`, whose transfer
//!   function converges to [`halfline_exact_f`] as `n` grows.
//! * [`build_diffusion_2d`]: `sigma^{-1/2} (-Delta) sigma^{-1/2}` on a tensor grid with
//!   geometrically graded exterior steps.
//! * [`build_maxwell_yee_3d`]: the edge curl-curl operator on a Yee grid.

mod grid;
mod maxwell;
mod sigma;

pub use grid::{exterior_extent, optimal_factor, optimal_steps, Axis, GridSpec};
pub use maxwell::{build_maxwell_yee_3d, LoopSource, YeeGrid};
pub use sigma::{SigmaBox, SigmaField};

use crate::linalg::{qr_tall, BlockVector, LinalgError, SparseSymOperator};
use num_complex::Complex64;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("shift {0} lies on the branch cut [-4, 0]")]
    OnBranchCut(Complex64),
    #[error("invalid sigma field: {0}")]
    Sigma(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Operator, orthonormal right-hand side block and free-form metadata.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub operator: SparseSymOperator,
    pub rhs: BlockVector,
    pub meta: BTreeMap<String, String>,
}

impl ProblemInstance {
    pub fn n(&self) -> usize {
        self.operator.n()
    }

    pub fn p(&self) -> usize {
        self.rhs.p()
    }
}

/// `tridiag(-1, 2, -1)` of order `n` with `B = e_1`.
pub fn build_halfline_1d(n: usize) -> Result<ProblemInstance, ProblemError> {
    if n < 2 {
        return Err(ProblemError::Geometry(format!("half-line model needs n >= 2, got {n}")));
    }
    let mut t = Vec::with_capacity(2 * n - 1);
    for i in 0..n {
        t.push((i, i, 2.0));
        if i > 0 {
            t.push((i, i - 1, -1.0));
        }
    }
    let mut meta = BTreeMap::new();
    meta.insert("problem".into(), "halfline".into());
    meta.insert("n".into(), n.to_string());
    Ok(ProblemInstance {
        operator: SparseSymOperator::from_triplets(n, &t)?,
        rhs: BlockVector::identity(n, 1),
        meta,
    })
}

/// Limit `n -> inf` of `e_1^T (A + sI)^{-1} e_1` for the half-line model: the root of
/// `F^2 - (s + 2) F + 1 = 0` with `|F| < 1`.
pub fn halfline_exact_f(s: Complex64) -> Result<Complex64, ProblemError> {
    if s.im == 0.0 && (-4.0..=0.0).contains(&s.re) {
        return Err(ProblemError::OnBranchCut(s));
    }
    let b = s + 2.0;
    let root = (b * b - 4.0).sqrt();
    // the roots multiply to 1; take the large one without cancellation and invert it
    let (f1, f2) = ((b - root) / 2.0, (b + root) / 2.0);
    Ok(1.0 / if f1.norm() >= f2.norm() { f1 } else { f2 })
}

/// Dirichlet Laplacian `sigma^{-1/2} (-Delta) sigma^{-1/2}` on the tensor grid of `spec`
/// (two interior counts), with one `B` column per transducer node.
///
/// Transducers are interior node indices `(ix, iy)` counted from the corner of the
/// uniform region.
pub fn build_diffusion_2d(
    spec: &GridSpec,
    sigma: &SigmaField,
    transducers: &[[usize; 2]],
) -> Result<ProblemInstance, ProblemError> {
    if spec.counts.len() != 2 {
        return Err(ProblemError::Geometry("diffusion2d needs two interior counts".into()));
    }
    if transducers.is_empty() {
        return Err(ProblemError::Geometry("at least one transducer is required".into()));
    }
    let ax = Axis::new(spec.counts[0], spec);
    let ay = Axis::new(spec.counts[1], spec);
    let (nx, ny) = (ax.n_unknowns(), ay.n_unknowns());
    let n = nx * ny;
    let (px, py) = (ax.positions(), ay.positions());
    let idx = |i: usize, j: usize| j * nx + i;

    let mut scale = vec![0.0; n];
    for j in 0..ny {
        for i in 0..nx {
            let sv = sigma.at(&[px[i], py[j]]);
            if !(sv > 0.0) {
                return Err(ProblemError::Sigma(format!("sigma must be positive, got {sv} at ({}, {})", px[i], py[j])));
            }
            scale[idx(i, j)] = sv.powf(-0.5);
        }
    }

    let (lx, ly) = (ax.scaled_laplacian(), ay.scaled_laplacian());
    let mut trip = Vec::with_capacity(3 * n);
    for j in 0..ny {
        for i in 0..nx {
            let k = idx(i, j);
            trip.push((k, k, scale[k] * scale[k] * (lx.0[i] + ly.0[j])));
            if i > 0 {
                let l = idx(i - 1, j);
                trip.push((k, l, scale[k] * scale[l] * lx.1[i - 1]));
            }
            if j > 0 {
                let l = idx(i, j - 1);
                trip.push((k, l, scale[k] * scale[l] * ly.1[j - 1]));
            }
        }
    }
    let operator = SparseSymOperator::from_triplets(n, &trip)?;

    let mut cols = Vec::with_capacity(transducers.len());
    for t in transducers {
        if t[0] >= spec.counts[0] || t[1] >= spec.counts[1] {
            return Err(ProblemError::Geometry(format!(
                "transducer ({}, {}) outside the {}x{} interior",
                t[0], t[1], spec.counts[0], spec.counts[1]
            )));
        }
        let (i, j) = (t[0] + spec.n_opt, t[1] + spec.n_opt);
        let k = idx(i, j);
        let mut c = vec![0.0; n];
        c[k] = scale[k] / (ax.dual(i) * ay.dual(j)).sqrt();
        cols.push(c);
    }
    let (rhs, _) = qr_tall(&BlockVector::from_columns(&cols), crate::linalg::DEFAULT_DEFLATION_TOL)
        .map_err(|_| ProblemError::Geometry("transducers must be distinct nodes".into()))?;

    let mut meta = BTreeMap::new();
    meta.insert("problem".into(), "diffusion2d".into());
    meta.insert("nx".into(), spec.counts[0].to_string());
    meta.insert("ny".into(), spec.counts[1].to_string());
    meta.insert("nopt".into(), spec.n_opt.to_string());
    meta.insert("h0".into(), format!("{:e}", spec.h0));
    meta.insert("factor".into(), format!("{:.17e}", spec.factor));
    meta.insert("sigma".into(), sigma.to_string());
    meta.insert(
        "transducers".into(),
        transducers.iter().map(|t| format!("{}:{}", t[0], t[1])).collect::<Vec<_>>().join(","),
    );
    Ok(ProblemInstance { operator, rhs, meta })
}
