//! Convergence studies: one Lanczos run, checkpoints at chosen step counts, every
//! requested rule at every shift.

use crate::knselect::{select_matching, select_spectral, ParamSmoother, SelectError, SelectionConfig, SelectionResult};
use crate::lanczos::{block_lanczos, LanczosDecomposition, LanczosError, LanczosOptions};
use crate::linalg::{BlockTridiagonal, BlockVector, DenseBlock, SparseSymOperator};
use crate::par;
use crate::quadrature::{eval_gauss, eval_rule, KNParams, QuadratureError, Rule, TransferSample};
use crate::stieltjes::{extract, StieltjesError, StieltjesParams};
use num_complex::Complex64;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum SweepError {
    #[error(transparent)]
    Lanczos(#[from] LanczosError),
    #[error(transparent)]
    Stieltjes(#[from] StieltjesError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
    #[error("parameter selection at m = {m}: {source}")]
    Select { m: usize, source: SelectError },
    #[error("{0}")]
    Config(String),
}

/// Block Lanczos that accepts deflation: the decomposition up to the last
/// full-rank step is returned instead of an error.
pub fn decompose(
    op: &SparseSymOperator,
    b: &BlockVector,
    m: usize,
    opts: &LanczosOptions,
) -> Result<LanczosDecomposition, SweepError> {
    match block_lanczos(op, b, m, opts) {
        Ok(d) => Ok(d),
        Err(LanczosError::DeflationDetected { partial, .. }) => Ok(*partial),
        Err(e) => Err(e.into()),
    }
}

/// `m_j = stride, 2 stride, ...` up to `m`, always ending with `m`.
pub fn checkpoint_steps(m: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut steps: Vec<usize> = (1..=m / stride).map(|k| k * stride).collect();
    if steps.last() != Some(&m) {
        steps.push(m);
    }
    steps
}

/// Everything the rules need at one step count.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub m: usize,
    pub tridiag: BlockTridiagonal,
    pub params: StieltjesParams,
    pub beta_next: DenseBlock<f64>,
    pub spectral: Option<SelectionResult>,
    pub matching: Option<SelectionResult>,
}

impl Checkpoint {
    /// Leading `k` steps of `dec`, with `beta_{k+1}` taken from the full matrix.
    pub fn from_decomposition(dec: &LanczosDecomposition, k: usize) -> Result<Self, SweepError> {
        if k == 0 || k > dec.m() {
            return Err(SweepError::Config(format!("checkpoint {k} outside 1..={}", dec.m())));
        }
        let tridiag = dec.tridiag.truncated(k);
        let beta_next = if k < dec.m() { dec.tridiag.beta(k + 1).clone() } else { dec.beta_next.clone() };
        Self::new(tridiag, beta_next)
    }

    pub fn new(tridiag: BlockTridiagonal, beta_next: DenseBlock<f64>) -> Result<Self, SweepError> {
        let params = extract(&tridiag)?;
        Ok(Self {
            m: tridiag.m(),
            tridiag,
            params,
            beta_next,
            spectral: None,
            matching: None,
        })
    }

    /// `beta_{m+1} = 0`: the Krylov space is invariant and the Gauß value is exact.
    pub fn is_exact(&self) -> bool {
        self.beta_next.max_abs() == 0.0
    }

    /// Runs the selectors that `rules` need.
    pub fn select(&mut self, rules: &[Rule], cfg: &SelectionConfig) -> Result<(), SweepError> {
        if self.is_exact() {
            return Ok(());
        }
        let m = self.m;
        let wrap = |source| SweepError::Select { m, source };
        if rules.contains(&Rule::KnSpectral) {
            self.spectral = Some(select_spectral(&self.tridiag, &self.params, &self.beta_next, cfg).map_err(wrap)?);
        }
        if rules.contains(&Rule::KnMatching) {
            self.matching = Some(select_matching(&self.tridiag, &self.params, &self.beta_next, cfg).map_err(wrap)?);
        }
        Ok(())
    }

    pub fn selection(&self, rule: Rule) -> Option<&SelectionResult> {
        match rule {
            Rule::KnSpectral => self.spectral.as_ref(),
            Rule::KnMatching => self.matching.as_ref(),
            _ => None,
        }
    }

    /// One rule at one shift. On an invariant subspace every rule returns the Gauß value.
    pub fn eval(&self, rule: Rule, s: Complex64) -> Result<DenseBlock<Complex64>, QuadratureError> {
        if self.is_exact() {
            return eval_gauss(&self.tridiag, s);
        }
        let kn = self.selection(rule).map(|r| &r.kn);
        if rule.is_kn() && kn.is_none() {
            return Err(QuadratureError::InvalidParams(format!("{rule} was not selected at this checkpoint")));
        }
        eval_rule(rule, &self.tridiag, &self.params, s, kn)
    }
}

/// One output record.
#[derive(Clone, Debug)]
pub struct SweepRow {
    pub m: usize,
    pub sample: TransferSample,
    pub kn: Option<KNParams>,
    pub omega_support_d: Option<f64>,
    pub wall_ms: f64,
}

/// All `rules` at all `shifts` of one checkpoint, rule-major, shifts evaluated
/// concurrently. `reference[j]` belongs to `shifts[j]`.
pub fn evaluate_checkpoint(
    cp: &Checkpoint,
    rules: &[Rule],
    shifts: &[Complex64],
    reference: Option<&[DenseBlock<Complex64>]>,
) -> Result<Vec<SweepRow>, SweepError> {
    if let Some(r) = reference {
        if r.len() != shifts.len() {
            return Err(SweepError::Config(format!("{} reference values for {} shifts", r.len(), shifts.len())));
        }
    }
    let per_shift = par::map(shifts, |&s| {
        rules
            .iter()
            .map(|&rule| {
                let t0 = Instant::now();
                let value = cp.eval(rule, s)?;
                Ok((value, t0.elapsed().as_secs_f64() * 1e3))
            })
            .collect::<Result<Vec<_>, QuadratureError>>()
    });
    let per_shift = per_shift.into_iter().collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::with_capacity(rules.len() * shifts.len());
    for (r, &rule) in rules.iter().enumerate() {
        let sel = if cp.is_exact() { None } else { cp.selection(rule) };
        for (j, &s) in shifts.iter().enumerate() {
            let (value, ms) = per_shift[j][r].clone();
            let mut sample = TransferSample::new(s, value, rule);
            if let Some(refs) = reference {
                sample = sample.with_reference(&refs[j]);
            }
            rows.push(SweepRow {
                m: cp.m,
                sample,
                kn: sel.map(|x| x.kn.clone()),
                omega_support_d: sel.map(|x| x.d_used).filter(|d| d.is_finite()),
                wall_ms: ms,
            });
        }
    }
    Ok(rows)
}

/// Options for [`run_convergence`].
#[derive(Clone, Debug)]
pub struct ConvergenceOptions {
    pub rules: Vec<Rule>,
    pub selection: SelectionConfig,
    pub lanczos: LanczosOptions,
    pub stride: usize,
    /// Share of the newest selection in the exponential smoothing of `(ln phi, sqrt varphi)`.
    pub smoothing: Option<f64>,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        Self {
            rules: Rule::ALL.to_vec(),
            selection: SelectionConfig::default(),
            lanczos: LanczosOptions::default(),
            stride: 10,
            smoothing: None,
        }
    }
}

/// Runs Lanczos to `m` once and evaluates every checkpoint, re-selecting the
/// damping pair at each. Rows are handed to `sink` checkpoint by checkpoint, so a
/// failure later on leaves the earlier rows delivered.
pub fn run_convergence(
    op: &SparseSymOperator,
    b: &BlockVector,
    m: usize,
    shifts: &[Complex64],
    reference: Option<&[DenseBlock<Complex64>]>,
    opts: &ConvergenceOptions,
    mut sink: impl FnMut(&[SweepRow]),
) -> Result<LanczosDecomposition, SweepError> {
    if opts.rules.is_empty() || shifts.is_empty() || m == 0 {
        return Err(SweepError::Config("rules, shifts and m must be nonempty".into()));
    }
    let dec = decompose(op, b, m, &opts.lanczos)?;
    let mut smooth: [Option<ParamSmoother>; 2] = [opts.smoothing.map(ParamSmoother::new), opts.smoothing.map(ParamSmoother::new)];
    for k in checkpoint_steps(dec.m(), opts.stride) {
        let mut cp = Checkpoint::from_decomposition(&dec, k)?;
        cp.select(&opts.rules, &opts.selection)?;
        for (slot, sel) in smooth.iter_mut().zip([&mut cp.spectral, &mut cp.matching]) {
            if let (Some(sm), Some(r)) = (slot.as_mut(), sel.as_mut()) {
                r.kn = sm.update(&r.kn);
            }
        }
        sink(&evaluate_checkpoint(&cp, &opts.rules, shifts, reference)?);
    }
    Ok(dec)
}

/// Log-spaced shifts `start..=stop` on the positive real or imaginary axis.
pub fn log_shifts(start: f64, stop: f64, count: usize, imaginary: bool) -> Vec<Complex64> {
    let (a, b) = (start.ln(), stop.ln());
    (0..count)
        .map(|k| {
            let x = if count == 1 { start } else { (a + (b - a) * k as f64 / (count - 1) as f64).exp() };
            if imaginary {
                Complex64::new(0.0, x)
            } else {
                Complex64::new(x, 0.0)
            }
        })
        .collect()
}
