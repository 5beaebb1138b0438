//! Data-parallel helpers: rayon when the `parallel` feature is on, plain
//! iterators otherwise. Results are identical either way because every
//! reduction here is order-preserving.

/// Rows shorter than this are processed sequentially even with rayon.
#[cfg(feature = "parallel")]
const MIN_PAR_LEN: usize = 4096;

/// `f(i, &mut out[i])` for every index.
#[cfg(feature = "parallel")]
pub fn for_each_row<T: Send, F: Fn(usize, &mut T) + Sync + Send>(out: &mut [T], f: F) {
    use rayon::prelude::*;
    if out.len() < MIN_PAR_LEN {
        out.iter_mut().enumerate().for_each(|(i, v)| f(i, v));
    } else {
        out.par_iter_mut().with_min_len(1024).enumerate().for_each(|(i, v)| f(i, v));
    }
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_row<T: Send, F: Fn(usize, &mut T) + Sync + Send>(out: &mut [T], f: F) {
    out.iter_mut().enumerate().for_each(|(i, v)| f(i, v));
}

/// Order-preserving map over independent work items (shifts, quadrature nodes,
/// random instances).
#[cfg(feature = "parallel")]
pub fn map<I: Sync, R: Send, F: Fn(&I) -> R + Sync + Send>(items: &[I], f: F) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map<I: Sync, R: Send, F: Fn(&I) -> R + Sync + Send>(items: &[I], f: F) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Whether this build evaluates work items concurrently.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
