//! Index arithmetic and per-site operator application for multi-site
//! amplitude vectors. Basis ordering: last site varies fastest.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Strides for each site: `stride[k]` is the index step of site `k`.
pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

/// Decompose a flat basis index into per-site indices.
pub(crate) fn unravel(mut idx: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize; dims.len()];
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
    out
}

/// Flatten per-site indices into a flat basis index.
pub(crate) fn ravel(sites: &[usize], dims: &[usize]) -> usize {
    let mut idx = 0usize;
    for k in 0..dims.len() {
        idx = idx * dims[k] + sites[k];
    }
    idx
}

/// Apply a single-site operator in place: `v <- (I ⊗ .. ⊗ op ⊗ .. ⊗ I) v`.
pub(crate) fn apply_site_op(
    v: &mut DVector<Complex64>,
    dims: &[usize],
    site: usize,
    op: &DMatrix<Complex64>,
) {
    let d = dims[site];
    debug_assert_eq!(op.nrows(), d);
    let stride = strides(dims)[site];
    let block = d * stride;
    let total = v.len();
    let mut scratch = vec![Complex64::new(0.0, 0.0); d];
    let mut base = 0;
    while base < total {
        for off in 0..stride {
            let start = base + off;
            for i in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for j in 0..d {
                    acc += op[(i, j)] * v[start + j * stride];
                }
                scratch[i] = acc;
            }
            for i in 0..d {
                v[start + i * stride] = scratch[i];
            }
        }
        base += block;
    }
}

/// Dense Kronecker product of a list of square operators, in site order.
pub(crate) fn kron_all(ops: &[&DMatrix<Complex64>]) -> DMatrix<Complex64> {
    let mut out = ops[0].clone();
    for op in &ops[1..] {
        out = out.kronecker(op);
    }
    out
}
