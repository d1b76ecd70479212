//! Per-site Hermitian operator bases (Pauli for qubits, SU(M) generators
//! otherwise), tensor-product observables, exact expectation values, and
//! trace-inner-product decomposition of arbitrary operators.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::statevec::{DensityMatrix, PureState};
use crate::tensor;

/// Largest total dimension for which tensor-product operators are
/// materialized as dense matrices. Expectation values above this are taken
/// through factored per-site action instead.
pub const DENSE_OPERATOR_LIMIT: usize = 1 << 12;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// ---------------------------------------------------------------------------
// GeneratorBasis
// ---------------------------------------------------------------------------

/// Ordered Hermitian operator basis for one site: index 0 is the identity,
/// the rest are trace-orthogonal generators.
///
/// For dimension 2 this is the Pauli list (sigma0, sigma1, sigma2, sigma3)
/// with sigma2 = ((0, i), (-i, 0)); for dimension M it is the SU(M) list:
/// identity, the M-1 diagonal generators, the symmetric off-diagonal
/// generators for 0 <= j < k <= M-1 in lexicographic (j, k) order, then the
/// antisymmetric ones in the same order.
///
/// The generators are not norm-uniform: `tr(g_a^2)` varies with `a`, so all
/// decompositions divide by the per-generator norm.
#[derive(Debug, Clone)]
pub struct GeneratorBasis {
    dim: usize,
    ops: Vec<DMatrix<Complex64>>,
    norms_sq: Vec<f64>,
}

impl GeneratorBasis {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::BadDims(format!("site dimension {dim} < 2")));
        }
        let ops = if dim == 2 { pauli_ops() } else { su_m_ops(dim) };
        let norms_sq = ops
            .iter()
            .map(|g| (g * g).trace().re)
            .collect();
        Ok(GeneratorBasis { dim, ops, norms_sq })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of generators, `dim^2`.
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn ops(&self) -> &[DMatrix<Complex64>] {
        &self.ops
    }

    pub fn op(&self, a: usize) -> Result<&DMatrix<Complex64>> {
        self.ops.get(a).ok_or(Error::GeneratorOutOfRange {
            index: a,
            dim: self.dim,
        })
    }

    /// `tr(g_a^2)` for generator `a`.
    pub fn norm_sq(&self, a: usize) -> f64 {
        self.norms_sq[a]
    }

    /// Complex coefficients `c` with `sum_a c_a g_a = |j><k|`, exact by
    /// trace orthogonality: `c_a = <k| g_a |j> / tr(g_a^2)`. All
    /// coefficients are real when `j == k`.
    pub fn dyad_expansion(&self, j: usize, k: usize) -> Result<Vec<Complex64>> {
        if j >= self.dim {
            return Err(Error::IndexOutOfRange {
                index: j,
                dim: self.dim,
            });
        }
        if k >= self.dim {
            return Err(Error::IndexOutOfRange {
                index: k,
                dim: self.dim,
            });
        }
        Ok((0..self.ops.len())
            .map(|a| self.ops[a][(k, j)] / self.norms_sq[a])
            .collect())
    }

    /// Like [`Self::dyad_expansion`] but skipping zero coefficients:
    /// `(generator index, coefficient)` pairs. Diagonal dyads touch only the
    /// identity and diagonal generators; off-diagonal dyads touch exactly one
    /// symmetric/antisymmetric pair.
    pub fn dyad_expansion_sparse(&self, j: usize, k: usize) -> Result<Vec<(usize, Complex64)>> {
        Ok(self
            .dyad_expansion(j, k)?
            .into_iter()
            .enumerate()
            .filter(|(_, z)| z.norm_sqr() > 0.0)
            .collect())
    }
}

fn pauli_ops() -> Vec<DMatrix<Complex64>> {
    vec![
        DMatrix::identity(2, 2),
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
        DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., 1.), c(0., -1.), c(0., 0.)]),
        DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
    ]
}

/// Standard-convention sigma2 = ((0, -i), (i, 0)), the negative of the
/// printed one. Squared expectation values agree between the conventions;
/// the audit module checks this.
pub fn sigma2_standard() -> DMatrix<Complex64> {
    DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

fn su_m_ops(m: usize) -> Vec<DMatrix<Complex64>> {
    let mut ops = Vec::with_capacity(m * m);
    ops.push(DMatrix::identity(m, m));
    // diagonal: lambda_s = sum_{j<s} |j><j| - s|s><s|, 1 <= s <= M-1
    for s in 1..m {
        let mut g = DMatrix::<Complex64>::zeros(m, m);
        for j in 0..s {
            g[(j, j)] = c(1., 0.);
        }
        g[(s, s)] = c(-(s as f64), 0.);
        ops.push(g);
    }
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|j| ((j + 1)..m).map(move |k| (j, k)))
        .collect();
    // symmetric: |j><k| + |k><j|
    for &(j, k) in &pairs {
        let mut g = DMatrix::<Complex64>::zeros(m, m);
        g[(j, k)] = c(1., 0.);
        g[(k, j)] = c(1., 0.);
        ops.push(g);
    }
    // antisymmetric: -i(|j><k| - |k><j|)
    for &(j, k) in &pairs {
        let mut g = DMatrix::<Complex64>::zeros(m, m);
        g[(j, k)] = c(0., -1.);
        g[(k, j)] = c(0., 1.);
        ops.push(g);
    }
    ops
}

/// Shared per-dimension basis cache; bases are immutable once built.
pub fn basis_for(dim: usize) -> Result<Arc<GeneratorBasis>> {
    static CACHE: OnceLock<Mutex<BTreeMap<usize, Arc<GeneratorBasis>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    let mut guard = cache.lock().unwrap();
    if let Some(b) = guard.get(&dim) {
        return Ok(Arc::clone(b));
    }
    let b = Arc::new(GeneratorBasis::new(dim)?);
    guard.insert(dim, Arc::clone(&b));
    Ok(b)
}

// ---------------------------------------------------------------------------
// ObservableLabel
// ---------------------------------------------------------------------------

/// A tensor-product observable named by one generator index per site.
/// Serialized as a JSON integer array, e.g. `[3,3,1]`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservableLabel(pub Vec<usize>);

impl ObservableLabel {
    pub fn new(indices: Vec<usize>) -> Self {
        ObservableLabel(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn n_sites(&self) -> usize {
        self.0.len()
    }

    /// All-identity label for `n` sites.
    pub fn identity(n: usize) -> Self {
        ObservableLabel(vec![0; n])
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&i| i == 0)
    }

    pub fn validate(&self, dims: &[usize]) -> Result<()> {
        if self.0.len() != dims.len() {
            return Err(Error::DimensionMismatch {
                expected: dims.len(),
                got: self.0.len(),
            });
        }
        for (k, (&idx, &d)) in self.0.iter().zip(dims).enumerate() {
            if idx >= d * d {
                let _ = k;
                return Err(Error::GeneratorOutOfRange { index: idx, dim: d });
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for ObservableLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, idx) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{idx}")?;
        }
        write!(f, "]")
    }
}

/// Kronecker product of the per-site generators, in site order.
pub fn label_operator(label: &ObservableLabel, dims: &[usize]) -> Result<DMatrix<Complex64>> {
    label.validate(dims)?;
    let total: usize = dims.iter().product();
    if total > DENSE_OPERATOR_LIMIT {
        return Err(Error::SizeLimit {
            dim: total,
            limit: DENSE_OPERATOR_LIMIT,
        });
    }
    let bases: Vec<Arc<GeneratorBasis>> =
        dims.iter().map(|&d| basis_for(d)).collect::<Result<_>>()?;
    let ops: Vec<&DMatrix<Complex64>> = label
        .indices()
        .iter()
        .zip(bases.iter())
        .map(|(&i, b)| b.op(i))
        .collect::<Result<_>>()?;
    Ok(tensor::kron_all(&ops))
}

/// `tr(g_L^2)` for the tensor-product observable: product of the per-site
/// generator norms.
pub fn label_norm_sq(label: &ObservableLabel, dims: &[usize]) -> Result<f64> {
    label.validate(dims)?;
    let mut n = 1.0;
    for (&idx, &d) in label.indices().iter().zip(dims) {
        n *= basis_for(d)?.norm_sq(idx);
    }
    Ok(n)
}

/// Exact expectation value `<psi| g_L |psi>`, evaluated by factored per-site
/// action (never materializing the Kronecker product).
pub fn expectation(state: &PureState, label: &ObservableLabel) -> Result<f64> {
    label.validate(state.dims())?;
    let mut v: DVector<Complex64> = state.amps().clone();
    for (site, &idx) in label.indices().iter().enumerate() {
        if idx == 0 {
            continue;
        }
        let basis = basis_for(state.dims()[site])?;
        tensor::apply_site_op(&mut v, state.dims(), site, basis.op(idx)?);
    }
    let ip = state.amps().dotc(&v);
    debug_assert!(ip.im.abs() < 1e-12, "non-real expectation {ip}");
    Ok(ip.re)
}

/// `tr(rho g_L)` for a mixed state; `dims` gives the site structure of rho.
pub fn expectation_mixed(
    rho: &DensityMatrix,
    dims: &[usize],
    label: &ObservableLabel,
) -> Result<f64> {
    label.validate(dims)?;
    let total: usize = dims.iter().product();
    if rho.dim() != total {
        return Err(Error::DimensionMismatch {
            expected: total,
            got: rho.dim(),
        });
    }
    let op = label_operator(label, dims)?;
    // tr(rho O) = sum_ij rho_ij O_ji
    let mut tr = Complex64::new(0.0, 0.0);
    for i in 0..total {
        for j in 0..total {
            tr += rho.entry(i, j) * op[(j, i)];
        }
    }
    debug_assert!(tr.im.abs() < 1e-12, "non-real expectation {tr}");
    Ok(tr.re)
}

/// Expand an arbitrary square operator over the tensor-product generator
/// basis: `c_L = tr(op g_L) / tr(g_L^2)`. The coefficients reconstruct `op`
/// exactly; they are all real iff `op` is Hermitian.
pub fn hermitian_decompose(
    op: &DMatrix<Complex64>,
    dims: &[usize],
) -> Result<BTreeMap<ObservableLabel, Complex64>> {
    let total: usize = dims.iter().product();
    if op.nrows() != total || op.ncols() != total {
        return Err(Error::DimensionMismatch {
            expected: total,
            got: op.nrows(),
        });
    }
    let label_dims: Vec<usize> = dims.iter().map(|&d| d * d).collect();
    let n_labels: usize = label_dims.iter().product();
    let mut out = BTreeMap::new();
    for flat in 0..n_labels {
        let label = ObservableLabel::new(tensor::unravel(flat, &label_dims));
        let g = label_operator(&label, dims)?;
        let mut tr = Complex64::new(0.0, 0.0);
        for i in 0..total {
            for j in 0..total {
                tr += op[(i, j)] * g[(j, i)];
            }
        }
        let coeff = tr / label_norm_sq(&label, dims)?;
        if coeff.norm() > 0.0 {
            out.insert(label, coeff);
        }
    }
    Ok(out)
}

/// Rebuild the dense operator from a coefficient map.
pub fn reconstruct(
    coeffs: &BTreeMap<ObservableLabel, Complex64>,
    dims: &[usize],
) -> Result<DMatrix<Complex64>> {
    let total: usize = dims.iter().product();
    let mut out = DMatrix::<Complex64>::zeros(total, total);
    for (label, &coeff) in coeffs {
        out += label_operator(label, dims)? * coeff;
    }
    Ok(out)
}
