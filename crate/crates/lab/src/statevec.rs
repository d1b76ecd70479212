//! Multipartite pure and mixed states: construction, partial trace, purity,
//! Haar-random sampling, and the two imperfect-preparation noise families.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::tensor;

/// Normalization tolerance: inputs farther than this from unit norm are
/// renormalized and flagged.
pub const NORM_TOL: f64 = 1e-12;
/// Hermiticity and trace tolerance for density-matrix validation.
pub const DM_TOL: f64 = 1e-12;
/// Eigenvalues of a density matrix may dip this far below zero before the
/// matrix is rejected.
pub const DM_EIG_TOL: f64 = -1e-10;
/// Full spectral positivity is checked up to this dimension. Above it the
/// only in-crate construction path is the partial trace, which is a Gram
/// matrix and positive by construction.
const DM_EIG_CHECK_MAX_DIM: usize = 256;

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::BadDims("no sites".into()));
    }
    if let Some(&d) = dims.iter().find(|&&d| d < 2) {
        return Err(Error::BadDims(format!("site dimension {d} < 2")));
    }
    let total: usize = dims.iter().product();
    if total > 1 << 20 {
        return Err(Error::SizeLimit {
            dim: total,
            limit: 1 << 20,
        });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// SiteSubset
// ---------------------------------------------------------------------------

/// A nonempty proper subset of the sites `0..n_sites`, identifying one side
/// of a bipartition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SiteSubset {
    mask: u32,
    n_sites: usize,
}

impl SiteSubset {
    pub fn new(n_sites: usize, sites: &[usize]) -> Result<Self> {
        let mut mask = 0u32;
        for &s in sites {
            if s >= n_sites {
                return Err(Error::BadSubset { n_sites });
            }
            mask |= 1 << s;
        }
        Self::from_mask(n_sites, mask)
    }

    pub fn from_mask(n_sites: usize, mask: u32) -> Result<Self> {
        if n_sites < 2 || n_sites > 32 {
            return Err(Error::BadSubset { n_sites });
        }
        let full = (1u32 << n_sites) - 1;
        if mask == 0 || mask & !full != 0 || mask == full {
            return Err(Error::BadSubset { n_sites });
        }
        Ok(SiteSubset { mask, n_sites })
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn contains(&self, site: usize) -> bool {
        site < self.n_sites && self.mask >> site & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: 1 <= |mask| <= N-1
    }

    /// Member sites in increasing order.
    pub fn sites(&self) -> Vec<usize> {
        (0..self.n_sites).filter(|&k| self.contains(k)).collect()
    }

    pub fn complement(&self) -> SiteSubset {
        let full = (1u32 << self.n_sites) - 1;
        SiteSubset {
            mask: full & !self.mask,
            n_sites: self.n_sites,
        }
    }
}

// ---------------------------------------------------------------------------
// PureState
// ---------------------------------------------------------------------------

/// A normalized pure state over a multi-site Hilbert space with explicit
/// per-site dimensions. Amplitudes are basis-ordered with the last site
/// varying fastest.
#[derive(Debug, Clone)]
pub struct PureState {
    dims: Vec<usize>,
    amps: DVector<Complex64>,
    /// Norm of the raw input before normalization.
    input_norm: f64,
}

/// Equality is on dims and amplitudes; input-norm bookkeeping is ignored.
impl PartialEq for PureState {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.amps == other.amps
    }
}

impl PureState {
    /// Build a state from raw amplitudes, normalizing if needed. Inputs
    /// already at unit norm (within float noise) are kept bit-exact so that
    /// serialization round-trips and exact phase rotations stay exact.
    pub fn new(dims: Vec<usize>, amps: Vec<Complex64>) -> Result<Self> {
        validate_dims(&dims)?;
        let expected: usize = dims.iter().product();
        if amps.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: amps.len(),
            });
        }
        let mut v = DVector::from_vec(amps);
        let norm_sq: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let norm = norm_sq.sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        if (norm_sq - 1.0).abs() > 1e-13 {
            v /= Complex64::new(norm, 0.0);
        }
        Ok(PureState {
            dims,
            amps: v,
            input_norm: norm,
        })
    }

    /// Haar-random state: normalized vector of iid standard complex
    /// Gaussians, deterministic per seed.
    pub fn random_haar(dims: &[usize], seed: u64) -> Result<Self> {
        validate_dims(dims)?;
        let total: usize = dims.iter().product();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps: Vec<Complex64> = (0..total)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        PureState::new(dims.to_vec(), amps)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_sites(&self) -> usize {
        self.dims.len()
    }

    pub fn total_dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &DVector<Complex64> {
        &self.amps
    }

    pub fn amp(&self, idx: usize) -> Complex64 {
        self.amps[idx]
    }

    /// Whether `new` had to rescale the input to unit norm.
    pub fn was_renormalized(&self) -> bool {
        (self.input_norm - 1.0).abs() > NORM_TOL
    }

    /// Norm of the amplitudes as supplied, before normalization.
    pub fn input_norm(&self) -> f64 {
        self.input_norm
    }

    pub fn inner(&self, other: &PureState) -> Result<Complex64> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                expected: self.total_dim(),
                got: other.total_dim(),
            });
        }
        Ok(self.amps.dotc(&other.amps))
    }

    /// Reduced density matrix on the kept sites.
    pub fn partial_trace(&self, keep: &SiteSubset) -> Result<DensityMatrix> {
        if keep.n_sites() != self.n_sites() {
            return Err(Error::BadSubset {
                n_sites: self.n_sites(),
            });
        }
        let a = self.bipartition_matrix(keep);
        let rho = &a * a.adjoint();
        DensityMatrix::from_matrix(rho)
    }

    /// Reshape amplitudes into a matrix with the subset's sites as rows and
    /// the complement as columns, both in increasing site order.
    pub(crate) fn bipartition_matrix(&self, rows: &SiteSubset) -> DMatrix<Complex64> {
        let dims = &self.dims;
        let row_sites = rows.sites();
        let col_sites = rows.complement().sites();
        let rdim: usize = row_sites.iter().map(|&k| dims[k]).product();
        let cdim: usize = col_sites.iter().map(|&k| dims[k]).product();
        let mut m = DMatrix::<Complex64>::zeros(rdim, cdim);
        for idx in 0..self.amps.len() {
            let sites = tensor::unravel(idx, dims);
            let mut r = 0usize;
            for &k in &row_sites {
                r = r * dims[k] + sites[k];
            }
            let mut c = 0usize;
            for &k in &col_sites {
                c = c * dims[k] + sites[k];
            }
            m[(r, c)] = self.amps[idx];
        }
        m
    }

    /// `|psi><psi|` as a density matrix.
    pub fn density_matrix(&self) -> DensityMatrix {
        let rho = &self.amps * self.amps.adjoint();
        DensityMatrix::from_matrix(rho).expect("pure projector is a valid density matrix")
    }

    /// Imperfect-preparation deviation `sqrt(1-eps)|psi> + sqrt(eps)|phi>`,
    /// renormalized. The pre-normalization norm and the overlap `<psi|phi>`
    /// are reported so callers can flag non-orthogonal deviations.
    pub fn deviation(&self, phi: &PureState, eps: f64) -> Result<Deviation> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::EpsOutOfRange(eps));
        }
        if self.dims != phi.dims {
            return Err(Error::DimensionMismatch {
                expected: self.total_dim(),
                got: phi.total_dim(),
            });
        }
        let overlap = self.inner(phi)?;
        let raw = self.amps.clone() * Complex64::new((1.0 - eps).sqrt(), 0.0)
            + phi.amps.clone() * Complex64::new(eps.sqrt(), 0.0);
        let pre_norm = raw.norm();
        if pre_norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let state = PureState::new(self.dims.clone(), raw.iter().copied().collect())?;
        Ok(Deviation {
            state,
            pre_normalization_norm: pre_norm,
            overlap,
        })
    }
}

/// Result of [`PureState::deviation`].
#[derive(Debug, Clone)]
pub struct Deviation {
    pub state: PureState,
    /// Norm of `sqrt(1-eps)|psi> + sqrt(eps)|phi>` before renormalization;
    /// differs from 1 exactly when `<psi|phi> != 0`.
    pub pre_normalization_norm: f64,
    pub overlap: Complex64,
}

impl Deviation {
    pub fn is_overlapping(&self) -> bool {
        self.overlap.norm() > 1e-12
    }
}

// ---------------------------------------------------------------------------
// DensityMatrix
// ---------------------------------------------------------------------------

/// Hermitian, unit-trace, positive-semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validate and wrap a matrix. Hermiticity and trace are always checked;
    /// the spectrum is checked for dimensions up to 256.
    pub fn from_matrix(entries: DMatrix<Complex64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::InvalidDensityMatrix("not square".into()));
        }
        let mut herm_err: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                herm_err = herm_err.max((entries[(i, j)] - entries[(j, i)].conj()).norm());
            }
        }
        if herm_err > DM_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "Hermiticity violated by {herm_err:.3e}"
            )));
        }
        let tr: Complex64 = (0..n).map(|i| entries[(i, i)]).sum();
        if (tr.re - 1.0).abs() > DM_TOL || tr.im.abs() > DM_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace = {} + {}i, expected 1",
                tr.re, tr.im
            )));
        }
        if n <= DM_EIG_CHECK_MAX_DIM {
            let eig = entries.clone().symmetric_eigenvalues();
            if let Some(min) = eig.iter().cloned().reduce(f64::min) {
                if min < DM_EIG_TOL {
                    return Err(Error::InvalidDensityMatrix(format!(
                        "negative eigenvalue {min:.3e}"
                    )));
                }
            }
        }
        Ok(DensityMatrix { entries })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[(i, j)]
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let entries = DMatrix::<Complex64>::identity(dim, dim)
            * Complex64::new(1.0 / dim as f64, 0.0);
        DensityMatrix { entries }
    }

    /// `tr(rho^2)`, in (0, 1].
    pub fn purity(&self) -> f64 {
        // tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = self
            .entries
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }
}

/// The two-crystal down-conversion noise family: for the ideal state
/// `alpha|00> + beta|11>`, phase coherence between the two components is
/// reduced by `1 - eps`:
/// `rho = (1-eps)|psi><psi| + eps(|alpha|^2 |00><00| + |beta|^2 |11><11|)`.
///
/// H/V polarization is mapped to computational 0/1.
pub fn coherence_loss_mixture(alpha: Complex64, beta: Complex64, eps: f64) -> Result<DensityMatrix> {
    let norm = alpha.norm_sqr() + beta.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::EpsOutOfRange(eps));
    }
    let mut m = DMatrix::<Complex64>::zeros(4, 4);
    m[(0, 0)] = Complex64::new(alpha.norm_sqr(), 0.0);
    m[(3, 3)] = Complex64::new(beta.norm_sqr(), 0.0);
    m[(0, 3)] = alpha * beta.conj() * (1.0 - eps);
    m[(3, 0)] = m[(0, 3)].conj();
    DensityMatrix::from_matrix(m)
}

// ---------------------------------------------------------------------------
// State families
// ---------------------------------------------------------------------------

pub mod families {
    use super::*;

    /// `(|00> + |11>)/sqrt(2)`.
    pub fn bell() -> PureState {
        ghz(2, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)).unwrap()
    }

    /// Generalized GHZ state `a0|0..0> + a1|1..1>` on `n` qubits.
    pub fn ghz(n: usize, a0: Complex64, a1: Complex64) -> Result<PureState> {
        if n < 2 {
            return Err(Error::SingleSite);
        }
        let total = 1usize << n;
        let mut amps = vec![Complex64::new(0.0, 0.0); total];
        amps[0] = a0;
        amps[total - 1] = a1;
        PureState::new(vec![2; n], amps)
    }

    /// Generalized W state `a_0|0..01> + a_1|0..10> + .. + a_{n-1}|10..0>`.
    pub fn w(weights: &[Complex64]) -> Result<PureState> {
        let n = weights.len();
        if n < 2 {
            return Err(Error::SingleSite);
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        for (k, &a) in weights.iter().enumerate() {
            amps[1 << k] = a;
        }
        PureState::new(vec![2; n], amps)
    }

    /// Two-qubit Schmidt state `a0|00> + a1|11>`.
    pub fn schmidt(a0: Complex64, a1: Complex64) -> Result<PureState> {
        ghz(2, a0, a1)
    }

    /// Computational basis product state `|0...0>` for arbitrary dims.
    pub fn product_zero(dims: &[usize]) -> Result<PureState> {
        let total: usize = dims.iter().product();
        let mut amps = vec![Complex64::new(0.0, 0.0); total];
        amps[0] = Complex64::new(1.0, 0.0);
        PureState::new(dims.to_vec(), amps)
    }

    /// `|+>^n`: every amplitude equal.
    pub fn plus_n(n: usize) -> Result<PureState> {
        let total = 1usize << n;
        let amps = vec![Complex64::new(1.0, 0.0); total];
        PureState::new(vec![2; n], amps)
    }

    /// Computational basis state with the given flat index.
    pub fn basis_state(dims: &[usize], index: usize) -> Result<PureState> {
        let total: usize = dims.iter().product();
        if index >= total {
            return Err(Error::IndexOutOfRange {
                index,
                dim: total,
            });
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); total];
        amps[index] = Complex64::new(1.0, 0.0);
        PureState::new(dims.to_vec(), amps)
    }
}

// ---------------------------------------------------------------------------
// JSON: {"dims":[2,2],"amps":[[re,im],...]}; density matrices row-major as
// nested [re,im] pairs.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct StateDto {
    dims: Vec<usize>,
    amps: Vec<[f64; 2]>,
}

impl Serialize for PureState {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StateDto {
            dims: self.dims.clone(),
            amps: self.amps.iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PureState {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let dto = StateDto::deserialize(d)?;
        let amps = dto
            .amps
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect();
        PureState::new(dto.dims, amps).map_err(D::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct DensityDto {
    dim: usize,
    entries: Vec<Vec<[f64; 2]>>,
}

impl Serialize for DensityMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.dim();
        let entries = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let z = self.entries[(i, j)];
                        [z.re, z.im]
                    })
                    .collect()
            })
            .collect();
        DensityDto { dim: n, entries }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DensityMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let dto = DensityDto::deserialize(d)?;
        let n = dto.dim;
        if dto.entries.len() != n || dto.entries.iter().any(|r| r.len() != n) {
            return Err(D::Error::custom("density matrix shape mismatch"));
        }
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let [re, im] = dto.entries[i][j];
                m[(i, j)] = Complex64::new(re, im);
            }
        }
        DensityMatrix::from_matrix(m).map_err(D::Error::custom)
    }
}
