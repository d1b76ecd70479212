//! Reference concurrence engines: the purity form (the canonical
//! convention everywhere in this crate), the minor-sum form, and the
//! closed-form special cases for two qubits, three qubits, GHZ states, and
//! the coherence-loss mixture family.
//!
//! Conventions are never mixed silently: the engines are related by fixed
//! constants (`C^2 = 2^(4-N) * minor_sum`, `three_qubit_c2 = 2 * C^2`)
//! which the audit module measures and publishes.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::statevec::{DensityMatrix, PureState, SiteSubset};

/// All nonempty proper subsets of `0..n_sites`, in increasing mask order;
/// the count is `2^N - 2`.
pub fn enumerate_bipartitions(n_sites: usize) -> Result<Vec<SiteSubset>> {
    if n_sites < 2 {
        return Err(Error::SingleSite);
    }
    (1..(1u32 << n_sites) - 1)
        .map(|mask| SiteSubset::from_mask(n_sites, mask))
        .collect()
}

/// One subset per unordered bipartition: the side containing site 0, in
/// increasing mask order; the count is `2^(N-1) - 1`. This is the
/// convention shared by [`minor_sum`] and the decomposer.
pub fn unordered_bipartitions(n_sites: usize) -> Result<Vec<SiteSubset>> {
    if n_sites < 2 {
        return Err(Error::SingleSite);
    }
    Ok((1..(1u32 << n_sites) - 1)
        .filter(|mask| mask & 1 == 1)
        .map(|mask| SiteSubset::from_mask(n_sites, mask).unwrap())
        .collect())
}

/// Canonical concurrence from reduced-state purities:
/// `C = 2^(1-N/2) sqrt((2^N - 2) - sum_i tr rho_i^2)` with the sum over all
/// `2^N - 2` subsets.
pub fn concurrence_purity(state: &PureState) -> Result<f64> {
    Ok(c2_purity(state)?.max(0.0).sqrt())
}

/// Squared canonical concurrence, `2^(2-N) ((2^N - 2) - sum_i tr rho_i^2)`.
pub fn c2_purity(state: &PureState) -> Result<f64> {
    let n = state.n_sites();
    if n < 2 {
        return Err(Error::SingleSite);
    }
    // purity is symmetric under complementation, so reduce the smaller side
    // of each unordered bipartition and count it twice
    let mut purity_sum = 0.0;
    for subset in unordered_bipartitions(n)? {
        let smaller = if subset.len() * 2 <= n {
            subset
        } else {
            subset.complement()
        };
        purity_sum += 2.0 * state.partial_trace(&smaller)?.purity();
    }
    let subsets = (1usize << n) - 2;
    Ok((2.0f64).powi(2 - n as i32) * (subsets as f64 - purity_sum))
}

/// Minor-sum form: for each unordered bipartition, reshape the amplitudes
/// to a matrix and sum squared magnitudes of all 2x2 minors over unordered
/// row and column pairs; returns the total. Fixed convention of this
/// artifact: each minor is counted once per bipartition.
///
/// Relates to the canonical engine by `c2_purity = 2^(4-N) * minor_sum`.
pub fn minor_sum(state: &PureState) -> Result<f64> {
    let n = state.n_sites();
    if n < 2 {
        return Err(Error::SingleSite);
    }
    let mut total = 0.0;
    for subset in unordered_bipartitions(n)? {
        let m = state.bipartition_matrix(&subset);
        for a in 0..m.nrows() {
            for ap in (a + 1)..m.nrows() {
                for b in 0..m.ncols() {
                    for bp in (b + 1)..m.ncols() {
                        let minor = m[(a, b)] * m[(ap, bp)] - m[(a, bp)] * m[(ap, b)];
                        total += minor.norm_sqr();
                    }
                }
            }
        }
    }
    Ok(total)
}

/// Two-qubit closed form `C^2 = 4 |a00 a11 - a01 a10|^2`. Equals the
/// squared canonical concurrence exactly.
pub fn two_qubit_c2(state: &PureState) -> Result<f64> {
    if state.dims() != [2, 2] {
        return Err(Error::BadDims(format!(
            "two_qubit_c2 needs dims [2, 2], got {:?}",
            state.dims()
        )));
    }
    let a = state.amps();
    Ok(4.0 * (a[0] * a[3] - a[1] * a[2]).norm_sqr())
}

/// Three-qubit closed form, transcribed term by term: four times the six
/// cross differences of the antipodal products plus eight times the six
/// single-site minors. Carries a factor 2 relative to the squared canonical
/// concurrence.
pub fn three_qubit_c2(state: &PureState) -> Result<f64> {
    if state.dims() != [2, 2, 2] {
        return Err(Error::BadDims(format!(
            "three_qubit_c2 needs dims [2, 2, 2], got {:?}",
            state.dims()
        )));
    }
    let a = |i: usize, j: usize, k: usize| state.amp(i << 2 | j << 1 | k);
    let d = |x: Complex64, y: Complex64| (x - y).norm_sqr();

    let g4 = d(a(0, 0, 0) * a(1, 1, 1), a(0, 0, 1) * a(1, 1, 0))
        + d(a(0, 0, 0) * a(1, 1, 1), a(0, 1, 0) * a(1, 0, 1))
        + d(a(0, 0, 0) * a(1, 1, 1), a(0, 1, 1) * a(1, 0, 0))
        + d(a(0, 0, 1) * a(1, 1, 0), a(0, 1, 0) * a(1, 0, 1))
        + d(a(0, 0, 1) * a(1, 1, 0), a(0, 1, 1) * a(1, 0, 0))
        + d(a(0, 1, 0) * a(1, 0, 1), a(0, 1, 1) * a(1, 0, 0));

    let g8 = d(a(0, 0, 0) * a(0, 1, 1), a(0, 0, 1) * a(0, 1, 0))
        + d(a(0, 0, 0) * a(1, 0, 1), a(0, 0, 1) * a(1, 0, 0))
        + d(a(0, 0, 0) * a(1, 1, 0), a(0, 1, 0) * a(1, 0, 0))
        + d(a(0, 0, 1) * a(1, 1, 1), a(0, 1, 1) * a(1, 0, 1))
        + d(a(0, 1, 0) * a(1, 1, 1), a(0, 1, 1) * a(1, 1, 0))
        + d(a(1, 0, 0) * a(1, 1, 1), a(1, 0, 1) * a(1, 1, 0));

    Ok(4.0 * g4 + 8.0 * g8)
}

/// Squared canonical concurrence of the generalized N-qubit GHZ state
/// `a0|0..0> + a1|1..1>`: every proper reduction has purity
/// `1 - 2|a0 a1|^2`, giving `(2 - 2^(2-N)) * 4 |a0 a1|^2`.
pub fn ghz_n_c2_analytic(a0: Complex64, a1: Complex64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::SingleSite);
    }
    let norm = a0.norm_sqr() + a1.norm_sqr();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(norm));
    }
    Ok((2.0 - (2.0f64).powi(2 - n as i32)) * 4.0 * (a0 * a1).norm_sqr())
}

/// Concurrence of the coherence-loss family: a 4x4 density matrix whose
/// only nonzero entries are the |00> and |11> populations and the corner
/// coherences. For this family `C = 2 max(0, |rho_03|)`, so
/// `coherence_loss_mixture(alpha, beta, eps)` has `C = 2 (1-eps) |alpha beta|`.
pub fn xstate_concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::InvalidDensityMatrix(format!(
            "xstate family is 4x4, got {}x{}",
            rho.dim(),
            rho.dim()
        )));
    }
    for i in 0..4 {
        for j in 0..4 {
            let allowed = i == j || (i, j) == (0, 3) || (i, j) == (3, 0);
            if !allowed && rho.entry(i, j).norm() > 1e-10 {
                return Err(Error::InvalidDensityMatrix(format!(
                    "entry ({i},{j}) = {} outside the population/corner family",
                    rho.entry(i, j)
                )));
            }
        }
    }
    if rho.entry(1, 1).norm() > 1e-10 || rho.entry(2, 2).norm() > 1e-10 {
        return Err(Error::InvalidDensityMatrix(
            "populations on |01> or |10> are outside the family".into(),
        ));
    }
    Ok(2.0 * rho.entry(0, 3).norm().max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::{coherence_loss_mixture, families};

    const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn bipartition_counts() {
        assert_eq!(enumerate_bipartitions(2).unwrap().len(), 2);
        assert_eq!(enumerate_bipartitions(3).unwrap().len(), 6);
        assert_eq!(enumerate_bipartitions(4).unwrap().len(), 14);
        assert!(enumerate_bipartitions(1).is_err());
        // increasing mask order
        let masks: Vec<u32> = enumerate_bipartitions(3)
            .unwrap()
            .iter()
            .map(|s| s.mask())
            .collect();
        assert_eq!(masks, vec![1, 2, 3, 4, 5, 6]);
        // unordered enumeration keeps the sides containing site 0
        let masks: Vec<u32> = unordered_bipartitions(3)
            .unwrap()
            .iter()
            .map(|s| s.mask())
            .collect();
        assert_eq!(masks, vec![1, 3, 5]);
    }

    #[test]
    fn purity_engine_benchmarks() {
        assert!((concurrence_purity(&families::bell()).unwrap() - 1.0).abs() < 1e-12);
        let zero3 = families::basis_state(&[2, 2, 2], 0).unwrap();
        assert!(concurrence_purity(&zero3).unwrap().abs() < 1e-10);
        let ghz3 = families::ghz(3, c(INV_SQRT2), c(INV_SQRT2)).unwrap();
        assert!((c2_purity(&ghz3).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn minor_sum_benchmarks() {
        assert!((minor_sum(&families::bell()).unwrap() - 0.25).abs() < 1e-12);
        let ghz3 = families::ghz(3, c(INV_SQRT2), c(INV_SQRT2)).unwrap();
        assert!((minor_sum(&ghz3).unwrap() - 0.75).abs() < 1e-12);
        let product = families::basis_state(&[2, 3], 2).unwrap();
        assert!(minor_sum(&product).unwrap().abs() < 1e-15);
    }

    #[test]
    fn cross_oracle_law() {
        // c2_purity = 2^(4-N) * minor_sum on random states, qubits and qudits
        for (dims, seeds) in [
            (vec![2usize, 2], 0..40u64),
            (vec![2, 2, 2], 0..40),
            (vec![2, 2, 2, 2], 0..40),
            (vec![2, 3], 0..40),
            (vec![3, 3], 0..40),
        ] {
            let n = dims.len() as i32;
            for seed in seeds {
                let psi = PureState::random_haar(&dims, seed).unwrap();
                let lhs = c2_purity(&psi).unwrap();
                let rhs = (2.0f64).powi(4 - n) * minor_sum(&psi).unwrap();
                assert!((lhs - rhs).abs() < 1e-10, "dims {dims:?} seed {seed}");
            }
        }
    }

    #[test]
    fn two_qubit_engine() {
        assert!((two_qubit_c2(&families::bell()).unwrap() - 1.0).abs() < 1e-12);
        let zero_one = families::basis_state(&[2, 2], 1).unwrap();
        assert!(two_qubit_c2(&zero_one).unwrap().abs() < 1e-15);
        // alpha|01> + beta|10>: det = -alpha beta
        let psi = PureState::new(vec![2, 2], vec![c(0.0), c(0.6), c(0.8), c(0.0)]).unwrap();
        assert!((two_qubit_c2(&psi).unwrap() - 0.9216).abs() < 1e-12);
        // matches the canonical engine squared
        for seed in 0..50 {
            let psi = PureState::random_haar(&[2, 2], seed).unwrap();
            let d = (two_qubit_c2(&psi).unwrap() - c2_purity(&psi).unwrap()).abs();
            assert!(d < 1e-12, "seed {seed}: {d}");
        }
        assert!(two_qubit_c2(&families::basis_state(&[2, 2, 2], 0).unwrap()).is_err());
    }

    #[test]
    fn three_qubit_engine() {
        let ghz3 = families::ghz(3, c(INV_SQRT2), c(INV_SQRT2)).unwrap();
        assert!((three_qubit_c2(&ghz3).unwrap() - 3.0).abs() < 1e-12);
        let third = c(1.0 / 3.0f64.sqrt());
        let w3 = families::w(&[third, third, third]).unwrap();
        assert!((three_qubit_c2(&w3).unwrap() - 8.0 / 3.0).abs() < 1e-12);
        let basis = families::basis_state(&[2, 2, 2], 0b010).unwrap();
        assert!(three_qubit_c2(&basis).unwrap().abs() < 1e-15);
        // factor 2 against the canonical engine
        for seed in 0..50 {
            let psi = PureState::random_haar(&[2, 2, 2], seed).unwrap();
            let d = (three_qubit_c2(&psi).unwrap() - 2.0 * c2_purity(&psi).unwrap()).abs();
            assert!(d < 1e-10, "seed {seed}: {d}");
        }
    }

    #[test]
    fn ghz_analytic_engine() {
        assert!((ghz_n_c2_analytic(c(INV_SQRT2), c(INV_SQRT2), 2).unwrap() - 1.0).abs() < 1e-12);
        assert!((ghz_n_c2_analytic(c(INV_SQRT2), c(INV_SQRT2), 3).unwrap() - 1.5).abs() < 1e-12);
        assert!(ghz_n_c2_analytic(c(1.0), c(0.0), 5).unwrap().abs() < 1e-15);
        assert!(ghz_n_c2_analytic(c(1.0), c(1.0), 3).is_err());
        // matches the purity engine on explicit states
        for n in 2..=5 {
            for seed in 0..10u64 {
                let psi = PureState::random_haar(&[2], seed).unwrap();
                let (a0, a1) = (psi.amp(0), psi.amp(1));
                let state = families::ghz(n, a0, a1).unwrap();
                let want = ghz_n_c2_analytic(a0, a1, n).unwrap();
                assert!((c2_purity(&state).unwrap() - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn xstate_engine() {
        let a = c(INV_SQRT2);
        let rho0 = coherence_loss_mixture(a, a, 0.0).unwrap();
        assert!((xstate_concurrence(&rho0).unwrap() - 1.0).abs() < 1e-12);
        let rho1 = coherence_loss_mixture(a, a, 1.0).unwrap();
        assert!(xstate_concurrence(&rho1).unwrap().abs() < 1e-15);
        let rho = coherence_loss_mixture(a, a, 0.1).unwrap();
        assert!((xstate_concurrence(&rho).unwrap() - 0.9).abs() < 1e-12);
        // a matrix outside the family is rejected
        let mixed = DensityMatrix::maximally_mixed(4);
        assert!(xstate_concurrence(&mixed).is_err());
    }

    #[test]
    fn engines_invariant_under_global_phase() {
        let psi = PureState::random_haar(&[2, 2, 2], 9).unwrap();
        // multiplication by i is exact in floats, so invariance is bitwise
        let by_i = PureState::new(
            psi.dims().to_vec(),
            psi.amps().iter().map(|z| z * Complex64::i()).collect(),
        )
        .unwrap();
        assert_eq!(c2_purity(&psi).unwrap(), c2_purity(&by_i).unwrap());
        assert_eq!(minor_sum(&psi).unwrap(), minor_sum(&by_i).unwrap());
        assert_eq!(
            three_qubit_c2(&psi).unwrap(),
            three_qubit_c2(&by_i).unwrap()
        );
        // a generic phase is exact up to float rounding of the products
        let phase = Complex64::from_polar(1.0, 1.234);
        let rotated = PureState::new(
            psi.dims().to_vec(),
            psi.amps().iter().map(|z| z * phase).collect(),
        )
        .unwrap();
        assert!((c2_purity(&psi).unwrap() - c2_purity(&rotated).unwrap()).abs() < 1e-13);
        assert!((minor_sum(&psi).unwrap() - minor_sum(&rotated).unwrap()).abs() < 1e-13);
        assert!(
            (three_qubit_c2(&psi).unwrap() - three_qubit_c2(&rotated).unwrap()).abs() < 1e-13
        );
    }
}
