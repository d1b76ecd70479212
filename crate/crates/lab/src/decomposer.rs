//! Mechanized construction of the quadratic form: every squared 2x2 minor
//! of every bipartition matrix is rewritten as
//! `<A11><A21> + <A12><A22> - <A13><A23> - <A14><A24>`, each operator is
//! expanded over the generator basis through trace inner products, and the
//! accumulated pair coefficients form a [`QuadraticForm`] whose evaluation
//! equals [`minor_sum`](crate::concurrence::minor_sum).
//!
//! The symbolic sign bookkeeping of the realness proof is not replayed;
//! instead the imaginary residue of every accumulated coefficient is
//! measured and must stay below `REALNESS_TOL`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::concurrence::unordered_bipartitions;
use crate::error::{Error, Result};
use crate::genbasis::{basis_for, GeneratorBasis, ObservableLabel};
use crate::quadform::QuadraticForm;
use crate::statevec::{PureState, SiteSubset};
use crate::tensor;

/// Total dimension cap for form generation.
pub const DECOMPOSE_DIM_LIMIT: usize = 1 << 10;
/// Cap on the number of minor terms, to keep generation tractable.
pub const DECOMPOSE_TERM_LIMIT: usize = 1 << 22;
/// Every accumulated coefficient must be real to within this.
pub const REALNESS_TOL: f64 = 1e-10;
/// Accumulated coefficients at or below this magnitude are dropped.
pub const PRUNE_TOL: f64 = 1e-12;

/// One squared minor: a bipartition, a row pair on the bipartition side and
/// a column pair on the complement side.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinorTerm {
    pub bipartition: SiteSubset,
    /// `alpha < alpha'` as flat indices over the bipartition side.
    pub rows: (usize, usize),
    /// `beta < beta'` as flat indices over the complement side.
    pub cols: (usize, usize),
}

/// All minor terms for the given dims, enumerated in the fixed order:
/// unordered bipartitions by increasing mask, then row pairs, then column
/// pairs.
pub fn minor_terms(dims: &[usize]) -> Result<Vec<MinorTerm>> {
    let mut out = Vec::new();
    for subset in unordered_bipartitions(dims.len())? {
        let rdim: usize = subset.sites().iter().map(|&k| dims[k]).product();
        let cdim: usize = subset
            .complement()
            .sites()
            .iter()
            .map(|&k| dims[k])
            .product();
        for a in 0..rdim {
            for ap in (a + 1)..rdim {
                for b in 0..cdim {
                    for bp in (b + 1)..cdim {
                        out.push(MinorTerm {
                            bipartition: subset,
                            rows: (a, ap),
                            cols: (b, bp),
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Per-site basis indices of the full-space basis vector with row index
/// `row` on the bipartition side and column index `col` on the complement.
fn assemble_sites(
    term_bipartition: &SiteSubset,
    dims: &[usize],
    row: usize,
    col: usize,
) -> Vec<usize> {
    let row_sites = term_bipartition.sites();
    let col_sites = term_bipartition.complement().sites();
    let row_dims: Vec<usize> = row_sites.iter().map(|&k| dims[k]).collect();
    let col_dims: Vec<usize> = col_sites.iter().map(|&k| dims[k]).collect();
    let r = tensor::unravel(row, &row_dims);
    let c = tensor::unravel(col, &col_dims);
    let mut sites = vec![0usize; dims.len()];
    for (i, &k) in row_sites.iter().enumerate() {
        sites[k] = r[i];
    }
    for (i, &k) in col_sites.iter().enumerate() {
        sites[k] = c[i];
    }
    sites
}

fn check_term(term: &MinorTerm, dims: &[usize]) -> Result<()> {
    if term.bipartition.n_sites() != dims.len() {
        return Err(Error::BadSubset {
            n_sites: dims.len(),
        });
    }
    let rdim: usize = term.bipartition.sites().iter().map(|&k| dims[k]).product();
    let cdim: usize = term
        .bipartition
        .complement()
        .sites()
        .iter()
        .map(|&k| dims[k])
        .product();
    let (a, ap) = term.rows;
    let (b, bp) = term.cols;
    if a >= ap || ap >= rdim {
        return Err(Error::IndexOutOfRange { index: ap, dim: rdim });
    }
    if b >= bp || bp >= cdim {
        return Err(Error::IndexOutOfRange { index: bp, dim: cdim });
    }
    Ok(())
}

/// The eight Hermitian operators of one minor term, as dense matrices:
/// the four projectors `|ab><ab|`, `|a'b'><a'b'|`, `|ab'><ab'|`,
/// `|a'b><a'b|` and the four symmetric/antisymmetric combinations with
/// `1/sqrt(2)` and `i/sqrt(2)` prefactors.
pub fn minor_term_operators(term: &MinorTerm, dims: &[usize]) -> Result<[DMatrix<Complex64>; 8]> {
    check_term(term, dims)?;
    let total: usize = dims.iter().product();
    let (a, ap) = term.rows;
    let (b, bp) = term.cols;
    let idx = |row, col| tensor::ravel(&assemble_sites(&term.bipartition, dims, row, col), dims);
    let u_ab = idx(a, b);
    let u_apbp = idx(ap, bp);
    let u_abp = idx(a, bp);
    let u_apb = idx(ap, b);

    let dyad = |u: usize, v: usize| {
        let mut m = DMatrix::<Complex64>::zeros(total, total);
        m[(u, v)] = Complex64::new(1.0, 0.0);
        m
    };
    let inv_sqrt2 = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let i_sqrt2 = Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);

    Ok([
        dyad(u_ab, u_ab),
        dyad(u_apbp, u_apbp),
        dyad(u_abp, u_abp),
        dyad(u_apb, u_apb),
        (dyad(u_ab, u_abp) + dyad(u_abp, u_ab)) * inv_sqrt2,
        (dyad(u_apb, u_apbp) + dyad(u_apbp, u_apb)) * inv_sqrt2,
        (dyad(u_ab, u_abp) - dyad(u_abp, u_ab)) * i_sqrt2,
        (dyad(u_apb, u_apbp) - dyad(u_apbp, u_apb)) * i_sqrt2,
    ])
}

/// `<A11><A21> + <A12><A22> - <A13><A23> - <A14><A24>`; equals the squared
/// minor `|a_ab a_a'b' - a_ab' a_a'b|^2`.
pub fn minor_value_check(term: &MinorTerm, state: &PureState) -> Result<f64> {
    check_term(term, state.dims())?;
    let ops = minor_term_operators(term, state.dims())?;
    let ev = |op: &DMatrix<Complex64>| {
        let v = op * state.amps();
        state.amps().dotc(&v).re
    };
    Ok(ev(&ops[0]) * ev(&ops[1]) + ev(&ops[2]) * ev(&ops[3])
        - ev(&ops[4]) * ev(&ops[5])
        - ev(&ops[6]) * ev(&ops[7]))
}

// ---------------------------------------------------------------------------
// Form generation
// ---------------------------------------------------------------------------

/// Sparse label expansion of a dyad `|u><v| = prod_k |u_k><v_k|`: the
/// per-site trace-inner-product expansions combined as an outer product.
/// Identical to expanding the dense operator with
/// [`hermitian_decompose`](crate::genbasis::hermitian_decompose).
fn dyad_label_expansion(
    u_sites: &[usize],
    v_sites: &[usize],
    bases: &[Arc<GeneratorBasis>],
) -> Result<Vec<(Vec<usize>, Complex64)>> {
    let mut acc: Vec<(Vec<usize>, Complex64)> = vec![(Vec::new(), Complex64::new(1.0, 0.0))];
    for (k, basis) in bases.iter().enumerate() {
        let site_coeffs = basis.dyad_expansion_sparse(u_sites[k], v_sites[k])?;
        let mut next = Vec::with_capacity(acc.len() * site_coeffs.len());
        for (prefix, c) in &acc {
            for (g, cg) in &site_coeffs {
                let mut label = prefix.clone();
                label.push(*g);
                next.push((label, c * cg));
            }
        }
        acc = next;
    }
    Ok(acc)
}

/// Output of [`decompose_c2`].
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub form: QuadraticForm,
    /// Largest imaginary part seen across accumulated coefficients before
    /// they were truncated to their real parts.
    pub max_imag_residue: f64,
    /// Number of squared minors expanded.
    pub minor_terms: usize,
}

/// Generate the quadratic form whose evaluation equals
/// [`minor_sum`](crate::concurrence::minor_sum) for the given dims.
///
/// Errors if the accumulated coefficients fail the realness assertion; that
/// signals a transcription bug, not a tolerable condition.
pub fn decompose_c2(dims: &[usize]) -> Result<Decomposition> {
    let total: usize = dims.iter().product();
    if total > DECOMPOSE_DIM_LIMIT {
        return Err(Error::SizeLimit {
            dim: total,
            limit: DECOMPOSE_DIM_LIMIT,
        });
    }
    let terms = minor_terms(dims)?;
    if terms.len() > DECOMPOSE_TERM_LIMIT {
        return Err(Error::SizeLimit {
            dim: terms.len(),
            limit: DECOMPOSE_TERM_LIMIT,
        });
    }
    let bases: Vec<Arc<GeneratorBasis>> =
        dims.iter().map(|&d| basis_for(d)).collect::<Result<_>>()?;

    let mut acc: BTreeMap<(Vec<usize>, Vec<usize>), Complex64> = BTreeMap::new();
    for term in &terms {
        let (a, ap) = term.rows;
        let (b, bp) = term.cols;
        let sites = |row, col| assemble_sites(&term.bipartition, dims, row, col);
        let (s_ab, s_apbp, s_abp, s_apb) =
            (sites(a, b), sites(ap, bp), sites(a, bp), sites(ap, b));

        let expand = |u: &[usize], v: &[usize]| dyad_label_expansion(u, v, &bases);
        // projector pieces
        let a11 = expand(&s_ab, &s_ab)?;
        let a21 = expand(&s_apbp, &s_apbp)?;
        let a12 = expand(&s_abp, &s_abp)?;
        let a22 = expand(&s_apb, &s_apb)?;
        // off-diagonal pieces: |ab><ab'| and |a'b><a'b'| and their adjoints
        let e1 = expand(&s_ab, &s_abp)?;
        let e1d = expand(&s_abp, &s_ab)?;
        let e2 = expand(&s_apb, &s_apbp)?;
        let e2d = expand(&s_apbp, &s_apb)?;
        let inv_sqrt2 = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let i_sqrt2 = Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
        let combine = |plus: &[(Vec<usize>, Complex64)],
                       minus: &[(Vec<usize>, Complex64)],
                       scale: Complex64,
                       sign: f64| {
            let mut out: BTreeMap<Vec<usize>, Complex64> = BTreeMap::new();
            for (l, c) in plus {
                *out.entry(l.clone()).or_default() += scale * c;
            }
            for (l, c) in minus {
                *out.entry(l.clone()).or_default() += scale * c * sign;
            }
            out.into_iter().collect::<Vec<_>>()
        };
        let a13 = combine(&e1, &e1d, inv_sqrt2, 1.0);
        let a23 = combine(&e2, &e2d, inv_sqrt2, 1.0);
        let a14 = combine(&e1, &e1d, i_sqrt2, -1.0);
        let a24 = combine(&e2, &e2d, i_sqrt2, -1.0);

        let mut add_products = |lhs: &[(Vec<usize>, Complex64)],
                                rhs: &[(Vec<usize>, Complex64)],
                                sign: f64| {
            for (li, ci) in lhs {
                for (lj, cj) in rhs {
                    let key = if li <= lj {
                        (li.clone(), lj.clone())
                    } else {
                        (lj.clone(), li.clone())
                    };
                    *acc.entry(key).or_default() += ci * cj * sign;
                }
            }
        };
        add_products(&a11, &a21, 1.0);
        add_products(&a12, &a22, 1.0);
        add_products(&a13, &a23, -1.0);
        add_products(&a14, &a24, -1.0);
    }

    let max_imag_residue = acc
        .values()
        .map(|z| z.im.abs())
        .fold(0.0, f64::max);
    if max_imag_residue >= REALNESS_TOL {
        return Err(Error::Precondition(format!(
            "realness assertion failed: imaginary residue {max_imag_residue:.3e}"
        )));
    }
    let raw = acc
        .into_iter()
        .filter(|(_, z)| z.re.abs() > PRUNE_TOL)
        .map(|((li, lj), z)| (ObservableLabel::new(li), ObservableLabel::new(lj), z.re))
        .collect();
    let form = QuadraticForm::new(dims.to_vec(), 0.0, raw)?;
    Ok(Decomposition {
        form,
        max_imag_residue,
        minor_terms: terms.len(),
    })
}

/// Average a form's coefficients over all site permutations. The site dims
/// must all be equal. For forms whose value is a permutation-invariant
/// function of the state (every `decompose_c2` output is), the evaluation
/// is unchanged on every state.
pub fn symmetrize_form(form: &QuadraticForm) -> Result<QuadraticForm> {
    let dims = form.dims();
    let n = dims.len();
    if dims.iter().any(|&d| d != dims[0]) {
        return Err(Error::BadDims(format!(
            "symmetrization needs equal site dims, got {dims:?}"
        )));
    }
    if n > 8 {
        return Err(Error::SizeLimit { dim: n, limit: 8 });
    }
    let perms = permutations(n);
    let weight = 1.0 / perms.len() as f64;
    let mut raw = Vec::with_capacity(form.terms().len() * perms.len());
    for perm in &perms {
        for t in form.terms() {
            let map = |l: &ObservableLabel| {
                ObservableLabel::new(perm.iter().map(|&p| l.indices()[p]).collect())
            };
            raw.push((map(&t.label_i), map(&t.label_j), t.coeff * weight));
        }
    }
    QuadraticForm::new(dims.to_vec(), form.constant(), raw)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (0..n).collect();
    fn heap(k: usize, items: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(items.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, items, out);
            if k % 2 == 0 {
                items.swap(i, k - 1);
            } else {
                items.swap(0, k - 1);
            }
        }
    }
    heap(n, &mut items, &mut out);
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concurrence::minor_sum;
    use crate::genbasis::hermitian_decompose;
    use crate::statevec::families;

    const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn two_qubit_term() -> MinorTerm {
        MinorTerm {
            bipartition: SiteSubset::new(2, &[0]).unwrap(),
            rows: (0, 1),
            cols: (0, 1),
        }
    }

    #[test]
    fn term_enumeration_counts() {
        assert_eq!(minor_terms(&[2, 2]).unwrap().len(), 1);
        // three unordered bipartitions, each C(r,2)*C(c,2) = 6
        assert_eq!(minor_terms(&[2, 2, 2]).unwrap().len(), 18);
        assert_eq!(minor_terms(&[2, 3]).unwrap().len(), 3);
        assert_eq!(minor_terms(&[3, 3]).unwrap().len(), 9);
    }

    #[test]
    fn operators_of_the_two_qubit_term() {
        let ops = minor_term_operators(&two_qubit_term(), &[2, 2]).unwrap();
        // A11 = |00><00|
        assert!((ops[0][(0, 0)] - c(1.0)).norm() < 1e-15);
        assert_eq!(ops[0].iter().filter(|z| z.norm() > 0.0).count(), 1);
        // A13 = (|00><01| + |01><00|)/sqrt(2)
        assert!((ops[4][(0, 1)] - c(INV_SQRT2)).norm() < 1e-15);
        assert!((ops[4][(1, 0)] - c(INV_SQRT2)).norm() < 1e-15);
        // A14 = i(|00><01| - |01><00|)/sqrt(2)
        assert!((ops[6][(0, 1)] - Complex64::new(0.0, INV_SQRT2)).norm() < 1e-15);
        assert!((ops[6][(1, 0)] - Complex64::new(0.0, -INV_SQRT2)).norm() < 1e-15);
        for (i, op) in ops.iter().enumerate() {
            let herm = (op - op.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(herm < 1e-15, "operator {i} not Hermitian");
        }
        // tr(A11^2) = tr(A13^2) = 1
        assert!(((&ops[0] * &ops[0]).trace().re - 1.0).abs() < 1e-15);
        assert!(((&ops[4] * &ops[4]).trace().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn minor_value_check_examples() {
        let term = two_qubit_term();
        let bell = families::bell();
        assert!((minor_value_check(&term, &bell).unwrap() - 0.25).abs() < 1e-12);
        let zz = families::basis_state(&[2, 2], 0).unwrap();
        assert!(minor_value_check(&term, &zz).unwrap().abs() < 1e-12);
        let psi = PureState::random_haar(&[2, 2], 42).unwrap();
        let a = psi.amps();
        let want = (a[0] * a[3] - a[1] * a[2]).norm_sqr();
        assert!((minor_value_check(&term, &psi).unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn minor_values_sum_to_minor_sum() {
        for dims in [vec![2usize, 2, 2], vec![2, 3]] {
            let psi = PureState::random_haar(&dims, 5).unwrap();
            let total: f64 = minor_terms(&dims)
                .unwrap()
                .iter()
                .map(|t| minor_value_check(t, &psi).unwrap())
                .sum();
            assert!((total - minor_sum(&psi).unwrap()).abs() < 1e-11);
        }
    }

    #[test]
    fn dyad_expansion_matches_dense_decompose() {
        let dims = [2usize, 3];
        let bases: Vec<_> = dims.iter().map(|&d| basis_for(d).unwrap()).collect();
        for (u, v) in [(0usize, 0usize), (0, 4), (3, 2), (5, 5)] {
            let us = tensor::unravel(u, &dims);
            let vs = tensor::unravel(v, &dims);
            let sparse = dyad_label_expansion(&us, &vs, &bases).unwrap();
            let mut dense_op = DMatrix::<Complex64>::zeros(6, 6);
            dense_op[(u, v)] = c(1.0);
            let dense = hermitian_decompose(&dense_op, &dims).unwrap();
            assert_eq!(
                sparse.len(),
                dense.len(),
                "sparse and dense expansions disagree on support"
            );
            for (label, coeff) in &sparse {
                let want = dense[&ObservableLabel::new(label.clone())];
                assert!((coeff - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn decompose_two_qubits() {
        let d = decompose_c2(&[2, 2]).unwrap();
        assert!(d.max_imag_residue < 1e-12);
        assert_eq!(d.minor_terms, 1);
        let bell = families::bell();
        assert!((d.form.evaluate(&bell).unwrap() - 0.25).abs() < 1e-12);
        for seed in 0..50 {
            let psi = PureState::random_haar(&[2, 2], seed).unwrap();
            let diff = (d.form.evaluate(&psi).unwrap() - minor_sum(&psi).unwrap()).abs();
            assert!(diff < 1e-10, "seed {seed}: {diff}");
        }
    }

    #[test]
    fn decompose_three_qubits_ghz_value() {
        let d = decompose_c2(&[2, 2, 2]).unwrap();
        let ghz = families::ghz(3, c(INV_SQRT2), c(INV_SQRT2)).unwrap();
        assert!((d.form.evaluate(&ghz).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn decompose_qudit_dims() {
        for dims in [vec![2usize, 3], vec![3, 3]] {
            let d = decompose_c2(&dims).unwrap();
            assert!(d.max_imag_residue < 1e-10);
            for seed in 0..30 {
                let psi = PureState::random_haar(&dims, seed).unwrap();
                let diff = (d.form.evaluate(&psi).unwrap() - minor_sum(&psi).unwrap()).abs();
                assert!(diff < 1e-10, "dims {dims:?} seed {seed}: {diff}");
            }
        }
    }

    #[test]
    fn decompose_respects_size_limit() {
        let dims = vec![2usize; 11];
        assert!(matches!(
            decompose_c2(&dims),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn decompose_deterministic_json() {
        let a = serde_json::to_string(&decompose_c2(&[2, 2, 2]).unwrap().form).unwrap();
        let b = serde_json::to_string(&decompose_c2(&[2, 2, 2]).unwrap().form).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn symmetrize_preserves_evaluation() {
        let d = decompose_c2(&[2, 2]).unwrap();
        let sym = symmetrize_form(&d.form).unwrap();
        for seed in 0..100 {
            let psi = PureState::random_haar(&[2, 2], seed).unwrap();
            let diff = (sym.evaluate(&psi).unwrap() - d.form.evaluate(&psi).unwrap()).abs();
            assert!(diff < 1e-12, "seed {seed}: {diff}");
        }
    }

    #[test]
    fn symmetrize_idempotent_and_symmetric() {
        let d = decompose_c2(&[2, 2, 2]).unwrap();
        let sym = symmetrize_form(&d.form).unwrap();
        let twice = symmetrize_form(&sym).unwrap();
        // idempotent up to re-averaging rounding
        assert_eq!(sym.n_terms(), twice.n_terms());
        for (a, b) in sym.terms().iter().zip(twice.terms()) {
            assert_eq!(a.label_i, b.label_i);
            assert_eq!(a.label_j, b.label_j);
            assert!((a.coeff - b.coeff).abs() < 1e-14);
        }
        // coefficient of a pair equals that of any site-permuted pair
        let coeff_of = |li: &[usize], lj: &[usize]| {
            sym.terms()
                .iter()
                .find(|t| t.label_i.indices() == li && t.label_j.indices() == lj)
                .map(|t| t.coeff)
        };
        let a = coeff_of(&[3, 3, 1], &[3, 3, 1]);
        let b = coeff_of(&[1, 3, 3], &[1, 3, 3]);
        match (a, b) {
            (Some(x), Some(y)) => assert!((x - y).abs() < 1e-12),
            (None, None) => {}
            other => panic!("asymmetric term survival: {other:?}"),
        }
    }

    #[test]
    fn symmetrize_rejects_mixed_dims() {
        let d = decompose_c2(&[2, 3]).unwrap();
        assert!(symmetrize_form(&d.form).is_err());
    }

    #[test]
    fn decompose_matches_purity_engine_via_cross_oracle() {
        // 2^(4-N) * form = c2_purity for qubit dims
        let d = decompose_c2(&[2, 2, 2]).unwrap();
        for seed in 0..30 {
            let psi = PureState::random_haar(&[2, 2, 2], seed).unwrap();
            let lhs = 2.0 * d.form.evaluate(&psi).unwrap();
            let rhs = crate::concurrence::c2_purity(&psi).unwrap();
            assert!((lhs - rhs).abs() < 1e-9, "seed {seed}");
        }
    }

    #[test]
    fn form_labels_have_exact_expectation_path() {
        // generated labels evaluate cleanly through the factored path
        let d = decompose_c2(&[2, 3]).unwrap();
        let psi = PureState::random_haar(&[2, 3], 1).unwrap();
        for label in d.form.labels() {
            let _ = crate::genbasis::expectation(&psi, &label).unwrap();
        }
    }
}
