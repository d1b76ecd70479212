//! Squared concurrence as a real quadratic form over local-observable
//! expectation values: evaluation, the built-in printed forms, and
//! measurement-setting planning.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::genbasis::{expectation, expectation_mixed, ObservableLabel};
use crate::statevec::{DensityMatrix, PureState};

/// One canonicalized term `coeff * <O_i> <O_j>` with `label_i <= label_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct FormTerm {
    pub label_i: ObservableLabel,
    pub label_j: ObservableLabel,
    pub coeff: f64,
}

/// `constant + sum coeff * <O_i> <O_j>` with real coefficients.
///
/// Terms are stored canonically: pair labels ordered lexicographically,
/// duplicate pairs merged, terms sorted, exact zeros dropped. Identical
/// construction inputs therefore serialize to bit-identical JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    dims: Vec<usize>,
    constant: f64,
    terms: Vec<FormTerm>,
}

impl QuadraticForm {
    pub fn new(
        dims: Vec<usize>,
        constant: f64,
        raw_terms: Vec<(ObservableLabel, ObservableLabel, f64)>,
    ) -> Result<Self> {
        if !constant.is_finite() {
            return Err(Error::Precondition("non-finite constant".into()));
        }
        let mut merged: BTreeMap<(ObservableLabel, ObservableLabel), f64> = BTreeMap::new();
        for (a, b, c) in raw_terms {
            if !c.is_finite() {
                return Err(Error::Precondition(format!(
                    "non-finite coefficient on ({a}, {b})"
                )));
            }
            a.validate(&dims)?;
            b.validate(&dims)?;
            let key = if a <= b { (a, b) } else { (b, a) };
            *merged.entry(key).or_insert(0.0) += c;
        }
        let terms = merged
            .into_iter()
            .filter(|&(_, c)| c != 0.0)
            .map(|((label_i, label_j), coeff)| FormTerm {
                label_i,
                label_j,
                coeff,
            })
            .collect();
        Ok(QuadraticForm {
            dims,
            constant,
            terms,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn terms(&self) -> &[FormTerm] {
        &self.terms
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    /// Distinct labels appearing in the terms.
    pub fn labels(&self) -> BTreeSet<ObservableLabel> {
        let mut out = BTreeSet::new();
        for t in &self.terms {
            out.insert(t.label_i.clone());
            out.insert(t.label_j.clone());
        }
        out
    }

    /// Evaluate with exact pure-state expectation values.
    pub fn evaluate(&self, state: &PureState) -> Result<f64> {
        if state.dims() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.iter().product(),
                got: state.total_dim(),
            });
        }
        let mut cache: BTreeMap<&ObservableLabel, f64> = BTreeMap::new();
        let mut total = self.constant;
        for t in &self.terms {
            let ei = match cache.get(&t.label_i) {
                Some(&e) => e,
                None => {
                    let e = expectation(state, &t.label_i)?;
                    cache.insert(&t.label_i, e);
                    e
                }
            };
            let ej = match cache.get(&t.label_j) {
                Some(&e) => e,
                None => {
                    let e = expectation(state, &t.label_j)?;
                    cache.insert(&t.label_j, e);
                    e
                }
            };
            total += t.coeff * ei * ej;
        }
        Ok(total)
    }

    /// Evaluate with `tr(rho O)` expectation values. Pure-state forms are
    /// generally *invalid* on mixed states; this is exactly what the noise
    /// audits quantify.
    pub fn evaluate_mixed(&self, rho: &DensityMatrix) -> Result<f64> {
        let total_dim: usize = self.dims.iter().product();
        if rho.dim() != total_dim {
            return Err(Error::DimensionMismatch {
                expected: total_dim,
                got: rho.dim(),
            });
        }
        let mut cache: BTreeMap<&ObservableLabel, f64> = BTreeMap::new();
        let mut total = self.constant;
        for t in &self.terms {
            for label in [&t.label_i, &t.label_j] {
                if !cache.contains_key(label) {
                    let e = expectation_mixed(rho, &self.dims, label)?;
                    cache.insert(label, e);
                }
            }
            total += t.coeff * cache[&t.label_i] * cache[&t.label_j];
        }
        Ok(total)
    }
}

// JSON: {"dims":[...],"constant":r,"terms":[{"i":[...],"j":[...],"c":r}]}

#[derive(Serialize, Deserialize)]
struct TermDto {
    i: Vec<usize>,
    j: Vec<usize>,
    c: f64,
}

#[derive(Serialize, Deserialize)]
struct FormDto {
    dims: Vec<usize>,
    constant: f64,
    terms: Vec<TermDto>,
}

impl Serialize for QuadraticForm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FormDto {
            dims: self.dims.clone(),
            constant: self.constant,
            terms: self
                .terms
                .iter()
                .map(|t| TermDto {
                    i: t.label_i.indices().to_vec(),
                    j: t.label_j.indices().to_vec(),
                    c: t.coeff,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for QuadraticForm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let dto = FormDto::deserialize(d)?;
        let raw = dto
            .terms
            .into_iter()
            .map(|t| {
                (
                    ObservableLabel::new(t.i),
                    ObservableLabel::new(t.j),
                    t.c,
                )
            })
            .collect();
        QuadraticForm::new(dto.dims, dto.constant, raw).map_err(D::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Built-in forms, transcribed term by term as printed. Suspect ones are
// transcribed too; the audit module adjudicates, nothing is silently fixed.
// ---------------------------------------------------------------------------

pub const BUILTIN_NAMES: [&str; 6] = [
    "two_qubit_general",
    "two_qubit_symmetric",
    "two_qubit_schmidt",
    "three_qubit_general",
    "three_qubit_ghzw",
    "nqubit_ghz",
];

/// Look up a printed form by name. `n` is required for `nqubit_ghz` and
/// ignored otherwise.
pub fn builtin_form(name: &str, n: Option<usize>) -> Result<QuadraticForm> {
    match name {
        "two_qubit_general" => two_qubit_general(),
        "two_qubit_symmetric" => two_qubit_symmetric(),
        "two_qubit_schmidt" => two_qubit_schmidt(),
        "three_qubit_general" => three_qubit_general(),
        "three_qubit_ghzw" => three_qubit_ghzw(),
        "nqubit_ghz" => nqubit_ghz(n.ok_or_else(|| {
            Error::Precondition("nqubit_ghz requires the qubit count n".into())
        })?),
        other => Err(Error::UnknownForm(other.into())),
    }
}

fn sq(label: &[usize], coeff: f64) -> (ObservableLabel, ObservableLabel, f64) {
    let l = ObservableLabel::new(label.to_vec());
    (l.clone(), l, coeff)
}

/// `C^2 = (1 + <33>^2 - <30>^2 - <03>^2 - <01>^2 + <31>^2 - <02>^2 + <32>^2) / 2`.
fn two_qubit_general() -> Result<QuadraticForm> {
    let h = 0.5;
    QuadraticForm::new(
        vec![2, 2],
        h,
        vec![
            sq(&[3, 3], h),
            sq(&[3, 0], -h),
            sq(&[0, 3], -h),
            sq(&[0, 1], -h),
            sq(&[3, 1], h),
            sq(&[0, 2], -h),
            sq(&[3, 2], h),
        ],
    )
}

/// Exchange-symmetric variant with the printed 1/16 prefactor. Proportional
/// to the two-qubit determinant form with constant 4, which the audit
/// records.
fn two_qubit_symmetric() -> Result<QuadraticForm> {
    let s = 1.0 / 16.0;
    QuadraticForm::new(
        vec![2, 2],
        2.0 * s,
        vec![
            sq(&[3, 3], 2.0 * s),
            sq(&[3, 0], -2.0 * s),
            sq(&[0, 3], -2.0 * s),
            sq(&[0, 1], -s),
            sq(&[1, 0], -s),
            sq(&[3, 1], s),
            sq(&[1, 3], s),
            sq(&[0, 2], -s),
            sq(&[2, 0], -s),
            sq(&[3, 2], s),
            sq(&[2, 3], s),
        ],
    )
}

/// Schmidt-decomposition form `(1 + <33>^2 - <03>^2 - <30>^2) / 8`. On
/// Schmidt states it yields `|a0 a1|^2`, a factor 4 below the determinant
/// form.
fn two_qubit_schmidt() -> Result<QuadraticForm> {
    let e = 1.0 / 8.0;
    QuadraticForm::new(
        vec![2, 2],
        e,
        vec![sq(&[3, 3], e), sq(&[0, 3], -e), sq(&[3, 0], -e)],
    )
}

/// The sigma0/sigma3 family shared by the general three-qubit form and the
/// GHZ/W one-setting form: coefficient times 1/4 on each squared term.
const THREE_QUBIT_DIAG_TERMS: [([usize; 3], f64); 7] = [
    ([0, 3, 0], -5.0),
    ([0, 0, 3], -5.0),
    ([3, 0, 0], -5.0),
    ([0, 3, 3], 1.0),
    ([3, 3, 0], 1.0),
    ([3, 0, 3], 1.0),
    ([3, 3, 3], 3.0),
];

const THREE_QUBIT_OFFDIAG_TERMS: [([usize; 3], f64); 24] = [
    // sigma1 family
    ([0, 0, 1], -3.0),
    ([0, 1, 0], -3.0),
    ([1, 0, 0], -3.0),
    ([0, 3, 1], -1.0),
    ([1, 0, 3], -1.0),
    ([3, 1, 0], -1.0),
    ([0, 1, 3], 3.0),
    ([3, 0, 1], 3.0),
    ([1, 3, 0], 3.0),
    ([3, 3, 1], 1.0),
    ([3, 1, 3], 1.0),
    ([1, 3, 3], 1.0),
    // sigma2 family
    ([0, 0, 2], -3.0),
    ([0, 2, 0], -3.0),
    ([2, 0, 0], -3.0),
    ([0, 3, 2], -1.0),
    ([2, 0, 3], -1.0),
    ([3, 2, 0], -1.0),
    ([0, 2, 3], 3.0),
    ([3, 0, 2], 3.0),
    ([2, 3, 0], 3.0),
    ([3, 3, 2], 1.0),
    ([3, 2, 3], 1.0),
    ([2, 3, 3], 1.0),
];

/// General three-qubit form: constant 9/4 plus 31 squared terms.
fn three_qubit_general() -> Result<QuadraticForm> {
    let mut terms = Vec::new();
    for (label, c) in THREE_QUBIT_DIAG_TERMS
        .iter()
        .chain(THREE_QUBIT_OFFDIAG_TERMS.iter())
    {
        terms.push(sq(label, c / 4.0));
    }
    QuadraticForm::new(vec![2, 2, 2], 9.0 / 4.0, terms)
}

/// One-setting form for generalized GHZ and W states: the sigma0/sigma3
/// family only.
fn three_qubit_ghzw() -> Result<QuadraticForm> {
    let terms = THREE_QUBIT_DIAG_TERMS
        .iter()
        .map(|(label, c)| sq(label, c / 4.0))
        .collect();
    QuadraticForm::new(vec![2, 2, 2], 9.0 / 4.0, terms)
}

/// N-qubit GHZ form, transcribed with both sums ranging over ordered pairs
/// of nonempty subsets of matching parity: even-even pairs enter with +1,
/// odd-odd pairs with -1, plus the constant 1. Under this reading the form
/// disagrees with the canonical GHZ concurrence (already at N = 2); the
/// audit records the counterexamples rather than guessing another index
/// convention.
fn nqubit_ghz(n: usize) -> Result<QuadraticForm> {
    if n < 2 {
        return Err(Error::SingleSite);
    }
    if n > 8 {
        return Err(Error::SizeLimit { dim: n, limit: 8 });
    }
    let subset_label = |mask: u32| {
        ObservableLabel::new(
            (0..n)
                .map(|k| if mask >> k & 1 == 1 { 3 } else { 0 })
                .collect(),
        )
    };
    let masks: Vec<u32> = (1..(1u32 << n)).collect();
    let mut raw = Vec::new();
    for &s in &masks {
        for &t in &masks {
            let (ps, pt) = (s.count_ones() % 2, t.count_ones() % 2);
            if ps != pt {
                continue;
            }
            let sign = if ps == 0 { 1.0 } else { -1.0 };
            raw.push((subset_label(s), subset_label(t), sign));
        }
    }
    QuadraticForm::new(vec![2; n], 1.0, raw)
}

// ---------------------------------------------------------------------------
// Measurement settings
// ---------------------------------------------------------------------------

/// One fixed basis choice per site: a non-identity generator index for each
/// measured site, or 0 for a free site (measured in any fixed basis and
/// marginalized). At least one site is measured.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeasurementSetting(pub Vec<usize>);

impl MeasurementSetting {
    pub fn new(per_site: Vec<usize>) -> Result<Self> {
        if per_site.iter().all(|&g| g == 0) {
            return Err(Error::Precondition(
                "a measurement setting needs at least one measured site".into(),
            ));
        }
        Ok(MeasurementSetting(per_site))
    }

    pub fn per_site(&self) -> &[usize] {
        &self.0
    }

    pub fn n_sites(&self) -> usize {
        self.0.len()
    }

    /// A label is obtainable from this setting when every non-identity site
    /// of the label is measured in exactly that generator; identity sites
    /// are marginalized from the same data.
    pub fn covers(&self, label: &ObservableLabel) -> bool {
        self.0.len() == label.n_sites()
            && label
                .indices()
                .iter()
                .zip(&self.0)
                .all(|(&l, &s)| l == 0 || l == s)
    }
}

impl std::fmt::Display for MeasurementSetting {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, g) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{g}")?;
        }
        write!(f, ")")
    }
}

/// Plan a minimal-ish set of settings covering every label of the form:
/// greedy cover, picking the candidate covering the most uncovered labels,
/// ties broken by the lexicographically largest setting. (Largest, not
/// smallest: a smallest tie-break walks into mixed settings like (2,2,3)
/// on the general three-qubit form and lands at 8 settings instead of the
/// printed 7.) Settings are returned in pick order. Qubit sites only; the
/// all-identity label needs no measurement and is excluded from the cover.
pub fn settings_of_form(form: &QuadraticForm) -> Result<Vec<MeasurementSetting>> {
    for (site, &d) in form.dims().iter().enumerate() {
        if d != 2 {
            return Err(Error::NonQubitSite { site, dim: d });
        }
    }
    let n = form.dims().len();
    let labels: Vec<ObservableLabel> = form
        .labels()
        .into_iter()
        .filter(|l| !l.is_identity())
        .collect();
    if labels.is_empty() {
        return Ok(Vec::new());
    }

    // candidate settings: per site, only generators some label actually uses
    let mut used: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for l in &labels {
        for (k, &g) in l.indices().iter().enumerate() {
            if g != 0 {
                used[k].insert(g);
            }
        }
    }
    let mut candidates: Vec<Vec<usize>> = vec![Vec::new()];
    for k in 0..n {
        let choices: Vec<usize> = if used[k].is_empty() {
            vec![0]
        } else {
            used[k].iter().copied().collect()
        };
        candidates = candidates
            .iter()
            .flat_map(|prefix| {
                choices.iter().map(move |&g| {
                    let mut next = prefix.clone();
                    next.push(g);
                    next
                })
            })
            .collect();
        if candidates.len() * labels.len() > 1 << 26 {
            return Err(Error::SizeLimit {
                dim: candidates.len(),
                limit: 1 << 26,
            });
        }
    }

    let covers = |setting: &[usize], label: &ObservableLabel| {
        label
            .indices()
            .iter()
            .zip(setting)
            .all(|(&l, &s)| l == 0 || l == s)
    };

    let mut uncovered: Vec<&ObservableLabel> = labels.iter().collect();
    let mut picked = Vec::new();
    while !uncovered.is_empty() {
        let mut best: Option<(usize, &Vec<usize>)> = None;
        for cand in &candidates {
            let count = uncovered.iter().filter(|l| covers(cand, l)).count();
            if count == 0 {
                continue;
            }
            best = match best {
                None => Some((count, cand)),
                Some((bc, bs)) => {
                    if count > bc || (count == bc && cand > bs) {
                        Some((count, cand))
                    } else {
                        Some((bc, bs))
                    }
                }
            };
        }
        let (_, setting) = best.expect("every label is covered by some candidate");
        uncovered.retain(|l| !covers(setting, l));
        picked.push(MeasurementSetting(setting.clone()));
    }
    Ok(picked)
}

/// The projector-count estimate `16 P(++) P(--)` with `P` from projections
/// onto `|++>` and `|-->`. This is an audit subject, not a trusted
/// estimator: it already fails on `|00>`.
pub fn schmidt_projector_estimate(state: &PureState) -> Result<f64> {
    if state.dims() != [2, 2] {
        return Err(Error::BadDims(format!(
            "schmidt_projector_estimate needs dims [2, 2], got {:?}",
            state.dims()
        )));
    }
    let a = state.amps();
    let half = Complex64::new(0.5, 0.0);
    let plus = (a[0] + a[1] + a[2] + a[3]) * half;
    let minus = (a[0] - a[1] - a[2] + a[3]) * half;
    Ok(16.0 * plus.norm_sqr() * minus.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concurrence::{three_qubit_c2, two_qubit_c2};
    use crate::statevec::{coherence_loss_mixture, families};

    const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn eq7_shape_and_benchmarks() {
        let form = builtin_form("two_qubit_general", None).unwrap();
        assert_eq!(form.n_terms(), 7);
        assert!((form.constant() - 0.5).abs() < 1e-15);
        assert!((form.evaluate(&families::bell()).unwrap() - 1.0).abs() < 1e-12);
        let plus2 = families::plus_n(2).unwrap();
        assert!(form.evaluate(&plus2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn eq7_matches_determinant_form() {
        let form = builtin_form("two_qubit_general", None).unwrap();
        for seed in 0..200 {
            let psi = PureState::random_haar(&[2, 2], seed).unwrap();
            let d = (form.evaluate(&psi).unwrap() - two_qubit_c2(&psi).unwrap()).abs();
            assert!(d < 1e-10, "seed {seed}: {d}");
        }
    }

    #[test]
    fn symmetric_variant_is_quarter_of_determinant_form() {
        // the printed footnote carries prefactor 1/16; numerically the form
        // comes out at exactly one quarter of the determinant form, and the
        // audit publishes that constant
        let form = builtin_form("two_qubit_symmetric", None).unwrap();
        for seed in 0..200 {
            let psi = PureState::random_haar(&[2, 2], seed).unwrap();
            let d = (4.0 * form.evaluate(&psi).unwrap() - two_qubit_c2(&psi).unwrap()).abs();
            assert!(d < 1e-10, "seed {seed}: {d}");
        }
    }

    #[test]
    fn schmidt_form_on_schmidt_states() {
        let form = builtin_form("two_qubit_schmidt", None).unwrap();
        for seed in 0..100 {
            let q = PureState::random_haar(&[2], seed).unwrap();
            let psi = families::schmidt(q.amp(0), q.amp(1)).unwrap();
            let want = (q.amp(0) * q.amp(1)).norm_sqr();
            let d = (form.evaluate(&psi).unwrap() - want).abs();
            assert!(d < 1e-12, "seed {seed}: {d}");
        }
    }

    #[test]
    fn eq10_shape_and_equality_with_eq9() {
        let form = builtin_form("three_qubit_general", None).unwrap();
        assert_eq!(form.n_terms(), 31);
        assert!((form.constant() - 2.25).abs() < 1e-15);
        for seed in 0..200 {
            let psi = PureState::random_haar(&[2, 2, 2], seed).unwrap();
            let d = (form.evaluate(&psi).unwrap() - three_qubit_c2(&psi).unwrap()).abs();
            assert!(d < 1e-10, "seed {seed}: {d}");
        }
    }

    #[test]
    fn eq10_permutation_invariant_evaluation() {
        let form = builtin_form("three_qubit_general", None).unwrap();
        for seed in 0..30 {
            let psi = PureState::random_haar(&[2, 2, 2], seed).unwrap();
            let value = form.evaluate(&psi).unwrap();
            for perm in [
                [0usize, 2, 1],
                [1, 0, 2],
                [1, 2, 0],
                [2, 0, 1],
                [2, 1, 0],
            ] {
                let mut amps = vec![Complex64::default(); 8];
                for idx in 0..8usize {
                    let b = [idx >> 2 & 1, idx >> 1 & 1, idx & 1];
                    let p = b[perm[0]] << 2 | b[perm[1]] << 1 | b[perm[2]];
                    amps[p] = psi.amp(idx);
                }
                let permuted = PureState::new(vec![2, 2, 2], amps).unwrap();
                assert!(
                    (form.evaluate(&permuted).unwrap() - value).abs() < 1e-12,
                    "seed {seed} perm {perm:?}"
                );
            }
        }
    }

    #[test]
    fn eq11_on_w_state() {
        let form = builtin_form("three_qubit_ghzw", None).unwrap();
        let third = c(1.0 / 3.0f64.sqrt());
        let w3 = families::w(&[third, third, third]).unwrap();
        assert!((form.evaluate(&w3).unwrap() - 8.0 / 3.0).abs() < 1e-12);
        let ghz3 = families::ghz(3, c(INV_SQRT2), c(INV_SQRT2)).unwrap();
        assert!((form.evaluate(&ghz3).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eq12_structure_and_known_values() {
        let form = builtin_form("nqubit_ghz", Some(2)).unwrap();
        assert!((form.constant() - 1.0).abs() < 1e-15);
        // +1 on the even-even pair, -1/-2 on the odd-odd pairs after merging
        let ghz_eq = families::bell();
        assert!((form.evaluate(&ghz_eq).unwrap() - 2.0).abs() < 1e-12);
        let product = families::ghz(2, c(1.0), c(0.0)).unwrap();
        assert!((form.evaluate(&product).unwrap() + 2.0).abs() < 1e-12);
        assert!(builtin_form("nqubit_ghz", None).is_err());
        assert!(builtin_form("does_not_exist", None).is_err());
    }

    #[test]
    fn evaluate_mixed_examples() {
        let form = builtin_form("two_qubit_general", None).unwrap();
        let a = c(INV_SQRT2);
        let pure_limit = coherence_loss_mixture(a, a, 0.0).unwrap();
        assert!((form.evaluate_mixed(&pure_limit).unwrap() - 1.0).abs() < 1e-12);
        // pure-state forms are invalid on generic mixed states: document the
        // maximally mixed value 1/2
        let mixed = DensityMatrix::maximally_mixed(4);
        assert!((form.evaluate_mixed(&mixed).unwrap() - 0.5).abs() < 1e-12);
        // the Schmidt form on the mixture reproduces the eps-independent value
        let schmidt = builtin_form("two_qubit_schmidt", None).unwrap();
        for eps in [0.0, 0.1, 0.3] {
            let rho = coherence_loss_mixture(a, a, eps).unwrap();
            let got = schmidt.evaluate_mixed(&rho).unwrap();
            assert!((got - 0.25).abs() < 1e-12, "eps={eps}: {got}");
        }
    }

    #[test]
    fn settings_counts_match_remark() {
        let eq7 = builtin_form("two_qubit_general", None).unwrap();
        let s7 = settings_of_form(&eq7).unwrap();
        assert_eq!(s7.len(), 3);
        let set: BTreeSet<_> = s7.iter().map(|s| s.per_site().to_vec()).collect();
        assert_eq!(
            set,
            BTreeSet::from([vec![3, 1], vec![3, 2], vec![3, 3]])
        );

        let eq10 = builtin_form("three_qubit_general", None).unwrap();
        let s10 = settings_of_form(&eq10).unwrap();
        assert_eq!(s10.len(), 7);
        let set: BTreeSet<_> = s10.iter().map(|s| s.per_site().to_vec()).collect();
        assert_eq!(
            set,
            BTreeSet::from([
                vec![3, 3, 3],
                vec![3, 3, 1],
                vec![3, 1, 3],
                vec![1, 3, 3],
                vec![3, 3, 2],
                vec![3, 2, 3],
                vec![2, 3, 3],
            ])
        );

        let eq11 = builtin_form("three_qubit_ghzw", None).unwrap();
        let s11 = settings_of_form(&eq11).unwrap();
        assert_eq!(s11.len(), 1);
        assert_eq!(s11[0].per_site(), &[3, 3, 3]);
    }

    #[test]
    fn settings_cover_every_label() {
        for (name, n) in [
            ("two_qubit_general", None),
            ("two_qubit_symmetric", None),
            ("two_qubit_schmidt", None),
            ("three_qubit_general", None),
            ("three_qubit_ghzw", None),
            ("nqubit_ghz", Some(4)),
        ] {
            let form = builtin_form(name, n).unwrap();
            let settings = settings_of_form(&form).unwrap();
            for label in form.labels() {
                if label.is_identity() {
                    continue;
                }
                assert!(
                    settings.iter().any(|s| s.covers(&label)),
                    "{name}: label {label} uncovered"
                );
            }
        }
    }

    #[test]
    fn settings_reject_qudits() {
        let form = QuadraticForm::new(vec![2, 3], 0.0, vec![sq(&[3, 1], 1.0)]).unwrap();
        assert!(matches!(
            settings_of_form(&form),
            Err(Error::NonQubitSite { site: 1, dim: 3 })
        ));
    }

    #[test]
    fn projector_claim_values() {
        // fails on |00>: claims 1 where the true C^2 is 0
        let zz = families::basis_state(&[2, 2], 0).unwrap();
        assert!((schmidt_projector_estimate(&zz).unwrap() - 1.0).abs() < 1e-12);
        assert!(two_qubit_c2(&zz).unwrap().abs() < 1e-15);
        // |a0 + a1|^4 on Schmidt states: 3.8416 at (0.6, 0.8)
        let s = families::schmidt(c(0.6), c(0.8)).unwrap();
        assert!((schmidt_projector_estimate(&s).unwrap() - 3.8416).abs() < 1e-12);
        assert!((two_qubit_c2(&s).unwrap() - 0.9216).abs() < 1e-12);
        // Bell: the claim gives 4, not the true 1
        let claim = schmidt_projector_estimate(&families::bell()).unwrap();
        assert!((claim - 4.0).abs() < 1e-12);
        // exact agreement locus a0 a1 = -1/4
        let theta = -std::f64::consts::PI / 12.0;
        let agree = families::schmidt(c(theta.cos()), c(theta.sin())).unwrap();
        let d = (schmidt_projector_estimate(&agree).unwrap() - two_qubit_c2(&agree).unwrap())
            .abs();
        assert!(d < 1e-12);
    }

    #[test]
    fn canonicalization_merges_and_orders() {
        let a = ObservableLabel::new(vec![3, 0]);
        let b = ObservableLabel::new(vec![0, 3]);
        let form = QuadraticForm::new(
            vec![2, 2],
            0.0,
            vec![
                (a.clone(), b.clone(), 0.5),
                (b.clone(), a.clone(), 0.25),
                (a.clone(), a.clone(), 1.0),
            ],
        )
        .unwrap();
        assert_eq!(form.n_terms(), 2);
        assert!(form.terms()[0].label_i <= form.terms()[0].label_j);
        let merged = form
            .terms()
            .iter()
            .find(|t| t.label_i != t.label_j)
            .unwrap();
        assert!((merged.coeff - 0.75).abs() < 1e-15);
    }

    #[test]
    fn form_json_roundtrip_and_determinism() {
        let form = builtin_form("three_qubit_general", None).unwrap();
        let s1 = serde_json::to_string(&form).unwrap();
        let s2 = serde_json::to_string(&builtin_form("three_qubit_general", None).unwrap())
            .unwrap();
        assert_eq!(s1, s2);
        let back: QuadraticForm = serde_json::from_str(&s1).unwrap();
        assert_eq!(form, back);
    }

    #[test]
    fn evaluation_invariant_under_global_phase() {
        let form = builtin_form("three_qubit_general", None).unwrap();
        let psi = PureState::random_haar(&[2, 2, 2], 17).unwrap();
        // exact invariance under the exact phase i
        let by_i = PureState::new(
            psi.dims().to_vec(),
            psi.amps().iter().map(|z| z * Complex64::i()).collect(),
        )
        .unwrap();
        assert_eq!(form.evaluate(&psi).unwrap(), form.evaluate(&by_i).unwrap());
        let phase = Complex64::from_polar(1.0, 0.777);
        let rotated = PureState::new(
            psi.dims().to_vec(),
            psi.amps().iter().map(|z| z * phase).collect(),
        )
        .unwrap();
        assert!(
            (form.evaluate(&psi).unwrap() - form.evaluate(&rotated).unwrap()).abs() < 1e-13
        );
    }
}
