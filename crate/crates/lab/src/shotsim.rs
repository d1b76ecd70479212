//! Finite-shot, single-copy local measurements: joint outcome sampling in a
//! chosen setting, per-label estimates with uncertainties, squared
//! concurrence estimation, and the coherence-loss noise scan.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::concurrence::xstate_concurrence;
use crate::error::{Error, Result};
use crate::genbasis::ObservableLabel;
use crate::quadform::{builtin_form, settings_of_form, MeasurementSetting, QuadraticForm};
use crate::statevec::{coherence_loss_mixture, DensityMatrix, PureState};
use crate::tensor;

/// Bootstrap resample count for error bars: a compromise between runtime
/// and error-bar stability.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Calibration constant converting the printed Schmidt-decomposition form
/// to the canonical squared concurrence; measured by the audit module
/// (`eq8` is proportional to the determinant form with constant 4).
pub const SCHMIDT_FORM_CALIBRATION: f64 = 4.0;

/// Estimator for products of expectation values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Substitute sample means directly; biased by the variance of squared
    /// means.
    Plugin,
    /// Take each product from two disjoint half-samples; unbiased for
    /// products of independent means. Needs at least 2 shots per setting.
    SplitHalf,
}

/// What to measure and how often.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShotPlan {
    pub settings: Vec<MeasurementSetting>,
    pub shots_per_setting: u64,
    pub seed: u64,
    pub estimator: Estimator,
}

/// A state to draw shots from.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    Pure(&'a PureState),
    Mixed(&'a DensityMatrix, &'a [usize]),
}

impl Source<'_> {
    pub fn dims(&self) -> &[usize] {
        match self {
            Source::Pure(psi) => psi.dims(),
            Source::Mixed(_, dims) => dims,
        }
    }
}

/// Outcome histogram of one setting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeCounts {
    pub setting: MeasurementSetting,
    pub dims: Vec<usize>,
    pub shots: u64,
    /// Per-site outcome tuple -> count. Measured qubit sites report the
    /// eigenbasis slot (0 for +1, 1 for -1); free sites report the
    /// computational index and only ever get marginalized.
    pub counts: BTreeMap<Vec<usize>, u64>,
}

/// Eigenbasis rows (bras) of the qubit generators, +1 eigenvector first.
fn qubit_eigenbasis(g: usize) -> Result<DMatrix<Complex64>> {
    let c = Complex64::new;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match g {
        // sigma1: <+| and <-|
        1 => Ok(DMatrix::from_row_slice(
            2,
            2,
            &[c(s, 0.), c(s, 0.), c(s, 0.), c(-s, 0.)],
        )),
        // sigma2 with the printed ((0, i), (-i, 0)) convention:
        // eigenvectors (1, -i)/sqrt(2) and (1, i)/sqrt(2)
        2 => Ok(DMatrix::from_row_slice(
            2,
            2,
            &[c(s, 0.), c(0., s), c(s, 0.), c(0., -s)],
        )),
        3 => Ok(DMatrix::identity(2, 2)),
        other => Err(Error::GeneratorOutOfRange {
            index: other,
            dim: 2,
        }),
    }
}

fn setting_probabilities(source: &Source, setting: &MeasurementSetting) -> Result<Vec<f64>> {
    let dims = source.dims();
    if setting.n_sites() != dims.len() {
        return Err(Error::DimensionMismatch {
            expected: dims.len(),
            got: setting.n_sites(),
        });
    }
    for (site, &g) in setting.per_site().iter().enumerate() {
        if g == 0 {
            continue;
        }
        if dims[site] != 2 {
            return Err(Error::NonQubitSite {
                site,
                dim: dims[site],
            });
        }
        qubit_eigenbasis(g)?;
    }
    match source {
        Source::Pure(psi) => {
            let mut v = psi.amps().clone();
            for (site, &g) in setting.per_site().iter().enumerate() {
                if g == 0 || g == 3 {
                    continue;
                }
                tensor::apply_site_op(&mut v, dims, site, &qubit_eigenbasis(g)?);
            }
            Ok(v.iter().map(|z| z.norm_sqr()).collect())
        }
        Source::Mixed(rho, _) => {
            let total: usize = dims.iter().product();
            if rho.dim() != total {
                return Err(Error::DimensionMismatch {
                    expected: total,
                    got: rho.dim(),
                });
            }
            let per_site: Vec<DMatrix<Complex64>> = setting
                .per_site()
                .iter()
                .enumerate()
                .map(|(site, &g)| {
                    if g == 0 {
                        Ok(DMatrix::identity(dims[site], dims[site]))
                    } else {
                        qubit_eigenbasis(g)
                    }
                })
                .collect::<Result<_>>()?;
            let w = tensor::kron_all(&per_site.iter().collect::<Vec<_>>());
            let rotated = &w * rho.entries() * w.adjoint();
            Ok((0..total).map(|i| rotated[(i, i)].re.max(0.0)).collect())
        }
    }
}

/// Draw `shots` outcome tuples from the exact joint distribution of the
/// setting's per-site eigenbases. Deterministic per seed.
pub fn sample_setting(
    source: &Source,
    setting: &MeasurementSetting,
    shots: u64,
    seed: u64,
) -> Result<OutcomeCounts> {
    let dims = source.dims().to_vec();
    let probs = setting_probabilities(source, setting)?;
    // cumulative distribution over the support only, so rounding in the tail
    // can never select a zero-probability outcome
    let mut support: Vec<(usize, f64)> = Vec::new();
    let mut cum = 0.0;
    for (idx, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            support.push((idx, cum));
        }
    }
    if support.is_empty() {
        return Err(Error::Precondition("empty outcome distribution".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    for _ in 0..shots {
        let u: f64 = rng.gen();
        let pos = support.partition_point(|&(_, c)| c <= u);
        let (flat, _) = support[pos.min(support.len() - 1)];
        *counts.entry(tensor::unravel(flat, &dims)).or_insert(0) += 1;
    }
    Ok(OutcomeCounts {
        setting: setting.clone(),
        dims,
        shots,
        counts,
    })
}

/// Mean and standard error of one label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelEstimate {
    pub label: ObservableLabel,
    pub mean: f64,
    pub std_error: f64,
}

fn label_mean(counts: &OutcomeCounts, label: &ObservableLabel) -> Result<f64> {
    if !counts.setting.covers(label) {
        return Err(Error::SettingMismatch {
            label: label.to_string(),
            setting: counts.setting.to_string(),
        });
    }
    if counts.shots == 0 {
        return Err(Error::Precondition("no shots recorded".into()));
    }
    let mut sum = 0i64;
    for (outcome, &cnt) in &counts.counts {
        let mut val = 1i64;
        for (k, &g) in label.indices().iter().enumerate() {
            if g != 0 && outcome[k] == 1 {
                val = -val;
            }
        }
        sum += val * cnt as i64;
    }
    Ok(sum as f64 / counts.shots as f64)
}

/// Estimate the listed labels from one setting's counts: the mean is the
/// count-weighted product of +-1 eigenvalues at the label's non-identity
/// sites, the standard error is the sample standard deviation over sqrt(shots).
pub fn estimate_labels(
    counts: &OutcomeCounts,
    labels: &[ObservableLabel],
) -> Result<Vec<LabelEstimate>> {
    labels
        .iter()
        .map(|label| {
            let mean = label_mean(counts, label)?;
            let std_error = if counts.shots > 1 {
                ((1.0 - mean * mean).max(0.0) / (counts.shots - 1) as f64).sqrt()
            } else {
                0.0
            };
            Ok(LabelEstimate {
                label: label.clone(),
                mean,
                std_error,
            })
        })
        .collect()
}

/// Per-label entry of an [`EstimateReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelReport {
    pub label: ObservableLabel,
    pub setting: MeasurementSetting,
    pub mean: f64,
    pub std_error: f64,
}

/// Shot-based squared-concurrence estimate with bootstrap uncertainty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator: Estimator,
    pub seed: u64,
    pub settings_used: usize,
    pub shots_per_setting: u64,
    pub shots_total: u64,
    pub labels: Vec<LabelReport>,
    pub c2_estimate: f64,
    pub c2_std_error: f64,
}

/// splitmix64, for deriving independent child seeds.
fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct SettingData {
    half_a: OutcomeCounts,
    half_b: OutcomeCounts,
    combined: OutcomeCounts,
}

fn merge_counts(a: &OutcomeCounts, b: &OutcomeCounts) -> OutcomeCounts {
    let mut counts = a.counts.clone();
    for (k, &v) in &b.counts {
        *counts.entry(k.clone()).or_insert(0) += v;
    }
    OutcomeCounts {
        setting: a.setting.clone(),
        dims: a.dims.clone(),
        shots: a.shots + b.shots,
        counts,
    }
}

fn c2_from_data(
    form: &QuadraticForm,
    assignment: &BTreeMap<ObservableLabel, usize>,
    data: &[SettingData],
    estimator: Estimator,
) -> Result<f64> {
    let mean = |counts: &OutcomeCounts, label: &ObservableLabel| -> Result<f64> {
        if label.is_identity() {
            Ok(1.0)
        } else {
            label_mean(counts, label)
        }
    };
    let mut total = form.constant();
    for t in form.terms() {
        let (li, lj) = (&t.label_i, &t.label_j);
        let product = match estimator {
            Estimator::Plugin => {
                let mi = if li.is_identity() {
                    1.0
                } else {
                    mean(&data[assignment[li]].combined, li)?
                };
                let mj = if lj.is_identity() {
                    1.0
                } else {
                    mean(&data[assignment[lj]].combined, lj)?
                };
                mi * mj
            }
            Estimator::SplitHalf => {
                if li.is_identity() || lj.is_identity() {
                    let (l, other_identity) = if li.is_identity() { (lj, li) } else { (li, lj) };
                    debug_assert!(other_identity.is_identity() || !l.is_identity());
                    if l.is_identity() {
                        1.0
                    } else {
                        mean(&data[assignment[l]].combined, l)?
                    }
                } else if assignment[li] == assignment[lj] {
                    // same setting: disjoint halves keep the factors independent
                    let d = &data[assignment[li]];
                    mean(&d.half_a, li)? * mean(&d.half_b, lj)?
                } else {
                    // different settings are independent samples already
                    mean(&data[assignment[li]].combined, li)?
                        * mean(&data[assignment[lj]].combined, lj)?
                }
            }
        };
        total += t.coeff * product;
    }
    Ok(total)
}

fn resample_counts(counts: &OutcomeCounts, rng: &mut ChaCha8Rng) -> OutcomeCounts {
    let n = counts.shots;
    let mut out = BTreeMap::new();
    if n == 0 {
        return OutcomeCounts {
            setting: counts.setting.clone(),
            dims: counts.dims.clone(),
            shots: 0,
            counts: out,
        };
    }
    // multinomial resampling by conditional binomials over the observed support
    let entries: Vec<(&Vec<usize>, u64)> = counts.counts.iter().map(|(k, &v)| (k, v)).collect();
    let mut remaining = n;
    let mut weight_left = n as f64;
    for (i, &(outcome, cnt)) in entries.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let draw = if i + 1 == entries.len() {
            remaining
        } else {
            let p = (cnt as f64 / weight_left).clamp(0.0, 1.0);
            Binomial::new(remaining, p)
                .expect("clamped probability")
                .sample(rng)
        };
        if draw > 0 {
            out.insert(outcome.clone(), draw);
        }
        remaining -= draw;
        weight_left -= cnt as f64;
    }
    OutcomeCounts {
        setting: counts.setting.clone(),
        dims: counts.dims.clone(),
        shots: n,
        counts: out,
    }
}

/// Estimate `form` on `source` under `plan`: sample every planned setting,
/// assemble the estimator, and attach a seeded 200-resample bootstrap
/// standard error. Estimates are reported raw, never clamped.
pub fn estimate_c2(form: &QuadraticForm, source: &Source, plan: &ShotPlan) -> Result<EstimateReport> {
    if plan.shots_per_setting == 0 {
        return Err(Error::Precondition("shots_per_setting must be >= 1".into()));
    }
    if plan.estimator == Estimator::SplitHalf && plan.shots_per_setting < 2 {
        return Err(Error::Precondition(
            "split-half estimation needs shots_per_setting >= 2".into(),
        ));
    }
    // the planned settings must include everything the form requires
    let required = settings_of_form(form)?;
    for r in &required {
        if !plan.settings.contains(r) {
            return Err(Error::InsufficientSettings(r.to_string()));
        }
    }
    // each label reads from the first planned setting that produces it
    let mut assignment: BTreeMap<ObservableLabel, usize> = BTreeMap::new();
    for label in form.labels() {
        if label.is_identity() {
            continue;
        }
        let idx = plan
            .settings
            .iter()
            .position(|s| s.covers(&label))
            .ok_or_else(|| Error::InsufficientSettings(label.to_string()))?;
        assignment.insert(label, idx);
    }

    let n = plan.shots_per_setting;
    let (n_a, n_b) = (n / 2, n - n / 2);
    let mut data = Vec::with_capacity(plan.settings.len());
    for (k, setting) in plan.settings.iter().enumerate() {
        let half_a = sample_setting(source, setting, n_a, derive_seed(plan.seed, 2 * k as u64))?;
        let half_b = sample_setting(
            source,
            setting,
            n_b,
            derive_seed(plan.seed, 2 * k as u64 + 1),
        )?;
        let combined = merge_counts(&half_a, &half_b);
        data.push(SettingData {
            half_a,
            half_b,
            combined,
        });
    }

    let c2_estimate = c2_from_data(form, &assignment, &data, plan.estimator)?;

    let mut boot_rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.seed, 0xB007));
    let mut boot_values = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        let resampled: Vec<SettingData> = data
            .iter()
            .map(|d| {
                let half_a = resample_counts(&d.half_a, &mut boot_rng);
                let half_b = resample_counts(&d.half_b, &mut boot_rng);
                let combined = merge_counts(&half_a, &half_b);
                SettingData {
                    half_a,
                    half_b,
                    combined,
                }
            })
            .collect();
        boot_values.push(c2_from_data(form, &assignment, &resampled, plan.estimator)?);
    }
    let boot_mean = boot_values.iter().sum::<f64>() / boot_values.len() as f64;
    let c2_std_error = (boot_values
        .iter()
        .map(|v| (v - boot_mean) * (v - boot_mean))
        .sum::<f64>()
        / (boot_values.len() - 1) as f64)
        .sqrt();

    let mut labels = Vec::new();
    for (label, &idx) in &assignment {
        let est = estimate_labels(&data[idx].combined, std::slice::from_ref(label))?;
        labels.push(LabelReport {
            label: label.clone(),
            setting: plan.settings[idx].clone(),
            mean: est[0].mean,
            std_error: est[0].std_error,
        });
    }

    Ok(EstimateReport {
        estimator: plan.estimator,
        seed: plan.seed,
        settings_used: plan.settings.len(),
        shots_per_setting: n,
        shots_total: plan.settings.len() as u64 * n,
        labels,
        c2_estimate,
        c2_std_error,
    })
}

/// One row of the coherence-loss scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseScanRow {
    pub eps: f64,
    /// Calibrated formula estimate of C^2 (Schmidt form times its
    /// calibration constant), from shots.
    pub c2_est: f64,
    pub c2_std_error: f64,
    /// Squared actual concurrence of the mixture.
    pub c2_actual: f64,
    pub c_formula: f64,
    pub c_actual: f64,
    /// `(C_formula - C_actual) / C_actual`; equals `eps/(1-eps)` exactly in
    /// the shot-free limit.
    pub rel_err: f64,
    pub rel_err_std_error: f64,
}

/// Scan the coherence-loss family: for each epsilon, estimate C through the
/// Schmidt-form pipeline from shots and compare with the exact mixed-state
/// concurrence.
pub fn noise_scan(
    alpha: Complex64,
    beta: Complex64,
    eps_grid: &[f64],
    plan: &ShotPlan,
) -> Result<Vec<NoiseScanRow>> {
    if (alpha * beta).norm() < 1e-12 {
        return Err(Error::Precondition(
            "alpha*beta = 0 makes the relative error undefined".into(),
        ));
    }
    if let Some(&bad) = eps_grid.iter().find(|&&e| !(0.0..1.0).contains(&e)) {
        return Err(Error::EpsOutOfRange(bad));
    }
    let form = builtin_form("two_qubit_schmidt", None)?;
    let dims = [2usize, 2];
    let mut rows = Vec::with_capacity(eps_grid.len());
    for (i, &eps) in eps_grid.iter().enumerate() {
        let rho = coherence_loss_mixture(alpha, beta, eps)?;
        let row_plan = ShotPlan {
            settings: plan.settings.clone(),
            shots_per_setting: plan.shots_per_setting,
            seed: plan.seed.wrapping_add(i as u64),
            estimator: plan.estimator,
        };
        let report = estimate_c2(&form, &Source::Mixed(&rho, &dims), &row_plan)?;
        let c2_est = SCHMIDT_FORM_CALIBRATION * report.c2_estimate;
        let c2_std_error = SCHMIDT_FORM_CALIBRATION * report.c2_std_error;
        let c_formula = c2_est.sqrt();
        let c_actual = xstate_concurrence(&rho)?;
        let rel_err = (c_formula - c_actual) / c_actual;
        // sigma(C) = sigma(C^2) / (2 sqrt(C^2))
        let rel_err_std_error = c2_std_error / (2.0 * c_formula) / c_actual;
        rows.push(NoiseScanRow {
            eps,
            c2_est,
            c2_std_error,
            c2_actual: c_actual * c_actual,
            c_formula,
            c_actual,
            rel_err,
            rel_err_std_error,
        });
    }
    Ok(rows)
}

/// Render scan rows as the CSV emitted by the CLI.
pub fn noise_scan_csv(rows: &[NoiseScanRow]) -> String {
    let mut out = String::from("eps,c2_est,c2_actual,rel_err\n");
    for r in rows {
        out.push_str(&format!(
            "{},{:.12e},{:.12e},{:.12e}\n",
            r.eps, r.c2_est, r.c2_actual, r.rel_err
        ));
    }
    out
}
