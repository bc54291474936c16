//! Reweighting-based misspecification diagnostics: Gaussian regressor
//! weights, localized functionals over a center grid, the decile-trace
//! diagnostic with bootstrap bands, and two-weighting misspecification tests.
//!
//! A well-specified functional is invariant under regressor-dependent
//! reweighting, so a non-constant trace of weighted fits across centers is
//! evidence of misspecification.

use crate::bootstrap::{multinomial_counts, Fitter};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;
use crate::functionals::Functional;
use crate::inference::{conditional_mean_score, population_parameter};
use crate::population::SyntheticPopulation;
use crate::solver::{newton_solve, NewtonProblem, SolverConfig};
use crate::stream::SeededStream;
use nalgebra::{DMatrix, DVector};
use std::cell::RefCell;

/// Gaussian kernel weighting of one regressor around a center.
#[derive(Debug, Clone, Copy)]
pub struct KernelWeightSpec {
    pub regressor_index: usize,
    pub center: f64,
    /// Bandwidth as a multiple of the regressor's empirical sd (default 1).
    pub bandwidth_multiple: f64,
}

impl KernelWeightSpec {
    pub fn new(regressor_index: usize, center: f64) -> Self {
        Self { regressor_index, center, bandwidth_multiple: 1.0 }
    }

    pub fn with_bandwidth(mut self, multiple: f64) -> Self {
        self.bandwidth_multiple = multiple;
        self
    }
}

/// Center grid for trace diagnostics.
#[derive(Debug, Clone)]
pub enum CenterGrid {
    /// The nine interior empirical deciles of the chosen regressor.
    Deciles,
    Custom(Vec<f64>),
}

/// Options for [`reweighting_diagnostic`].
#[derive(Debug, Clone)]
pub struct DiagnosticConfig {
    pub bandwidth_multiple: f64,
    /// Pairs-bootstrap replicates for the bands (0 disables the bands).
    pub replicates: usize,
    pub stream: SeededStream,
    /// Keep every replicate trace (for plotting gray traces).
    pub keep_replicate_traces: bool,
}

impl Default for DiagnosticConfig {
    fn default() -> Self {
        Self {
            bandwidth_multiple: 1.0,
            replicates: 0,
            stream: SeededStream::new(0),
            keep_replicate_traces: false,
        }
    }
}

/// The decile-trace diagnostic: weighted estimates per center, the unweighted
/// estimate, and ±2 bootstrap-SE bands.
#[derive(Debug, Clone)]
pub struct DiagnosticTrace {
    pub centers: Vec<f64>,
    /// K×q weighted estimates (NaN rows for centers whose fit failed).
    pub theta_at_center: DMatrix<f64>,
    pub theta_unweighted: DVector<f64>,
    /// K×q bootstrap standard errors (zero when bands are disabled).
    pub boot_se: DMatrix<f64>,
    pub band_lo: DMatrix<f64>,
    pub band_hi: DMatrix<f64>,
    pub unweighted_boot_se: DVector<f64>,
    /// Replicate traces (B × K×q), kept on request.
    pub replicate_traces: Option<Vec<DMatrix<f64>>>,
    /// Unweighted estimates per replicate (B×q), kept on request.
    pub unweighted_replicates: Option<DMatrix<f64>>,
    /// Centers whose full-data weighted fit failed.
    pub failed_centers: Vec<usize>,
}

/// Weighted (population-style) standard deviation of one regressor column.
fn weighted_column_sd(data: &Dataset, j: usize) -> f64 {
    let n = data.n() as f64;
    let (mut m1, mut m2) = (0.0, 0.0);
    for i in 0..data.n() {
        let w = data.weight(i);
        let x = data.regressors()[(i, j)];
        m1 += w * x;
        m2 += w * x * x;
    }
    m1 /= n;
    m2 /= n;
    (m2 - m1 * m1).max(0.0).sqrt()
}

/// Kernel weights normalized to mean 1, computed in log space so far-out
/// centers concentrate on the nearest cases instead of underflowing.
fn kernel_weights_with_sd(
    data: &Dataset,
    j: usize,
    center: f64,
    sd: f64,
    bandwidth_multiple: f64,
) -> Result<DVector<f64>> {
    if bandwidth_multiple.is_nan() || bandwidth_multiple <= 0.0 {
        return Err(Error::InvalidInput("bandwidth multiple must be positive".into()));
    }
    if sd <= 0.0 {
        return Err(Error::DegenerateRegressor(data.column_names()[j].clone()));
    }
    let bw = bandwidth_multiple * sd;
    let n = data.n();
    let mut logs = DVector::zeros(n);
    let mut max_log = f64::NEG_INFINITY;
    for i in 0..n {
        let z = (data.regressors()[(i, j)] - center) / bw;
        logs[i] = -0.5 * z * z;
        max_log = max_log.max(logs[i]);
    }
    let mut w = DVector::from_fn(n, |i, _| (logs[i] - max_log).exp());
    let mean = w.mean();
    w /= mean;
    Ok(w)
}

/// Gaussian weights `w_i ∝ exp(-(x_ij - ξ)²/(2(α·σ̂_j)²))` rescaled to mean 1.
pub fn gaussian_weights(data: &Dataset, spec: &KernelWeightSpec) -> Result<DVector<f64>> {
    if spec.regressor_index >= data.p() {
        return Err(Error::InvalidInput(format!(
            "regressor index {} out of range",
            spec.regressor_index
        )));
    }
    let sd = weighted_column_sd(data, spec.regressor_index);
    kernel_weights_with_sd(data, spec.regressor_index, spec.center, sd, spec.bandwidth_multiple)
}

/// Type-7 empirical quantile (linear interpolation between order statistics).
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// The nine interior empirical deciles of regressor `j`.
pub fn interior_deciles(data: &Dataset, j: usize) -> Vec<f64> {
    let mut col: Vec<f64> = (0..data.n()).map(|i| data.regressors()[(i, j)]).collect();
    col.sort_by(|a, b| a.partial_cmp(b).unwrap());
    (1..=9).map(|k| quantile(&col, k as f64 / 10.0)).collect()
}

fn resolve_centers(data: &Dataset, j: usize, grid: &CenterGrid) -> Result<Vec<f64>> {
    let centers = match grid {
        CenterGrid::Deciles => interior_deciles(data, j),
        CenterGrid::Custom(c) => c.clone(),
    };
    if centers.is_empty() {
        return Err(Error::InvalidInput("empty center grid".into()));
    }
    if centers.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("centers must be strictly increasing".into()));
    }
    Ok(centers)
}

/// Compose base case weights with kernel weights and refit.
fn weighted_fit(
    fitter: &dyn Fitter,
    data: &Dataset,
    kernel: &DVector<f64>,
) -> Result<DVector<f64>> {
    let composed = DVector::from_fn(data.n(), |i, _| data.weight(i) * kernel[i]);
    let reweighted = data.clone().with_weights(composed)?;
    fitter.fit(&reweighted)
}

/// Resampled copy of `data` (multiplicity weights composed with base weights)
/// for an N-of-N pairs resample.
fn pairs_resample(data: &Dataset, stream: SeededStream) -> Result<Dataset> {
    let n = data.n();
    let mut rng = stream.rng();
    let counts = multinomial_counts(n, n, &mut rng);
    let weights = DVector::from_fn(n, |i, _| data.weight(i) * counts[i] as f64);
    data.clone().with_weights(weights)
}

/// Fit the functional on kernel-reweighted data at each center, with
/// pairs-bootstrap bands that recompute σ̂ and the weights inside every
/// resample (resample-then-weight).
pub fn reweighting_diagnostic(
    data: &Dataset,
    fitter: &dyn Fitter,
    regressor_index: usize,
    grid: &CenterGrid,
    cfg: &DiagnosticConfig,
) -> Result<DiagnosticTrace> {
    if regressor_index >= data.p() {
        return Err(Error::InvalidInput(format!("regressor index {regressor_index} out of range")));
    }
    let centers = resolve_centers(data, regressor_index, grid)?;
    let k = centers.len();
    let q = fitter.dim_for(data.p());

    let theta_unweighted = fitter.fit(data)?;
    let sd_full = weighted_column_sd(data, regressor_index);
    let mut theta_at_center = DMatrix::from_element(k, q, f64::NAN);
    let mut failed_centers = Vec::new();
    for (ki, &center) in centers.iter().enumerate() {
        let kernel = kernel_weights_with_sd(
            data,
            regressor_index,
            center,
            sd_full,
            cfg.bandwidth_multiple,
        )?;
        match weighted_fit(fitter, data, &kernel) {
            Ok(theta) => {
                for j in 0..q {
                    theta_at_center[(ki, j)] = theta[j];
                }
            }
            Err(_) => failed_centers.push(ki),
        }
    }

    let mut boot_se = DMatrix::zeros(k, q);
    let mut unweighted_boot_se = DVector::zeros(q);
    let mut replicate_traces = None;
    let mut unweighted_replicates = None;
    if cfg.replicates > 0 {
        // replicate -> (K×q trace, unweighted fit), NaN where a fit failed
        let runs: Vec<(DMatrix<f64>, DVector<f64>)> = exec::map_indexed(cfg.replicates, |b| {
            let mut trace = DMatrix::from_element(k, q, f64::NAN);
            let mut plain = DVector::from_element(q, f64::NAN);
            if let Ok(resample) = pairs_resample(data, cfg.stream.child(b as u64)) {
                if let Ok(theta) = fitter.fit(&resample) {
                    plain = theta;
                }
                let sd = weighted_column_sd(&resample, regressor_index);
                for (ki, &center) in centers.iter().enumerate() {
                    let fit = kernel_weights_with_sd(
                        &resample,
                        regressor_index,
                        center,
                        sd,
                        cfg.bandwidth_multiple,
                    )
                    .and_then(|kern| weighted_fit(fitter, &resample, &kern));
                    if let Ok(theta) = fit {
                        for j in 0..q {
                            trace[(ki, j)] = theta[j];
                        }
                    }
                }
            }
            (trace, plain)
        });
        for ki in 0..k {
            for j in 0..q {
                let values: Vec<f64> =
                    runs.iter().map(|(t, _)| t[(ki, j)]).filter(|v| v.is_finite()).collect();
                boot_se[(ki, j)] = population_sd(&values);
            }
        }
        for j in 0..q {
            let values: Vec<f64> =
                runs.iter().map(|(_, u)| u[j]).filter(|v| v.is_finite()).collect();
            unweighted_boot_se[j] = population_sd(&values);
        }
        if cfg.keep_replicate_traces {
            let mut plain = DMatrix::zeros(runs.len(), q);
            for (i, (_, u)) in runs.iter().enumerate() {
                for j in 0..q {
                    plain[(i, j)] = u[j];
                }
            }
            unweighted_replicates = Some(plain);
            replicate_traces = Some(runs.into_iter().map(|(t, _)| t).collect());
        }
    }

    let mut band_lo = DMatrix::zeros(k, q);
    let mut band_hi = DMatrix::zeros(k, q);
    for ki in 0..k {
        for j in 0..q {
            band_lo[(ki, j)] = theta_at_center[(ki, j)] - 2.0 * boot_se[(ki, j)];
            band_hi[(ki, j)] = theta_at_center[(ki, j)] + 2.0 * boot_se[(ki, j)];
        }
    }
    Ok(DiagnosticTrace {
        centers,
        theta_at_center,
        theta_unweighted,
        boot_se,
        band_lo,
        band_hi,
        unweighted_boot_se,
        replicate_traces,
        unweighted_replicates,
        failed_centers,
    })
}

fn population_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Result of a two-weighting misspecification test.
#[derive(Debug, Clone)]
pub struct MisspecTest {
    /// `θ̂_{w1} - θ̂_{w2}`.
    pub delta: DVector<f64>,
    /// Paired-bootstrap standard error of the difference.
    pub se: DVector<f64>,
    /// `delta / se` componentwise (0 where both vanish).
    pub z: DVector<f64>,
}

/// Test `Θ(w₁(X)·P) - Θ(w₂(X)·P) = 0` with a paired pairs-bootstrap: each
/// resample is shared by both weightings and the weights are recomputed on
/// the resample.
pub fn misspecification_test(
    data: &Dataset,
    fitter: &dyn Fitter,
    w1: &KernelWeightSpec,
    w2: &KernelWeightSpec,
    replicates: usize,
    stream: SeededStream,
) -> Result<MisspecTest> {
    if replicates == 0 {
        return Err(Error::InvalidInput("need at least one bootstrap replicate".into()));
    }
    let fit_pair = |d: &Dataset| -> Result<DVector<f64>> {
        let k1 = gaussian_weights(d, w1)?;
        let k2 = gaussian_weights(d, w2)?;
        Ok(weighted_fit(fitter, d, &k1)? - weighted_fit(fitter, d, &k2)?)
    };
    let delta = fit_pair(data)?;
    let q = delta.len();
    let draws: Vec<Option<DVector<f64>>> = exec::map_indexed(replicates, |b| {
        pairs_resample(data, stream.child(b as u64))
            .and_then(|d| fit_pair(&d))
            .ok()
    });
    let ok: Vec<&DVector<f64>> = draws.iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::AllResamplesFailed(replicates));
    }
    let mut se = DVector::zeros(q);
    for j in 0..q {
        let values: Vec<f64> = ok.iter().map(|d| d[j]).collect();
        se[j] = population_sd(&values);
    }
    let z = DVector::from_fn(q, |j, _| {
        if se[j] > 0.0 {
            delta[j] / se[j]
        } else if delta[j] == 0.0 {
            0.0
        } else {
            f64::INFINITY * delta[j].signum()
        }
    });
    Ok(MisspecTest { delta, se, z })
}

/// Localized functional on a dataset: the fit under kernel weights at each
/// center (K×q).
pub fn localized_functional_data(
    data: &Dataset,
    fitter: &dyn Fitter,
    regressor_index: usize,
    centers: &[f64],
    bandwidth_multiple: f64,
) -> Result<DMatrix<f64>> {
    let q = fitter.dim_for(data.p());
    let sd = weighted_column_sd(data, regressor_index);
    let mut out = DMatrix::zeros(centers.len(), q);
    for (ki, &center) in centers.iter().enumerate() {
        let kernel =
            kernel_weights_with_sd(data, regressor_index, center, sd, bandwidth_multiple)?;
        let theta = weighted_fit(fitter, data, &kernel)?;
        for j in 0..q {
            out[(ki, j)] = theta[j];
        }
    }
    Ok(out)
}

/// Localized functional at the population level: solves
/// `E_X[k_ξ(X)·E[ψ(θ)|X]] = 0` by quadrature for each center, with a Gaussian
/// kernel of sd `bandwidth_multiple · sd(X)`.
pub fn localized_functional_population(
    pop: &SyntheticPopulation,
    spec: &dyn Functional,
    centers: &[f64],
    bandwidth_multiple: f64,
) -> Result<DMatrix<f64>> {
    if bandwidth_multiple.is_nan() || bandwidth_multiple <= 0.0 {
        return Err(Error::InvalidInput("bandwidth multiple must be positive".into()));
    }
    if centers.is_empty() {
        return Err(Error::InvalidInput("empty center grid".into()));
    }
    let q = spec.dim_for(pop.design().dim());
    let bw = bandwidth_multiple * pop.regressor_law().sd();
    let init = population_parameter(spec, pop, &SolverConfig::default())?;
    let mut out = DMatrix::zeros(centers.len(), q);
    for (ki, &center) in centers.iter().enumerate() {
        let kernel = move |x: f64| {
            let z = (x - center) / bw;
            (-0.5 * z * z).exp()
        };
        let score = |theta: &DVector<f64>| -> Result<DVector<f64>> {
            let captured: RefCell<Option<Error>> = RefCell::new(None);
            let v = pop.regressor_expectation(q, 1e-11, |x| {
                match conditional_mean_score(spec, pop, theta, x) {
                    Ok(m) => m * kernel(x),
                    Err(e) => {
                        captured.borrow_mut().get_or_insert(e);
                        DVector::from_element(q, f64::NAN)
                    }
                }
            });
            if let Some(e) = captured.into_inner() {
                return Err(e);
            }
            v
        };
        let jacobian = |theta: &DVector<f64>| -> Result<DMatrix<f64>> {
            let h = (1e-6 * theta.norm()).max(1e-6);
            let mut jac = DMatrix::zeros(q, q);
            for j in 0..q {
                let mut hi = theta.clone();
                hi[j] += h;
                let mut lo = theta.clone();
                lo[j] -= h;
                jac.set_column(j, &((score(&hi)? - score(&lo)?) / (2.0 * h)));
            }
            Ok(jac)
        };
        let problem = NewtonProblem {
            score: &score,
            jacobian: &jacobian,
            merit: None,
            guard: spec.divergence_guard(),
        };
        let theta = newton_solve(&problem, init.clone(), 1e-10, 200, 1.0)?.theta;
        for j in 0..q {
            out[(ki, j)] = theta[j];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::OlsFitter;
    use crate::functionals::MeanFunctional;
    use crate::population::{Design, NoiseLaw, RegressorLaw};
    use approx::assert_relative_eq;

    fn dataset(reg: Vec<f64>, n: usize, p: usize, y: Vec<f64>) -> Dataset {
        let names = (0..p).map(|j| format!("x{j}")).collect();
        Dataset::new(DMatrix::from_row_slice(n, p, &reg), DVector::from_vec(y), names).unwrap()
    }

    #[test]
    fn constant_regressor_is_degenerate() {
        let d = dataset(vec![2.0, 2.0, 2.0], 3, 1, vec![1.0, 2.0, 3.0]);
        let spec = KernelWeightSpec::new(0, 2.0);
        assert!(matches!(gaussian_weights(&d, &spec), Err(Error::DegenerateRegressor(_))));
    }

    #[test]
    fn far_center_concentrates_on_the_extreme_point() {
        let d = dataset(vec![0.0, 1.0, 2.0], 3, 1, vec![0.0; 3]);
        let sd = weighted_column_sd(&d, 0);
        let spec = KernelWeightSpec::new(0, 2.0 + 1e6 * sd);
        let w = gaussian_weights(&d, &spec).unwrap();
        assert_relative_eq!(w.mean(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(w[2], 3.0, epsilon = 1e-9);
        assert!(w[0] < 1e-12 && w[1] < 1e-12);
    }

    #[test]
    fn kernel_weights_match_the_formula() {
        let d = dataset(vec![0.0, 1.0, 2.0], 3, 1, vec![0.0; 3]);
        let spec = KernelWeightSpec::new(0, 1.0);
        let w = gaussian_weights(&d, &spec).unwrap();
        // σ̂ (population style) of {0,1,2} is sqrt(2/3)
        let sd: f64 = (2.0f64 / 3.0).sqrt();
        let raw: Vec<f64> =
            [0.0f64, 1.0, 2.0].iter().map(|x| (-(x - 1.0) * (x - 1.0) / (2.0 * sd * sd)).exp()).collect();
        let mean = raw.iter().sum::<f64>() / 3.0;
        for i in 0..3 {
            assert_relative_eq!(w[i], raw[i] / mean, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_noise_linear_trace_is_exactly_constant() {
        // y = 1 + 2x with no noise: weighted fits equal the unweighted fit at
        // every center.
        let n = 40;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let mut reg = Vec::new();
        let mut y = Vec::new();
        for &x in &xs {
            reg.extend([1.0, x]);
            y.push(1.0 + 2.0 * x);
        }
        let d = dataset(reg, n, 2, y);
        let cfg = DiagnosticConfig::default();
        let trace =
            reweighting_diagnostic(&d, &OlsFitter, 1, &CenterGrid::Deciles, &cfg).unwrap();
        assert!(trace.failed_centers.is_empty());
        assert_eq!(trace.centers.len(), 9);
        for ki in 0..9 {
            assert!((trace.theta_at_center[(ki, 0)] - 1.0).abs() < 1e-10);
            assert!((trace.theta_at_center[(ki, 1)] - 2.0).abs() < 1e-10);
            assert!((trace.theta_at_center[(ki, 0)] - trace.theta_unweighted[0]).abs() < 1e-10);
        }
    }

    #[test]
    fn intercept_only_trace_is_nadaraya_watson() {
        let xs = [0.1, 0.4, 0.5, 0.9, 1.3, 1.8, 2.2];
        let ys = [1.0, 0.4, 0.8, 1.5, 2.1, 2.0, 3.2];
        let mut reg = Vec::new();
        for &x in &xs {
            reg.push(x);
        }
        let d = dataset(reg, 7, 1, ys.to_vec());
        let fitter = crate::bootstrap::SpecFitter::new(&MeanFunctional);
        let centers = [0.5, 1.0, 1.5];
        let out = localized_functional_data(&d, &fitter, 0, &centers, 1.0).unwrap();
        let sd = weighted_column_sd(&d, 0);
        for (ki, &c) in centers.iter().enumerate() {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..7 {
                let w = (-(xs[i] - c) * (xs[i] - c) / (2.0 * sd * sd)).exp();
                num += w * ys[i];
                den += w;
            }
            assert_relative_eq!(out[(ki, 0)], num / den, epsilon = 1e-9);
        }
    }

    #[test]
    fn identical_weightings_give_zero_test_statistic() {
        let n = 30;
        let mut reg = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let x = i as f64 / (n - 1) as f64;
            reg.extend([1.0, x]);
            y.push(1.0 + 2.0 * x + 0.1 * (i as f64 * 0.7).sin());
        }
        let d = dataset(reg, n, 2, y);
        let w = KernelWeightSpec::new(1, 0.5);
        let out =
            misspecification_test(&d, &OlsFitter, &w, &w, 50, SeededStream::new(4)).unwrap();
        assert_eq!(out.delta.amax(), 0.0);
        assert_eq!(out.z.amax(), 0.0);
    }

    #[test]
    fn population_localized_slope_tracks_the_gradient() {
        // μ(x) = x² on U(0,1): the local slope of a narrow-bandwidth local
        // linear fit approximates 2ξ in the interior.
        let pop = SyntheticPopulation::new(
            "quadratic",
            RegressorLaw::Uniform { lo: 0.0, hi: 1.0 },
            Design::Intercept,
            |x| x * x,
            NoiseLaw::GaussianHomoskedastic { sigma: 0.5 },
        );
        let centers = [0.3, 0.5, 0.7];
        let out = localized_functional_population(
            &pop,
            &crate::functionals::OlsFunctional,
            &centers,
            0.1,
        )
        .unwrap();
        for (ki, &c) in centers.iter().enumerate() {
            let slope = out[(ki, 1)];
            assert!(
                (slope - 2.0 * c).abs() <= 0.1 * (2.0 * c),
                "center {c}: slope {slope} vs {}",
                2.0 * c
            );
        }
    }

    #[test]
    fn population_localized_mean_is_a_regularized_response_surface() {
        let pop = SyntheticPopulation::new(
            "quadratic",
            RegressorLaw::Uniform { lo: 0.0, hi: 1.0 },
            Design::Intercept,
            |x| x * x,
            NoiseLaw::GaussianHomoskedastic { sigma: 0.5 },
        );
        let centers = [0.4, 0.6];
        let out =
            localized_functional_population(&pop, &MeanFunctional, &centers, 0.25).unwrap();
        // oracle: E[k·μ]/E[k] by direct quadrature
        let bw = 0.25 * pop.regressor_law().sd();
        for (ki, &c) in centers.iter().enumerate() {
            let num = crate::quadrature::integrate(
                |x| (-(x - c) * (x - c) / (2.0 * bw * bw)).exp() * x * x,
                0.0,
                1.0,
                1e-12,
            )
            .unwrap();
            let den = crate::quadrature::integrate(
                |x| (-(x - c) * (x - c) / (2.0 * bw * bw)).exp(),
                0.0,
                1.0,
                1e-12,
            )
            .unwrap();
            assert_relative_eq!(out[(ki, 0)], num / den, epsilon = 1e-7);
        }
    }

    #[test]
    fn trace_bands_contain_the_point_estimates() {
        let n = 60;
        let mut reg = Vec::new();
        let mut y = Vec::new();
        let mut rng = SeededStream::new(9).rng();
        use rand_distr::{Distribution, StandardNormal};
        for i in 0..n {
            let x = i as f64 / (n - 1) as f64;
            let e: f64 = StandardNormal.sample(&mut rng);
            reg.extend([1.0, x]);
            y.push(x * x + 0.3 * e);
        }
        let d = dataset(reg, n, 2, y);
        let cfg = DiagnosticConfig { replicates: 40, stream: SeededStream::new(2), ..Default::default() };
        let trace = reweighting_diagnostic(&d, &OlsFitter, 1, &CenterGrid::Deciles, &cfg).unwrap();
        for ki in 0..trace.centers.len() {
            for j in 0..2 {
                assert!(trace.band_lo[(ki, j)] <= trace.theta_at_center[(ki, j)]);
                assert!(trace.theta_at_center[(ki, j)] <= trace.band_hi[(ki, j)]);
            }
        }
        // determinism given the stream
        let again = reweighting_diagnostic(&d, &OlsFitter, 1, &CenterGrid::Deciles, &cfg).unwrap();
        assert_eq!(trace.theta_at_center, again.theta_at_center);
        assert_eq!(trace.boot_se, again.boot_se);
    }
}
