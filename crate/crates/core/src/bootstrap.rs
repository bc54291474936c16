//! M-of-N pairs bootstrap, the normalized bootstrap variance functional
//! `BV = M·Var*(θ*)`, bagged functionals, and the plug-in-limit comparison.
//!
//! Resamples are drawn as multinomial counts over the N cases (identical in
//! distribution to listing M iid row indices, since every functional here is a
//! plug-in functional of the weighted empirical measure) and fitted through
//! case weights `w_i = count_i · N/M`. Replicate `b` uses the child stream of
//! index `b`, so results are bit-identical at any thread count.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec;
use crate::functionals::{ols_fit, Functional, FunctionalEstimate};
use crate::inference::sandwich_variance;
use crate::linalg;
use crate::population::SyntheticPopulation;
use crate::solver::{ee_solve, SolverConfig};
use crate::stream::SeededStream;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution};

/// Fraction of failed resamples above which the bootstrap errors out.
pub const MAX_FAILURE_FRACTION: f64 = 0.10;

/// Cap on `N^M` for exhaustive enumeration.
pub const EXHAUSTIVE_LIMIT: f64 = 1e6;

/// Something that can be refit on (weighted) datasets: the closed-form OLS
/// path or any functional spec through the Newton solver.
pub trait Fitter: Sync {
    fn dim_for(&self, p: usize) -> usize;
    fn fit_estimate(&self, data: &Dataset) -> Result<FunctionalEstimate>;
    fn fit(&self, data: &Dataset) -> Result<DVector<f64>> {
        self.fit_estimate(data).map(|e| e.theta_hat)
    }
}

/// Closed-form OLS.
#[derive(Debug, Clone, Copy, Default)]
pub struct OlsFitter;

impl Fitter for OlsFitter {
    fn dim_for(&self, p: usize) -> usize {
        p
    }

    fn fit_estimate(&self, data: &Dataset) -> Result<FunctionalEstimate> {
        ols_fit(data)
    }
}

/// Any [`Functional`] fitted by the estimating-equation solver.
pub struct SpecFitter<'a> {
    pub spec: &'a dyn Functional,
    pub cfg: SolverConfig,
}

impl<'a> SpecFitter<'a> {
    pub fn new(spec: &'a dyn Functional) -> Self {
        Self { spec, cfg: SolverConfig::default() }
    }
}

impl Fitter for SpecFitter<'_> {
    fn dim_for(&self, p: usize) -> usize {
        self.spec.dim_for(p)
    }

    fn fit_estimate(&self, data: &Dataset) -> Result<FunctionalEstimate> {
        ee_solve(self.spec, data, &self.cfg)
    }
}

/// Resampling mode: Monte Carlo draws or the exact enumeration of all `N^M`
/// ordered resamples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResampleMode {
    MonteCarlo,
    Exhaustive,
}

#[derive(Debug, Clone)]
pub struct BootstrapPlan {
    /// Resample size M.
    pub resample_size: usize,
    /// Monte Carlo replicate count B (ignored in exhaustive mode).
    pub replicates: usize,
    pub stream: SeededStream,
    pub mode: ResampleMode,
}

impl BootstrapPlan {
    pub fn monte_carlo(resample_size: usize, replicates: usize, stream: SeededStream) -> Self {
        Self { resample_size, replicates, stream, mode: ResampleMode::MonteCarlo }
    }

    pub fn exhaustive(resample_size: usize) -> Self {
        Self {
            resample_size,
            replicates: 0,
            stream: SeededStream::new(0),
            mode: ResampleMode::Exhaustive,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.resample_size == 0 {
            return Err(Error::InvalidInput("resample size M must be at least 1".into()));
        }
        match self.mode {
            ResampleMode::MonteCarlo => {
                if self.replicates == 0 {
                    return Err(Error::InvalidInput("replicate count B must be at least 1".into()));
                }
            }
            ResampleMode::Exhaustive => {
                let total = (n as f64).powi(self.resample_size as i32);
                if total > EXHAUSTIVE_LIMIT {
                    return Err(Error::InvalidInput(format!(
                        "exhaustive mode needs N^M <= {EXHAUSTIVE_LIMIT:e}, got {total:e}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Bootstrap replicates and the normalized variance `bv = M·Var*(θ*)`.
#[derive(Debug, Clone)]
pub struct BootstrapResult {
    /// Successful replicate estimates, one row per resample.
    pub replicates: DMatrix<f64>,
    /// `M · Var*(θ*)` over the successful replicates (population-style 1/B).
    pub bv: DMatrix<f64>,
    /// `sqrt(diag(bv)/N)`.
    pub se_boot: DVector<f64>,
    /// Count of non-converged or collinear resamples (dropped from `bv`).
    pub failures: usize,
}

/// Multinomial(M; 1/n, ..., 1/n) counts via sequential binomials.
pub(crate) fn multinomial_counts<R: Rng>(m: usize, cells: usize, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; cells];
    let mut remaining = m as u64;
    for (i, slot) in counts.iter_mut().enumerate() {
        if i + 1 == cells {
            *slot = remaining;
            break;
        }
        if remaining == 0 {
            break;
        }
        let p = 1.0 / (cells - i) as f64;
        *slot = Binomial::new(remaining, p)
            .expect("valid binomial parameters")
            .sample(rng);
        remaining -= *slot;
    }
    counts
}

/// Weighted dataset representing a resample with the given multiplicities.
fn resample_dataset(data: &Dataset, counts: &[u64], m: usize) -> Result<Dataset> {
    let n = data.n();
    let scale = n as f64 / m as f64;
    let weights = DVector::from_fn(n, |i, _| {
        let base = data.weight(i);
        base * counts[i] as f64 * scale
    });
    data.clone().with_weights(weights)
}

fn decode_counts(mut index: usize, n: usize, m: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n];
    for _ in 0..m {
        counts[index % n] += 1;
        index /= n;
    }
    counts
}

/// The >10% failure guard only applies to Monte Carlo draws; exhaustive
/// enumeration excludes degenerate resamples by design, whatever their share.
fn check_failures(failures: usize, total: usize, mode: ResampleMode) -> Result<()> {
    if mode == ResampleMode::MonteCarlo
        && (failures as f64) > MAX_FAILURE_FRACTION * total as f64
    {
        return Err(Error::ExcessiveResampleFailures { failed: failures, total });
    }
    Ok(())
}

fn collect_result(
    outcomes: Vec<Option<DVector<f64>>>,
    q: usize,
    m: usize,
    n: usize,
    mode: ResampleMode,
) -> Result<BootstrapResult> {
    let total = outcomes.len();
    let ok: Vec<DVector<f64>> = outcomes.into_iter().flatten().collect();
    let failures = total - ok.len();
    if ok.is_empty() {
        return Err(Error::AllResamplesFailed(total));
    }
    check_failures(failures, total, mode)?;
    let b = ok.len();
    let mut replicates = DMatrix::zeros(b, q);
    for (i, t) in ok.iter().enumerate() {
        for j in 0..q {
            replicates[(i, j)] = t[j];
        }
    }
    let mean = DVector::from_fn(q, |j, _| replicates.column(j).sum() / b as f64);
    let mut cov = DMatrix::zeros(q, q);
    for i in 0..b {
        let d = replicates.row(i).transpose() - &mean;
        cov += &d * d.transpose();
    }
    cov *= m as f64 / b as f64;
    let se_boot = DVector::from_fn(q, |j, _| (cov[(j, j)].max(0.0) / n as f64).sqrt());
    Ok(BootstrapResult { replicates, bv: linalg::symmetrize(&cov), se_boot, failures })
}

/// M-of-N pairs bootstrap of a fitter on a dataset.
pub fn m_of_n_bootstrap(
    fitter: &dyn Fitter,
    data: &Dataset,
    plan: &BootstrapPlan,
) -> Result<BootstrapResult> {
    let n = data.n();
    plan.validate(n)?;
    let m = plan.resample_size;
    let q = fitter.dim_for(data.p());
    let outcomes: Vec<Option<DVector<f64>>> = match plan.mode {
        ResampleMode::MonteCarlo => exec::map_indexed(plan.replicates, |b| {
            let mut rng = plan.stream.child(b as u64).rng();
            let counts = multinomial_counts(m, n, &mut rng);
            resample_dataset(data, &counts, m)
                .and_then(|d| fitter.fit(&d))
                .ok()
        }),
        ResampleMode::Exhaustive => {
            let total = (n as f64).powi(m as i32) as usize;
            exec::map_indexed(total, |idx| {
                let counts = decode_counts(idx, n, m);
                resample_dataset(data, &counts, m)
                    .and_then(|d| fitter.fit(&d))
                    .ok()
            })
        }
    };
    collect_result(outcomes, q, m, n, plan.mode)
}

/// Source for bagged-functional evaluation.
pub enum BagSource<'a> {
    Data(&'a Dataset),
    Population(&'a SyntheticPopulation),
}

/// The M-bagged functional: the average of the functional over empirical
/// measures of M draws (resamples of a dataset, or fresh samples from a
/// population). Exhaustive mode enumerates all `N^M` resamples exactly.
pub fn bagged_functional(
    fitter: &dyn Fitter,
    source: BagSource<'_>,
    plan: &BootstrapPlan,
) -> Result<DVector<f64>> {
    let m = plan.resample_size;
    let outcomes: Vec<Option<DVector<f64>>> = match source {
        BagSource::Data(data) => {
            plan.validate(data.n())?;
            match plan.mode {
                ResampleMode::MonteCarlo => exec::map_indexed(plan.replicates, |b| {
                    let mut rng = plan.stream.child(b as u64).rng();
                    let counts = multinomial_counts(m, data.n(), &mut rng);
                    resample_dataset(data, &counts, m)
                        .and_then(|d| fitter.fit(&d))
                        .ok()
                }),
                ResampleMode::Exhaustive => {
                    let total = (data.n() as f64).powi(m as i32) as usize;
                    exec::map_indexed(total, |idx| {
                        let counts = decode_counts(idx, data.n(), m);
                        resample_dataset(data, &counts, m)
                            .and_then(|d| fitter.fit(&d))
                            .ok()
                    })
                }
            }
        }
        BagSource::Population(pop) => {
            if plan.mode == ResampleMode::Exhaustive {
                return Err(Error::InvalidInput(
                    "exhaustive bagging is only defined for datasets".into(),
                ));
            }
            if plan.replicates == 0 {
                return Err(Error::InvalidInput("replicate count B must be at least 1".into()));
            }
            exec::map_indexed(plan.replicates, |b| {
                pop.sample(m, plan.stream.child(b as u64))
                    .and_then(|d| fitter.fit(&d))
                    .ok()
            })
        }
    };
    let total = outcomes.len();
    let ok: Vec<DVector<f64>> = outcomes.into_iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::AllResamplesFailed(total));
    }
    check_failures(total - ok.len(), total, plan.mode)?;
    let q = ok[0].len();
    let mut mean = DVector::zeros(q);
    for t in &ok {
        mean += t;
    }
    Ok(mean / ok.len() as f64)
}

/// One row of the plug-in-limit table.
#[derive(Debug, Clone)]
pub struct PluginLimitRow {
    pub resample_size: usize,
    pub bv: DMatrix<f64>,
    /// `‖bv - av_plugin‖_F / ‖av_plugin‖_F`.
    pub rel_gap: f64,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct PluginLimitTable {
    pub av_plugin: DMatrix<f64>,
    pub rows: Vec<PluginLimitRow>,
}

/// Compare `M·Var*(θ*)` against the plug-in sandwich over a grid of resample
/// sizes; the gap should shrink toward the bootstrap Monte Carlo noise floor
/// as M grows.
pub fn plugin_limit_check(
    fitter: &dyn Fitter,
    data: &Dataset,
    m_grid: &[usize],
    replicates: usize,
    stream: SeededStream,
) -> Result<PluginLimitTable> {
    if m_grid.is_empty() {
        return Err(Error::InvalidInput("need at least one resample size".into()));
    }
    let est = fitter.fit_estimate(data)?;
    let av_plugin = sandwich_variance(&est)?.av_total;
    let av_norm = linalg::frobenius(&av_plugin);
    let mut rows = Vec::with_capacity(m_grid.len());
    for (k, &m) in m_grid.iter().enumerate() {
        let plan = BootstrapPlan::monte_carlo(m, replicates, stream.child(k as u64));
        let boot = m_of_n_bootstrap(fitter, data, &plan)?;
        let rel_gap = linalg::frobenius(&(&boot.bv - &av_plugin)) / av_norm;
        rows.push(PluginLimitRow { resample_size: m, bv: boot.bv, rel_gap, failures: boot.failures });
    }
    Ok(PluginLimitTable { av_plugin, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::MeanFunctional;
    use approx::assert_relative_eq;

    fn intercept_only(y: Vec<f64>) -> Dataset {
        let n = y.len();
        Dataset::new(
            DMatrix::from_element(n, 1, 1.0),
            DVector::from_vec(y),
            vec!["intercept".into()],
        )
        .unwrap()
    }

    #[test]
    fn constant_response_has_zero_bootstrap_variance() {
        let d = intercept_only(vec![3.0; 6]);
        let fitter = SpecFitter::new(&MeanFunctional);
        let plan = BootstrapPlan::monte_carlo(4, 200, SeededStream::new(1));
        let out = m_of_n_bootstrap(&fitter, &d, &plan).unwrap();
        assert_eq!(out.failures, 0);
        for v in out.replicates.iter() {
            assert_relative_eq!(*v, 3.0, epsilon = 1e-12);
        }
        assert!(out.bv.amax() < 1e-20);
    }

    #[test]
    fn exhaustive_mean_bootstrap_matches_enumeration_and_plugin_variance() {
        // N = 4, M = 3: enumerate all 64 ordered resamples by hand.
        let y = [1.0, 2.0, 4.0, 9.0];
        let d = intercept_only(y.to_vec());
        let fitter = OlsFitter; // intercept-only OLS is the mean
        let plan = BootstrapPlan::exhaustive(3);
        let out = m_of_n_bootstrap(&fitter, &d, &plan).unwrap();
        assert_eq!(out.failures, 0);
        assert_eq!(out.replicates.nrows(), 64);

        let mut means = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    means.push((y[i] + y[j] + y[k]) / 3.0);
                }
            }
        }
        let grand: f64 = means.iter().sum::<f64>() / 64.0;
        let var: f64 = means.iter().map(|t| (t - grand) * (t - grand)).sum::<f64>() / 64.0;
        assert_relative_eq!(out.bv[(0, 0)], 3.0 * var, epsilon = 1e-12);

        // hard identity: exhaustive bv equals the plug-in variance of P̂
        let ybar: f64 = y.iter().sum::<f64>() / 4.0;
        let sig2: f64 = y.iter().map(|v| (v - ybar) * (v - ybar)).sum::<f64>() / 4.0;
        assert_relative_eq!(out.bv[(0, 0)], sig2, epsilon = 1e-12);
    }

    #[test]
    fn identical_plans_are_bit_identical() {
        let d = intercept_only(vec![0.5, 1.5, 2.0, 3.5, 5.0]);
        let fitter = OlsFitter;
        let plan = BootstrapPlan::monte_carlo(5, 64, SeededStream::with_id(42, 3));
        let a = m_of_n_bootstrap(&fitter, &d, &plan).unwrap();
        let b = m_of_n_bootstrap(&fitter, &d, &plan).unwrap();
        assert_eq!(a.replicates, b.replicates);
        assert_eq!(a.bv, b.bv);
    }

    #[test]
    fn bagged_mean_is_exactly_the_sample_mean_in_exhaustive_mode() {
        let d = intercept_only(vec![1.0, 2.0, 4.0, 9.0]);
        let fitter = OlsFitter;
        for m in [1, 2, 3] {
            let plan = BootstrapPlan::exhaustive(m);
            let bagged = bagged_functional(&fitter, BagSource::Data(&d), &plan).unwrap();
            assert_relative_eq!(bagged[0], 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn exhaustive_ols_bagging_excludes_collinear_resamples() {
        // N = 3, M = 2 with an intercept: resamples that repeat a single row
        // are rank 1 and must be dropped; the oracle enumerates by hand.
        let d = Dataset::new(
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0]),
            DVector::from_vec(vec![0.5, 2.0, 3.0]),
            vec!["intercept".into(), "x".into()],
        )
        .unwrap();
        let plan = BootstrapPlan::exhaustive(2);
        let bagged = bagged_functional(&OlsFitter, BagSource::Data(&d), &plan).unwrap();

        let x = [0.0, 1.0, 2.0];
        let y = [0.5, 2.0, 3.0];
        let mut acc = DVector::zeros(2);
        let mut count = 0;
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue; // collinear resample
                }
                // two-point line through (x_i, y_i), (x_j, y_j)
                let slope = (y[j] - y[i]) / (x[j] - x[i]);
                let intercept = y[i] - slope * x[i];
                acc += DVector::from_vec(vec![intercept, slope]);
                count += 1;
            }
        }
        let expect = acc / count as f64;
        assert!((bagged - expect).amax() < 1e-10);
    }

    #[test]
    fn exhaustive_mode_guards_the_enumeration_size() {
        let d = intercept_only(vec![1.0; 50]);
        let plan = BootstrapPlan::exhaustive(10);
        assert!(matches!(
            m_of_n_bootstrap(&OlsFitter, &d, &plan),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn multinomial_counts_sum_to_m() {
        let mut rng = SeededStream::new(5).rng();
        for _ in 0..100 {
            let counts = multinomial_counts(37, 11, &mut rng);
            assert_eq!(counts.iter().sum::<u64>(), 37);
        }
    }

    #[test]
    fn plugin_limit_for_the_mean_is_flat_in_m() {
        // identity case: bread = -1, meat = σ̂², so E*[bv] = σ̂² at every M
        let d = intercept_only(vec![0.2, 1.1, 2.7, 3.9, 5.2, 6.1, 7.7, 9.0]);
        let table =
            plugin_limit_check(&OlsFitter, &d, &[4, 16, 64], 20_000, SeededStream::new(12))
                .unwrap();
        for row in &table.rows {
            assert!(row.rel_gap < 0.05, "M = {}: rel gap {}", row.resample_size, row.rel_gap);
        }
    }
}
