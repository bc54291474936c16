//! Monte Carlo and quadrature oracle checks for the statistically heavier
//! operation contracts: heteroskedastic sandwiches, trace diagnostics against
//! localized-functional quadrature, misspecification-test level and power,
//! influence-linearization decay, and outlier robustness of power scores.

use modelrobust::bootstrap::OlsFitter;
use modelrobust::diagnostics::{
    interior_deciles, localized_functional_population, misspecification_test,
    reweighting_diagnostic, CenterGrid, DiagnosticConfig, KernelWeightSpec,
};
use modelrobust::scoring::{scoring_objective, GaussianLinearFamily};
use modelrobust::simulation::{builtin_population, clt_check, eo_sampler};
use modelrobust::solver::{ee_solve, SolverConfig};
use modelrobust::{Dataset, OlsFunctional, SeededStream};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::sync::Arc;

fn no_params() -> BTreeMap<String, String> {
    BTreeMap::new()
}

#[test]
fn heteroskedastic_sandwich_matches_monte_carlo_variance() {
    // linear-hetero is well-specified in the mean but heteroskedastic: the
    // sandwich (= noise component here) must match the MC variance of
    // √N(θ̂ - θ(P)) within 10%.
    let pop = builtin_population("linear-hetero", &no_params()).unwrap();
    let rep = clt_check(&pop, &OlsFunctional, 500, 2000, SeededStream::new(31)).unwrap();
    assert!(
        rep.rel_err[0] <= 0.10,
        "total-EO variance off by {:.3} (theoretical {:?})",
        rep.rel_err[0],
        rep.theo_total
    );
    // and the approximation part is flat zero for the linear mean
    assert!(rep.theo_approx.amax() < 1e-7);
    assert!(rep.emp_var_approx.amax() < 1e-12);
    // sandwich matrices are symmetric positive semidefinite
    for m in [&rep.theo_total, &rep.emp_var_total] {
        assert!((m - m.transpose()).amax() < 1e-10);
        let eigs = m.clone().symmetric_eigen().eigenvalues;
        assert!(eigs.min() >= -1e-10, "eigenvalues {eigs:?}");
    }
}

#[test]
fn quadratic_trace_matches_localized_quadrature_oracle() {
    // population trace β_ξ = E_w[Xμ(X)]/E_w[X²] is strictly increasing for
    // μ(x) = x²; the sample trace stays within 3 bootstrap SEs of it.
    let pop = builtin_population("quadratic", &no_params()).unwrap();
    let data = pop.sample(10_000, SeededStream::new(32)).unwrap();
    let centers = interior_deciles(&data, 0);
    let oracle =
        localized_functional_population(&pop, &OlsFunctional, &centers, 1.0).unwrap();
    for w in oracle.column(0).as_slice().windows(2) {
        assert!(w[0] < w[1], "population trace must increase: {:?}", oracle);
    }
    let cfg = DiagnosticConfig {
        replicates: 200,
        stream: SeededStream::new(33),
        ..Default::default()
    };
    let trace = reweighting_diagnostic(
        &data,
        &OlsFitter,
        0,
        &CenterGrid::Custom(centers.clone()),
        &cfg,
    )
    .unwrap();
    assert!(trace.failed_centers.is_empty());
    for k in 0..centers.len() {
        let err = (trace.theta_at_center[(k, 0)] - oracle[(k, 0)]).abs();
        let band = 3.0 * trace.boot_se[(k, 0)];
        assert!(
            err <= band,
            "center {}: sample {} vs oracle {} (3·SE {})",
            centers[k],
            trace.theta_at_center[(k, 0)],
            oracle[(k, 0)],
            band
        );
    }
}

#[test]
fn misspecification_test_level_on_well_specified_population() {
    // well-specified linear mean: left-vs-right decile weightings agree, so
    // |z| ≤ 3 componentwise in at least 95% of 200 trials.
    let pop = builtin_population("linear-homo", &no_params()).unwrap();
    let trials = 200;
    let base = SeededStream::new(34);
    let mut hits = 0;
    for trial in 0..trials {
        let stream = base.child(trial as u64);
        let data = pop.sample(2000, stream.child(0)).unwrap();
        let deciles = interior_deciles(&data, 1);
        let w1 = KernelWeightSpec::new(1, deciles[0]);
        let w2 = KernelWeightSpec::new(1, deciles[8]);
        let out =
            misspecification_test(&data, &OlsFitter, &w1, &w2, 100, stream.child(1)).unwrap();
        if out.z.amax() <= 3.0 {
            hits += 1;
        }
    }
    assert!(hits >= 190, "level check: only {hits}/200 trials inside |z| ≤ 3");
}

#[test]
fn misspecification_test_power_on_quadratic_population() {
    // quadratic mean: the same protocol must reject (max |z| > 3) in at least
    // 80% of trials (threshold from our own pilot at this design).
    let pop = builtin_population("quadratic", &no_params()).unwrap();
    let trials = 200;
    let base = SeededStream::new(35);
    let mut rejections = 0;
    for trial in 0..trials {
        let stream = base.child(trial as u64);
        let data = pop.sample(2000, stream.child(0)).unwrap();
        let deciles = interior_deciles(&data, 0);
        let w1 = KernelWeightSpec::new(0, deciles[0]);
        let w2 = KernelWeightSpec::new(0, deciles[8]);
        let out =
            misspecification_test(&data, &OlsFitter, &w1, &w2, 100, stream.child(1)).unwrap();
        if out.z.amax() > 3.0 {
            rejections += 1;
        }
    }
    assert!(rejections >= 160, "power check: only {rejections}/200 rejections");
}

#[test]
fn influence_linearization_residual_shrinks_faster_than_root_n() {
    // the o_P(1/√N) claim, self-consistently: the median residual
    // ‖EO - mean(IC)‖ at N = 2000 is at most half the one at N = 500.
    let pop = builtin_population("quadratic", &no_params()).unwrap();
    let median = |mut v: Vec<f64>| -> f64 {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let small = eo_sampler(&pop, &OlsFunctional, 500, 300, SeededStream::new(36)).unwrap();
    let big = eo_sampler(&pop, &OlsFunctional, 2000, 300, SeededStream::new(37)).unwrap();
    let m_small = median(small.ic_residual.iter().copied().collect());
    let m_big = median(big.ic_residual.iter().copied().collect());
    assert!(
        m_big <= 0.5 * m_small,
        "median residual {m_big:.3e} at N=2000 vs {m_small:.3e} at N=500"
    );
}

#[test]
fn power_score_is_more_outlier_robust_than_maximum_likelihood() {
    // Gaussian location with 10% gross outliers: the α = 1 fit stays near the
    // true location while the α = 0 (ML) fit is dragged away.
    use rand_distr::{Distribution, StandardNormal};
    let n = 2000;
    let true_location = 1.0;
    let mut rng = SeededStream::new(38).rng();
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        if i % 10 == 0 {
            y.push(25.0); // gross outlier block (10%)
        } else {
            let e: f64 = StandardNormal.sample(&mut rng);
            y.push(true_location + e);
        }
    }
    let data = Dataset::new(
        DMatrix::from_element(n, 1, 1.0),
        DVector::from_vec(y),
        vec!["intercept".into()],
    )
    .unwrap();
    let family = Arc::new(GaussianLinearFamily::new(1.0).unwrap());
    let cfg = SolverConfig::default();
    let ml = ee_solve(&scoring_objective(family.clone(), 0.0).unwrap(), &data, &cfg).unwrap();
    let robust = ee_solve(&scoring_objective(family, 1.0).unwrap(), &data, &cfg).unwrap();
    let ml_err = (ml.theta_hat[0] - true_location).abs();
    let robust_err = (robust.theta_hat[0] - true_location).abs();
    assert!(
        robust_err < ml_err,
        "α=1 error {robust_err:.3} should beat α=0 error {ml_err:.3}"
    );
    // the ML fit is visibly dragged by the 10% mass at 25
    assert!(ml_err > 1.0);
    assert!(robust_err < 0.2);
}

#[test]
fn plugin_limit_gap_is_small_across_the_m_grid() {
    // for OLS the O(1/M) bias of M·Var*(θ*) is already below the bootstrap
    // noise floor at small M, so only magnitudes are assertable: every gap
    // stays modest and the M = 10⁴ endpoint is within the 5% contract.
    let pop = builtin_population("quadratic", &no_params()).unwrap();
    let data = pop.sample(200, SeededStream::new(39)).unwrap();
    let table = modelrobust::bootstrap::plugin_limit_check(
        &OlsFitter,
        &data,
        &[50, 200, 1000, 10_000],
        20_000,
        SeededStream::new(40),
    )
    .unwrap();
    for row in &table.rows {
        assert!(
            row.rel_gap <= 0.15,
            "gap at M = {} is {:.4}",
            row.resample_size,
            row.rel_gap
        );
    }
    assert!(table.rows.last().unwrap().rel_gap <= 0.05);
}

#[cfg(feature = "parallel")]
#[test]
fn results_are_identical_across_thread_counts() {
    use modelrobust::bootstrap::{m_of_n_bootstrap, BootstrapPlan};
    let pop = builtin_population("quadratic", &no_params()).unwrap();
    let data = pop.sample(120, SeededStream::new(41)).unwrap();
    let plan = BootstrapPlan::monte_carlo(300, 400, SeededStream::new(42));
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let boot = m_of_n_bootstrap(&OlsFitter, &data, &plan).unwrap();
            let clt = clt_check(&pop, &OlsFunctional, 100, 60, SeededStream::new(43)).unwrap();
            (boot.replicates, boot.bv, clt.emp_var_total, clt.cross_corr)
        })
    };
    let single = run(1);
    let multi = run(4);
    assert_eq!(single.0, multi.0);
    assert_eq!(single.1, multi.1);
    assert_eq!(single.2, multi.2);
    assert_eq!(single.3, multi.3);
}
