//! Influence functions, sandwich variance, the conditional parameter θ(X),
//! estimation offsets, and the noise/approximation variance decomposition.
//!
//! Conventions: with `ψ = -∇L` and bread `Λ = ∇_θ E[ψ]`, influence values are
//! `IC = -Λ⁻¹ψ` so that `θ̂ - θ(P) ≈ mean(IC)`. Sandwiches `Λ⁻¹ meat Λ⁻ᵀ` are
//! unaffected by the sign convention.
//!
//! Targets of estimation:
//! - `θ̂` solves the empirical estimating equation (module `solver`);
//! - `θ(X)` solves the conditional-mean equation `(1/N) Σ_i E[ψ(θ)|X=x_i] = 0`
//!   (the empirical regressor distribution combined with the true conditional
//!   response law);
//! - `θ(P)` solves the population equation `E_P[ψ(θ)] = 0` by quadrature.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::functionals::{Functional, FunctionalEstimate};
use crate::linalg;
use crate::population::{flatten, unflatten, SyntheticPopulation};
use crate::solver::{newton_solve, InitStrategy, NewtonProblem, SolverConfig};
use nalgebra::{DMatrix, DVector};
use std::cell::RefCell;

/// Absolute tolerance for population-level quadratures.
const POP_QUAD_TOL: f64 = 1e-9;

/// Default Newton tolerance for population-level solves.
pub const POPULATION_SOLVE_TOL: f64 = 1e-8;

/// Bread, meat and sandwich matrices, with the optional noise/approximation
/// split when population oracles are available.
#[derive(Debug, Clone)]
pub struct VarianceReport {
    pub bread: DMatrix<f64>,
    pub meat_total: DMatrix<f64>,
    pub av_total: DMatrix<f64>,
    pub meat_noise: Option<DMatrix<f64>>,
    pub meat_approx: Option<DMatrix<f64>>,
    pub av_noise: Option<DMatrix<f64>>,
    pub av_approx: Option<DMatrix<f64>>,
    /// `sqrt(diag(av_total)/N)`; population-level reports use N = 1.
    pub se: DVector<f64>,
}

/// Small-sample correction applied to the meat.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmallSampleCorrection {
    /// Plain 1/N moment (the asymptotic formula).
    #[default]
    None,
    /// HC1-style `N/(N-q)` inflation.
    Hc1,
}

/// Estimation offsets `total = θ̂ - θ(P)`, `noise = θ̂ - θ(X)`,
/// `approx = θ(X) - θ(P)`; `total` is stored as `noise + approx` so the
/// additivity identity is exact.
#[derive(Debug, Clone)]
pub struct OffsetReport {
    pub total_eo: DVector<f64>,
    pub noise_eo: DVector<f64>,
    pub approx_eo: DVector<f64>,
    pub theta_hat: DVector<f64>,
    pub theta_x: DVector<f64>,
    pub theta_p: DVector<f64>,
}

/// Per-case influence values `IC_i = -Λ̂⁻¹ (w_i ψ_i)` as an N×q matrix.
pub fn influence_values(est: &FunctionalEstimate) -> Result<DMatrix<f64>> {
    let n = est.n();
    let q = est.dim();
    let mut weighted = est.scores.clone();
    if let Some(w) = est.weights() {
        for i in 0..n {
            for j in 0..q {
                weighted[(i, j)] *= w[i];
            }
        }
    }
    let lu = est.jacobian.clone().lu();
    let solved = lu.solve(&weighted.transpose()).ok_or(Error::SingularBread)?;
    let ic = -solved.transpose();
    if ic.iter().all(|v| v.is_finite()) {
        Ok(ic)
    } else {
        Err(Error::SingularBread)
    }
}

/// Plug-in sandwich variance from a fitted estimate (data-only mode: the
/// noise/approximation split stays empty).
pub fn sandwich_variance(est: &FunctionalEstimate) -> Result<VarianceReport> {
    sandwich_variance_with(est, SmallSampleCorrection::None)
}

pub fn sandwich_variance_with(
    est: &FunctionalEstimate,
    correction: SmallSampleCorrection,
) -> Result<VarianceReport> {
    if !est.converged {
        return Err(Error::InvalidInput("sandwich_variance requires a converged estimate".into()));
    }
    let n = est.n();
    let q = est.dim();
    let mut meat = DMatrix::zeros(q, q);
    for i in 0..n {
        let w = est.weights().map_or(1.0, |w| w[i]);
        let psi = est.scores.row(i).transpose() * w;
        meat += &psi * psi.transpose();
    }
    meat /= n as f64;
    if correction == SmallSampleCorrection::Hc1 {
        if n <= q {
            return Err(Error::InvalidInput("HC1 correction needs N > q".into()));
        }
        meat *= n as f64 / (n - q) as f64;
    }
    let av = linalg::sandwich_product(&est.jacobian, &meat)?;
    let se = DVector::from_fn(q, |j, _| (av[(j, j)].max(0.0) / n as f64).sqrt());
    Ok(VarianceReport {
        bread: est.jacobian.clone(),
        meat_total: meat,
        av_total: av,
        meat_noise: None,
        meat_approx: None,
        av_noise: None,
        av_approx: None,
        se,
    })
}

/// Offsets from the three targets; errors on dimension mismatch.
pub fn estimation_offsets(
    theta_hat: &DVector<f64>,
    theta_x: &DVector<f64>,
    theta_p: &DVector<f64>,
) -> Result<OffsetReport> {
    if theta_hat.len() != theta_x.len() {
        return Err(Error::DimensionMismatch { expected: theta_hat.len(), got: theta_x.len() });
    }
    if theta_hat.len() != theta_p.len() {
        return Err(Error::DimensionMismatch { expected: theta_hat.len(), got: theta_p.len() });
    }
    let noise = theta_hat - theta_x;
    let approx = theta_x - theta_p;
    let total = &noise + &approx;
    Ok(OffsetReport {
        total_eo: total,
        noise_eo: noise,
        approx_eo: approx,
        theta_hat: theta_hat.clone(),
        theta_x: theta_x.clone(),
        theta_p: theta_p.clone(),
    })
}

// ---------------------------------------------------------------------------
// Conditional score oracles
// ---------------------------------------------------------------------------

/// `E[ψ(θ; Y, x) | X = x]` under the population's conditional response law.
pub fn conditional_mean_score(
    spec: &dyn Functional,
    pop: &SyntheticPopulation,
    theta: &DVector<f64>,
    x_raw: f64,
) -> Result<DVector<f64>> {
    let d = pop.design().map(x_raw);
    let mu = pop.mean(x_raw);
    if let Some((mean, _)) = spec.conditional_score_moments(theta, &d, mu, pop.conditional_variance(x_raw)) {
        return Ok(mean);
    }
    let q = theta.len();
    pop.conditional_expectation(x_raw, q, |y| spec.score(theta, y, &d))
}

/// `(E[ψ|X=x], V[ψ|X=x])` in one pass.
pub fn conditional_score_moments(
    spec: &dyn Functional,
    pop: &SyntheticPopulation,
    theta: &DVector<f64>,
    x_raw: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = pop.design().map(x_raw);
    let mu = pop.mean(x_raw);
    let var = pop.conditional_variance(x_raw);
    if let Some(out) = spec.conditional_score_moments(theta, &d, mu, var) {
        return Ok(out);
    }
    let q = theta.len();
    let combined = pop.conditional_expectation(x_raw, q + q * q, |y| {
        let s = spec.score(theta, y, &d);
        let mut v = DVector::zeros(q + q * q);
        v.rows_mut(0, q).copy_from(&s);
        v.rows_mut(q, q * q).copy_from(&flatten(&(&s * s.transpose())));
        v
    })?;
    let mean = DVector::from_iterator(q, combined.iter().take(q).copied());
    let second = unflatten(&DVector::from_iterator(q * q, combined.iter().skip(q).copied()), q);
    let cov = linalg::symmetrize(&(second - &mean * mean.transpose()));
    Ok((mean, cov))
}

/// Integrate a score-like map over the regressor law, propagating closure
/// errors out of the quadrature.
fn regressor_integral<F>(
    pop: &SyntheticPopulation,
    dim: usize,
    f: F,
) -> Result<DVector<f64>>
where
    F: Fn(f64) -> Result<DVector<f64>>,
{
    let captured: RefCell<Option<Error>> = RefCell::new(None);
    let out = pop.regressor_expectation(dim, POP_QUAD_TOL, |x| match f(x) {
        Ok(v) => v,
        Err(e) => {
            captured.borrow_mut().get_or_insert(e);
            DVector::from_element(dim, f64::NAN)
        }
    });
    if let Some(e) = captured.into_inner() {
        return Err(e);
    }
    out
}

/// Population mean score `E_P[ψ(θ)] = E_X[E[ψ(θ)|X]]`.
pub fn population_mean_score(
    spec: &dyn Functional,
    pop: &SyntheticPopulation,
    theta: &DVector<f64>,
) -> Result<DVector<f64>> {
    regressor_integral(pop, theta.len(), |x| conditional_mean_score(spec, pop, theta, x))
}

/// Population bread `Λ(θ) = ∇_θ E_P[ψ(θ)]` by central differences.
pub fn population_bread(
    spec: &dyn Functional,
    pop: &SyntheticPopulation,
    theta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let q = theta.len();
    let h = (1e-6 * theta.norm()).max(1e-6);
    let mut jac = DMatrix::zeros(q, q);
    for j in 0..q {
        let mut hi = theta.clone();
        hi[j] += h;
        let mut lo = theta.clone();
        lo[j] -= h;
        let col = (population_mean_score(spec, pop, &hi)? - population_mean_score(spec, pop, &lo)?)
            / (2.0 * h);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

fn solve_score_equation<S, J>(
    score: S,
    jacobian: J,
    init: DVector<f64>,
    tol: f64,
    max_iter: usize,
    guard: Option<f64>,
) -> Result<DVector<f64>>
where
    S: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    J: Fn(&DVector<f64>) -> Result<DMatrix<f64>>,
{
    let score_ref = &score;
    let jac_ref = &jacobian;
    let problem = NewtonProblem { score: score_ref, jacobian: jac_ref, merit: None, guard };
    newton_solve(&problem, init, tol, max_iter, 1.0).map(|o| o.theta)
}

fn fd_jacobian_of<S>(score: &S, theta: &DVector<f64>) -> Result<DMatrix<f64>>
where
    S: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let q = theta.len();
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
}

/// Pilot dataset with the noise-free responses `y_i = μ(x_i)`, used to
/// initialize conditional-parameter solves with the spec's own strategy.
fn conditional_pilot(pop: &SyntheticPopulation, raws: &[f64]) -> Result<Dataset> {
    let p = pop.design().dim();
    let n = raws.len();
    let mut reg = DMatrix::zeros(n, p);
    let mut resp = DVector::zeros(n);
    for (i, &x) in raws.iter().enumerate() {
        let d = pop.design().map(x);
        for j in 0..p {
            reg[(i, j)] = d[j];
        }
        resp[i] = pop.mean(x);
    }
    Dataset::new(reg, resp, pop.design().column_names())
}

/// The conditional parameter θ(X): solves
/// `(1/N) Σ_i E[ψ(θ; Y, x_i) | X = x_i] = 0` over the sampled regressors.
pub fn conditional_parameter(
    spec: &dyn Functional,
    raws: &[f64],
    pop: &SyntheticPopulation,
    cfg: &SolverConfig,
) -> Result<DVector<f64>> {
    if raws.is_empty() {
        return Err(Error::InvalidInput("need at least one regressor value".into()));
    }
    let n = raws.len() as f64;
    let score = |theta: &DVector<f64>| -> Result<DVector<f64>> {
        let mut acc = DVector::zeros(theta.len());
        for &x in raws {
            acc += conditional_mean_score(spec, pop, theta, x)?;
        }
        Ok(acc / n)
    };
    let jacobian = |theta: &DVector<f64>| fd_jacobian_of(&score, theta);
    let init = match &cfg.init {
        InitStrategy::Value(v) => v.clone(),
        InitStrategy::Spec => spec.init(&conditional_pilot(pop, raws)?)?,
    };
    solve_score_equation(score, jacobian, init, cfg.tol, cfg.max_iter, spec.divergence_guard())
}

/// The population parameter θ(P): solves `E_P[ψ(θ)] = 0` by quadrature over
/// the regressor law (tolerance [`POPULATION_SOLVE_TOL`] by default).
pub fn population_parameter(
    spec: &dyn Functional,
    pop: &SyntheticPopulation,
    cfg: &SolverConfig,
) -> Result<DVector<f64>> {
    let q = spec.dim_for(pop.design().dim());
    let score = |theta: &DVector<f64>| population_mean_score(spec, pop, theta);
    let jacobian = |theta: &DVector<f64>| fd_jacobian_of(&score, theta);
    let init = match &cfg.init {
        InitStrategy::Value(v) => v.clone(),
        InitStrategy::Spec => DVector::zeros(q),
    };
    solve_score_equation(score, jacobian, init, cfg.tol, cfg.max_iter, spec.divergence_guard())
}

/// Population sandwich with the meat split into its noise and approximation
/// parts: `meat_noise = E_X[V[ψ|X]]`, `meat_approx = V_X[E[ψ|X]]`.
pub fn variance_decomposition(
    spec: &dyn Functional,
    pop: &SyntheticPopulation,
    theta_p: &DVector<f64>,
) -> Result<VarianceReport> {
    let q = theta_p.len();
    // one pass over X: stack E[ψ|x], vec(V[ψ|x]), vec(E[ψ|x]E[ψ|x]')
    let stacked = regressor_integral(pop, q + 2 * q * q, |x| {
        let (m, v) = conditional_score_moments(spec, pop, theta_p, x)?;
        let mut out = DVector::zeros(q + 2 * q * q);
        out.rows_mut(0, q).copy_from(&m);
        out.rows_mut(q, q * q).copy_from(&flatten(&v));
        out.rows_mut(q + q * q, q * q).copy_from(&flatten(&(&m * m.transpose())));
        Ok(out)
    })?;
    let mean_m = DVector::from_iterator(q, stacked.iter().take(q).copied());
    let meat_noise = linalg::symmetrize(&unflatten(
        &DVector::from_iterator(q * q, stacked.iter().skip(q).take(q * q).copied()),
        q,
    ));
    let second_m = unflatten(
        &DVector::from_iterator(q * q, stacked.iter().skip(q + q * q).copied()),
        q,
    );
    let meat_approx = linalg::symmetrize(&(second_m - &mean_m * mean_m.transpose()));
    let meat_total = &meat_noise + &meat_approx;
    let bread = population_bread(spec, pop, theta_p)?;
    let av_total = linalg::sandwich_product(&bread, &meat_total)?;
    let av_noise = linalg::sandwich_product(&bread, &meat_noise)?;
    let av_approx = linalg::sandwich_product(&bread, &meat_approx)?;
    let se = DVector::from_fn(q, |j, _| av_total[(j, j)].max(0.0).sqrt());
    Ok(VarianceReport {
        bread,
        meat_total,
        av_total,
        meat_noise: Some(meat_noise),
        meat_approx: Some(meat_approx),
        av_noise: Some(av_noise),
        av_approx: Some(av_approx),
        se,
    })
}

/// Partial influence of the regressor distribution at `x`:
/// the derivative of `θ(P_{Y|X} ⊗ ((1-t)·P_X + t·δ_x))` in `t` at 0, by a
/// central finite difference with step `t_step` (conditional response law held
/// fixed).
pub fn partial_influence_x(
    spec: &dyn Functional,
    pop: &SyntheticPopulation,
    x_raw: f64,
    t_step: f64,
) -> Result<DVector<f64>> {
    if t_step.is_nan() || t_step <= 0.0 || t_step >= 0.5 {
        return Err(Error::InvalidInput(format!("t_step must be in (0, 0.5), got {t_step}")));
    }
    let cfg = SolverConfig { tol: 1e-12, ..Default::default() };
    let theta_p = population_parameter(spec, pop, &cfg)?;
    let solve_mixture = |t: f64| -> Result<DVector<f64>> {
        let score = |theta: &DVector<f64>| -> Result<DVector<f64>> {
            let bulk = population_mean_score(spec, pop, theta)?;
            let atom = conditional_mean_score(spec, pop, theta, x_raw)?;
            Ok(bulk * (1.0 - t) + atom * t)
        };
        let jacobian = |theta: &DVector<f64>| fd_jacobian_of(&score, theta);
        solve_score_equation(
            score,
            jacobian,
            theta_p.clone(),
            1e-12,
            200,
            spec.divergence_guard(),
        )
    };
    let plus = solve_mixture(t_step)?;
    let minus = solve_mixture(-t_step)?;
    Ok((plus - minus) / (2.0 * t_step))
}
