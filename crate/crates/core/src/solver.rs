//! Damped Newton solver for estimating equations `Ê[w·ψ(θ)] = 0`.
//!
//! The step solves `Λ δ = -m`; when the Jacobian is singular (flat score
//! regions of Huber/quantile fits) the system is Levenberg-regularized to
//! `(Λ - λI) δ = -m` with escalating `λ`. Steps are halved (up to 30 times)
//! until the merit decreases: the mean objective when the spec has one,
//! otherwise the mean score norm.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::functionals::{design_rows, Functional, FunctionalEstimate};
use crate::linalg;
use nalgebra::{DMatrix, DVector};

/// Starting point for the Newton iteration.
#[derive(Debug, Clone, Default)]
pub enum InitStrategy {
    /// Use the spec's documented default (OLS pilot for regression specs,
    /// zero for logistic).
    #[default]
    Spec,
    Value(DVector<f64>),
}

/// How the bread Jacobian is obtained.
#[derive(Debug, Clone, Copy, Default)]
pub enum JacobianMode {
    /// Analytic when the spec provides one, central differences otherwise.
    #[default]
    Auto,
    /// Require the spec's analytic Jacobian.
    Analytic,
    /// Central differences with the given step (`None`: `max(1e-6, 1e-6·‖θ‖)`).
    CentralDifference { step: Option<f64> },
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Convergence threshold on `‖Ê[w·ψ]‖_∞`.
    pub tol: f64,
    pub max_iter: usize,
    pub init: InitStrategy,
    pub jacobian: JacobianMode,
    /// Step damping factor in (0, 1].
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 200,
            init: InitStrategy::Spec,
            jacobian: JacobianMode::Auto,
            damping: 1.0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidInput("solver tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("max_iter must be at least 1".into()));
        }
        if self.damping.is_nan() || self.damping <= 0.0 || self.damping > 1.0 {
            return Err(Error::InvalidInput("damping must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

const MAX_HALVINGS: usize = 30;
/// Trust cap on the Newton step: `10·max(1, ‖θ‖)`.
const STEP_CAP_FACTOR: f64 = 10.0;

pub(crate) type ScoreFn<'a> = &'a dyn Fn(&DVector<f64>) -> Result<DVector<f64>>;
pub(crate) type JacobianFn<'a> = &'a dyn Fn(&DVector<f64>) -> Result<DMatrix<f64>>;
pub(crate) type MeritFn<'a> = &'a dyn Fn(&DVector<f64>) -> Result<f64>;

/// A root-finding problem `F(θ) = 0` with optional merit and divergence guard.
pub(crate) struct NewtonProblem<'a> {
    pub score: ScoreFn<'a>,
    pub jacobian: JacobianFn<'a>,
    pub merit: Option<MeritFn<'a>>,
    pub guard: Option<f64>,
}

pub(crate) struct NewtonOutcome {
    pub theta: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

pub(crate) fn newton_solve(
    problem: &NewtonProblem<'_>,
    init: DVector<f64>,
    tol: f64,
    max_iter: usize,
    damping: f64,
) -> Result<NewtonOutcome> {
    let mut theta = init;
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite solver initialization".into()));
    }
    let mut score = (problem.score)(&theta)?;
    ensure_finite(&score)?;
    let mut merit = eval_merit(problem, &theta, &score)?;
    let mut residual = score.amax();
    for iter in 1..=max_iter {
        if residual <= tol {
            return Ok(NewtonOutcome { theta, iterations: iter - 1, residual });
        }
        let jac = (problem.jacobian)(&theta)?;
        let mut delta = regularized_step(&jac, &score)?;
        let cap = STEP_CAP_FACTOR * theta.norm().max(1.0);
        let norm = delta.norm();
        if norm > cap {
            delta *= cap / norm;
        }
        delta *= damping;

        // halve until the merit strictly decreases; keep the smallest step as
        // a last resort so flat regions still make progress
        let mut accepted: Option<(DVector<f64>, DVector<f64>, f64, f64)> = None;
        let mut fallback: Option<(DVector<f64>, DVector<f64>, f64, f64)> = None;
        for k in 0..=MAX_HALVINGS {
            let candidate = &theta + &delta / (1u64 << k) as f64;
            let cand_score = match (problem.score)(&candidate) {
                Ok(s) if s.iter().all(|v| v.is_finite()) => s,
                _ => continue,
            };
            let cand_res = cand_score.amax();
            let cand_merit = match eval_merit(problem, &candidate, &cand_score) {
                Ok(m) if m.is_finite() => m,
                _ => continue,
            };
            if cand_res <= tol || cand_merit < merit {
                accepted = Some((candidate, cand_score, cand_merit, cand_res));
                break;
            }
            fallback = Some((candidate, cand_score, cand_merit, cand_res));
        }
        let (next, next_score, next_merit, next_res) = accepted
            .or(fallback)
            .ok_or(Error::NonFiniteScore)?;
        theta = next;
        score = next_score;
        merit = next_merit;
        residual = next_res;
        if let Some(bound) = problem.guard {
            if theta.amax() > bound {
                return Err(Error::PerfectSeparation(bound));
            }
        }
    }
    if residual <= tol {
        return Ok(NewtonOutcome { theta, iterations: max_iter, residual });
    }
    Err(Error::NoConvergence { max_iter, residual })
}

fn eval_merit(
    problem: &NewtonProblem<'_>,
    theta: &DVector<f64>,
    score: &DVector<f64>,
) -> Result<f64> {
    match problem.merit {
        Some(f) => f(theta),
        None => Ok(score.amax()),
    }
}

fn ensure_finite(v: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteScore)
    }
}

/// Solve `Λ δ = -m`, escalating a Levenberg shift when `Λ` is singular.
fn regularized_step(jac: &DMatrix<f64>, score: &DVector<f64>) -> Result<DVector<f64>> {
    let rhs = -score;
    if let Ok(delta) = linalg::solve_lu(jac, &rhs) {
        return Ok(delta);
    }
    let scale = jac.amax().max(1.0);
    let mut lambda = 1e-8 * scale;
    for _ in 0..12 {
        let mut shifted = jac.clone();
        for i in 0..shifted.nrows() {
            shifted[(i, i)] -= lambda;
        }
        if let Ok(delta) = linalg::solve_lu(&shifted, &rhs) {
            return Ok(delta);
        }
        lambda *= 100.0;
    }
    Err(Error::SingularJacobian)
}

/// Weighted mean score `Ê[w·ψ(θ)]` over a dataset.
pub(crate) fn weighted_mean_score(
    spec: &dyn Functional,
    rows: &[DVector<f64>],
    data: &Dataset,
    theta: &DVector<f64>,
) -> Result<DVector<f64>> {
    let q = theta.len();
    let mut acc = DVector::zeros(q);
    for (i, x) in rows.iter().enumerate() {
        let s = spec.score(theta, data.response()[i], x);
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteScore);
        }
        acc += s * data.weight(i);
    }
    Ok(acc / data.n() as f64)
}

fn weighted_mean_objective(
    spec: &dyn Functional,
    rows: &[DVector<f64>],
    data: &Dataset,
    theta: &DVector<f64>,
) -> Option<Result<f64>> {
    let mut acc = 0.0;
    for (i, x) in rows.iter().enumerate() {
        let l = spec.objective(theta, data.response()[i], x)?;
        acc += data.weight(i) * l;
    }
    Some(Ok(acc / data.n() as f64))
}

/// FD step for Jacobians: `max(1e-6, 1e-6·‖θ‖)`.
fn fd_step(theta: &DVector<f64>) -> f64 {
    (1e-6 * theta.norm()).max(1e-6)
}

fn jacobian_at(
    spec: &dyn Functional,
    rows: &[DVector<f64>],
    data: &Dataset,
    theta: &DVector<f64>,
    mode: JacobianMode,
) -> Result<DMatrix<f64>> {
    let analytic = |theta: &DVector<f64>| -> Option<Result<DMatrix<f64>>> {
        let q = theta.len();
        let mut acc = DMatrix::zeros(q, q);
        for (i, x) in rows.iter().enumerate() {
            let j = spec.score_jacobian(theta, data.response()[i], x)?;
            acc += j * data.weight(i);
        }
        Some(Ok(acc / data.n() as f64))
    };
    match mode {
        JacobianMode::Analytic => analytic(theta)
            .ok_or_else(|| Error::InvalidInput("spec has no analytic jacobian".into()))?,
        JacobianMode::Auto => match analytic(theta) {
            Some(j) => j,
            None => fd_jacobian(spec, rows, data, theta, None),
        },
        JacobianMode::CentralDifference { step } => fd_jacobian(spec, rows, data, theta, step),
    }
}

fn fd_jacobian(
    spec: &dyn Functional,
    rows: &[DVector<f64>],
    data: &Dataset,
    theta: &DVector<f64>,
    step: Option<f64>,
) -> Result<DMatrix<f64>> {
    let q = theta.len();
    let h = step.unwrap_or_else(|| fd_step(theta));
    let mut jac = DMatrix::zeros(q, q);
    for j in 0..q {
        let mut hi = theta.clone();
        hi[j] += h;
        let mut lo = theta.clone();
        lo[j] -= h;
        let col = (weighted_mean_score(spec, rows, data, &hi)?
            - weighted_mean_score(spec, rows, data, &lo)?)
            / (2.0 * h);
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Bread Jacobian `Λ̂(θ) = ∇_θ Ê[w·ψ(θ)]`, analytic when the spec supplies one.
pub fn bread_jacobian(
    spec: &dyn Functional,
    data: &Dataset,
    theta: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    if theta.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite theta".into()));
    }
    let rows = design_rows(data);
    jacobian_at(spec, &rows, data, theta, JacobianMode::Auto)
}

/// Solve `Ê[w·ψ(θ)] = 0` for a functional spec on a dataset.
pub fn ee_solve(
    spec: &dyn Functional,
    data: &Dataset,
    cfg: &SolverConfig,
) -> Result<FunctionalEstimate> {
    cfg.validate()?;
    spec.validate(data)?;
    let q = spec.dim_for(data.p());
    let init = match &cfg.init {
        InitStrategy::Spec => spec.init(data)?,
        InitStrategy::Value(v) => v.clone(),
    };
    if init.len() != q {
        return Err(Error::DimensionMismatch { expected: q, got: init.len() });
    }
    let rows = design_rows(data);

    let score_fn = |theta: &DVector<f64>| weighted_mean_score(spec, &rows, data, theta);
    let jac_fn = |theta: &DVector<f64>| jacobian_at(spec, &rows, data, theta, cfg.jacobian);
    let merit_fn = |theta: &DVector<f64>| weighted_mean_objective(spec, &rows, data, theta).unwrap();
    let has_objective = {
        let x0 = &rows[0];
        spec.objective(&init, data.response()[0], x0).is_some()
    };
    let problem = NewtonProblem {
        score: &score_fn,
        jacobian: &jac_fn,
        merit: if has_objective { Some(&merit_fn) } else { None },
        guard: spec.divergence_guard(),
    };
    let out = newton_solve(&problem, init, cfg.tol, cfg.max_iter, cfg.damping)?;
    spec.validate_fit(&out.theta, data)?;

    let mut scores = DMatrix::zeros(data.n(), q);
    for (i, x) in rows.iter().enumerate() {
        let s = spec.score(&out.theta, data.response()[i], x);
        for j in 0..q {
            scores[(i, j)] = s[j];
        }
    }
    let jacobian = jacobian_at(spec, &rows, data, &out.theta, cfg.jacobian)?;
    Ok(FunctionalEstimate {
        theta_hat: out.theta,
        scores,
        jacobian,
        converged: true,
        iterations: out.iterations,
        mean_score_norm: out.residual,
        weights: data.weights().cloned(),
    })
}
