//! Regression functionals: the generic score interface plus the built-in
//! OLS, ridge, Huber, smoothed-quantile, logistic and mean functionals.
//!
//! Sign convention throughout: the score is the negative objective gradient,
//! `ψ(θ; y, x) = -∇_θ L(θ; y, x)`, so OLS has `ψ = x (y - x'θ)` and the bread
//! `Λ = ∇_θ E[ψ]` is `-E[xx']`.

use crate::dataset::{Acceptability, Dataset};
use crate::error::{Error, Result};
use crate::linalg;
use nalgebra::{DMatrix, DVector};

/// A regression functional defined by a score (and optionally an objective).
///
/// Implementations must be pure: evaluations may run concurrently on shared
/// references.
pub trait Functional: Send + Sync {
    fn name(&self) -> &'static str;

    /// Parameter dimension for a dataset with `p` regressor columns.
    fn dim_for(&self, p: usize) -> usize;

    /// Per-case score `ψ(θ; y, x)`.
    fn score(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> DVector<f64>;

    /// Per-case objective `L(θ; y, x)` with `ψ = -∇L`, when one exists.
    fn objective(&self, _theta: &DVector<f64>, _y: f64, _x: &DVector<f64>) -> Option<f64> {
        None
    }

    /// Per-case analytic score Jacobian `∇_θ ψ(θ; y, x)`, when available.
    fn score_jacobian(
        &self,
        _theta: &DVector<f64>,
        _y: f64,
        _x: &DVector<f64>,
    ) -> Option<DMatrix<f64>> {
        None
    }

    /// Starting point for the Newton solver.
    fn init(&self, data: &Dataset) -> Result<DVector<f64>>;

    /// Hyperparameter/shape validation against a concrete dataset.
    fn validate(&self, _data: &Dataset) -> Result<()> {
        Ok(())
    }

    /// Post-convergence sanity check on a solved parameter (e.g. logistic
    /// separation, which drives the mean score to machine zero at finite θ).
    fn validate_fit(&self, _theta: &DVector<f64>, _data: &Dataset) -> Result<()> {
        Ok(())
    }

    /// Conditional score moments `(E[ψ|X=x], V[ψ|X=x])` when they are analytic
    /// in the conditional response mean and variance. Scores linear in `y`
    /// (mean, OLS, ridge) support this for any noise law.
    fn conditional_score_moments(
        &self,
        _theta: &DVector<f64>,
        _x: &DVector<f64>,
        _mu: f64,
        _var: f64,
    ) -> Option<(DVector<f64>, DMatrix<f64>)> {
        None
    }

    /// Parameter-norm bound past which the solver reports divergence.
    fn divergence_guard(&self) -> Option<f64> {
        None
    }
}

/// A fitted functional: estimate, per-case scores, bread Jacobian and
/// convergence metadata.
#[derive(Debug, Clone)]
pub struct FunctionalEstimate {
    pub theta_hat: DVector<f64>,
    /// N×q matrix of per-case scores `ψ(θ̂; Y_i, X_i)` (unweighted; weights
    /// enter the empirical means).
    pub scores: DMatrix<f64>,
    /// Bread Jacobian `Λ̂ = ∇_θ Ê[w·ψ]` at `θ̂`.
    pub jacobian: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `‖Ê[w·ψ(θ̂)]‖_∞`, the residual of the solved estimating equation.
    pub mean_score_norm: f64,
    pub(crate) weights: Option<DVector<f64>>,
}

impl FunctionalEstimate {
    pub fn n(&self) -> usize {
        self.scores.nrows()
    }

    pub fn dim(&self) -> usize {
        self.theta_hat.len()
    }

    pub fn weights(&self) -> Option<&DVector<f64>> {
        self.weights.as_ref()
    }
}

/// Copy dataset rows into owned design vectors (nalgebra stores column-major,
/// so per-case access wants this done once per fit).
pub(crate) fn design_rows(data: &Dataset) -> Vec<DVector<f64>> {
    let p = data.p();
    (0..data.n())
        .map(|i| DVector::from_fn(p, |j, _| data.regressors()[(i, j)]))
        .collect()
}

// ---------------------------------------------------------------------------
// OLS
// ---------------------------------------------------------------------------

/// Eigenvalue-ratio threshold for the weighted Gram rank check used on
/// resample-weighted fits (eigenvalues are squared singular values, so exact
/// degeneracies land at round-off scale).
const GRAM_RANK_TOLERANCE: f64 = 1e-12;

/// Ordinary least squares via the normal equations (direct solve, never the
/// generic Newton path).
///
/// Unweighted data goes through the full singular-value acceptability check;
/// weighted data (bootstrap resamples, kernel reweighting) uses the cheap
/// Gram eigenvalue ratio, which catches the rank-deficient resamples that
/// actually occur without an N×p SVD per replicate.
pub fn ols_fit(data: &Dataset) -> Result<FunctionalEstimate> {
    let gram = data.weighted_gram();
    if data.weights().is_some() {
        let eigs = gram.clone().symmetric_eigen().eigenvalues;
        let max = eigs.max();
        if max <= 0.0 || eigs.min().max(0.0) / max < GRAM_RANK_TOLERANCE {
            return Err(Error::CollinearRegressors);
        }
    } else if data.acceptability() == Acceptability::Collinear {
        return Err(Error::CollinearRegressors);
    }
    let xy = data.weighted_xy();
    let theta = linalg::solve_sym(&gram, &xy)?;
    let n = data.n();
    let q = data.p();
    let mut scores = DMatrix::zeros(n, q);
    let mut mean_score = DVector::zeros(q);
    for i in 0..n {
        let xi = data.regressors().row(i);
        let resid = data.response()[i] - xi.transpose().dot(&theta.column(0));
        let w = data.weight(i);
        for j in 0..q {
            let s = xi[j] * resid;
            scores[(i, j)] = s;
            mean_score[j] += w * s;
        }
    }
    mean_score /= n as f64;
    Ok(FunctionalEstimate {
        theta_hat: theta,
        scores,
        jacobian: -gram,
        converged: true,
        iterations: 0,
        mean_score_norm: mean_score.amax(),
        weights: data.weights().cloned(),
    })
}

/// The OLS functional expressed as an estimating-equation spec, for paths that
/// need the generic interface (bootstrap over specs, solver tests).
#[derive(Debug, Clone, Copy, Default)]
pub struct OlsFunctional;

impl Functional for OlsFunctional {
    fn name(&self) -> &'static str {
        "ols"
    }

    fn dim_for(&self, p: usize) -> usize {
        p
    }

    fn score(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> DVector<f64> {
        x * (y - x.dot(theta))
    }

    fn objective(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> Option<f64> {
        let r = y - x.dot(theta);
        Some(0.5 * r * r)
    }

    fn score_jacobian(
        &self,
        _theta: &DVector<f64>,
        _y: f64,
        x: &DVector<f64>,
    ) -> Option<DMatrix<f64>> {
        Some(-(x * x.transpose()))
    }

    fn init(&self, data: &Dataset) -> Result<DVector<f64>> {
        Ok(DVector::zeros(data.p()))
    }

    fn conditional_score_moments(
        &self,
        theta: &DVector<f64>,
        x: &DVector<f64>,
        mu: f64,
        var: f64,
    ) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let mean = x * (mu - x.dot(theta));
        let cov = (x * x.transpose()) * var;
        Some((mean, cov))
    }
}

// ---------------------------------------------------------------------------
// Ridge
// ---------------------------------------------------------------------------

/// Where ridge second moments come from: the empirical distribution of a
/// dataset or quadrature over a synthetic population.
pub enum MomentSource<'a> {
    Data(&'a Dataset),
    Population(&'a crate::population::SyntheticPopulation),
}

impl MomentSource<'_> {
    /// `(E[XX'], E[X·μ(X)])` under the source law (for data, `μ` is `Y`).
    pub fn moments(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        match self {
            MomentSource::Data(d) => Ok((d.weighted_gram(), d.weighted_xy())),
            MomentSource::Population(pop) => {
                Ok((pop.design_second_moment(1e-10)?, pop.design_mean_moment(1e-10)?))
            }
        }
    }
}

/// Ridge solution `θ = (E[XX'] + Ω)⁻¹ E[Xμ]` for a symmetric nonnegative-
/// definite penalty `Ω`.
pub fn ridge_fit(source: MomentSource<'_>, omega: &DMatrix<f64>) -> Result<DVector<f64>> {
    let (gram, xy) = source.moments()?;
    if omega.nrows() != gram.nrows() || omega.ncols() != gram.ncols() {
        return Err(Error::DimensionMismatch { expected: gram.nrows(), got: omega.nrows() });
    }
    let system = &gram + omega;
    linalg::solve_sym(&system, &xy).map_err(|_| Error::SingularSystem)
}

/// Ridge as an estimating-equation spec: `ψ(θ; y, x) = x(y - x'θ) - Ωθ`.
#[derive(Debug, Clone)]
pub struct RidgeFunctional {
    omega: DMatrix<f64>,
}

impl RidgeFunctional {
    pub fn new(omega: DMatrix<f64>) -> Result<Self> {
        if omega.nrows() != omega.ncols() {
            return Err(Error::InvalidInput("ridge penalty must be square".into()));
        }
        if (&omega - omega.transpose()).amax() > 1e-10 {
            return Err(Error::InvalidInput("ridge penalty must be symmetric".into()));
        }
        Ok(Self { omega })
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }
}

impl Functional for RidgeFunctional {
    fn name(&self) -> &'static str {
        "ridge"
    }

    fn dim_for(&self, p: usize) -> usize {
        p
    }

    fn score(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> DVector<f64> {
        x * (y - x.dot(theta)) - &self.omega * theta
    }

    fn objective(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> Option<f64> {
        let r = y - x.dot(theta);
        Some(0.5 * r * r + 0.5 * (theta.transpose() * &self.omega * theta)[(0, 0)])
    }

    fn score_jacobian(
        &self,
        _theta: &DVector<f64>,
        _y: f64,
        x: &DVector<f64>,
    ) -> Option<DMatrix<f64>> {
        Some(-(x * x.transpose()) - &self.omega)
    }

    fn init(&self, data: &Dataset) -> Result<DVector<f64>> {
        Ok(DVector::zeros(data.p()))
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        if self.omega.nrows() != data.p() {
            return Err(Error::DimensionMismatch { expected: data.p(), got: self.omega.nrows() });
        }
        Ok(())
    }

    fn conditional_score_moments(
        &self,
        theta: &DVector<f64>,
        x: &DVector<f64>,
        mu: f64,
        var: f64,
    ) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let mean = x * (mu - x.dot(theta)) - &self.omega * theta;
        let cov = (x * x.transpose()) * var;
        Some((mean, cov))
    }
}

// ---------------------------------------------------------------------------
// Huber
// ---------------------------------------------------------------------------

/// Huber M-estimator of regression with threshold `k`.
#[derive(Debug, Clone, Copy)]
pub struct HuberFunctional {
    k: f64,
}

/// Build a Huber spec; `k` must be positive.
pub fn huber_spec(k: f64) -> Result<HuberFunctional> {
    if k.is_nan() || k <= 0.0 {
        return Err(Error::InvalidInput(format!("huber threshold must be positive, got {k}")));
    }
    Ok(HuberFunctional { k })
}

impl HuberFunctional {
    pub fn threshold(&self) -> f64 {
        self.k
    }

    fn rho(&self, r: f64) -> f64 {
        if r.abs() <= self.k {
            0.5 * r * r
        } else {
            self.k * r.abs() - 0.5 * self.k * self.k
        }
    }

    fn psi(&self, r: f64) -> f64 {
        r.clamp(-self.k, self.k)
    }
}

impl Functional for HuberFunctional {
    fn name(&self) -> &'static str {
        "huber"
    }

    fn dim_for(&self, p: usize) -> usize {
        p
    }

    fn score(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> DVector<f64> {
        x * self.psi(y - x.dot(theta))
    }

    fn objective(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> Option<f64> {
        Some(self.rho(y - x.dot(theta)))
    }

    fn score_jacobian(
        &self,
        theta: &DVector<f64>,
        y: f64,
        x: &DVector<f64>,
    ) -> Option<DMatrix<f64>> {
        let r = y - x.dot(theta);
        if r.abs() <= self.k {
            Some(-(x * x.transpose()))
        } else {
            Some(DMatrix::zeros(x.len(), x.len()))
        }
    }

    fn init(&self, data: &Dataset) -> Result<DVector<f64>> {
        // OLS pilot: consistent and cheap.
        Ok(ols_fit(data)?.theta_hat)
    }
}

// ---------------------------------------------------------------------------
// Quantile (smoothed tilted L1)
// ---------------------------------------------------------------------------

/// Quantile regression functional at level `tau` with a Huberized corner of
/// half-width `epsilon` so the score is piecewise linear and the Newton/IC
/// machinery applies.
#[derive(Debug, Clone, Copy)]
pub struct QuantileFunctional {
    tau: f64,
    epsilon: f64,
}

/// Build a quantile spec; requires `0 < tau < 1` and `epsilon > 0`.
pub fn quantile_spec(tau: f64, epsilon: f64) -> Result<QuantileFunctional> {
    if tau.is_nan() || tau <= 0.0 || tau >= 1.0 {
        return Err(Error::InvalidInput(format!("quantile level must be in (0,1), got {tau}")));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidInput(format!("smoothing width must be positive, got {epsilon}")));
    }
    Ok(QuantileFunctional { tau, epsilon })
}

/// Default corner half-width: `1e-4 · spread(Y)` (and a floor for constant
/// responses).
pub fn quantile_default_epsilon(data: &Dataset) -> f64 {
    let y = data.response();
    let spread = y.max() - y.min();
    if spread > 0.0 {
        1e-4 * spread
    } else {
        1e-8
    }
}

impl QuantileFunctional {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Smoothed check loss: linear with slopes `τ-1` / `τ` outside the corner,
    /// quadratic inside `|r| < ε`, continuous at the seams.
    pub fn rho(&self, r: f64) -> f64 {
        let (tau, eps) = (self.tau, self.epsilon);
        if r >= eps {
            tau * r - 0.25 * eps
        } else if r <= -eps {
            (tau - 1.0) * r - 0.25 * eps
        } else {
            (tau - 0.5) * r + r * r / (4.0 * eps)
        }
    }

    fn psi(&self, r: f64) -> f64 {
        let (tau, eps) = (self.tau, self.epsilon);
        if r >= eps {
            tau
        } else if r <= -eps {
            tau - 1.0
        } else {
            (tau - 0.5) + r / (2.0 * eps)
        }
    }
}

impl Functional for QuantileFunctional {
    fn name(&self) -> &'static str {
        "quantile"
    }

    fn dim_for(&self, p: usize) -> usize {
        p
    }

    fn score(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> DVector<f64> {
        x * self.psi(y - x.dot(theta))
    }

    fn objective(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> Option<f64> {
        Some(self.rho(y - x.dot(theta)))
    }

    fn score_jacobian(
        &self,
        theta: &DVector<f64>,
        y: f64,
        x: &DVector<f64>,
    ) -> Option<DMatrix<f64>> {
        let r = y - x.dot(theta);
        if r.abs() < self.epsilon {
            Some(-(x * x.transpose()) / (2.0 * self.epsilon))
        } else {
            Some(DMatrix::zeros(x.len(), x.len()))
        }
    }

    fn init(&self, data: &Dataset) -> Result<DVector<f64>> {
        Ok(ols_fit(data)?.theta_hat)
    }
}

// ---------------------------------------------------------------------------
// Logistic
// ---------------------------------------------------------------------------

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Bernoulli-logistic ML functional: `ψ = x (y - σ(x'θ))`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogisticFunctional;

/// Parameter norm past which a logistic fit is declared separated.
pub const SEPARATION_GUARD: f64 = 1e6;

pub fn logistic_spec() -> LogisticFunctional {
    LogisticFunctional
}

impl Functional for LogisticFunctional {
    fn name(&self) -> &'static str {
        "logistic"
    }

    fn dim_for(&self, p: usize) -> usize {
        p
    }

    fn score(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> DVector<f64> {
        x * (y - sigmoid(x.dot(theta)))
    }

    fn objective(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> Option<f64> {
        // negative log-likelihood, numerically stable form
        let eta = x.dot(theta);
        let log1pe = if eta > 0.0 { eta + (-eta).exp().ln_1p() } else { eta.exp().ln_1p() };
        Some(log1pe - y * eta)
    }

    fn score_jacobian(
        &self,
        theta: &DVector<f64>,
        _y: f64,
        x: &DVector<f64>,
    ) -> Option<DMatrix<f64>> {
        let p = sigmoid(x.dot(theta));
        Some(-(x * x.transpose()) * (p * (1.0 - p)))
    }

    fn init(&self, data: &Dataset) -> Result<DVector<f64>> {
        // zero init; an OLS pilot is poorly scaled for the logit link
        Ok(DVector::zeros(data.p()))
    }

    fn validate(&self, data: &Dataset) -> Result<()> {
        if data.response().iter().any(|y| *y != 0.0 && *y != 1.0) {
            return Err(Error::InvalidInput("logistic fits need a 0/1 response".into()));
        }
        Ok(())
    }

    fn validate_fit(&self, theta: &DVector<f64>, data: &Dataset) -> Result<()> {
        // Under separation the likelihood has no finite maximizer; the mean
        // score underflows to zero at moderate ‖θ‖, so detect the fit that
        // classifies every positive-weight case perfectly.
        let mut separated = true;
        for i in 0..data.n() {
            if data.weight(i) == 0.0 {
                continue;
            }
            let x = DVector::from_fn(data.p(), |j, _| data.regressors()[(i, j)]);
            let p = sigmoid(x.dot(theta));
            let miss = if data.response()[i] == 1.0 { 1.0 - p } else { p };
            if miss > 1e-6 {
                separated = false;
                break;
            }
        }
        if separated {
            return Err(Error::PerfectSeparation(SEPARATION_GUARD));
        }
        Ok(())
    }

    fn conditional_score_moments(
        &self,
        theta: &DVector<f64>,
        x: &DVector<f64>,
        mu: f64,
        var: f64,
    ) -> Option<(DVector<f64>, DMatrix<f64>)> {
        // y enters the score linearly, so conditional moments are analytic in
        // (μ, V[Y|x]) for any response law.
        let mean = x * (mu - sigmoid(x.dot(theta)));
        let cov = (x * x.transpose()) * var;
        Some((mean, cov))
    }

    fn divergence_guard(&self) -> Option<f64> {
        Some(SEPARATION_GUARD)
    }
}

// ---------------------------------------------------------------------------
// Mean (location) functional
// ---------------------------------------------------------------------------

/// The plain mean functional `ψ = y - θ`, used as a hard oracle in bootstrap
/// and influence tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanFunctional;

impl Functional for MeanFunctional {
    fn name(&self) -> &'static str {
        "mean"
    }

    fn dim_for(&self, _p: usize) -> usize {
        1
    }

    fn score(&self, theta: &DVector<f64>, y: f64, _x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![y - theta[0]])
    }

    fn objective(&self, theta: &DVector<f64>, y: f64, _x: &DVector<f64>) -> Option<f64> {
        let r = y - theta[0];
        Some(0.5 * r * r)
    }

    fn score_jacobian(
        &self,
        _theta: &DVector<f64>,
        _y: f64,
        _x: &DVector<f64>,
    ) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_element(1, 1, -1.0))
    }

    fn init(&self, data: &Dataset) -> Result<DVector<f64>> {
        let n = data.n() as f64;
        let mut m = 0.0;
        for i in 0..data.n() {
            m += data.weight(i) * data.response()[i];
        }
        Ok(DVector::from_vec(vec![m / n]))
    }

    fn conditional_score_moments(
        &self,
        theta: &DVector<f64>,
        _x: &DVector<f64>,
        mu: f64,
        var: f64,
    ) -> Option<(DVector<f64>, DMatrix<f64>)> {
        Some((
            DVector::from_vec(vec![mu - theta[0]]),
            DMatrix::from_element(1, 1, var),
        ))
    }
}
