//! Proper scoring rules, Bregman divergences and entropies for the density
//! power family, plus score-based regression functionals built from them.
//!
//! The convex generators are the Box-Cox-style power transforms
//!
//! ```text
//! φ_α(q) = q^{1+α}/(α(1+α)) - q/α + 1/(1+α)    (α ∉ {0, -1})
//! φ_0(q) = q·log q - q + 1
//! φ_{-1}(q) = -log q + q - 1
//! ```
//!
//! normalized so `φ_α(1) = φ'_α(1) = 0`. Pointwise discrepancies
//! `d(p,q) = φ(p) - φ(q) - φ'(q)(p-q)` integrate to divergences `D_α` with
//! `D_α(P,P) = 0`. Scoring rules `S_α` and entropies `H_α` follow the usual
//! power-family tables (which drop additive constants; at `α = -1` the
//! constant differs from the φ-normalized one by the ν-measure of the
//! support, so the decomposition `D = E_P[S] - H(P)` is exact for `α > -1`
//! and holds up to that constant at `α = -1`).

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::quadrature;
use nalgebra::DVector;
use std::cell::RefCell;
use std::sync::Arc;

/// Width of the logarithmic fill-in branches around α = 0 and α = -1.
pub const ALPHA_BRANCH_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Log0,
    LogNeg1,
    Power,
}

fn branch(alpha: f64) -> Branch {
    if alpha.abs() < ALPHA_BRANCH_TOL {
        Branch::Log0
    } else if (alpha + 1.0).abs() < ALPHA_BRANCH_TOL {
        Branch::LogNeg1
    } else {
        Branch::Power
    }
}

fn check_q(q: f64, alpha: f64) -> Result<()> {
    if !q.is_finite() || q < 0.0 {
        return Err(Error::Domain(format!("density value {q} outside [0, ∞)")));
    }
    if q == 0.0 && !(branch(alpha) == Branch::Power && alpha > 0.0) {
        return Err(Error::Domain(format!(
            "q = 0 is only admitted on the positive power branch (α = {alpha})"
        )));
    }
    Ok(())
}

/// Convex generator `φ_α`.
pub fn phi_alpha(q: f64, alpha: f64) -> Result<f64> {
    check_q(q, alpha)?;
    Ok(match branch(alpha) {
        Branch::Log0 => q * q.ln() - q + 1.0,
        Branch::LogNeg1 => -q.ln() + q - 1.0,
        Branch::Power => {
            q.powf(1.0 + alpha) / (alpha * (1.0 + alpha)) - q / alpha + 1.0 / (1.0 + alpha)
        }
    })
}

/// Derivative `φ'_α`.
pub fn phi_alpha_prime(q: f64, alpha: f64) -> Result<f64> {
    check_q(q, alpha)?;
    Ok(match branch(alpha) {
        Branch::Log0 => q.ln(),
        Branch::LogNeg1 => 1.0 - 1.0 / q,
        Branch::Power => (q.powf(alpha) - 1.0) / alpha,
    })
}

/// A strictly convex scalar function with derivative, for the generic Bregman
/// constructor.
pub trait ConvexGenerator {
    fn value(&self, q: f64) -> Result<f64>;
    fn derivative(&self, q: f64) -> Result<f64>;
}

/// The power generator `φ_α` as a [`ConvexGenerator`].
#[derive(Debug, Clone, Copy)]
pub struct PowerGenerator {
    pub alpha: f64,
}

impl ConvexGenerator for PowerGenerator {
    fn value(&self, q: f64) -> Result<f64> {
        phi_alpha(q, self.alpha)
    }

    fn derivative(&self, q: f64) -> Result<f64> {
        phi_alpha_prime(q, self.alpha)
    }
}

/// Pointwise Bregman discrepancy `d(p,q) = φ(p) - φ(q) - φ'(q)(p-q)`;
/// nonnegative for convex φ, zero iff `p = q` for strictly convex φ.
pub fn bregman_pointwise<G: ConvexGenerator>(generator: &G, p: f64, q: f64) -> Result<f64> {
    Ok(generator.value(p)? - generator.value(q)? - generator.derivative(q)? * (p - q))
}

fn d_alpha(p: f64, q: f64, alpha: f64) -> Result<f64> {
    bregman_pointwise(&PowerGenerator { alpha }, p, q)
}

// ---------------------------------------------------------------------------
// Density models
// ---------------------------------------------------------------------------

type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type PowerIntegralFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A response distribution with density `q` against a dominating measure ν:
/// Lebesgue on a declared interval, or counting measure on weighted atoms
/// (where all integrals are exact sums).
#[derive(Clone)]
pub enum DensityModel {
    Continuous {
        density: DensityFn,
        support: (f64, f64),
        /// Analytic `c ↦ ∫ q^c dν` when known.
        power_integral: Option<PowerIntegralFn>,
        /// Analytic `∫ log q dν` when known.
        log_integral: Option<f64>,
    },
    Discrete {
        /// `(y, probability)` atoms.
        atoms: Vec<(f64, f64)>,
    },
}

/// Quadrature tolerance used for density-model integrals.
pub const DENSITY_QUAD_TOL: f64 = 1e-10;

/// Tolerance on `∫ q dν = 1`.
pub const MASS_TOL: f64 = 1e-8;

impl DensityModel {
    pub fn continuous(
        density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        support: (f64, f64),
    ) -> Self {
        DensityModel::Continuous {
            density: Arc::new(density),
            support,
            power_integral: None,
            log_integral: None,
        }
    }

    pub fn with_power_integral(
        mut self,
        integral: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        if let DensityModel::Continuous { power_integral, .. } = &mut self {
            *power_integral = Some(Arc::new(integral));
        }
        self
    }

    pub fn with_log_integral(mut self, value: f64) -> Self {
        if let DensityModel::Continuous { log_integral, .. } = &mut self {
            *log_integral = Some(value);
        }
        self
    }

    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidInput("discrete law needs at least one atom".into()));
        }
        if atoms.iter().any(|(_, p)| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidInput("atom probabilities must be nonnegative".into()));
        }
        let mass: f64 = atoms.iter().map(|(_, p)| p).sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidInput(format!("atom probabilities sum to {mass}")));
        }
        Ok(DensityModel::Discrete { atoms })
    }

    /// Standard normal with analytic power and log integrals.
    pub fn standard_normal() -> Self {
        let two_pi = 2.0 * std::f64::consts::PI;
        DensityModel::continuous(
            move |y| (-0.5 * y * y).exp() / two_pi.sqrt(),
            (-12.0, 12.0),
        )
        // ∫ N(0,1)^c dy = (2π)^{(1-c)/2} c^{-1/2}
        .with_power_integral(move |c| two_pi.powf(0.5 * (1.0 - c)) / c.sqrt())
    }

    pub fn density_at(&self, y: f64) -> f64 {
        match self {
            DensityModel::Continuous { density, .. } => density(y),
            DensityModel::Discrete { atoms } => atoms
                .iter()
                .find(|(a, _)| *a == y)
                .map(|(_, p)| *p)
                .unwrap_or(0.0),
        }
    }

    /// `∫ f(y, q(y)) dν` over the model's dominating measure.
    pub fn nu_integral<F: Fn(f64, f64) -> f64>(&self, f: F) -> Result<f64> {
        match self {
            DensityModel::Continuous { density, support, .. } => {
                quadrature::integrate(|y| f(y, density(y)), support.0, support.1, DENSITY_QUAD_TOL)
            }
            DensityModel::Discrete { atoms } => Ok(atoms.iter().map(|&(y, p)| f(y, p)).sum()),
        }
    }

    /// Check `∫ q dν = 1` within [`MASS_TOL`].
    pub fn validate(&self) -> Result<()> {
        let mass = self.nu_integral(|_, q| q)?;
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidInput(format!("density mass {mass} differs from 1")));
        }
        Ok(())
    }

    /// `∫ q^c dν`, analytic when declared.
    pub fn power_int(&self, c: f64) -> Result<f64> {
        match self {
            DensityModel::Continuous { power_integral: Some(f), .. } => Ok(f(c)),
            _ => self.nu_integral(|_, q| if q == 0.0 && c > 0.0 { 0.0 } else { q.powf(c) }),
        }
    }

    /// `∫ log q dν`, analytic when declared.
    pub fn log_int(&self) -> Result<f64> {
        match self {
            DensityModel::Continuous { log_integral: Some(v), .. } => Ok(*v),
            DensityModel::Discrete { atoms } => {
                if atoms.iter().any(|(_, p)| *p <= 0.0) {
                    return Err(Error::Domain("log integral needs strictly positive atoms".into()));
                }
                Ok(atoms.iter().map(|(_, p)| p.ln()).sum())
            }
            _ => self.nu_integral(|_, q| q.ln()),
        }
    }

    /// `E_Q[f(Y)] = ∫ f(y) q(y) dν`.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        self.nu_integral(|y, q| f(y) * q)
    }
}

/// Integrated Bregman divergence `D_α(P, Q) = ∫ d_α(p(y), q(y)) dν`.
///
/// Both models must live on a shared dominating measure: two discrete laws on
/// the same atoms, or two continuous laws (integrated over the union of their
/// declared supports).
pub fn divergence(p: &DensityModel, q: &DensityModel, alpha: f64) -> Result<f64> {
    match (p, q) {
        (DensityModel::Discrete { atoms: pa }, DensityModel::Discrete { atoms: qa }) => {
            if pa.len() != qa.len()
                || pa.iter().zip(qa).any(|((y1, _), (y2, _))| (y1 - y2).abs() > 1e-12)
            {
                return Err(Error::Domain("discrete laws must share their atoms".into()));
            }
            let mut acc = 0.0;
            for ((_, pp), (_, qq)) in pa.iter().zip(qa) {
                acc += d_alpha(*pp, *qq, alpha)?;
            }
            Ok(acc)
        }
        (
            DensityModel::Continuous { density: pd, support: ps, .. },
            DensityModel::Continuous { density: qd, support: qs, .. },
        ) => {
            let lo = ps.0.min(qs.0);
            let hi = ps.1.max(qs.1);
            let captured: RefCell<Option<Error>> = RefCell::new(None);
            let value = quadrature::integrate(
                |y| match d_alpha(pd(y), qd(y), alpha) {
                    Ok(v) => v,
                    Err(e) => {
                        captured.borrow_mut().get_or_insert(e);
                        f64::NAN
                    }
                },
                lo,
                hi,
                DENSITY_QUAD_TOL,
            );
            if let Some(e) = captured.into_inner() {
                return Err(e);
            }
            value
        }
        _ => Err(Error::Domain("density models must share a dominating measure".into())),
    }
}

/// Proper scoring rule `S_α(y, Q)` of the density power family.
pub fn scoring_rule(y: f64, model: &DensityModel, alpha: f64) -> Result<f64> {
    let qy = model.density_at(y);
    if qy <= 0.0 && alpha <= 0.0 {
        return Err(Error::Domain(format!("q(y) = {qy} at y = {y} on a log/negative-power branch")));
    }
    Ok(match branch(alpha) {
        Branch::Log0 => -qy.ln(),
        Branch::LogNeg1 => 1.0 / qy + model.log_int()?,
        Branch::Power => -qy.powf(alpha) / alpha + model.power_int(1.0 + alpha)? / (1.0 + alpha),
    })
}

/// Entropy `H_α(Q)` of the density power family.
pub fn entropy(model: &DensityModel, alpha: f64) -> Result<f64> {
    Ok(match branch(alpha) {
        Branch::Log0 => -model.nu_integral(|_, q| if q == 0.0 { 0.0 } else { q * q.ln() })?,
        Branch::LogNeg1 => model.log_int()?,
        Branch::Power => -model.power_int(1.0 + alpha)? / (alpha * (1.0 + alpha)),
    })
}

// ---------------------------------------------------------------------------
// Score-based regression functionals
// ---------------------------------------------------------------------------

/// A working family of conditional response densities `{Q(·|x; θ)}`.
///
/// Densities are supplied in log space so power weights `q^α` underflow
/// cleanly to zero on gross outliers instead of producing `0·∞`.
pub trait ResponseFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn dim_for(&self, p: usize) -> usize;
    /// `log q(y | x; θ)`.
    fn log_density(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> f64;
    /// `∇_θ log q(y | x; θ)`.
    fn log_density_grad(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> DVector<f64>;
    /// `q(y | x; θ)`.
    fn density(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> f64 {
        self.log_density(theta, y, x).exp()
    }
    /// Analytic `(∫ q^c dν, ∇_θ ∫ q^c dν)` when available.
    fn power_integral(
        &self,
        _theta: &DVector<f64>,
        _x: &DVector<f64>,
        _c: f64,
    ) -> Option<(f64, DVector<f64>)> {
        None
    }
    /// Integration interval for the quadrature fallback.
    fn support(&self, theta: &DVector<f64>, x: &DVector<f64>) -> (f64, f64);
    fn init(&self, data: &Dataset) -> Result<DVector<f64>>;
    /// Outlier-resistant starting point for redescending scores (α > 0);
    /// defaults to the plain init.
    fn robust_init(&self, data: &Dataset) -> Result<DVector<f64>> {
        self.init(data)
    }
}

/// Gaussian linear regression family `Q(y|x; θ) = N(θ'x, σ²)` with fixed σ.
#[derive(Debug, Clone, Copy)]
pub struct GaussianLinearFamily {
    pub sigma: f64,
}

impl GaussianLinearFamily {
    pub fn new(sigma: f64) -> Result<Self> {
        if sigma.is_nan() || sigma <= 0.0 {
            return Err(Error::InvalidInput(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }
}

impl ResponseFamily for GaussianLinearFamily {
    fn name(&self) -> &'static str {
        "gaussian-linear"
    }

    fn dim_for(&self, p: usize) -> usize {
        p
    }

    fn log_density(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> f64 {
        let z = (y - x.dot(theta)) / self.sigma;
        -0.5 * z * z - (self.sigma * (2.0 * std::f64::consts::PI).sqrt()).ln()
    }

    fn log_density_grad(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> DVector<f64> {
        let r = y - x.dot(theta);
        x * (r / (self.sigma * self.sigma))
    }

    fn power_integral(
        &self,
        theta: &DVector<f64>,
        _x: &DVector<f64>,
        c: f64,
    ) -> Option<(f64, DVector<f64>)> {
        // location family: the integral does not depend on θ
        let s2 = self.sigma * self.sigma;
        let value = (2.0 * std::f64::consts::PI * s2).powf(0.5 * (1.0 - c)) / c.sqrt();
        Some((value, DVector::zeros(theta.len())))
    }

    fn support(&self, theta: &DVector<f64>, x: &DVector<f64>) -> (f64, f64) {
        let m = x.dot(theta);
        (m - 12.0 * self.sigma, m + 12.0 * self.sigma)
    }

    fn init(&self, data: &Dataset) -> Result<DVector<f64>> {
        Ok(crate::functionals::ols_fit(data)?.theta_hat)
    }

    fn robust_init(&self, data: &Dataset) -> Result<DVector<f64>> {
        let huber = crate::functionals::huber_spec(1.345 * self.sigma)?;
        let cfg = crate::solver::SolverConfig::default();
        Ok(crate::solver::ee_solve(&huber, data, &cfg)?.theta_hat)
    }
}

/// The PS functional: objective `L(θ; y, x) = S_α(y, Q(·|x; θ))`, score its
/// negative θ-gradient. At α = 0 this is the ML functional of the family.
pub struct PowerScoreFunctional {
    family: Arc<dyn ResponseFamily>,
    alpha: f64,
}

/// Build the scoring objective for a model family at power `alpha`.
pub fn scoring_objective(family: Arc<dyn ResponseFamily>, alpha: f64) -> Result<PowerScoreFunctional> {
    if !alpha.is_finite() {
        return Err(Error::InvalidInput("alpha must be finite".into()));
    }
    Ok(PowerScoreFunctional { family, alpha })
}

impl PowerScoreFunctional {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `(∫ q^c dν, ∇_θ ∫ q^c dν)`, analytic or by quadrature.
    fn power_integral(
        &self,
        theta: &DVector<f64>,
        x: &DVector<f64>,
        c: f64,
    ) -> Option<(f64, DVector<f64>)> {
        if let Some(v) = self.family.power_integral(theta, x, c) {
            return Some(v);
        }
        let (lo, hi) = self.family.support(theta, x);
        let q = theta.len();
        let stacked = quadrature::integrate_vec(
            |y| {
                let qc = (c * self.family.log_density(theta, y, x)).exp();
                let grad = self.family.log_density_grad(theta, y, x);
                let mut out = DVector::zeros(1 + q);
                out[0] = qc;
                // ∇ ∫q^c = c ∫ q^c ∇log q
                out.rows_mut(1, q).copy_from(&(grad * (c * qc)));
                out
            },
            lo,
            hi,
            DENSITY_QUAD_TOL,
            1 + q,
        )
        .ok()?;
        let value = stacked[0];
        let grad = DVector::from_iterator(q, stacked.iter().skip(1).copied());
        Some((value, grad))
    }
}

impl Functional for PowerScoreFunctional {
    fn name(&self) -> &'static str {
        "score-power"
    }

    fn dim_for(&self, p: usize) -> usize {
        self.family.dim_for(p)
    }

    fn score(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> DVector<f64> {
        let q = theta.len();
        let log_q = self.family.log_density(theta, y, x);
        let grad_log = self.family.log_density_grad(theta, y, x);
        match branch(self.alpha) {
            // ψ = ∇ log q (the ML score)
            Branch::Log0 => grad_log,
            // ψ = q⁻¹ ∇log q - ∫ ∇log q dν
            Branch::LogNeg1 => {
                let (lo, hi) = self.family.support(theta, x);
                let tail = quadrature::integrate_vec(
                    |yy| self.family.log_density_grad(theta, yy, x),
                    lo,
                    hi,
                    DENSITY_QUAD_TOL,
                    q,
                );
                match tail {
                    Ok(t) => grad_log * (-log_q).exp() - t,
                    Err(_) => DVector::from_element(q, f64::NAN),
                }
            }
            // ψ = q^α ∇log q - (∇ ∫q^{1+α} dν)/(1+α); q^α underflows to 0 on
            // gross outliers, which is the redescending limit
            Branch::Power => match self.power_integral(theta, x, 1.0 + self.alpha) {
                Some((_, dint)) => {
                    grad_log * (self.alpha * log_q).exp() - dint / (1.0 + self.alpha)
                }
                None => DVector::from_element(q, f64::NAN),
            },
        }
    }

    fn objective(&self, theta: &DVector<f64>, y: f64, x: &DVector<f64>) -> Option<f64> {
        let log_q = self.family.log_density(theta, y, x);
        match branch(self.alpha) {
            Branch::Log0 => Some(-log_q),
            Branch::LogNeg1 => None,
            Branch::Power => {
                let (int, _) = self.power_integral(theta, x, 1.0 + self.alpha)?;
                Some(-(self.alpha * log_q).exp() / self.alpha + int / (1.0 + self.alpha))
            }
        }
    }

    fn init(&self, data: &Dataset) -> Result<DVector<f64>> {
        // positive powers downweight outliers and the score redescends, so a
        // non-robust pilot can start outside the Newton basin of the inlier
        // root
        if self.alpha > ALPHA_BRANCH_TOL {
            self.family.robust_init(data)
        } else {
            self.family.init(data)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    /// Closed-form power discrepancies from the family tables (with the
    /// α = -1 row carrying its normalizing constant -1 so that d(p,p) = 0).
    fn d_alpha_table(p: f64, q: f64, alpha: f64) -> f64 {
        if alpha.abs() < ALPHA_BRANCH_TOL {
            p * (p / q).ln() + q - p
        } else if (alpha + 1.0).abs() < ALPHA_BRANCH_TOL {
            -(p / q).ln() + p / q - 1.0
        } else {
            p.powf(1.0 + alpha) / (alpha * (1.0 + alpha)) + q.powf(1.0 + alpha) / (1.0 + alpha)
                - p * q.powf(alpha) / alpha
        }
    }

    #[test]
    fn phi_is_normalized_at_one() {
        for alpha in [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0] {
            assert!(phi_alpha(1.0, alpha).unwrap().abs() < 1e-14, "φ_{alpha}(1)");
            assert!(phi_alpha_prime(1.0, alpha).unwrap().abs() < 1e-14, "φ'_{alpha}(1)");
        }
    }

    #[test]
    fn phi_zero_branch_value() {
        let e = std::f64::consts::E;
        assert_relative_eq!(phi_alpha(e, 0.0).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn phi_is_continuous_across_the_branch_point() {
        for q in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let near = phi_alpha(q, 1e-8).unwrap();
            let at = phi_alpha(q, 0.0).unwrap();
            assert!((near - at).abs() <= 1e-6, "q = {q}: {near} vs {at}");
            let near = phi_alpha(q, -1.0 + 1e-8).unwrap();
            let at = phi_alpha(q, -1.0).unwrap();
            assert!((near - at).abs() <= 1e-6, "q = {q} near -1");
        }
    }

    #[test]
    fn phi_domain_errors() {
        assert!(phi_alpha(-0.5, 1.0).is_err());
        assert!(phi_alpha(0.0, 0.0).is_err());
        assert!(phi_alpha(0.0, -1.0).is_err());
        assert!(phi_alpha(0.0, -0.5).is_err());
        assert!(phi_alpha(0.0, 0.5).is_ok());
    }

    #[test]
    fn bregman_vanishes_on_the_diagonal_and_squares_for_quadratic_phi() {
        struct Quad;
        impl ConvexGenerator for Quad {
            fn value(&self, q: f64) -> Result<f64> {
                Ok(q * q)
            }
            fn derivative(&self, q: f64) -> Result<f64> {
                Ok(2.0 * q)
            }
        }
        for p in [0.2, 1.0, 3.7] {
            assert!(bregman_pointwise(&Quad, p, p).unwrap().abs() < 1e-14);
        }
        assert_relative_eq!(bregman_pointwise(&Quad, 2.5, 1.0).unwrap(), 2.25, epsilon = 1e-14);
    }

    #[test]
    fn bregman_power_matches_table_closed_forms() {
        let mut rng = crate::stream::SeededStream::new(17).rng();
        for _ in 0..50 {
            let alpha = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 1.7][rng.random_range(0..7)];
            let p = 0.05 + 3.0 * rng.random::<f64>();
            let q = 0.05 + 3.0 * rng.random::<f64>();
            let got = d_alpha(p, q, alpha).unwrap();
            let want = d_alpha_table(p, q, alpha);
            assert!((got - want).abs() < 1e-10, "α={alpha} p={p} q={q}: {got} vs {want}");
            assert!(got >= -1e-12);
        }
    }

    #[test]
    fn divergence_of_a_law_with_itself_vanishes() {
        let p = DensityModel::discrete(vec![(0.0, 0.2), (1.0, 0.3), (2.0, 0.5)]).unwrap();
        for alpha in [-1.0, 0.0, 0.5, 1.0, 2.0] {
            assert!(divergence(&p, &p, alpha).unwrap().abs() <= 1e-10);
        }
        let n = DensityModel::standard_normal();
        assert!(divergence(&n, &n, 1.0).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn divergence_alpha_one_is_half_l2() {
        let p = DensityModel::discrete(vec![(0.0, 0.2), (1.0, 0.3), (2.0, 0.5)]).unwrap();
        let q = DensityModel::discrete(vec![(0.0, 1.0 / 3.0), (1.0, 1.0 / 3.0), (2.0, 1.0 / 3.0)])
            .unwrap();
        let direct: f64 = [(0.2, 1.0 / 3.0), (0.3, 1.0 / 3.0), (0.5, 1.0 / 3.0)]
            .iter()
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        assert_relative_eq!(divergence(&p, &q, 1.0).unwrap(), 0.5 * direct, epsilon = 1e-14);
    }

    #[test]
    fn divergence_alpha_zero_is_kullback_leibler() {
        let p = DensityModel::discrete(vec![(0.0, 0.2), (1.0, 0.3), (2.0, 0.5)]).unwrap();
        let q = DensityModel::discrete(vec![(0.0, 1.0 / 3.0), (1.0, 1.0 / 3.0), (2.0, 1.0 / 3.0)])
            .unwrap();
        let kl: f64 = [(0.2f64, 1.0 / 3.0), (0.3, 1.0 / 3.0), (0.5, 1.0 / 3.0)]
            .iter()
            .map(|(a, b)| a * (a / b).ln())
            .sum();
        assert_relative_eq!(divergence(&p, &q, 0.0).unwrap(), kl, epsilon = 1e-14);
    }

    #[test]
    fn scoring_rule_zero_is_negative_log_likelihood() {
        let q = DensityModel::discrete(vec![(0.0, 0.25), (1.0, 0.75)]).unwrap();
        assert_relative_eq!(scoring_rule(1.0, &q, 0.0).unwrap(), -(0.75f64.ln()), epsilon = 1e-14);
    }

    #[test]
    fn scoring_rule_alpha_one_standard_normal_and_gini_entropy() {
        let n = DensityModel::standard_normal();
        let q0 = n.density_at(0.0);
        // quadrature oracle for ∫ q², against the analytic 1/(2√π)
        let int_q2 = n.nu_integral(|_, q| q * q).unwrap();
        assert_relative_eq!(int_q2, 1.0 / (2.0 * std::f64::consts::PI.sqrt()), epsilon = 1e-10);
        let s = scoring_rule(0.0, &n, 1.0).unwrap();
        assert_relative_eq!(s, -q0 + 0.5 * int_q2, epsilon = 1e-10);
        let h = entropy(&n, 1.0).unwrap();
        assert_relative_eq!(h, -0.5 * int_q2, epsilon = 1e-10);
    }

    #[test]
    fn decomposition_b_is_exact_on_discrete_laws() {
        // D_α(P,Q) = E_P[S_α(Y,Q)] - H_α(P) exactly for α > -1
        let p = DensityModel::discrete(vec![(0.0, 0.1), (1.0, 0.6), (2.0, 0.3)]).unwrap();
        let q = DensityModel::discrete(vec![(0.0, 0.3), (1.0, 0.3), (2.0, 0.4)]).unwrap();
        for alpha in [0.0, 0.5, 1.0, 2.0] {
            let d = divergence(&p, &q, alpha).unwrap();
            let ps = p.expect(|y| scoring_rule(y, &q, alpha).unwrap()).unwrap();
            let h = entropy(&p, alpha).unwrap();
            assert!((d - (ps - h)).abs() < 1e-12, "alpha = {alpha}");
        }
    }

    #[test]
    fn propriety_difference_identity_holds_at_alpha_minus_one() {
        // E_P[S_{-1}(Y,Q)] - E_P[S_{-1}(Y,P)] = D_{-1}(P,Q): the table's
        // dropped constants cancel in the difference.
        let p = DensityModel::discrete(vec![(0.0, 0.1), (1.0, 0.6), (2.0, 0.3)]).unwrap();
        let q = DensityModel::discrete(vec![(0.0, 0.3), (1.0, 0.3), (2.0, 0.4)]).unwrap();
        let gap = p.expect(|y| scoring_rule(y, &q, -1.0).unwrap()).unwrap()
            - p.expect(|y| scoring_rule(y, &p, -1.0).unwrap()).unwrap();
        let d = divergence(&p, &q, -1.0).unwrap();
        assert!((gap - d).abs() < 1e-12);
    }

    #[test]
    fn entropy_is_concave_on_discrete_laws() {
        let pa = [0.1, 0.6, 0.3];
        let qa = [0.5, 0.2, 0.3];
        for alpha in [-1.0, 0.0, 0.5, 1.0] {
            let hp = entropy(&DensityModel::discrete(vec![(0.0, pa[0]), (1.0, pa[1]), (2.0, pa[2])]).unwrap(), alpha).unwrap();
            let hq = entropy(&DensityModel::discrete(vec![(0.0, qa[0]), (1.0, qa[1]), (2.0, qa[2])]).unwrap(), alpha).unwrap();
            for k in 1..10 {
                let lam = k as f64 / 10.0;
                let mix: Vec<(f64, f64)> = (0..3)
                    .map(|i| (i as f64, lam * pa[i] + (1.0 - lam) * qa[i]))
                    .collect();
                let hm = entropy(&DensityModel::discrete(mix).unwrap(), alpha).unwrap();
                assert!(
                    hm >= lam * hp + (1.0 - lam) * hq - 1e-12,
                    "alpha = {alpha}, lambda = {lam}"
                );
            }
        }
    }

    #[test]
    fn gaussian_family_log_density_gradient_is_consistent() {
        let fam = GaussianLinearFamily::new(1.3).unwrap();
        let theta = DVector::from_vec(vec![0.4, -0.2]);
        let x = DVector::from_vec(vec![1.0, 0.7]);
        let y = 0.9;
        let grad = fam.log_density_grad(&theta, y, &x);
        let h = 1e-6;
        for j in 0..2 {
            let mut tp = theta.clone();
            tp[j] += h;
            let mut tm = theta.clone();
            tm[j] -= h;
            let fd = (fam.log_density(&tp, y, &x) - fam.log_density(&tm, y, &x)) / (2.0 * h);
            assert_relative_eq!(grad[j], fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn power_score_at_alpha_zero_is_the_ml_score() {
        let fam = GaussianLinearFamily::new(1.0).unwrap();
        let spec = scoring_objective(Arc::new(fam), 0.0).unwrap();
        let theta = DVector::from_vec(vec![0.5, 1.0]);
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let y = 3.1;
        let s = spec.score(&theta, y, &x);
        // Gaussian NLL score with σ = 1: x (y - θ'x)
        let expect = &x * (y - x.dot(&theta));
        assert!((s - expect).amax() < 1e-12);
    }

    #[test]
    fn gaussian_scoring_fit_at_alpha_zero_equals_ols() {
        use crate::dataset::Dataset;
        use crate::solver::{ee_solve, SolverConfig};
        use nalgebra::DMatrix;
        let reg = DMatrix::from_row_slice(5, 2, &[1.0, 0.4, 1.0, 1.3, 1.0, 2.1, 1.0, 3.7, 1.0, 4.4]);
        let d = Dataset::new(
            reg,
            DVector::from_vec(vec![0.9, 2.6, 3.1, 5.5, 6.0]),
            vec!["intercept".into(), "x".into()],
        )
        .unwrap();
        let spec = scoring_objective(Arc::new(GaussianLinearFamily::new(1.0).unwrap()), 0.0).unwrap();
        let est = ee_solve(&spec, &d, &SolverConfig::default()).unwrap();
        let ols = crate::functionals::ols_fit(&d).unwrap();
        assert!((est.theta_hat - ols.theta_hat).amax() < 1e-9);
    }
}
