//! Synthetic populations: a fully specified joint law `P(Y|X) ⊗ P(X)` over a
//! scalar raw regressor, with samplers and quadrature oracles for conditional
//! and marginal score moments.
//!
//! The raw regressor is mapped to the design vector by a [`Design`] (identity
//! or intercept-plus-slope), so fitted dimensions are 1 or 2 for the built-in
//! populations while general datasets remain unrestricted.

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::quadrature;
use crate::stream::SeededStream;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

/// Marginal law of the raw regressor.
#[derive(Debug, Clone, Copy)]
pub enum RegressorLaw {
    Uniform { lo: f64, hi: f64 },
    Gaussian { mean: f64, sd: f64 },
}

impl RegressorLaw {
    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            RegressorLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            RegressorLaw::Gaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        match self {
            RegressorLaw::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            RegressorLaw::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
        }
    }

    /// Interval carrying the quadrature (Gaussian tails truncated at 10 sd).
    pub fn quad_support(&self) -> (f64, f64) {
        match self {
            RegressorLaw::Uniform { lo, hi } => (*lo, *hi),
            RegressorLaw::Gaussian { mean, sd } => (mean - 10.0 * sd, mean + 10.0 * sd),
        }
    }

    pub fn sd(&self) -> f64 {
        match self {
            RegressorLaw::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
            RegressorLaw::Gaussian { sd, .. } => *sd,
        }
    }
}

/// Map from the raw regressor to the design vector fed to functionals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    /// Design vector `[x]`.
    Identity,
    /// Design vector `[1, x]`.
    Intercept,
}

impl Design {
    pub fn dim(&self) -> usize {
        match self {
            Design::Identity => 1,
            Design::Intercept => 2,
        }
    }

    pub fn map(&self, x: f64) -> DVector<f64> {
        match self {
            Design::Identity => DVector::from_vec(vec![x]),
            Design::Intercept => DVector::from_vec(vec![1.0, x]),
        }
    }

    pub fn column_names(&self) -> Vec<String> {
        match self {
            Design::Identity => vec!["x".to_string()],
            Design::Intercept => vec!["intercept".to_string(), "x".to_string()],
        }
    }

    /// Recover the raw regressor from a design row.
    pub fn raw_from_row(&self, row: &[f64]) -> f64 {
        match self {
            Design::Identity => row[0],
            Design::Intercept => row[1],
        }
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Conditional law of the response around the mean function.
#[derive(Clone)]
pub enum NoiseLaw {
    GaussianHomoskedastic { sigma: f64 },
    GaussianHeteroskedastic { sigma_fn: ScalarFn },
    /// `Y = μ(x)` exactly.
    Deterministic,
    /// `Y ~ Bernoulli(μ(x))`; the mean function must map into (0, 1).
    BernoulliLogistic,
}

impl std::fmt::Debug for NoiseLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseLaw::GaussianHomoskedastic { sigma } => {
                write!(f, "GaussianHomoskedastic {{ sigma: {sigma} }}")
            }
            NoiseLaw::GaussianHeteroskedastic { .. } => write!(f, "GaussianHeteroskedastic"),
            NoiseLaw::Deterministic => write!(f, "Deterministic"),
            NoiseLaw::BernoulliLogistic => write!(f, "BernoulliLogistic"),
        }
    }
}

/// A joint law `P(Y|X) ⊗ P(X)` with analytic mean/variance oracles.
#[derive(Clone)]
pub struct SyntheticPopulation {
    name: String,
    regressor_law: RegressorLaw,
    design: Design,
    mean_fn: ScalarFn,
    noise: NoiseLaw,
}

impl std::fmt::Debug for SyntheticPopulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SyntheticPopulation")
            .field("name", &self.name)
            .field("regressor_law", &self.regressor_law)
            .field("design", &self.design)
            .field("noise", &self.noise)
            .finish()
    }
}

/// Number of Gaussian noise standard deviations covered by the y-quadrature.
const NOISE_QUAD_HALF_WIDTH: f64 = 10.0;

impl SyntheticPopulation {
    pub fn new(
        name: impl Into<String>,
        regressor_law: RegressorLaw,
        design: Design,
        mean_fn: impl Fn(f64) -> f64 + Send + Sync + 'static,
        noise: NoiseLaw,
    ) -> Self {
        Self { name: name.into(), regressor_law, design, mean_fn: Arc::new(mean_fn), noise }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn regressor_law(&self) -> &RegressorLaw {
        &self.regressor_law
    }

    pub fn design(&self) -> Design {
        self.design
    }

    pub fn noise(&self) -> &NoiseLaw {
        &self.noise
    }

    /// Conditional mean `μ(x) = E[Y | X = x]`.
    pub fn mean(&self, x: f64) -> f64 {
        (self.mean_fn)(x)
    }

    /// Conditional variance `V[Y | X = x]`.
    pub fn conditional_variance(&self, x: f64) -> f64 {
        match &self.noise {
            NoiseLaw::GaussianHomoskedastic { sigma } => sigma * sigma,
            NoiseLaw::GaussianHeteroskedastic { sigma_fn } => {
                let s = sigma_fn(x);
                s * s
            }
            NoiseLaw::Deterministic => 0.0,
            NoiseLaw::BernoulliLogistic => {
                let p = self.mean(x);
                p * (1.0 - p)
            }
        }
    }

    fn sample_response<R: Rng>(&self, x: f64, rng: &mut R) -> Result<f64> {
        let mu = self.mean(x);
        Ok(match &self.noise {
            NoiseLaw::GaussianHomoskedastic { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                mu + sigma * z
            }
            NoiseLaw::GaussianHeteroskedastic { sigma_fn } => {
                let z: f64 = StandardNormal.sample(rng);
                mu + sigma_fn(x) * z
            }
            NoiseLaw::Deterministic => mu,
            NoiseLaw::BernoulliLogistic => {
                if !(0.0..=1.0).contains(&mu) {
                    return Err(Error::Domain(format!(
                        "Bernoulli mean {mu} outside [0,1] at x = {x}"
                    )));
                }
                if rng.random::<f64>() < mu {
                    1.0
                } else {
                    0.0
                }
            }
        })
    }

    /// Draw `n` iid cases; deterministic given the stream.
    pub fn sample(&self, n: usize, stream: SeededStream) -> Result<Dataset> {
        self.sample_with_raw(n, stream).map(|(d, _)| d)
    }

    /// Draw `n` iid cases and also return the raw regressor values.
    pub fn sample_with_raw(&self, n: usize, stream: SeededStream) -> Result<(Dataset, Vec<f64>)> {
        if n == 0 {
            return Err(Error::InvalidInput("need n >= 1".into()));
        }
        let mut rng = stream.rng();
        let p = self.design.dim();
        let mut regressors = DMatrix::zeros(n, p);
        let mut response = DVector::zeros(n);
        let mut raws = Vec::with_capacity(n);
        for i in 0..n {
            let x = self.regressor_law.sample(&mut rng);
            let d = self.design.map(x);
            for j in 0..p {
                regressors[(i, j)] = d[j];
            }
            response[i] = self.sample_response(x, &mut rng)?;
            raws.push(x);
        }
        let data = Dataset::new(regressors, response, self.design.column_names())?;
        Ok((data, raws))
    }

    /// Conditional expectation `E[g(Y) | X = x]` for a vector-valued `g`.
    ///
    /// Exact for deterministic and Bernoulli noise; adaptive quadrature over
    /// the noise scale otherwise.
    pub fn conditional_expectation<G>(&self, x: f64, dim: usize, g: G) -> Result<DVector<f64>>
    where
        G: Fn(f64) -> DVector<f64>,
    {
        let mu = self.mean(x);
        match &self.noise {
            NoiseLaw::Deterministic => Ok(g(mu)),
            NoiseLaw::BernoulliLogistic => {
                if !(0.0..=1.0).contains(&mu) {
                    return Err(Error::Domain(format!(
                        "Bernoulli mean {mu} outside [0,1] at x = {x}"
                    )));
                }
                Ok(g(1.0) * mu + g(0.0) * (1.0 - mu))
            }
            NoiseLaw::GaussianHomoskedastic { sigma } => {
                gaussian_conditional(mu, *sigma, dim, g)
            }
            NoiseLaw::GaussianHeteroskedastic { sigma_fn } => {
                gaussian_conditional(mu, sigma_fn(x), dim, g)
            }
        }
    }

    /// Marginal expectation `E_X[g(X)]` over the raw regressor law.
    pub fn regressor_expectation<G>(&self, dim: usize, tol: f64, g: G) -> Result<DVector<f64>>
    where
        G: Fn(f64) -> DVector<f64>,
    {
        let (lo, hi) = self.regressor_law.quad_support();
        quadrature::integrate_vec(|x| g(x) * self.regressor_law.density(x), lo, hi, tol, dim)
    }

    /// Population design second moment `E[d(X) d(X)']`.
    pub fn design_second_moment(&self, tol: f64) -> Result<DMatrix<f64>> {
        let p = self.design.dim();
        let flat = self.regressor_expectation(p * p, tol, |x| {
            let d = self.design.map(x);
            flatten(&(&d * d.transpose()))
        })?;
        Ok(unflatten(&flat, p))
    }

    /// Population cross moment `E[d(X) μ(X)]`.
    pub fn design_mean_moment(&self, tol: f64) -> Result<DVector<f64>> {
        let p = self.design.dim();
        self.regressor_expectation(p, tol, |x| self.design.map(x) * self.mean(x))
    }
}

fn gaussian_conditional<G>(mu: f64, sigma: f64, dim: usize, g: G) -> Result<DVector<f64>>
where
    G: Fn(f64) -> DVector<f64>,
{
    if sigma == 0.0 {
        return Ok(g(mu));
    }
    if sigma < 0.0 {
        return Err(Error::Domain(format!("negative noise scale {sigma}")));
    }
    let norm = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    quadrature::integrate_vec(
        |z| g(mu + sigma * z) * (norm * (-0.5 * z * z).exp()),
        -NOISE_QUAD_HALF_WIDTH,
        NOISE_QUAD_HALF_WIDTH,
        1e-10,
        dim,
    )
}

pub(crate) fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows() * m.ncols(), m.iter().copied())
}

pub(crate) fn unflatten(v: &DVector<f64>, dim: usize) -> DMatrix<f64> {
    DMatrix::from_iterator(dim, dim, v.iter().copied())
}
