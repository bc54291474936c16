//! Model-robust regression inference.
//!
//! Regression functionals are defined by scores/objectives without assuming a
//! working model is correct. This crate fits them by direct solves or damped
//! Newton on estimating equations, and quantifies uncertainty the
//! model-robust way:
//!
//! - influence values and plug-in sandwich variance, with the meat split into
//!   a noise part `E[V[ψ|X]]` and a misspecification ("approximation") part
//!   `V[E[ψ|X]]` when population oracles are available;
//! - estimation offsets against the conditional parameter θ(X) and the
//!   population target θ(P), plus a Monte Carlo harness checking their CLTs;
//! - the M-of-N pairs bootstrap, bagged functionals, and the comparison of
//!   `M·Var*(θ*)` with the plug-in sandwich;
//! - kernel-reweighting diagnostics that probe well-specification by moving a
//!   Gaussian weight across a regressor's range;
//! - proper scoring rules and Bregman/density-power divergences, including
//!   score-based robust regression functionals.
//!
//! Randomized routines take a [`SeededStream`]; with or without the default
//! `parallel` (rayon) feature, identical streams produce identical results.

pub use nalgebra;

pub mod bootstrap;
pub mod dataset;
pub mod diagnostics;
pub mod error;
mod exec;
pub mod functionals;
pub mod inference;
mod linalg;
pub mod population;
pub mod quadrature;
pub mod scoring;
pub mod simulation;
pub mod solver;
pub mod stream;

pub use dataset::{acceptability_check, Acceptability, Dataset, RANK_TOLERANCE};
pub use error::{Error, Result};
pub use functionals::{
    huber_spec, logistic_spec, ols_fit, quantile_default_epsilon, quantile_spec, ridge_fit,
    Functional, FunctionalEstimate, HuberFunctional, LogisticFunctional, MeanFunctional,
    MomentSource, OlsFunctional, QuantileFunctional, RidgeFunctional,
};
pub use inference::{
    conditional_parameter, estimation_offsets, influence_values, partial_influence_x,
    population_parameter, sandwich_variance, sandwich_variance_with, variance_decomposition,
    OffsetReport, SmallSampleCorrection, VarianceReport,
};
pub use population::{Design, NoiseLaw, RegressorLaw, SyntheticPopulation};
pub use solver::{bread_jacobian, ee_solve, InitStrategy, JacobianMode, SolverConfig};
pub use stream::SeededStream;

pub use bootstrap::{
    bagged_functional, m_of_n_bootstrap, plugin_limit_check, BagSource, BootstrapPlan,
    BootstrapResult, Fitter, OlsFitter, PluginLimitTable, ResampleMode, SpecFitter,
};
pub use diagnostics::{
    gaussian_weights, interior_deciles, localized_functional_data,
    localized_functional_population, misspecification_test, reweighting_diagnostic, CenterGrid,
    DiagnosticConfig, DiagnosticTrace, KernelWeightSpec, MisspecTest,
};
pub use simulation::{builtin_population, clt_check, eo_sampler, CltReport, EoSample};
