//! Built-in synthetic populations with controlled misspecification, and the
//! Monte Carlo harness verifying the CLT decomposition of estimation offsets.

use crate::error::{Error, Result};
use crate::exec;
use crate::functionals::Functional;
use crate::inference::{
    conditional_parameter, population_bread, population_parameter, variance_decomposition,
};
use crate::linalg;
use crate::population::{Design, NoiseLaw, RegressorLaw, SyntheticPopulation};
use crate::solver::{ee_solve, SolverConfig};
use crate::stream::SeededStream;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

/// Maximum tolerated fraction of failed replicate fits.
const MAX_FIT_FAILURE_FRACTION: f64 = 0.01;

fn param_f64(params: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| Error::InvalidInput(format!("parameter `{key}`: cannot parse `{v}`"))),
    }
}

fn param_pair(params: &BTreeMap<String, String>, key: &str, default: (f64, f64)) -> Result<(f64, f64)> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => {
            let parts: Vec<&str> = v.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::InvalidInput(format!(
                    "parameter `{key}` must be two comma-separated reals, got `{v}`"
                )));
            }
            let a = parts[0].trim().parse().map_err(|_| {
                Error::InvalidInput(format!("parameter `{key}`: cannot parse `{}`", parts[0]))
            })?;
            let b = parts[1].trim().parse().map_err(|_| {
                Error::InvalidInput(format!("parameter `{key}`: cannot parse `{}`", parts[1]))
            })?;
            Ok((a, b))
        }
    }
}

fn reject_unknown(params: &BTreeMap<String, String>, allowed: &[&str]) -> Result<()> {
    for key in params.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(Error::InvalidInput(format!(
                "unknown population parameter `{key}` (allowed: {})",
                allowed.join(", ")
            )));
        }
    }
    Ok(())
}

fn sigmoid(t: f64) -> f64 {
    crate::functionals::sigmoid(t)
}

/// Construct a built-in scenario population.
///
/// Names: `linear-homo`, `linear-hetero`, `quadratic`, `sine`,
/// `deterministic-quadratic`, `logistic-true`, `logistic-misspec`.
pub fn builtin_population(
    name: &str,
    params: &BTreeMap<String, String>,
) -> Result<SyntheticPopulation> {
    match name {
        "linear-homo" => {
            reject_unknown(params, &["beta0", "sigma"])?;
            let (b0, b1) = param_pair(params, "beta0", (1.0, 2.0))?;
            let sigma = param_f64(params, "sigma", 1.0)?;
            Ok(SyntheticPopulation::new(
                name,
                RegressorLaw::Gaussian { mean: 0.0, sd: 1.0 },
                Design::Intercept,
                move |x| b0 + b1 * x,
                NoiseLaw::GaussianHomoskedastic { sigma },
            ))
        }
        "linear-hetero" => {
            reject_unknown(params, &["beta0", "sigma"])?;
            let (b0, b1) = param_pair(params, "beta0", (1.0, 2.0))?;
            let sigma = param_f64(params, "sigma", 1.0)?;
            Ok(SyntheticPopulation::new(
                name,
                RegressorLaw::Gaussian { mean: 0.0, sd: 1.0 },
                Design::Intercept,
                move |x| b0 + b1 * x,
                NoiseLaw::GaussianHeteroskedastic {
                    sigma_fn: std::sync::Arc::new(move |x| sigma * (1.0 + x * x).sqrt()),
                },
            ))
        }
        "quadratic" => {
            reject_unknown(params, &["sigma"])?;
            let sigma = param_f64(params, "sigma", 0.5)?;
            Ok(SyntheticPopulation::new(
                name,
                RegressorLaw::Uniform { lo: 0.0, hi: 1.0 },
                Design::Identity,
                |x| x * x,
                NoiseLaw::GaussianHomoskedastic { sigma },
            ))
        }
        "sine" => {
            reject_unknown(params, &["sigma"])?;
            let sigma = param_f64(params, "sigma", 0.5)?;
            Ok(SyntheticPopulation::new(
                name,
                RegressorLaw::Uniform { lo: 0.0, hi: 1.0 },
                Design::Intercept,
                |x| (2.0 * std::f64::consts::PI * x).sin(),
                NoiseLaw::GaussianHomoskedastic { sigma },
            ))
        }
        "deterministic-quadratic" => {
            reject_unknown(params, &[])?;
            Ok(SyntheticPopulation::new(
                name,
                RegressorLaw::Uniform { lo: 0.0, hi: 1.0 },
                Design::Intercept,
                |x| x * x,
                NoiseLaw::Deterministic,
            ))
        }
        "logistic-true" => {
            reject_unknown(params, &["theta0"])?;
            let (t0, t1) = param_pair(params, "theta0", (0.5, 1.0))?;
            Ok(SyntheticPopulation::new(
                name,
                RegressorLaw::Gaussian { mean: 0.0, sd: 1.0 },
                Design::Intercept,
                move |x| sigmoid(t0 + t1 * x),
                NoiseLaw::BernoulliLogistic,
            ))
        }
        "logistic-misspec" => {
            reject_unknown(params, &["a", "b", "c"])?;
            let a = param_f64(params, "a", 0.5)?;
            let b = param_f64(params, "b", 1.0)?;
            let c = param_f64(params, "c", -0.8)?;
            Ok(SyntheticPopulation::new(
                name,
                RegressorLaw::Gaussian { mean: 0.0, sd: 1.0 },
                Design::Intercept,
                move |x| sigmoid(a + b * x + c * x * x),
                NoiseLaw::BernoulliLogistic,
            ))
        }
        other => Err(Error::UnknownPopulation(other.to_string())),
    }
}

/// Empirical-vs-theoretical comparison of the three CLTs.
#[derive(Debug, Clone)]
pub struct CltReport {
    pub n: usize,
    pub r: usize,
    pub emp_var_total: DMatrix<f64>,
    pub emp_var_noise: DMatrix<f64>,
    pub emp_var_approx: DMatrix<f64>,
    pub theo_total: DMatrix<f64>,
    pub theo_noise: DMatrix<f64>,
    pub theo_approx: DMatrix<f64>,
    /// Frobenius-relative errors for (total, noise, approx); absolute
    /// Frobenius norm when the theoretical matrix vanishes.
    pub rel_err: [f64; 3],
    /// Empirical correlation matrix `corr(noise_i, approx_j)`.
    pub cross_corr: DMatrix<f64>,
    pub theta_p: DVector<f64>,
    pub failures: usize,
}

struct EoDraws {
    noise: DMatrix<f64>,
    approx: DMatrix<f64>,
    ic_residual: DVector<f64>,
    theta_p: DVector<f64>,
    failures: usize,
}

fn sample_offsets(
    pop: &SyntheticPopulation,
    spec: &dyn Functional,
    n: usize,
    r: usize,
    stream: SeededStream,
) -> Result<EoDraws> {
    if n == 0 || r == 0 {
        return Err(Error::InvalidInput("need n >= 1 and r >= 1".into()));
    }
    let cfg = SolverConfig::default();
    let pop_cfg = SolverConfig { tol: crate::inference::POPULATION_SOLVE_TOL, ..Default::default() };
    let theta_p = population_parameter(spec, pop, &pop_cfg)?;
    let bread_p = population_bread(spec, pop, &theta_p)?;
    let bread_lu = bread_p.lu();
    let q = theta_p.len();

    // per replicate: (noise EO, approx EO, ‖total EO - mean IC‖)
    type Draw = (DVector<f64>, DVector<f64>, f64);
    let draws: Vec<Option<Draw>> = exec::map_indexed(r, |rep| {
        let run = || -> Result<(DVector<f64>, DVector<f64>, f64)> {
            let (data, raws) = pop.sample_with_raw(n, stream.child(rep as u64))?;
            let est = ee_solve(spec, &data, &cfg)?;
            let theta_x = conditional_parameter(spec, &raws, pop, &cfg)?;
            let noise = &est.theta_hat - &theta_x;
            let approx = &theta_x - &theta_p;
            let total = &noise + &approx;
            // Eq-style linearization: total EO ≈ mean of IC(Y_i, X_i) at θ(P)
            let rows = crate::functionals::design_rows(&data);
            let mut mean_psi = DVector::zeros(q);
            for (i, x) in rows.iter().enumerate() {
                mean_psi += spec.score(&theta_p, data.response()[i], x);
            }
            mean_psi /= n as f64;
            let mean_ic = -bread_lu.solve(&mean_psi).ok_or(Error::SingularBread)?;
            Ok((noise, approx, (total - mean_ic).norm()))
        };
        run().ok()
    });
    let total_runs = draws.len();
    let ok: Vec<Draw> = draws.into_iter().flatten().collect();
    let failures = total_runs - ok.len();
    if (failures as f64) > MAX_FIT_FAILURE_FRACTION * total_runs as f64 {
        return Err(Error::ExcessiveResampleFailures { failed: failures, total: total_runs });
    }
    let b = ok.len();
    let mut noise = DMatrix::zeros(b, q);
    let mut approx = DMatrix::zeros(b, q);
    let mut ic_residual = DVector::zeros(b);
    for (i, (nv, av, res)) in ok.into_iter().enumerate() {
        for j in 0..q {
            noise[(i, j)] = nv[j];
            approx[(i, j)] = av[j];
        }
        ic_residual[i] = res;
    }
    Ok(EoDraws { noise, approx, ic_residual, theta_p, failures })
}

fn scaled_covariance(draws: &DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    let (r, q) = draws.shape();
    let mean = DVector::from_fn(q, |j, _| draws.column(j).sum() / r as f64);
    let mut cov = DMatrix::zeros(q, q);
    for i in 0..r {
        let d = draws.row(i).transpose() - &mean;
        cov += &d * d.transpose();
    }
    linalg::symmetrize(&(cov * (scale / r as f64)))
}

fn rel_or_abs_err(emp: &DMatrix<f64>, theo: &DMatrix<f64>) -> f64 {
    let denom = linalg::frobenius(theo);
    let num = linalg::frobenius(&(emp - theo));
    if denom > 1e-14 {
        num / denom
    } else {
        num
    }
}

/// Run `r` replications of size `n`, compute the three EOs per replicate, and
/// compare the empirical variances of `√N·EO` against the quadrature-oracle
/// sandwich components.
pub fn clt_check(
    pop: &SyntheticPopulation,
    spec: &dyn Functional,
    n: usize,
    r: usize,
    stream: SeededStream,
) -> Result<CltReport> {
    let draws = sample_offsets(pop, spec, n, r, stream)?;
    let q = draws.theta_p.len();
    let total = &draws.noise + &draws.approx;
    let scale = n as f64;
    let emp_var_total = scaled_covariance(&total, scale);
    let emp_var_noise = scaled_covariance(&draws.noise, scale);
    let emp_var_approx = scaled_covariance(&draws.approx, scale);

    let theo = variance_decomposition(spec, pop, &draws.theta_p)?;
    let theo_total = theo.av_total.clone();
    let theo_noise = theo.av_noise.clone().expect("decomposition fills the split");
    let theo_approx = theo.av_approx.clone().expect("decomposition fills the split");

    let rel_err = [
        rel_or_abs_err(&emp_var_total, &theo_total),
        rel_or_abs_err(&emp_var_noise, &theo_noise),
        rel_or_abs_err(&emp_var_approx, &theo_approx),
    ];

    // componentwise correlation between noise and approximation EOs
    let b = draws.noise.nrows();
    let mean_of = |m: &DMatrix<f64>, j: usize| m.column(j).sum() / b as f64;
    let mut cross_corr = DMatrix::zeros(q, q);
    for a in 0..q {
        for c in 0..q {
            let ma = mean_of(&draws.noise, a);
            let mc = mean_of(&draws.approx, c);
            let (mut cov, mut va, mut vc) = (0.0, 0.0, 0.0);
            for i in 0..b {
                let da = draws.noise[(i, a)] - ma;
                let dc = draws.approx[(i, c)] - mc;
                cov += da * dc;
                va += da * da;
                vc += dc * dc;
            }
            cross_corr[(a, c)] = if va > 0.0 && vc > 0.0 { cov / (va * vc).sqrt() } else { 0.0 };
        }
    }

    Ok(CltReport {
        n,
        r,
        emp_var_total,
        emp_var_noise,
        emp_var_approx,
        theo_total,
        theo_noise,
        theo_approx,
        rel_err,
        cross_corr,
        theta_p: draws.theta_p,
        failures: draws.failures,
    })
}

/// Raw estimation-offset draws for downstream analysis.
#[derive(Debug, Clone)]
pub struct EoSample {
    /// R×q total EOs (`noise + approx`, exact per draw).
    pub total: DMatrix<f64>,
    pub noise: DMatrix<f64>,
    pub approx: DMatrix<f64>,
    /// Per-replicate `‖total EO - mean(IC)‖₂`, the influence-linearization
    /// residual.
    pub ic_residual: DVector<f64>,
    pub theta_p: DVector<f64>,
    pub failures: usize,
}

pub fn eo_sampler(
    pop: &SyntheticPopulation,
    spec: &dyn Functional,
    n: usize,
    r: usize,
    stream: SeededStream,
) -> Result<EoSample> {
    let draws = sample_offsets(pop, spec, n, r, stream)?;
    let total = &draws.noise + &draws.approx;
    Ok(EoSample {
        total,
        noise: draws.noise,
        approx: draws.approx,
        ic_residual: draws.ic_residual,
        theta_p: draws.theta_p,
        failures: draws.failures,
    })
}
