//! Controlled likelihood misspecification of a fitted prior.
//!
//! Two injectors are provided: Gaussian bias/variance noise on point
//! predictions (any prior), and a Bayesian linear model whose coefficients are
//! drawn around the fitted ones, with unit-variance response noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{dot, Matrix};
use crate::priors::{prior_point_predictions, LinearFit, PriorModel};
use crate::scalar::Scalar;

/// One misspecification level: bias `mu` and variance `sigma2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec<T> {
    pub mu: T,
    pub sigma2: T,
}

impl<T: Scalar> NoiseSpec<T> {
    pub fn new(mu: T, sigma2: T) -> Result<Self> {
        if !(sigma2 >= T::zero()) || !mu.is_finite() || !sigma2.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise spec needs finite mu and sigma2 >= 0, got ({mu}, {sigma2})"
            )));
        }
        Ok(NoiseSpec { mu, sigma2 })
    }

    pub fn exact() -> Self {
        NoiseSpec {
            mu: T::zero(),
            sigma2: T::zero(),
        }
    }

    #[inline]
    pub fn std_dev(&self) -> T {
        self.sigma2.max(T::zero()).sqrt()
    }
}

/// Variance and bias levels; enumerated variance-major, both descending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MisspecGrid {
    pub variances: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Default for MisspecGrid {
    fn default() -> Self {
        MisspecGrid {
            variances: vec![1.0, 0.1, 0.01],
            biases: vec![1.0, 0.1, 0.01, 0.0],
        }
    }
}

/// Cartesian product of the grid in table order: variance descending, then
/// bias descending.
pub fn enumerate_grid<T: Scalar>(grid: &MisspecGrid) -> Result<Vec<NoiseSpec<T>>> {
    if grid.variances.is_empty() || grid.biases.is_empty() {
        return Err(Error::InvalidArgument(
            "misspecification grid needs at least one variance and one bias".into(),
        ));
    }
    let desc = |v: &[f64]| {
        let mut v = v.to_vec();
        v.sort_by(|a, b| b.total_cmp(a));
        v.dedup();
        v
    };
    let mut out = Vec::new();
    for &var in &desc(&grid.variances) {
        for &bias in &desc(&grid.biases) {
            out.push(NoiseSpec::new(T::lit(bias), T::lit(var))?);
        }
    }
    Ok(out)
}

/// `yhat_i + mu + sqrt(sigma2) · z_i` with fresh standard normal `z_i`.
pub fn perturb_predictions<T: Scalar, R: Rng + ?Sized>(
    yhat: &[T],
    spec: &NoiseSpec<T>,
    rng: &mut R,
) -> Vec<T> {
    let sd = spec.std_dev();
    if sd == T::zero() {
        return yhat.iter().map(|&y| y + spec.mu).collect();
    }
    yhat.iter()
        .map(|&y| y + spec.mu + sd * T::standard_normal(rng))
        .collect()
}

/// Draws `beta' ~ N(beta + mu, sigma2)` coordinate-wise, intercept included.
pub fn draw_coefficients<T: Scalar, R: Rng + ?Sized>(
    fit: &LinearFit<T>,
    spec: &NoiseSpec<T>,
    rng: &mut R,
) -> LinearFit<T> {
    let sd = spec.std_dev();
    LinearFit {
        beta: fit
            .beta
            .iter()
            .map(|&b| {
                if sd == T::zero() {
                    b + spec.mu
                } else {
                    b + spec.mu + sd * T::standard_normal(rng)
                }
            })
            .collect(),
    }
}

/// Bayesian linear sampler: one coefficient draw per call, then
/// `y_i = <x_i, beta'> + z_i` with unit-variance `z_i`.
pub fn perturb_coefficients<T: Scalar, R: Rng + ?Sized>(
    fit: &LinearFit<T>,
    x: &Matrix<T>,
    spec: &NoiseSpec<T>,
    rng: &mut R,
) -> Result<Vec<T>> {
    perturb_coefficients_with_noise(fit, x, spec, T::one(), rng)
}

/// [`perturb_coefficients`] with an explicit response standard deviation.
pub fn perturb_coefficients_with_noise<T: Scalar, R: Rng + ?Sized>(
    fit: &LinearFit<T>,
    x: &Matrix<T>,
    spec: &NoiseSpec<T>,
    response_sd: T,
    rng: &mut R,
) -> Result<Vec<T>> {
    if x.cols() != fit.feature_dim() {
        return Err(Error::Shape(format!(
            "linear model expects {} features, got {}",
            fit.feature_dim(),
            x.cols()
        )));
    }
    let beta = draw_coefficients(fit, spec, rng);
    Ok((0..x.rows())
        .map(|r| {
            let mean = beta.beta[0] + dot(&beta.beta[1..], x.row(r));
            if response_sd == T::zero() {
                mean
            } else {
                mean + response_sd * T::standard_normal(rng)
            }
        })
        .collect())
}

/// The misspecified sampler built from a fitted prior: linear priors use the
/// coefficient model, every other prior perturbs its point predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSampler<T> {
    pub model: PriorModel<T>,
    pub spec: NoiseSpec<T>,
    /// Standard deviation of the linear model's response noise.
    pub response_sd: T,
}

impl<T: Scalar> PriorSampler<T> {
    pub fn new(model: PriorModel<T>, spec: NoiseSpec<T>) -> Self {
        PriorSampler {
            model,
            spec,
            response_sd: T::one(),
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.model.feature_dim()
    }

    /// One fresh simulated response per row of `x`.
    pub fn sample<R: Rng + ?Sized>(&self, x: &Matrix<T>, rng: &mut R) -> Result<Vec<T>> {
        match &self.model {
            PriorModel::Linear(fit) => {
                perturb_coefficients_with_noise(fit, x, &self.spec, self.response_sd, rng)
            }
            other => {
                let yhat = prior_point_predictions(other, x)?;
                Ok(perturb_predictions(&yhat, &self.spec, rng))
            }
        }
    }
}
