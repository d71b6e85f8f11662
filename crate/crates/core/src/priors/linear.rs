use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::{dot, Matrix};
use crate::scalar::Scalar;

/// Ridge penalty used when the normal equations are singular.
pub const RIDGE_FALLBACK: f64 = 1e-8;

/// Ordinary least-squares coefficients, intercept first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit<T> {
    pub beta: Vec<T>,
}

impl<T: Scalar> LinearFit<T> {
    pub fn feature_dim(&self) -> usize {
        self.beta.len() - 1
    }

    pub fn intercept(&self) -> T {
        self.beta[0]
    }

    /// `intercept + <x, beta[1..]>` for one row.
    #[inline]
    pub fn predict_row(&self, x: &[T]) -> T {
        self.beta[0] + dot(&self.beta[1..], x)
    }
}

/// Normal-equation matrix `[1 X]ᵀ[1 X]` and right-hand side `[1 X]ᵀ y`.
fn normal_equations<T: Scalar>(x: &Matrix<T>, y: &[T]) -> (Matrix<T>, Vec<T>) {
    let d = x.cols() + 1;
    let mut gram = Matrix::zeros(d, d);
    let mut rhs = vec![T::zero(); d];
    let mut aug = vec![T::one(); d];
    for (r, &yr) in y.iter().enumerate() {
        aug[1..].copy_from_slice(x.row(r));
        for i in 0..d {
            rhs[i] = rhs[i] + aug[i] * yr;
            for j in 0..=i {
                let v = gram.get(i, j) + aug[i] * aug[j];
                gram.set(i, j, v);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram.set(j, i, gram.get(i, j));
        }
    }
    (gram, rhs)
}

/// In-place Cholesky factorization `A = L Lᵀ`; returns the failing pivot when
/// `A` is not numerically positive definite.
fn cholesky<T: Scalar>(a: &Matrix<T>) -> std::result::Result<Matrix<T>, usize> {
    let n = a.rows();
    let scale = (0..n)
        .map(|i| a.get(i, i).abs())
        .fold(T::zero(), T::max)
        .max(T::min_positive_value());
    let tol = scale * T::epsilon() * T::lit(n as f64 * 16.0);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a.get(j, j);
        for k in 0..j {
            diag = diag - l.get(j, k) * l.get(j, k);
        }
        if !(diag > tol) {
            return Err(j);
        }
        let ljj = diag.sqrt();
        l.set(j, j, ljj);
        for i in j + 1..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s = s - l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / ljj);
        }
    }
    Ok(l)
}

fn cholesky_solve<T: Scalar>(l: &Matrix<T>, b: &[T]) -> Vec<T> {
    let n = b.len();
    let mut z = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            z[i] = z[i] - l.get(i, k) * z[k];
        }
        z[i] = z[i] / l.get(i, i);
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            z[i] = z[i] - l.get(k, i) * z[k];
        }
        z[i] = z[i] / l.get(i, i);
    }
    z
}

fn check_xy<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} targets",
            x.rows(),
            y.len()
        )));
    }
    Ok(())
}

/// Least-squares fit with intercept, solved through the normal equations.
pub fn fit_ols<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<LinearFit<T>> {
    check_xy(x, y)?;
    let d = x.cols() + 1;
    if x.rows() <= d {
        return Err(Error::InvalidArgument(format!(
            "least squares with {d} coefficients needs more than {d} rows, got {}",
            x.rows()
        )));
    }
    let (gram, rhs) = normal_equations(x, y);
    let l = cholesky(&gram).map_err(|pivot| Error::RankDeficient { pivot, dim: d })?;
    Ok(LinearFit {
        beta: cholesky_solve(&l, &rhs),
    })
}

/// Ridge-regularized fit; the intercept is penalized like every coefficient.
pub fn fit_ridge<T: Scalar>(x: &Matrix<T>, y: &[T], lambda: f64) -> Result<LinearFit<T>> {
    check_xy(x, y)?;
    let d = x.cols() + 1;
    let (mut gram, rhs) = normal_equations(x, y);
    for i in 0..d {
        gram.set(i, i, gram.get(i, i) + T::lit(lambda));
    }
    let l = cholesky(&gram).map_err(|pivot| Error::RankDeficient { pivot, dim: d })?;
    Ok(LinearFit {
        beta: cholesky_solve(&l, &rhs),
    })
}

/// [`fit_ols`], retried as ridge with `λ = 1e-8` when the design is singular.
pub fn fit_ols_or_ridge<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<LinearFit<T>> {
    match fit_ols(x, y) {
        Err(Error::RankDeficient { pivot, dim }) => {
            log::warn!(
                "rank-deficient design (pivot {pivot} of {dim}); falling back to ridge, lambda = {RIDGE_FALLBACK}"
            );
            fit_ridge(x, y, RIDGE_FALLBACK)
        }
        other => other,
    }
}

pub fn predict_linear<T: Scalar>(fit: &LinearFit<T>, x: &Matrix<T>) -> Result<Vec<T>> {
    if x.cols() != fit.feature_dim() {
        return Err(Error::Shape(format!(
            "linear model expects {} features, got {}",
            fit.feature_dim(),
            x.cols()
        )));
    }
    Ok((0..x.rows()).map(|r| fit.predict_row(x.row(r))).collect())
}
