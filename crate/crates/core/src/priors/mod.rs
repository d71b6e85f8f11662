//! Explicit prior generative models: ordinary least squares and
//! least-squares gradient-boosted regression trees.

mod gbt;
mod linear;

pub use gbt::{fit_gbt, predict_gbt, GbtConfig, RegressionTree, TreeEnsemble, TreeNode};
pub use linear::{
    fit_ols, fit_ols_or_ridge, fit_ridge, predict_linear, LinearFit, RIDGE_FALLBACK,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::neural::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    Linear,
    Gbt,
}

impl PriorKind {
    pub fn name(self) -> &'static str {
        match self {
            PriorKind::Linear => "linear",
            PriorKind::Gbt => "gbt",
        }
    }
}

impl std::str::FromStr for PriorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "linear" | "ols" => Ok(PriorKind::Linear),
            "gbt" | "trees" => Ok(PriorKind::Gbt),
            other => Err(format!("unknown prior `{other}` (expected linear or gbt)")),
        }
    }
}

/// A fitted prior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PriorModel<T> {
    Linear(LinearFit<T>),
    #[serde(rename = "gbt")]
    BoostedTrees(TreeEnsemble<T>),
}

impl<T: Scalar> PriorModel<T> {
    pub fn fit(kind: PriorKind, x: &Matrix<T>, y: &[T], gbt: &GbtConfig) -> Result<Self> {
        Ok(match kind {
            PriorKind::Linear => PriorModel::Linear(fit_ols_or_ridge(x, y)?),
            PriorKind::Gbt => PriorModel::BoostedTrees(fit_gbt(x, y, gbt)?),
        })
    }

    pub fn kind(&self) -> PriorKind {
        match self {
            PriorModel::Linear(_) => PriorKind::Linear,
            PriorModel::BoostedTrees(_) => PriorKind::Gbt,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            PriorModel::Linear(f) => f.feature_dim(),
            PriorModel::BoostedTrees(e) => e.feature_dim,
        }
    }
}

/// Noise-free point predictions of the prior.
pub fn prior_point_predictions<T: Scalar>(model: &PriorModel<T>, x: &Matrix<T>) -> Result<Vec<T>> {
    match model {
        PriorModel::Linear(fit) => predict_linear(fit, x),
        PriorModel::BoostedTrees(ens) => predict_gbt(ens, x),
    }
}
