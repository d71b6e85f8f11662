use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neural::Matrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub min_leaf: usize,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            n_trees: 200,
            max_depth: 3,
            shrinkage: 0.1,
            min_leaf: 2,
        }
    }
}

impl GbtConfig {
    fn validate(&self) -> Result<()> {
        if self.n_trees == 0 || self.min_leaf == 0 {
            return Err(Error::InvalidArgument(
                "n_trees and min_leaf must be positive".into(),
            ));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "shrinkage must lie in (0, 1], got {}",
                self.shrinkage
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode<T> {
    Split {
        feature: usize,
        threshold: T,
        left: usize,
        right: usize,
    },
    Leaf {
        value: T,
    },
}

/// Binary regression tree stored as a flat node array rooted at index 0.
/// Rows with `x[feature] <= threshold` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree<T> {
    pub nodes: Vec<TreeNode<T>>,
    pub max_depth: usize,
}

impl<T: Scalar> RegressionTree<T> {
    pub fn leaf(value: T) -> Self {
        RegressionTree {
            nodes: vec![TreeNode::Leaf { value }],
            max_depth: 0,
        }
    }

    pub fn predict_row(&self, x: &[T]) -> Result<T> {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return Ok(*value),
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let v = x.get(*feature).ok_or_else(|| {
                        Error::Shape(format!(
                            "tree splits on feature {feature} but row has {}",
                            x.len()
                        ))
                    })?;
                    i = if *v <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.nodes.len() == 1
    }

    /// Every node is reached exactly once from the root, and each split's
    /// children exist.
    pub fn is_well_formed(&self) -> bool {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if i >= self.nodes.len() || seen[i] {
                return false;
            }
            seen[i] = true;
            match &self.nodes[i] {
                TreeNode::Split { left, right, .. } => {
                    stack.push(*left);
                    stack.push(*right);
                }
                TreeNode::Leaf { value } => {
                    if !value.is_finite() {
                        return false;
                    }
                }
            }
        }
        !self.nodes.is_empty() && seen.iter().all(|&s| s)
    }

    /// Greedy least-squares tree on `(x[rows], target[rows])`.
    pub fn fit(
        x: &Matrix<T>,
        target: &[T],
        rows: &[usize],
        max_depth: usize,
        min_leaf: usize,
    ) -> Self {
        let mut tree = RegressionTree {
            nodes: Vec::new(),
            max_depth,
        };
        let mut rows = rows.to_vec();
        tree.grow(x, target, &mut rows, 0, min_leaf);
        tree
    }

    fn grow(
        &mut self,
        x: &Matrix<T>,
        target: &[T],
        rows: &mut [usize],
        depth: usize,
        min_leaf: usize,
    ) -> usize {
        let id = self.nodes.len();
        let mean = rows.iter().map(|&r| target[r]).sum::<T>() / T::lit(rows.len() as f64);
        self.nodes.push(TreeNode::Leaf { value: mean });
        if depth >= self.max_depth || rows.len() < 2 * min_leaf {
            return id;
        }
        let Some(split) = best_split(x, target, rows, min_leaf) else {
            return id;
        };
        let mut left: Vec<usize> = Vec::with_capacity(rows.len());
        let mut right: Vec<usize> = Vec::with_capacity(rows.len());
        for &r in rows.iter() {
            if x.get(r, split.feature) <= split.threshold {
                left.push(r);
            } else {
                right.push(r);
            }
        }
        let l = self.grow(x, target, &mut left, depth + 1, min_leaf);
        let r = self.grow(x, target, &mut right, depth + 1, min_leaf);
        self.nodes[id] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        id
    }
}

struct Split<T> {
    feature: usize,
    threshold: T,
}

/// Exhaustive scan over midpoints between consecutive distinct feature
/// values; maximizes the reduction in squared error.
fn best_split<T: Scalar>(
    x: &Matrix<T>,
    target: &[T],
    rows: &[usize],
    min_leaf: usize,
) -> Option<Split<T>> {
    let n = rows.len();
    let total: T = rows.iter().map(|&r| target[r]).sum();
    let nf = T::lit(n as f64);
    let parent = total * total / nf;
    // Gains below this are rounding noise on a constant target.
    let min_gain = T::epsilon() * T::lit(64.0) * rows.iter().map(|&r| target[r] * target[r]).sum::<T>().max(T::one());
    let mut best: Option<(T, Split<T>)> = None;
    let mut order = rows.to_vec();
    for f in 0..x.cols() {
        order.sort_by(|&a, &b| x.get(a, f).partial_cmp(&x.get(b, f)).unwrap());
        let mut left_sum = T::zero();
        for k in 0..n - 1 {
            left_sum = left_sum + target[order[k]];
            let nl = k + 1;
            let (lo, hi) = (x.get(order[k], f), x.get(order[k + 1], f));
            if nl < min_leaf || n - nl < min_leaf || !(lo < hi) {
                continue;
            }
            let right_sum = total - left_sum;
            let score = left_sum * left_sum / T::lit(nl as f64)
                + right_sum * right_sum / T::lit((n - nl) as f64);
            let gain = score - parent;
            if gain > min_gain && best.as_ref().is_none_or(|(g, _)| gain > *g) {
                best = Some((
                    gain,
                    Split {
                        feature: f,
                        threshold: (lo + hi) / T::lit(2.0),
                    },
                ));
            }
        }
    }
    best.map(|(_, s)| s)
}

/// Least-squares gradient-boosted ensemble:
/// `prediction = base + shrinkage · Σ tree(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble<T> {
    pub base: T,
    pub shrinkage: T,
    pub trees: Vec<RegressionTree<T>>,
    pub feature_dim: usize,
}

impl<T: Scalar> TreeEnsemble<T> {
    pub fn predict_row(&self, x: &[T]) -> Result<T> {
        self.predict_row_first(x, self.trees.len())
    }

    /// Prediction using only the first `k` trees.
    pub fn predict_row_first(&self, x: &[T], k: usize) -> Result<T> {
        let mut s = T::zero();
        for t in &self.trees[..k.min(self.trees.len())] {
            s = s + t.predict_row(x)?;
        }
        Ok(self.base + self.shrinkage * s)
    }
}

/// Fits `config.n_trees` trees, each to the residuals of the ensemble built so far.
pub fn fit_gbt<T: Scalar>(x: &Matrix<T>, y: &[T], config: &GbtConfig) -> Result<TreeEnsemble<T>> {
    config.validate()?;
    if x.rows() != y.len() {
        return Err(Error::Shape(format!(
            "{} feature rows but {} targets",
            x.rows(),
            y.len()
        )));
    }
    if y.len() < 2 * config.min_leaf {
        return Err(Error::InvalidArgument(format!(
            "boosting with min_leaf {} needs at least {} rows, got {}",
            config.min_leaf,
            2 * config.min_leaf,
            y.len()
        )));
    }
    let base = y.iter().copied().sum::<T>() / T::lit(y.len() as f64);
    let shrinkage = T::lit(config.shrinkage);
    let rows: Vec<usize> = (0..y.len()).collect();
    let mut pred = vec![base; y.len()];
    let mut residual = vec![T::zero(); y.len()];
    let mut trees = Vec::with_capacity(config.n_trees);
    for _ in 0..config.n_trees {
        for ((r, &t), &p) in residual.iter_mut().zip(y).zip(&pred) {
            *r = t - p;
        }
        let tree = RegressionTree::fit(x, &residual, &rows, config.max_depth, config.min_leaf);
        for (i, p) in pred.iter_mut().enumerate() {
            *p = *p + shrinkage * tree.predict_row(x.row(i))?;
        }
        trees.push(tree);
    }
    Ok(TreeEnsemble {
        base,
        shrinkage,
        trees,
        feature_dim: x.cols(),
    })
}

pub fn predict_gbt<T: Scalar>(ensemble: &TreeEnsemble<T>, x: &Matrix<T>) -> Result<Vec<T>> {
    if x.cols() != ensemble.feature_dim {
        return Err(Error::Shape(format!(
            "ensemble expects {} features, got {}",
            ensemble.feature_dim,
            x.cols()
        )));
    }
    (0..x.rows()).map(|r| ensemble.predict_row(x.row(r))).collect()
}
