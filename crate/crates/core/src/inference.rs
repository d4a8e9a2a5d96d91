//! Standard errors, confidence intervals and Wald tests from the diagonal of
//! the Fisher information.
//!
//! The inverse of the Fisher information `V` (the Hessian with the anchored
//! first node removed) is approximated by `S` with
//! `s_ij = delta_ij / v_ii + 1 / v_11`, so no matrix is ever inverted.
//! Node indices are zero-based over `r + t` nodes; node 0 is the anchor.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::BipartiteDesign;
use crate::error::{RaschError, Result};
use crate::model::{Hessian, Identification, ParamVector};
use crate::stats::{chi_square_sf, normal_quantile};

/// Diagonal Fisher information at an estimate, with the per-edge weights it
/// was summed from.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherSummary {
    r: usize,
    v_diag: Vec<f64>,
    edge_weights: Vec<f64>,
}

pub fn fisher_summary(design: &BipartiteDesign, theta_hat: &ParamVector) -> Result<FisherSummary> {
    let theta = theta_hat.as_slice();
    design.check_params(theta)?;
    if let Some(x) = theta.iter().find(|x| !x.is_finite()) {
        return Err(RaschError::NonFinite(*x));
    }
    let h = Hessian::new(design, theta);
    Ok(FisherSummary {
        r: design.r(),
        v_diag: h.diagonal().to_vec(),
        edge_weights: h.edge_weights().to_vec(),
    })
}

impl FisherSummary {
    /// `v_ii` for every node, including the anchor.
    pub fn v_diag(&self) -> &[f64] {
        &self.v_diag
    }

    pub fn v_11(&self) -> f64 {
        self.v_diag[0]
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.edge_weights
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn nodes(&self) -> usize {
        self.v_diag.len()
    }

    /// Dense `V` rebuilt from the cached edge weights. Only sensible for
    /// small designs.
    pub fn reduced_information(&self, design: &BipartiteDesign) -> Result<DMatrix<f64>> {
        if design.nodes() != self.nodes() || design.edge_count() != self.edge_weights.len() {
            return Err(RaschError::DimensionMismatch {
                expected: self.nodes(),
                found: design.nodes(),
            });
        }
        let n = self.nodes();
        if n > crate::model::DENSE_LIMIT {
            return Err(RaschError::TooLargeForDense {
                size: n,
                limit: crate::model::DENSE_LIMIT,
            });
        }
        let mut v = DMatrix::from_diagonal(&DVector::from_column_slice(&self.v_diag[1..]));
        for (e, &w) in design.edges().iter().zip(&self.edge_weights) {
            let (a, b) = (e.i(), design.item_node(e.j()));
            if a > 0 {
                v[(a - 1, b - 1)] -= w;
                v[(b - 1, a - 1)] -= w;
            }
        }
        Ok(v)
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.nodes() {
            return Err(RaschError::IndexOutOfRange {
                index: i,
                len: self.nodes(),
            });
        }
        Ok(())
    }

    fn positive_v(&self, i: usize) -> Result<f64> {
        let v = self.v_diag[i];
        if !(v > 0.0) {
            return Err(RaschError::NonPositiveInformation { node: i, value: v });
        }
        Ok(v)
    }
}

/// Entry `s_ij = delta_ij / v_ii + 1 / v_11` of the approximate inverse.
pub fn s_matrix_entry(fs: &FisherSummary, i: usize, j: usize) -> Result<f64> {
    for k in [i, j] {
        fs.check_index(k)?;
        if k == 0 {
            return Err(RaschError::AnchoredNode(0));
        }
    }
    let inv_anchor = 1.0 / fs.positive_v(0)?;
    if i == j {
        Ok(1.0 / fs.positive_v(i)? + inv_anchor)
    } else {
        Ok(inv_anchor)
    }
}

/// Which estimate a standard error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Estimand {
    /// `theta_i` under the anchor `theta_1 = 0`.
    Single(usize),
    /// `theta_i - theta_j`.
    Contrast(usize, usize),
}

/// Asymptotic standard error of a single parameter or a contrast.
///
/// For a contrast the shared `1 / v_11` covariance cancels:
/// `Var(theta_i - theta_j) = 1 / v_ii + 1 / v_jj`.
pub fn standard_error(fs: &FisherSummary, kind: Estimand) -> Result<f64> {
    match kind {
        Estimand::Single(i) => {
            fs.check_index(i)?;
            if i == 0 {
                return Err(RaschError::AnchoredNode(0));
            }
            Ok((1.0 / fs.positive_v(i)? + 1.0 / fs.positive_v(0)?).sqrt())
        }
        Estimand::Contrast(i, j) => {
            fs.check_index(i)?;
            fs.check_index(j)?;
            if i == j {
                return Err(RaschError::InvalidArgument(format!(
                    "contrast needs two distinct nodes, got {i} twice"
                )));
            }
            Ok((1.0 / fs.positive_v(i)? + 1.0 / fs.positive_v(j)?).sqrt())
        }
    }
}

/// Standard errors of `theta_k - mean(theta)` for every node, under the
/// same approximate covariance `sigma_ij = delta_ij / v_ii + 1 / v_11`
/// (with the anchor held at zero).
pub fn centered_standard_errors(fs: &FisherSummary) -> Result<Vec<f64>> {
    let n = fs.nodes();
    let inv_anchor = 1.0 / fs.positive_v(0)?;
    let mut inv = vec![0.0; n];
    for (k, slot) in inv.iter_mut().enumerate().skip(1) {
        *slot = 1.0 / fs.positive_v(k)?;
    }
    let nf = n as f64;
    let total: f64 = inv.iter().sum();
    // theta_k - mean = u^T theta with u = e_k - 1/n over the free nodes.
    Ok((0..n)
        .map(|k| {
            let weight_sum = if k == 0 { 0.0 } else { 1.0 } - (nf - 1.0) / nf;
            let mut var = total / (nf * nf) + inv_anchor * weight_sum * weight_sum;
            if k > 0 {
                var += inv[k] * (1.0 - 2.0 / nf);
            }
            var.sqrt()
        })
        .collect())
}

/// Point estimate of `kind` under the anchored identification.
pub fn estimate(theta_hat: &ParamVector, kind: Estimand) -> Result<f64> {
    let anchored = theta_hat.reidentify(Identification::AnchorFirst);
    let theta = anchored.as_slice();
    let get = |i: usize| {
        theta.get(i).copied().ok_or(RaschError::IndexOutOfRange {
            index: i,
            len: theta.len(),
        })
    };
    match kind {
        Estimand::Single(i) => get(i),
        Estimand::Contrast(i, j) => Ok(get(i)? - get(j)?),
    }
}

/// Two-sided normal interval `estimate +/- z_{(1+level)/2} * se`.
pub fn confidence_interval(
    fs: &FisherSummary,
    theta_hat: &ParamVector,
    kind: Estimand,
    level: f64,
) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(RaschError::InvalidProbability(level));
    }
    let se = standard_error(fs, kind)?;
    let center = estimate(theta_hat, kind)?;
    let half = normal_quantile((1.0 + level) / 2.0)? * se;
    Ok((center - half, center + half))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldReport {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub parameter_indices: Vec<usize>,
}

/// Wald test that the selected parameters are all equal.
///
/// Uses the successive-difference contrasts `C theta`, with covariance
/// `C Sigma C^T` built from `sigma_ij = delta_ij / v_ii + 1 / v_11`.
pub fn wald_test(fs: &FisherSummary, theta_hat: &ParamVector, indices: &[usize]) -> Result<WaldReport> {
    let k = indices.len();
    if k < 2 {
        return Err(RaschError::InvalidArgument(
            "wald test needs at least two parameters".into(),
        ));
    }
    for (n, &i) in indices.iter().enumerate() {
        fs.check_index(i)?;
        if i == 0 {
            return Err(RaschError::AnchoredNode(0));
        }
        if indices[..n].contains(&i) {
            return Err(RaschError::InvalidArgument(format!("node {i} listed twice")));
        }
    }
    let side = indices[0] < fs.r;
    if indices.iter().any(|&i| (i < fs.r) != side) {
        return Err(RaschError::InvalidArgument(
            "wald test parameters must all be individuals or all be items".into(),
        ));
    }
    let anchored = theta_hat.reidentify(Identification::AnchorFirst);
    let theta = anchored.as_slice();
    if theta.len() != fs.nodes() {
        return Err(RaschError::DimensionMismatch {
            expected: fs.nodes(),
            found: theta.len(),
        });
    }

    let inv_anchor = 1.0 / fs.positive_v(0)?;
    let mut sigma = DMatrix::from_element(k, k, inv_anchor);
    for (a, &i) in indices.iter().enumerate() {
        sigma[(a, a)] += 1.0 / fs.positive_v(i)?;
    }
    let mut c = DMatrix::zeros(k - 1, k);
    for a in 0..k - 1 {
        c[(a, a)] = 1.0;
        c[(a, a + 1)] = -1.0;
    }
    let values = DVector::from_iterator(k, indices.iter().map(|&i| theta[i]));
    let diff = &c * values;
    let cov = &c * sigma * c.transpose();
    let chol = cov.cholesky().ok_or(RaschError::SingularCovariance)?;
    let solved = chol.solve(&diff);
    let statistic = diff.dot(&solved).max(0.0);
    let dof = k - 1;
    Ok(WaldReport {
        statistic,
        dof,
        p_value: chi_square_sf(statistic, dof)?,
        parameter_indices: indices.to_vec(),
    })
}
