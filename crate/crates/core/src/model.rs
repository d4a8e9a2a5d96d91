//! Rasch likelihood kernel: parameters, negative log-likelihood, gradient and
//! the sparse Hessian.
//!
//! Parameters are stored as one vector `theta = (alpha_1..alpha_r, beta_1..beta_t)`.
//! The likelihood depends only on differences `alpha_i - beta_j`, so kernels
//! accept any `&[f64]` of length `r + t` regardless of identification. All
//! reductions run sequentially in canonical edge order.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::design::{BipartiteDesign, OutcomeSet};
use crate::error::{RaschError, Result};
use crate::logistic::{log_sigmoid, sigmoid, sigmoid_prime};

/// Largest node count for which the Hessian may be assembled densely.
pub const DENSE_LIMIT: usize = 2000;

/// Normalisation removing the common-shift invariance of the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Identification {
    /// `theta_1 = alpha_1 = 0`.
    #[default]
    AnchorFirst,
    /// `sum(theta) = 0`.
    ZeroSum,
}

/// Abilities and difficulties under a chosen identification.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    theta: Vec<f64>,
    r: usize,
    identification: Identification,
}

impl ParamVector {
    pub fn zeros(r: usize, t: usize, identification: Identification) -> Self {
        Self {
            theta: vec![0.0; r + t],
            r,
            identification,
        }
    }

    /// Builds a parameter vector and shifts it to satisfy `identification`.
    pub fn from_parts(
        abilities: Vec<f64>,
        difficulties: Vec<f64>,
        identification: Identification,
    ) -> Self {
        let r = abilities.len();
        let mut theta = abilities;
        theta.extend(difficulties);
        Self::from_theta(theta, r, identification)
    }

    /// Builds from a concatenated `(alpha, beta)` vector, shifting it to
    /// satisfy `identification`.
    pub fn from_theta(mut theta: Vec<f64>, r: usize, identification: Identification) -> Self {
        assert!(r <= theta.len(), "r exceeds parameter length");
        let shift = identification_shift(&theta, identification);
        theta.iter_mut().for_each(|x| *x -= shift);
        if identification == Identification::AnchorFirst && r > 0 {
            theta[0] = 0.0;
        }
        Self {
            theta,
            r,
            identification,
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.theta
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn t(&self) -> usize {
        self.theta.len() - self.r
    }

    pub fn abilities(&self) -> &[f64] {
        &self.theta[..self.r]
    }

    pub fn difficulties(&self) -> &[f64] {
        &self.theta[self.r..]
    }

    pub fn identification(&self) -> Identification {
        self.identification
    }

    /// Spread `max(theta) - min(theta)`.
    pub fn kappa(&self) -> f64 {
        let (lo, hi) = self
            .theta
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
        if self.theta.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.iter().all(|x| x.is_finite())
    }

    /// Re-expresses the same model under another identification.
    pub fn reidentify(&self, target: Identification) -> ParamVector {
        Self::from_theta(self.theta.clone(), self.r, target)
    }
}

impl AsRef<[f64]> for ParamVector {
    fn as_ref(&self) -> &[f64] {
        &self.theta
    }
}

fn identification_shift(theta: &[f64], identification: Identification) -> f64 {
    match identification {
        Identification::AnchorFirst => theta.first().copied().unwrap_or(0.0),
        Identification::ZeroSum => {
            if theta.is_empty() {
                0.0
            } else {
                theta.iter().sum::<f64>() / theta.len() as f64
            }
        }
    }
}

/// Shifts `theta` by a common constant so that it satisfies `target`.
pub fn reidentify(theta: &ParamVector, target: Identification) -> ParamVector {
    theta.reidentify(target)
}

/// Bounds `1/b_n <= mu'(alpha_i - beta_j) <= 1/c_n` over observed pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureBounds {
    pub b_inv: f64,
    pub c_inv: f64,
}

impl CurvatureBounds {
    /// Default radius `C` of the neighbourhood `||theta - theta*||_inf <= C`.
    pub const DEFAULT_RADIUS: f64 = 5.0;

    /// Worst-case bounds for any `theta` within `radius` of `theta_star`:
    /// every observed difference satisfies `|alpha_i - beta_j| <= kappa + 2C`
    /// and `mu'(x) >= e^{-|x|}/4`.
    pub fn from_truth(theta_star: &ParamVector, radius: f64) -> Self {
        let b_inv = 0.25 * (-(theta_star.kappa() + 2.0 * radius)).exp();
        Self { b_inv, c_inv: 0.25 }
    }

    /// Tightest bounds measured from per-edge curvature weights.
    pub fn from_edge_weights(weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(RaschError::EmptyDesign);
        }
        let (lo, hi) = weights
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| {
                (lo.min(w), hi.max(w))
            });
        Ok(Self {
            b_inv: lo,
            c_inv: hi,
        })
    }

    pub fn b_n(&self) -> f64 {
        1.0 / self.b_inv
    }

    pub fn c_n(&self) -> f64 {
        1.0 / self.c_inv
    }

    /// Entrywise bound `12 b_n^3 / (r^2 p^2 c_n^2)` on `V^{-1} - S`.
    pub fn s_matrix_error_bound(&self, r: usize, p: f64) -> f64 {
        let (b, c) = (self.b_n(), self.c_n());
        12.0 * b.powi(3) / ((r as f64).powi(2) * p * p * c * c)
    }

    /// Whether every observed pair of `theta` lies inside the bounds.
    pub fn contains(&self, design: &BipartiteDesign, theta: &[f64]) -> bool {
        let r = design.r();
        design.edges().iter().all(|e| {
            let w = sigmoid_prime(theta[e.i()] - theta[r + e.j()]);
            w >= self.b_inv && w <= self.c_inv
        })
    }
}

fn check(design: &BipartiteDesign, outcomes: &OutcomeSet, theta: &[f64]) -> Result<()> {
    design.check_params(theta)?;
    design.check_outcomes(outcomes)
}

/// `l(theta) = -sum_edges [a log mu(x) + (1 - a) log(1 - mu(x))]`,
/// `x = alpha_i - beta_j`.
pub fn neg_log_likelihood(
    design: &BipartiteDesign,
    outcomes: &OutcomeSet,
    theta: &[f64],
) -> Result<f64> {
    check(design, outcomes, theta)?;
    Ok(nll_unchecked(design, outcomes, theta))
}

pub(crate) fn nll_unchecked(design: &BipartiteDesign, outcomes: &OutcomeSet, theta: &[f64]) -> f64 {
    let r = design.r();
    design
        .edges()
        .iter()
        .zip(outcomes.values())
        .map(|(e, &a)| {
            let x = theta[e.i()] - theta[r + e.j()];
            if a == 1 {
                -log_sigmoid(x)
            } else {
                -log_sigmoid(-x)
            }
        })
        .sum()
}

/// Gradient of the negative log-likelihood in all `r + t` coordinates.
pub fn gradient(design: &BipartiteDesign, outcomes: &OutcomeSet, theta: &[f64]) -> Result<Vec<f64>> {
    check(design, outcomes, theta)?;
    let mut g = vec![0.0; design.nodes()];
    gradient_into(design, outcomes, theta, &mut g);
    Ok(g)
}

pub(crate) fn gradient_into(
    design: &BipartiteDesign,
    outcomes: &OutcomeSet,
    theta: &[f64],
    g: &mut [f64],
) {
    let r = design.r();
    g.iter_mut().for_each(|x| *x = 0.0);
    for (e, &a) in design.edges().iter().zip(outcomes.values()) {
        let residual = sigmoid(theta[e.i()] - theta[r + e.j()]) - a as f64;
        g[e.i()] += residual;
        g[r + e.j()] -= residual;
    }
}

/// The Hessian `sum_edges mu'(x) (e_i - e_{j+r})(e_i - e_{j+r})^T`, held as
/// one curvature weight per edge plus the diagonal.
#[derive(Debug, Clone)]
pub struct Hessian<'a> {
    design: &'a BipartiteDesign,
    weights: Vec<f64>,
    diag: Vec<f64>,
}

/// Hessian of the negative log-likelihood; it does not depend on outcomes.
pub fn hessian<'a>(design: &'a BipartiteDesign, theta: &[f64]) -> Result<Hessian<'a>> {
    design.check_params(theta)?;
    Ok(Hessian::new(design, theta))
}

impl<'a> Hessian<'a> {
    pub(crate) fn new(design: &'a BipartiteDesign, theta: &[f64]) -> Self {
        let r = design.r();
        let mut diag = vec![0.0; design.nodes()];
        let weights = design
            .edges()
            .iter()
            .map(|e| {
                let w = sigmoid_prime(theta[e.i()] - theta[r + e.j()]);
                diag[e.i()] += w;
                diag[r + e.j()] += w;
                w
            })
            .collect();
        Self {
            design,
            weights,
            diag,
        }
    }

    pub fn design(&self) -> &BipartiteDesign {
        self.design
    }

    /// Per-edge curvature `mu'(alpha_i - beta_j)`, aligned with the edges.
    pub fn edge_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `out = H x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let r = self.design.r();
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.diag[k] * x[k];
        }
        for (e, &w) in self.design.edges().iter().zip(&self.weights) {
            let (a, b) = (e.i(), r + e.j());
            out[a] -= w * x[b];
            out[b] -= w * x[a];
        }
    }

    /// Entry `(a, b)` of the full Hessian.
    pub fn entry(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return self.diag[a];
        }
        let r = self.design.r();
        let (i, j) = match (a < r, b < r) {
            (true, false) => (a, b - r),
            (false, true) => (b, a - r),
            _ => return 0.0,
        };
        let target = crate::design::Edge::new(i, j);
        match self.design.edges().binary_search(&target) {
            Ok(k) => -self.weights[k],
            Err(_) => 0.0,
        }
    }

    /// Dense `(r + t) x (r + t)` Hessian.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        if n > DENSE_LIMIT {
            return Err(RaschError::TooLargeForDense {
                size: n,
                limit: DENSE_LIMIT,
            });
        }
        let r = self.design.r();
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.diag));
        for (e, &w) in self.design.edges().iter().zip(&self.weights) {
            let (a, b) = (e.i(), r + e.j());
            m[(a, b)] -= w;
            m[(b, a)] -= w;
        }
        Ok(m)
    }

    /// Dense Fisher information `V` of `(theta_2, ..., theta_{r+t})`: the
    /// Hessian with the anchored first row and column removed.
    pub fn reduced_dense(&self) -> Result<DMatrix<f64>> {
        let full = self.to_dense()?;
        let n = full.nrows();
        Ok(full.view((1, 1), (n - 1, n - 1)).into_owned())
    }
}
