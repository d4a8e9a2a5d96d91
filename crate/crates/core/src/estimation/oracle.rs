//! Slow reference minimiser for small instances.
//!
//! Shares nothing with the Newton solver: the likelihood gradient is
//! recomputed from a dense `r x t` response grid and the minimiser is plain
//! fixed-step gradient descent on the zero-sum subspace.

use crate::design::{BipartiteDesign, OutcomeSet};
use crate::error::{RaschError, Result};
use crate::model::{Identification, ParamVector};

pub const ORACLE_MAX_NODES: usize = 12;
pub const ORACLE_MAX_ITERATIONS: usize = 10_000_000;
const GRADIENT_TOLERANCE: f64 = 1e-12;
const ESCAPE_RADIUS: f64 = 50.0;

/// Zero-sum minimiser of the negative log-likelihood by plain gradient
/// descent. Intended as a test oracle only.
pub fn brute_force_oracle(design: &BipartiteDesign, outcomes: &OutcomeSet) -> Result<ParamVector> {
    let (r, t) = (design.r(), design.t());
    let n = r + t;
    if n > ORACLE_MAX_NODES {
        return Err(RaschError::OracleTooLarge {
            size: n,
            limit: ORACLE_MAX_NODES,
        });
    }
    design.check_outcomes(outcomes)?;
    let mut grid: Vec<Vec<Option<f64>>> = vec![vec![None; t]; r];
    for (e, &a) in design.edges().iter().zip(outcomes.values()) {
        grid[e.i()][e.j()] = Some(a as f64);
    }
    let max_degree = (0..r)
        .map(|i| grid[i].iter().flatten().count())
        .chain((0..t).map(|j| (0..r).filter(|&i| grid[i][j].is_some()).count()))
        .max()
        .unwrap_or(0);
    if max_degree == 0 {
        return Err(RaschError::EmptyDesign);
    }
    // Gradient Lipschitz constant is at most max_degree / 2.
    let step = 1.0 / max_degree as f64;

    let mut theta = vec![0.0f64; n];
    let mut grad = vec![0.0; n];
    let mut norm = f64::INFINITY;
    for _ in 0..ORACLE_MAX_ITERATIONS {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..r {
            for j in 0..t {
                if let Some(a) = grid[i][j] {
                    let p = 1.0 / (1.0 + (theta[r + j] - theta[i]).exp());
                    grad[i] += p - a;
                    grad[r + j] -= p - a;
                }
            }
        }
        norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if norm <= GRADIENT_TOLERANCE {
            return Ok(ParamVector::from_theta(theta, r, Identification::ZeroSum));
        }
        for (x, g) in theta.iter_mut().zip(&grad) {
            *x -= step * g;
        }
        if theta.iter().any(|x| x.abs() > ESCAPE_RADIUS) {
            break;
        }
    }
    Err(RaschError::OracleNotConverged {
        iterations: ORACLE_MAX_ITERATIONS,
        gradient: norm,
    })
}
