//! Maximum likelihood and ridge-regularised estimation.
//!
//! [`fit_mle`] runs damped Newton with a backtracking line search. Designs
//! that cannot have a finite maximiser are caught before optimisation where a
//! cheap check exists (disconnected graph, a node whose responses are all
//! correct or all incorrect); any other separation shows up as iterates
//! leaving the `divergence_bound` box.

mod linsolve;
mod oracle;
mod regularized;

pub use oracle::{brute_force_oracle, ORACLE_MAX_ITERATIONS, ORACLE_MAX_NODES};
pub use regularized::{default_lambda, fit_regularized};

use serde::{Deserialize, Serialize};

use crate::design::{count_components, separated_nodes, BipartiteDesign, OutcomeSet};
use crate::error::{RaschError, Result};
use crate::model::{gradient_into, nll_unchecked, Hessian, Identification, ParamVector, DENSE_LIMIT};

/// Whether a finite maximiser was found, and if not, why.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Existence {
    Exists,
    DivergedSeparation,
    DisconnectedDesign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop once `||grad||_inf` falls below this; `None` means
    /// `1e-10 * max(1, d_max)`.
    pub tolerance: Option<f64>,
    /// `None` means 500 Newton steps, or enough gradient steps for the
    /// guaranteed contraction to reach `e^-40` in [`fit_regularized`].
    pub max_iterations: Option<usize>,
    /// Sup-norm of the centred iterate beyond which the MLE is declared not
    /// to exist.
    pub divergence_bound: f64,
    pub identification: Identification,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: None,
            max_iterations: None,
            divergence_bound: 30.0,
            identification: Identification::AnchorFirst,
        }
    }
}

impl SolverConfig {
    pub fn with_identification(identification: Identification) -> Self {
        Self {
            identification,
            ..Self::default()
        }
    }

    pub fn tolerance_for(&self, design: &BipartiteDesign) -> f64 {
        self.tolerance
            .unwrap_or_else(|| 1e-10 * f64::max(1.0, design.max_degree() as f64))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(tol) = self.tolerance {
            if !(tol > 0.0) {
                return Err(RaschError::InvalidArgument(format!(
                    "tolerance must be positive, got {tol}"
                )));
            }
        }
        if !(self.divergence_bound > 0.0) {
            return Err(RaschError::InvalidArgument(format!(
                "divergence bound must be positive, got {}",
                self.divergence_bound
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: ParamVector,
    pub converged: bool,
    pub iterations: usize,
    /// Final `||grad l||_inf`, or `||grad l + lambda w||_inf` for ridge fits.
    pub grad_inf_norm: f64,
    pub existence: Existence,
    /// Final objective (penalised for ridge fits).
    pub nll: f64,
    /// Objective at the start point and after every accepted step.
    pub trace: Vec<f64>,
}

pub(crate) fn validate_inputs(design: &BipartiteDesign, outcomes: &OutcomeSet) -> Result<()> {
    if design.edge_count() == 0 {
        return Err(RaschError::EmptyDesign);
    }
    design.check_outcomes(outcomes)
}

const CONVERGED_STEP: f64 = 1e-3;

/// Maximum likelihood fit started from zero.
pub fn fit_mle(design: &BipartiteDesign, outcomes: &OutcomeSet, config: &SolverConfig) -> Result<FitResult> {
    fit_mle_from(design, outcomes, config, &vec![0.0; design.nodes()])
}

/// Maximum likelihood fit from a caller-supplied starting point.
pub fn fit_mle_from(
    design: &BipartiteDesign,
    outcomes: &OutcomeSet,
    config: &SolverConfig,
    start: &[f64],
) -> Result<FitResult> {
    validate_inputs(design, outcomes)?;
    design.check_params(start)?;
    config.validate()?;
    if let Some(x) = start.iter().find(|x| !x.is_finite()) {
        return Err(RaschError::NonFinite(*x));
    }

    let n = design.nodes();
    let r = design.r();
    let tol = config.tolerance_for(design);
    let max_iter = config.max_iterations.unwrap_or(500);

    let mut theta = start.to_vec();
    center(&mut theta);
    let mut g = vec![0.0; n];
    gradient_into(design, outcomes, &theta, &mut g);
    let mut f = nll_unchecked(design, outcomes, &theta);

    let early = |existence| FitResult {
        theta_hat: ParamVector::from_theta(theta.clone(), r, config.identification),
        converged: false,
        iterations: 0,
        grad_inf_norm: inf_norm(&g),
        existence,
        nll: f,
        trace: vec![f],
    };
    if count_components(design) > 1 {
        return Ok(early(Existence::DisconnectedDesign));
    }
    if !separated_nodes(design, outcomes).is_empty() {
        return Ok(early(Existence::DivergedSeparation));
    }

    let mut trace = vec![f];
    let mut step = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut g_trial = vec![0.0; n];
    let mut iterations = 0;
    let mut existence = None;
    let mut converged = false;

    loop {
        let g_norm = inf_norm(&g);
        let h = Hessian::new(design, &theta);
        if !newton_direction(&h, &g, &mut step) {
            existence = Some(Existence::DivergedSeparation);
            break;
        }
        center(&mut step);
        // A small gradient alone is not enough: along a separating ray the
        // gradient decays like the curvature, so the Newton step stays O(1).
        if g_norm <= tol && inf_norm(&step) <= CONVERGED_STEP {
            converged = true;
            existence = Some(Existence::Exists);
            break;
        }
        if iterations >= max_iter {
            break;
        }
        iterations += 1;
        // Newton direction is -step.
        let slope = -linsolve::dot(&g, &step);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for k in 0..n {
                trial[k] = theta[k] - alpha * step[k];
            }
            let f_trial = nll_unchecked(design, outcomes, &trial);
            let armijo = f_trial <= f + 1e-4 * alpha * slope;
            let flat = f_trial - f <= 1e-12 * f.abs().max(1.0) && {
                gradient_into(design, outcomes, &trial, &mut g_trial);
                inf_norm(&g_trial) < g_norm
            };
            if f_trial.is_finite() && (armijo || flat) {
                f = f_trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        std::mem::swap(&mut theta, &mut trial);
        center(&mut theta);
        trace.push(f);
        gradient_into(design, outcomes, &theta, &mut g);
        if inf_norm(&theta) > config.divergence_bound {
            existence = Some(Existence::DivergedSeparation);
            break;
        }
    }

    Ok(FitResult {
        theta_hat: ParamVector::from_theta(theta, r, config.identification),
        converged,
        iterations,
        grad_inf_norm: inf_norm(&g),
        // A run that neither converges nor escapes the box has not produced
        // a finite stationary point.
        existence: existence.unwrap_or(Existence::DivergedSeparation),
        nll: f,
        trace,
    })
}

/// Solves `H step = g`, falling back to dense Cholesky when CG stalls.
fn newton_direction(h: &Hessian<'_>, g: &[f64], step: &mut [f64]) -> bool {
    let n = g.len();
    let outcome = linsolve::solve_cg(h, g, step, 1e-12, (4 * n).max(200));
    if outcome.converged {
        return true;
    }
    if n <= DENSE_LIMIT {
        if let Some(x) = linsolve::solve_dense(h, g) {
            step.copy_from_slice(&x);
            return step.iter().all(|v| v.is_finite());
        }
        return false;
    }
    step.iter().all(|v| v.is_finite())
}

pub(crate) fn center(theta: &mut [f64]) {
    let mean = theta.iter().sum::<f64>() / theta.len() as f64;
    theta.iter_mut().for_each(|x| *x -= mean);
}

pub(crate) fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Largest violation of the likelihood equations
/// `sum_j a_ij = sum_j mu(theta_i - theta_{j+r})` (and the item analogue).
pub fn score_residual(design: &BipartiteDesign, outcomes: &OutcomeSet, theta: &[f64]) -> Result<f64> {
    let g = crate::model::gradient(design, outcomes, theta)?;
    Ok(inf_norm(&g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{sample_design, sample_outcomes, Edge};
    use crate::model::reidentify;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn symmetric_2x2() -> (BipartiteDesign, OutcomeSet) {
        BipartiteDesign::from_responses(
            2,
            2,
            vec![
                (Edge::new(0, 0), 1),
                (Edge::new(0, 1), 0),
                (Edge::new(1, 0), 0),
                (Edge::new(1, 1), 1),
            ],
        )
        .unwrap()
    }

    fn grid(rows: &[&[u8]]) -> (BipartiteDesign, OutcomeSet) {
        let r = rows.len();
        let t = rows[0].len();
        let mut v = vec![];
        for (i, row) in rows.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                v.push((Edge::new(i, j), a));
            }
        }
        BipartiteDesign::from_responses(r, t, v).unwrap()
    }

    fn assert_scores(d: &BipartiteDesign, o: &OutcomeSet, fit: &FitResult, tol: f64) {
        let res = score_residual(d, o, fit.theta_hat.as_slice()).unwrap();
        assert!(res <= tol, "score residual {res} > {tol}");
        assert!(fit.grad_inf_norm <= tol);
    }

    pub(crate) fn well_posed(r: usize, t: usize, p: f64, seed: u64) -> (BipartiteDesign, OutcomeSet) {
        let mut s = seed;
        loop {
            let d = sample_design(r, t, p, s).unwrap();
            let mut rng = rng_from_seed(s);
            let theta: Vec<f64> = (0..r + t).map(|_| rng.random_range(-0.5..0.5)).collect();
            let pv = ParamVector::from_theta(theta, r, Identification::ZeroSum);
            let o = sample_outcomes(&d, &pv, s.wrapping_add(77)).unwrap();
            let fit = fit_mle(&d, &o, &SolverConfig::default()).unwrap();
            if fit.existence == Existence::Exists {
                return (d, o);
            }
            s = s.wrapping_add(1000);
        }
    }

    #[test]
    fn symmetric_instance_fits_to_zero() {
        let (d, o) = symmetric_2x2();
        let fit = fit_mle(&d, &o, &SolverConfig::default()).unwrap();
        assert_eq!(fit.existence, Existence::Exists);
        assert!(fit.converged);
        assert!(fit.theta_hat.as_slice().iter().all(|x| x.abs() < 1e-12));
        assert_eq!(fit.theta_hat.as_slice()[0], 0.0);
        assert_scores(&d, &o, &fit, 1e-10);
    }

    #[test]
    fn all_correct_item_is_separated() {
        let (d, o) = grid(&[&[1, 0, 1], &[1, 1, 0], &[1, 0, 0]]);
        let fit = fit_mle(&d, &o, &SolverConfig::default()).unwrap();
        assert_eq!(fit.existence, Existence::DivergedSeparation);
        assert!(!fit.converged);
    }

    #[test]
    fn subtle_separation_diverges() {
        // Shifting {individuals 0, 1, items 2, 3} upwards only helps: every
        // crossing edge from individuals 0, 1 into items 0, 1 is correct and
        // every crossing edge from individuals 2, 3 into items 2, 3 is wrong.
        // No single node has an all-0 or all-1 record.
        let rows: [&[u8]; 4] = [&[1, 1, 1, 0], &[1, 1, 0, 1], &[1, 0, 0, 0], &[0, 1, 0, 0]];
        let (d, o) = grid(&rows);
        assert!(separated_nodes(&d, &o).is_empty());
        let fit = fit_mle(&d, &o, &SolverConfig::default()).unwrap();
        assert_eq!(fit.existence, Existence::DivergedSeparation, "{fit:?}");
        assert!(!fit.converged);
    }

    #[test]
    fn disconnected_design_is_not_optimised() {
        let (d, o) = BipartiteDesign::from_responses(
            2,
            2,
            vec![(Edge::new(0, 0), 1), (Edge::new(1, 1), 0)],
        )
        .unwrap();
        let fit = fit_mle(&d, &o, &SolverConfig::default()).unwrap();
        assert_eq!(fit.existence, Existence::DisconnectedDesign);
        assert_eq!(fit.iterations, 0);
    }

    #[test]
    fn input_errors() {
        let d = sample_design(2, 2, 0.0, 0).unwrap();
        let o = OutcomeSet::new(&d, vec![]).unwrap();
        assert_eq!(fit_mle(&d, &o, &SolverConfig::default()), Err(RaschError::EmptyDesign));
        let (d, o) = symmetric_2x2();
        let bad = SolverConfig {
            divergence_bound: 0.0,
            ..SolverConfig::default()
        };
        assert!(fit_mle(&d, &o, &bad).is_err());
        assert!(fit_mle_from(&d, &o, &SolverConfig::default(), &[0.0; 3]).is_err());
    }

    #[test]
    fn three_by_three_matches_oracle() {
        let (d, o) = grid(&[&[1, 1, 0], &[1, 0, 0], &[0, 1, 1]]);
        let fit = fit_mle(&d, &o, &SolverConfig::with_identification(Identification::ZeroSum)).unwrap();
        assert_eq!(fit.existence, Existence::Exists);
        let oracle = brute_force_oracle(&d, &o).unwrap();
        for (a, b) in fit.theta_hat.as_slice().iter().zip(oracle.as_slice()) {
            assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn identification_invariance_and_uniqueness() {
        let (d, o) = well_posed(15, 12, 0.6, 21);
        let anchored = fit_mle(&d, &o, &SolverConfig::default()).unwrap();
        let zero_sum = fit_mle(&d, &o, &SolverConfig::with_identification(Identification::ZeroSum)).unwrap();
        let moved = reidentify(&anchored.theta_hat, Identification::ZeroSum);
        for (a, b) in moved.as_slice().iter().zip(zero_sum.theta_hat.as_slice()) {
            assert!((a - b).abs() <= 1e-8);
        }
        let mut rng = rng_from_seed(5);
        for _ in 0..3 {
            let start: Vec<f64> = (0..27).map(|_| rng.random_range(-3.0..3.0)).collect();
            let other = fit_mle_from(&d, &o, &SolverConfig::default(), &start).unwrap();
            assert_eq!(other.existence, Existence::Exists);
            for (a, b) in other.theta_hat.as_slice().iter().zip(anchored.theta_hat.as_slice()) {
                assert!((a - b).abs() <= 1e-7);
            }
        }
    }

    #[test]
    fn descent_is_monotone_and_scores_balance() {
        for seed in 0..10 {
            let (d, o) = well_posed(40, 35, 0.3, seed);
            let config = SolverConfig::default();
            let fit = fit_mle(&d, &o, &config).unwrap();
            for w in fit.trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].abs());
            }
            assert_scores(&d, &o, &fit, config.tolerance_for(&d));
            assert!(fit.iterations < 30);
        }
    }

    #[test]
    fn large_design_uses_sparse_path() {
        let (d, o) = well_posed(1200, 1000, 0.02, 3);
        let config = SolverConfig::default();
        let fit = fit_mle(&d, &o, &config).unwrap();
        assert_eq!(fit.existence, Existence::Exists);
        assert_scores(&d, &o, &fit, config.tolerance_for(&d));
    }
}
