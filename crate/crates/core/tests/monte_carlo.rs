//! Statistical checks that need many fits or large designs.

use rayon::prelude::*;
use sparse_rasch::design::{diagnose, sample_design, sample_outcomes};
use sparse_rasch::estimation::{fit_mle, Existence, SolverConfig};
use sparse_rasch::experiments::{draw_truth, run_error_experiment, AlphaDist, BetaDist, ExperimentGrid, PRule, SizePairing};
use sparse_rasch::inference::{fisher_summary, wald_test};
use sparse_rasch::model::{Identification, ParamVector};
use sparse_rasch::rng::mix_seed;
use statrs::distribution::{Binomial, DiscreteCDF};

#[test]
fn wald_rejection_rate_under_the_null() {
    let (r, t) = (300usize, 300usize);
    let p = (t as f64).powf(-0.25);
    let tested: Vec<usize> = (0..5).map(|j| r + 10 + j).collect();
    let outcomes: Vec<Option<bool>> = (0..1000u64)
        .into_par_iter()
        .map(|rep| {
            let seed = mix_seed(77, 0, rep);
            let truth = draw_truth(r, t, AlphaDist::default(), BetaDist::default(), seed).unwrap();
            let mut theta = truth.into_vec();
            for &k in &tested {
                theta[k] = 0.1;
            }
            let truth = ParamVector::from_theta(theta, r, Identification::AnchorFirst);
            let design = sample_design(r, t, p, seed ^ 1).unwrap();
            let outcomes = sample_outcomes(&design, &truth, seed ^ 2).unwrap();
            let fit = fit_mle(&design, &outcomes, &SolverConfig::default()).unwrap();
            if fit.existence != Existence::Exists {
                return None;
            }
            let fs = fisher_summary(&design, &fit.theta_hat).unwrap();
            Some(wald_test(&fs, &fit.theta_hat, &tested).unwrap().p_value < 0.05)
        })
        .collect();
    let used: Vec<bool> = outcomes.into_iter().flatten().collect();
    let rate = used.iter().filter(|&&x| x).count() as f64 / used.len() as f64;
    assert!(used.len() > 900);
    assert!((0.035..=0.065).contains(&rate), "rejection rate {rate}");
}

#[test]
fn dense_error_within_rate_bound() {
    let grid = ExperimentGrid {
        r_values: vec![200],
        t_values: vec![200],
        size_pairing: SizePairing::Zip,
        p_rules: vec![PRule::Fixed { p: 1.0 }],
        replications: 50,
        master_seed: 12,
        alpha_dist: AlphaDist::Uniform { lo: 0.0, hi: 0.0 },
        beta_dist: BetaDist::Normal { mean: 0.0, sd: 0.0 },
        fixed_truth: false,
        solver: SolverConfig::default(),
    };
    let row = &run_error_experiment(&grid).unwrap()[0];
    assert_eq!(row.used, 50);
    let bound = 3.0 * (200f64.ln() / 200.0).sqrt();
    assert!(row.mean_error <= bound, "{} > {bound}", row.mean_error);
}

/// `P(X < lo) + P(X > hi)` for `X ~ Binomial(n, p)`.
fn outside(n: u64, p: f64, lo: f64, hi: f64) -> f64 {
    let b = Binomial::new(p, n).unwrap();
    let below = if lo.ceil() >= 1.0 { b.cdf(lo.ceil() as u64 - 1) } else { 0.0 };
    below + b.sf(hi.floor() as u64)
}

#[test]
fn degree_event_failure_rate_matches_binomial_tails() {
    let n = 500usize;
    let p = 10.0 * (n as f64).ln() / n as f64;
    let per_node = outside(n as u64, p, n as f64 * p / 2.0, 1.5 * n as f64 * p);
    // Nodes on one side have independent degrees; the two sides are nearly so.
    let fail = 1.0 - (1.0 - per_node).powi(2 * n as i32);
    let seeds = 400u64;
    let failures = (0..seeds)
        .into_par_iter()
        .filter(|s| {
            let d = sample_design(n, n, p, 31_000 + s).unwrap();
            diagnose(&d, None, Some(p)).a0_holds == Some(false)
        })
        .count() as f64;
    let mean = seeds as f64 * fail;
    let sd = (seeds as f64 * fail * (1.0 - fail)).sqrt();
    assert!((failures - mean).abs() <= 4.0 * sd + 1.0, "{failures} failures, expected {mean:.1} +/- {sd:.1}");
}

#[test]
fn co_response_counts_clear_half_their_mean() {
    let (n, p) = (500usize, 0.5);
    let threshold = n as f64 * p * p / 2.0;
    let ok = (0..50u64)
        .into_par_iter()
        .filter(|s| {
            let d = sample_design(n, n, p, 41_000 + s).unwrap();
            let diag = diagnose(&d, None, Some(p));
            assert!(diag.co_response_exact);
            diag.min_co_response_individuals.unwrap() as f64 >= threshold
                && diag.min_co_response_items.unwrap() as f64 >= threshold
        })
        .count();
    assert!(ok >= 49, "{ok}/50");
}

#[test]
fn fitted_probabilities_reproduce_observed_totals() {
    // Summing the likelihood equations over individuals: the total number of
    // correct answers equals the sum of fitted probabilities.
    let design = sample_design(400, 350, 0.05, 3).unwrap();
    let truth = draw_truth(400, 350, AlphaDist::default(), BetaDist::default(), 4).unwrap();
    let outcomes = sample_outcomes(&design, &truth, 5).unwrap();
    let fit = fit_mle(&design, &outcomes, &SolverConfig::default()).unwrap();
    assert_eq!(fit.existence, Existence::Exists);
    let theta = fit.theta_hat.as_slice();
    let expected: f64 = design
        .edges()
        .iter()
        .map(|e| 1.0 / (1.0 + (theta[400 + e.j()] - theta[e.i()]).exp()))
        .sum();
    assert!((expected - outcomes.total_correct() as f64).abs() < 1e-6);
}
