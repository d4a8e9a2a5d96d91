//! Maximum likelihood estimation for the Rasch model on sparse, randomly
//! observed response designs.
//!
//! Individuals are nodes `0..r` and items are nodes `r..r + t` of a
//! bipartite graph; an edge records that individual `i` answered item `j`.
//! The probability of a correct answer is `mu(alpha_i - beta_j)`.

pub mod design;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod inference;
pub mod io;
pub mod logistic;
pub mod model;
pub mod rng;
pub mod stats;

pub use design::{diagnose, sample_design, sample_outcomes, BipartiteDesign, DesignDiagnostics, Edge, OutcomeSet};
pub use error::{RaschError, Result};
pub use estimation::{
    brute_force_oracle, fit_mle, fit_mle_from, fit_regularized, Existence, FitResult, SolverConfig,
};
pub use inference::{
    centered_standard_errors, confidence_interval, fisher_summary, s_matrix_entry, standard_error, wald_test, Estimand, FisherSummary,
    WaldReport,
};
pub use logistic::{logistic, Derivative};
pub use model::{gradient, hessian, neg_log_likelihood, CurvatureBounds, Hessian, Identification, ParamVector};
