//! Shared fixtures for the benchmarks.

use sparse_rasch::experiments::{draw_truth, AlphaDist, BetaDist};
use sparse_rasch::{sample_design, sample_outcomes, BipartiteDesign, OutcomeSet, ParamVector};

pub struct Instance {
    pub design: BipartiteDesign,
    pub outcomes: OutcomeSet,
    pub truth: ParamVector,
}

/// A square instance with `n` individuals and items at density `p`.
pub fn instance(n: usize, p: f64, seed: u64) -> Instance {
    let truth = draw_truth(n, n, AlphaDist::default(), BetaDist::default(), seed).expect("valid truth");
    let design = sample_design(n, n, p, seed.wrapping_add(1)).expect("valid design");
    let outcomes = sample_outcomes(&design, &truth, seed.wrapping_add(2)).expect("valid outcomes");
    Instance { design, outcomes, truth }
}
