//! Bipartite response designs, outcome sampling and the graph diagnostics
//! that decide whether a maximum likelihood estimate can exist.
//!
//! Nodes are numbered `0..r` for individuals and `r..r + t` for items.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{RaschError, Result};
use crate::logistic::sigmoid;
use crate::model::ParamVector;
use crate::rng::{mix_seed, rng_from_seed};

/// Node count above which co-response minima are estimated from sampled pairs.
pub const EXACT_CO_RESPONSE_LIMIT: usize = 5000;
/// Number of pairs drawn per side when co-response minima are sampled.
pub const CO_RESPONSE_SAMPLES: usize = 100_000;

/// One observed (individual, item) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub individual: u32,
    pub item: u32,
}

impl Edge {
    pub fn new(individual: usize, item: usize) -> Self {
        Self {
            individual: individual as u32,
            item: item as u32,
        }
    }

    #[inline]
    pub fn i(&self) -> usize {
        self.individual as usize
    }

    #[inline]
    pub fn j(&self) -> usize {
        self.item as usize
    }
}

/// The response graph: which individual answered which item.
///
/// Edges are kept sorted by `(individual, item)` so that two designs with the
/// same edge set are identical in memory and on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BipartiteDesign {
    r: usize,
    t: usize,
    edges: Vec<Edge>,
    degrees: Vec<u32>,
}

impl BipartiteDesign {
    /// Builds a design from an arbitrary edge list, sorting it into canonical
    /// order. Duplicate or out-of-range edges are rejected.
    pub fn new(r: usize, t: usize, mut edges: Vec<Edge>) -> Result<Self> {
        if r == 0 || t == 0 {
            return Err(RaschError::EmptySide);
        }
        for e in &edges {
            if e.i() >= r || e.j() >= t {
                return Err(RaschError::EdgeOutOfRange {
                    individual: e.i(),
                    item: e.j(),
                    r,
                    t,
                });
            }
        }
        edges.sort_unstable();
        if let Some(w) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(RaschError::DuplicateEdge {
                individual: w[0].i(),
                item: w[0].j(),
            });
        }
        Ok(Self::from_sorted(r, t, edges))
    }

    /// Builds a design and its outcomes from unsorted `(individual, item,
    /// correct)` triples, keeping outcomes aligned with the canonical edge
    /// order.
    pub fn from_responses(
        r: usize,
        t: usize,
        mut responses: Vec<(Edge, u8)>,
    ) -> Result<(Self, OutcomeSet)> {
        responses.sort_unstable_by_key(|(e, _)| *e);
        let (edges, values): (Vec<Edge>, Vec<u8>) = responses.into_iter().unzip();
        let design = Self::new(r, t, edges)?;
        let outcomes = OutcomeSet::new(&design, values)?;
        Ok((design, outcomes))
    }

    fn from_sorted(r: usize, t: usize, edges: Vec<Edge>) -> Self {
        let mut degrees = vec![0u32; r + t];
        for e in &edges {
            degrees[e.i()] += 1;
            degrees[r + e.j()] += 1;
        }
        Self {
            r,
            t,
            edges,
            degrees,
        }
    }

    /// Number of individuals.
    pub fn r(&self) -> usize {
        self.r
    }

    /// Number of items.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn nodes(&self) -> usize {
        self.r + self.t
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Degree of every node, individuals first.
    pub fn degrees(&self) -> &[u32] {
        &self.degrees
    }

    /// Node index of item `j`.
    #[inline]
    pub fn item_node(&self, j: usize) -> usize {
        self.r + j
    }

    /// Observed fraction of the `r * t` possible pairs.
    pub fn density(&self) -> f64 {
        self.edges.len() as f64 / (self.r as f64 * self.t as f64)
    }

    pub fn max_degree(&self) -> u32 {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn min_degree(&self) -> u32 {
        self.degrees.iter().copied().min().unwrap_or(0)
    }

    pub(crate) fn check_params(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.nodes() {
            return Err(RaschError::DimensionMismatch {
                expected: self.nodes(),
                found: theta.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_outcomes(&self, outcomes: &OutcomeSet) -> Result<()> {
        if outcomes.len() != self.edges.len() {
            return Err(RaschError::OutcomeMismatch {
                outcomes: outcomes.len(),
                edges: self.edges.len(),
            });
        }
        Ok(())
    }
}

/// Binary outcomes aligned with the edges of a design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeSet {
    values: Vec<u8>,
}

impl OutcomeSet {
    pub fn new(design: &BipartiteDesign, values: Vec<u8>) -> Result<Self> {
        if let Some((edge, &value)) = values.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(RaschError::NonBinaryOutcome { edge, value });
        }
        let set = Self { values };
        design.check_outcomes(&set)?;
        Ok(set)
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of correct responses.
    pub fn total_correct(&self) -> usize {
        self.values.iter().map(|&v| v as usize).sum()
    }
}

/// Draws an Erdős–Rényi bipartite design: each of the `r * t` pairs is
/// observed independently with probability `p`.
///
/// Pairs are visited in `(individual, item)` order and consume one uniform
/// draw each from a ChaCha8 stream seeded with `seed`.
pub fn sample_design(r: usize, t: usize, p: f64, seed: u64) -> Result<BipartiteDesign> {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return Err(RaschError::InvalidProbability(p));
    }
    if r == 0 || t == 0 {
        return Err(RaschError::EmptySide);
    }
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::with_capacity(((r * t) as f64 * p * 1.05) as usize + 16);
    for i in 0..r {
        for j in 0..t {
            if rng.random::<f64>() < p {
                edges.push(Edge::new(i, j));
            }
        }
    }
    Ok(BipartiteDesign::from_sorted(r, t, edges))
}

/// Draws Bernoulli outcomes with success probability `mu(alpha_i - beta_j)` on
/// every edge of the design, in edge order.
pub fn sample_outcomes(
    design: &BipartiteDesign,
    theta_true: &ParamVector,
    seed: u64,
) -> Result<OutcomeSet> {
    let theta = theta_true.as_slice();
    design.check_params(theta)?;
    let mut rng = rng_from_seed(seed);
    let r = design.r();
    let values = design
        .edges()
        .iter()
        .map(|e| {
            let prob = sigmoid(theta[e.i()] - theta[r + e.j()]);
            u8::from(rng.random::<f64>() < prob)
        })
        .collect();
    Ok(OutcomeSet { values })
}

/// Graph facts governing existence of the maximum likelihood estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignDiagnostics {
    pub r: usize,
    pub t: usize,
    pub edge_count: usize,
    pub connected: bool,
    pub components: usize,
    pub d_min: u32,
    pub d_max: u32,
    /// Degree-concentration event `rp/2 <= d_min <= d_max <= 3tp/2`; only
    /// evaluated when a sampling probability is supplied.
    pub a0_holds: Option<bool>,
    /// `p / (ln r / r)`, the sampling probability relative to the
    /// connectivity threshold.
    pub p_over_connectivity_threshold: Option<f64>,
    /// Minimum number of items shared by two distinct individuals.
    pub min_co_response_individuals: Option<u32>,
    /// Minimum number of individuals shared by two distinct items.
    pub min_co_response_items: Option<u32>,
    /// False when the co-response minima were estimated from sampled pairs.
    pub co_response_exact: bool,
    pub isolated_nodes: Vec<usize>,
    /// Nodes whose observed outcomes are all correct or all incorrect.
    /// Only populated when outcomes are supplied.
    pub separated_nodes: Option<Vec<usize>>,
}

/// Computes connectivity, degree, co-response and separation diagnostics.
pub fn diagnose(
    design: &BipartiteDesign,
    outcomes: Option<&OutcomeSet>,
    p: Option<f64>,
) -> DesignDiagnostics {
    let (r, t) = (design.r(), design.t());
    let components = count_components(design);
    let d_min = design.min_degree();
    let d_max = design.max_degree();
    let a0_holds = p.map(|p| {
        let lo = r as f64 * p / 2.0;
        let hi = 3.0 * t as f64 * p / 2.0;
        lo <= d_min as f64 && d_min <= d_max && d_max as f64 <= hi
    });
    let p_over_connectivity_threshold = p.map(|p| {
        let threshold = (r as f64).ln() / r as f64;
        if threshold > 0.0 {
            p / threshold
        } else {
            f64::INFINITY
        }
    });
    let exact = design.nodes() <= EXACT_CO_RESPONSE_LIMIT;
    let (ind, items) = co_response_minima(design, exact);
    let isolated_nodes = design
        .degrees()
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 0)
        .map(|(k, _)| k)
        .collect();
    let separated_nodes = outcomes.map(|o| separated_nodes(design, o));
    DesignDiagnostics {
        r,
        t,
        edge_count: design.edge_count(),
        connected: components == 1,
        components,
        d_min,
        d_max,
        a0_holds,
        p_over_connectivity_threshold,
        min_co_response_individuals: ind,
        min_co_response_items: items,
        co_response_exact: exact,
        isolated_nodes,
        separated_nodes,
    }
}

/// Connected components of the bipartite graph, isolated nodes included.
pub fn count_components(design: &BipartiteDesign) -> usize {
    let n = design.nodes();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = n;
    for e in design.edges() {
        let a = find(&mut parent, e.i());
        let b = find(&mut parent, design.item_node(e.j()));
        if a != b {
            parent[a] = b;
            components -= 1;
        }
    }
    components
}

/// Nodes with at least one response whose responses are all 0 or all 1.
pub fn separated_nodes(design: &BipartiteDesign, outcomes: &OutcomeSet) -> Vec<usize> {
    let n = design.nodes();
    let mut correct = vec![0u32; n];
    for (e, &a) in design.edges().iter().zip(outcomes.values()) {
        correct[e.i()] += a as u32;
        correct[design.item_node(e.j())] += a as u32;
    }
    design
        .degrees()
        .iter()
        .zip(&correct)
        .enumerate()
        .filter(|(_, (&d, &c))| d > 0 && (c == 0 || c == d))
        .map(|(k, _)| k)
        .collect()
}

fn co_response_minima(design: &BipartiteDesign, exact: bool) -> (Option<u32>, Option<u32>) {
    let (r, t) = (design.r(), design.t());
    // Bitset of neighbours per node on each side.
    let ind_words = t.div_ceil(64);
    let item_words = r.div_ceil(64);
    let mut ind_sets = vec![0u64; r * ind_words];
    let mut item_sets = vec![0u64; t * item_words];
    for e in design.edges() {
        ind_sets[e.i() * ind_words + e.j() / 64] |= 1 << (e.j() % 64);
        item_sets[e.j() * item_words + e.i() / 64] |= 1 << (e.i() % 64);
    }
    let side_min = |sets: &[u64], count: usize, words: usize, salt: u64| -> Option<u32> {
        if count < 2 {
            return None;
        }
        let shared = |a: usize, b: usize| -> u32 {
            let (x, y) = (&sets[a * words..(a + 1) * words], &sets[b * words..(b + 1) * words]);
            x.iter().zip(y).map(|(u, v)| (u & v).count_ones()).sum()
        };
        let mut best = u32::MAX;
        if exact {
            for a in 0..count {
                for b in a + 1..count {
                    best = best.min(shared(a, b));
                    if best == 0 {
                        return Some(0);
                    }
                }
            }
        } else {
            let mut rng = rng_from_seed(mix_seed(0x0C0_2E5B, salt, count as u64));
            for _ in 0..CO_RESPONSE_SAMPLES {
                let a = rng.random_range(0..count);
                let mut b = rng.random_range(0..count - 1);
                if b >= a {
                    b += 1;
                }
                best = best.min(shared(a, b));
            }
        }
        Some(best)
    };
    (
        side_min(&ind_sets, r, ind_words, 1),
        side_min(&item_sets, t, item_words, 2),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Identification;

    fn complete(r: usize, t: usize) -> BipartiteDesign {
        sample_design(r, t, 1.0, 0).unwrap()
    }

    #[test]
    fn full_and_empty_designs() {
        let d = complete(3, 4);
        assert_eq!(d.edge_count(), 12);
        assert!(d.degrees()[..3].iter().all(|&x| x == 4));
        assert!(d.degrees()[3..].iter().all(|&x| x == 3));
        let e = sample_design(3, 4, 0.0, 99).unwrap();
        assert_eq!(e.edge_count(), 0);
    }

    #[test]
    fn rejects_bad_probability() {
        assert_eq!(
            sample_design(2, 2, 1.5, 0),
            Err(RaschError::InvalidProbability(1.5))
        );
        assert!(sample_design(2, 2, -0.1, 0).is_err());
        assert!(sample_design(2, 2, f64::NAN, 0).is_err());
    }

    #[test]
    fn design_is_deterministic_and_consistent() {
        let a = sample_design(40, 30, 0.3, 17).unwrap();
        let b = sample_design(40, 30, 0.3, 17).unwrap();
        assert_eq!(a, b);
        let c = sample_design(40, 30, 0.3, 18).unwrap();
        assert_ne!(a, c);
        let ind: u32 = a.degrees()[..40].iter().sum();
        let items: u32 = a.degrees()[40..].iter().sum();
        assert_eq!(ind as usize, a.edge_count());
        assert_eq!(items as usize, a.edge_count());
        assert!(a.edges().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn mean_edge_count_matches_binomial() {
        // Binomial(rt, p) mean 4000, sd sqrt(4000 * 0.9) = 60; the mean over
        // 1000 seeds has standard error 60 / sqrt(1000).
        let seeds = 1000;
        let total: usize = (0..seeds)
            .map(|s| sample_design(200, 200, 0.1, s).unwrap().edge_count())
            .sum();
        let mean = total as f64 / seeds as f64;
        let se = (40_000.0f64 * 0.1 * 0.9).sqrt() / (seeds as f64).sqrt();
        assert!((mean - 4000.0).abs() <= 3.0 * se, "mean {mean}");
    }

    #[test]
    fn new_rejects_duplicates_and_out_of_range() {
        let dup = BipartiteDesign::new(2, 2, vec![Edge::new(0, 1), Edge::new(0, 1)]);
        assert_eq!(
            dup,
            Err(RaschError::DuplicateEdge {
                individual: 0,
                item: 1
            })
        );
        assert!(matches!(
            BipartiteDesign::new(2, 2, vec![Edge::new(2, 0)]),
            Err(RaschError::EdgeOutOfRange { .. })
        ));
        assert_eq!(BipartiteDesign::new(0, 2, vec![]), Err(RaschError::EmptySide));
    }

    #[test]
    fn outcomes_reject_non_binary_and_misaligned() {
        let d = complete(2, 2);
        assert!(matches!(
            OutcomeSet::new(&d, vec![0, 1, 2, 0]),
            Err(RaschError::NonBinaryOutcome { edge: 2, value: 2 })
        ));
        assert!(matches!(
            OutcomeSet::new(&d, vec![0, 1]),
            Err(RaschError::OutcomeMismatch { .. })
        ));
    }

    #[test]
    fn from_responses_keeps_alignment() {
        let (d, o) = BipartiteDesign::from_responses(
            2,
            2,
            vec![(Edge::new(1, 1), 1), (Edge::new(0, 0), 0), (Edge::new(1, 0), 1)],
        )
        .unwrap();
        assert_eq!(d.edges(), &[Edge::new(0, 0), Edge::new(1, 0), Edge::new(1, 1)]);
        assert_eq!(o.values(), &[0, 1, 1]);
    }

    #[test]
    fn outcome_sampling() {
        let d = complete(300, 300);
        let theta = ParamVector::zeros(300, 300, Identification::AnchorFirst);
        let o = sample_outcomes(&d, &theta, 5).unwrap();
        let n = o.len() as f64;
        let frac = o.total_correct() as f64 / n;
        assert!((frac - 0.5).abs() <= 4.0 * (0.25 / n).sqrt(), "{frac}");
        assert_eq!(o, sample_outcomes(&d, &theta, 5).unwrap());

        let d = complete(4, 5);
        let strong = ParamVector::from_parts(vec![30.0; 4], vec![0.0; 5], Identification::ZeroSum);
        let o = sample_outcomes(&d, &strong, 1).unwrap();
        assert!(o.values().iter().all(|&v| v == 1));

        let wrong = ParamVector::zeros(3, 5, Identification::ZeroSum);
        assert!(sample_outcomes(&d, &wrong, 1).is_err());
    }

    #[test]
    fn connectivity() {
        let d = complete(2, 2);
        let diag = diagnose(&d, None, None);
        assert!(diag.connected);
        assert_eq!(diag.components, 1);
        assert_eq!(diag.a0_holds, None);
        assert_eq!(diag.separated_nodes, None);

        let d = BipartiteDesign::new(2, 2, vec![Edge::new(0, 0), Edge::new(1, 1)]).unwrap();
        let diag = diagnose(&d, None, None);
        assert!(!diag.connected);
        assert_eq!(diag.components, 2);

        let d = BipartiteDesign::new(2, 3, vec![Edge::new(0, 0), Edge::new(1, 0)]).unwrap();
        let diag = diagnose(&d, None, None);
        assert_eq!(diag.components, 3);
        assert_eq!(diag.isolated_nodes, vec![3, 4]);
    }

    #[test]
    fn co_response_counts_match_brute_force() {
        let d = sample_design(12, 9, 0.5, 3).unwrap();
        let mut x = vec![vec![false; 9]; 12];
        for e in d.edges() {
            x[e.i()][e.j()] = true;
        }
        let mut ind = u32::MAX;
        for a in 0..12 {
            for b in a + 1..12 {
                ind = ind.min((0..9).filter(|&j| x[a][j] && x[b][j]).count() as u32);
            }
        }
        let mut items = u32::MAX;
        for a in 0..9 {
            for b in a + 1..9 {
                items = items.min((0..12).filter(|&i| x[i][a] && x[i][b]).count() as u32);
            }
        }
        let diag = diagnose(&d, None, Some(0.5));
        assert_eq!(diag.min_co_response_individuals, Some(ind));
        assert_eq!(diag.min_co_response_items, Some(items));
        assert!(diag.co_response_exact);
        let complete = diagnose(&complete(3, 70), None, None);
        assert_eq!(complete.min_co_response_individuals, Some(70));
        assert_eq!(complete.min_co_response_items, Some(3));
    }

    #[test]
    fn sampled_co_response_on_large_design() {
        let d = complete(3000, 2100);
        let diag = diagnose(&d, None, None);
        assert!(!diag.co_response_exact);
        assert_eq!(diag.min_co_response_individuals, Some(2100));
        assert_eq!(diag.min_co_response_items, Some(3000));
    }

    #[test]
    fn a0_event() {
        let d = complete(4, 4);
        // rp/2 = 2 <= 4 <= 4 <= 6
        assert_eq!(diagnose(&d, None, Some(1.0)).a0_holds, Some(true));
        let d = BipartiteDesign::new(2, 2, vec![Edge::new(0, 0), Edge::new(1, 1)]).unwrap();
        // rp/2 = 1 <= 1 <= 1 <= 1.5
        assert_eq!(diagnose(&d, None, Some(1.0)).a0_holds, Some(true));
        // 3tp/2 = 0.75 < d_max = 1
        assert_eq!(diagnose(&d, None, Some(0.25)).a0_holds, Some(false));
    }

    #[test]
    fn separation_flags() {
        let (d, o) = BipartiteDesign::from_responses(
            2,
            2,
            vec![
                (Edge::new(0, 0), 1),
                (Edge::new(0, 1), 0),
                (Edge::new(1, 0), 1),
                (Edge::new(1, 1), 1),
            ],
        )
        .unwrap();
        // Individual 1 is all-correct, item 0 is all-correct.
        assert_eq!(separated_nodes(&d, &o), vec![1, 2]);
    }
}
