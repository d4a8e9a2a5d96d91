//! Monte-Carlo studies: estimation error, confidence-interval coverage and
//! the null distribution of studentized contrasts.
//!
//! Every replication derives its own seed from
//! `mix_seed(master_seed, cell_index, replication_index)` and splits it into
//! truth, design and outcome streams, so results do not depend on how
//! replications are scheduled across threads. Aggregation runs sequentially
//! in replication order.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{sample_design, sample_outcomes};
use crate::error::{RaschError, Result};
use crate::estimation::{fit_mle, Existence, SolverConfig};
use crate::inference::{fisher_summary, standard_error, Estimand};
use crate::io::format_float;
use crate::model::{Identification, ParamVector};
use crate::rng::{mix_seed, rng_from_seed, stream_seed, Stream};
use crate::stats::normal_quantile;

pub const MANIFEST_SCHEMA: &str = "v1";

pub const ERROR_HEADER: [&str; 13] = [
    "cell",
    "r",
    "t",
    "p_rule",
    "p",
    "replications",
    "used",
    "failed",
    "mean_error",
    "median_error",
    "max_error",
    "mean_alpha_error",
    "mean_beta_error",
];

pub const COVERAGE_HEADER: [&str; 15] = [
    "cell",
    "r",
    "t",
    "p_rule",
    "p",
    "side",
    "i",
    "j",
    "level",
    "replications_used",
    "failed",
    "covered_count",
    "coverage",
    "mean_halfwidth",
    "mean_width",
];

pub const QQ_HEADER: [&str; 10] = [
    "cell",
    "r",
    "t",
    "p_rule",
    "side",
    "i",
    "j",
    "rank",
    "empirical",
    "theoretical",
];

/// Which dimension a sparsity rule is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    R,
    #[default]
    T,
}

impl Scale {
    fn pick(self, r: usize, t: usize) -> f64 {
        match self {
            Scale::R => r as f64,
            Scale::T => t as f64,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Scale::R => "r",
            Scale::T => "t",
        }
    }
}

/// Response probability as a function of the panel size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PRule {
    /// `p = s^(-exponent)`
    PowNeg {
        exponent: f64,
        #[serde(default)]
        scale: Scale,
    },
    /// `p = c log(s) / s`
    LogRule {
        c: f64,
        #[serde(default)]
        scale: Scale,
    },
    Fixed { p: f64 },
}

impl PRule {
    pub fn evaluate(&self, r: usize, t: usize) -> Result<f64> {
        let p = match *self {
            PRule::PowNeg { exponent, scale } => scale.pick(r, t).powf(-exponent),
            PRule::LogRule { c, scale } => {
                let s = scale.pick(r, t);
                c * s.ln() / s
            }
            PRule::Fixed { p } => p,
        };
        if !(p > 0.0 && p <= 1.0) {
            return Err(RaschError::InvalidArgument(format!(
                "rule {} gives p = {p} at r = {r}, t = {t}; expected 0 < p <= 1",
                self.label()
            )));
        }
        Ok(p)
    }

    pub fn label(&self) -> String {
        match *self {
            PRule::PowNeg { exponent, scale } => format!("{}^-{}", scale.symbol(), exponent),
            PRule::LogRule { c, scale } => format!("{}*log({s})/{s}", c, s = scale.symbol()),
            PRule::Fixed { p } => format!("{p}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SizePairing {
    /// Every `r` with every `t`.
    #[default]
    Cartesian,
    /// `r_values[k]` with `t_values[k]`.
    Zip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaDist {
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaDist {
    Normal { mean: f64, sd: f64 },
}

impl Default for AlphaDist {
    fn default() -> Self {
        AlphaDist::Uniform { lo: -0.5, hi: 0.5 }
    }
}

impl Default for BetaDist {
    fn default() -> Self {
        BetaDist::Normal { mean: 0.0, sd: 0.5 }
    }
}

/// Full description of a simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub r_values: Vec<usize>,
    pub t_values: Vec<usize>,
    #[serde(default)]
    pub size_pairing: SizePairing,
    pub p_rules: Vec<PRule>,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub alpha_dist: AlphaDist,
    #[serde(default)]
    pub beta_dist: BetaDist,
    /// Draw the true parameters once per cell instead of once per replication.
    #[serde(default)]
    pub fixed_truth: bool,
    #[serde(default)]
    pub solver: SolverConfig,
}

/// One `(r, t, p)` combination of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub r: usize,
    pub t: usize,
    pub rule: PRule,
    pub p: f64,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(RaschError::InvalidArgument("replications must be at least 1".into()));
        }
        if self.r_values.is_empty() || self.t_values.is_empty() || self.p_rules.is_empty() {
            return Err(RaschError::InvalidArgument(
                "r_values, t_values and p_rules must be non-empty".into(),
            ));
        }
        if self.r_values.iter().chain(&self.t_values).any(|&n| n == 0) {
            return Err(RaschError::EmptySide);
        }
        if self.size_pairing == SizePairing::Zip && self.r_values.len() != self.t_values.len() {
            return Err(RaschError::DimensionMismatch {
                expected: self.r_values.len(),
                found: self.t_values.len(),
            });
        }
        let AlphaDist::Uniform { lo, hi } = self.alpha_dist;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(RaschError::InvalidArgument(format!("bad uniform range [{lo}, {hi}]")));
        }
        let BetaDist::Normal { mean, sd } = self.beta_dist;
        if !(mean.is_finite() && sd.is_finite() && sd >= 0.0) {
            return Err(RaschError::InvalidArgument(format!("bad normal law ({mean}, {sd})")));
        }
        self.solver.validate()?;
        self.cells().map(|_| ())
    }

    /// Cells in output order: sizes outermost, then rules.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let sizes: Vec<(usize, usize)> = match self.size_pairing {
            SizePairing::Cartesian => self
                .r_values
                .iter()
                .flat_map(|&r| self.t_values.iter().map(move |&t| (r, t)))
                .collect(),
            SizePairing::Zip => self.r_values.iter().copied().zip(self.t_values.iter().copied()).collect(),
        };
        let mut cells = Vec::new();
        for (r, t) in sizes {
            for rule in &self.p_rules {
                cells.push(Cell {
                    index: cells.len(),
                    r,
                    t,
                    rule: *rule,
                    p: rule.evaluate(r, t)?,
                });
            }
        }
        Ok(cells)
    }

    fn fit_config(&self) -> SolverConfig {
        SolverConfig {
            identification: Identification::AnchorFirst,
            ..self.solver.clone()
        }
    }
}

/// Draws `alpha ~ alpha_dist`, `beta ~ beta_dist` and shifts both by
/// `alpha_1` so the first ability is zero.
pub fn draw_truth(r: usize, t: usize, alpha: AlphaDist, beta: BetaDist, seed: u64) -> Result<ParamVector> {
    let mut rng = rng_from_seed(seed);
    let AlphaDist::Uniform { lo, hi } = alpha;
    let abilities: Vec<f64> = (0..r)
        .map(|_| if lo == hi { lo } else { rng.random_range(lo..hi) })
        .collect();
    let BetaDist::Normal { mean, sd } = beta;
    let normal = Normal::new(mean, sd).map_err(|e| RaschError::InvalidArgument(e.to_string()))?;
    let difficulties: Vec<f64> = (0..t).map(|_| normal.sample(&mut rng)).collect();
    Ok(ParamVector::from_parts(abilities, difficulties, Identification::AnchorFirst))
}

/// Everything a replication produces before any study-specific summary.
struct Replication {
    truth: ParamVector,
    fit: Option<ParamVector>,
    design: crate::design::BipartiteDesign,
}

fn replicate(grid: &ExperimentGrid, cell: &Cell, rep: usize) -> Result<Replication> {
    let seed = mix_seed(grid.master_seed, cell.index as u64, rep as u64);
    let truth_seed = if grid.fixed_truth {
        stream_seed(mix_seed(grid.master_seed, cell.index as u64, u64::MAX), Stream::Truth)
    } else {
        stream_seed(seed, Stream::Truth)
    };
    let truth = draw_truth(cell.r, cell.t, grid.alpha_dist, grid.beta_dist, truth_seed)?;
    let design = sample_design(cell.r, cell.t, cell.p, stream_seed(seed, Stream::Design))?;
    if design.edge_count() == 0 {
        return Ok(Replication {
            truth,
            fit: None,
            design,
        });
    }
    let outcomes = sample_outcomes(&design, &truth, stream_seed(seed, Stream::Outcomes))?;
    let fit = fit_mle(&design, &outcomes, &grid.fit_config())?;
    let fit = (fit.existence == Existence::Exists && fit.converged).then_some(fit.theta_hat);
    Ok(Replication { truth, fit, design })
}

fn run_cell<T: Send>(
    grid: &ExperimentGrid,
    cell: &Cell,
    summarise: impl Fn(Replication) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    (0..grid.replications)
        .into_par_iter()
        .map(|rep| summarise(replicate(grid, cell, rep)?))
        .collect()
}

/// Sup-norm of `estimate - truth` after removing the average difference.
pub fn centered_errors(estimate: &ParamVector, truth: &ParamVector) -> (f64, f64, f64) {
    let a = estimate.as_slice();
    let b = truth.as_slice();
    let shift = a.iter().zip(b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64;
    let r = truth.r();
    let mut all = 0.0f64;
    let mut alpha = 0.0f64;
    let mut beta = 0.0f64;
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        let e = (x - y - shift).abs();
        all = all.max(e);
        if k < r {
            alpha = alpha.max(e);
        } else {
            beta = beta.max(e);
        }
    }
    (all, alpha, beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub cell: usize,
    pub r: usize,
    pub t: usize,
    pub p_rule: String,
    pub p: f64,
    pub replications: usize,
    pub used: usize,
    pub failed: usize,
    pub mean_error: f64,
    pub median_error: f64,
    pub max_error: f64,
    pub mean_alpha_error: f64,
    pub mean_beta_error: f64,
}

/// Centered sup-norm estimation error per cell. Replications whose fit does
/// not exist are excluded from the averages and counted in `failed`.
pub fn run_error_experiment(grid: &ExperimentGrid) -> Result<Vec<ErrorRow>> {
    grid.validate()?;
    let mut rows = Vec::new();
    for cell in grid.cells()? {
        let errors = run_cell(grid, &cell, |rep| {
            Ok(rep.fit.as_ref().map(|fit| centered_errors(fit, &rep.truth)))
        })?;
        let used: Vec<(f64, f64, f64)> = errors.into_iter().flatten().collect();
        let n = used.len();
        let mean = |f: fn(&(f64, f64, f64)) -> f64| {
            if n == 0 {
                f64::NAN
            } else {
                used.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let mut all: Vec<f64> = used.iter().map(|e| e.0).collect();
        all.sort_by(f64::total_cmp);
        rows.push(ErrorRow {
            cell: cell.index,
            r: cell.r,
            t: cell.t,
            p_rule: cell.rule.label(),
            p: cell.p,
            replications: grid.replications,
            used: n,
            failed: grid.replications - n,
            mean_error: mean(|e| e.0),
            median_error: median(&all),
            max_error: all.last().copied().unwrap_or(f64::NAN),
            mean_alpha_error: mean(|e| e.1),
            mean_beta_error: mean(|e| e.2),
        });
    }
    Ok(rows)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => sorted[n / 2],
        _ => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Individuals,
    Items,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Individuals => "individuals",
            Side::Items => "items",
        }
    }
}

/// One-based position within a side, possibly relative to the side's size
/// `n`: `"2"`, `"n"`, `"n-1"`, `"n/2"`, `"n/2+1"`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Position {
    base: Base,
    offset: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Base {
    Zero,
    N,
    HalfN,
}

impl Position {
    pub fn fixed(k: usize) -> Self {
        Position {
            base: Base::Zero,
            offset: k as i64,
        }
    }

    /// One-based index for a side of size `n`.
    pub fn resolve(&self, n: usize) -> Result<usize> {
        let base = match self.base {
            Base::Zero => 0,
            Base::N => n as i64,
            Base::HalfN => (n / 2) as i64,
        };
        let k = base + self.offset;
        if k < 1 || k > n as i64 {
            return Err(RaschError::IndexOutOfRange {
                index: k.max(0) as usize,
                len: n,
            });
        }
        Ok(k as usize)
    }
}

impl std::str::FromStr for Position {
    type Err = RaschError;

    fn from_str(s: &str) -> Result<Self> {
        let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || RaschError::InvalidArgument(format!("cannot parse position {s:?}"));
        let (base, rest) = if let Some(rest) = s.strip_prefix("n/2") {
            (Base::HalfN, rest)
        } else if let Some(rest) = s.strip_prefix('n') {
            (Base::N, rest)
        } else {
            return s
                .parse::<i64>()
                .ok()
                .filter(|&k| k >= 1)
                .map(|offset| Position {
                    base: Base::Zero,
                    offset,
                })
                .ok_or_else(bad);
        };
        let offset = if rest.is_empty() {
            0
        } else if let Some(k) = rest.strip_prefix('+') {
            k.parse::<i64>().map_err(|_| bad())?
        } else if let Some(k) = rest.strip_prefix('-') {
            -k.parse::<i64>().map_err(|_| bad())?
        } else {
            return Err(bad());
        };
        Ok(Position { base, offset })
    }
}

impl TryFrom<String> for Position {
    type Error = RaschError;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Position> for String {
    fn from(p: Position) -> String {
        p.to_string()
    }
}

impl std::fmt::Display for Position {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let base = match self.base {
            Base::Zero => return write!(f, "{}", self.offset),
            Base::N => "n",
            Base::HalfN => "n/2",
        };
        match self.offset {
            0 => write!(f, "{base}"),
            k if k > 0 => write!(f, "{base}+{k}"),
            k => write!(f, "{base}{k}"),
        }
    }
}

/// A contrast `theta_i - theta_j` between two members of one side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSpec {
    pub side: Side,
    pub i: Position,
    pub j: Position,
}

impl PairSpec {
    pub fn new(side: Side, i: &str, j: &str) -> Result<Self> {
        Ok(PairSpec {
            side,
            i: i.parse()?,
            j: j.parse()?,
        })
    }

    /// One-based positions and zero-based node indices at size `(r, t)`.
    fn resolve(&self, r: usize, t: usize) -> Result<ResolvedPair> {
        let n = match self.side {
            Side::Individuals => r,
            Side::Items => t,
        };
        let (i, j) = (self.i.resolve(n)?, self.j.resolve(n)?);
        if i == j {
            return Err(RaschError::InvalidArgument(format!(
                "pair ({}, {}) resolves to the same position {i}",
                self.i, self.j
            )));
        }
        let offset = match self.side {
            Side::Individuals => 0,
            Side::Items => r,
        };
        Ok(ResolvedPair {
            side: self.side,
            i,
            j,
            node_i: offset + i - 1,
            node_j: offset + j - 1,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct ResolvedPair {
    side: Side,
    i: usize,
    j: usize,
    node_i: usize,
    node_j: usize,
}

/// The pairs reported in the coverage table: `(2, 3)`, `(n/2, n/2+1)` and
/// `(n-1, n)` for individuals, `(1, 2)`, `(n/2, n/2+1)`, `(n-1, n)` for items.
pub fn standard_pairs() -> Vec<PairSpec> {
    let mut pairs = Vec::new();
    for (side, first) in [(Side::Individuals, ("2", "3")), (Side::Items, ("1", "2"))] {
        for (i, j) in [first, ("n/2", "n/2+1"), ("n-1", "n")] {
            pairs.push(PairSpec::new(side, i, j).expect("valid literal"));
        }
    }
    pairs
}

/// Studentized contrast and interval half-width for one pair in one
/// replication.
#[derive(Debug, Clone, Copy, PartialEq)]
struct ContrastDraw {
    z: f64,
    se: f64,
}

fn contrast_draws(grid: &ExperimentGrid, cell: &Cell, pairs: &[ResolvedPair]) -> Result<Vec<Option<Vec<ContrastDraw>>>> {
    run_cell(grid, cell, |rep| {
        let Some(fit) = rep.fit else { return Ok(None) };
        let fs = fisher_summary(&rep.design, &fit)?;
        let est = fit.as_slice();
        let truth = rep.truth.as_slice();
        let draws = pairs
            .iter()
            .map(|p| {
                let se = standard_error(&fs, Estimand::Contrast(p.node_i, p.node_j))?;
                let diff = (est[p.node_i] - est[p.node_j]) - (truth[p.node_i] - truth[p.node_j]);
                Ok(ContrastDraw { z: diff / se, se })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(draws))
    })
}

fn resolve_all(cell: &Cell, pairs: &[PairSpec]) -> Result<Vec<ResolvedPair>> {
    pairs.iter().map(|p| p.resolve(cell.r, cell.t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRecord {
    pub cell: usize,
    pub r: usize,
    pub t: usize,
    pub p_rule: String,
    pub p: f64,
    pub side: Side,
    /// One-based positions within the side.
    pub pair: (usize, usize),
    pub level: f64,
    pub replications_used: usize,
    pub failed: usize,
    pub covered_count: usize,
    /// Fraction of used replications whose interval contains the truth.
    pub covered: f64,
    pub mean_halfwidth: f64,
    pub mean_width: f64,
}

/// Coverage of the normal-approximation interval for each pair and cell.
pub fn run_coverage_experiment(grid: &ExperimentGrid, pairs: &[PairSpec], level: f64) -> Result<Vec<CoverageRecord>> {
    grid.validate()?;
    if !(level > 0.0 && level < 1.0) {
        return Err(RaschError::InvalidProbability(level));
    }
    let z = normal_quantile((1.0 + level) / 2.0)?;
    let mut records = Vec::new();
    for cell in grid.cells()? {
        let resolved = resolve_all(&cell, pairs)?;
        if resolved.is_empty() {
            continue;
        }
        let draws = contrast_draws(grid, &cell, &resolved)?;
        let used: Vec<&Vec<ContrastDraw>> = draws.iter().flatten().collect();
        let n = used.len();
        for (k, pair) in resolved.iter().enumerate() {
            let covered_count = used.iter().filter(|d| d[k].z.abs() <= z).count();
            let mean_halfwidth = if n == 0 {
                f64::NAN
            } else {
                used.iter().map(|d| z * d[k].se).sum::<f64>() / n as f64
            };
            records.push(CoverageRecord {
                cell: cell.index,
                r: cell.r,
                t: cell.t,
                p_rule: cell.rule.label(),
                p: cell.p,
                side: pair.side,
                pair: (pair.i, pair.j),
                level,
                replications_used: n,
                failed: grid.replications - n,
                covered_count,
                covered: if n == 0 { f64::NAN } else { covered_count as f64 / n as f64 },
                mean_halfwidth,
                mean_width: 2.0 * mean_halfwidth,
            });
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QqRow {
    pub cell: usize,
    pub r: usize,
    pub t: usize,
    pub p_rule: String,
    pub side: Side,
    pub pair: (usize, usize),
    /// One-based rank among the used replications.
    pub rank: usize,
    pub empirical: f64,
    pub theoretical: f64,
}

/// Sorted studentized contrasts against standard normal plotting positions
/// `Phi^-1((k - 0.5) / n)`.
pub fn qq_export(grid: &ExperimentGrid, pairs: &[PairSpec]) -> Result<Vec<QqRow>> {
    grid.validate()?;
    let mut rows = Vec::new();
    for cell in grid.cells()? {
        let resolved = resolve_all(&cell, pairs)?;
        if resolved.is_empty() {
            continue;
        }
        let draws = contrast_draws(grid, &cell, &resolved)?;
        for (k, pair) in resolved.iter().enumerate() {
            let values: Vec<f64> = draws.iter().flatten().map(|d| d[k].z).collect();
            for (rank, (empirical, theoretical)) in qq_points(values)?.into_iter().enumerate() {
                rows.push(QqRow {
                    cell: cell.index,
                    r: cell.r,
                    t: cell.t,
                    p_rule: cell.rule.label(),
                    side: pair.side,
                    pair: (pair.i, pair.j),
                    rank: rank + 1,
                    empirical,
                    theoretical,
                });
            }
        }
    }
    Ok(rows)
}

/// `(sorted value, normal plotting position)` pairs.
pub fn qq_points(mut values: Vec<f64>) -> Result<Vec<(f64, f64)>> {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .into_iter()
        .enumerate()
        .map(|(k, v)| Ok((v, normal_quantile((k as f64 + 0.5) / n)?)))
        .collect()
}

/// Largest `|empirical - theoretical|` over plotting positions inside
/// `[(1 - central) / 2, (1 + central) / 2]`.
pub fn max_central_gap(points: &[(f64, f64)], central: f64) -> f64 {
    let n = points.len() as f64;
    let lo = (1.0 - central) / 2.0;
    let hi = (1.0 + central) / 2.0;
    points
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let q = (*k as f64 + 0.5) / n;
            q >= lo && q <= hi
        })
        .fold(0.0, |m, (_, (e, t))| m.max((e - t).abs()))
}

/// Description written next to every output table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub experiment: String,
    pub grid: ExperimentGrid,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairs: Vec<PairSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    pub output: String,
    pub columns: Vec<String>,
}

impl Manifest {
    pub fn new(experiment: &str, grid: &ExperimentGrid, output: &str, columns: &[&str]) -> Self {
        Manifest {
            schema: MANIFEST_SCHEMA.into(),
            experiment: experiment.into(),
            grid: grid.clone(),
            pairs: Vec::new(),
            level: None,
            output: output.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
        }
    }
}

pub fn write_error_csv<W: Write>(writer: W, rows: &[ErrorRow]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(ERROR_HEADER)?;
    for row in rows {
        w.write_record([
            row.cell.to_string(),
            row.r.to_string(),
            row.t.to_string(),
            row.p_rule.clone(),
            format_float(row.p),
            row.replications.to_string(),
            row.used.to_string(),
            row.failed.to_string(),
            format_float(row.mean_error),
            format_float(row.median_error),
            format_float(row.max_error),
            format_float(row.mean_alpha_error),
            format_float(row.mean_beta_error),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_coverage_csv<W: Write>(writer: W, records: &[CoverageRecord]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(COVERAGE_HEADER)?;
    for rec in records {
        w.write_record([
            rec.cell.to_string(),
            rec.r.to_string(),
            rec.t.to_string(),
            rec.p_rule.clone(),
            format_float(rec.p),
            rec.side.as_str().to_string(),
            rec.pair.0.to_string(),
            rec.pair.1.to_string(),
            format_float(rec.level),
            rec.replications_used.to_string(),
            rec.failed.to_string(),
            rec.covered_count.to_string(),
            format_float(rec.covered),
            format_float(rec.mean_halfwidth),
            format_float(rec.mean_width),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_qq_csv<W: Write>(writer: W, rows: &[QqRow]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(QQ_HEADER)?;
    for row in rows {
        w.write_record([
            row.cell.to_string(),
            row.r.to_string(),
            row.t.to_string(),
            row.p_rule.clone(),
            row.side.as_str().to_string(),
            row.pair.0.to_string(),
            row.pair.1.to_string(),
            row.rank.to_string(),
            format_float(row.empirical),
            format_float(row.theoretical),
        ])?;
    }
    w.flush()?;
    Ok(())
}
