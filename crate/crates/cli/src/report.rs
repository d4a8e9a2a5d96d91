use std::io::Write;

use serde::Serialize;
use sparse_rasch::estimation::{Existence, FitResult};
use sparse_rasch::inference::{centered_standard_errors, fisher_summary, standard_error, Estimand};
use sparse_rasch::io::{format_float, IdMaps, Role};
use sparse_rasch::model::Identification;
use sparse_rasch::stats::normal_quantile;
use sparse_rasch::BipartiteDesign;

pub const SCHEMA_VERSION: &str = "v1";

#[derive(Debug, Serialize)]
pub struct NodeRow {
    pub id: String,
    pub role: Role,
    /// One-based position within its side.
    pub index: usize,
    pub degree: u32,
    pub estimate: f64,
    pub standard_error: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct Convergence {
    pub converged: bool,
    pub iterations: usize,
    pub grad_inf_norm: f64,
    pub nll: f64,
    pub tolerance: f64,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub schema: &'static str,
    pub r: usize,
    pub t: usize,
    pub edge_count: usize,
    pub density: f64,
    pub identification: Identification,
    pub existence: Existence,
    pub ridge_lambda: Option<f64>,
    pub level: f64,
    pub convergence: Convergence,
    pub nodes: Vec<NodeRow>,
}

/// Assembles the per-node table. Standard errors are only reported for
/// fits whose estimate exists.
pub fn build(
    design: &BipartiteDesign,
    ids: &IdMaps,
    fit: &FitResult,
    ridge_lambda: Option<f64>,
    level: f64,
    tolerance: f64,
) -> anyhow::Result<FitReport> {
    let theta = &fit.theta_hat;
    let identification = theta.identification();
    let ses: Option<Vec<Option<f64>>> = if fit.existence == Existence::Exists {
        let fs = fisher_summary(design, theta)?;
        Some(match identification {
            Identification::AnchorFirst => (0..design.nodes())
                .map(|k| {
                    if k == 0 {
                        Ok(None)
                    } else {
                        standard_error(&fs, Estimand::Single(k)).map(Some)
                    }
                })
                .collect::<Result<_, _>>()?,
            Identification::ZeroSum => centered_standard_errors(&fs)?.into_iter().map(Some).collect(),
        })
    } else {
        None
    };
    let z = normal_quantile((1.0 + level) / 2.0)?;
    let r = design.r();
    let nodes = (0..design.nodes())
        .map(|k| {
            let (role, id, index) = if k < r {
                (Role::Individual, &ids.individuals[k], k + 1)
            } else {
                (Role::Item, &ids.items[k - r], k - r + 1)
            };
            let estimate = theta.as_slice()[k];
            let se = ses.as_ref().and_then(|s| s[k]);
            NodeRow {
                id: id.clone(),
                role,
                index,
                degree: design.degrees()[k],
                estimate,
                standard_error: se,
                ci_lower: se.map(|s| estimate - z * s),
                ci_upper: se.map(|s| estimate + z * s),
            }
        })
        .collect();
    Ok(FitReport {
        schema: SCHEMA_VERSION,
        r,
        t: design.t(),
        edge_count: design.edge_count(),
        density: design.density(),
        identification,
        existence: fit.existence,
        ridge_lambda,
        level,
        convergence: Convergence {
            converged: fit.converged,
            iterations: fit.iterations,
            grad_inf_norm: fit.grad_inf_norm,
            nll: fit.nll,
            tolerance,
        },
        nodes,
    })
}

pub const NODE_HEADER: [&str; 8] = [
    "id",
    "role",
    "index",
    "degree",
    "estimate",
    "standard_error",
    "ci_lower",
    "ci_upper",
];

pub fn write_csv<W: Write>(writer: W, report: &FitReport) -> anyhow::Result<()> {
    let opt = |x: Option<f64>| x.map(format_float).unwrap_or_default();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(NODE_HEADER)?;
    for n in &report.nodes {
        w.write_record([
            n.id.clone(),
            n.role.as_str().to_string(),
            n.index.to_string(),
            n.degree.to_string(),
            format_float(n.estimate),
            opt(n.standard_error),
            opt(n.ci_lower),
            opt(n.ci_upper),
        ])?;
    }
    w.flush()?;
    Ok(())
}
