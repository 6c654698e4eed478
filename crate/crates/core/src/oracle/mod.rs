//! Distributional oracles used to certify the graph criteria.

pub mod catalog;
pub mod discrete;
pub mod gauss;

use serde::Serialize;
use thiserror::Error;

use crate::graph::RegressionGraph;
use crate::independence::{structure, IndependenceError, IndependenceStructure, DEFAULT_STRUCTURE_BOUND};
use crate::par::Execution;
use crate::transform::{expand_full_line, TransformError};

pub use discrete::{check_property, DiscretePMF, Property, Violation};
pub use gauss::{implied_covariance, partial_correlation, random_faithful_model, GaussianModel};

/// Partial correlations below this count as zero.
pub const ZERO_TOL: f64 = 1e-10;
/// At least one seed must exceed this for a non-implied statement.
pub const NONZERO_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("could not make the residual matrix of block {block} positive definite")]
    PDRepairFailed { block: usize },
    #[error("covariance submatrix is singular")]
    SingularSubmatrix,
    #[error("invalid probability table: {0}")]
    InvalidTable(String),
    #[error(transparent)]
    Independence(#[from] IndependenceError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// One pairwise statement with its partial correlation under every seed.
#[derive(Debug, Clone, Serialize)]
pub struct StatementCheck {
    pub statement: String,
    pub implied: bool,
    pub rho: Vec<f64>,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub seeds: Vec<u64>,
    pub checks: Vec<StatementCheck>,
}

impl Certificate {
    pub fn failures(&self) -> impl Iterator<Item = &StatementCheck> {
        self.checks.iter().filter(|c| !c.ok)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

/// Compares `implied` with the zero pattern of `covs` over every pair and
/// every conditioning set on the first `n` variables.
fn compare(
    labels: &[String],
    implied: &IndependenceStructure,
    covs: &[nalgebra::DMatrix<f64>],
    zero_tol: f64,
) -> Result<Vec<StatementCheck>, OracleError> {
    let n = labels.len();
    let mut out = Vec::new();
    let mut c = Vec::with_capacity(n);
    for i in 0..n {
        for k in i + 1..n {
            for mask in 0u32..(1 << n) {
                if mask & (1 << i | 1 << k) != 0 {
                    continue;
                }
                c.clear();
                c.extend((0..n).filter(|v| mask >> v & 1 == 1));
                let rho = covs
                    .iter()
                    .map(|s| partial_correlation(s, i, k, &c))
                    .collect::<Result<Vec<f64>, _>>()?;
                let is_implied = implied.contains_mask(i, k, mask);
                let ok = if is_implied {
                    rho.iter().all(|r| r.abs() < zero_tol)
                } else {
                    rho.iter().any(|r| r.abs() > NONZERO_TOL)
                };
                let names = |vs: &[usize]| vs.iter().map(|&v| labels[v].as_str()).collect::<Vec<_>>().join(",");
                let statement = if c.is_empty() {
                    format!("{} _||_ {}", labels[i], labels[k])
                } else {
                    format!("{} _||_ {} | {}", labels[i], labels[k], names(&c))
                };
                out.push(StatementCheck { statement, implied: is_implied, rho, ok });
            }
        }
    }
    Ok(out)
}

/// Checks every pairwise statement of `g` against random faithful models:
/// implied statements must have `|ρ| < zero_tol` under every seed, the others
/// `|ρ| > NONZERO_TOL` under at least one.
pub fn certify_graph(g: &RegressionGraph, seeds: &[u64], zero_tol: f64) -> Result<Certificate, OracleError> {
    let implied = structure(g, DEFAULT_STRUCTURE_BOUND, Execution::Sequential)?;
    let covs = seeds
        .iter()
        .map(|&s| random_faithful_model(g, s).map(|m| implied_covariance(&m)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Certificate {
        seeds: seeds.to_vec(),
        checks: compare(g.labels(), &implied, &covs, zero_tol)?,
    })
}

/// Checks that replacing the full line `a -- b` by a hidden common source
/// leaves the independence structure over the observed nodes unchanged.
pub fn certify_full_line_expansion(
    g: &RegressionGraph,
    a: usize,
    b: usize,
    seeds: &[u64],
    zero_tol: f64,
) -> Result<Certificate, OracleError> {
    let implied = structure(g, DEFAULT_STRUCTURE_BOUND, Execution::Sequential)?;
    let x = expand_full_line(g, a, b)?;
    let covs = seeds
        .iter()
        .map(|&s| {
            random_faithful_model(&x.graph, s).map(|m| gauss::drop_nodes(&implied_covariance(&m), &[x.latent]))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Certificate {
        seeds: seeds.to_vec(),
        checks: compare(g.labels(), &implied, &covs, zero_tol)?,
    })
}
