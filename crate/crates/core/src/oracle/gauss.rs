//! Exact linear-Gaussian models over a regression graph.
//!
//! Each response block is `X_j = B_j X_{>j} + e_j` with `cov(e_j)` following
//! the dashed-line pattern; the context block has a concentration matrix
//! following the full-line pattern. The joint covariance is
//! `(I - B)^{-1} Ω (I - B)^{-T}` with `Ω` block diagonal.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::OracleError;
use crate::graph::{Edge, EdgeKind, RegressionGraph};

/// Coefficient magnitudes are drawn from `[COEFF_MIN, COEFF_MAX]` with a
/// random sign.
pub const COEFF_MIN: f64 = 0.3;
pub const COEFF_MAX: f64 = 0.9;
const REPAIR_START: f64 = 0.1;
const REPAIR_DOUBLINGS: u32 = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    graph: RegressionGraph,
    /// `b[(head, tail)]` for every arrow.
    b: DMatrix<f64>,
    /// Residual covariance of each block, indexed like the block's node list.
    residual_cov: Vec<DMatrix<f64>>,
    /// Concentration matrix of the context block, if there is one.
    context_concentration: Option<DMatrix<f64>>,
}

impl GaussianModel {
    pub fn graph(&self) -> &RegressionGraph {
        &self.graph
    }

    pub fn coefficient(&self, tail: usize, head: usize) -> f64 {
        self.b[(head, tail)]
    }

    pub fn arrow_coeffs(&self) -> Vec<(Edge, f64)> {
        self.graph
            .edges()
            .iter()
            .filter(|e| e.kind == EdgeKind::Arrow)
            .map(|e| (*e, self.b[(e.to, e.from)]))
            .collect()
    }

    pub fn residual_cov(&self, block: usize) -> &DMatrix<f64> {
        &self.residual_cov[block]
    }

    pub fn context_concentration(&self) -> Option<&DMatrix<f64>> {
        self.context_concentration.as_ref()
    }

    /// Builds a model from explicit parameters: arrow coefficients and one
    /// residual covariance per block.
    pub fn from_parts(
        graph: RegressionGraph,
        coeffs: &[(Edge, f64)],
        residual_cov: Vec<DMatrix<f64>>,
    ) -> Self {
        let n = graph.num_nodes();
        let mut b = DMatrix::zeros(n, n);
        for (e, c) in coeffs {
            b[(e.to, e.from)] = *c;
        }
        let context_concentration = graph
            .ordering()
            .blocks()
            .iter()
            .enumerate()
            .find(|(j, _)| graph.ordering().is_context_block(*j))
            .and_then(|(j, _)| residual_cov[j].clone().try_inverse());
        GaussianModel { graph, b, residual_cov, context_concentration }
    }
}

fn draw_coeff(rng: &mut ChaCha8Rng) -> f64 {
    let mag = rng.random_range(COEFF_MIN..=COEFF_MAX);
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

/// Symmetric matrix with unit diagonal and random entries on the given
/// pattern, with the diagonal raised until positive definite.
fn patterned_pd(
    size: usize,
    pattern: &[(usize, usize)],
    rng: &mut ChaCha8Rng,
    block: usize,
) -> Result<DMatrix<f64>, OracleError> {
    let mut m = DMatrix::identity(size, size);
    for &(p, q) in pattern {
        let c = draw_coeff(rng);
        m[(p, q)] = c;
        m[(q, p)] = c;
    }
    if m.clone().cholesky().is_some() {
        return Ok(m);
    }
    let mut delta = REPAIR_START;
    for _ in 0..=REPAIR_DOUBLINGS {
        let boosted = &m + DMatrix::identity(size, size) * delta;
        if boosted.clone().cholesky().is_some() {
            return Ok(boosted);
        }
        delta *= 2.0;
    }
    Err(OracleError::PDRepairFailed { block })
}

/// A random model whose zero pattern is exactly the graph's. Deterministic
/// in `seed`.
pub fn random_faithful_model(g: &RegressionGraph, seed: u64) -> Result<GaussianModel, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.num_nodes();
    let mut b = DMatrix::zeros(n, n);
    for e in g.edges().iter().filter(|e| e.kind == EdgeKind::Arrow) {
        b[(e.to, e.from)] = draw_coeff(&mut rng);
    }
    let ord = g.ordering();
    let mut residual_cov = Vec::with_capacity(ord.num_blocks());
    let mut context_concentration = None;
    for (j, block) in ord.blocks().iter().enumerate() {
        let pos = |v: usize| block.iter().position(|&x| x == v).unwrap();
        let kind = if ord.is_context_block(j) { EdgeKind::Full } else { EdgeKind::Dashed };
        let pattern: Vec<(usize, usize)> = g
            .edges()
            .iter()
            .filter(|e| e.kind == kind && g.block_of(e.from) == j)
            .map(|e| (pos(e.from), pos(e.to)))
            .collect();
        let m = patterned_pd(block.len(), &pattern, &mut rng, j)?;
        if kind == EdgeKind::Full {
            let cov = m.clone().cholesky().expect("repaired").inverse();
            context_concentration = Some(m);
            residual_cov.push(cov);
        } else {
            residual_cov.push(m);
        }
    }
    Ok(GaussianModel { graph: g.clone(), b, residual_cov, context_concentration })
}

/// Joint covariance over all nodes, by exact linear algebra.
pub fn implied_covariance(m: &GaussianModel) -> DMatrix<f64> {
    let n = m.graph.num_nodes();
    let mut omega = DMatrix::zeros(n, n);
    for (block, cov) in m.graph.ordering().blocks().iter().zip(&m.residual_cov) {
        for (p, &u) in block.iter().enumerate() {
            for (q, &w) in block.iter().enumerate() {
                omega[(u, w)] = cov[(p, q)];
            }
        }
    }
    // I - B is a permuted triangular matrix, hence invertible
    let a = (DMatrix::identity(n, n) - &m.b)
        .try_inverse()
        .expect("acyclic coefficient matrix");
    let s = &a * omega * a.transpose();
    // symmetrise against rounding
    (&s + s.transpose()) * 0.5
}

/// `ρ_{ik·c}` from the inverse of the submatrix on `{i, k} ∪ c`.
pub fn partial_correlation(s: &DMatrix<f64>, i: usize, k: usize, c: &[usize]) -> Result<f64, OracleError> {
    let mut idx = Vec::with_capacity(c.len() + 2);
    idx.push(i);
    idx.push(k);
    idx.extend_from_slice(c);
    let sub = s.select_rows(&idx).select_columns(&idx);
    let p = sub.cholesky().ok_or(OracleError::SingularSubmatrix)?.inverse();
    Ok(-p[(0, 1)] / (p[(0, 0)] * p[(1, 1)]).sqrt())
}

/// Covariance with the listed nodes removed.
pub fn drop_nodes(s: &DMatrix<f64>, drop: &[usize]) -> DMatrix<f64> {
    let keep: Vec<usize> = (0..s.nrows()).filter(|v| !drop.contains(v)).collect();
    s.select_rows(&keep).select_columns(&keep)
}
