//! Sequences of regressions: per-response least squares, backward
//! elimination, edge tests and construction of the fitted graph.

pub mod config;
pub mod dataset;
pub mod edges;
pub mod moments;
pub mod ols;
pub mod report;
pub mod select;
pub mod simulate;
pub mod terms;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, GraphJson, RegressionGraph};
use crate::par::{self, Execution};

pub use config::{Blocks, FitConfig, DEFAULT_THRESHOLD};
pub use dataset::{Dataset, MissingCell};
pub use edges::{dashed_edge_test, full_edge_test, DashedTest, FullTest};
pub use ols::{least_squares, OlsFit};
pub use select::{backward_eliminate, fit_terms, screen, RegressionTable};
pub use simulate::{simulate_mannheim, MannheimModel};
pub use terms::{wilkinson, Term};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("{rows} rows are too few for {columns} fitted columns")]
    TooFewRows { rows: usize, columns: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("invalid term `{0}`")]
    InvalidTerm(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("{} missing value(s), first at row {}, column `{}`", .0.len(), .0[0].row, .0[0].column)]
    MissingValues(Vec<MissingCell>),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub config: FitConfig,
    pub n: usize,
    /// One table per response, latest block first.
    pub tables: Vec<RegressionTable>,
    /// Tables for context variables regressed on the rest of the context.
    pub context_tables: Vec<RegressionTable>,
    pub dashed: Vec<DashedTest>,
    pub full: Vec<FullTest>,
    #[serde(serialize_with = "graph_as_json", deserialize_with = "graph_from_json")]
    pub graph: RegressionGraph,
}

fn graph_as_json<S: serde::Serializer>(g: &RegressionGraph, s: S) -> Result<S::Ok, S::Error> {
    GraphJson::from(g).serialize(s)
}

fn graph_from_json<'de, D: serde::Deserializer<'de>>(d: D) -> Result<RegressionGraph, D::Error> {
    RegressionGraph::try_from(GraphJson::deserialize(d)?).map_err(serde::de::Error::custom)
}

impl FitReport {
    pub fn from_json(s: &str) -> Result<Self, FitError> {
        serde_json::from_str(s).map_err(|e| FitError::InvalidData(format!("report json: {e}")))
    }

    pub fn table(&self, response: &str) -> Option<&RegressionTable> {
        self.tables.iter().chain(&self.context_tables).find(|t| t.response == response)
    }

    /// Every excluded term of every table, with its `z'` recomputed by a
    /// separate fit. Used to audit the report.
    pub fn recompute_z_prime(&self, data: &Dataset) -> Result<Vec<(String, Term, f64, f64)>, FitError> {
        let mut out = Vec::new();
        for t in self.tables.iter().chain(&self.context_tables) {
            let selected = t.selected_terms();
            let order = t.starting.terms();
            for ex in &t.excluded {
                let fit = fit_terms(data, &t.response, &select::with_term(&selected, &ex.term, &order))?;
                let z = fit.row(&ex.term).expect("added term").z_obs;
                out.push((t.response.clone(), ex.term.clone(), ex.z_prime, z));
            }
        }
        Ok(out)
    }
}

fn starting_terms(data: &Dataset, cfg: &FitConfig, response: &str, past: &[String]) -> Result<Vec<Term>, FitError> {
    let mut terms: Vec<Term> = past.iter().map(|v| Term::Linear(v.clone())).collect();
    let mut extra: Vec<Term> = cfg.candidates(response).to_vec();
    if cfg.screening {
        extra.extend(screen(data, response, past, cfg.threshold)?);
    }
    for t in extra {
        if !terms.contains(&t) {
            terms.push(t);
        }
    }
    Ok(terms)
}

/// Runs the whole selection procedure on `data`.
pub fn fit(data: &Dataset, cfg: &FitConfig, exec: Execution) -> Result<FitReport, FitError> {
    cfg.validate()?;
    let mut owned;
    let mut data = data;
    for v in cfg.blocks.variables() {
        if data.column(&v).is_none() {
            return Err(FitError::UnknownColumn(v));
        }
    }
    if cfg.standardize {
        owned = data.select(&cfg.blocks.variables())?;
        owned.standardize(&vec![true; owned.num_rows()])?;
        data = &owned;
    }
    let responses: Vec<String> = cfg.blocks.responses.iter().flatten().cloned().collect();
    let context = &cfg.blocks.context;
    let jobs: Vec<(String, Vec<String>)> = responses
        .iter()
        .map(|r| (r.clone(), cfg.blocks.past_of(r)))
        .chain(cfg.context_responses.iter().map(|r| (r.clone(), context.iter().filter(|v| *v != r).cloned().collect())))
        .collect();
    let mut tables = par::map(exec, jobs, |(r, past)| {
        let terms = starting_terms(data, cfg, &r, &past)?;
        backward_eliminate(data, &r, &terms, cfg.threshold)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let context_tables = tables.split_off(responses.len());

    let mut dashed = Vec::new();
    for block in &cfg.blocks.responses {
        for (i, a) in block.iter().enumerate() {
            for b in &block[i + 1..] {
                let ta = tables.iter().find(|t| &t.response == a).expect("fitted");
                let tb = tables.iter().find(|t| &t.response == b).expect("fitted");
                let mut union = ta.selected_terms();
                for t in tb.selected_terms() {
                    if !union.contains(&t) {
                        union.push(t);
                    }
                }
                dashed.push(dashed_edge_test(data, a, b, &union, cfg.threshold)?);
            }
        }
    }
    let full = if context.len() >= 2 {
        full_edge_test(data, context, |v| cfg.candidates(v).to_vec(), cfg.threshold, exec)?
    } else {
        Vec::new()
    };
    let graph = build_fitted_graph(&tables, &dashed, &full, &cfg.blocks)?;
    Ok(FitReport { config: cfg.clone(), n: data.num_rows(), tables, context_tables, dashed, full, graph })
}

/// One arrow per selected regressor variable, plus the tested dashed and
/// full lines. A square or interaction maps to arrows from its base variables.
pub fn build_fitted_graph(
    tables: &[RegressionTable],
    dashed: &[DashedTest],
    full: &[FullTest],
    blocks: &Blocks,
) -> Result<RegressionGraph, FitError> {
    let mut b = blocks.builder();
    let mut seen: Vec<(String, String)> = Vec::new();
    for t in tables {
        for term in t.selected_terms() {
            for base in term.bases() {
                let key = (base.to_string(), t.response.clone());
                if !seen.contains(&key) {
                    b = b.arrow(base, t.response.as_str());
                    seen.push(key);
                }
            }
        }
    }
    for d in dashed.iter().filter(|d| d.present) {
        b = b.dashed(d.a.as_str(), d.b.as_str());
    }
    for f in full.iter().filter(|f| f.present) {
        b = b.full(f.a.as_str(), f.b.as_str());
    }
    Ok(b.build()?)
}
