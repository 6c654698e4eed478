//! Fitting configuration, read from TOML.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::terms::Term;
use super::FitError;
use crate::graph::{parse_graph, GraphBuilder};

pub const DEFAULT_THRESHOLD: f64 = 2.58;

/// Response blocks from latest to earliest, then the context block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blocks {
    pub responses: Vec<Vec<String>>,
    pub context: Vec<String>,
}

impl Blocks {
    /// Parses the header syntax of the graph text format, e.g.
    /// `Y8 X8 | Y4 X4 || Yr Xr E H`.
    pub fn parse(s: &str) -> Result<Blocks, FitError> {
        let g = parse_graph(&format!("blocks: {s}")).map_err(|e| FitError::InvalidConfig(e.to_string()))?;
        let ord = g.ordering();
        let names = |b: &[usize]| b.iter().map(|&v| g.label(v).to_string()).collect::<Vec<_>>();
        Ok(Blocks {
            responses: ord.response_blocks().iter().map(|b| names(b)).collect(),
            context: names(ord.context()),
        })
    }

    /// Every variable in a block after the one holding `var`.
    pub fn past_of(&self, var: &str) -> Vec<String> {
        let j = self.responses.iter().position(|b| b.iter().any(|v| v == var));
        match j {
            Some(j) => self.responses[j + 1..].iter().flatten().chain(&self.context).cloned().collect(),
            None => Vec::new(),
        }
    }

    pub fn variables(&self) -> Vec<String> {
        self.responses.iter().flatten().chain(&self.context).cloned().collect()
    }

    pub fn builder(&self) -> GraphBuilder {
        let mut b = GraphBuilder::default();
        for block in &self.responses {
            b = b.response_block(block.iter().cloned());
        }
        if !self.context.is_empty() {
            b = b.context_block(self.context.iter().cloned());
        }
        b
    }
}

impl std::fmt::Display for Blocks {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let r: Vec<String> = self.responses.iter().map(|b| b.join(" ")).collect();
        write!(f, "{}", r.join(" | "))?;
        if !self.context.is_empty() {
            write!(f, " || {}", self.context.join(" "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    blocks: String,
    #[serde(default = "default_threshold")]
    threshold: f64,
    #[serde(default)]
    screening: bool,
    #[serde(default)]
    standardize: bool,
    context_responses: Option<Vec<String>>,
    #[serde(default)]
    candidate_terms: BTreeMap<String, Vec<String>>,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub blocks: Blocks,
    pub threshold: f64,
    pub screening: bool,
    /// Rescale all columns to mean 0 and sd 1 before fitting.
    pub standardize: bool,
    /// Context variables that get a regression table on the rest of the context.
    pub context_responses: Vec<String>,
    /// Nonlinear terms added to a response's starting model.
    pub candidate_terms: BTreeMap<String, Vec<Term>>,
}

impl FitConfig {
    pub fn new(blocks: Blocks) -> Self {
        FitConfig {
            context_responses: blocks.context.clone(),
            blocks,
            threshold: DEFAULT_THRESHOLD,
            screening: false,
            standardize: false,
            candidate_terms: BTreeMap::new(),
        }
    }

    pub fn from_toml(src: &str) -> Result<Self, FitError> {
        let raw: RawConfig = toml::from_str(src).map_err(|e| FitError::InvalidConfig(e.to_string()))?;
        let blocks = Blocks::parse(&raw.blocks)?;
        let vars = blocks.variables();
        let known = |v: &String| {
            if vars.contains(v) {
                Ok(())
            } else {
                Err(FitError::InvalidConfig(format!("`{v}` is not in any block")))
            }
        };
        let mut candidate_terms = BTreeMap::new();
        for (resp, terms) in raw.candidate_terms {
            known(&resp)?;
            let past = if blocks.context.contains(&resp) {
                blocks.context.iter().filter(|v| **v != resp).cloned().collect()
            } else {
                blocks.past_of(&resp)
            };
            let parsed = terms.iter().map(|t| Term::parse(t)).collect::<Result<Vec<_>, _>>()?;
            for t in &parsed {
                if let Some(b) = t.bases().into_iter().find(|b| !past.iter().any(|p| p == b)) {
                    return Err(FitError::InvalidConfig(format!("term `{t}` for `{resp}` uses `{b}`, not in its past")));
                }
            }
            candidate_terms.insert(resp, parsed);
        }
        let context_responses = raw.context_responses.unwrap_or_else(|| blocks.context.clone());
        for v in &context_responses {
            if !blocks.context.contains(v) {
                return Err(FitError::InvalidConfig(format!("`{v}` is not a context variable")));
            }
        }
        let cfg = FitConfig {
            blocks,
            threshold: raw.threshold,
            screening: raw.screening,
            standardize: raw.standardize,
            context_responses,
            candidate_terms,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(FitError::InvalidConfig(format!("threshold must be positive, got {}", self.threshold)));
        }
        Ok(())
    }

    pub fn candidates(&self, response: &str) -> &[Term] {
        self.candidate_terms.get(response).map_or(&[], Vec::as_slice)
    }
}
