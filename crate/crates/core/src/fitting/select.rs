//! Backward elimination by studentized values.

use serde::{Deserialize, Serialize};

use super::ols::{least_squares, OlsFit};
use super::terms::Term;
use super::{Dataset, FitError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRow {
    pub term: Term,
    pub coeff: f64,
    pub s_coeff: f64,
    pub z_obs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFit {
    pub intercept: f64,
    pub rows: Vec<TermRow>,
    pub r2: f64,
    pub df: usize,
}

impl ModelFit {
    fn from_ols(terms: &[Term], f: &OlsFit) -> Self {
        let rows = terms
            .iter()
            .enumerate()
            .map(|(j, t)| TermRow { term: t.clone(), coeff: f.coeffs[j], s_coeff: f.s_coeffs[j], z_obs: f.z(j) })
            .collect();
        ModelFit { intercept: f.intercept, rows, r2: f.r2, df: f.df }
    }

    pub fn terms(&self) -> Vec<Term> {
        self.rows.iter().map(|r| r.term.clone()).collect()
    }

    pub fn row(&self, t: &Term) -> Option<&TermRow> {
        self.rows.iter().find(|r| &r.term == t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum TraceStep {
    Deleted { term: Term, z_obs: f64 },
    Reentered { term: Term, z_prime: f64 },
    /// Re-entry led back to an earlier model.
    Cycle,
}

/// Studentized value a term would get when added to the selected model,
/// with any main effects it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excluded {
    pub term: Term,
    pub z_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTable {
    pub response: String,
    pub n: usize,
    pub threshold: f64,
    pub starting: ModelFit,
    pub selected: ModelFit,
    pub excluded: Vec<Excluded>,
    pub trace: Vec<TraceStep>,
}

impl RegressionTable {
    pub fn r2_full(&self) -> f64 {
        self.starting.r2
    }

    pub fn r2_sel(&self) -> f64 {
        self.selected.r2
    }

    pub fn selected_terms(&self) -> Vec<Term> {
        self.selected.terms()
    }

    /// Selected terms kept only because a square or interaction needs them.
    pub fn protected_terms(&self) -> Vec<Term> {
        let sel = self.selected_terms();
        sel.iter()
            .filter(|t| sel.iter().any(|u| u.required_main_effects().contains(t)))
            .cloned()
            .collect()
    }
}

/// Fits `y` on `terms`, keeping the given term order in the output.
pub fn fit_terms(data: &Dataset, y: &str, terms: &[Term]) -> Result<ModelFit, FitError> {
    let yv = data.column(y).ok_or_else(|| FitError::UnknownColumn(y.to_string()))?;
    let cols = terms
        .iter()
        .map(|t| t.evaluate(|v| data.column(v)))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
    let f = least_squares(yv, &refs)?;
    Ok(ModelFit::from_ols(terms, &f))
}

/// `current` plus `t` and its missing main effects, in starting-column order.
pub fn with_term(current: &[Term], t: &Term, order: &[Term]) -> Vec<Term> {
    let mut add: Vec<Term> = t.required_main_effects();
    add.push(t.clone());
    let mut out: Vec<Term> = current.to_vec();
    for a in add {
        if !out.contains(&a) {
            out.push(a);
        }
    }
    let pos = |t: &Term| order.iter().position(|o| o == t).unwrap_or(usize::MAX);
    out.sort_by_key(pos);
    out
}

fn deletable(t: &Term, current: &[Term]) -> bool {
    !current.iter().any(|u| u.required_main_effects().contains(t))
}

/// One elimination pass from `start`: repeatedly drop the deletable term
/// with the smallest `|z|` below the threshold. Ties go to the later column.
fn eliminate(
    data: &Dataset,
    y: &str,
    start: Vec<Term>,
    threshold: f64,
    trace: &mut Vec<TraceStep>,
) -> Result<(Vec<Term>, ModelFit), FitError> {
    let mut current = start;
    loop {
        let fit = fit_terms(data, y, &current)?;
        let mut worst: Option<(usize, f64)> = None;
        for (j, row) in fit.rows.iter().enumerate() {
            if !deletable(&row.term, &current) {
                continue;
            }
            let z = row.z_obs.abs();
            if worst.is_none_or(|(_, w)| z <= w) {
                worst = Some((j, z));
            }
        }
        match worst {
            Some((j, z)) if z < threshold => {
                trace.push(TraceStep::Deleted { term: current[j].clone(), z_obs: fit.rows[j].z_obs });
                current.remove(j);
            }
            _ => return Ok((current, fit)),
        }
    }
}

fn excluded_scores(
    data: &Dataset,
    y: &str,
    selected: &[Term],
    order: &[Term],
) -> Result<Vec<Excluded>, FitError> {
    order
        .iter()
        .filter(|t| !selected.contains(t))
        .map(|t| {
            let terms = with_term(selected, t, order);
            let fit = fit_terms(data, y, &terms)?;
            let z_prime = fit.row(t).expect("added term").z_obs;
            Ok(Excluded { term: t.clone(), z_prime })
        })
        .collect()
}

/// Backward elimination from `terms` with a final re-inclusion check: an
/// excluded term whose `z'` reaches the threshold re-enters (the strongest
/// first) and elimination restarts. Stops if a model repeats.
pub fn backward_eliminate(data: &Dataset, y: &str, terms: &[Term], threshold: f64) -> Result<RegressionTable, FitError> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(FitError::InvalidConfig("threshold must be positive".into()));
    }
    // starting model respects the hierarchy
    let mut order: Vec<Term> = Vec::new();
    for t in terms {
        for m in t.required_main_effects().into_iter().chain([t.clone()]) {
            if !order.contains(&m) {
                order.push(m);
            }
        }
    }
    let pos = |t: &Term| {
        let first_base = t.bases()[0].to_string();
        let base_pos = order.iter().position(|o| o == &Term::Linear(first_base.clone()));
        (base_pos.unwrap_or(usize::MAX), !t.is_main_effect())
    };
    // squares and interactions after all main effects, as in the tables
    let mut mains: Vec<Term> = order.iter().filter(|t| t.is_main_effect()).cloned().collect();
    let mut others: Vec<Term> = order.iter().filter(|t| !t.is_main_effect()).cloned().collect();
    others.sort_by_key(pos);
    mains.append(&mut others);
    let order = mains;

    let starting = fit_terms(data, y, &order)?;
    let mut trace = Vec::new();
    let (mut selected, mut fit) = eliminate(data, y, order.clone(), threshold, &mut trace)?;
    let mut seen = vec![selected.clone()];
    let mut excluded = excluded_scores(data, y, &selected, &order)?;
    loop {
        let best = excluded
            .iter()
            .filter(|e| e.z_prime.abs() >= threshold)
            .max_by(|a, b| a.z_prime.abs().total_cmp(&b.z_prime.abs()));
        let Some(best) = best.cloned() else { break };
        trace.push(TraceStep::Reentered { term: best.term.clone(), z_prime: best.z_prime });
        let start = with_term(&selected, &best.term, &order);
        let (next, next_fit) = eliminate(data, y, start, threshold, &mut trace)?;
        if seen.contains(&next) {
            trace.push(TraceStep::Cycle);
            break;
        }
        seen.push(next.clone());
        selected = next;
        fit = next_fit;
        excluded = excluded_scores(data, y, &selected, &order)?;
    }
    Ok(RegressionTable {
        response: y.to_string(),
        n: data.num_rows(),
        threshold,
        starting,
        selected: fit,
        excluded,
        trace,
    })
}

/// Squares and pairwise interactions of `past` that reach the threshold when
/// added one at a time to the linear model.
pub fn screen(data: &Dataset, y: &str, past: &[String], threshold: f64) -> Result<Vec<Term>, FitError> {
    let linear: Vec<Term> = past.iter().map(|v| Term::Linear(v.clone())).collect();
    let mut candidates: Vec<Term> = past.iter().map(|v| Term::Square(v.clone())).collect();
    for (i, a) in past.iter().enumerate() {
        for b in &past[i + 1..] {
            candidates.push(Term::Interaction(a.clone(), b.clone()));
        }
    }
    let mut out = Vec::new();
    for c in candidates {
        let mut terms = linear.clone();
        terms.push(c.clone());
        let fit = fit_terms(data, y, &terms)?;
        if fit.row(&c).expect("added").z_obs.abs() >= threshold {
            out.push(c);
        }
    }
    Ok(out)
}
