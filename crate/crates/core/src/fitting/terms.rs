//! Regression terms and Wilkinson-style formulas.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::FitError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Linear(String),
    Square(String),
    Interaction(String, String),
}

impl Term {
    /// Parses `X`, `X^2`, `A*B` or `A:B`.
    pub fn parse(s: &str) -> Result<Term, FitError> {
        let s = s.trim();
        let bad = || FitError::InvalidTerm(s.to_string());
        if let Some(base) = s.strip_suffix("^2") {
            let base = base.trim().trim_start_matches('(').trim_end_matches(')').trim();
            return if base.is_empty() { Err(bad()) } else { Ok(Term::Square(base.to_string())) };
        }
        if let Some((a, b)) = s.split_once('*').or_else(|| s.split_once(':')) {
            let (a, b) = (a.trim(), b.trim());
            if a.is_empty() || b.is_empty() || a == b {
                return Err(bad());
            }
            return Ok(Term::Interaction(a.to_string(), b.to_string()));
        }
        if s.is_empty() || s.contains(char::is_whitespace) {
            return Err(bad());
        }
        Ok(Term::Linear(s.to_string()))
    }

    pub fn bases(&self) -> Vec<&str> {
        match self {
            Term::Linear(a) | Term::Square(a) => vec![a],
            Term::Interaction(a, b) => vec![a, b],
        }
    }

    pub fn is_main_effect(&self) -> bool {
        matches!(self, Term::Linear(_))
    }

    /// Main effects a model containing this term must also contain.
    pub fn required_main_effects(&self) -> Vec<Term> {
        match self {
            Term::Linear(_) => Vec::new(),
            _ => self.bases().into_iter().map(|b| Term::Linear(b.to_string())).collect(),
        }
    }

    pub fn involves(&self, var: &str) -> bool {
        self.bases().contains(&var)
    }

    /// Column values, given a lookup from variable name to column.
    pub fn evaluate<'a>(&self, column: impl Fn(&str) -> Option<&'a [f64]>) -> Result<Vec<f64>, FitError> {
        let col = |v: &str| column(v).ok_or_else(|| FitError::UnknownColumn(v.to_string()));
        Ok(match self {
            Term::Linear(a) => col(a)?.to_vec(),
            Term::Square(a) => col(a)?.iter().map(|x| x * x).collect(),
            Term::Interaction(a, b) => col(a)?.iter().zip(col(b)?).map(|(x, y)| x * y).collect(),
        })
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Linear(a) => write!(f, "{a}"),
            Term::Square(a) => write!(f, "{a}^2"),
            Term::Interaction(a, b) => write!(f, "{a}*{b}"),
        }
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Term::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Compact formula for a selected term set: main effects implied by a square
/// or interaction are not printed, and terms appear in the order of their
/// first base variable in `order`. An empty model prints as `1`.
pub fn wilkinson(selected: &[Term], order: &[String]) -> String {
    let implied: Vec<Term> = selected.iter().flat_map(Term::required_main_effects).collect();
    let rank = |t: &Term| {
        let first = t
            .bases()
            .iter()
            .map(|b| order.iter().position(|o| o == b).unwrap_or(usize::MAX))
            .min()
            .unwrap_or(usize::MAX);
        let kind = match t {
            Term::Linear(_) => 0,
            Term::Square(_) => 1,
            Term::Interaction(..) => 2,
        };
        (first, kind)
    };
    let mut shown: Vec<&Term> = selected.iter().filter(|t| !implied.contains(t)).collect();
    shown.sort_by_key(|t| rank(t));
    if shown.is_empty() {
        return "1".to_string();
    }
    shown.iter().map(|t| t.to_string()).collect::<Vec<_>>().join("+")
}
