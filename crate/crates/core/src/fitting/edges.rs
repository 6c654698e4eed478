//! Tests for dashed lines between joint responses and full lines between
//! context variables.

use serde::{Deserialize, Serialize};

use super::select::{fit_terms, with_term};
use super::terms::Term;
use super::{Dataset, FitError};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DashedTest {
    pub a: String,
    pub b: String,
    /// Studentized coefficient of `b` in the regression of `a`.
    pub z_obs: f64,
    pub present: bool,
    pub given: Vec<Term>,
}

/// Regresses `a` on `b` and the combined selected regressors of both.
pub fn dashed_edge_test(
    data: &Dataset,
    a: &str,
    b: &str,
    selected: &[Term],
    threshold: f64,
) -> Result<DashedTest, FitError> {
    let mut given: Vec<Term> = Vec::new();
    for t in selected {
        given = with_term(&given, t, selected);
    }
    if given.iter().any(|t| t.involves(a) || t.involves(b)) {
        return Err(FitError::InvalidData(format!("`{a}` and `{b}` must not be among their own regressors")));
    }
    let mut terms = vec![Term::Linear(b.to_string())];
    terms.extend(given.iter().cloned());
    let fit = fit_terms(data, a, &terms)?;
    let z_obs = fit.rows[0].z_obs;
    Ok(DashedTest { a: a.into(), b: b.into(), z_obs, present: z_obs.abs() >= threshold, given })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullTest {
    pub a: String,
    pub b: String,
    /// Largest studentized value among `b`'s terms in the regression of `a`.
    pub z_ab: f64,
    /// Largest studentized value among `a`'s terms in the regression of `b`.
    pub z_ba: f64,
    pub present: bool,
}

/// Signed value with the largest magnitude among terms based on `var`.
fn strongest(rows: &[(Term, f64)], var: &str) -> f64 {
    rows.iter()
        .filter(|(t, _)| t.involves(var))
        .map(|(_, z)| *z)
        .max_by(|x, y| x.abs().total_cmp(&y.abs()))
        .unwrap_or(0.0)
}

/// Regresses each context variable on all others plus its candidate terms.
/// A pair is joined when either direction reaches the threshold.
pub fn full_edge_test(
    data: &Dataset,
    context: &[String],
    candidates: impl Fn(&str) -> Vec<Term> + Sync,
    threshold: f64,
    exec: Execution,
) -> Result<Vec<FullTest>, FitError> {
    let fits = par::map(exec, context.to_vec(), |v| {
        let others: Vec<Term> = context.iter().filter(|u| **u != v).map(|u| Term::Linear(u.clone())).collect();
        let mut terms = others.clone();
        for t in candidates(&v) {
            terms = with_term(&terms, &t, &others.iter().cloned().chain([t.clone()]).collect::<Vec<_>>());
        }
        fit_terms(data, &v, &terms).map(|f| f.rows.into_iter().map(|r| (r.term, r.z_obs)).collect::<Vec<_>>())
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for i in 0..context.len() {
        for k in i + 1..context.len() {
            let z_ab = strongest(&fits[i], &context[k]);
            let z_ba = strongest(&fits[k], &context[i]);
            let present = z_ab.abs() >= threshold || z_ba.abs() >= threshold;
            out.push(FullTest { a: context[i].clone(), b: context[k].clone(), z_ab, z_ba, present });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    #[test]
    fn independent_context_has_no_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let cols = (0..3).map(|_| normals(&mut rng, 500)).collect();
        let d = Dataset::new(names.clone(), cols).unwrap();
        let t = full_edge_test(&d, &names, |_| Vec::new(), 3.5, Execution::Sequential).unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.iter().all(|e| !e.present));
    }

    #[test]
    fn chain_context_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 1000;
        let a = normals(&mut rng, n);
        let b: Vec<f64> = a.iter().map(|x| 0.7 * x + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let c: Vec<f64> = b.iter().map(|x| 0.7 * x + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let d = Dataset::new(names.clone(), vec![a, b, c]).unwrap();
        let t = full_edge_test(&d, &names, |_| Vec::new(), 2.58, Execution::Parallel).unwrap();
        let present: Vec<(&str, &str)> = t.iter().filter(|e| e.present).map(|e| (&e.a[..], &e.b[..])).collect();
        assert_eq!(present, [("a", "b"), ("b", "c")]);
    }

    #[test]
    fn collinear_context_rank_deficient() {
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let z = vec![0.3, -1.0, 0.2, 0.9, -0.4, 0.1];
        let names: Vec<String> = ["x", "y", "z"].map(String::from).to_vec();
        let d = Dataset::new(names.clone(), vec![x, y, z]).unwrap();
        let r = full_edge_test(&d, &names, |_| Vec::new(), 2.58, Execution::Sequential);
        assert_eq!(r.unwrap_err(), FitError::RankDeficient);
    }

    #[test]
    fn dashed_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n = 400;
        let x = normals(&mut rng, n);
        let u = normals(&mut rng, n);
        let a: Vec<f64> = x.iter().zip(&u).map(|(x, u)| x + u).collect();
        let b: Vec<f64> = x.iter().zip(&u).map(|(x, u)| x + 0.8 * u + Distribution::<f64>::sample(&StandardNormal, &mut rng)).collect();
        let d = Dataset::new(["a", "b", "x"].map(String::from).to_vec(), vec![a, b, x]).unwrap();
        let t = dashed_edge_test(&d, "a", "b", &[Term::Linear("x".into())], 2.58).unwrap();
        assert!(t.present);
        assert!(dashed_edge_test(&d, "a", "b", &[Term::Linear("a".into())], 2.58).is_err());
    }
}
