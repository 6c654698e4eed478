//! Synthetic data for the child development study design.
//!
//! Each response follows its selected regression equation. Residual
//! variances give the target population R², and residuals of the two joint
//! responses are correlated so that the within-block dependence has the
//! target studentized value at the reference sample size. The two context
//! sources `E` and `H` are correlated so that they are independent given `Xr`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::moments::{linear_combination, Poly};
use super::terms::Term;
use super::Dataset;

/// Sample size the dashed-edge targets refer to.
pub const REFERENCE_N: usize = 347;
/// Column order of the simulated data.
pub const COLUMNS: [&str; 8] = ["Y8", "X8", "Y4", "X4", "Yr", "Xr", "E", "H"];

struct EquationSpec {
    response: &'static str,
    constant: f64,
    terms: &'static [(&'static str, f64)],
    r2: f64,
}

/// Generating equations, sources first.
const EQUATIONS: [EquationSpec; 6] = [
    EquationSpec { response: "Xr", constant: 0.22, terms: &[("E", 0.12), ("H", 0.48)], r2: 0.35 },
    EquationSpec { response: "Yr", constant: -0.21, terms: &[("E", 0.55), ("E^2", 0.16)], r2: 0.56 },
    EquationSpec { response: "Y4", constant: -0.29, terms: &[("Yr", 0.36), ("Xr", 0.18), ("Xr^2", 0.14)], r2: 0.25 },
    EquationSpec { response: "X4", constant: -0.47, terms: &[("Yr", 0.28), ("Xr", 0.50), ("Xr^2", 0.23)], r2: 0.36 },
    EquationSpec {
        response: "Y8",
        constant: 0.03,
        terms: &[("Y4", 0.78), ("X4", 0.07), ("X4^2", 0.10), ("E", 0.12), ("H", 0.12)],
        r2: 0.67,
    },
    EquationSpec { response: "X8", constant: 0.26, terms: &[("X4", 0.33), ("X4^2", 0.05), ("Xr", 0.19)], r2: 0.36 },
];

/// Joint responses with the studentized value of their dependence.
const DASHED_TARGETS: [(&str, &str, f64); 2] = [("Y4", "X4", 7.0), ("Y8", "X8", 2.4)];

// base normal variables
const Z_E: usize = 0;
const Z_H: usize = 1;
const BASE_VARS: usize = 8;

#[derive(Debug, Clone, Serialize)]
pub struct Equation {
    pub response: String,
    pub constant: f64,
    pub terms: Vec<(Term, f64)>,
    pub residual_sd: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualPair {
    pub a: String,
    pub b: String,
    pub z_target: f64,
    pub df: usize,
    pub correlation: f64,
}

/// Calibrated generator with exact population moments.
#[derive(Debug, Clone, Serialize)]
pub struct MannheimModel {
    /// Correlation of the two context sources.
    pub rho_eh: f64,
    pub equations: Vec<Equation>,
    pub pairs: Vec<ResidualPair>,
    #[serde(skip)]
    polys: Vec<(String, Poly)>,
}

fn term_poly(t: &Term, lookup: &[(String, Poly)]) -> Poly {
    let get = |v: &str| &lookup.iter().find(|(n, _)| n == v).expect("generated earlier").1;
    match t {
        Term::Linear(a) => get(a).clone(),
        Term::Square(a) => get(a).square(),
        Term::Interaction(a, b) => get(a) * get(b),
    }
}

fn sources(rho: f64) -> (Poly, Poly) {
    let e = Poly::var(BASE_VARS, Z_E);
    let h = linear_combination(BASE_VARS, 0.0, &[(rho, &e), ((1.0 - rho * rho).sqrt(), &Poly::var(BASE_VARS, Z_H))]);
    (e, h)
}

/// Systematic part of an equation given earlier variables.
fn systematic(eq: &EquationSpec, known: &[(String, Poly)]) -> Poly {
    let parts: Vec<(f64, Poly)> =
        eq.terms.iter().map(|(t, c)| (*c, term_poly(&Term::parse(t).expect("valid term"), known))).collect();
    let refs: Vec<(f64, &Poly)> = parts.iter().map(|(c, p)| (*c, p)).collect();
    linear_combination(BASE_VARS, eq.constant, &refs)
}

fn residual_sd(sys: &Poly, r2: f64) -> f64 {
    (sys.variance() * (1.0 - r2) / r2).sqrt()
}

/// Cov(E, H | Xr) for source correlation `rho`.
fn conditional_cov_eh(rho: f64) -> f64 {
    let (e, h) = sources(rho);
    let known = vec![("E".to_string(), e.clone()), ("H".to_string(), h.clone())];
    let sys = systematic(&EQUATIONS[0], &known);
    let sd = residual_sd(&sys, EQUATIONS[0].r2);
    let xr = &sys + &Poly::var(BASE_VARS, 2).scale(sd);
    e.covariance(&h) - e.covariance(&xr) * h.covariance(&xr) / xr.variance()
}

fn solve_rho() -> f64 {
    let (mut lo, mut hi) = (0.0, 0.999);
    debug_assert!(conditional_cov_eh(lo) < 0.0 && conditional_cov_eh(hi) > 0.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if conditional_cov_eh(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn union_size(a: &str, b: &str) -> usize {
    let mut bases: Vec<Term> = Vec::new();
    for eq in EQUATIONS.iter().filter(|e| e.response == a || e.response == b) {
        for (t, _) in eq.terms {
            let t = Term::parse(t).expect("valid term");
            for u in t.required_main_effects().into_iter().chain([t]) {
                if !bases.contains(&u) {
                    bases.push(u);
                }
            }
        }
    }
    bases.len()
}

impl MannheimModel {
    pub fn new() -> Self {
        let rho_eh = solve_rho();
        let (e, h) = sources(rho_eh);
        let mut polys = vec![("E".to_string(), e), ("H".to_string(), h)];
        let mut equations = Vec::new();
        let pairs: Vec<ResidualPair> = DASHED_TARGETS
            .iter()
            .map(|&(a, b, z)| {
                // regression of a on b plus the union of both regressor sets
                let df = REFERENCE_N - union_size(a, b) - 2;
                let correlation = z / (z * z + df as f64).sqrt();
                ResidualPair { a: a.into(), b: b.into(), z_target: z, df, correlation }
            })
            .collect();
        let mut next_noise = 2;
        let mut noise_of: Vec<(String, Poly)> = Vec::new();
        for eq in &EQUATIONS {
            let sys = systematic(eq, &polys);
            let sd = residual_sd(&sys, eq.r2);
            let noise = if let Some(p) = pairs.iter().find(|p| p.b == eq.response) {
                let first = &noise_of.iter().find(|(n, _)| *n == p.a).expect("pair order").1;
                let own = Poly::var(BASE_VARS, next_noise);
                next_noise += 1;
                let r = p.correlation;
                linear_combination(BASE_VARS, 0.0, &[(r, first), ((1.0 - r * r).sqrt(), &own)])
            } else {
                let own = Poly::var(BASE_VARS, next_noise);
                next_noise += 1;
                own
            };
            noise_of.push((eq.response.to_string(), noise.clone()));
            polys.push((eq.response.to_string(), &sys + &noise.scale(sd)));
            equations.push(Equation {
                response: eq.response.into(),
                constant: eq.constant,
                terms: eq.terms.iter().map(|(t, c)| (Term::parse(t).expect("valid term"), *c)).collect(),
                residual_sd: sd,
                r2: eq.r2,
            });
        }
        debug_assert_eq!(next_noise, BASE_VARS);
        MannheimModel { rho_eh, equations, pairs, polys }
    }

    /// Exact population mean of every simulated column.
    pub fn population_means(&self) -> Vec<(String, f64)> {
        COLUMNS.iter().map(|c| (c.to_string(), self.poly(c).mean())).collect()
    }

    /// Exact population covariance of two columns.
    pub fn covariance(&self, a: &str, b: &str) -> f64 {
        self.poly(a).covariance(self.poly(b))
    }

    /// Exact population covariance of two regression terms.
    pub fn term_covariance(&self, a: &Term, b: &Term) -> f64 {
        term_poly(a, &self.polys).covariance(&term_poly(b, &self.polys))
    }

    fn poly(&self, name: &str) -> &Poly {
        &self.polys.iter().find(|(n, _)| n == name).expect("known column").1
    }

    pub fn equation(&self, response: &str) -> Option<&Equation> {
        self.equations.iter().find(|e| e.response == response)
    }

    pub fn sample(&self, seed: u64, n: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cols: Vec<(String, Vec<f64>)> = ["E", "H"].iter().map(|c| (c.to_string(), vec![0.0; n])).collect();
        for eq in &self.equations {
            cols.push((eq.response.clone(), vec![0.0; n]));
        }
        let index = |name: &str, cols: &[(String, Vec<f64>)]| cols.iter().position(|(c, _)| c == name).unwrap();
        let pair_rows: Vec<(usize, usize, f64)> = self
            .pairs
            .iter()
            .map(|p| (index(&p.a, &cols), index(&p.b, &cols), p.correlation))
            .collect();
        let mut z = [0.0; BASE_VARS];
        let mut noise = vec![0.0; cols.len()];
        let sqrt_rho = (1.0 - self.rho_eh * self.rho_eh).sqrt();
        for r in 0..n {
            for v in z.iter_mut() {
                *v = StandardNormal.sample(&mut rng);
            }
            cols[0].1[r] = z[Z_E];
            cols[1].1[r] = self.rho_eh * z[Z_E] + sqrt_rho * z[Z_H];
            for (j, v) in noise.iter_mut().enumerate().skip(2) {
                *v = z[j];
            }
            for &(a, b, rho) in &pair_rows {
                noise[b] = rho * noise[a] + (1.0 - rho * rho).sqrt() * noise[b];
            }
            for (j, eq) in self.equations.iter().enumerate() {
                let col = j + 2;
                let mut y = eq.constant + eq.residual_sd * noise[col];
                for (t, c) in &eq.terms {
                    let val = |v: &str| cols[index(v, &cols)].1[r];
                    y += c * match t {
                        Term::Linear(a) => val(a),
                        Term::Square(a) => val(a).powi(2),
                        Term::Interaction(a, b) => val(a) * val(b),
                    };
                }
                cols[col].1[r] = y;
            }
        }
        let columns = COLUMNS.iter().map(|c| cols[index(c, &cols)].1.clone()).collect();
        Dataset::new(COLUMNS.iter().map(|c| c.to_string()).collect(), columns).expect("consistent columns")
    }
}

impl Default for MannheimModel {
    fn default() -> Self {
        Self::new()
    }
}

/// Draws `n` rows from the calibrated generator. Deterministic given `seed`.
pub fn simulate_mannheim(seed: u64, n: usize) -> Dataset {
    MannheimModel::new().sample(seed, n)
}
