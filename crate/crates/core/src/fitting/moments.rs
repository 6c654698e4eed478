//! Polynomials in independent standard normal variables with exact moments.

use std::collections::BTreeMap;
use std::ops::{Add, Mul};

/// A polynomial over `vars` independent N(0, 1) variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    vars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

fn double_factorial_odd(k: u32) -> f64 {
    // E[z^k] = (k - 1)!! for even k
    (1..k).step_by(2).map(f64::from).product()
}

impl Poly {
    pub fn constant(vars: usize, c: f64) -> Self {
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(vec![0; vars], c);
        }
        Poly { vars, terms }
    }

    /// The base variable `z_i`.
    pub fn var(vars: usize, i: usize) -> Self {
        let mut e = vec![0; vars];
        e[i] = 1;
        Poly { vars, terms: BTreeMap::from([(e, 1.0)]) }
    }

    pub fn scale(&self, c: f64) -> Self {
        Poly { vars: self.vars, terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect() }
    }

    pub fn square(&self) -> Self {
        self * self
    }

    pub fn mean(&self) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                if e.iter().any(|k| k % 2 == 1) {
                    0.0
                } else {
                    c * e.iter().map(|&k| double_factorial_odd(k)).product::<f64>()
                }
            })
            .sum()
    }

    pub fn covariance(&self, other: &Poly) -> f64 {
        (self * other).mean() - self.mean() * other.mean()
    }

    pub fn variance(&self) -> f64 {
        self.covariance(self)
    }

    /// Value at a point of the base variables.
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(z).map(|(&k, x)| x.powi(k as i32)).product::<f64>())
            .sum()
    }
}

impl Add for &Poly {
    type Output = Poly;

    fn add(self, rhs: &Poly) -> Poly {
        assert_eq!(self.vars, rhs.vars);
        let mut terms = self.terms.clone();
        for (e, c) in &rhs.terms {
            *terms.entry(e.clone()).or_insert(0.0) += c;
        }
        terms.retain(|_, c| *c != 0.0);
        Poly { vars: self.vars, terms }
    }
}

impl Mul for &Poly {
    type Output = Poly;

    fn mul(self, rhs: &Poly) -> Poly {
        assert_eq!(self.vars, rhs.vars);
        let mut terms: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                *terms.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        terms.retain(|_, c| *c != 0.0);
        Poly { vars: self.vars, terms }
    }
}

/// Sum of `c_j * p_j` plus a constant.
pub fn linear_combination(vars: usize, constant: f64, parts: &[(f64, &Poly)]) -> Poly {
    parts.iter().fold(Poly::constant(vars, constant), |acc, (c, p)| &acc + &p.scale(*c))
}
