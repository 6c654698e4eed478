//! Small discrete distributions with exact conditional-independence checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use super::OracleError;

/// Tolerance for exact independence tests and for normalisation.
pub const CI_TOL: f64 = 1e-12;
pub const MAX_VARS: usize = 5;
pub const MAX_CARD: usize = 4;

/// Probability table, row-major with the last variable varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePMF {
    card: Vec<usize>,
    p: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Property {
    Composition,
    Intersection,
    SingletonTransitivity,
}

/// Premises that hold while the conclusion fails.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub property: Property,
    pub premises: Vec<String>,
    pub failed: Vec<String>,
}

impl DiscretePMF {
    pub fn new(card: Vec<usize>, p: Vec<f64>) -> Result<Self, OracleError> {
        if card.is_empty() || card.len() > MAX_VARS || card.iter().any(|&c| !(2..=MAX_CARD).contains(&c)) {
            return Err(OracleError::InvalidTable("between 1 and 5 variables with 2 to 4 levels".into()));
        }
        let cells: usize = card.iter().product();
        if p.len() != cells {
            return Err(OracleError::InvalidTable(format!("{} cells expected, got {}", cells, p.len())));
        }
        if p.iter().any(|&x| x.is_nan() || x < 0.0) {
            return Err(OracleError::InvalidTable("negative probability".into()));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > CI_TOL {
            return Err(OracleError::InvalidTable(format!("probabilities sum to {total}")));
        }
        Ok(DiscretePMF { card, p })
    }

    /// Builds a table from a function of the cell's level vector.
    pub fn from_fn(card: Vec<usize>, f: impl Fn(&[usize]) -> f64) -> Result<Self, OracleError> {
        let cells: usize = card.iter().product();
        let mut levels = vec![0; card.len()];
        let mut p = Vec::with_capacity(cells);
        for cell in 0..cells {
            decode(cell, &card, &mut levels);
            p.push(f(&levels));
        }
        Self::new(card, p)
    }

    pub fn num_vars(&self) -> usize {
        self.card.len()
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.card
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    /// Marginal table over `vars` (a bitmask), indexed like a table over the
    /// selected variables in increasing order.
    fn marginal(&self, vars: u32) -> (Vec<usize>, Vec<f64>) {
        let sel: Vec<usize> = (0..self.num_vars()).filter(|v| vars >> v & 1 == 1).collect();
        let card: Vec<usize> = sel.iter().map(|&v| self.card[v]).collect();
        let mut out = vec![0.0; card.iter().product()];
        let mut levels = vec![0; self.num_vars()];
        for (cell, &x) in self.p.iter().enumerate() {
            decode(cell, &self.card, &mut levels);
            out[encode(sel.iter().map(|&v| levels[v]), &card)] += x;
        }
        (sel, out)
    }

    /// Exact test of `a ⊥ b | c` for variable bitmasks:
    /// `p(abc) p(c) = p(ac) p(bc)` in every cell.
    pub fn independent(&self, a: u32, b: u32, c: u32) -> bool {
        let all = a | b | c;
        let (sel, pabc) = self.marginal(all);
        let (sel_c, pc) = self.marginal(c);
        let (sel_ac, pac) = self.marginal(a | c);
        let (sel_bc, pbc) = self.marginal(b | c);
        let card: Vec<usize> = sel.iter().map(|&v| self.card[v]).collect();
        let sub_card = |s: &[usize]| s.iter().map(|&v| self.card[v]).collect::<Vec<_>>();
        let (cc, cac, cbc) = (sub_card(&sel_c), sub_card(&sel_ac), sub_card(&sel_bc));
        let mut levels = vec![0; sel.len()];
        let level_of = |levels: &[usize], v: usize| levels[sel.iter().position(|&x| x == v).unwrap()];
        for (cell, &x) in pabc.iter().enumerate() {
            decode(cell, &card, &mut levels);
            let ic = encode(sel_c.iter().map(|&v| level_of(&levels, v)), &cc);
            let iac = encode(sel_ac.iter().map(|&v| level_of(&levels, v)), &cac);
            let ibc = encode(sel_bc.iter().map(|&v| level_of(&levels, v)), &cbc);
            if (x * pc[ic] - pac[iac] * pbc[ibc]).abs() > CI_TOL {
                return false;
            }
        }
        true
    }

    /// Uniform draw from the probability simplex.
    pub fn random(card: Vec<usize>, rng: &mut impl Rng) -> Self {
        let p = simplex(card.iter().product(), rng);
        DiscretePMF { card, p }
    }
}

/// Normalised unit exponentials, i.e. a flat Dirichlet draw.
fn simplex(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut p: Vec<f64> = (0..len).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    p
}

fn decode(mut cell: usize, card: &[usize], levels: &mut [usize]) {
    for v in (0..card.len()).rev() {
        levels[v] = cell % card[v];
        cell /= card[v];
    }
}

fn encode(levels: impl Iterator<Item = usize>, card: &[usize]) -> usize {
    levels.zip(card).fold(0, |acc, (l, &c)| acc * c + l)
}

fn mask_statement(a: u32, b: u32, c: u32) -> String {
    let list = |m: u32| {
        (0..32)
            .filter(|v| m >> v & 1 == 1)
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    if c == 0 {
        format!("{} _||_ {}", list(a), list(b))
    } else {
        format!("{} _||_ {} | {}", list(a), list(b), list(c))
    }
}

/// Every instance of the property's implication whose premises hold and
/// whose conclusion fails, by exhaustive enumeration of disjoint variable
/// sets.
pub fn check_property(p: &DiscretePMF, property: Property) -> Vec<Violation> {
    let n = p.num_vars();
    let mut out = Vec::new();
    // each variable goes to one of five roles: unused, a, b, c, d
    let roles = 5u32.pow(n as u32);
    for code in 0..roles {
        let mut sets = [0u32; 5];
        let mut x = code;
        for v in 0..n {
            sets[(x % 5) as usize] |= 1 << v;
            x /= 5;
        }
        let [_, a, b, c, d] = sets;
        match property {
            Property::Composition | Property::Intersection => {
                if a == 0 || b == 0 || c == 0 || a > c {
                    // a and c play symmetric roles
                    continue;
                }
                let (p1, p2) = if property == Property::Composition {
                    ((b, a, d), (b, c, d))
                } else {
                    ((b, a, c | d), (b, c, a | d))
                };
                if p.independent(p1.0, p1.1, p1.2) && p.independent(p2.0, p2.1, p2.2) && !p.independent(b, a | c, d) {
                    out.push(Violation {
                        property,
                        premises: vec![mask_statement(p1.0, p1.1, p1.2), mask_statement(p2.0, p2.1, p2.2)],
                        failed: vec![mask_statement(b, a | c, d)],
                    });
                }
            }
            Property::SingletonTransitivity => {
                // a = {i}, b = {k}, c = {o}, d = conditioning set
                let single = |m: u32| m.count_ones() == 1;
                if !single(a) || !single(b) || !single(c) || a > b {
                    continue;
                }
                let (i, k, o) = (a, b, c);
                if p.independent(i, k, d)
                    && p.independent(i, k, o | d)
                    && !p.independent(o, i, d)
                    && !p.independent(o, k, d)
                {
                    out.push(Violation {
                        property,
                        premises: vec![mask_statement(i, k, d), mask_statement(i, k, o | d)],
                        failed: vec![mask_statement(o, i, d), mask_statement(o, k, d)],
                    });
                }
            }
        }
    }
    out
}

/// `p(i, k, o) = w_o p(i | o) p(k | o)` for binary `i`, `k` and an `o` with
/// `w.len()` levels; `a_o = p(i = 1 | o)`, `b_o = p(k = 1 | o)`. Variables are
/// ordered `(i, k, o)`.
pub fn conditional_mixture(w: &[f64], a: &[f64], b: &[f64]) -> Result<DiscretePMF, OracleError> {
    DiscretePMF::from_fn(vec![2, 2, w.len()], |l| {
        let pi = if l[0] == 1 { a[l[2]] } else { 1.0 - a[l[2]] };
        let pk = if l[1] == 1 { b[l[2]] } else { 1.0 - b[l[2]] };
        w[l[2]] * pi * pk
    })
}

/// Random search for a ternary-`o` mixture with `i ⊥ k` and `i ⊥ k | o` while
/// `o` depends on both: draws `w`, `a`, `b_1`, `b_2` and solves `b_3` so that
/// `cov_w(a, b) = 0`.
pub fn search_singleton_transitivity_violation(
    seed: u64,
    max_draws: usize,
) -> Option<(DiscretePMF, Vec<Violation>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..max_draws {
        let w = simplex(3, &mut rng);
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..0.95)).collect();
        let b1 = rng.random_range(0.05..0.95);
        let b2 = rng.random_range(0.05..0.95);
        let abar: f64 = w.iter().zip(&a).map(|(w, a)| w * a).sum();
        let denom = w[2] * (a[2] - abar);
        if denom.abs() < 1e-3 {
            continue;
        }
        let b3 = -(w[0] * b1 * (a[0] - abar) + w[1] * b2 * (a[1] - abar)) / denom;
        if !(0.05..0.95).contains(&b3) {
            continue;
        }
        let Ok(p) = conditional_mixture(&w, &a, &[b1, b2, b3]) else { continue };
        let v = check_property(&p, Property::SingletonTransitivity);
        if !v.is_empty() {
            return Some((p, v));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn independent_product_has_no_violations() {
        let m = [0.3, 0.6, 0.45];
        let p = DiscretePMF::from_fn(vec![2, 2, 2], |l| {
            l.iter().zip(&m).map(|(&x, &q)| if x == 1 { q } else { 1.0 - q }).product()
        })
        .unwrap();
        assert!(p.independent(1, 2, 0));
        assert!(p.independent(1, 6, 0));
        for prop in [Property::Composition, Property::Intersection, Property::SingletonTransitivity] {
            assert!(check_property(&p, prop).is_empty(), "{prop:?}");
        }
    }

    #[test]
    fn known_ternary_violation() {
        let p = conditional_mixture(&[1.0 / 3.0; 3], &[0.2, 0.5, 0.8], &[0.3, 0.7, 0.3]).unwrap();
        // i = var 0, k = var 1, o = var 2
        assert!(p.independent(1, 2, 0));
        assert!(p.independent(1, 2, 4));
        assert!(!p.independent(4, 1, 0));
        assert!(!p.independent(4, 2, 0));
        let v = check_property(&p, Property::SingletonTransitivity);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].premises, ["0 _||_ 1", "0 _||_ 1 | 2"]);
    }

    #[test]
    fn xor_breaks_composition() {
        // k = i xor o with fair independent i, o
        let p = DiscretePMF::from_fn(vec![2, 2, 2], |l| if l[1] == l[0] ^ l[2] { 0.25 } else { 0.0 }).unwrap();
        let v = check_property(&p, Property::Composition);
        assert!(!v.is_empty());
    }

    #[test]
    fn copies_break_intersection() {
        // three copies of one fair coin
        let p = DiscretePMF::from_fn(vec![2, 2, 2], |l| if l[0] == l[1] && l[1] == l[2] { 0.5 } else { 0.0 }).unwrap();
        assert!(!check_property(&p, Property::Intersection).is_empty());
    }

    #[test]
    fn table_validation() {
        assert!(DiscretePMF::new(vec![2], vec![0.5, 0.6]).is_err());
        assert!(DiscretePMF::new(vec![2], vec![1.2, -0.2]).is_err());
        assert!(DiscretePMF::new(vec![5], vec![0.2; 5]).is_err());
        assert!(DiscretePMF::new(vec![2], vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn search_finds_violation() {
        let (_, v) = search_singleton_transitivity_violation(1, 10_000).expect("found");
        assert!(!v.is_empty());
    }
}
