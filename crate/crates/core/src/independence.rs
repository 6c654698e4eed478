//! Conditional independences implied by a regression graph.
//!
//! A path is open given `c` when every collider on it (both edge ends at the
//! node are arrowheads or dashed ends) has a descendant in `c` and every other
//! inner node is outside `c`. The default decision procedure is a reachability
//! search over `(node, mark on arrival)` states; a brute-force simple-path
//! enumeration is kept as the reference implementation.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::graph::{Edge, EdgeKind, Mark, RegressionGraph, VConfiguration, VKind};
use crate::par::{self, Execution};

/// Largest graph `implied_structure` accepts by default.
pub const DEFAULT_STRUCTURE_BOUND: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IndependenceError {
    #[error("statement sets are not pairwise disjoint")]
    NodesNotDisjoint,
    #[error("statement needs nonempty left and right sets")]
    EmptySide,
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("graph has {nodes} nodes, structure enumeration is limited to {bound}")]
    GraphTooLarge { nodes: usize, bound: usize },
    #[error("no witness set for V {0}; the separation criterion is inconsistent")]
    NoWitnessFound(String),
    #[error("cannot parse statement `{0}`; expected `A _||_ B | C`")]
    Syntax(String),
}

/// `a ⊥ b | c` over node indices of a particular graph.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndependenceStatement {
    pub a: BTreeSet<usize>,
    pub b: BTreeSet<usize>,
    pub c: BTreeSet<usize>,
}

impl IndependenceStatement {
    pub fn new(
        a: impl IntoIterator<Item = usize>,
        b: impl IntoIterator<Item = usize>,
        c: impl IntoIterator<Item = usize>,
    ) -> Result<Self, IndependenceError> {
        let s = IndependenceStatement {
            a: a.into_iter().collect(),
            b: b.into_iter().collect(),
            c: c.into_iter().collect(),
        };
        if s.a.is_empty() || s.b.is_empty() {
            return Err(IndependenceError::EmptySide);
        }
        if !s.a.is_disjoint(&s.b) || !s.a.is_disjoint(&s.c) || !s.b.is_disjoint(&s.c) {
            return Err(IndependenceError::NodesNotDisjoint);
        }
        Ok(s)
    }

    pub(crate) fn pairwise(i: usize, k: usize, c: impl IntoIterator<Item = usize>) -> Self {
        IndependenceStatement {
            a: [i].into(),
            b: [k].into(),
            c: c.into_iter().collect(),
        }
    }

    pub fn is_pairwise(&self) -> bool {
        self.a.len() == 1 && self.b.len() == 1
    }

    pub fn swapped(&self) -> Self {
        IndependenceStatement {
            a: self.b.clone(),
            b: self.a.clone(),
            c: self.c.clone(),
        }
    }

    /// Parses `A _||_ B | C` with comma separated label lists; `| C` is
    /// optional.
    pub fn parse(g: &RegressionGraph, text: &str) -> Result<Self, IndependenceError> {
        let (lhs, rest) = text
            .split_once("_||_")
            .or_else(|| text.split_once('⊥'))
            .ok_or_else(|| IndependenceError::Syntax(text.to_string()))?;
        let (rhs, cond) = match rest.split_once('|') {
            Some((r, c)) => (r, c),
            None => (rest, ""),
        };
        let set = |s: &str| -> Result<Vec<usize>, IndependenceError> {
            s.split(|ch: char| ch == ',' || ch.is_whitespace() || ch == '{' || ch == '}')
                .filter(|t| !t.is_empty())
                .map(|t| g.index_of(t).ok_or_else(|| IndependenceError::UnknownNode(t.to_string())))
                .collect()
        };
        Self::new(set(lhs)?, set(rhs)?, set(cond)?)
    }

    pub fn display(&self, g: &RegressionGraph) -> String {
        let fmt = |s: &BTreeSet<usize>| s.iter().map(|&v| g.label(v)).collect::<Vec<_>>().join(",");
        if self.c.is_empty() {
            format!("{} _||_ {}", fmt(&self.a), fmt(&self.b))
        } else {
            format!("{} _||_ {} | {}", fmt(&self.a), fmt(&self.b), fmt(&self.c))
        }
    }
}

impl fmt::Display for IndependenceStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt = |s: &BTreeSet<usize>| s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        write!(f, "{} _||_ {} | {}", fmt(&self.a), fmt(&self.b), fmt(&self.c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Reachability,
    /// Enumerate simple paths; exponential, kept as a reference.
    PathEnumeration,
}

/// Incidence view used by the separation procedures. Works for multigraphs,
/// so summary graphs produced by marginalisation can be queried too.
#[derive(Debug, Clone)]
pub struct Separator {
    // per node: (neighbour, mark at this node, mark at neighbour)
    inc: Vec<Vec<(usize, Mark, Mark)>>,
    // per node: tails of arrows pointing at it
    parents: Vec<Vec<usize>>,
}

impl Separator {
    pub fn new(g: &RegressionGraph) -> Self {
        Self::from_edges(g.num_nodes(), g.edges().iter().copied())
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = Edge>) -> Self {
        let mut inc = vec![Vec::new(); n];
        let mut parents = vec![Vec::new(); n];
        for e in edges {
            let (mf, mt) = e.kind.marks();
            inc[e.from].push((e.to, mf, mt));
            inc[e.to].push((e.from, mt, mf));
            if e.kind == EdgeKind::Arrow {
                parents[e.to].push(e.from);
            }
        }
        Separator { inc, parents }
    }

    pub fn num_nodes(&self) -> usize {
        self.inc.len()
    }

    /// Whether `a` and `b` are separated by `c`. Sets must be disjoint.
    pub fn separated(&self, a: &[usize], b: &[usize], c: &[usize], method: Method) -> bool {
        let n = self.num_nodes();
        let mut in_b = vec![false; n];
        let mut in_c = vec![false; n];
        b.iter().for_each(|&v| in_b[v] = true);
        c.iter().for_each(|&v| in_c[v] = true);
        match method {
            Method::Reachability => !self.reachable(a, &in_b, &in_c),
            Method::PathEnumeration => !self.path_connected(a, &in_b, &in_c),
        }
    }

    pub fn separated_pair(&self, i: usize, k: usize, c: &[usize]) -> bool {
        self.separated(&[i], &[k], c, Method::Reachability)
    }

    // Walk form: colliders must be in c, non-colliders outside c. Equivalent to
    // the path form because a walk may detour from a collider down to c and
    // back.
    fn reachable(&self, a: &[usize], in_b: &[bool], in_c: &[bool]) -> bool {
        let n = self.num_nodes();
        let mut seen = vec![[false; 2]; n];
        let slot = |m: Mark| (m == Mark::Head) as usize;
        let mut stack: Vec<(usize, Mark)> = Vec::new();
        for &s in a {
            for &(w, _, m_w) in &self.inc[s] {
                if !seen[w][slot(m_w)] {
                    seen[w][slot(m_w)] = true;
                    stack.push((w, m_w));
                }
            }
        }
        while let Some((w, m_in)) = stack.pop() {
            if in_b[w] {
                return true;
            }
            for &(x, m_out, m_x) in &self.inc[w] {
                let collider = m_in == Mark::Head && m_out == Mark::Head;
                if collider != in_c[w] {
                    continue;
                }
                if !seen[x][slot(m_x)] {
                    seen[x][slot(m_x)] = true;
                    stack.push((x, m_x));
                }
            }
        }
        false
    }

    /// Nodes with a directed path into `c`, including `c`.
    fn ancestors(&self, in_c: &[bool]) -> Vec<bool> {
        let mut an = in_c.to_vec();
        let mut stack: Vec<usize> = (0..an.len()).filter(|&v| an[v]).collect();
        while let Some(v) = stack.pop() {
            for &p in &self.parents[v] {
                if !an[p] {
                    an[p] = true;
                    stack.push(p);
                }
            }
        }
        an
    }

    fn path_connected(&self, a: &[usize], in_b: &[bool], in_c: &[bool]) -> bool {
        let an = self.ancestors(in_c);
        let mut on_path = vec![false; self.num_nodes()];
        a.iter().any(|&s| {
            on_path[s] = true;
            let found = self.extend_path(s, None, in_b, in_c, &an, &mut on_path);
            on_path[s] = false;
            found
        })
    }

    fn extend_path(
        &self,
        v: usize,
        arrived: Option<Mark>,
        in_b: &[bool],
        in_c: &[bool],
        an: &[bool],
        on_path: &mut [bool],
    ) -> bool {
        for &(x, m_v, m_x) in &self.inc[v] {
            if on_path[x] {
                continue;
            }
            if let Some(m_in) = arrived {
                let collider = m_in == Mark::Head && m_v == Mark::Head;
                let open = if collider { an[v] } else { !in_c[v] };
                if !open {
                    continue;
                }
            }
            if in_b[x] {
                return true;
            }
            on_path[x] = true;
            let found = self.extend_path(x, Some(m_x), in_b, in_c, an, on_path);
            on_path[x] = false;
            if found {
                return true;
            }
        }
        false
    }
}

/// Whether the graph implies the statement.
pub fn implies(g: &RegressionGraph, s: &IndependenceStatement) -> Result<bool, IndependenceError> {
    implies_with(g, s, Method::Reachability)
}

pub fn implies_with(
    g: &RegressionGraph,
    s: &IndependenceStatement,
    method: Method,
) -> Result<bool, IndependenceError> {
    let n = g.num_nodes();
    if let Some(&v) = s.a.iter().chain(&s.b).chain(&s.c).find(|&&v| v >= n) {
        return Err(IndependenceError::UnknownNode(format!("#{v}")));
    }
    if !s.a.is_disjoint(&s.b) || !s.a.is_disjoint(&s.c) || !s.b.is_disjoint(&s.c) {
        return Err(IndependenceError::NodesNotDisjoint);
    }
    let a: Vec<usize> = s.a.iter().copied().collect();
    let b: Vec<usize> = s.b.iter().copied().collect();
    let c: Vec<usize> = s.c.iter().copied().collect();
    Ok(Separator::new(g).separated(&a, &b, &c, method))
}

/// All pairwise statements `i ⊥ k | c` a graph implies, stored as a bit set
/// over (pair, conditioning mask).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IndependenceStructure {
    n: usize,
    bits: Vec<u64>,
}

impl IndependenceStructure {
    fn pair_index(n: usize, i: usize, k: usize) -> usize {
        let (i, k) = if i < k { (i, k) } else { (k, i) };
        // row-major index into the strict upper triangle
        i * n - i * (i + 1) / 2 + (k - i - 1)
    }

    fn slot(&self, i: usize, k: usize, mask: u32) -> usize {
        (Self::pair_index(self.n, i, k) << self.n) | mask as usize
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn contains(&self, i: usize, k: usize, c: &[usize]) -> bool {
        let mask = c.iter().fold(0u32, |m, &v| m | (1 << v));
        self.contains_mask(i, k, mask)
    }

    pub fn contains_mask(&self, i: usize, k: usize, mask: u32) -> bool {
        let s = self.slot(i, k, mask);
        self.bits[s / 64] >> (s % 64) & 1 == 1
    }

    fn set(&mut self, i: usize, k: usize, mask: u32) {
        let s = self.slot(i, k, mask);
        self.bits[s / 64] |= 1 << (s % 64);
    }

    pub fn len(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Statements with `i < k`, ordered by pair then conditioning mask.
    pub fn statements(&self) -> Vec<IndependenceStatement> {
        let n = self.n;
        let mut out = Vec::new();
        for i in 0..n {
            for k in i + 1..n {
                for mask in 0..(1u32 << n) {
                    if mask & (1 << i | 1 << k) == 0 && self.contains_mask(i, k, mask) {
                        let c = (0..n).filter(|&v| mask >> v & 1 == 1);
                        out.push(IndependenceStatement::pairwise(i, k, c));
                    }
                }
            }
        }
        out
    }

    /// Statements over a node subset, with indices remapped to positions in
    /// `keep`. Used to compare a marginal graph against its generator.
    pub fn restrict(&self, keep: &[usize]) -> IndependenceStructure {
        let m = keep.len();
        let mut out = IndependenceStructure::empty(m);
        for (ni, &i) in keep.iter().enumerate() {
            for (nk, &k) in keep.iter().enumerate().skip(ni + 1) {
                let others: Vec<(usize, usize)> = keep
                    .iter()
                    .enumerate()
                    .filter(|&(_, &v)| v != i && v != k)
                    .map(|(p, &v)| (p, v))
                    .collect();
                for sub in 0..(1u32 << others.len()) {
                    let (mut old, mut new) = (0u32, 0u32);
                    for (bit, &(p, v)) in others.iter().enumerate() {
                        if sub >> bit & 1 == 1 {
                            old |= 1 << v;
                            new |= 1 << p;
                        }
                    }
                    if self.contains_mask(i, k, old) {
                        out.set(ni, nk, new);
                    }
                }
            }
        }
        out
    }

    fn empty(n: usize) -> Self {
        let pairs = n * n.saturating_sub(1) / 2;
        let nbits = (pairs << n).max(1);
        IndependenceStructure {
            n,
            bits: vec![0; nbits.div_ceil(64)],
        }
    }

    /// Evaluates every uncoupled pair and conditioning set with `sep`.
    pub fn from_separator(
        sep: &Separator,
        adjacent: impl Fn(usize, usize) -> bool,
        exec: Execution,
    ) -> Self {
        let n = sep.num_nodes();
        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |k| (i, k)))
            .filter(|&(i, k)| !adjacent(i, k))
            .collect();
        let found = par::map(exec, pairs, |(i, k)| {
            let mut masks = Vec::new();
            let rest: Vec<usize> = (0..n).filter(|&v| v != i && v != k).collect();
            let mut c = Vec::with_capacity(rest.len());
            for sub in 0..(1u32 << rest.len()) {
                c.clear();
                let mut mask = 0u32;
                for (bit, &v) in rest.iter().enumerate() {
                    if sub >> bit & 1 == 1 {
                        c.push(v);
                        mask |= 1 << v;
                    }
                }
                if sep.separated_pair(i, k, &c) {
                    masks.push(mask);
                }
            }
            (i, k, masks)
        });
        let mut s = IndependenceStructure::empty(n);
        for (i, k, masks) in found {
            for m in masks {
                s.set(i, k, m);
            }
        }
        s
    }
}

/// Every pairwise statement the graph implies.
pub fn implied_structure(g: &RegressionGraph) -> Result<Vec<IndependenceStatement>, IndependenceError> {
    Ok(structure(g, DEFAULT_STRUCTURE_BOUND, Execution::default())?.statements())
}

/// Bit-set form of [`implied_structure`] with an explicit node bound.
pub fn structure(
    g: &RegressionGraph,
    bound: usize,
    exec: Execution,
) -> Result<IndependenceStructure, IndependenceError> {
    let n = g.num_nodes();
    // masks are u32 and the table has pairs * 2^n bits
    let bound = bound.min(16);
    if n > bound {
        return Err(IndependenceError::GraphTooLarge { nodes: n, bound });
    }
    Ok(IndependenceStructure::from_separator(
        &Separator::new(g),
        |i, k| g.adjacent(i, k),
        exec,
    ))
}

/// A conditioning set showing the V's effect: for a transmitting V,
/// `i ⊥ k | {o} ∪ c` holds and `i ⊥ k | c` fails; for a collision V the
/// reverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub c: Vec<usize>,
    /// Whether `i ⊥ k | c` holds.
    pub separated_without_o: bool,
}

pub fn separation_witness(g: &RegressionGraph, v: &VConfiguration) -> Result<Witness, IndependenceError> {
    let sep = Separator::new(g);
    let rest: Vec<usize> = (0..g.num_nodes())
        .filter(|&x| x != v.i && x != v.k && x != v.inner)
        .collect();
    let mut c = Vec::with_capacity(rest.len() + 1);
    // smallest sets first, so the reported witness is minimal
    let mut subsets: Vec<u64> = (0..(1u64 << rest.len())).collect();
    subsets.sort_by_key(|m| (m.count_ones(), *m));
    for sub in subsets {
        c.clear();
        c.extend(rest.iter().enumerate().filter(|(b, _)| sub >> b & 1 == 1).map(|(_, &x)| x));
        let without = sep.separated_pair(v.i, v.k, &c);
        c.push(v.inner);
        let with = sep.separated_pair(v.i, v.k, &c);
        c.pop();
        let ok = match v.kind {
            VKind::Transmitting => with && !without,
            VKind::Collision => without && !with,
        };
        if ok {
            return Ok(Witness {
                c: c.clone(),
                separated_without_o: without,
            });
        }
    }
    Err(IndependenceError::NoWitnessFound(v.display(g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_graph;

    fn chain5() -> RegressionGraph {
        parse_graph("blocks: 1 | 2 | 3 | 4 || 5\n2 -> 1\n3 -> 2\n4 -> 3\n5 -> 4\n").unwrap()
    }

    fn holds(g: &RegressionGraph, s: &str) -> bool {
        let st = IndependenceStatement::parse(g, s).unwrap();
        let fast = implies(g, &st).unwrap();
        assert_eq!(fast, implies_with(g, &st, Method::PathEnumeration).unwrap(), "{s}");
        fast
    }

    #[test]
    fn markov_chain_statements() {
        let g = chain5();
        assert!(holds(&g, "1 _||_ 3,4,5 | 2"));
        assert!(holds(&g, "2 _||_ 4,5 | 3"));
        assert!(holds(&g, "3 _||_ 5 | 4"));
        assert!(holds(&g, "1 _||_ 4 | 3"));
        assert!(holds(&g, "1,2 _||_ 4,5 | 3"));
        assert!(holds(&g, "2 _||_ 4 | 1,3,5"));
        assert!(!holds(&g, "1 _||_ 4"));
        assert!(!holds(&g, "1 _||_ 2 | 3,4,5"));
    }

    #[test]
    fn collision_opens_on_conditioning() {
        let g = parse_graph("blocks: o || i k\ni -> o\nk -> o\n").unwrap();
        assert!(holds(&g, "i _||_ k"));
        assert!(!holds(&g, "i _||_ k | o"));
    }

    #[test]
    fn collider_descendant_opens() {
        let g = parse_graph("blocks: d | o || i k\ni -> o\nk -> o\no -> d\n").unwrap();
        assert!(holds(&g, "i _||_ k"));
        assert!(!holds(&g, "i _||_ k | d"));
    }

    #[test]
    fn dashed_chain_is_a_collider() {
        let g = parse_graph("blocks: i o k\ni ~~ o\no ~~ k\n").unwrap();
        assert!(holds(&g, "i _||_ k"));
        assert!(!holds(&g, "i _||_ k | o"));
    }

    #[test]
    fn full_chain_transmits() {
        let g = parse_graph("blocks: || i o k\ni -- o\no -- k\n").unwrap();
        assert!(!holds(&g, "i _||_ k"));
        assert!(holds(&g, "i _||_ k | o"));
    }

    #[test]
    fn statement_errors() {
        let g = chain5();
        assert_eq!(
            IndependenceStatement::parse(&g, "1 _||_ 1 | 2").unwrap_err(),
            IndependenceError::NodesNotDisjoint
        );
        assert_eq!(
            IndependenceStatement::parse(&g, "1 _||_ 9").unwrap_err(),
            IndependenceError::UnknownNode("9".into())
        );
        assert!(matches!(
            IndependenceStatement::parse(&g, "1 and 2"),
            Err(IndependenceError::Syntax(_))
        ));
        let bad = IndependenceStatement { a: [0].into(), b: [0].into(), c: BTreeSet::new() };
        assert_eq!(implies(&g, &bad).unwrap_err(), IndependenceError::NodesNotDisjoint);
    }

    #[test]
    fn structure_of_isolated_pair() {
        let g = parse_graph("blocks: || a b\n").unwrap();
        let s = implied_structure(&g).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0].c.is_empty());
    }

    #[test]
    fn structure_of_complete_graph_is_empty() {
        let g = parse_graph("blocks: a | b || c\nb -> a\nc -> a\nc -> b\n").unwrap();
        assert!(implied_structure(&g).unwrap().is_empty());
    }

    #[test]
    fn chain_structure_contains_one_five_given_four() {
        let g = chain5();
        let st = structure(&g, 8, Execution::Sequential).unwrap();
        assert!(st.contains(0, 4, &[3]));
        assert!(!st.contains(0, 4, &[]));
    }

    #[test]
    fn too_large_graph_rejected() {
        let labels: Vec<String> = (0..9).map(|i| format!("n{i}")).collect();
        let src = format!("blocks: || {}\n", labels.join(" "));
        let g = parse_graph(&src).unwrap();
        assert_eq!(
            implied_structure(&g).unwrap_err(),
            IndependenceError::GraphTooLarge { nodes: 9, bound: 8 }
        );
    }

    #[test]
    fn witnesses_for_three_node_vs() {
        let g = parse_graph("blocks: i | o || k\no -> i\nk -> o\n").unwrap();
        let v = g.enumerate_vs()[0];
        let w = separation_witness(&g, &v).unwrap();
        assert!(w.c.is_empty());
        assert!(!w.separated_without_o);

        let g = parse_graph("blocks: o || i k\ni -> o\nk -> o\n").unwrap();
        let w = separation_witness(&g, &g.enumerate_vs()[0]).unwrap();
        assert!(w.c.is_empty());
        assert!(w.separated_without_o);

        let g = parse_graph("blocks: || i o k\ni -- o\no -- k\n").unwrap();
        let w = separation_witness(&g, &g.enumerate_vs()[0]).unwrap();
        assert!(w.c.is_empty());
    }

    #[test]
    fn restrict_drops_and_remaps() {
        let g = chain5();
        let st = structure(&g, 8, Execution::Sequential).unwrap();
        // keep 1, 3, 5 -> indices 0, 1, 2
        let r = st.restrict(&[0, 2, 4]);
        assert!(r.contains(0, 2, &[1]));
        assert!(!r.contains(0, 2, &[]));
    }
}
