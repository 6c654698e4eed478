//! Exhaustive catalogue of small regression graphs up to isomorphism.
//!
//! A labelled graph on `n` nodes is a code per node pair `a < b`:
//! none, `a -> b`, `b -> a`, `a ~~ b` or `a -- b`. A code is realisable as a
//! regression graph when nodes with full lines have neither incoming arrows
//! nor dashed lines, no arrow joins two nodes of one dashed component, and
//! arrows between dashed components are acyclic.

use crate::graph::{BlockOrdering, Edge, EdgeKind, RegressionGraph};
use crate::par::{self, Execution};

pub const MAX_NODES: usize = 5;

const NONE: u8 = 0;
const FORWARD: u8 = 1;
const BACKWARD: u8 = 2;
const DASHED: u8 = 3;
const FULL: u8 = 4;

/// Labelled graph as one code per pair, in the order (0,1), (0,2), …
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairCode {
    pub n: u8,
    /// Base-5 digits, first pair most significant.
    pub code: u32,
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect()
}

fn digits(code: u32, npairs: usize) -> [u8; 10] {
    let mut d = [0u8; 10];
    let mut x = code;
    for p in (0..npairs).rev() {
        d[p] = (x % 5) as u8;
        x /= 5;
    }
    d
}

impl PairCode {
    pub fn edges(&self) -> Vec<Edge> {
        let n = self.n as usize;
        let ps = pairs(n);
        let d = digits(self.code, ps.len());
        ps.iter()
            .zip(d)
            .filter_map(|(&(a, b), c)| match c {
                FORWARD => Some(Edge::arrow(a, b)),
                BACKWARD => Some(Edge::arrow(b, a)),
                DASHED => Some(Edge::dashed(a, b)),
                FULL => Some(Edge::full(a, b)),
                _ => None,
            })
            .collect()
    }

    /// Block ordering realising the code, or `None` if there is none.
    pub fn ordering(&self) -> Option<BlockOrdering> {
        let n = self.n as usize;
        let ps = pairs(n);
        let d = digits(self.code, ps.len());
        let mut has_full = [false; MAX_NODES];
        let mut has_dashed = [false; MAX_NODES];
        let mut has_parent = [false; MAX_NODES];
        let mut comp: [usize; MAX_NODES] = [0, 1, 2, 3, 4];
        fn find(c: &mut [usize; MAX_NODES], v: usize) -> usize {
            let mut r = v;
            while c[r] != r {
                r = c[r];
            }
            c[v] = r;
            r
        }
        for (&(a, b), &c) in ps.iter().zip(&d) {
            match c {
                FORWARD => has_parent[b] = true,
                BACKWARD => has_parent[a] = true,
                DASHED => {
                    has_dashed[a] = true;
                    has_dashed[b] = true;
                    let (ra, rb) = (find(&mut comp, a), find(&mut comp, b));
                    comp[ra.max(rb)] = ra.min(rb);
                }
                FULL => {
                    has_full[a] = true;
                    has_full[b] = true;
                }
                _ => {}
            }
        }
        if (0..n).any(|v| has_full[v] && (has_parent[v] || has_dashed[v])) {
            return None;
        }
        let root: Vec<usize> = (0..n).map(|v| find(&mut comp, v)).collect();
        // out[r]: components receiving an arrow from component r
        let mut out = [[false; MAX_NODES]; MAX_NODES];
        for (&(a, b), &c) in ps.iter().zip(&d) {
            let (t, h) = match c {
                FORWARD => (a, b),
                BACKWARD => (b, a),
                _ => continue,
            };
            if root[t] == root[h] {
                return None;
            }
            out[root[t]][root[h]] = true;
        }
        let mut roots: Vec<usize> = (0..n).filter(|&v| !has_full[v] && root[v] == v).collect();
        let mut blocks = Vec::new();
        // repeatedly take the smallest sink component as the next block
        while !roots.is_empty() {
            let pos = roots
                .iter()
                .position(|&r| roots.iter().all(|&s| !out[r][s]))?;
            let r = roots.remove(pos);
            blocks.push((0..n).filter(|&v| !has_full[v] && root[v] == r).collect::<Vec<_>>());
        }
        let split = blocks.len();
        let context: Vec<usize> = (0..n).filter(|&v| has_full[v]).collect();
        if !context.is_empty() {
            blocks.push(context);
        }
        BlockOrdering::new(blocks, split).ok()
    }

    pub fn to_graph(&self) -> Option<RegressionGraph> {
        let ordering = self.ordering()?;
        let labels = (0..self.n).map(|v| ((b'a' + v) as char).to_string()).collect();
        RegressionGraph::new(labels, ordering, self.edges()).ok()
    }
}

/// Relabelling tables: for each permutation, where every pair goes and
/// whether its arrow flips.
struct Relabel {
    npairs: usize,
    maps: Vec<Vec<(usize, bool)>>,
}

impl Relabel {
    fn new(n: usize) -> Self {
        let ps = pairs(n);
        let index = |a: usize, b: usize| ps.iter().position(|&p| p == (a.min(b), a.max(b))).unwrap();
        let maps = permutations(n)
            .into_iter()
            .map(|pi| ps.iter().map(|&(a, b)| (index(pi[a], pi[b]), pi[a] > pi[b])).collect())
            .collect();
        Relabel { npairs: ps.len(), maps }
    }

    fn is_canonical(&self, code: u32) -> bool {
        let d = digits(code, self.npairs);
        let mut img = [0u8; 10];
        for map in &self.maps {
            for (p, &(q, flip)) in map.iter().enumerate() {
                img[q] = match (d[p], flip) {
                    (FORWARD, true) => BACKWARD,
                    (BACKWARD, true) => FORWARD,
                    (c, _) => c,
                };
            }
            let value = img[..self.npairs].iter().fold(0u32, |acc, &c| acc * 5 + c as u32);
            if value < code {
                return false;
            }
        }
        true
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

const CHUNK: u64 = 1 << 14;

/// Every realisable labelled code on `n` nodes.
pub fn labeled(n: usize, exec: Execution) -> Vec<PairCode> {
    scan(n, exec, false)
}

/// One representative per isomorphism class on `n` nodes: the code that is
/// smallest among its relabellings.
pub fn canonical(n: usize, exec: Execution) -> Vec<PairCode> {
    scan(n, exec, true)
}

fn scan(n: usize, exec: Execution, canonical_only: bool) -> Vec<PairCode> {
    assert!((1..=MAX_NODES).contains(&n), "catalogue supports 1 to {MAX_NODES} nodes");
    let total = 5u64.pow(pairs(n).len() as u32);
    let relabel = Relabel::new(n);
    let chunks = total.div_ceil(CHUNK);
    par::map_range(exec, 0..chunks, |c| {
        (c * CHUNK..((c + 1) * CHUNK).min(total))
            .map(|code| PairCode { n: n as u8, code: code as u32 })
            .filter(|pc| (!canonical_only || relabel.is_canonical(pc.code)) && pc.ordering().is_some())
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// All regression graphs on 1 to `max_n` nodes up to isomorphism.
pub fn catalog(max_n: usize, exec: Execution) -> Vec<RegressionGraph> {
    (1..=max_n)
        .flat_map(|n| canonical(n, exec))
        .map(|pc| pc.to_graph().expect("realisable code"))
        .collect()
}

/// Pair code of a graph on at most five nodes, by node index.
pub fn code_of(g: &RegressionGraph) -> PairCode {
    let n = g.num_nodes();
    assert!(n <= MAX_NODES);
    let code = pairs(n).iter().fold(0u32, |acc, &(a, b)| {
        let c = match g.edge_between(a, b) {
            None => NONE,
            Some(e) => match e.kind {
                EdgeKind::Arrow if e.from == a => FORWARD,
                EdgeKind::Arrow => BACKWARD,
                EdgeKind::Dashed => DASHED,
                EdgeKind::Full => FULL,
            },
        };
        acc * 5 + c as u32
    });
    PairCode { n: n as u8, code }
}
