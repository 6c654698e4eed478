//! Marginalisation, Markov equivalence and hidden-variable expansions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use thiserror::Error;

use crate::graph::{dot, BlockOrdering, Edge, EdgeKind, GraphError, Mark, RegressionGraph, VKind};
use crate::independence::{structure, IndependenceStructure, Separator, DEFAULT_STRUCTURE_BOUND};
use crate::par::Execution;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransformError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("conditioning on a node set is only supported for independence queries")]
    ConditioningUnsupported,
    #[error("graphs are over different node sets")]
    NodeSetMismatch,
    #[error("`{0}` and `{1}` are not joined by a dashed edge")]
    EdgeNotDashed(String, String),
    #[error("`{0}` and `{1}` are not joined by a full line")]
    EdgeNotFull(String, String),
    #[error("context graph with the hidden node is not chordal")]
    NotChordal,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Nodes to marginalise over and to condition on. Only `c = ∅` is supported.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MarginalSpec {
    pub m: Vec<usize>,
    pub c: Vec<usize>,
}

/// A graph with the block ordering of a regression graph whose edges may
/// repeat a pair or break the block rules. Marginals of regression graphs
/// live in this class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MixedGraph {
    pub labels: Vec<String>,
    pub ordering: BlockOrdering,
    pub edges: Vec<Edge>,
}

impl MixedGraph {
    pub fn from_graph(g: &RegressionGraph) -> Self {
        MixedGraph {
            labels: g.labels().to_vec(),
            ordering: g.ordering().clone(),
            edges: g.edges().to_vec(),
        }
    }

    pub fn separator(&self) -> Separator {
        Separator::from_edges(self.labels.len(), self.edges.iter().copied())
    }

    pub fn to_text(&self) -> String {
        let fmt_block = |b: &[usize]| {
            b.iter().map(|&v| self.labels[v].as_str()).collect::<Vec<_>>().join(" ")
        };
        let responses: Vec<String> = self.ordering.response_blocks().iter().map(|b| fmt_block(b)).collect();
        let mut out = format!("blocks: {} ||", responses.join(" | "));
        if !self.ordering.context().is_empty() {
            let _ = write!(out, " {}", fmt_block(self.ordering.context()));
        }
        out.push('\n');
        let mut edges = self.edges.clone();
        edges.sort_by_key(|e| (e.kind, e.to, e.from));
        for e in &edges {
            let _ = writeln!(out, "{} {} {}", self.labels[e.from], e.kind.operator(), self.labels[e.to]);
        }
        out
    }

    pub fn to_dot(&self) -> String {
        dot::render(&self.labels, &self.ordering, &self.edges)
    }
}

/// Result of marginalising a regression graph.
#[derive(Debug, Clone)]
pub struct InducedGraph {
    /// The projected multigraph before any cross-kind collapsing.
    pub summary: MixedGraph,
    /// Set when the marginal is again a regression graph.
    pub graph: Option<RegressionGraph>,
    pub is_regression_graph: bool,
    /// Whether the result was compared against the generating graph's
    /// independence structure.
    pub certified: bool,
}

/// Largest generating graph for which marginals are certified.
pub const CERTIFY_BOUND: usize = DEFAULT_STRUCTURE_BOUND;

pub fn marginalize_spec(g: &RegressionGraph, spec: &MarginalSpec) -> Result<InducedGraph, TransformError> {
    if !spec.c.is_empty() {
        return Err(TransformError::ConditioningUnsupported);
    }
    marginalize(g, &spec.m)
}

/// Removes `m`, adding for every non-collider at a removed node an edge that
/// keeps the two outer edge ends.
pub fn marginalize(g: &RegressionGraph, m: &[usize]) -> Result<InducedGraph, TransformError> {
    let n = g.num_nodes();
    if let Some(&v) = m.iter().find(|&&v| v >= n) {
        return Err(TransformError::UnknownNode(format!("#{v}")));
    }
    let mut removed = vec![false; n];
    m.iter().for_each(|&v| removed[v] = true);
    let mut order: Vec<usize> = (0..n).filter(|&v| removed[v]).collect();
    order.sort_by(|&a, &b| g.label(a).cmp(g.label(b)));

    let mut edges: BTreeSet<Edge> = g.edges().iter().copied().collect();
    for &o in &order {
        let at_o: Vec<Edge> = edges.iter().filter(|e| e.touches(o)).copied().collect();
        for e in &at_o {
            edges.remove(e);
        }
        for (x, e1) in at_o.iter().enumerate() {
            for e2 in &at_o[x + 1..] {
                if e1.mark_at(o) == Mark::Head && e2.mark_at(o) == Mark::Head {
                    continue;
                }
                let (a, b) = (e1.other(o), e2.other(o));
                if a == b {
                    continue;
                }
                edges.insert(edge_from_marks(a, e1.mark_at(a), b, e2.mark_at(b)));
            }
        }
    }

    let keep: Vec<usize> = (0..n).filter(|&v| !removed[v]).collect();
    let mut new_index = vec![usize::MAX; n];
    keep.iter().enumerate().for_each(|(p, &v)| new_index[v] = p);
    let labels: Vec<String> = keep.iter().map(|&v| g.label(v).to_string()).collect();
    let ordering = restrict_ordering(g.ordering(), &new_index);
    let edges: Vec<Edge> = edges
        .into_iter()
        .map(|e| Edge::new(new_index[e.from], new_index[e.to], e.kind))
        .collect();
    let summary = MixedGraph { labels, ordering, edges };

    let collapsed = collapse(&summary);
    let clash = collapsed.len() != summary.edges.len();
    let candidate = RegressionGraph::new(summary.labels.clone(), summary.ordering.clone(), collapsed).ok();

    let mut certified = false;
    let graph = match candidate {
        Some(h) if n <= CERTIFY_BOUND => {
            certified = true;
            let original = structure(g, CERTIFY_BOUND, Execution::Sequential).expect("within bound");
            let marginal = structure(&h, CERTIFY_BOUND, Execution::Sequential).expect("within bound");
            (original.restrict(&keep) == marginal).then_some(h)
        }
        Some(h) if !clash => Some(h),
        _ => None,
    };
    Ok(InducedGraph {
        summary,
        is_regression_graph: graph.is_some(),
        graph,
        certified,
    })
}

fn edge_from_marks(a: usize, ma: Mark, b: usize, mb: Mark) -> Edge {
    match (ma, mb) {
        (Mark::Tail, Mark::Head) => Edge::arrow(a, b),
        (Mark::Head, Mark::Tail) => Edge::arrow(b, a),
        (Mark::Head, Mark::Head) => Edge::dashed(a, b),
        (Mark::Tail, Mark::Tail) => Edge::full(a, b),
    }
}

fn restrict_ordering(ord: &BlockOrdering, new_index: &[usize]) -> BlockOrdering {
    let mut blocks = Vec::new();
    let mut split = 0;
    for (j, b) in ord.blocks().iter().enumerate() {
        let nb: Vec<usize> = b.iter().filter(|&&v| new_index[v] != usize::MAX).map(|&v| new_index[v]).collect();
        if !nb.is_empty() {
            split += usize::from(!ord.is_context_block(j));
            blocks.push(nb);
        }
    }
    BlockOrdering::new(blocks, split).expect("restricted ordering")
}

/// One edge per pair, by precedence arrow > dashed > full.
fn collapse(s: &MixedGraph) -> Vec<Edge> {
    let mut best: BTreeMap<(usize, usize), Edge> = BTreeMap::new();
    for e in &s.edges {
        let key = (e.from.min(e.to), e.from.max(e.to));
        best.entry(key)
            .and_modify(|cur| {
                if e.kind < cur.kind {
                    *cur = *e;
                }
            })
            .or_insert(*e);
    }
    best.into_values().collect()
}

/// Same skeleton and the same collision Vs, compared as `(i, o, k)` triples.
pub fn markov_equivalent(g1: &RegressionGraph, g2: &RegressionGraph) -> Result<bool, TransformError> {
    let n = g1.num_nodes();
    if n != g2.num_nodes() {
        return Err(TransformError::NodeSetMismatch);
    }
    let map: Vec<usize> = g2
        .labels()
        .iter()
        .map(|l| g1.index_of(l).ok_or(TransformError::NodeSetMismatch))
        .collect::<Result<_, _>>()?;
    let skeleton2: BTreeSet<(usize, usize)> = g2
        .skeleton()
        .into_iter()
        .map(|(a, b)| (map[a].min(map[b]), map[a].max(map[b])))
        .collect();
    if g1.skeleton() != skeleton2 {
        return Ok(false);
    }
    let colliders2: BTreeSet<(usize, usize, usize)> = collision_triples(g2)
        .into_iter()
        .map(|(i, o, k)| (map[i].min(map[k]), map[o], map[i].max(map[k])))
        .collect();
    Ok(collision_triples(g1) == colliders2)
}

/// `(i, o, k)` with `i < k` for every collision V.
pub fn collision_triples(g: &RegressionGraph) -> BTreeSet<(usize, usize, usize)> {
    g.enumerate_vs()
        .into_iter()
        .filter(|v| v.kind == VKind::Collision)
        .map(|v| (v.i, v.inner, v.k))
        .collect()
}

/// The graph with hidden nodes, and where they are.
#[derive(Debug, Clone)]
pub struct HiddenExpansion {
    pub graph: RegressionGraph,
    pub latents: Vec<usize>,
}

fn fresh_label(taken: &BTreeSet<String>, base: String) -> String {
    if !taken.contains(&base) {
        return base;
    }
    (1..).map(|i| format!("{base}_{i}")).find(|l| !taken.contains(l)).unwrap()
}

/// Replaces each selected dashed edge `i ~~ k` by `i <- L -> k`, placing the
/// hidden `L` in a new block just after the block of `i` and `k`.
pub fn expand_hidden(g: &RegressionGraph, dashed: &[(usize, usize)]) -> Result<HiddenExpansion, TransformError> {
    let n = g.num_nodes();
    let mut selected = BTreeSet::new();
    for &(a, b) in dashed {
        if a >= n || b >= n {
            return Err(TransformError::UnknownNode(format!("#{}", a.max(b))));
        }
        match g.edge_between(a, b) {
            Some(e) if e.kind == EdgeKind::Dashed => {
                selected.insert(e);
            }
            _ => return Err(TransformError::EdgeNotDashed(g.label(a).into(), g.label(b).into())),
        }
    }
    let mut labels = g.labels().to_vec();
    let mut taken: BTreeSet<String> = labels.iter().cloned().collect();
    let mut hidden_in: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut edges: Vec<Edge> = g.edges().iter().filter(|e| !selected.contains(e)).copied().collect();
    let mut latents = Vec::new();
    for e in &selected {
        let l = fresh_label(&taken, format!("L_{}_{}", g.label(e.from), g.label(e.to)));
        taken.insert(l.clone());
        let id = labels.len();
        labels.push(l);
        latents.push(id);
        edges.push(Edge::arrow(id, e.from));
        edges.push(Edge::arrow(id, e.to));
        hidden_in.entry(g.block_of(e.from)).or_default().push(id);
    }
    let ord = g.ordering();
    let mut blocks = Vec::new();
    let mut split = ord.split();
    for (j, b) in ord.blocks().iter().enumerate() {
        blocks.push(b.clone());
        if let Some(h) = hidden_in.remove(&j) {
            blocks.push(h);
            split += 1;
        }
    }
    let graph = RegressionGraph::new(labels, BlockOrdering::new(blocks, split)?, edges)?;
    Ok(HiddenExpansion { graph, latents })
}

/// A full line `a -- b` replaced by a hidden common source. The context is
/// re-expressed as a directed graph oriented by a maximum cardinality search
/// started at the hidden node, so the result has singleton context blocks and
/// lies outside the class of the input graph.
#[derive(Debug, Clone)]
pub struct FullLineExpansion {
    pub graph: RegressionGraph,
    pub latent: usize,
    pub in_class: bool,
}

pub fn expand_full_line(g: &RegressionGraph, a: usize, b: usize) -> Result<FullLineExpansion, TransformError> {
    let n = g.num_nodes();
    if a >= n || b >= n {
        return Err(TransformError::UnknownNode(format!("#{}", a.max(b))));
    }
    if !matches!(g.edge_between(a, b), Some(e) if e.kind == EdgeKind::Full) {
        return Err(TransformError::EdgeNotFull(g.label(a).into(), g.label(b).into()));
    }
    let ctx: Vec<usize> = g.ordering().context().to_vec();
    let latent = n;
    // undirected context graph without a -- b, with the hidden node joined to a and b
    let mut adj = vec![BTreeSet::new(); n + 1];
    for e in g.edges().iter().filter(|e| e.kind == EdgeKind::Full) {
        if (e.from, e.to) != (a.min(b), a.max(b)) {
            adj[e.from].insert(e.to);
            adj[e.to].insert(e.from);
        }
    }
    for v in [a, b] {
        adj[latent].insert(v);
        adj[v].insert(latent);
    }
    let mut nodes = ctx.clone();
    nodes.push(latent);
    let visit = max_cardinality_search(&nodes, &adj, latent);
    let mut pos = vec![usize::MAX; n + 1];
    visit.iter().enumerate().for_each(|(p, &v)| pos[v] = p);
    // chordal iff the earlier-visited neighbours of every node form a clique
    for &v in &visit {
        let earlier: Vec<usize> = adj[v].iter().copied().filter(|&w| pos[w] < pos[v]).collect();
        for (x, &p) in earlier.iter().enumerate() {
            if earlier[x + 1..].iter().any(|q| !adj[p].contains(q)) {
                return Err(TransformError::NotChordal);
            }
        }
    }

    let mut labels = g.labels().to_vec();
    let taken: BTreeSet<String> = labels.iter().cloned().collect();
    labels.push(fresh_label(&taken, format!("L_{}_{}", g.label(a), g.label(b))));
    let ord = g.ordering();
    let mut blocks: Vec<Vec<usize>> = ord.response_blocks().to_vec();
    blocks.extend(visit.iter().rev().filter(|&&v| v != latent).map(|&v| vec![v]));
    let split = blocks.len();
    blocks.push(vec![latent]);
    let mut edges: Vec<Edge> = g.edges().iter().filter(|e| e.kind != EdgeKind::Full).copied().collect();
    for &v in &nodes {
        for &w in &adj[v] {
            if pos[v] < pos[w] {
                edges.push(Edge::arrow(v, w));
            }
        }
    }
    let graph = RegressionGraph::new(labels, BlockOrdering::new(blocks, split)?, edges)?;
    Ok(FullLineExpansion { graph, latent, in_class: false })
}

/// Visit order of a maximum cardinality search; ties go to the smaller index.
fn max_cardinality_search(nodes: &[usize], adj: &[BTreeSet<usize>], start: usize) -> Vec<usize> {
    let mut weight: BTreeMap<usize, usize> = nodes.iter().map(|&v| (v, 0)).collect();
    let mut order = Vec::with_capacity(nodes.len());
    let mut next = Some(start);
    while let Some(v) = next {
        weight.remove(&v);
        order.push(v);
        for w in &adj[v] {
            if let Some(c) = weight.get_mut(w) {
                *c += 1;
            }
        }
        next = weight
            .iter()
            .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0)))
            .map(|(&v, _)| v);
    }
    order
}

/// Independence structure of a regression graph or a summary graph, for
/// comparisons that cross the two classes.
pub fn summary_structure(s: &MixedGraph) -> IndependenceStructure {
    let sep = s.separator();
    let mut adjacent = vec![false; s.labels.len() * s.labels.len()];
    let n = s.labels.len();
    for e in &s.edges {
        adjacent[e.from * n + e.to] = true;
        adjacent[e.to * n + e.from] = true;
    }
    IndependenceStructure::from_separator(&sep, |i, k| adjacent[i * n + k], Execution::Sequential)
}
