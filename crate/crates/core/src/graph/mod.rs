//! Regression graphs: block-ordered node sets joined by arrows, dashed lines
//! and full lines.
//!
//! Blocks are listed from the latest responses (`g_1`) back to the context
//! block (`g_J`). Arrows always point from a later block into an earlier one,
//! dashed lines join two responses of the same block and full lines join two
//! context variables.

pub(crate) mod dot;
mod text;
mod vconfig;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::independence::IndependenceStatement;

pub use dot::to_dot;
pub use text::{parse_graph, write_graph, TextError};
pub use vconfig::{enumerate_vs, VConfiguration, VKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("more than one edge between `{0}` and `{1}`")]
    DuplicateEdge(String, String),
    #[error("{kind} edge between `{a}` and `{b}` is not allowed by the block ordering")]
    EdgeKindViolatesBlocks { a: String, b: String, kind: EdgeKind },
    #[error("arrow `{tail} -> {head}` points from the future into the past")]
    ArrowPointsToPast { tail: String, head: String },
    #[error("node `{0}` is not in any block")]
    NodeNotInAnyBlock(String),
    #[error("node `{0}` appears in more than one block")]
    NodeInSeveralBlocks(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("self edge at `{0}`")]
    SelfEdge(String),
    #[error("only a single context block is supported, got {0}")]
    MultipleContextBlocks(usize),
    #[error("empty block at position {0}")]
    EmptyBlock(usize),
}

/// The three edge types of a regression graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    /// Directed, from an explanatory variable to a response in its future.
    Arrow,
    /// Undirected, between two responses of one block given their past.
    Dashed,
    /// Undirected, between two context variables given the rest of the context.
    Full,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Arrow => "arrow",
            EdgeKind::Dashed => "dashed",
            EdgeKind::Full => "full",
        })
    }
}

/// What an edge looks like at one of its endpoints.
///
/// Dashed ends behave like arrowheads, full-line ends like tails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mark {
    Tail,
    Head,
}

impl EdgeKind {
    /// Marks at `(from, to)`. For an arrow `from` is the tail.
    pub fn marks(self) -> (Mark, Mark) {
        match self {
            EdgeKind::Arrow => (Mark::Tail, Mark::Head),
            EdgeKind::Dashed => (Mark::Head, Mark::Head),
            EdgeKind::Full => (Mark::Tail, Mark::Tail),
        }
    }

    pub fn is_directed(self) -> bool {
        self == EdgeKind::Arrow
    }
}

/// An edge stored canonically: arrows as `tail -> head`, undirected edges with
/// `from < to`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn new(from: usize, to: usize, kind: EdgeKind) -> Self {
        if kind.is_directed() || from < to {
            Edge { from, to, kind }
        } else {
            Edge { from: to, to: from, kind }
        }
    }

    pub fn arrow(tail: usize, head: usize) -> Self {
        Edge::new(tail, head, EdgeKind::Arrow)
    }

    pub fn dashed(a: usize, b: usize) -> Self {
        Edge::new(a, b, EdgeKind::Dashed)
    }

    pub fn full(a: usize, b: usize) -> Self {
        Edge::new(a, b, EdgeKind::Full)
    }

    /// Mark of this edge at `node`, which must be one of its endpoints.
    pub fn mark_at(&self, node: usize) -> Mark {
        let (m_from, m_to) = self.kind.marks();
        if node == self.from {
            m_from
        } else {
            debug_assert_eq!(node, self.to);
            m_to
        }
    }

    pub fn other(&self, node: usize) -> usize {
        if node == self.from {
            self.to
        } else {
            self.from
        }
    }

    pub fn touches(&self, node: usize) -> bool {
        self.from == node || self.to == node
    }
}

/// Ordered partition `g_1 < ... < g_J` of the node set, split into response
/// blocks and at most one trailing context block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockOrdering {
    blocks: Vec<Vec<usize>>,
    split: usize,
}

impl BlockOrdering {
    /// `split` is the number of response blocks; every block after it is a
    /// context block.
    pub fn new(blocks: Vec<Vec<usize>>, split: usize) -> Result<Self, GraphError> {
        let split = split.min(blocks.len());
        if blocks.len() - split > 1 {
            return Err(GraphError::MultipleContextBlocks(blocks.len() - split));
        }
        if let Some(j) = blocks.iter().position(|b| b.is_empty()) {
            return Err(GraphError::EmptyBlock(j));
        }
        Ok(BlockOrdering { blocks, split })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Number of response blocks.
    pub fn split(&self) -> usize {
        self.split
    }

    pub fn is_context_block(&self, j: usize) -> bool {
        j >= self.split
    }

    pub fn response_blocks(&self) -> &[Vec<usize>] {
        &self.blocks[..self.split]
    }

    /// The context set `v`; empty when every block is a response block.
    pub fn context(&self) -> &[usize] {
        self.blocks.get(self.split).map(Vec::as_slice).unwrap_or(&[])
    }

    /// `g_{>j}`: the union of all blocks after block `j`.
    pub fn after(&self, j: usize) -> Vec<usize> {
        self.blocks[j + 1..].iter().flatten().copied().collect()
    }

    /// `g_{<j}`: the union of all blocks before block `j`.
    pub fn before(&self, j: usize) -> Vec<usize> {
        self.blocks[..j].iter().flatten().copied().collect()
    }
}

/// A validated regression graph. Immutable once built.
#[derive(Debug, Clone)]
pub struct RegressionGraph {
    labels: Vec<String>,
    ordering: BlockOrdering,
    block_of: Vec<usize>,
    edges: Vec<Edge>,
    // n * n lookup, same entry for (i, k) and (k, i)
    pair: Vec<Option<Edge>>,
    nbrs: Vec<Vec<usize>>,
}

impl RegressionGraph {
    /// Validates and builds a graph over `labels`, which are indexed by
    /// position in every other argument.
    pub fn new(
        labels: Vec<String>,
        ordering: BlockOrdering,
        edges: impl IntoIterator<Item = Edge>,
    ) -> Result<Self, GraphError> {
        let n = labels.len();
        let mut seen = HashMap::with_capacity(n);
        for (i, l) in labels.iter().enumerate() {
            if seen.insert(l.as_str(), i).is_some() {
                return Err(GraphError::DuplicateNode(l.clone()));
            }
        }

        let mut block_of = vec![usize::MAX; n];
        for (j, block) in ordering.blocks().iter().enumerate() {
            for &v in block {
                if v >= n {
                    return Err(GraphError::UnknownNode(format!("#{v}")));
                }
                if block_of[v] != usize::MAX {
                    return Err(GraphError::NodeInSeveralBlocks(labels[v].clone()));
                }
                block_of[v] = j;
            }
        }
        if let Some(v) = block_of.iter().position(|&b| b == usize::MAX) {
            return Err(GraphError::NodeNotInAnyBlock(labels[v].clone()));
        }

        let mut pair = vec![None; n * n];
        let mut list = Vec::new();
        for e in edges {
            let e = Edge::new(e.from, e.to, e.kind);
            if e.from >= n || e.to >= n {
                return Err(GraphError::UnknownNode(format!("#{}", e.from.max(e.to))));
            }
            let (a, b) = (&labels[e.from], &labels[e.to]);
            if e.from == e.to {
                return Err(GraphError::SelfEdge(a.clone()));
            }
            if pair[e.from * n + e.to].is_some() {
                return Err(GraphError::DuplicateEdge(a.clone(), b.clone()));
            }
            let (bf, bt) = (block_of[e.from], block_of[e.to]);
            let violates = |kind| GraphError::EdgeKindViolatesBlocks {
                a: a.clone(),
                b: b.clone(),
                kind,
            };
            match e.kind {
                EdgeKind::Arrow => {
                    if bf == bt {
                        return Err(violates(e.kind));
                    }
                    if bf < bt {
                        return Err(GraphError::ArrowPointsToPast {
                            tail: a.clone(),
                            head: b.clone(),
                        });
                    }
                }
                EdgeKind::Dashed => {
                    if bf != bt || ordering.is_context_block(bf) {
                        return Err(violates(e.kind));
                    }
                }
                EdgeKind::Full => {
                    if bf != bt || !ordering.is_context_block(bf) {
                        return Err(violates(e.kind));
                    }
                }
            }
            pair[e.from * n + e.to] = Some(e);
            pair[e.to * n + e.from] = Some(e);
            list.push(e);
        }
        list.sort();

        let mut nbrs = vec![Vec::new(); n];
        for e in &list {
            nbrs[e.from].push(e.to);
            nbrs[e.to].push(e.from);
        }
        for l in &mut nbrs {
            l.sort_unstable();
        }

        Ok(RegressionGraph {
            labels,
            ordering,
            block_of,
            edges: list,
            pair,
            nbrs,
        })
    }

    pub fn builder() -> GraphBuilder {
        GraphBuilder::default()
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, v: usize) -> &str {
        &self.labels[v]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Resolves a list of labels, failing on the first unknown one.
    pub fn indices_of<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>, GraphError> {
        labels
            .iter()
            .map(|l| {
                self.index_of(l.as_ref())
                    .ok_or_else(|| GraphError::UnknownNode(l.as_ref().to_string()))
            })
            .collect()
    }

    pub fn ordering(&self) -> &BlockOrdering {
        &self.ordering
    }

    pub fn block_of(&self, v: usize) -> usize {
        self.block_of[v]
    }

    pub fn is_context(&self, v: usize) -> bool {
        self.ordering.is_context_block(self.block_of[v])
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<Edge> {
        self.pair[a * self.num_nodes() + b]
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.edge_between(a, b).is_some()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.nbrs[v]
    }

    /// Tails of arrows pointing at `v`.
    pub fn parents(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.nbrs[v].iter().copied().filter(move |&u| {
            matches!(self.edge_between(u, v), Some(e) if e.kind == EdgeKind::Arrow && e.to == v)
        })
    }

    /// Unordered node pairs joined by any edge, as `(min, max)`.
    pub fn skeleton(&self) -> BTreeSet<(usize, usize)> {
        self.edges
            .iter()
            .map(|e| (e.from.min(e.to), e.from.max(e.to)))
            .collect()
    }

    /// Connected components after deleting all arrows, each sorted, listed by
    /// smallest member.
    pub fn connected_components_undirected(&self) -> Vec<Vec<usize>> {
        let n = self.num_nodes();
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![s];
            comp[s] = id;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &w in &self.nbrs[v] {
                    let e = self.edge_between(v, w).unwrap();
                    if e.kind != EdgeKind::Arrow && comp[w] == usize::MAX {
                        comp[w] = id;
                        members.push(w);
                        stack.push(w);
                    }
                }
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }

    /// The factors of the block-recursive factorisation `f_N = f_{u|v} f_v`,
    /// in block order.
    pub fn factorization(&self) -> Vec<Factor> {
        (0..self.ordering.num_blocks())
            .map(|j| {
                let response = self.ordering.blocks()[j].clone();
                if self.ordering.is_context_block(j) {
                    return Factor { response, given: Vec::new(), parents: Vec::new() };
                }
                let given = self.ordering.after(j);
                let pa: BTreeSet<usize> = response.iter().flat_map(|&v| self.parents(v)).collect();
                let parents = given.iter().copied().filter(|v| pa.contains(v)).collect();
                Factor { response, given, parents }
            })
            .collect()
    }

    /// One pairwise independence per uncoupled pair: the statement attached to
    /// the missing edge by the block ordering.
    pub fn defining_statements(&self) -> Vec<IndependenceStatement> {
        let n = self.num_nodes();
        let mut out = Vec::new();
        for i in 0..n {
            for k in i + 1..n {
                if self.adjacent(i, k) {
                    continue;
                }
                let (bi, bk) = (self.block_of[i], self.block_of[k]);
                let c: Vec<usize> = if bi == bk {
                    if self.ordering.is_context_block(bi) {
                        self.ordering
                            .context()
                            .iter()
                            .copied()
                            .filter(|&x| x != i && x != k)
                            .collect()
                    } else {
                        self.ordering.after(bi)
                    }
                } else {
                    // the response is the node in the earlier block
                    let (resp, other) = if bi < bk { (i, k) } else { (k, i) };
                    self.ordering
                        .after(self.block_of[resp])
                        .into_iter()
                        .filter(|&x| x != other)
                        .collect()
                };
                out.push(IndependenceStatement::pairwise(i, k, c));
            }
        }
        out
    }

    /// Grouped local statements for each response `i` in `g_j`:
    /// `i ⊥ (g_{>j} \ pa(i)) | pa(i)`, skipping responses whose past is all
    /// parents.
    pub fn local_statements(&self) -> Vec<IndependenceStatement> {
        let mut out = Vec::new();
        for (j, block) in self.ordering.response_blocks().iter().enumerate() {
            let past = self.ordering.after(j);
            for &i in block {
                let pa: BTreeSet<usize> = self.parents(i).collect();
                let rest: BTreeSet<usize> = past.iter().copied().filter(|x| !pa.contains(x)).collect();
                if !rest.is_empty() {
                    out.push(IndependenceStatement::new([i], rest, pa).expect("disjoint by construction"));
                }
            }
        }
        out
    }

    pub fn enumerate_vs(&self) -> Vec<VConfiguration> {
        enumerate_vs(self)
    }

    /// The subgraph induced by `keep`, with blocks restricted and emptied
    /// blocks dropped.
    pub fn induced_subgraph(&self, keep: &[usize]) -> RegressionGraph {
        let mut keep: Vec<usize> = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let mut new_index = vec![usize::MAX; self.num_nodes()];
        for (new, &old) in keep.iter().enumerate() {
            new_index[old] = new;
        }
        let labels = keep.iter().map(|&v| self.labels[v].clone()).collect();
        let mut blocks = Vec::new();
        let mut split = 0;
        for (j, b) in self.ordering.blocks().iter().enumerate() {
            let nb: Vec<usize> = b
                .iter()
                .filter(|&&v| new_index[v] != usize::MAX)
                .map(|&v| new_index[v])
                .collect();
            if !nb.is_empty() {
                if !self.ordering.is_context_block(j) {
                    split += 1;
                }
                blocks.push(nb);
            }
        }
        let edges = self
            .edges
            .iter()
            .filter(|e| new_index[e.from] != usize::MAX && new_index[e.to] != usize::MAX)
            .map(|e| Edge::new(new_index[e.from], new_index[e.to], e.kind));
        let ordering = BlockOrdering::new(blocks, split).expect("restriction keeps ordering valid");
        RegressionGraph::new(labels, ordering, edges).expect("restriction keeps graph valid")
    }

    /// Label-based canonical view used for equality: blocks as label sets,
    /// response-block count, and edges keyed by labels.
    fn canonical(&self) -> CanonicalView<'_> {
        let blocks = self
            .ordering
            .blocks()
            .iter()
            .map(|b| b.iter().map(|&v| self.labels[v].as_str()).collect())
            .collect();
        let edges = self
            .edges
            .iter()
            .map(|e| {
                let (a, b) = (self.labels[e.from].as_str(), self.labels[e.to].as_str());
                if e.kind.is_directed() || a < b {
                    (a, b, e.kind)
                } else {
                    (b, a, e.kind)
                }
            })
            .collect();
        (blocks, self.ordering.split(), edges)
    }

    pub fn format_nodes(&self, nodes: &[usize]) -> String {
        nodes
            .iter()
            .map(|&v| self.labels[v].as_str())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn format_edge(&self, e: &Edge) -> String {
        let op = match e.kind {
            EdgeKind::Arrow => "->",
            EdgeKind::Dashed => "~~",
            EdgeKind::Full => "--",
        };
        format!("{} {} {}", self.labels[e.from], op, self.labels[e.to])
    }
}

impl PartialEq for RegressionGraph {
    fn eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }
}

impl Eq for RegressionGraph {}

/// A factor `f_{response | given}` of the graph's factorisation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub response: Vec<usize>,
    /// The whole past `g_{>j}`.
    pub given: Vec<usize>,
    /// The part of the past with an arrow into the block; the factor only
    /// depends on these.
    pub parents: Vec<usize>,
}

impl Factor {
    pub fn display(&self, g: &RegressionGraph) -> String {
        Self::fmt(g, &self.response, &self.given)
    }

    /// Like [`display`](Self::display) but conditioning on the parents only,
    /// e.g. `f_{1|2}` for a Markov chain.
    pub fn display_reduced(&self, g: &RegressionGraph) -> String {
        Self::fmt(g, &self.response, &self.parents)
    }

    fn fmt(g: &RegressionGraph, response: &[usize], given: &[usize]) -> String {
        if given.is_empty() {
            format!("f_{{{}}}", g.format_nodes(response))
        } else {
            format!("f_{{{}|{}}}", g.format_nodes(response), g.format_nodes(given))
        }
    }
}

/// Label-based construction helper.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    blocks: Vec<Vec<String>>,
    context: Vec<Vec<String>>,
    edges: Vec<(String, String, EdgeKind)>,
}

impl GraphBuilder {
    pub fn response_block<I, S>(mut self, nodes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.blocks.push(nodes.into_iter().map(Into::into).collect());
        self
    }

    pub fn context_block<I, S>(mut self, nodes: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.context.push(nodes.into_iter().map(Into::into).collect());
        self
    }

    pub fn edge(mut self, a: impl Into<String>, b: impl Into<String>, kind: EdgeKind) -> Self {
        self.edges.push((a.into(), b.into(), kind));
        self
    }

    pub fn arrow(self, tail: impl Into<String>, head: impl Into<String>) -> Self {
        self.edge(tail, head, EdgeKind::Arrow)
    }

    pub fn dashed(self, a: impl Into<String>, b: impl Into<String>) -> Self {
        self.edge(a, b, EdgeKind::Dashed)
    }

    pub fn full(self, a: impl Into<String>, b: impl Into<String>) -> Self {
        self.edge(a, b, EdgeKind::Full)
    }

    pub fn build(self) -> Result<RegressionGraph, GraphError> {
        if self.context.len() > 1 {
            return Err(GraphError::MultipleContextBlocks(self.context.len()));
        }
        let split = self.blocks.len();
        let mut labels: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut blocks = Vec::new();
        for block in self.blocks.into_iter().chain(self.context) {
            let mut ids = Vec::with_capacity(block.len());
            for l in block {
                if index.contains_key(&l) {
                    return Err(GraphError::NodeInSeveralBlocks(l));
                }
                index.insert(l.clone(), labels.len());
                ids.push(labels.len());
                labels.push(l);
            }
            blocks.push(ids);
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for (a, b, kind) in self.edges {
            let ia = *index.get(&a).ok_or_else(|| GraphError::NodeNotInAnyBlock(a.clone()))?;
            let ib = *index.get(&b).ok_or_else(|| GraphError::NodeNotInAnyBlock(b.clone()))?;
            edges.push(Edge::new(ia, ib, kind));
        }
        let ordering = BlockOrdering::new(blocks, split)?;
        RegressionGraph::new(labels, ordering, edges)
    }
}

type CanonicalView<'a> = (Vec<BTreeSet<&'a str>>, usize, BTreeSet<(&'a str, &'a str, EdgeKind)>);

/// JSON form: nodes, blocks by label, the response/context split, and edges
/// (`from` is the tail of an arrow).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GraphJson {
    pub nodes: Vec<String>,
    pub blocks: Vec<Vec<String>>,
    pub response_blocks: usize,
    pub edges: Vec<EdgeJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EdgeJson {
    pub from: String,
    pub to: String,
    pub kind: EdgeKind,
}

impl From<&RegressionGraph> for GraphJson {
    fn from(g: &RegressionGraph) -> Self {
        GraphJson {
            nodes: g.labels.clone(),
            blocks: g
                .ordering
                .blocks()
                .iter()
                .map(|b| b.iter().map(|&v| g.labels[v].clone()).collect())
                .collect(),
            response_blocks: g.ordering.split(),
            edges: g
                .edges
                .iter()
                .map(|e| EdgeJson {
                    from: g.labels[e.from].clone(),
                    to: g.labels[e.to].clone(),
                    kind: e.kind,
                })
                .collect(),
        }
    }
}

impl TryFrom<GraphJson> for RegressionGraph {
    type Error = GraphError;

    fn try_from(j: GraphJson) -> Result<Self, GraphError> {
        let index: HashMap<&str, usize> = j
            .nodes
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let lookup = |l: &str| {
            index
                .get(l)
                .copied()
                .ok_or_else(|| GraphError::UnknownNode(l.to_string()))
        };
        let blocks = j
            .blocks
            .iter()
            .map(|b| b.iter().map(|l| lookup(l)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        let edges = j
            .edges
            .iter()
            .map(|e| Ok(Edge::new(lookup(&e.from)?, lookup(&e.to)?, e.kind)))
            .collect::<Result<Vec<_>, GraphError>>()?;
        let ordering = BlockOrdering::new(blocks, j.response_blocks)?;
        RegressionGraph::new(j.nodes.clone(), ordering, edges)
    }
}

impl RegressionGraph {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GraphJson::from(self)).expect("graph json")
    }

    pub fn from_json(s: &str) -> Result<Self, TextError> {
        let j: GraphJson = serde_json::from_str(s).map_err(|e| TextError::Json(e.to_string()))?;
        Ok(RegressionGraph::try_from(j)?)
    }
}
