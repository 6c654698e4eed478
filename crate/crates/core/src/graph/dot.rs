use std::fmt::Write;

use super::{BlockOrdering, Edge, EdgeKind, RegressionGraph};

/// Graphviz export: solid arrows, dashed undirected lines for dashed edges and
/// solid undirected lines for full edges. Blocks become clusters.
pub fn to_dot(g: &RegressionGraph) -> String {
    render(g.labels(), g.ordering(), g.edges())
}

pub(crate) fn render(labels: &[String], ord: &BlockOrdering, edges: &[Edge]) -> String {
    let mut out = String::from("digraph regression_graph {\n  rankdir=RL;\n  node [shape=circle];\n");
    for (j, block) in ord.blocks().iter().enumerate() {
        let name = if ord.is_context_block(j) {
            "context".to_string()
        } else {
            format!("g{}", j + 1)
        };
        let _ = writeln!(out, "  subgraph cluster_{j} {{\n    label=\"{name}\";");
        for &v in block {
            let _ = writeln!(out, "    \"{}\";", labels[v]);
        }
        out.push_str("  }\n");
    }
    for e in edges {
        let attrs = match e.kind {
            EdgeKind::Arrow => "",
            EdgeKind::Dashed => " [dir=none, style=dashed]",
            EdgeKind::Full => " [dir=none]",
        };
        let _ = writeln!(out, "  \"{}\" -> \"{}\"{};", labels[e.from], labels[e.to], attrs);
    }
    out.push_str("}\n");
    out
}
