use std::fmt;

use super::{Edge, Mark, RegressionGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VKind {
    /// Both edge ends at the inner node are arrowhead-like.
    Collision,
    Transmitting,
}

/// A V: uncoupled endpoints `i < k` both adjacent to `inner`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VConfiguration {
    pub i: usize,
    pub inner: usize,
    pub k: usize,
    pub edge_i: Edge,
    pub edge_k: Edge,
    pub kind: VKind,
}

impl VConfiguration {
    /// The classification rule shared with walks: collision iff both ends at
    /// the inner node are heads.
    pub fn classify(edge_i: &Edge, edge_k: &Edge, inner: usize) -> VKind {
        if edge_i.mark_at(inner) == Mark::Head && edge_k.mark_at(inner) == Mark::Head {
            VKind::Collision
        } else {
            VKind::Transmitting
        }
    }

    /// Shape with generic names, e.g. `i -> o <- k` or `i ~~ o <- k`.
    pub fn form(&self) -> String {
        format!(
            "i {} o {} k",
            end_glyph(&self.edge_i, self.i, self.inner),
            end_glyph(&self.edge_k, self.inner, self.k)
        )
    }

    pub fn display(&self, g: &RegressionGraph) -> String {
        format!(
            "{} {} {} {} {}",
            g.label(self.i),
            end_glyph(&self.edge_i, self.i, self.inner),
            g.label(self.inner),
            end_glyph(&self.edge_k, self.inner, self.k),
            g.label(self.k)
        )
    }
}

fn end_glyph(e: &Edge, left: usize, right: usize) -> &'static str {
    match (e.mark_at(left), e.mark_at(right)) {
        (Mark::Tail, Mark::Head) => "->",
        (Mark::Head, Mark::Tail) => "<-",
        (Mark::Head, Mark::Head) => "~~",
        (Mark::Tail, Mark::Tail) => "--",
    }
}

impl fmt::Display for VKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VKind::Collision => "collision",
            VKind::Transmitting => "transmitting",
        })
    }
}

/// Every V of the graph, sorted by `(i, k, inner)`.
pub fn enumerate_vs(g: &RegressionGraph) -> Vec<VConfiguration> {
    let mut out = Vec::new();
    for o in 0..g.num_nodes() {
        let nb = g.neighbors(o);
        for (x, &i) in nb.iter().enumerate() {
            for &k in &nb[x + 1..] {
                if g.adjacent(i, k) {
                    continue;
                }
                let edge_i = g.edge_between(i, o).unwrap();
                let edge_k = g.edge_between(o, k).unwrap();
                out.push(VConfiguration {
                    i,
                    inner: o,
                    k,
                    edge_i,
                    edge_k,
                    kind: VConfiguration::classify(&edge_i, &edge_k, o),
                });
            }
        }
    }
    out.sort_by_key(|v| (v.i, v.k, v.inner));
    out
}
