//! Line-oriented text format.
//!
//! ```text
//! # Example
//! blocks: Y8 X8 | Y4 X4 || Yr Xr E H
//! Y4 -> Y8
//! Y8 ~~ X8
//! Yr -- E
//! ```
//!
//! `|` separates response blocks, `||` starts the context block. `A -> B` is
//! an arrow with tail `A`, `A <- B` is accepted as well, `A ~~ B` a dashed and
//! `A -- B` a full line.

use thiserror::Error;

use super::{EdgeKind, GraphBuilder, GraphError, RegressionGraph};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TextError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `blocks:` header")]
    MissingBlocks,
    #[error("invalid graph json: {0}")]
    Json(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub fn parse_graph(src: &str) -> Result<RegressionGraph, TextError> {
    let mut builder: Option<GraphBuilder> = None;
    for (idx, raw) in src.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("blocks:") {
            if builder.is_some() {
                return Err(TextError::Syntax { line: line_no, msg: "second `blocks:` header".into() });
            }
            builder = Some(parse_blocks(rest));
            continue;
        }
        let b = builder.take().ok_or(TextError::MissingBlocks)?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(TextError::Syntax {
                line: line_no,
                msg: format!("expected `A op B`, got `{line}`"),
            });
        }
        let (a, op, c) = (toks[0], toks[1], toks[2]);
        builder = Some(match op {
            "->" => b.arrow(a, c),
            "<-" => b.arrow(c, a),
            "~~" => b.dashed(a, c),
            "--" => b.full(a, c),
            _ => {
                return Err(TextError::Syntax {
                    line: line_no,
                    msg: format!("unknown edge operator `{op}`"),
                })
            }
        });
    }
    Ok(builder.ok_or(TextError::MissingBlocks)?.build()?)
}

fn parse_blocks(spec: &str) -> GraphBuilder {
    let (responses, context) = match spec.split_once("||") {
        Some((r, c)) => (r, Some(c)),
        None => (spec, None),
    };
    let names = |s: &str| -> Vec<String> {
        s.split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    };
    let mut b = GraphBuilder::default();
    for block in responses.split('|') {
        let nodes = names(block);
        if !nodes.is_empty() {
            b = b.response_block(nodes);
        }
    }
    if let Some(c) = context {
        let nodes = names(c);
        if !nodes.is_empty() {
            b = b.context_block(nodes);
        }
    }
    b
}

/// Canonical text form: header, then arrows, dashed and full lines, each group
/// in node order.
pub fn write_graph(g: &RegressionGraph) -> String {
    let ord = g.ordering();
    let fmt_block = |b: &[usize]| g.format_nodes(b).replace(',', " ");
    let responses: Vec<String> = ord.response_blocks().iter().map(|b| fmt_block(b)).collect();
    let mut out = format!("blocks: {} ||", responses.join(" | "));
    if !ord.context().is_empty() {
        out.push(' ');
        out.push_str(&fmt_block(ord.context()));
    }
    out.push('\n');
    let mut edges = g.edges().to_vec();
    edges.sort_by_key(|e| (e.kind, e.to, e.from));
    for e in &edges {
        out.push_str(&g.format_edge(e));
        out.push('\n');
    }
    out
}

impl EdgeKind {
    pub fn operator(self) -> &'static str {
        match self {
            EdgeKind::Arrow => "->",
            EdgeKind::Dashed => "~~",
            EdgeKind::Full => "--",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_chain() {
        let g = parse_graph("blocks: 1 | 2 | 3 | 4 || 5\n2 -> 1\n3 -> 2\n4 <- 5\n3 <- 4\n").unwrap();
        assert_eq!(g.edges().len(), 4);
        assert_eq!(g.ordering().split(), 4);
        assert_eq!(parse_graph(&write_graph(&g)).unwrap(), g);
    }

    #[test]
    fn comments_and_commas() {
        let g = parse_graph("# hi\nblocks: a,b || c, d # tail\na ~~ b\nc -- d\nc -> a\n").unwrap();
        assert_eq!(g.edges().len(), 3);
    }

    #[test]
    fn context_free_graph() {
        let g = parse_graph("blocks: a b\na ~~ b\n").unwrap();
        assert!(g.ordering().context().is_empty());
        let text = write_graph(&g);
        assert!(text.starts_with("blocks: a b ||\n"));
        assert_eq!(parse_graph(&text).unwrap(), g);
    }

    #[test]
    fn bad_operator() {
        let err = parse_graph("blocks: a || b\nb => a\n").unwrap_err();
        assert!(matches!(err, TextError::Syntax { line: 2, .. }));
    }

    #[test]
    fn missing_header() {
        assert_eq!(parse_graph("a -> b\n").unwrap_err(), TextError::MissingBlocks);
    }
}
