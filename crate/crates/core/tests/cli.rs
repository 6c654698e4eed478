use std::path::{Path, PathBuf};

use regraph::cli::{run, EXIT_ERROR, EXIT_FALSE, EXIT_OK, EXIT_USAGE};

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name).display().to_string()
}

/// Runs `rg` with `args`; returns exit code, stdout and stderr.
fn rg(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(std::iter::once("rg").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(s: &str) -> serde_json::Value {
    serde_json::from_str(s).unwrap_or_else(|e| panic!("not JSON ({e}): {s}"))
}

#[test]
fn implies_true_and_false() {
    let g = fixture("chain5.txt");
    assert_eq!(rg(&["implies", &g, "1 _||_ 4 | 3"]).0, EXIT_OK);
    assert_eq!(rg(&["implies", &g, "1 _||_ 4 | 3", "--paths"]).0, EXIT_OK);
    let (code, out, _) = rg(&["implies", &g, "1 _||_ 3"]);
    assert_eq!((code, out.trim()), (EXIT_FALSE, "false"));
    let (code, out, _) = rg(&["--json", "implies", &g, "1 _||_ 5 | 2"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(json(&out)["implied"], true);
}

#[test]
fn equiv_exit_codes() {
    let g = fixture("development.txt");
    assert_eq!(rg(&["equiv", &g, &g]).0, EXIT_OK);
    let (code, out, _) = rg(&["--json", "equiv", &g, &g]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(json(&out)["equivalent"], true);
}

#[test]
fn marginal_matches_fixture() {
    let (code, out, _) = rg(&["marginalize", &fixture("development.txt"), "--over", "X8,X4"]);
    assert_eq!(code, EXIT_OK);
    let expected = std::fs::read_to_string(fixture("development_y_marginal.txt")).unwrap();
    assert_eq!(out.trim_end(), expected.trim_end());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    let p = path.to_str().unwrap();
    assert_eq!(rg(&["marginalize", &fixture("development.txt"), "--over", "X8", "--over", "X4", "-o", p]).0, EXIT_OK);
    assert_eq!(std::fs::read_to_string(&path).unwrap().trim_end(), expected.trim_end());
}

#[test]
fn validate_and_structure() {
    let g = fixture("development.txt");
    assert_eq!(rg(&["validate", &g]).0, EXIT_OK);
    let (code, out, _) = rg(&["validate", &g, "--emit", "dot"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("digraph") || out.contains("graph"));
    let (code, out, _) = rg(&["--json", "structure", &fixture("chain5.txt"), "--view", "defining"]);
    assert_eq!(code, EXIT_OK);
    assert!(json(&out).as_array().is_some_and(|a| !a.is_empty()));
    let (code, out, _) = rg(&["structure", &g, "--view", "vs"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("witness"));
}

#[test]
fn expand_dashed_edges() {
    let (code, out, _) = rg(&["--json", "expand", &fixture("development.txt")]);
    assert_eq!(code, EXIT_OK);
    assert!(json(&out).is_object());
}

#[test]
fn oracle_certifies_chain() {
    let (code, out, _) = rg(&["--seed", "3", "oracle", &fixture("chain5.txt"), "--seeds", "2"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.starts_with("passed"));
}

#[test]
fn usage_errors() {
    assert_eq!(rg(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(rg(&[]).0, EXIT_USAGE);
    assert_eq!(rg(&["implies", &fixture("chain5.txt")]).0, EXIT_USAGE);
    assert_eq!(rg(&["simulate", "--n", "10"]).0, EXIT_USAGE);
    assert_eq!(rg(&["--help"]).0, EXIT_OK);
}

#[test]
fn computation_errors() {
    let (code, _, err) = rg(&["validate", "/nonexistent/graph.txt"]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.starts_with("error:"));
    assert_eq!(rg(&["implies", &fixture("chain5.txt"), "1 _||_ 9"]).0, EXIT_ERROR);
    assert_eq!(rg(&["marginalize", &fixture("chain5.txt"), "--over", "nope"]).0, EXIT_ERROR);
}

#[test]
fn simulate_fit_report_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data: PathBuf = dir.path().join("data.csv");
    let out_dir = dir.path().join("fit");
    let d = data.to_str().unwrap();
    assert_eq!(rg(&["--seed", "7", "simulate", "--n", "400", "-o", d]).0, EXIT_OK);
    let header = std::fs::read_to_string(&data).unwrap();
    assert!(header.starts_with("Y8,X8,Y4,X4,Yr,Xr,E,H"));

    let config = fixture("mannheim.toml");
    let (code, out, err) = rg(&["fit", d, "--config", &config, "-o", out_dir.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("Y8"));
    for f in ["report.md", "report.json", "graph.txt", "graph.dot"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }

    let (_, seq, _) = rg(&["--json", "fit", d, "--config", &config, "--sequential"]);
    let (_, par, _) = rg(&["--json", "fit", d, "--config", &config]);
    assert_eq!(seq, par);

    let report = out_dir.join("report.json");
    let r = report.to_str().unwrap();
    let (code, md, _) = rg(&["report", r]);
    assert_eq!(code, EXIT_OK);
    assert!(md.contains('|'));
    let (code, text, _) = rg(&["report", r, "--format", "text"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(text.trim_end(), std::fs::read_to_string(out_dir.join("graph.txt")).unwrap().trim_end());
    let (code, dot, _) = rg(&["report", out_dir.join("graph.txt").to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(dot.contains("->"));
}
