//! The `rg` command line.
//!
//! Exit codes: 0 success or true, 1 false, 2 usage error, 3 computation error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::fitting::{self, report, FitConfig, FitReport, MannheimModel};
use crate::graph::{parse_graph, to_dot, write_graph, GraphJson, RegressionGraph, VKind};
use crate::independence::{
    implied_structure, implies_with, separation_witness, IndependenceStatement, Method,
};
use crate::oracle::{self, discrete, Certificate};
use crate::par::Execution;
use crate::transform::{expand_full_line, expand_hidden, marginalize_spec, markov_equivalent, MarginalSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FALSE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "rg", version, about = "Regression graphs: independence queries, transforms, oracles and fitting")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Numerical tolerance for zero partial correlations.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check that a file holds a valid regression graph.
    Validate {
        graph: PathBuf,
        /// Print the graph in this format instead of a summary.
        #[arg(long, value_enum)]
        emit: Option<GraphFormat>,
    },
    /// Decide whether the graph implies `A _||_ B | C`.
    Implies {
        graph: PathBuf,
        statement: String,
        /// Use simple-path enumeration instead of reachability.
        #[arg(long)]
        paths: bool,
    },
    /// List the pairwise independences, the defining statements or the Vs.
    Structure {
        graph: PathBuf,
        #[arg(long, value_enum, default_value_t = StructureView::Pairwise)]
        view: StructureView,
    },
    /// Marginalise over a node set.
    Marginalize {
        graph: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        over: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
        #[command(flatten)]
        output: GraphOutput,
    },
    /// Decide Markov equivalence of two graphs.
    Equiv { first: PathBuf, second: PathBuf },
    /// Replace dashed lines or a full line by hidden common sources.
    Expand {
        graph: PathBuf,
        /// Dashed pair `A,B`; may repeat.
        #[arg(long, value_name = "A,B")]
        dashed: Vec<String>,
        /// Full line `A,B`.
        #[arg(long, value_name = "A,B", conflicts_with = "dashed")]
        full: Option<String>,
        #[command(flatten)]
        output: GraphOutput,
    },
    /// Certify a graph against exact Gaussian models, or search for a
    /// distribution breaking singleton transitivity.
    Oracle(OracleArgs),
    /// Draw synthetic child development data.
    Simulate {
        #[arg(long, default_value_t = fitting::simulate::REFERENCE_N)]
        n: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Select regressions and build the fitted graph.
    Fit {
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Report directory.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Render a saved fit report or a graph file.
    Report {
        input: PathBuf,
        #[arg(long, value_enum)]
        format: Option<ReportFormat>,
    },
}

#[derive(Debug, Args)]
struct GraphOutput {
    /// Write the resulting graph here instead of standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    dot: bool,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(required_unless_present = "tracing")]
    graph: Option<PathBuf>,
    /// Number of random models, seeded from `--seed` upwards.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Certify the hidden-source expansion of this full line instead.
    #[arg(long, value_name = "A,B")]
    full_line: Option<String>,
    /// Search ternary mixtures for a singleton-transitivity violation.
    #[arg(long, conflicts_with = "graph")]
    tracing: bool,
    #[arg(long, default_value_t = 100_000)]
    draws: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GraphFormat {
    Text,
    Json,
    Dot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StructureView {
    Pairwise,
    Defining,
    Factorization,
    Vs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Markdown,
    Dot,
    Text,
    Json,
}

struct Failure {
    code: i32,
    msg: String,
}

fn fail(msg: impl std::fmt::Display) -> Failure {
    Failure { code: EXIT_ERROR, msg: msg.to_string() }
}

type Outcome = Result<i32, Failure>;

struct Ctx<'a> {
    seed: u64,
    tol: Option<f64>,
    json: bool,
    out: &'a mut dyn Write,
}

impl Ctx<'_> {
    fn print(&mut self, s: &str) -> Result<(), Failure> {
        self.out.write_all(s.as_bytes()).map_err(fail)?;
        if !s.ends_with('\n') {
            self.out.write_all(b"\n").map_err(fail)?;
        }
        Ok(())
    }

    fn print_json(&mut self, v: &Value) -> Result<(), Failure> {
        let s = serde_json::to_string_pretty(v).map_err(fail)?;
        self.print(&s)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| fail(format!("cannot read {}: {e}", path.display())))
}

fn parse_any(src: &str) -> Result<RegressionGraph, String> {
    if src.trim_start().starts_with('{') {
        RegressionGraph::from_json(src).map_err(|e| e.to_string())
    } else {
        parse_graph(src).map_err(|e| e.to_string())
    }
}

fn load_graph(path: &Path) -> Result<RegressionGraph, Failure> {
    parse_any(&read(path)?).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn nodes(g: &RegressionGraph, labels: &[String]) -> Result<Vec<usize>, Failure> {
    g.indices_of(labels).map_err(fail)
}

fn pair(g: &RegressionGraph, spec: &str) -> Result<(usize, usize), Failure> {
    let parts: Vec<String> = spec.split(',').map(|s| s.trim().to_string()).collect();
    match nodes(g, &parts)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Failure { code: EXIT_USAGE, msg: format!("expected a pair `A,B`, got `{spec}`") }),
    }
}

fn graph_value(g: &RegressionGraph) -> Value {
    serde_json::to_value(GraphJson::from(g)).expect("graph json")
}

fn emit_graph(ctx: &mut Ctx, g: &RegressionGraph, output: &GraphOutput, extra: Value) -> Result<(), Failure> {
    let text = if output.dot { to_dot(g) } else { write_graph(g) };
    if let Some(path) = &output.output {
        std::fs::write(path, &text).map_err(|e| fail(format!("cannot write {}: {e}", path.display())))?;
    }
    if ctx.json {
        let mut v = extra;
        v["graph"] = graph_value(g);
        ctx.print_json(&v)
    } else if output.output.is_none() {
        ctx.print(&text)
    } else {
        Ok(())
    }
}

fn validate(ctx: &mut Ctx, path: &Path, emit: Option<GraphFormat>) -> Outcome {
    let src = read(path)?;
    let g = match parse_any(&src) {
        Ok(g) => g,
        Err(e) => {
            if ctx.json {
                ctx.print_json(&json!({ "valid": false, "error": e }))?;
            } else {
                ctx.print(&format!("invalid: {e}"))?;
            }
            return Ok(EXIT_FALSE);
        }
    };
    match emit {
        Some(GraphFormat::Text) => ctx.print(&write_graph(&g))?,
        Some(GraphFormat::Json) => ctx.print(&g.to_json())?,
        Some(GraphFormat::Dot) => ctx.print(&to_dot(&g))?,
        None if ctx.json => {
            let factors: Vec<String> = g.factorization().iter().map(|f| f.display(&g)).collect();
            ctx.print_json(&json!({ "valid": true, "graph": graph_value(&g), "factorization": factors }))?;
        }
        None => {
            let ord = g.ordering();
            ctx.print(&format!(
                "valid: {} nodes, {} blocks ({} response), {} edges",
                g.num_nodes(),
                ord.num_blocks(),
                ord.split(),
                g.edges().len()
            ))?;
            let factors: Vec<String> = g.factorization().iter().map(|f| f.display_reduced(&g)).collect();
            ctx.print(&format!("factorization: {}", factors.join(" ")))?;
        }
    }
    Ok(EXIT_OK)
}

fn implies(ctx: &mut Ctx, path: &Path, statement: &str, paths: bool) -> Outcome {
    let g = load_graph(path)?;
    let s = IndependenceStatement::parse(&g, statement).map_err(fail)?;
    let method = if paths { Method::PathEnumeration } else { Method::Reachability };
    let holds = implies_with(&g, &s, method).map_err(fail)?;
    if ctx.json {
        ctx.print_json(&json!({ "statement": s.display(&g), "implied": holds }))?;
    } else {
        ctx.print(if holds { "true" } else { "false" })?;
    }
    Ok(if holds { EXIT_OK } else { EXIT_FALSE })
}

fn structure(ctx: &mut Ctx, path: &Path, view: StructureView) -> Outcome {
    let g = load_graph(path)?;
    let lines: Vec<String> = match view {
        StructureView::Pairwise => implied_structure(&g).map_err(fail)?.iter().map(|s| s.display(&g)).collect(),
        StructureView::Defining => g.defining_statements().iter().map(|s| s.display(&g)).collect(),
        StructureView::Factorization => g.factorization().iter().map(|f| f.display(&g)).collect(),
        StructureView::Vs => {
            let mut out = Vec::new();
            for v in g.enumerate_vs() {
                let w = separation_witness(&g, &v).map_err(fail)?;
                let kind = if v.kind == VKind::Collision { "collision" } else { "transmitting" };
                out.push(format!("{} [{kind}] witness c = {{{}}}", v.display(&g), g.format_nodes(&w.c)));
            }
            out
        }
    };
    if ctx.json {
        ctx.print_json(&json!(lines))?;
    } else if !lines.is_empty() {
        ctx.print(&lines.join("\n"))?;
    }
    Ok(EXIT_OK)
}

fn marginalize(ctx: &mut Ctx, path: &Path, over: &[String], given: &[String], output: &GraphOutput) -> Outcome {
    let g = load_graph(path)?;
    let spec = MarginalSpec { m: nodes(&g, over)?, c: nodes(&g, given)? };
    let r = marginalize_spec(&g, &spec).map_err(fail)?;
    let meta = json!({ "regression_graph": r.is_regression_graph, "certified": r.certified });
    match &r.graph {
        Some(h) if r.is_regression_graph => emit_graph(ctx, h, output, meta)?,
        _ => {
            let text = if output.dot { r.summary.to_dot() } else { r.summary.to_text() };
            if let Some(p) = &output.output {
                std::fs::write(p, &text).map_err(|e| fail(format!("cannot write {}: {e}", p.display())))?;
            }
            if ctx.json {
                let mut v = meta;
                v["summary"] = json!(r.summary.to_text());
                ctx.print_json(&v)?;
            } else if output.output.is_none() {
                ctx.print("# summary graph: the marginal is not a regression graph")?;
                ctx.print(&text)?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn equiv(ctx: &mut Ctx, a: &Path, b: &Path) -> Outcome {
    let (g1, g2) = (load_graph(a)?, load_graph(b)?);
    let eq = markov_equivalent(&g1, &g2).map_err(fail)?;
    if ctx.json {
        ctx.print_json(&json!({ "equivalent": eq }))?;
    } else {
        ctx.print(if eq { "true" } else { "false" })?;
    }
    Ok(if eq { EXIT_OK } else { EXIT_FALSE })
}

fn expand(ctx: &mut Ctx, path: &Path, dashed: &[String], full: Option<&str>, output: &GraphOutput) -> Outcome {
    let g = load_graph(path)?;
    if let Some(f) = full {
        let (a, b) = pair(&g, f)?;
        let x = expand_full_line(&g, a, b).map_err(fail)?;
        let meta = json!({ "latent": x.graph.label(x.latent), "in_class": x.in_class });
        emit_graph(ctx, &x.graph, output, meta)?;
    } else {
        let pairs = if dashed.is_empty() {
            g.edges().iter().filter(|e| e.kind == crate::graph::EdgeKind::Dashed).map(|e| (e.from, e.to)).collect()
        } else {
            dashed.iter().map(|d| pair(&g, d)).collect::<Result<Vec<_>, _>>()?
        };
        let x = expand_hidden(&g, &pairs).map_err(fail)?;
        let latents: Vec<&str> = x.latents.iter().map(|&l| x.graph.label(l)).collect();
        emit_graph(ctx, &x.graph, output, json!({ "latents": latents }))?;
    }
    Ok(EXIT_OK)
}

fn print_certificate(ctx: &mut Ctx, c: &Certificate) -> Outcome {
    let failures: Vec<_> = c.failures().collect();
    if ctx.json {
        ctx.print_json(&json!({
            "passed": c.passed(),
            "seeds": c.seeds,
            "checked": c.checks.len(),
            "implied": c.checks.iter().filter(|s| s.implied).count(),
            "failures": failures,
        }))?;
    } else {
        ctx.print(&format!(
            "{}: {} statements ({} implied) over {} seeds",
            if c.passed() { "passed" } else { "failed" },
            c.checks.len(),
            c.checks.iter().filter(|s| s.implied).count(),
            c.seeds.len()
        ))?;
        for f in failures {
            let max = f.rho.iter().fold(0.0f64, |m, r| m.max(r.abs()));
            let what = if f.implied { "implied but dependent" } else { "not implied but zero" };
            ctx.print(&format!("  {}: {what}, max |rho| = {max:.3e}", f.statement))?;
        }
    }
    Ok(if c.passed() { EXIT_OK } else { EXIT_FALSE })
}

fn run_oracle(ctx: &mut Ctx, a: &OracleArgs) -> Outcome {
    if a.tracing {
        let found = discrete::search_singleton_transitivity_violation(ctx.seed, a.draws);
        let Some((p, violations)) = found else {
            if ctx.json {
                ctx.print_json(&json!({ "found": false, "draws": a.draws }))?;
            } else {
                ctx.print(&format!("no violation in {} draws", a.draws))?;
            }
            return Ok(EXIT_FALSE);
        };
        if ctx.json {
            ctx.print_json(&json!({
                "found": true,
                "cardinalities": p.cardinalities(),
                "probabilities": p.probabilities(),
                "violations": violations,
            }))?;
        } else {
            ctx.print(&format!("violation found for cardinalities {:?}", p.cardinalities()))?;
            ctx.print(&format!("p = {:?}", p.probabilities()))?;
            for v in violations {
                ctx.print(&format!("  {} hold, {} fail", v.premises.join(" and "), v.failed.join(" and ")))?;
            }
        }
        return Ok(EXIT_OK);
    }
    let g = load_graph(a.graph.as_deref().expect("required by clap"))?;
    let seeds: Vec<u64> = (ctx.seed..ctx.seed + a.seeds).collect();
    let tol = ctx.tol.unwrap_or(oracle::ZERO_TOL);
    let cert = match &a.full_line {
        Some(fl) => {
            let (x, y) = pair(&g, fl)?;
            oracle::certify_full_line_expansion(&g, x, y, &seeds, tol)
        }
        None => oracle::certify_graph(&g, &seeds, tol),
    }
    .map_err(fail)?;
    print_certificate(ctx, &cert)
}

fn simulate(ctx: &mut Ctx, n: usize, output: Option<&Path>) -> Outcome {
    if n < 50 {
        return Err(Failure { code: EXIT_USAGE, msg: format!("--n must be at least 50, got {n}") });
    }
    let model = MannheimModel::new();
    let data = model.sample(ctx.seed, n);
    match output {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(|e| fail(format!("cannot write {}: {e}", p.display())))?;
            data.write_csv(f).map_err(fail)?;
            if ctx.json {
                ctx.print_json(&serde_json::to_value(&model).map_err(fail)?)?;
            } else {
                ctx.print(&format!("wrote {n} rows to {}", p.display()))?;
            }
        }
        None => {
            let mut buf = Vec::new();
            data.write_csv(&mut buf).map_err(fail)?;
            ctx.print(&String::from_utf8(buf).map_err(fail)?)?;
        }
    }
    Ok(EXIT_OK)
}

fn run_fit(ctx: &mut Ctx, data: &Path, config: &Path, output: Option<&Path>, sequential: bool) -> Outcome {
    let cfg = FitConfig::from_toml(&read(config)?).map_err(fail)?;
    let file = std::fs::File::open(data).map_err(|e| fail(format!("cannot read {}: {e}", data.display())))?;
    let ds = fitting::Dataset::from_csv(file).map_err(fail)?;
    let exec = if sequential { Execution::Sequential } else { Execution::default() };
    let r = fitting::fit(&ds, &cfg, exec).map_err(fail)?;
    if let Some(dir) = output {
        report::write_report(&r, dir).map_err(|e| fail(format!("cannot write {}: {e}", dir.display())))?;
    }
    if ctx.json {
        ctx.print_json(&serde_json::to_value(&r).map_err(fail)?)?;
    } else {
        ctx.print(&report::summary_markdown(&r))?;
        ctx.print(&write_graph(&r.graph))?;
    }
    Ok(EXIT_OK)
}

fn run_report(ctx: &mut Ctx, input: &Path, format: Option<ReportFormat>) -> Outcome {
    let src = read(input)?;
    if let Ok(r) = FitReport::from_json(&src) {
        let text = match format.unwrap_or(ReportFormat::Markdown) {
            ReportFormat::Markdown => report::markdown(&r),
            ReportFormat::Dot => to_dot(&r.graph),
            ReportFormat::Text => write_graph(&r.graph),
            ReportFormat::Json => serde_json::to_string_pretty(&r).map_err(fail)?,
        };
        ctx.print(&text)?;
        return Ok(EXIT_OK);
    }
    let g = parse_any(&src).map_err(|e| fail(format!("{}: neither a fit report nor a graph: {e}", input.display())))?;
    let text = match format.unwrap_or(ReportFormat::Dot) {
        ReportFormat::Dot | ReportFormat::Markdown => to_dot(&g),
        ReportFormat::Text => write_graph(&g),
        ReportFormat::Json => g.to_json(),
    };
    ctx.print(&text)?;
    Ok(EXIT_OK)
}

/// Runs one command. `argv` includes the program name.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if code == EXIT_OK { out } else { err };
            let _ = sink.write_all(text.as_bytes());
            return code;
        }
    };
    if let Some(t) = cli.tol {
        if !(t > 0.0 && t.is_finite()) {
            let _ = writeln!(err, "error: --tol must be positive");
            return EXIT_USAGE;
        }
    }
    let mut ctx = Ctx { seed: cli.seed, tol: cli.tol, json: cli.json, out };
    let result = match &cli.command {
        Command::Validate { graph, emit } => validate(&mut ctx, graph, *emit),
        Command::Implies { graph, statement, paths } => implies(&mut ctx, graph, statement, *paths),
        Command::Structure { graph, view } => structure(&mut ctx, graph, *view),
        Command::Marginalize { graph, over, given, output } => marginalize(&mut ctx, graph, over, given, output),
        Command::Equiv { first, second } => equiv(&mut ctx, first, second),
        Command::Expand { graph, dashed, full, output } => expand(&mut ctx, graph, dashed, full.as_deref(), output),
        Command::Oracle(a) => run_oracle(&mut ctx, a),
        Command::Simulate { n, output } => simulate(&mut ctx, *n, output.as_deref()),
        Command::Fit { data, config, output, sequential } => {
            run_fit(&mut ctx, data, config, output.as_deref(), *sequential)
        }
        Command::Report { input, format } => run_report(&mut ctx, input, *format),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.msg);
            f.code
        }
    }
}
