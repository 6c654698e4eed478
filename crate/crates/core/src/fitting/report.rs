//! Markdown, JSON and graph outputs of a fit.

use std::fmt::Write as _;
use std::path::Path;

use super::select::{RegressionTable, TraceStep};
use super::terms::wilkinson;
use super::FitReport;
use crate::graph::{to_dot, write_graph};

fn num(x: f64) -> String {
    format!("{x:.2}")
}

fn formula(t: &RegressionTable, order: &[String]) -> String {
    format!("{}: {}", t.response, wilkinson(&t.selected_terms(), order))
}

/// Starting model, selected model and `z'` of excluded terms, one row per term.
pub fn regression_table_markdown(t: &RegressionTable, order: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "### Response: {}\n", t.response);
    let _ = writeln!(
        s,
        "| explanatory variables | coeff | s_coeff | z_obs | selected coeff | selected s_coeff | selected z_obs | excluded z'_obs |"
    );
    let _ = writeln!(s, "|---|---:|---:|---:|---:|---:|---:|---:|");
    let _ = writeln!(s, "| constant | {} | | | {} | | | |", num(t.starting.intercept), num(t.selected.intercept));
    for row in &t.starting.rows {
        let sel = t.selected.row(&row.term);
        let ex = t.excluded.iter().find(|e| e.term == row.term);
        let (sc, ss, sz) = match sel {
            Some(r) => (num(r.coeff), num(r.s_coeff), num(r.z_obs)),
            None => Default::default(),
        };
        let zp = ex.map(|e| num(e.z_prime)).unwrap_or_default();
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {sc} | {ss} | {sz} | {zp} |",
            row.term,
            num(row.coeff),
            num(row.s_coeff),
            num(row.z_obs)
        );
    }
    let _ = writeln!(
        s,
        "\nR²_full = {}, selected model {}, R²_sel = {}\n",
        num(t.r2_full()),
        formula(t, order),
        num(t.r2_sel())
    );
    let steps: Vec<String> = t
        .trace
        .iter()
        .map(|st| match st {
            TraceStep::Deleted { term, z_obs } => format!("delete {term} (z = {})", num(*z_obs)),
            TraceStep::Reentered { term, z_prime } => format!("re-enter {term} (z' = {})", num(*z_prime)),
            TraceStep::Cycle => "stop on repeated model".to_string(),
        })
        .collect();
    if !steps.is_empty() {
        let _ = writeln!(s, "Selection: {}\n", steps.join(", "));
    }
    s
}

/// Selected model and both R² values per response.
pub fn summary_markdown(r: &FitReport) -> String {
    let order = r.config.blocks.variables();
    let mut s = String::from("| Response | Selected model | R²_full | R²_sel |\n|---|---|---:|---:|\n");
    for t in r.tables.iter().chain(&r.context_tables) {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} |",
            t.response,
            wilkinson(&t.selected_terms(), &order),
            num(t.r2_full()),
            num(t.r2_sel())
        );
    }
    s
}

pub fn edge_tests_markdown(r: &FitReport) -> String {
    let mut s = String::new();
    if !r.dashed.is_empty() {
        s.push_str("| joint responses | z_obs | dashed line |\n|---|---:|---|\n");
        for d in &r.dashed {
            let _ = writeln!(s, "| {}, {} | {} | {} |", d.a, d.b, num(d.z_obs), if d.present { "yes" } else { "no" });
        }
        s.push('\n');
    }
    if !r.full.is_empty() {
        s.push_str("| context pair | z in first regression | z in second regression | full line |\n|---|---:|---:|---|\n");
        for f in &r.full {
            let _ = writeln!(
                s,
                "| {}, {} | {} | {} | {} |",
                f.a,
                f.b,
                num(f.z_ab),
                num(f.z_ba),
                if f.present { "yes" } else { "no" }
            );
        }
        s.push('\n');
    }
    s
}

pub fn markdown(r: &FitReport) -> String {
    let order = r.config.blocks.variables();
    let mut s = format!(
        "# Fitted regression graph\n\nn = {}, blocks `{}`, threshold {}\n\n## Fitted equations\n\n",
        r.n, r.config.blocks, r.config.threshold
    );
    s.push_str(&summary_markdown(r));
    s.push_str("\n## Regressions\n\n");
    for t in r.tables.iter().chain(&r.context_tables) {
        s.push_str(&regression_table_markdown(t, &order));
    }
    s.push_str("## Edge tests\n\n");
    s.push_str(&edge_tests_markdown(r));
    s.push_str("## Graph\n\n```\n");
    s.push_str(&write_graph(&r.graph));
    s.push_str("```\n");
    s
}

/// Writes `report.md`, `report.json`, `graph.txt` and `graph.dot` into `dir`.
pub fn write_report(r: &FitReport, dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.md"), markdown(r))?;
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(r).map_err(std::io::Error::other)?)?;
    std::fs::write(dir.join("graph.txt"), write_graph(&r.graph))?;
    std::fs::write(dir.join("graph.dot"), to_dot(&r.graph))?;
    Ok(())
}
