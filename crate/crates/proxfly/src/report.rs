//! Comparison tables: tasks and metrics down the side, one column per variant,
//! averages at the bottom.

use std::fmt::Write as _;

use proxfly_core::compare::{Cell, ComparisonTable};

pub fn task_label(task: &str) -> &str {
    match task {
        "hover_prox" => "Hovering",
        "circle_same" => "Circling (same)",
        "circle_reversed" => "Circling (reversed)",
        "flyover" => "Flyover",
        "docking" => "Docking",
        "hover" => "Hover (undisturbed)",
        other => other,
    }
}

fn rows(t: &ComparisonTable) -> Vec<(String, &'static str, Vec<Cell>)> {
    let mut out = Vec::new();
    for (i, task) in t.tasks.iter().enumerate() {
        out.push((task.clone(), "E_pos", t.cells[i].clone()));
        out.push((task.clone(), "E_att", t.cells[i].clone()));
    }
    out.push(("average".into(), "E_pos", t.averages.clone()));
    out.push(("average".into(), "E_att", t.averages.clone()));
    out
}

fn value(c: &Cell, metric: &str) -> f64 {
    if metric == "E_pos" {
        c.e_pos
    } else {
        c.e_att
    }
}

/// Machine-readable table. Failed runs are counted per cell in `<variant>_failed`.
pub fn to_csv(t: &ComparisonTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["task".to_string(), "metric".to_string()];
    header.extend(t.variants.iter().cloned());
    header.extend(t.variants.iter().map(|v| format!("{v}_failed")));
    w.write_record(&header).expect("in-memory write");
    for (task, metric, cells) in rows(t) {
        let mut rec = vec![task, metric.to_string()];
        rec.extend(cells.iter().map(|c| value(c, metric).to_string()));
        rec.extend(cells.iter().map(|c| c.failed.to_string()));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Per-run listing behind the table.
pub fn runs_csv(t: &ComparisonTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["task", "variant", "seed", "status", "E_pos", "E_att"]).expect("in-memory write");
    for r in &t.runs {
        let status = match r.failure {
            None => "ok".to_string(),
            Some(f) => crate::failure_label(&f),
        };
        w.write_record([r.task.clone(), r.variant.clone(), r.seed.to_string(), status, r.e_pos.to_string(), r.e_att.to_string()]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Aligned text. A `*` marks cells where some runs failed and were left out.
pub fn to_text(t: &ComparisonTable) -> String {
    let mut grid: Vec<Vec<String>> = Vec::new();
    let mut head = vec!["Task".to_string(), "Metric".to_string()];
    head.extend(t.variants.iter().cloned());
    grid.push(head);
    let mut last_task = String::new();
    for (task, metric, cells) in rows(t) {
        let label = if task == last_task {
            String::new()
        } else if task == "average" {
            "Average".to_string()
        } else {
            task_label(&task).to_string()
        };
        last_task = task;
        let unit = if metric == "E_pos" { "E_pos (m)" } else { "E_att (rad)" };
        let mut row = vec![label, unit.to_string()];
        for c in &cells {
            let v = value(c, metric);
            let mut s = if v.is_finite() { format!("{v:.4}") } else { "n/a".to_string() };
            if c.failed > 0 {
                s.push('*');
            }
            row.push(s);
        }
        grid.push(row);
    }
    let widths: Vec<usize> = (0..grid[0].len()).map(|j| grid.iter().map(|r| r[j].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, row) in grid.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(j, s)| if j < 2 { format!("{s:<w$}", w = widths[j]) } else { format!("{s:>w$}", w = widths[j]) })
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            let _ = writeln!(out, "{}", "-".repeat(total));
        }
    }
    if t.cells.iter().flatten().any(|c| c.failed > 0) {
        let _ = writeln!(out, "* some runs failed and are excluded from this cell");
    }
    out
}
