//! Controller comparison over tasks and seeds.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::metrics::{e_att, e_pos};
use crate::policy::PolicyParams;
use crate::scenario::{run_scenario, task_scenario, ControllerChoice, ScenarioFailure, ScenarioSpec, TASKS};

/// A controller under test: basic-only when `policy` is `None`.
#[derive(Debug, Clone, Copy)]
pub struct Variant<'a> {
    pub name: &'a str,
    pub policy: Option<&'a PolicyParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub task: String,
    pub variant: String,
    pub seed: u64,
    pub e_pos: f64,
    pub e_att: f64,
    pub failure: Option<ScenarioFailure>,
}

/// Mean metrics over the successful runs behind one table cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub e_pos: f64,
    pub e_att: f64,
    pub runs: usize,
    pub failed: usize,
}

impl Cell {
    pub fn has_data(&self) -> bool {
        self.runs > self.failed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub tasks: Vec<String>,
    pub variants: Vec<String>,
    /// `cells[task][variant]`.
    pub cells: Vec<Vec<Cell>>,
    /// Per-variant mean of the task rows that have data.
    pub averages: Vec<Cell>,
    pub runs: Vec<RunResult>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompareError {
    #[error("at least two variants are needed")]
    TooFewVariants,
    #[error("no seeds given")]
    NoSeeds,
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("scenario rejected: {0}")]
    InvalidScenario(&'static str),
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

pub fn compare_controllers(tasks: &[&str], variants: &[Variant<'_>], seeds: &[u64], flyover_height: f64) -> Result<ComparisonTable, CompareError> {
    compare_controllers_with(tasks, variants, seeds, flyover_height, &|_| {})
}

/// As [`compare_controllers`], with `adjust` applied to every scenario before it runs.
pub fn compare_controllers_with(
    tasks: &[&str],
    variants: &[Variant<'_>],
    seeds: &[u64],
    flyover_height: f64,
    adjust: &dyn Fn(&mut ScenarioSpec),
) -> Result<ComparisonTable, CompareError> {
    if variants.len() < 2 {
        return Err(CompareError::TooFewVariants);
    }
    if seeds.is_empty() {
        return Err(CompareError::NoSeeds);
    }
    if let Some(t) = tasks.iter().find(|t| !TASKS.contains(t)) {
        return Err(CompareError::UnknownTask(t.to_string()));
    }
    let mut runs = Vec::new();
    let mut cells = Vec::new();
    for &task in tasks {
        let mut row = Vec::new();
        for v in variants {
            let choice = if v.policy.is_some() { ControllerChoice::ProxFly } else { ControllerChoice::BasicOnly };
            let mut cell_runs = Vec::new();
            for &seed in seeds {
                let mut spec = task_scenario(task, choice, flyover_height, seed).ok_or_else(|| CompareError::UnknownTask(task.to_string()))?;
                adjust(&mut spec);
                let mut policies = alloc::vec![None; spec.vehicles.len()];
                policies[spec.subject] = v.policy;
                let outcome = run_scenario(&spec, &policies).map_err(CompareError::InvalidScenario)?;
                let log = outcome.metric_log();
                let result = RunResult {
                    task: task.to_string(),
                    variant: v.name.to_string(),
                    seed,
                    e_pos: e_pos(&log).unwrap_or(f64::NAN),
                    e_att: e_att(&log).unwrap_or(f64::NAN),
                    failure: outcome.failure,
                };
                cell_runs.push(result);
            }
            let ok = || cell_runs.iter().filter(|r| r.failure.is_none() && r.e_pos.is_finite());
            let failed = cell_runs.len() - ok().count();
            row.push(Cell { e_pos: mean(ok().map(|r| r.e_pos)), e_att: mean(ok().map(|r| r.e_att)), runs: cell_runs.len(), failed });
            runs.extend(cell_runs);
        }
        cells.push(row);
    }
    let averages = (0..variants.len())
        .map(|j| {
            let rows = || cells.iter().map(|r: &Vec<Cell>| r[j]).filter(Cell::has_data);
            Cell {
                e_pos: mean(rows().map(|c| c.e_pos)),
                e_att: mean(rows().map(|c| c.e_att)),
                runs: cells.iter().map(|r| r[j].runs).sum(),
                failed: cells.iter().map(|r| r[j].failed).sum(),
            }
        })
        .collect();
    Ok(ComparisonTable {
        tasks: tasks.iter().map(|t| t.to_string()).collect(),
        variants: variants.iter().map(|v| v.name.to_string()).collect(),
        cells,
        averages,
        runs,
    })
}
