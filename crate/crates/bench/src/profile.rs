//! Performance profiles and robustness tables over benchmark records.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::record::{format_float, BenchmarkRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    CpuSeconds,
    Iters,
    FieldEvals,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::CpuSeconds => "cpu_seconds",
            Metric::Iters => "iters",
            Metric::FieldEvals => "field_evals",
        }
    }

    fn of(self, r: &BenchmarkRecord) -> f64 {
        match self {
            Metric::CpuSeconds => r.cpu_seconds,
            Metric::Iters => r.iters as f64,
            Metric::FieldEvals => r.field_evals as f64,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Metric::CpuSeconds, Metric::Iters, Metric::FieldEvals]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric '{s}' (expected cpu_seconds|iters|field_evals)"))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProfileError {
    #[error("no records")]
    Empty,
    #[error("solver {solver} covers a different problem set than {reference}")]
    MismatchedProblemSets { solver: String, reference: String },
    #[error("solver {solver} has several records for problem {problem}")]
    DuplicateRun { solver: String, problem: String },
    #[error("record {0} carries no epsilon")]
    MissingEpsilon(String),
}

/// `rho_s(tau)`: fraction of problems solver `s` solves within a factor
/// `tau` of the best solver on that problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceProfile {
    pub tau_grid: Vec<f64>,
    /// `(solver, rho values on tau_grid)`, sorted by solver label.
    pub curves: Vec<(String, Vec<f64>)>,
}

impl PerformanceProfile {
    pub fn curve(&self, solver: &str) -> Option<&[f64]> {
        self.curves
            .iter()
            .find(|(s, _)| s == solver)
            .map(|(_, c)| c.as_slice())
    }

    /// `rho_s(tau)` for an arbitrary `tau`, read off the step function.
    pub fn rho(&self, solver: &str, tau: f64) -> Option<f64> {
        let curve = self.curve(solver)?;
        let idx = self.tau_grid.partition_point(|&t| t <= tau);
        Some(if idx == 0 { 0.0 } else { curve[idx - 1] })
    }

    /// Rows `tau,solver,rho`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,solver,rho\n");
        for (solver, curve) in &self.curves {
            for (tau, rho) in self.tau_grid.iter().zip(curve) {
                out.push_str(&format!(
                    "{},{},{}\n",
                    format_float(*tau),
                    solver,
                    format_float(*rho)
                ));
            }
        }
        out
    }
}

/// Problem id → metric per solver, rejecting uneven coverage.
fn table(
    records: &[BenchmarkRecord],
) -> Result<BTreeMap<String, BTreeMap<String, &BenchmarkRecord>>, ProfileError> {
    if records.is_empty() {
        return Err(ProfileError::Empty);
    }
    let mut by_solver: BTreeMap<String, BTreeMap<String, &BenchmarkRecord>> = BTreeMap::new();
    for r in records {
        let runs = by_solver.entry(r.solver_label()).or_default();
        if runs.insert(r.problem_id.clone(), r).is_some() {
            return Err(ProfileError::DuplicateRun {
                solver: r.solver_label(),
                problem: r.problem_id.clone(),
            });
        }
    }
    let (reference, first) = by_solver.iter().next().expect("nonempty");
    let ids: BTreeSet<&String> = first.keys().collect();
    for (solver, runs) in &by_solver {
        if runs.keys().collect::<BTreeSet<_>>() != ids {
            return Err(ProfileError::MismatchedProblemSets {
                solver: solver.clone(),
                reference: reference.clone(),
            });
        }
    }
    Ok(by_solver)
}

/// Dolan–Moré profile. Failed runs get ratio `+inf`; `tau_grid` defaults to
/// the distinct finite ratios (so every step of every curve is visible).
pub fn performance_profile(
    records: &[BenchmarkRecord],
    metric: Metric,
    tau_grid: Option<Vec<f64>>,
) -> Result<PerformanceProfile, ProfileError> {
    let by_solver = table(records)?;
    let problems: Vec<&String> = by_solver
        .values()
        .next()
        .expect("nonempty")
        .keys()
        .collect();

    let cost = |r: &BenchmarkRecord| {
        if r.solved() {
            metric.of(r)
        } else {
            f64::INFINITY
        }
    };
    let best: Vec<f64> = problems
        .iter()
        .map(|id| {
            by_solver
                .values()
                .map(|runs| cost(runs[*id]))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let ratios: BTreeMap<&String, Vec<f64>> = by_solver
        .iter()
        .map(|(solver, runs)| {
            let rs = problems
                .iter()
                .zip(&best)
                .map(|(id, &b)| {
                    let c = cost(runs[*id]);
                    if !c.is_finite() {
                        f64::INFINITY
                    } else if c == b {
                        1.0
                    } else {
                        c / b
                    }
                })
                .collect();
            (solver, rs)
        })
        .collect();

    let tau_grid = tau_grid.unwrap_or_else(|| {
        let mut grid: Vec<f64> = ratios
            .values()
            .flatten()
            .copied()
            .filter(|r| r.is_finite())
            .collect();
        grid.push(1.0);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid
    });
    let total = problems.len() as f64;
    let curves = ratios
        .into_iter()
        .map(|(solver, rs)| {
            let curve = tau_grid
                .iter()
                .map(|&tau| rs.iter().filter(|&&r| r <= tau).count() as f64 / total)
                .collect();
            (solver.clone(), curve)
        })
        .collect();
    Ok(PerformanceProfile { tau_grid, curves })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessRow {
    pub solver: String,
    pub epsilon: f64,
    pub solved: usize,
    pub total: usize,
}

impl RobustnessRow {
    pub fn percent(&self) -> f64 {
        100.0 * self.solved as f64 / self.total as f64
    }
}

/// Percentage of solved runs per (solver, epsilon), sorted by solver then
/// epsilon.
pub fn robustness_table(records: &[BenchmarkRecord]) -> Result<Vec<RobustnessRow>, ProfileError> {
    let mut cells: BTreeMap<(String, u64), (f64, usize, usize)> = BTreeMap::new();
    for r in records {
        let eps = r
            .epsilon
            .ok_or_else(|| ProfileError::MissingEpsilon(r.problem_id.clone()))?;
        // positive floats order like their bit patterns
        let cell = cells
            .entry((r.solver_label(), eps.to_bits()))
            .or_insert((eps, 0, 0));
        cell.1 += r.solved() as usize;
        cell.2 += 1;
    }
    Ok(cells
        .into_iter()
        .map(|((solver, _), (epsilon, solved, total))| RobustnessRow {
            solver,
            epsilon,
            solved,
            total,
        })
        .collect())
}

/// Rows `solver,epsilon,solved,total,percent`.
pub fn robustness_csv(rows: &[RobustnessRow]) -> String {
    let mut out = String::from("solver,epsilon,solved,total,percent\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.solver,
            format_float(r.epsilon),
            r.solved,
            r.total,
            format_float(r.percent())
        ));
    }
    out
}
