use serde::{Deserialize, Serialize};

use crate::index::{QueryResult, Variant};
use crate::planner::{tail_bound, ReductionPlan};

pub const REPORT_SCHEMA: &str = "lvann-report-v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                mean: 0.0,
                median: 0.0,
                max: 0.0,
            };
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        Self {
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            median,
            max: sorted[sorted.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n: usize,
    pub dim: usize,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildSummary {
    pub cells_inserted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySummary {
    pub count: usize,
    pub hits: usize,
    pub candidates_examined: Aggregate,
    pub false_positives: Aggregate,
    pub candidates: Aggregate,
    pub cells_visited: Aggregate,
    pub blocks_touched: Aggregate,
}

impl QuerySummary {
    pub fn of(results: &[QueryResult]) -> Self {
        let agg = |f: fn(&QueryResult) -> u64| Aggregate::of(&results.iter().map(|r| f(r) as f64).collect::<Vec<_>>());
        Self {
            count: results.len(),
            hits: results.iter().filter(|r| r.hit.is_some()).count(),
            candidates_examined: agg(|r| r.stats.candidates_examined),
            false_positives: agg(|r| r.stats.false_positives),
            candidates: agg(|r| r.stats.candidates),
            cells_visited: agg(|r| r.stats.cells_visited),
            blocks_touched: agg(|r| r.stats.blocks_touched),
        }
    }
}

/// Linear-scan audit of the no-false-negative guarantee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    /// Queries with some point within `R`.
    pub with_neighbor: usize,
    pub answered: usize,
    pub missed: usize,
    /// Returned points farther than `c R`.
    pub unsound: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub label: String,
    pub alpha: f64,
    pub per_block_bound: f64,
    /// `num_blocks * n * per_block_bound`.
    pub expected_false_positives_bound: f64,
    pub empirical_false_positives_mean: f64,
}

impl TailRow {
    pub fn new(label: &str, alpha: f64, plan: &ReductionPlan, empirical: f64) -> Self {
        let per_block_bound = if alpha < plan.c {
            tail_bound(plan.k, alpha, plan.c).unwrap_or(1.0)
        } else {
            1.0
        };
        Self {
            label: label.to_string(),
            alpha,
            per_block_bound,
            expected_false_positives_bound: plan.num_blocks as f64 * plan.n as f64 * per_block_bound,
            empirical_false_positives_mean: empirical,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub build_seconds: f64,
    pub query_seconds: Aggregate,
    pub total_query_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema: String,
    pub variant: Variant,
    pub batch: bool,
    /// Radius the inputs were divided by; the plan itself uses `R = 1`.
    pub input_radius: f64,
    pub plan: ReductionPlan,
    pub dataset: DatasetSummary,
    pub build: BuildSummary,
    pub queries: QuerySummary,
    pub audit: Option<AuditSummary>,
    pub tail_bounds: Vec<TailRow>,
    /// Wall-clock measurements; the only run-dependent part of the report.
    pub timing: Option<Timing>,
}

impl BenchReport {
    /// The report minus its timing section, for run-to-run comparison.
    pub fn without_timing(&self) -> Self {
        Self {
            timing: None,
            ..self.clone()
        }
    }
}
