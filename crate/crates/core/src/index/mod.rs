//! The two reduced-space index variants and the exact check that turns their
//! candidates into answers.
//!
//! Both variants project every point through all `d'/k` blocks and keep, per
//! block, a table from grid cells to buckets of points:
//!
//! * **fast-query** stores each point in every cell its radius-`R` ball
//!   touches, so a query reads a single cell per block;
//! * **fast-pre** stores each point in its own cell only, and a query walks
//!   the cover of its radius-`R` ball.
//!
//! Bucket entries are kept only if their reduced image lies within the search
//! radius of the reduced query in that block. Some block never lengthens
//! `q - p`, so any `p` within `R` of `q` survives in at least one block; the
//! survivors are then checked in the original space against `c R`. Far points
//! that survive are the false positives counted in [`QueryStats`].

mod format;
mod table;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use table::{CellHasher, CellTable};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::grid::{self, DEFAULT_ENUM_BUDGET};
use crate::linalg::{self, euclidean, Matrix, OrthonormalBasis, Projection};
use crate::planner::ReductionPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    FastQuery,
    FastPre,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::FastQuery => "fast-query",
            Variant::FastPre => "fast-pre",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast-query" => Ok(Variant::FastQuery),
            "fast-pre" => Ok(Variant::FastPre),
            other => Err(Error::invalid(format!(
                "unknown variant {other:?} (expected fast-query or fast-pre)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub cells_inserted: u64,
    pub build_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: u64,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryStats {
    /// Points put through the exact check.
    pub candidates_examined: u64,
    /// Examined points farther than `c R`.
    pub false_positives: u64,
    /// Blocks that contributed at least one candidate.
    pub blocks_touched: u64,
    pub cells_visited: u64,
    /// Bucket entries read before the reduced-space radius test.
    pub bucket_entries: u64,
    /// Distinct candidates across all blocks.
    pub candidates: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub hit: Option<Hit>,
    /// Every point within `c R`, filled only in report-all mode.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub all_hits: Vec<Hit>,
    pub stats: QueryStats,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryOptions {
    /// Keep scanning after the first hit and report all of them.
    pub report_all: bool,
}

/// Outcome of the exact check over one candidate list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    pub hit: Option<Hit>,
    pub all_hits: Vec<Hit>,
    pub examined: u64,
    pub rejected: u64,
}

/// Checks candidates in ascending id order against `accept` (that is, `c R`)
/// and returns the first one within it. Unknown ids are an error.
pub fn exact_filter(candidate_ids: &[u64], q: &[f64], dataset: &Dataset, accept: f64) -> Result<FilterOutcome> {
    if q.len() != dataset.dim() {
        return Err(Error::invalid(format!(
            "query has dimension {}, dataset has {}",
            q.len(),
            dataset.dim()
        )));
    }
    let mut rows = Vec::with_capacity(candidate_ids.len());
    for &id in candidate_ids {
        let row = dataset
            .row_of(id)
            .ok_or_else(|| Error::invalid(format!("candidate id {id} not in dataset")))?;
        rows.push(row as u32);
    }
    if rows.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("candidates must be distinct and in ascending id order"));
    }
    Ok(filter_rows(&rows, q, dataset, accept, false))
}

fn filter_rows(rows: &[u32], q: &[f64], dataset: &Dataset, accept: f64, report_all: bool) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for &row in rows {
        let row = row as usize;
        let distance = euclidean(dataset.point(row), q);
        out.examined += 1;
        if distance <= accept {
            let hit = Hit {
                id: dataset.id(row),
                distance,
            };
            if out.hit.is_none() {
                out.hit = Some(hit);
            }
            if !report_all {
                break;
            }
            out.all_hits.push(hit);
        } else {
            out.rejected += 1;
        }
    }
    out
}

/// Reduced-space radius used for covers and for the per-bucket test: `R`
/// widened by a relative `1e-9` plus a bound on the rounding error of the
/// projected difference for points no farther than `max_norm + R` from the
/// origin. Queries farther out than that have no neighbor within `R`.
fn search_radius(plan: &ReductionPlan, max_norm: f64) -> f64 {
    let scale = linalg::block_scale(plan.padded_dim, plan.k);
    let magnitude = 2.0 * max_norm + plan.radius;
    let rounding = 4.0 * (plan.padded_dim as f64 + 2.0) * f64::EPSILON * scale * magnitude * (plan.k as f64).sqrt();
    plan.radius * (1.0 + 1e-9) + rounding
}

/// A built index. Immutable; safe to query from many threads at once.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    variant: Variant,
    plan: ReductionPlan,
    basis: OrthonormalBasis,
    tables: Vec<CellTable>,
    dataset: Arc<Dataset>,
    reduced: Projection,
    search_radius: f64,
    enum_budget: u64,
    build_stats: BuildStats,
    input_scale: f64,
}

/// Parts shared by a fresh build and a load from disk.
struct Prepared {
    basis: OrthonormalBasis,
    reduced: Projection,
    search_radius: f64,
}

fn prepare(dataset: &Dataset, plan: &ReductionPlan) -> Result<Prepared> {
    plan.validate()?;
    if plan.dim != dataset.dim() || plan.n != dataset.len() {
        return Err(Error::invalid(format!(
            "plan was made for n={}, d={} but the dataset has n={}, d={}",
            plan.n,
            plan.dim,
            dataset.len(),
            dataset.dim()
        )));
    }
    if dataset.len() > u32::MAX as usize {
        return Err(Error::invalid("datasets are limited to 2^32 - 1 points"));
    }
    let basis = if plan.reduced {
        linalg::random_orthonormal_basis(plan.padded_dim, plan.seed)?
    } else {
        OrthonormalBasis::identity(plan.padded_dim, plan.seed)?
    };
    let padded = dataset.points().zero_padded(plan.padded_dim)?;
    let reduced = linalg::project_batch(&padded, &basis, plan.k)?;
    let max_norm = dataset.points().iter_rows().map(linalg::norm).fold(0.0, f64::max);
    Ok(Prepared {
        basis,
        reduced,
        search_radius: search_radius(plan, max_norm),
    })
}

impl NeighborIndex {
    pub fn build(dataset: impl Into<Arc<Dataset>>, plan: ReductionPlan, variant: Variant) -> Result<Self> {
        Self::build_with_budget(dataset, plan, variant, DEFAULT_ENUM_BUDGET)
    }

    /// Builds with an explicit cap on the size of any single cell cover.
    pub fn build_with_budget(
        dataset: impl Into<Arc<Dataset>>,
        plan: ReductionPlan,
        variant: Variant,
        enum_budget: u64,
    ) -> Result<Self> {
        let started = Instant::now();
        let dataset = dataset.into();
        let Prepared {
            basis,
            reduced,
            search_radius,
        } = prepare(&dataset, &plan)?;

        let mut tables = vec![CellTable::new(); plan.num_blocks];
        let mut cell = Vec::with_capacity(plan.k);
        for (block, table) in tables.iter_mut().enumerate() {
            for row in 0..dataset.len() {
                let image = reduced.get(row, block);
                match variant {
                    Variant::FastPre => {
                        grid::quantize_into(image, plan.grid_side, &mut cell)?;
                        table.insert(&cell, row as u32);
                    }
                    Variant::FastQuery => {
                        grid::for_each_cell_in_ball(image, search_radius, plan.grid_side, enum_budget, |c| {
                            table.insert(c, row as u32)
                        })?;
                    }
                }
            }
        }

        let cells_inserted = tables.iter().map(CellTable::num_entries).sum();
        Ok(Self {
            variant,
            plan,
            basis,
            tables,
            dataset,
            reduced,
            search_radius,
            enum_budget,
            build_stats: BuildStats {
                cells_inserted,
                build_seconds: started.elapsed().as_secs_f64(),
            },
            input_scale: 1.0,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn plan(&self) -> &ReductionPlan {
        &self.plan
    }

    pub fn basis(&self) -> &OrthonormalBasis {
        &self.basis
    }

    pub fn tables(&self) -> &[CellTable] {
        &self.tables
    }

    pub fn dataset(&self) -> &Arc<Dataset> {
        &self.dataset
    }

    pub fn build_stats(&self) -> BuildStats {
        self.build_stats
    }

    pub fn search_radius(&self) -> f64 {
        self.search_radius
    }

    pub fn enum_budget(&self) -> u64 {
        self.enum_budget
    }

    pub fn set_enum_budget(&mut self, budget: u64) {
        self.enum_budget = budget;
    }

    /// Factor the caller divided input coordinates by before building
    /// (the original query radius). Stored with the index; 1 by default.
    pub fn input_scale(&self) -> f64 {
        self.input_scale
    }

    pub fn set_input_scale(&mut self, scale: f64) {
        self.input_scale = scale;
    }

    pub fn query(&self, q: &[f64]) -> Result<QueryResult> {
        self.query_with(q, QueryOptions::default())
    }

    pub fn query_with(&self, q: &[f64], opts: QueryOptions) -> Result<QueryResult> {
        let batch = Matrix::from_rows(&[q])?;
        Ok(self
            .query_batch_with(&batch, opts)?
            .pop()
            .expect("one result per query"))
    }

    pub fn query_batch(&self, queries: &Matrix) -> Result<Vec<QueryResult>> {
        self.query_batch_with(queries, QueryOptions::default())
    }

    /// Projects all queries with one product, then answers each one.
    pub fn query_batch_with(&self, queries: &Matrix, opts: QueryOptions) -> Result<Vec<QueryResult>> {
        let projected = self.project_queries(queries)?;
        let mut scratch = Scratch::new(self.plan.k);
        (0..queries.rows())
            .map(|j| {
                let mut stats = QueryStats::default();
                let rows = self.collect_candidates(projected.point(j), &mut scratch, &mut stats, None)?;
                let outcome = filter_rows(
                    &rows,
                    queries.row(j),
                    &self.dataset,
                    self.plan.accept_distance(),
                    opts.report_all,
                );
                stats.candidates_examined = outcome.examined;
                stats.false_positives = outcome.rejected;
                Ok(QueryResult {
                    hit: outcome.hit,
                    all_hits: outcome.all_hits,
                    stats,
                })
            })
            .collect()
    }

    /// Per block, the ids the query would hand to the exact check, ascending.
    pub fn candidate_set(&self, q: &[f64]) -> Result<Vec<Vec<u64>>> {
        let projected = self.project_queries(&Matrix::from_rows(&[q])?)?;
        let mut per_block = vec![Vec::new(); self.plan.num_blocks];
        let mut stats = QueryStats::default();
        self.collect_candidates(
            projected.point(0),
            &mut Scratch::new(self.plan.k),
            &mut stats,
            Some(&mut per_block),
        )?;
        Ok(per_block
            .into_iter()
            .map(|rows| rows.into_iter().map(|r| self.dataset.id(r as usize)).collect())
            .collect())
    }

    fn project_queries(&self, queries: &Matrix) -> Result<Projection> {
        if queries.cols() != self.plan.dim {
            return Err(Error::invalid(format!(
                "queries have dimension {}, index has {}",
                queries.cols(),
                self.plan.dim
            )));
        }
        if queries.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("query coordinates must be finite"));
        }
        let padded = queries.zero_padded(self.plan.padded_dim)?;
        linalg::project_batch(&padded, &self.basis, self.plan.k)
    }

    /// Distinct candidate rows in ascending order. When `per_block` is given
    /// it also receives each block's surviving rows.
    fn collect_candidates(
        &self,
        reduced_q: &[f64],
        scratch: &mut Scratch,
        stats: &mut QueryStats,
        mut per_block: Option<&mut Vec<Vec<u32>>>,
    ) -> Result<Vec<u32>> {
        let k = self.plan.k;
        let mut all = Vec::new();
        for (block, table) in self.tables.iter().enumerate() {
            let qi = &reduced_q[block * k..(block + 1) * k];
            let before = all.len();
            let mut take = |bucket: &[u32]| {
                stats.bucket_entries += bucket.len() as u64;
                all.extend(
                    bucket
                        .iter()
                        .copied()
                        .filter(|&r| euclidean(self.reduced.get(r as usize, block), qi) <= self.search_radius),
                );
            };
            match self.variant {
                Variant::FastQuery => {
                    grid::quantize_into(qi, self.plan.grid_side, &mut scratch.cell)?;
                    stats.cells_visited += 1;
                    if let Some(bucket) = table.get(&scratch.cell) {
                        take(bucket);
                    }
                }
                Variant::FastPre => {
                    stats.cells_visited += grid::for_each_cell_in_ball(
                        qi,
                        self.search_radius,
                        self.plan.grid_side,
                        self.enum_budget,
                        |c| {
                            if let Some(bucket) = table.get(c) {
                                take(bucket);
                            }
                        },
                    )?;
                }
            }
            if all.len() > before {
                stats.blocks_touched += 1;
            }
            if let Some(out) = per_block.as_deref_mut() {
                let mut rows = all[before..].to_vec();
                rows.sort_unstable();
                rows.dedup();
                out[block] = rows;
            }
        }
        all.sort_unstable();
        all.dedup();
        stats.candidates = all.len() as u64;
        Ok(all)
    }
}

struct Scratch {
    cell: Vec<i64>,
}

impl Scratch {
    fn new(k: usize) -> Self {
        Self {
            cell: Vec::with_capacity(k),
        }
    }
}
