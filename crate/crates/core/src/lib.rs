//! Las Vegas c-approximate near neighbor search in Euclidean space.
//!
//! Points are split across `d'/k` orthonormal block projections and indexed
//! on a grid in each `k`-dimensional reduced space. Every candidate is checked
//! exactly in the original space, and the block construction guarantees that
//! a point within the query radius is never missed: randomness only affects
//! how many far points have to be rejected along the way.
//!
//! ```
//! use lvann::{make_plan, Dataset, NeighborIndex, PlanOverrides, Variant};
//!
//! let data = Dataset::from_rows(&[[0.0, 0.0, 0.0, 0.0], [3.0, 0.0, 0.0, 0.0]]).unwrap();
//! let overrides = PlanOverrides { k: Some(2), grid_side: Some(0.5), alpha: None };
//! let plan = make_plan(data.len(), data.dim(), 2.0, 0.0, 7, &overrides).unwrap();
//! let index = NeighborIndex::build(data, plan, Variant::FastPre).unwrap();
//! let hit = index.query(&[0.1, 0.2, 0.0, 0.3]).unwrap().hit.unwrap();
//! assert_eq!(hit.id, 0);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dataset;
pub mod error;
pub mod grid;
pub mod index;
pub mod linalg;
pub mod oracle;
pub mod planner;

pub use dataset::Dataset;
pub use error::{Error, Result};
pub use grid::CellId;
pub use index::{exact_filter, Hit, NeighborIndex, QueryOptions, QueryResult, QueryStats, Variant};
pub use linalg::{
    block_mappings, project_batch, project_point, random_orthonormal_basis, BlockMapping, Matrix, OrthonormalBasis,
};
pub use planner::{choose_alpha, gamma_bound, make_plan, tail_bound, PlanOverrides, ReductionPlan};
