//! Command-line front end: argument types and the command implementations.
//! The binary only parses arguments, dispatches here and maps errors to exit
//! codes.

pub mod io;
pub mod lemma;
pub mod report;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::DEFAULT_ENUM_BUDGET;
use crate::index::{BuildStats, Hit, NeighborIndex, QueryOptions, QueryResult, Variant};
use crate::linalg::Matrix;
use crate::oracle;
use crate::planner::{make_plan, PlanOverrides, ReductionPlan};

use io::{read_points, PointFormat};
use lemma::{verify_lemma, LemmaParams};
use report::{AuditSummary, BenchReport, BuildSummary, DatasetSummary, QuerySummary, TailRow, Timing, REPORT_SCHEMA};

/// Environment variable overriding the cell-enumeration cap.
pub const ENUM_BUDGET_ENV: &str = "LVANN_ENUM_BUDGET";

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_INVALID: i32 = 4;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse(_) | Error::Format(_) => EXIT_PARSE,
        Error::BudgetExceeded { .. } => EXIT_BUDGET,
        Error::InvalidArgument(_) => EXIT_INVALID,
        Error::Io(_) | Error::Generation(_) => EXIT_FAILURE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "lvann", version, about = "Near neighbor search without false negatives")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an index from a point file and write it to disk.
    Build(BuildArgs),
    /// Answer queries against a stored index, one JSON line per query.
    Query(QueryArgs),
    /// Sample the block projection's coverage and tail properties.
    VerifyLemma(LemmaArgs),
    /// Build, query and summarize into a JSON report.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    FastQuery,
    FastPre,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::FastQuery => Variant::FastQuery,
            VariantArg::FastPre => Variant::FastPre,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PlanArgs {
    #[arg(long, value_enum, default_value = "fast-pre")]
    pub variant: VariantArg,
    /// Approximation factor, > 1.
    #[arg(long)]
    pub c: f64,
    #[arg(long, default_value_t = 0.0)]
    pub nu: f64,
    /// Query radius; inputs are divided by it on ingestion.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub k_override: Option<usize>,
    #[arg(long)]
    pub grid_side_override: Option<f64>,
    #[arg(long)]
    pub alpha_override: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct BuildArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "fvecs")]
    pub format: PointFormat,
    /// CSV only: the first column is an integer point id.
    #[arg(long)]
    pub id_column: bool,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, value_enum, default_value = "fvecs")]
    pub format: PointFormat,
    #[arg(long)]
    pub id_column: bool,
    /// Project all queries with one matrix product.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub batch: bool,
    /// Report every point within c*R instead of the first.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub all: bool,
}

#[derive(Debug, Clone, Args)]
pub struct LemmaArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub c: f64,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long, value_enum, default_value = "fvecs")]
    pub format: PointFormat,
    #[arg(long)]
    pub id_column: bool,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    pub batch: bool,
    /// Check every query against a linear scan.
    #[arg(long)]
    pub audit: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Reads `LVANN_ENUM_BUDGET`, falling back to the default cap.
pub fn enum_budget_from_env() -> Result<u64> {
    match std::env::var(ENUM_BUDGET_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .ok()
            .filter(|&b| b > 0)
            .ok_or_else(|| Error::invalid(format!("{ENUM_BUDGET_ENV} must be a positive integer (got {v:?})"))),
        Err(_) => Ok(DEFAULT_ENUM_BUDGET),
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("radius must be positive (got {radius})")));
    }
    Ok(())
}

fn scale_matrix(m: &Matrix, factor: f64) -> Result<Matrix> {
    Matrix::from_vec(m.rows(), m.cols(), m.as_slice().iter().map(|v| v * factor).collect())
}

fn build_index(input: &Path, format: PointFormat, id_column: bool, p: &PlanArgs) -> Result<NeighborIndex> {
    check_radius(p.radius)?;
    let dataset = read_points(input, format, id_column)?
        .into_dataset()?
        .scaled(1.0 / p.radius)?;
    let overrides = PlanOverrides {
        k: p.k_override,
        grid_side: p.grid_side_override,
        alpha: p.alpha_override,
    };
    let plan = make_plan(dataset.len(), dataset.dim(), p.c, p.nu, p.seed, &overrides)?;
    let mut index = NeighborIndex::build_with_budget(dataset, plan, p.variant.into(), enum_budget_from_env()?)?;
    index.set_input_scale(p.radius);
    Ok(index)
}

#[derive(Debug, Serialize)]
struct BuildOutput<'a> {
    variant: Variant,
    input_radius: f64,
    plan: &'a ReductionPlan,
    build_stats: BuildStats,
    out: &'a Path,
}

pub fn cmd_build(args: &BuildArgs, out: &mut dyn Write) -> Result<()> {
    let index = build_index(&args.input, args.format, args.id_column, &args.plan)?;
    fs::write(&args.out, index.to_bytes())?;
    let summary = BuildOutput {
        variant: index.variant(),
        input_radius: index.input_scale(),
        plan: index.plan(),
        build_stats: index.build_stats(),
        out: &args.out,
    };
    writeln!(out, "{}", serde_json::to_string_pretty(&summary).expect("serializable"))?;
    Ok(())
}

/// One output line of `query`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct QueryLine {
    pub query: usize,
    #[serde(flatten)]
    pub result: QueryResult,
}

fn rescale_hit(h: Hit, scale: f64) -> Hit {
    Hit {
        id: h.id,
        distance: h.distance * scale,
    }
}

fn run_queries(
    index: &NeighborIndex,
    queries: &Matrix,
    batch: bool,
    opts: QueryOptions,
) -> Result<(Vec<QueryResult>, Vec<f64>)> {
    if batch {
        let started = Instant::now();
        let results = index.query_batch_with(queries, opts)?;
        let each = started.elapsed().as_secs_f64() / queries.rows().max(1) as f64;
        Ok((results, vec![each; queries.rows()]))
    } else {
        let mut results = Vec::with_capacity(queries.rows());
        let mut times = Vec::with_capacity(queries.rows());
        for q in queries.iter_rows() {
            let started = Instant::now();
            results.push(index.query_with(q, opts)?);
            times.push(started.elapsed().as_secs_f64());
        }
        Ok((results, times))
    }
}

fn load_queries(path: &Path, format: PointFormat, id_column: bool, scale: f64) -> Result<Matrix> {
    scale_matrix(&read_points(path, format, id_column)?.points, 1.0 / scale)
}

pub fn cmd_query(args: &QueryArgs, out: &mut dyn Write) -> Result<()> {
    let mut index = NeighborIndex::from_bytes(&fs::read(&args.index)?)?;
    index.set_enum_budget(enum_budget_from_env()?);
    let scale = index.input_scale();
    let queries = load_queries(&args.queries, args.format, args.id_column, scale)?;
    let opts = QueryOptions { report_all: args.all };
    let (results, _) = run_queries(&index, &queries, args.batch, opts)?;
    for (query, mut result) in results.into_iter().enumerate() {
        result.hit = result.hit.map(|h| rescale_hit(h, scale));
        result.all_hits = result.all_hits.into_iter().map(|h| rescale_hit(h, scale)).collect();
        let line = QueryLine { query, result };
        writeln!(out, "{}", serde_json::to_string(&line).expect("serializable"))?;
    }
    Ok(())
}

pub fn cmd_verify_lemma(args: &LemmaArgs, out: &mut dyn Write) -> Result<()> {
    let report = verify_lemma(&LemmaParams {
        d: args.d,
        k: args.k,
        c: args.c,
        alpha: args.alpha,
        trials: args.trials,
        seed: args.seed,
    })?;
    writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("serializable"))?;
    Ok(())
}

pub fn run_bench(args: &BenchArgs) -> Result<BenchReport> {
    let index = build_index(&args.input, args.format, args.id_column, &args.plan)?;
    let queries = load_queries(&args.queries, args.format, args.id_column, args.plan.radius)?;
    if queries.cols() != index.plan().dim {
        return Err(Error::invalid(format!(
            "queries have dimension {}, data has {}",
            queries.cols(),
            index.plan().dim
        )));
    }
    let (results, times) = run_queries(&index, &queries, args.batch, QueryOptions::default())?;
    let plan = *index.plan();

    let audit = args.audit.then(|| {
        let mut a = AuditSummary {
            with_neighbor: 0,
            answered: 0,
            missed: 0,
            unsound: 0,
            passed: true,
        };
        for (q, r) in queries.iter_rows().zip(&results) {
            if !oracle::linear_scan(index.dataset(), q, plan.radius).is_empty() {
                a.with_neighbor += 1;
                if r.hit.is_some() {
                    a.answered += 1;
                } else {
                    a.missed += 1;
                }
            }
            if r.hit.is_some_and(|h| h.distance > plan.accept_distance()) {
                a.unsound += 1;
            }
        }
        a.passed = a.missed == 0 && a.unsound == 0;
        a
    });

    let summary = QuerySummary::of(&results);
    let fp_mean = summary.false_positives.mean;
    let tail_bounds = vec![
        TailRow::new("plan-alpha", plan.alpha, &plan, fp_mean),
        TailRow::new("grid-alpha", plan.effective_alpha(), &plan, fp_mean),
    ];

    Ok(BenchReport {
        schema: REPORT_SCHEMA.to_string(),
        variant: index.variant(),
        batch: args.batch,
        input_radius: args.plan.radius,
        plan,
        dataset: DatasetSummary {
            n: index.dataset().len(),
            dim: index.dataset().dim(),
            checksum: hex::encode(index.dataset().checksum()),
        },
        build: BuildSummary {
            cells_inserted: index.build_stats().cells_inserted,
        },
        queries: summary,
        audit,
        tail_bounds,
        timing: Some(Timing {
            build_seconds: index.build_stats().build_seconds,
            query_seconds: report::Aggregate::of(&times),
            total_query_seconds: times.iter().sum(),
        }),
    })
}

pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write) -> Result<()> {
    let report = run_bench(args)?;
    let json = serde_json::to_string_pretty(&report).expect("serializable");
    match &args.out {
        Some(path) => fs::write(path, json + "\n")?,
        None => writeln!(out, "{json}")?,
    }
    Ok(())
}

/// Runs one parsed command, writing its normal output to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Build(a) => cmd_build(a, out),
        Command::Query(a) => cmd_query(a, out),
        Command::VerifyLemma(a) => cmd_verify_lemma(a, out),
        Command::Bench(a) => cmd_bench(a, out),
    }
}
