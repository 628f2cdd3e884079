//! End-to-end acceptance suite. Every criterion prints one `[PASS]` or
//! `[FAIL]` line on stderr.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use lvann::cli::io::write_fvecs;
use lvann::cli::lemma::{verify_lemma, LemmaParams};
use lvann::cli::report::BenchReport;
use lvann::grid::{cells_intersecting_ball, DEFAULT_ENUM_BUDGET};
use lvann::linalg::{euclidean, norm};
use lvann::oracle::{linear_scan, plant_instance, PlantConfig};
use lvann::{
    block_mappings, gamma_bound, make_plan, project_batch, project_point, random_orthonormal_basis, tail_bound, CellId,
    NeighborIndex, PlanOverrides, Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const VARIANTS: [Variant; 2] = [Variant::FastQuery, Variant::FastPre];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect()
}

fn unit_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, d);
        let n = norm(&v);
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn within_time(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn orthonormality() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for d in [8, 64, 256] {
        for seed in 0..5 {
            let b = random_orthonormal_basis(d, seed).unwrap();
            worst = worst.max(b.rows().orthonormality_error());
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-8 && within_time(t, 10),
        format!("max |BB^T - I| = {worst:.2e} over 15 bases in {:.2}s", t.as_secs_f64()),
    )
}

fn sum_identity() -> Outcome {
    let (d, k) = (64, 8);
    let basis = random_orthonormal_basis(d, 11).unwrap();
    let maps = block_mappings(&basis, k).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let x = gaussian_vec(&mut rng, d);
        let total: f64 = maps
            .iter()
            .map(|m| project_point(m, &x).unwrap().iter().map(|v| v * v).sum::<f64>())
            .sum();
        let nx2 = x.iter().map(|v| v * v).sum::<f64>();
        let rel = (total - (d / k) as f64 * nx2).abs() / nx2;
        worst = worst.max(rel);
        if rel > 1e-9 {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations, worst relative error {worst:.2e}"),
    )
}

fn coverage() -> Outcome {
    let d = 64;
    let mut violations = 0;
    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for k in [4, 8, 16] {
        for seed in 0..5 {
            let basis = random_orthonormal_basis(d, seed).unwrap();
            let maps = block_mappings(&basis, k).unwrap();
            for _ in 0..10_000 {
                let x = unit_vec(&mut rng, d);
                let min = maps
                    .iter()
                    .map(|m| norm(&project_point(m, &x).unwrap()))
                    .fold(f64::INFINITY, f64::min);
                worst = worst.max(min);
                if min > 1.0 + 1e-9 {
                    violations += 1;
                }
            }
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations in 150000 unit vectors, largest min_i |A_i x| = {worst:.6}"),
    )
}

fn tail() -> Outcome {
    let start = Instant::now();
    let report = verify_lemma(&LemmaParams {
        d: 128,
        k: 16,
        c: 3.0,
        alpha: 1.2,
        trials: 100_000,
        seed: 4,
    })
    .unwrap();
    let t = start.elapsed();
    let analytic = (8.0 * (1.0 - 0.16 + 0.16f64.ln())).exp();
    let emp = report.tail.empirical_probability;
    let pass = (report.tail.analytic_bound - analytic).abs() < 1e-12
        && emp <= 2.0 * analytic
        && report.coverage.violations == 0
        && within_time(t, 60);
    outcome(
        pass,
        format!(
            "empirical {emp:.3e} ({} of 1e5) vs bound {analytic:.4e}, {:.1}s",
            report.tail.mapped_short,
            t.as_secs_f64()
        ),
    )
}

struct LasVegasTally {
    certified: u64,
    answered: u64,
    missed: u64,
    certificates_found: u64,
    certificates: u64,
    hits: u64,
    unsound: u64,
}

/// Shared runs behind the no-false-negative and soundness criteria.
fn las_vegas_runs() -> (LasVegasTally, Duration) {
    let start = Instant::now();
    let mut t = LasVegasTally {
        certified: 0,
        answered: 0,
        missed: 0,
        certificates_found: 0,
        certificates: 0,
        hits: 0,
        unsound: 0,
    };
    let mut check = |idx: &NeighborIndex, inst: &lvann::oracle::PlantedInstance, c: f64| {
        let results = idx.query_batch(&inst.queries).unwrap();
        for (qi, (q, r)) in inst.queries.iter_rows().zip(&results).enumerate() {
            if !linear_scan(&inst.dataset, q, 1.0).is_empty() {
                t.certified += 1;
                if r.hit.is_some_and(|h| h.distance <= c) {
                    t.answered += 1;
                } else {
                    t.missed += 1;
                }
            }
            if inst.certificates.iter().any(|cert| cert.query == qi) {
                t.certificates += 1;
                t.certificates_found += r.hit.is_some() as u64;
            }
            if let Some(h) = r.hit {
                t.hits += 1;
                let row = inst.dataset.row_of(h.id).unwrap();
                let exact = euclidean(inst.dataset.point(row), q);
                if h.distance > c || exact != h.distance {
                    t.unsound += 1;
                }
            }
        }
    };
    for c in [1.5, 2.0, 3.0] {
        for seed in 0..20u64 {
            let inst = plant_instance(&PlantConfig {
                n: 500,
                dim: 32,
                radius: 1.0,
                c,
                num_queries: 100,
                num_planted: 70,
                seed,
            })
            .unwrap();
            let ds = Arc::new(inst.dataset.clone());
            let over = PlanOverrides {
                k: Some(4),
                grid_side: Some(0.5),
                alpha: None,
            };
            let plan = make_plan(500, 32, c, 0.0, seed, &over).unwrap();
            for v in VARIANTS {
                let idx = NeighborIndex::build(ds.clone(), plan, v).unwrap();
                check(&idx, &inst, c);
            }
            if seed == 0 {
                let plan = make_plan(
                    500,
                    32,
                    c,
                    0.0,
                    seed,
                    &PlanOverrides {
                        k: Some(4),
                        ..Default::default()
                    },
                )
                .unwrap();
                let idx = NeighborIndex::build(ds.clone(), plan, Variant::FastPre).unwrap();
                check(&idx, &inst, c);
            }
        }
    }
    (t, start.elapsed())
}

fn no_false_negatives(t: &LasVegasTally, elapsed: Duration) -> Outcome {
    outcome(
        t.missed == 0 && t.certified > 0 && t.certificates_found == t.certificates && within_time(elapsed, 120),
        format!(
            "{}/{} certified queries answered, {} missed, {:.1}s for 123 index builds",
            t.answered,
            t.certified,
            t.missed,
            elapsed.as_secs_f64()
        ),
    )
}

fn soundness(t: &LasVegasTally) -> Outcome {
    outcome(
        t.unsound == 0 && t.hits > 0,
        format!("{} returned hits, {} farther than cR or misreported", t.hits, t.unsound),
    )
}

fn variant_equivalence() -> Outcome {
    let inst = plant_instance(&PlantConfig {
        n: 200,
        dim: 16,
        radius: 1.0,
        c: 2.0,
        num_queries: 100,
        num_planted: 50,
        seed: 7,
    })
    .unwrap();
    let over = PlanOverrides {
        k: Some(4),
        grid_side: Some(0.5),
        alpha: None,
    };
    let plan = make_plan(200, 16, 2.0, 0.0, 7, &over).unwrap();
    let ds = Arc::new(inst.dataset);
    let fq = NeighborIndex::build(ds.clone(), plan, Variant::FastQuery).unwrap();
    let fp = NeighborIndex::build(ds, plan, Variant::FastPre).unwrap();
    let union = |sets: Vec<Vec<u64>>| {
        let mut all: Vec<u64> = sets.into_iter().flatten().collect();
        all.sort_unstable();
        all.dedup();
        all
    };
    let mut mismatches = 0;
    let mut nonempty = 0;
    for q in inst.queries.iter_rows() {
        let a = union(fq.candidate_set(q).unwrap());
        let b = union(fp.candidate_set(q).unwrap());
        nonempty += !a.is_empty() as usize;
        if a != b {
            mismatches += 1;
        }
    }
    outcome(
        mismatches == 0 && nonempty > 0,
        format!("{mismatches} mismatches over 100 queries ({nonempty} with candidates)"),
    )
}

/// Scans the bounding box of the ball and keeps cells whose closed box is
/// within `radius` of `center`.
fn brute_force_cells(center: &[f64], radius: f64, side: f64) -> Vec<CellId> {
    let lo: Vec<i64> = center
        .iter()
        .map(|c| ((c - radius) / side).floor() as i64 - 1)
        .collect();
    let hi: Vec<i64> = center
        .iter()
        .map(|c| ((c + radius) / side).floor() as i64 + 1)
        .collect();
    let mut out = Vec::new();
    let mut cur = lo.clone();
    loop {
        let dist2: f64 = cur
            .iter()
            .zip(center)
            .map(|(&m, &x)| {
                let (a, b) = (m as f64 * side, (m + 1) as f64 * side);
                let r = if x < a {
                    a - x
                } else if x > b {
                    x - b
                } else {
                    0.0
                };
                r * r
            })
            .sum();
        if dist2 <= radius * radius {
            out.push(CellId(cur.clone()));
        }
        let mut i = cur.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < hi[i] {
                cur[i] += 1;
                break;
            }
            cur[i] = lo[i];
        }
    }
}

fn grid_enumeration() -> Outcome {
    let mut bad = Vec::new();
    let one = cells_intersecting_ball(&[0.5], 1.0, 1.0, DEFAULT_ENUM_BUDGET).unwrap();
    if one != vec![CellId(vec![-1]), CellId(vec![0]), CellId(vec![1])] {
        bad.push("1-D fixed case".to_string());
    }
    let two = cells_intersecting_ball(&[0.0, 0.0], 1.0, 1.0, DEFAULT_ENUM_BUDGET).unwrap();
    if two.len() != 12 || two != brute_force_cells(&[0.0, 0.0], 1.0, 1.0) {
        bad.push(format!("2-D fixed case gave {} cells", two.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..50 {
        let k = rng.random_range(1..=3);
        let center: Vec<f64> = (0..k).map(|_| rng.random_range(-5.0..5.0)).collect();
        let radius = rng.random_range(0.0..2.5);
        let side = rng.random_range(0.2..2.0);
        let got = cells_intersecting_ball(&center, radius, side, DEFAULT_ENUM_BUDGET).unwrap();
        if got != brute_force_cells(&center, radius, side) {
            bad.push(format!("triple {trial}"));
        }
    }
    outcome(
        bad.is_empty(),
        format!("fixed cases plus 50 random triples, mismatches: {bad:?}"),
    )
}

fn batch_equivalence() -> Outcome {
    let inst = plant_instance(&PlantConfig {
        n: 300,
        dim: 24,
        radius: 1.0,
        c: 2.0,
        num_queries: 64,
        num_planted: 32,
        seed: 9,
    })
    .unwrap();
    let over = PlanOverrides {
        k: Some(4),
        grid_side: Some(0.5),
        alpha: None,
    };
    let plan = make_plan(300, 24, 2.0, 0.0, 19, &over).unwrap();
    let idx = NeighborIndex::build(inst.dataset, plan, Variant::FastPre).unwrap();
    let batch = idx.query_batch(&inst.queries).unwrap();
    let result_mismatch = inst
        .queries
        .iter_rows()
        .zip(&batch)
        .filter(|(q, r)| idx.query(q).unwrap() != **r)
        .count();

    let padded = inst.queries.zero_padded(plan.padded_dim).unwrap();
    let proj = project_batch(&padded, idx.basis(), plan.k).unwrap();
    let maps = block_mappings(idx.basis(), plan.k).unwrap();
    let mut worst = 0.0f64;
    for (j, q) in padded.iter_rows().enumerate() {
        // Relative to the whole image: single blocks can be ~0.
        let point_norm = norm(proj.point(j));
        for (i, m) in maps.iter().enumerate() {
            let single = project_point(m, q).unwrap();
            let diff: Vec<f64> = single.iter().zip(proj.get(j, i)).map(|(a, b)| a - b).collect();
            worst = worst.max(norm(&diff) / point_norm);
        }
    }
    outcome(
        result_mismatch == 0 && worst <= 1e-12,
        format!("{result_mismatch} result mismatches in 64 queries, worst projection rel. diff {worst:.1e}"),
    )
}

fn planner_formulas() -> Outcome {
    let g1 = gamma_bound(1.5, 2.0, 0.0).unwrap();
    let g2 = gamma_bound(1.2, 3.0, 0.0).unwrap();
    let t = tail_bound(20, 1.0, 2.0).unwrap();
    let pass = (g1 - 14.51).abs() <= 0.01 && (g2 - 2.015).abs() <= 0.001 && (t - 1.7242836e-3).abs() <= 1e-6;
    outcome(
        pass,
        format!("gamma {g1:.5} and {g2:.6}, tail_bound(20, 1, 2) = {t:.7e}"),
    )
}

fn lvann(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lvann"))
        .args(args)
        .env_remove("LVANN_ENUM_BUDGET")
        .output()
        .expect("binary runs")
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let inst = plant_instance(&PlantConfig {
        n: 300,
        dim: 16,
        radius: 1.0,
        c: 2.0,
        num_queries: 40,
        num_planted: 20,
        seed: 10,
    })
    .unwrap();
    let data = dir.path().join("data.fvecs");
    let queries = dir.path().join("queries.fvecs");
    write_fvecs(&data, inst.dataset.points()).unwrap();
    write_fvecs(&queries, &inst.queries).unwrap();
    let p = |x: &Path| x.to_str().unwrap().to_string();
    let plan_flags = [
        "--variant",
        "fast-query",
        "--c",
        "2",
        "--seed",
        "5",
        "--k-override",
        "4",
        "--grid-side-override",
        "0.5",
    ];

    let mut indexes = Vec::new();
    let mut reports = Vec::new();
    for run in 0..2 {
        let out = dir.path().join(format!("index{run}.bin"));
        let mut args = vec!["build".to_string(), "--input".into(), p(&data), "--out".into(), p(&out)];
        args.extend(plan_flags.iter().map(|s| s.to_string()));
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        let status = lvann(&argv);
        if !status.status.success() {
            return outcome(
                false,
                format!("build failed: {}", String::from_utf8_lossy(&status.stderr)),
            );
        }
        indexes.push(fs::read(&out).unwrap());

        let rep = dir.path().join(format!("report{run}.json"));
        let mut args = vec![
            "bench".to_string(),
            "--input".into(),
            p(&data),
            "--queries".into(),
            p(&queries),
            "--audit".into(),
            "--out".into(),
            p(&rep),
        ];
        args.extend(plan_flags.iter().map(|s| s.to_string()));
        let argv: Vec<&str> = args.iter().map(String::as_str).collect();
        let status = lvann(&argv);
        if !status.status.success() {
            return outcome(
                false,
                format!("bench failed: {}", String::from_utf8_lossy(&status.stderr)),
            );
        }
        let report: BenchReport = serde_json::from_slice(&fs::read(&rep).unwrap()).unwrap();
        reports.push(report);
    }
    let same_index = indexes[0] == indexes[1];
    let same_report = reports[0].without_timing() == reports[1].without_timing();
    let audited = reports[0].audit.as_ref().is_some_and(|a| a.passed);
    outcome(
        same_index && same_report && audited,
        format!(
            "index files identical: {same_index} ({} bytes), reports identical without timing: {same_report}",
            indexes[0].len()
        ),
    )
}

#[test]
fn acceptance_suite() {
    let (lv, lv_time) = las_vegas_runs();
    let criteria: Vec<(&str, Outcome)> = vec![
        ("orthonormal basis", orthonormality()),
        ("block sum identity", sum_identity()),
        ("coverage of unit vectors", coverage()),
        ("tail bound for long vectors", tail()),
        ("no false negatives", no_false_negatives(&lv, lv_time)),
        ("soundness of returned hits", soundness(&lv)),
        ("variant equivalence", variant_equivalence()),
        ("grid enumeration vs brute force", grid_enumeration()),
        ("batch vs sequential queries", batch_equivalence()),
        ("planner formulas", planner_formulas()),
        ("end-to-end determinism", determinism()),
    ];
    // Written straight to stderr so the verdicts show without --nocapture.
    let mut err = std::io::stderr().lock();
    let mut failed = Vec::new();
    for (i, (name, o)) in criteria.iter().enumerate() {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        writeln!(err, "[{tag}] AC-{:02} {name}: {}", i + 1, o.detail).unwrap();
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn dataset_ids_survive_planting() {
    // Planted neighbors carry the lowest ids, which the suite relies on.
    let inst = plant_instance(&PlantConfig {
        n: 20,
        dim: 4,
        radius: 1.0,
        c: 2.0,
        num_queries: 5,
        num_planted: 5,
        seed: 1,
    })
    .unwrap();
    let ids: Vec<u64> = inst.certificates.iter().map(|c| c.id).collect();
    assert_eq!(ids, vec![0, 1, 2, 3, 4]);
}
