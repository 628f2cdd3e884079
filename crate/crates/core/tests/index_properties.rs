use std::sync::Arc;

use lvann::linalg::euclidean;
use lvann::oracle::{linear_scan, plant_instance, PlantConfig};
use lvann::{make_plan, tail_bound, Dataset, Matrix, NeighborIndex, PlanOverrides, Variant};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const VARIANTS: [Variant; 2] = [Variant::FastQuery, Variant::FastPre];

fn overrides(k: usize, side: f64) -> PlanOverrides {
    PlanOverrides {
        k: Some(k),
        grid_side: Some(side),
        alpha: None,
    }
}

/// Points clustered around a few centers so that many query/point pairs sit
/// near the radius boundary.
fn clustered(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let centers: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    (0..n)
        .map(|i| centers[i % 3].iter().map(|c| c + rng.random_range(-0.6..0.6)).collect())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 48,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn never_misses_a_point_within_radius(
        seed in any::<u64>(),
        dim in 2usize..10,
        k_frac in 0.0f64..1.0,
        side in 0.3f64..1.5,
        c in 1.1f64..3.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = 1 + ((dim - 1) as f64 * k_frac) as usize;
        let rows = clustered(&mut rng, 40, dim);
        let ds = Arc::new(Dataset::from_rows(&rows).unwrap());
        let plan = make_plan(ds.len(), dim, c, 0.0, seed, &overrides(k, side)).unwrap();
        let queries: Vec<Vec<f64>> = clustered(&mut rng, 15, dim);
        for v in VARIANTS {
            let idx = NeighborIndex::build(ds.clone(), plan, v).unwrap();
            for q in &queries {
                let truth = linear_scan(&ds, q, 1.0);
                let res = idx.query(q).unwrap();
                if !truth.is_empty() {
                    prop_assert!(res.hit.is_some(), "{v}: missed neighbor {:?}", truth[0]);
                }
                if let Some(h) = res.hit {
                    let row = ds.row_of(h.id).unwrap();
                    prop_assert_eq!(euclidean(ds.point(row), q), h.distance);
                    prop_assert!(h.distance <= c);
                }
            }
        }
    }

    #[test]
    fn variants_share_candidates(seed in any::<u64>(), side in 0.2f64..1.2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = clustered(&mut rng, 30, 6);
        let ds = Arc::new(Dataset::from_rows(&rows).unwrap());
        let plan = make_plan(ds.len(), 6, 2.0, 0.0, seed, &overrides(2, side)).unwrap();
        let fq = NeighborIndex::build(ds.clone(), plan, Variant::FastQuery).unwrap();
        let fp = NeighborIndex::build(ds.clone(), plan, Variant::FastPre).unwrap();
        for q in clustered(&mut rng, 10, 6) {
            prop_assert_eq!(fq.candidate_set(&q).unwrap(), fp.candidate_set(&q).unwrap());
        }
    }

    #[test]
    fn results_are_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = clustered(&mut rng, 25, 5);
        let ds = Dataset::from_rows(&rows).unwrap();
        let plan = make_plan(ds.len(), 5, 1.5, 0.0, seed, &overrides(2, 0.5)).unwrap();
        let a = NeighborIndex::build(ds.clone(), plan, Variant::FastPre).unwrap();
        let b = NeighborIndex::build(ds, plan, Variant::FastPre).unwrap();
        for q in clustered(&mut rng, 5, 5) {
            prop_assert_eq!(a.query(&q).unwrap(), b.query(&q).unwrap());
        }
    }
}

#[test]
fn batch_equals_sequential_with_empty_candidates() {
    let inst = plant_instance(&PlantConfig {
        n: 100,
        dim: 12,
        radius: 1.0,
        c: 2.0,
        num_queries: 20,
        num_planted: 10,
        seed: 3,
    })
    .unwrap();
    let plan = make_plan(100, 12, 2.0, 0.0, 3, &overrides(3, 0.5)).unwrap();
    let idx = NeighborIndex::build(inst.dataset, plan, Variant::FastPre).unwrap();
    let batch = idx.query_batch(&inst.queries).unwrap();
    let mut saw_empty = false;
    for (j, q) in inst.queries.iter_rows().enumerate() {
        let single = idx.query(q).unwrap();
        saw_empty |= single.stats.candidates == 0;
        assert_eq!(batch[j], single);
    }
    assert!(saw_empty, "expected at least one query without candidates");
    let one = Matrix::from_rows(&[inst.queries.row(0)]).unwrap();
    assert_eq!(idx.query_batch(&one).unwrap()[0], batch[0]);
}

#[test]
fn unreduced_plan_still_answers() {
    // gamma ln n >= d falls back to the original space.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let rows = clustered(&mut rng, 50, 3);
    let ds = Dataset::from_rows(&rows).unwrap();
    let plan = make_plan(
        50,
        3,
        1.5,
        0.0,
        1,
        &PlanOverrides {
            grid_side: Some(0.4),
            ..Default::default()
        },
    )
    .unwrap();
    assert!(!plan.reduced);
    for v in VARIANTS {
        let idx = NeighborIndex::build(ds.clone(), plan, v).unwrap();
        for q in clustered(&mut rng, 10, 3) {
            let truth = linear_scan(&ds, &q, 1.0);
            assert!(truth.is_empty() || idx.query(&q).unwrap().hit.is_some());
        }
    }
}

/// Far-only instances: every point sits at exactly `c R + margin` from the
/// query, so everything the exact check sees is a false positive. The mean
/// count must respect `2 * blocks * n * tail_bound(k, 1 + s sqrt(k), c)`.
#[test]
fn false_positive_rate_respects_tail_bound() {
    const TRIALS: usize = 10_000;
    const N: usize = 20;
    const DIM: usize = 16;
    let c = 10.0;
    let margin = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut total_rejected = 0u64;
    let mut plan_seen = None;
    for trial in 0..TRIALS {
        let q: Vec<f64> = (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rows: Vec<Vec<f64>> = (0..N)
            .map(|_| {
                let dir: Vec<f64> = (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
                let len = lvann::linalg::norm(&dir);
                q.iter().zip(&dir).map(|(a, b)| a + (c + margin) * b / len).collect()
            })
            .collect();
        let ds = Dataset::from_rows(&rows).unwrap();
        let plan = make_plan(
            N,
            DIM,
            c,
            0.0,
            trial as u64,
            &PlanOverrides {
                k: Some(2),
                ..Default::default()
            },
        )
        .unwrap();
        let idx = NeighborIndex::build(ds, plan, Variant::FastPre).unwrap();
        let res = idx.query(&q).unwrap();
        assert!(res.hit.is_none());
        total_rejected += res.stats.false_positives;
        plan_seen = Some(plan);
    }
    let plan = plan_seen.unwrap();
    let alpha_eff = plan.effective_alpha();
    let bound = 2.0 * plan.num_blocks as f64 * N as f64 * tail_bound(plan.k, alpha_eff, c).unwrap();
    let mean = total_rejected as f64 / TRIALS as f64;
    println!("mean false positives {mean:.4}, bound {bound:.4} (alpha_eff {alpha_eff:.4})");
    assert!(mean <= bound);
    assert!(mean > 0.0, "test is vacuous if nothing is ever examined");
}
