//! Linear-scan ground truth and a generator of instances with planted
//! neighbors. Deliberately naive.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{euclidean, Matrix};

/// Every point within `radius` of `q`, ascending id, with exact distances.
pub fn linear_scan(dataset: &Dataset, q: &[f64], radius: f64) -> Vec<(u64, f64)> {
    dataset
        .points()
        .iter_rows()
        .enumerate()
        .filter_map(|(row, p)| {
            let d = euclidean(p, q);
            (d <= radius).then(|| (dataset.id(row), d))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub query: usize,
    pub id: u64,
    pub distance: f64,
}

#[derive(Debug, Clone)]
pub struct PlantedInstance {
    pub dataset: Dataset,
    pub queries: Matrix,
    pub certificates: Vec<Certificate>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantConfig {
    /// Total points, planted ones included.
    pub n: usize,
    pub dim: usize,
    pub radius: f64,
    pub c: f64,
    pub num_queries: usize,
    /// Queries `0..num_planted` each get one neighbor within `radius`.
    pub num_planted: usize,
    pub seed: u64,
}

const RETRIES_PER_POINT: usize = 10_000;

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, sigma: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut *rng);
            sigma * z
        })
        .collect()
}

/// Queries and background points are Gaussian with spread chosen so that a
/// typical pair sits about `3 c R` apart; background points closer than
/// `c R` to any query are redrawn. Planted neighbors sit at a uniform
/// distance in `(0, R]` from their query along a uniform direction.
pub fn plant_instance(cfg: &PlantConfig) -> Result<PlantedInstance> {
    let PlantConfig {
        n,
        dim,
        radius,
        c,
        num_queries,
        num_planted,
        seed,
    } = *cfg;
    if dim == 0 || !(radius > 0.0) || !(c > 1.0) {
        return Err(Error::invalid("plant_instance needs dim >= 1, radius > 0, c > 1"));
    }
    if num_planted > num_queries || num_planted > n || n == 0 {
        return Err(Error::invalid(format!(
            "cannot plant {num_planted} neighbors for {num_queries} queries among {n} points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = 3.0 * c * radius / (2.0 * dim as f64).sqrt();
    let far = c * radius;

    let queries: Vec<Vec<f64>> = (0..num_queries).map(|_| gaussian(&mut rng, dim, sigma)).collect();

    let mut points: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut certificates = Vec::with_capacity(num_planted);
    for (qi, q) in queries.iter().enumerate().take(num_planted) {
        loop {
            let dir = gaussian(&mut rng, dim, 1.0);
            let len = crate::linalg::norm(&dir);
            if len == 0.0 {
                continue;
            }
            let t = radius * (1.0 - rng.random::<f64>());
            let p: Vec<f64> = q.iter().zip(&dir).map(|(a, b)| a + t * b / len).collect();
            let distance = euclidean(&p, q);
            if distance > 0.0 && distance <= radius {
                certificates.push(Certificate {
                    query: qi,
                    id: points.len() as u64,
                    distance,
                });
                points.push(p);
                break;
            }
        }
    }

    while points.len() < n {
        let mut tries = 0;
        let p = loop {
            let p = gaussian(&mut rng, dim, sigma);
            if queries.iter().all(|q| euclidean(&p, q) > far) {
                break p;
            }
            tries += 1;
            if tries >= RETRIES_PER_POINT {
                return Err(Error::Generation(format!(
                    "no background point farther than {far} from all queries after {tries} draws"
                )));
            }
        };
        points.push(p);
    }

    let queries = if queries.is_empty() {
        Matrix::zeros(0, dim)
    } else {
        Matrix::from_rows(&queries)?
    };
    Ok(PlantedInstance {
        dataset: Dataset::from_rows(&points)?,
        queries,
        certificates,
    })
}
