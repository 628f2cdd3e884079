//! Random orthonormal bases, the block mappings cut from them, and projection
//! of single points and batches into the reduced spaces.
//!
//! A basis of dimension `d'` split into blocks of `k` consecutive rows gives
//! `d'/k` mappings `A_i`, each scaled by `sqrt(d'/k)`. Because the full basis
//! is orthonormal, `sum_i |A_i x|^2 = (d'/k) |x|^2` for every `x`, so at least
//! one block never lengthens a vector. That coverage property is what makes
//! the index free of false negatives.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "matrix data has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::invalid(format!(
                    "row {i} has length {}, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Copies the matrix, appending zero columns up to `cols`.
    pub fn zero_padded(&self, cols: usize) -> Result<Matrix> {
        if cols < self.cols {
            return Err(Error::invalid(format!(
                "cannot pad {} columns down to {cols}",
                self.cols
            )));
        }
        if cols == self.cols {
            return Ok(self.clone());
        }
        let mut out = Matrix::zeros(self.rows, cols);
        for i in 0..self.rows {
            out.row_mut(i)[..self.cols].copy_from_slice(self.row(i));
        }
        Ok(out)
    }

    /// Largest absolute deviation of `self * self^T` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.rows {
                let g = dot(self.row(i), self.row(j));
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Euclidean distance. Every exact check in the crate goes through this.
#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let t = x - y;
            t * t
        })
        .sum::<f64>()
        .sqrt()
}

/// Rows `a_1 .. a_d'` of a random orthonormal basis of `R^d'`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    seed: u64,
    rows: Matrix,
}

impl OrthonormalBasis {
    pub fn dim(&self) -> usize {
        self.rows.rows()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.rows.row(i)
    }

    /// The standard basis. Used by plans that skip dimension reduction.
    pub fn identity(dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("basis dimension must be at least 1"));
        }
        let mut rows = Matrix::zeros(dim, dim);
        for i in 0..dim {
            rows.row_mut(i)[i] = 1.0;
        }
        Ok(Self { seed, rows })
    }
}

/// Draws an i.i.d. standard-normal `dim x dim` matrix from a ChaCha8 stream
/// seeded with `seed` and orthonormalizes its rows with two passes of
/// modified Gram-Schmidt. Each row is then signed so that its diagonal entry
/// is non-negative; row signs do not change the span of any block, so the
/// projection lengths keep the rotation-invariant distribution.
pub fn random_orthonormal_basis(dim: usize, seed: u64) -> Result<OrthonormalBasis> {
    if dim == 0 {
        return Err(Error::invalid("basis dimension must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Matrix::zeros(dim, dim);
    for i in 0..dim {
        loop {
            let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            for _pass in 0..2 {
                for j in 0..i {
                    let q = rows.row(j);
                    let proj = dot(&v, q);
                    for (vt, qt) in v.iter_mut().zip(q) {
                        *vt -= proj * qt;
                    }
                }
            }
            let len = norm(&v);
            // A Gaussian row falls into the span of the previous rows with
            // probability zero; redraw if rounding ever makes it collapse.
            if len > 1e-6 {
                let sign = if v[i] < 0.0 { -1.0 } else { 1.0 };
                for (dst, src) in rows.row_mut(i).iter_mut().zip(&v) {
                    *dst = sign * src / len;
                }
                break;
            }
        }
    }
    Ok(OrthonormalBasis { seed, rows })
}

/// Block `index` (zero-based) of a basis: rows `index*k .. (index+1)*k`,
/// each multiplied by `sqrt(d'/k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMapping {
    index: usize,
    k: usize,
    scale: f64,
    rows: Matrix,
}

impl BlockMapping {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn input_dim(&self) -> usize {
        self.rows.cols()
    }

    /// The scaled `k x d'` matrix.
    pub fn rows(&self) -> &Matrix {
        &self.rows
    }
}

pub fn block_scale(dim: usize, k: usize) -> f64 {
    (dim as f64 / k as f64).sqrt()
}

pub fn block_mappings(basis: &OrthonormalBasis, k: usize) -> Result<Vec<BlockMapping>> {
    let dim = basis.dim();
    check_block_size(dim, k)?;
    let scale = block_scale(dim, k);
    let mappings = (0..dim / k)
        .map(|index| {
            let mut rows = Matrix::zeros(k, dim);
            for r in 0..k {
                for (dst, src) in rows.row_mut(r).iter_mut().zip(basis.row(index * k + r)) {
                    *dst = src * scale;
                }
            }
            BlockMapping { index, k, scale, rows }
        })
        .collect();
    Ok(mappings)
}

fn check_block_size(dim: usize, k: usize) -> Result<()> {
    if k == 0 || !dim.is_multiple_of(k) {
        return Err(Error::invalid(format!(
            "block size k = {k} must be positive and divide the basis dimension {dim}"
        )));
    }
    Ok(())
}

/// `A_i x` for one block.
pub fn project_point(mapping: &BlockMapping, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != mapping.input_dim() {
        return Err(Error::invalid(format!(
            "point has dimension {}, mapping expects {}",
            x.len(),
            mapping.input_dim()
        )));
    }
    Ok(mapping.rows.iter_rows().map(|r| dot(r, x)).collect())
}

/// Reduced images of `m` points under every block, stored point-major:
/// point `j`, block `i`, coordinate `t` lives at `j*d' + i*k + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    points: usize,
    num_blocks: usize,
    k: usize,
    data: Vec<f64>,
}

impl Projection {
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The `k`-vector of point `j` under block `i`.
    pub fn get(&self, j: usize, i: usize) -> &[f64] {
        let width = self.num_blocks * self.k;
        let start = j * width + i * self.k;
        &self.data[start..start + self.k]
    }

    /// All blocks of point `j`, concatenated.
    pub fn point(&self, j: usize) -> &[f64] {
        let width = self.num_blocks * self.k;
        &self.data[j * width..(j + 1) * width]
    }
}

/// Projects all rows of `points` (already padded to the basis dimension)
/// through every block: one product with the transposed basis followed by
/// the per-block scale.
pub fn project_batch(points: &Matrix, basis: &OrthonormalBasis, k: usize) -> Result<Projection> {
    let dim = basis.dim();
    check_block_size(dim, k)?;
    if points.rows() == 0 {
        return Err(Error::invalid("batch must contain at least one point"));
    }
    if points.cols() != dim {
        return Err(Error::invalid(format!(
            "points have dimension {}, basis has dimension {dim}",
            points.cols()
        )));
    }
    let scale = block_scale(dim, k);
    let mut data = Vec::with_capacity(points.rows() * dim);
    for p in points.iter_rows() {
        data.extend(basis.rows.iter_rows().map(|a| dot(a, p) * scale));
    }
    Ok(Projection {
        points: points.rows(),
        num_blocks: dim / k,
        k,
        data,
    })
}
