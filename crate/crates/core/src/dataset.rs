use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// `n` points of `R^d` with stable ids.
///
/// Rows are kept sorted by ascending id, so row order and id order agree
/// everywhere downstream (buckets, candidate lists, tie-breaking).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Matrix,
    ids: Vec<u64>,
}

impl Dataset {
    pub fn new(points: Matrix, ids: Vec<u64>) -> Result<Self> {
        if points.rows() == 0 {
            return Err(Error::invalid("dataset must contain at least one point"));
        }
        if points.cols() == 0 {
            return Err(Error::invalid("dataset dimension must be at least 1"));
        }
        if ids.len() != points.rows() {
            return Err(Error::invalid(format!(
                "{} ids for {} points",
                ids.len(),
                points.rows()
            )));
        }
        if let Some(pos) = points.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite coordinate in point {}",
                pos / points.cols()
            )));
        }

        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.sort_by_key(|&i| ids[i]);
        if let Some(w) = order.windows(2).find(|w| ids[w[0]] == ids[w[1]]) {
            return Err(Error::invalid(format!("duplicate point id {}", ids[w[0]])));
        }
        if order.iter().enumerate().all(|(a, &b)| a == b) {
            return Ok(Self { points, ids });
        }
        let mut sorted = Matrix::zeros(points.rows(), points.cols());
        for (dst, &src) in order.iter().enumerate() {
            sorted.row_mut(dst).copy_from_slice(points.row(src));
        }
        let ids = order.iter().map(|&i| ids[i]).collect();
        Ok(Self { points: sorted, ids })
    }

    /// Rows with ids `0..n`.
    pub fn from_points(points: Matrix) -> Result<Self> {
        let ids = (0..points.rows() as u64).collect();
        Self::new(points, ids)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::from_points(Matrix::from_rows(rows)?)
    }

    pub fn len(&self) -> usize {
        self.points.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    pub fn points(&self) -> &Matrix {
        &self.points
    }

    pub fn point(&self, row: usize) -> &[f64] {
        self.points.row(row)
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn id(&self, row: usize) -> u64 {
        self.ids[row]
    }

    /// Row holding `id`, if present.
    pub fn row_of(&self, id: u64) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    /// Multiplies every coordinate by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let data = self.points.as_slice().iter().map(|v| v * factor).collect();
        Self::new(Matrix::from_vec(self.len(), self.dim(), data)?, self.ids.clone())
    }

    /// SHA-256 over `n`, `d`, the ids and the coordinate bits, all little-endian.
    pub fn checksum(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.len() as u64).to_le_bytes());
        h.update((self.dim() as u64).to_le_bytes());
        for id in &self.ids {
            h.update(id.to_le_bytes());
        }
        for v in self.points.as_slice() {
            h.update(v.to_le_bytes());
        }
        let mut out = [0u8; 32];
        out.copy_from_slice(h.finalize().as_slice());
        out
    }
}
