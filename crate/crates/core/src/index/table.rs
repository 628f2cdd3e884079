use std::collections::HashMap;
use std::hash::{BuildHasherDefault, Hasher};

use crate::grid::CellId;

/// Multiply-xor mixer over the 64-bit words of a cell key. Only decides the
/// hash bucket; equality is always checked on the full coordinate vector.
#[derive(Debug, Default, Clone, Copy)]
pub struct CellHasher(u64);

const MIX: u64 = 0x9E37_79B9_7F4A_7C15;

impl CellHasher {
    #[inline]
    fn mix(&mut self, word: u64) {
        self.0 = (self.0 ^ word).wrapping_mul(MIX);
        self.0 ^= self.0 >> 29;
    }
}

impl Hasher for CellHasher {
    fn write(&mut self, bytes: &[u8]) {
        for chunk in bytes.chunks(8) {
            let mut w = [0u8; 8];
            w[..chunk.len()].copy_from_slice(chunk);
            self.mix(u64::from_le_bytes(w));
        }
    }

    fn write_u64(&mut self, v: u64) {
        self.mix(v);
    }

    fn write_i64(&mut self, v: i64) {
        self.mix(v as u64);
    }

    fn write_usize(&mut self, v: usize) {
        self.mix(v as u64);
    }

    fn finish(&self) -> u64 {
        let mut h = self.0;
        h ^= h >> 32;
        h = h.wrapping_mul(MIX);
        h ^ (h >> 29)
    }
}

type CellMap = HashMap<Box<[i64]>, Vec<u32>, BuildHasherDefault<CellHasher>>;

/// Cell -> bucket of dataset rows for one block. Buckets are kept in
/// ascending row order, which is ascending point id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CellTable {
    map: CellMap,
    entries: u64,
}

impl CellTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `row` to the bucket of `cell`. Rows must arrive in
    /// non-decreasing order per bucket.
    pub(crate) fn insert(&mut self, cell: &[i64], row: u32) {
        let bucket = match self.map.get_mut(cell) {
            Some(b) => b,
            None => self.map.entry(cell.into()).or_default(),
        };
        debug_assert!(bucket.last().is_none_or(|&last| last < row));
        bucket.push(row);
        self.entries += 1;
    }

    pub(crate) fn insert_bucket(&mut self, cell: Box<[i64]>, rows: Vec<u32>) -> bool {
        self.entries += rows.len() as u64;
        self.map.insert(cell, rows).is_none()
    }

    pub fn get(&self, cell: &[i64]) -> Option<&[u32]> {
        self.map.get(cell).map(Vec::as_slice)
    }

    pub fn num_cells(&self) -> usize {
        self.map.len()
    }

    /// Total bucket entries across all cells.
    pub fn num_entries(&self) -> u64 {
        self.entries
    }

    /// Cells and buckets in lexicographic cell order.
    pub fn sorted(&self) -> Vec<(CellId, &[u32])> {
        let mut out: Vec<_> = self
            .map
            .iter()
            .map(|(k, v)| (CellId(k.to_vec()), v.as_slice()))
            .collect();
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }
}
