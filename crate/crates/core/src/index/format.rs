//! On-disk container for a built index.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! magic        6 bytes  "LVANN1"
//! version      u32      1
//! variant      u8       0 = fast-query, 1 = fast-pre
//! plan         n u64, dim u64, c f64, epsilon f64, alpha f64, nu f64, gamma f64,
//!              k u64, num_blocks u64, padded_dim u64, radius f64, grid_side f64,
//!              seed u64, reduced u8
//! input_scale  f64
//! dataset      checksum [32], ids u64 x n, points f64 x n x dim
//! tables       per block: cells u64, then per cell (ascending):
//!              coords i64 x k, len u32, rows u32 x len
//! trailer      SHA-256 of every preceding byte
//! ```
//!
//! The basis is not stored; it is regenerated from the plan's seed on load.

use std::io::{Read, Write};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::{prepare, BuildStats, CellTable, NeighborIndex, Variant};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::grid::DEFAULT_ENUM_BUDGET;
use crate::linalg::Matrix;
use crate::planner::ReductionPlan;

pub const MAGIC: &[u8; 6] = b"LVANN1";
pub const VERSION: u32 = 1;

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn i64(&mut self, v: i64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format(format!("truncated index at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("size does not fit in usize".into()))
    }
    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    /// Rejects counts that could not possibly fit in the remaining bytes.
    fn count(&mut self, elem_size: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.saturating_mul(elem_size) > self.buf.len() - self.pos {
            return Err(Error::Format(format!("implausible count {n} at byte {}", self.pos - 8)));
        }
        Ok(n)
    }
}

fn write_plan(w: &mut Writer, p: &ReductionPlan) {
    w.u64(p.n as u64);
    w.u64(p.dim as u64);
    w.f64(p.c);
    w.f64(p.epsilon);
    w.f64(p.alpha);
    w.f64(p.nu);
    w.f64(p.gamma);
    w.u64(p.k as u64);
    w.u64(p.num_blocks as u64);
    w.u64(p.padded_dim as u64);
    w.f64(p.radius);
    w.f64(p.grid_side);
    w.u64(p.seed);
    w.u8(p.reduced as u8);
}

fn read_plan(r: &mut Reader) -> Result<ReductionPlan> {
    Ok(ReductionPlan {
        n: r.usize()?,
        dim: r.usize()?,
        c: r.f64()?,
        epsilon: r.f64()?,
        alpha: r.f64()?,
        nu: r.f64()?,
        gamma: r.f64()?,
        k: r.usize()?,
        num_blocks: r.usize()?,
        padded_dim: r.usize()?,
        radius: r.f64()?,
        grid_side: r.f64()?,
        seed: r.u64()?,
        reduced: match r.u8()? {
            0 => false,
            1 => true,
            b => return Err(Error::Format(format!("bad reduced flag {b}"))),
        },
    })
}

impl NeighborIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer { buf: Vec::new() };
        w.buf.extend_from_slice(MAGIC);
        w.u32(VERSION);
        w.u8(match self.variant {
            Variant::FastQuery => 0,
            Variant::FastPre => 1,
        });
        write_plan(&mut w, &self.plan);
        w.f64(self.input_scale);

        let ds = &self.dataset;
        w.buf.extend_from_slice(&ds.checksum());
        for &id in ds.ids() {
            w.u64(id);
        }
        for &v in ds.points().as_slice() {
            w.f64(v);
        }

        for table in &self.tables {
            let cells = table.sorted();
            w.u64(cells.len() as u64);
            for (cell, rows) in cells {
                for &c in cell.coords() {
                    w.i64(c);
                }
                w.u32(rows.len() as u32);
                for &r in rows {
                    w.u32(r);
                }
            }
        }

        let digest = Sha256::digest(&w.buf);
        w.buf.extend_from_slice(digest.as_slice());
        w.buf
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut buf = Vec::new();
        input.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    /// Parses a container, verifying the trailer digest and the dataset
    /// checksum, then regenerates the basis and reduced images.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() + 32 || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Format("not an LVANN1 index (bad magic)".into()));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != trailer {
            return Err(Error::Format("index digest mismatch (file corrupted)".into()));
        }

        let mut r = Reader {
            buf: body,
            pos: MAGIC.len(),
        };
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported index version {version}")));
        }
        let variant = match r.u8()? {
            0 => Variant::FastQuery,
            1 => Variant::FastPre,
            b => return Err(Error::Format(format!("unknown variant tag {b}"))),
        };
        let plan = read_plan(&mut r)?;
        plan.validate().map_err(|e| Error::Format(e.to_string()))?;
        let input_scale = r.f64()?;

        let stored_checksum: [u8; 32] = r.array()?;
        let n = plan.n;
        let d = plan.dim;
        if n.saturating_mul(d.saturating_add(1)).saturating_mul(8) > body.len() - r.pos {
            return Err(Error::Format("dataset section truncated".into()));
        }
        let ids = (0..n).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        let data = (0..n * d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let dataset = Dataset::new(Matrix::from_vec(n, d, data)?, ids).map_err(|e| Error::Format(e.to_string()))?;
        if dataset.checksum() != stored_checksum {
            return Err(Error::Format("dataset checksum mismatch".into()));
        }

        let prepared = prepare(&dataset, &plan)?;
        let mut tables = Vec::with_capacity(plan.num_blocks);
        for block in 0..plan.num_blocks {
            let cells = r.count(plan.k * 8 + 4)?;
            let mut table = CellTable::new();
            for _ in 0..cells {
                let coords = (0..plan.k).map(|_| r.i64()).collect::<Result<Vec<_>>>()?;
                let len = r.u32()? as usize;
                let rows = (0..len).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
                if rows.windows(2).any(|w| w[0] >= w[1]) || rows.last().is_some_and(|&x| x as usize >= n) {
                    return Err(Error::Format(format!("malformed bucket in block {block}")));
                }
                if !table.insert_bucket(coords.into(), rows) {
                    return Err(Error::Format(format!("duplicate cell in block {block}")));
                }
            }
            if variant == Variant::FastPre && table.num_entries() != n as u64 {
                return Err(Error::Format(format!(
                    "block {block} holds {} entries, expected one per point",
                    table.num_entries()
                )));
            }
            tables.push(table);
        }
        if r.pos != body.len() {
            return Err(Error::Format(format!("{} trailing bytes", body.len() - r.pos)));
        }

        let cells_inserted = tables.iter().map(CellTable::num_entries).sum();
        Ok(NeighborIndex {
            variant,
            plan,
            basis: prepared.basis,
            tables,
            dataset: Arc::new(dataset),
            reduced: prepared.reduced,
            search_radius: prepared.search_radius,
            enum_budget: DEFAULT_ENUM_BUDGET,
            build_stats: BuildStats {
                cells_inserted,
                build_seconds: 0.0,
            },
            input_scale,
        })
    }
}
