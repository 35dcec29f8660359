//! Field snapshot files.
//!
//! Binary layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `RNSF` |
//! | 4     | format version (u32, currently 1) |
//! | 4     | dim (u32) |
//! | 4     | n (u32) |
//! | 4     | components (u32) |
//! | 8     | time (f64) |
//! | 8 * components * n^dim | physical values (f64), component-major, points row-major with x slowest |
//!
//! The CSV export has one row per collocation point: integer index columns
//! `i, j[, k]` followed by one column per component.

use std::io::{Read, Write};
use std::sync::Arc;

use super::field::{Field, Rank};
use super::grid::Grid;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RNSF";
pub const VERSION: u32 = 1;

/// Decoded snapshot contents.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub dim: usize,
    pub n: usize,
    pub components: usize,
    pub time: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn from_field(f: &Field, time: f64) -> Snapshot {
        Snapshot {
            dim: f.dim(),
            n: f.grid().n(),
            components: f.n_components(),
            time,
            values: f.to_physical(),
        }
    }

    /// Rebuilds a field on `grid`, inferring the rank from the component count.
    pub fn to_field(&self, grid: &Arc<Grid>) -> Result<Field> {
        if grid.dim() != self.dim || grid.n() != self.n {
            return Err(Error::GridMismatch(format!(
                "snapshot is dim {} n {}, grid is dim {} n {}",
                self.dim,
                self.n,
                grid.dim(),
                grid.n()
            )));
        }
        let rank = [Rank::Scalar, Rank::Vector, Rank::Tensor]
            .into_iter()
            .find(|r| r.components(self.dim) == self.components)
            .ok_or_else(|| Error::InvalidArgument(format!("{} components fit no rank", self.components)))?;
        Field::from_physical(grid, rank, &self.values)
    }

    pub fn write_binary(&self, mut w: impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        for v in [VERSION, self.dim as u32, self.n as u32, self.components as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        w.write_all(&self.time.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary(mut r: impl Read) -> Result<Snapshot> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::InvalidArgument("not a field snapshot (bad magic)".into()));
        }
        let mut word = [0u8; 4];
        let mut next = |r: &mut dyn Read| -> Result<u32> {
            r.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word))
        };
        let version = next(&mut r)?;
        if version != VERSION {
            return Err(Error::Unsupported(format!("snapshot version {version}")));
        }
        let dim = next(&mut r)? as usize;
        let n = next(&mut r)? as usize;
        let components = next(&mut r)? as usize;
        let mut t = [0u8; 8];
        r.read_exact(&mut t)?;
        let count = components * n.pow(dim as u32);
        let mut raw = vec![0u8; count * 8];
        r.read_exact(&mut raw)?;
        let values = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect();
        Ok(Snapshot {
            dim,
            n,
            components,
            time: f64::from_le_bytes(t),
            values,
        })
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        let axes = ["i", "j", "k"];
        let mut header: Vec<String> = axes[..self.dim].iter().map(|s| s.to_string()).collect();
        header.extend((0..self.components).map(|c| format!("c{c}")));
        writeln!(w, "{}", header.join(","))?;
        let len = self.n.pow(self.dim as u32);
        for idx in 0..len {
            let mut row = Vec::with_capacity(self.dim + self.components);
            let mut rem = idx;
            let mut ix = vec![0; self.dim];
            for d in (0..self.dim).rev() {
                ix[d] = rem % self.n;
                rem /= self.n;
            }
            row.extend(ix.iter().map(|i| i.to_string()));
            row.extend((0..self.components).map(|c| format!("{:e}", self.values[c * len + idx])));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}
