//! Binary field files.
//!
//! Layout (little-endian): magic `AHCF`, version `u32`, n `u32`, N `u32`,
//! r_max `f64`, rank `u32`, flag `u8` (0 physical, 1 rescaled), then
//! `N^n · ncomp` `f64` values in row-major node order with components
//! fastest. Exterior nodes are stored as zeros.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ahcc_core::field::{Field, FieldKind};
use ahcc_core::{FieldGrid, NodeClass, Repr};

use crate::error::CliError;

pub const MAGIC: [u8; 4] = *b"AHCF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8 + 4 + 1;

/// Decoded file header.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub version: u32,
    pub n: u32,
    pub points: u32,
    pub r_max: f64,
    pub rank: u32,
    pub repr: Repr,
}

impl Header {
    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..4].copy_from_slice(&MAGIC);
        out[4..8].copy_from_slice(&self.version.to_le_bytes());
        out[8..12].copy_from_slice(&self.n.to_le_bytes());
        out[12..16].copy_from_slice(&self.points.to_le_bytes());
        out[16..24].copy_from_slice(&self.r_max.to_le_bytes());
        out[24..28].copy_from_slice(&self.rank.to_le_bytes());
        out[28] = match self.repr {
            Repr::Physical => 0,
            Repr::Rescaled => 1,
        };
        out
    }

    fn decode(b: &[u8; HEADER_LEN]) -> Result<Self, String> {
        if b[..4] != MAGIC {
            return Err("bad magic, not a field file".into());
        }
        let u32_at = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
        let version = u32_at(4);
        if version != VERSION {
            return Err(format!("unsupported version {version}"));
        }
        let repr = match b[28] {
            0 => Repr::Physical,
            1 => Repr::Rescaled,
            f => return Err(format!("unknown representation flag {f}")),
        };
        Ok(Header {
            version,
            n: u32_at(8),
            points: u32_at(12),
            r_max: f64::from_le_bytes(b[16..24].try_into().unwrap()),
            rank: u32_at(24),
            repr,
        })
    }
}

pub fn write_field<K: FieldKind>(path: &Path, grid: &FieldGrid, field: &Field<K>) -> Result<(), CliError> {
    field.check_grid(grid)?;
    let header = Header {
        version: VERSION,
        n: grid.dim() as u32,
        points: grid.points_per_axis() as u32,
        r_max: grid.r_max(),
        rank: K::RANK as u32,
        repr: field.repr(),
    };
    let io = |e| CliError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(&header.encode()).map_err(io)?;
    for p in 0..grid.node_count() {
        let exterior = grid.class(p) == NodeClass::Exterior;
        for &v in field.at(p) {
            let v = if exterior { 0.0 } else { v };
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// Reads a field and checks that it belongs to `grid` with the expected
/// representation.
pub fn read_field<K: FieldKind>(path: &Path, grid: &FieldGrid, repr: Repr) -> Result<Field<K>, CliError> {
    let io = |e| CliError::io(path, e);
    let schema = |msg: String| CliError::Schema(format!("{}: {msg}", path.display()));
    let mut r = BufReader::new(File::open(path).map_err(io)?);
    let mut raw = [0u8; HEADER_LEN];
    r.read_exact(&mut raw).map_err(|_| schema("truncated header".into()))?;
    let h = Header::decode(&raw).map_err(schema)?;
    if h.n as usize != grid.dim() || h.points as usize != grid.points_per_axis() || h.r_max != grid.r_max() {
        return Err(schema(format!(
            "grid mismatch: file has n = {}, N = {}, r_max = {}; config has n = {}, N = {}, r_max = {}",
            h.n,
            h.points,
            h.r_max,
            grid.dim(),
            grid.points_per_axis(),
            grid.r_max()
        )));
    }
    if h.rank as usize != K::RANK {
        return Err(schema(format!("expected a {} (rank {}), found rank {}", K::NAME, K::RANK, h.rank)));
    }
    if h.repr != repr {
        return Err(schema(format!("expected {repr:?} components, found {:?}", h.repr)));
    }
    let len = grid.node_count() * K::ncomp(grid.dim());
    let mut bytes = Vec::with_capacity(len * 8);
    r.read_to_end(&mut bytes).map_err(io)?;
    if bytes.len() != len * 8 {
        return Err(schema(format!("expected {} data bytes, found {}", len * 8, bytes.len())));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Field::from_data(grid, repr, 0, data)?)
}

/// Reads only the header.
pub fn read_header(path: &Path) -> Result<Header, CliError> {
    let mut raw = [0u8; HEADER_LEN];
    File::open(path)
        .and_then(|mut f| f.read_exact(&mut raw))
        .map_err(|e| CliError::io(path, e))?;
    Header::decode(&raw).map_err(|m| CliError::Schema(format!("{}: {m}", path.display())))
}
