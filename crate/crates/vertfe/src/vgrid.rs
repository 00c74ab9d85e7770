//! The `vgrid` volume format: one JSON header line, a newline, then a raw
//! little-endian payload in x-fastest order. Grey and density grids store
//! `float32`; masks store one `uint8` (0 or 1) per voxel.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use vertfe_core::segment::VoxelMask;
use vertfe_core::voxel::{GridGeometry, GridKind, VoxelGrid};

use crate::error::FormatError;

const FLOAT32: &str = "float32le";
const UINT8: &str = "uint8";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
    /// `Grey`, `Density` or `Mask`.
    pub kind: String,
    pub scalar: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Volume {
    Grid(VoxelGrid),
    Mask(VoxelMask),
}

fn header_for(g: &GridGeometry, kind: &str, scalar: &str) -> Header {
    Header { dims: g.dims, spacing_mm: g.spacing, origin_mm: g.origin, kind: kind.into(), scalar: scalar.into() }
}

fn write_header<W: Write>(w: &mut W, h: &Header) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, h)?;
    w.write_all(b"\n")
}

pub fn write_grid<W: Write>(w: &mut W, grid: &VoxelGrid) -> std::io::Result<()> {
    let kind = match grid.kind() {
        GridKind::Grey => "Grey",
        GridKind::Density => "Density",
    };
    write_header(w, &header_for(grid.geometry(), kind, FLOAT32))?;
    let mut buf = Vec::with_capacity(4 * grid.values().len());
    for &v in grid.values() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn write_mask<W: Write>(w: &mut W, mask: &VoxelMask) -> std::io::Result<()> {
    write_header(w, &header_for(mask.geometry(), "Mask", UINT8))?;
    let buf: Vec<u8> = mask.bits().iter().map(|&b| b as u8).collect();
    w.write_all(&buf)
}

pub fn read_volume<R: BufRead>(r: &mut R) -> Result<Volume, FormatError> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line).map_err(|e| FormatError::Header(e.to_string()))?;
    if line.last() != Some(&b'\n') {
        return Err(FormatError::Header("missing header line".into()));
    }
    let h: Header = serde_json::from_slice(&line[..line.len() - 1]).map_err(|e| FormatError::Header(e.to_string()))?;
    let geometry =
        GridGeometry::new(h.dims, h.spacing_mm, h.origin_mm).map_err(|e| FormatError::Header(e.to_string()))?;
    let n = geometry.len();
    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(|e| FormatError::Header(e.to_string()))?;
    let width = match (h.kind.as_str(), h.scalar.as_str()) {
        ("Grey" | "Density", FLOAT32) => 4,
        ("Mask", UINT8) => 1,
        (k, s) => return Err(FormatError::Header(format!("unsupported kind/scalar {k}/{s}"))),
    };
    if payload.len() != width * n {
        return Err(FormatError::Payload { expected: width * n, got: payload.len() });
    }
    if width == 1 {
        let mut bits = Vec::with_capacity(n);
        for &b in &payload {
            match b {
                0 => bits.push(false),
                1 => bits.push(true),
                v => return Err(FormatError::Header(format!("mask byte {v} is not 0 or 1"))),
            }
        }
        let mask = VoxelMask::new(geometry, bits).map_err(|e| FormatError::Header(e.to_string()))?;
        return Ok(Volume::Mask(mask));
    }
    let values: Vec<f64> =
        payload.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
    let kind = if h.kind == "Grey" { GridKind::Grey } else { GridKind::Density };
    let grid = VoxelGrid::new(geometry, kind, values).map_err(|e| FormatError::Header(e.to_string()))?;
    Ok(Volume::Grid(grid))
}

pub fn load_volume(path: &Path) -> Result<Volume, FormatError> {
    let f = File::open(path).map_err(|e| FormatError::io(path, e))?;
    read_volume(&mut BufReader::new(f))
}

pub fn load_grid(path: &Path) -> Result<VoxelGrid, FormatError> {
    match load_volume(path)? {
        Volume::Grid(g) => Ok(g),
        Volume::Mask(_) => Err(FormatError::WrongKind { expected: "grey or density", found: "Mask".into() }),
    }
}

pub fn load_mask(path: &Path) -> Result<VoxelMask, FormatError> {
    match load_volume(path)? {
        Volume::Mask(m) => Ok(m),
        Volume::Grid(g) => Err(FormatError::WrongKind { expected: "mask", found: format!("{:?}", g.kind()) }),
    }
}

fn save_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), FormatError> {
    let file = File::create(path).map_err(|e| FormatError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| FormatError::io(path, e))
}

pub fn save_grid(path: &Path, grid: &VoxelGrid) -> Result<(), FormatError> {
    save_with(path, |w| write_grid(w, grid))
}

pub fn save_mask(path: &Path, mask: &VoxelMask) -> Result<(), FormatError> {
    save_with(path, |w| write_mask(w, mask))
}
