//! Flat binary export: `<stem>.bin` holds little-endian f64 values in flat
//! cell order (components one after another for vector fields) and
//! `<stem>.json` holds the grid header.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GridSpec, ScalarGridField, VectorGridField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Header {
    pub dim: usize,
    pub origin: Vec<f64>,
    pub spacing: f64,
    pub cells: Vec<usize>,
    #[serde(default = "one")]
    pub components: usize,
}

fn one() -> usize {
    1
}

impl Header {
    fn of(grid: &GridSpec, components: usize) -> Self {
        let d = grid.dim();
        Header {
            dim: d,
            origin: grid.origin()[..d].to_vec(),
            spacing: grid.spacing(),
            cells: grid.cells()[..d].to_vec(),
            components,
        }
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.dim, &self.origin, self.spacing, &self.cells)
    }
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

fn write_raw(stem: &Path, header: &Header, data: impl Iterator<Item = f64>) -> Result<()> {
    let (bin, json) = paths(stem);
    let bytes: Vec<u8> = data.flat_map(f64::to_le_bytes).collect();
    fs::write(bin, bytes)?;
    fs::write(json, serde_json::to_string_pretty(header)?)?;
    Ok(())
}

fn read_raw(stem: &Path) -> Result<(Header, Vec<f64>)> {
    let (bin, json) = paths(stem);
    let header: Header = serde_json::from_str(&fs::read_to_string(json)?)?;
    let bytes = fs::read(bin)?;
    if bytes.len() % 8 != 0 {
        return Err(Error::invalid("binary field length is not a multiple of 8"));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((header, values))
}

pub fn write_scalar(field: &ScalarGridField, stem: &Path) -> Result<()> {
    write_raw(stem, &Header::of(field.grid(), 1), field.values().iter().copied())
}

pub fn read_scalar(stem: &Path) -> Result<ScalarGridField> {
    let (header, values) = read_raw(stem)?;
    if header.components != 1 {
        return Err(Error::invalid("expected a scalar field"));
    }
    ScalarGridField::new(header.grid()?, values)
}

pub fn write_vector(field: &VectorGridField, stem: &Path) -> Result<()> {
    let d = field.grid().dim();
    let data = (0..d).flat_map(|a| field.component(a).iter().copied());
    write_raw(stem, &Header::of(field.grid(), d), data)
}

pub fn read_vector(stem: &Path) -> Result<VectorGridField> {
    let (header, values) = read_raw(stem)?;
    let grid = header.grid()?;
    if header.components != grid.dim() || values.len() != grid.len() * grid.dim() {
        return Err(Error::invalid("vector field file does not match its header"));
    }
    let comps = values.chunks_exact(grid.len()).map(<[f64]>::to_vec).collect();
    VectorGridField::new(grid, comps)
}
