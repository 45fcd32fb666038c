//! Field serialization.
//!
//! Binary layout (all values little-endian f64, in order):
//! `dim, nodes_axis_1.. , (lo, hi) per axis.. , payload row-major`.
//! The CSV export lists index coordinates, positions, then the value.

use crate::field::ScalarField;
use crate::grid::{Grid, GridError};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("truncated field file")]
    Truncated,
    #[error("malformed header field {name}: {value}")]
    BadHeader { name: &'static str, value: f64 },
    #[error("grid rejected: {0}")]
    Grid(#[from] GridError),
    #[error("field rejected: {0}")]
    Field(#[from] crate::field::FieldError),
}

fn write_f64(w: &mut impl Write, v: f64) -> Result<(), IoError> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_f64(r: &mut impl Read) -> Result<f64, IoError> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            IoError::Truncated
        } else {
            IoError::Io(e)
        }
    })?;
    Ok(f64::from_le_bytes(buf))
}

pub fn write_field(path: &Path, field: &ScalarField) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    let g = field.grid();
    write_f64(&mut w, g.dim() as f64)?;
    for axis in 0..g.dim() {
        write_f64(&mut w, g.nodes_along(axis) as f64)?;
    }
    for axis in 0..g.dim() {
        let (lo, hi) = g.extent(axis);
        write_f64(&mut w, lo)?;
        write_f64(&mut w, hi)?;
    }
    for &v in field.values() {
        write_f64(&mut w, v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<ScalarField, IoError> {
    let mut r = BufReader::new(File::open(path)?);
    let dim_raw = read_f64(&mut r)?;
    if dim_raw != 1.0 && dim_raw != 2.0 {
        return Err(IoError::BadHeader { name: "dim", value: dim_raw });
    }
    let dim = dim_raw as usize;
    let mut nodes = [1usize; 2];
    for n in nodes.iter_mut().take(dim) {
        let raw = read_f64(&mut r)?;
        if raw.fract() != 0.0 || !(3.0..=1e9).contains(&raw) {
            return Err(IoError::BadHeader { name: "nodes", value: raw });
        }
        *n = raw as usize;
    }
    let mut ext = [(0.0f64, 0.0f64); 2];
    for e in ext.iter_mut().take(dim) {
        e.0 = read_f64(&mut r)?;
        e.1 = read_f64(&mut r)?;
    }
    let grid = if dim == 1 {
        Grid::line(ext[0].0, ext[0].1, nodes[0])?
    } else {
        Grid::rect(ext[0], ext[1], nodes[0], nodes[1])?
    };
    let mut values = Vec::with_capacity(grid.num_nodes());
    for _ in 0..grid.num_nodes() {
        values.push(read_f64(&mut r)?);
    }
    Ok(ScalarField::from_values(grid, values)?)
}

pub fn write_field_csv(path: &Path, field: &ScalarField) -> Result<(), IoError> {
    let mut w = BufWriter::new(File::create(path)?);
    let g = field.grid();
    if g.dim() == 1 {
        writeln!(w, "i,x,value")?;
        for id in 0..g.num_nodes() {
            let (i, _) = g.node_multi(id);
            writeln!(w, "{},{},{}", i, g.node_pos(id)[0], field.get(id))?;
        }
    } else {
        writeln!(w, "i,j,x,y,value")?;
        for id in 0..g.num_nodes() {
            let (i, j) = g.node_multi(id);
            let pos = g.node_pos(id);
            writeln!(w, "{},{},{},{},{}", i, j, pos[0], pos[1], field.get(id))?;
        }
    }
    w.flush()?;
    Ok(())
}
