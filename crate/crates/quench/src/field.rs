//! Node-valued scalar fields on a [`Grid`].

use crate::grid::Grid;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("value length {got} does not match grid node count {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("non-finite value {value} at node {node}")]
    NonFinite { node: usize, value: f64 },
    #[error("point {0:?} lies outside the grid extent")]
    OutsideGrid([f64; 2]),
}

/// Scalar samples at the grid nodes, stored row-major (x fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self { values: vec![0.0; grid.num_nodes()], grid }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 2]) -> f64) -> Self {
        let values = (0..grid.num_nodes()).map(|id| f(grid.node_pos(id))).collect();
        Self { grid, values }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.num_nodes() {
            return Err(FieldError::LengthMismatch { got: values.len(), want: grid.num_nodes() });
        }
        let field = Self { grid, values };
        field.check_finite()?;
        Ok(field)
    }

    pub fn check_finite(&self) -> Result<(), FieldError> {
        for (node, &value) in self.values.iter().enumerate() {
            if !value.is_finite() {
                return Err(FieldError::NonFinite { node, value });
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, id: usize) -> f64 {
        self.values[id]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.node_id(i, j)]
    }

    pub fn set(&mut self, id: usize, value: f64) {
        self.values[id] = value;
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Multilinear interpolation at an arbitrary point of the extent.
    /// Exact at nodes; errors outside the extent (1e-9 cell slack).
    pub fn interpolate(&self, point: [f64; 2]) -> Result<f64, FieldError> {
        let g = &self.grid;
        let mut frac = [0.0f64; 2];
        let mut base = [0usize; 2];
        for axis in 0..g.dim() {
            let (lo, hi) = g.extent(axis);
            let x = point[axis];
            if x < lo - 1e-9 * g.h() || x > hi + 1e-9 * g.h() {
                return Err(FieldError::OutsideGrid(point));
            }
            let t = ((x - lo) / g.h()).clamp(0.0, (g.nodes_along(axis) - 1) as f64);
            let i = (t.floor() as usize).min(g.nodes_along(axis) - 2);
            base[axis] = i;
            frac[axis] = t - i as f64;
        }
        if g.dim() == 1 {
            let (i, t) = (base[0], frac[0]);
            Ok(self.at(i, 0) * (1.0 - t) + self.at(i + 1, 0) * t)
        } else {
            let ((i, s), (j, t)) = ((base[0], frac[0]), (base[1], frac[1]));
            let v00 = self.at(i, j);
            let v10 = self.at(i + 1, j);
            let v01 = self.at(i, j + 1);
            let v11 = self.at(i + 1, j + 1);
            Ok(v00 * (1.0 - s) * (1.0 - t)
                + v10 * s * (1.0 - t)
                + v01 * (1.0 - s) * t
                + v11 * s * t)
        }
    }
}
