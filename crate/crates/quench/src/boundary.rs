//! Dirichlet boundary data on the grid boundary and its linear interpolant.

use crate::field::ScalarField;
use crate::grid::Grid;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BoundaryError {
    #[error("boundary table length {got} does not match boundary node count {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("non-finite boundary value {value} at boundary node {node}")]
    NonFinite { node: usize, value: f64 },
}

/// Values prescribed on the grid boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    grid: Grid,
    // full-length storage; only boundary entries are meaningful
    full: Vec<f64>,
}

impl BoundaryData {
    pub fn from_fn(grid: &Grid, mut f: impl FnMut([f64; 2]) -> f64) -> Self {
        let mut full = vec![0.0; grid.num_nodes()];
        for id in grid.boundary_nodes() {
            full[id] = f(grid.node_pos(id));
        }
        Self { grid: *grid, full }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self::from_fn(grid, |_| c)
    }

    /// Values listed in ascending boundary-node-id order (the order of
    /// [`Grid::boundary_nodes`]).
    pub fn from_table(grid: &Grid, table: &[f64]) -> Result<Self, BoundaryError> {
        let ids = grid.boundary_nodes();
        if table.len() != ids.len() {
            return Err(BoundaryError::LengthMismatch { got: table.len(), want: ids.len() });
        }
        let mut full = vec![0.0; grid.num_nodes()];
        for (&id, &v) in ids.iter().zip(table) {
            if !v.is_finite() {
                return Err(BoundaryError::NonFinite { node: id, value: v });
            }
            full[id] = v;
        }
        Ok(Self { grid: *grid, full })
    }

    /// Restriction of an existing field to its grid boundary.
    pub fn trace(field: &ScalarField) -> Self {
        let grid = *field.grid();
        let mut full = vec![0.0; grid.num_nodes()];
        for id in grid.boundary_nodes() {
            full[id] = field.get(id);
        }
        Self { grid, full }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn value_at(&self, node: usize) -> f64 {
        self.full[node]
    }

    pub fn table(&self) -> Vec<f64> {
        self.grid.boundary_nodes().iter().map(|&id| self.full[id]).collect()
    }

    pub fn sup(&self) -> f64 {
        self.table().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.table().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.table().into_iter().all(|v| v >= 0.0)
    }

    /// Overwrites the boundary nodes of `field` with these values.
    pub fn apply(&self, field: &mut ScalarField) {
        for id in self.grid.boundary_nodes() {
            field.set(id, self.full[id]);
        }
    }

    /// Scales every boundary value by `t`.
    pub fn scaled(&self, t: f64) -> Self {
        Self { grid: self.grid, full: self.full.iter().map(|&v| t * v).collect() }
    }
}

/// Linear interpolant of the boundary data: the segment between the two
/// endpoint values in 1D, the transfinite (Coons) blend of the four edges in
/// 2D. Reproduces the boundary values exactly.
pub fn linear_interpolant(grid: &Grid, b: &BoundaryData) -> ScalarField {
    let (nx, ny) = (grid.nodes_along(0), grid.nodes_along(1));
    if grid.dim() == 1 {
        let left = b.value_at(grid.node_id(0, 0));
        let right = b.value_at(grid.node_id(nx - 1, 0));
        let mut f = ScalarField::zeros(*grid);
        for i in 0..nx {
            let t = i as f64 / (nx - 1) as f64;
            f.set(grid.node_id(i, 0), left * (1.0 - t) + right * t);
        }
        return f;
    }
    let at = |i: usize, j: usize| b.value_at(grid.node_id(i, j));
    let (c00, c10, c01, c11) = (at(0, 0), at(nx - 1, 0), at(0, ny - 1), at(nx - 1, ny - 1));
    let mut f = ScalarField::zeros(*grid);
    for j in 0..ny {
        let eta = j as f64 / (ny - 1) as f64;
        for i in 0..nx {
            let xi = i as f64 / (nx - 1) as f64;
            let blend = (1.0 - xi) * at(0, j)
                + xi * at(nx - 1, j)
                + (1.0 - eta) * at(i, 0)
                + eta * at(i, ny - 1)
                - ((1.0 - xi) * (1.0 - eta) * c00
                    + xi * (1.0 - eta) * c10
                    + (1.0 - xi) * eta * c01
                    + xi * eta * c11);
            f.set(grid.node_id(i, j), blend);
        }
    }
    f
}
