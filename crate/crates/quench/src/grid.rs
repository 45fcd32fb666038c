//! Uniform Cartesian grids in one and two dimensions.
//!
//! Nodes are stored row-major (x fastest). Cells are the axis-aligned boxes
//! spanned by adjacent nodes; in 1D a cell is an interval, in 2D a square.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("grid dimension must be 1 or 2, got {0}")]
    BadDim(usize),
    #[error("axis {axis} needs at least 3 nodes, got {nodes}")]
    TooFewNodes { axis: usize, nodes: usize },
    #[error("axis {axis} has empty or non-finite extent [{lo}, {hi}]")]
    BadExtent { axis: usize, lo: f64, hi: f64 },
    #[error("node spacing differs between axes: {hx} vs {hy}")]
    NonUniformSpacing { hx: f64, hy: f64 },
}

/// Uniform grid; spacing `h` is identical along every axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    nodes: [usize; 2],
    min: [f64; 2],
    h: f64,
}

impl Grid {
    /// 1D grid with `n` nodes on `[a, b]`.
    pub fn line(a: f64, b: f64, n: usize) -> Result<Self, GridError> {
        Self::build(1, [a, 0.0], [b, 0.0], [n, 1])
    }

    /// 2D grid with `nx * ny` nodes on `[ax, bx] x [ay, by]`. The extents and
    /// node counts must produce one uniform spacing.
    pub fn rect(
        (ax, bx): (f64, f64),
        (ay, by): (f64, f64),
        nx: usize,
        ny: usize,
    ) -> Result<Self, GridError> {
        Self::build(2, [ax, ay], [bx, by], [nx, ny])
    }

    fn build(dim: usize, min: [f64; 2], max: [f64; 2], nodes: [usize; 2]) -> Result<Self, GridError> {
        if dim != 1 && dim != 2 {
            return Err(GridError::BadDim(dim));
        }
        let mut h = [0.0f64; 2];
        for axis in 0..dim {
            if nodes[axis] < 3 {
                return Err(GridError::TooFewNodes { axis, nodes: nodes[axis] });
            }
            let (lo, hi) = (min[axis], max[axis]);
            if !lo.is_finite() || !hi.is_finite() || hi <= lo {
                return Err(GridError::BadExtent { axis, lo, hi });
            }
            h[axis] = (hi - lo) / (nodes[axis] - 1) as f64;
        }
        if dim == 2 {
            let rel = (h[0] - h[1]).abs() / h[0].max(h[1]);
            if rel > 1e-9 {
                return Err(GridError::NonUniformSpacing { hx: h[0], hy: h[1] });
            }
        }
        Ok(Self { dim, nodes, min, h: h[0] })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Node count along `axis` (1 for the unused axis of a 1D grid).
    pub fn nodes_along(&self, axis: usize) -> usize {
        self.nodes[axis]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes[0] * self.nodes[1]
    }

    pub fn num_cells(&self) -> usize {
        if self.dim == 1 {
            self.nodes[0] - 1
        } else {
            (self.nodes[0] - 1) * (self.nodes[1] - 1)
        }
    }

    pub fn extent(&self, axis: usize) -> (f64, f64) {
        let lo = self.min[axis];
        (lo, lo + self.h * (self.nodes[axis].saturating_sub(1)) as f64)
    }

    /// Length of the longest axis extent.
    pub fn max_extent(&self) -> f64 {
        (0..self.dim)
            .map(|a| {
                let (lo, hi) = self.extent(a);
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    /// Flat node id from per-axis indices; inverse of [`Self::node_multi`].
    pub fn node_id(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nodes[0] && j < self.nodes[1]);
        j * self.nodes[0] + i
    }

    pub fn node_multi(&self, id: usize) -> (usize, usize) {
        debug_assert!(id < self.num_nodes());
        (id % self.nodes[0], id / self.nodes[0])
    }

    pub fn node_pos(&self, id: usize) -> [f64; 2] {
        let (i, j) = self.node_multi(id);
        [
            self.min[0] + self.h * i as f64,
            self.min[1] + self.h * j as f64,
        ]
    }

    /// True when the node is at least `margin` cells away from every grid edge.
    pub fn is_interior(&self, id: usize, margin: usize) -> bool {
        let (i, j) = self.node_multi(id);
        let ok_x = i >= margin && i + margin < self.nodes[0];
        if self.dim == 1 {
            ok_x
        } else {
            ok_x && j >= margin && j + margin < self.nodes[1]
        }
    }

    /// Node ids on the grid boundary, in ascending id order.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&id| !self.is_interior(id, 1)).collect()
    }

    pub fn cell_multi(&self, cell: usize) -> (usize, usize) {
        if self.dim == 1 {
            (cell, 0)
        } else {
            (cell % (self.nodes[0] - 1), cell / (self.nodes[0] - 1))
        }
    }

    pub fn cell_id(&self, ci: usize, cj: usize) -> usize {
        if self.dim == 1 {
            ci
        } else {
            cj * (self.nodes[0] - 1) + ci
        }
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let (ci, cj) = self.cell_multi(cell);
        let mut c = [
            self.min[0] + self.h * (ci as f64 + 0.5),
            self.min[1] + self.h * (cj as f64 + 0.5),
        ];
        if self.dim == 1 {
            c[1] = 0.0;
        }
        c
    }

    /// Corner node ids of a cell (2 in 1D, 4 in 2D).
    pub fn cell_corners(&self, cell: usize) -> CornerIds {
        let (ci, cj) = self.cell_multi(cell);
        if self.dim == 1 {
            CornerIds { ids: [self.node_id(ci, 0), self.node_id(ci + 1, 0), 0, 0], len: 2 }
        } else {
            CornerIds {
                ids: [
                    self.node_id(ci, cj),
                    self.node_id(ci + 1, cj),
                    self.node_id(ci, cj + 1),
                    self.node_id(ci + 1, cj + 1),
                ],
                len: 4,
            }
        }
    }

    pub fn dist(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        if self.dim == 1 {
            (a[0] - b[0]).abs()
        } else {
            (a[0] - b[0]).hypot(a[1] - b[1])
        }
    }

    /// Node ids whose position lies in the closed ball.
    pub fn nodes_in_ball(&self, ball: &Ball) -> Vec<usize> {
        let mut out = Vec::new();
        let (ilo, ihi) = self.axis_range(0, ball);
        let (jlo, jhi) = if self.dim == 2 { self.axis_range(1, ball) } else { (0, 0) };
        for j in jlo..=jhi {
            for i in ilo..=ihi {
                let id = self.node_id(i, j);
                if self.dist(self.node_pos(id), ball.center) <= ball.radius {
                    out.push(id);
                }
            }
        }
        out
    }

    /// Index range along an axis covering the ball's bounding box.
    fn axis_range(&self, axis: usize, ball: &Ball) -> (usize, usize) {
        let lo = (ball.center[axis] - ball.radius - self.min[axis]) / self.h;
        let hi = (ball.center[axis] + ball.radius - self.min[axis]) / self.h;
        let lo = lo.floor().max(0.0) as usize;
        let hi = (hi.ceil() as isize).clamp(0, self.nodes[axis] as isize - 1) as usize;
        (lo.min(self.nodes[axis] - 1), hi)
    }
}

/// Corner node ids of a cell: two in 1D, four in 2D. Derefs to a slice so
/// callers can iterate without an allocation.
#[derive(Debug, Clone, Copy)]
pub struct CornerIds {
    ids: [usize; 4],
    len: usize,
}

impl std::ops::Deref for CornerIds {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.ids[..self.len]
    }
}

/// Closed metric ball used to localize estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Ball {
    pub fn new(center: [f64; 2], radius: f64) -> Self {
        Self { center, radius }
    }

    pub fn contains(&self, grid: &Grid, point: [f64; 2]) -> bool {
        grid.dist(point, self.center) <= self.radius
    }

    /// Ball lies inside the grid extent (inclusive), as required whenever it
    /// is used for interior estimates.
    pub fn inside_grid(&self, grid: &Grid) -> bool {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return false;
        }
        for axis in 0..grid.dim() {
            let (lo, hi) = grid.extent(axis);
            if self.center[axis] - self.radius < lo - 1e-12
                || self.center[axis] + self.radius > hi + 1e-12
            {
                return false;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_grid_has_uniform_spacing() {
        let g = Grid::line(0.0, 1.0, 5).unwrap();
        assert_eq!(g.dim(), 1);
        assert_eq!(g.num_nodes(), 5);
        assert!((g.h() - 0.25).abs() < 1e-15);
        assert_eq!(g.extent(0), (0.0, 1.0));
    }

    #[test]
    fn rect_grid_rejects_nonuniform_spacing() {
        let err = Grid::rect((0.0, 2.0), (0.0, 1.0), 5, 5).unwrap_err();
        assert!(matches!(err, GridError::NonUniformSpacing { .. }));
        // Matching counts keep it uniform.
        let g = Grid::rect((0.0, 2.0), (0.0, 1.0), 9, 5).unwrap();
        assert!((g.h() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(matches!(
            Grid::line(0.0, 1.0, 2),
            Err(GridError::TooFewNodes { .. })
        ));
        assert!(matches!(
            Grid::line(1.0, 1.0, 5),
            Err(GridError::BadExtent { .. })
        ));
    }

    #[test]
    fn boundary_nodes_of_small_rect() {
        let g = Grid::rect((0.0, 1.0), (0.0, 1.0), 3, 3).unwrap();
        assert_eq!(g.boundary_nodes(), vec![0, 1, 2, 3, 5, 6, 7, 8]);
        assert!(g.is_interior(4, 1));
    }

    #[test]
    fn nodes_in_ball_1d_is_symmetric_interval() {
        let g = Grid::line(-1.0, 1.0, 9).unwrap();
        let ids = g.nodes_in_ball(&Ball::new([0.0, 0.0], 0.5));
        let xs: Vec<f64> = ids.iter().map(|&i| g.node_pos(i)[0]).collect();
        assert_eq!(xs, vec![-0.5, -0.25, 0.0, 0.25, 0.5]);
    }

    #[test]
    fn ball_inside_grid_checks_every_axis() {
        let g = Grid::rect((0.0, 1.0), (0.0, 1.0), 5, 5).unwrap();
        assert!(Ball::new([0.5, 0.5], 0.5).inside_grid(&g));
        assert!(!Ball::new([0.5, 0.5], 0.51).inside_grid(&g));
        assert!(!Ball::new([0.1, 0.5], 0.2).inside_grid(&g));
    }
}

#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        // node_id and node_multi are mutually inverse on the whole grid.
        #[test]
        fn node_indexing_roundtrips(nx in 3usize..40, ny in 3usize..40, id_seed in 0usize..10_000) {
            let h = 0.125;
            let g = Grid::rect(
                (0.0, h * (nx - 1) as f64),
                (0.0, h * (ny - 1) as f64),
                nx,
                ny,
            ).unwrap();
            let id = id_seed % g.num_nodes();
            let (i, j) = g.node_multi(id);
            prop_assert_eq!(g.node_id(i, j), id);
            let pos = g.node_pos(id);
            prop_assert!((pos[0] - h * i as f64).abs() < 1e-12);
            prop_assert!((pos[1] - h * j as f64).abs() < 1e-12);
        }
    }
}
