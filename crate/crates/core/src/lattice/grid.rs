use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform box lattice on `[-L, L]^d` with hard-wall boundaries.
///
/// Boundary nodes carry no degrees of freedom: wave functions live on the
/// `(points - 2)^d` interior nodes and every operator treats the boundary
/// values as zero. Interior nodes are enumerated row-major with the last axis
/// fastest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    points: usize,
    half_width: f64,
    spacing: f64,
}

impl Grid {
    pub fn new(dim: usize, points_per_axis: usize, box_half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if points_per_axis < 4 {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 points per axis, got {points_per_axis}"
            )));
        }
        if !(box_half_width > 0.0 && box_half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "box half width must be positive, got {box_half_width}"
            )));
        }
        Ok(Grid {
            dim,
            points: points_per_axis,
            half_width: box_half_width,
            spacing: 2.0 * box_half_width / (points_per_axis - 1) as f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn box_half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Cell volume h^d, the quadrature weight of one node.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// All nodes including the boundary.
    pub fn node_count(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn interior_per_axis(&self) -> usize {
        self.points - 2
    }

    /// Number of interior nodes, i.e. the one-body Hilbert space dimension.
    pub fn dof(&self) -> usize {
        self.interior_per_axis().pow(self.dim as u32)
    }

    /// Coordinate of node `i` (0..points) along any axis; the end nodes are `-L` and `L` exactly.
    pub fn axis_coord(&self, i: usize) -> f64 {
        assert!(i < self.points);
        if i == 0 {
            -self.half_width
        } else if i == self.points - 1 {
            self.half_width
        } else {
            -self.half_width + i as f64 * self.spacing
        }
    }

    /// Node coordinates along one axis, boundary included.
    pub fn axis_nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.axis_coord(i)).collect()
    }

    /// Interior multi-index (each entry in 0..points-2) of a degree of freedom.
    pub fn dof_multi_index(&self, mut k: usize) -> [usize; 3] {
        let m = self.interior_per_axis();
        let mut idx = [0usize; 3];
        for a in (0..self.dim).rev() {
            idx[a] = k % m;
            k /= m;
        }
        idx
    }

    pub fn dof_index(&self, idx: &[usize; 3]) -> usize {
        let m = self.interior_per_axis();
        (0..self.dim).fold(0, |acc, a| acc * m + idx[a])
    }

    /// Row-major stride of axis `a` in the interior enumeration.
    pub fn dof_stride(&self, axis: usize) -> usize {
        self.interior_per_axis().pow((self.dim - 1 - axis) as u32)
    }

    /// Physical position of a degree of freedom; unused axes are zero.
    pub fn dof_position(&self, k: usize) -> [f64; 3] {
        let idx = self.dof_multi_index(k);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.axis_coord(idx[a] + 1);
        }
        x
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        (0..self.dof()).map(|k| self.dof_position(k)).collect()
    }

    /// The same box with the spacing halved.
    pub fn refined(&self) -> Grid {
        Grid::new(self.dim, 2 * self.points - 1, self.half_width).expect("refinement of a valid grid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_unit_spacing() {
        let g = Grid::new(1, 5, 2.0).unwrap();
        assert_eq!(g.spacing(), 1.0);
        assert_eq!(g.axis_nodes(), vec![-2.0, -1.0, 0.0, 1.0, 2.0]);
        assert_eq!(g.dof(), 3);
    }

    #[test]
    fn two_dimensional_counts() {
        let g = Grid::new(2, 16, 8.0).unwrap();
        assert_eq!(g.node_count(), 256);
        assert_eq!(g.spacing(), 16.0 / 15.0);
    }

    #[test]
    fn three_dimensional_boundary_exact() {
        let g = Grid::new(3, 8, 4.0).unwrap();
        assert_eq!(g.node_count(), 512);
        assert_eq!(g.axis_coord(0), -4.0);
        assert_eq!(g.axis_coord(7), 4.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Grid::new(0, 8, 1.0).is_err());
        assert!(Grid::new(4, 8, 1.0).is_err());
        assert!(Grid::new(1, 3, 1.0).is_err());
        assert!(Grid::new(1, 8, 0.0).is_err());
        assert!(Grid::new(1, 8, -1.0).is_err());
    }

    #[test]
    fn multi_index_roundtrip() {
        let g = Grid::new(3, 6, 1.0).unwrap();
        for k in 0..g.dof() {
            assert_eq!(g.dof_index(&g.dof_multi_index(k)), k);
        }
        assert_eq!(g.dof_stride(2), 1);
        assert_eq!(g.dof_stride(0), 16);
    }

    #[test]
    fn refinement_halves_spacing() {
        let g = Grid::new(2, 9, 4.0).unwrap();
        assert!((g.refined().spacing() - g.spacing() / 2.0).abs() < 1e-15);
    }
}
