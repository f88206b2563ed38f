use std::slice::ChunksExact;

use crate::eigenbasis::Domain;
use crate::{Error, Result};

/// Structured P1 mesh: uniform segments in 1D, an `n × n` grid split into
/// right triangles along the `(0,0) → (1,1)` diagonal in 2D.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    domain: Domain,
    n_per_side: usize,
    nodes: Vec<[f64; 2]>,
    cells: Vec<usize>,
    boundary: Vec<bool>,
    h: f64,
    dof_of_node: Vec<Option<usize>>,
    node_of_dof: Vec<usize>,
}

/// Builds the structured mesh with `n_per_side` cells along each axis.
pub fn build_mesh(domain: Domain, n_per_side: usize) -> Result<Mesh> {
    if n_per_side < 2 {
        return Err(Error::InvalidArgument(format!(
            "mesh needs at least 2 cells per side, got {n_per_side}"
        )));
    }
    let n = n_per_side;
    let ext = domain.extent();
    let (nodes, cells, boundary, h) = match domain.dim() {
        1 => {
            let hx = ext[0] / n as f64;
            let nodes = (0..=n).map(|i| [i as f64 * hx, 0.0]).collect();
            let cells = (0..n).flat_map(|i| [i, i + 1]).collect();
            let boundary = (0..=n).map(|i| i == 0 || i == n).collect();
            (nodes, cells, boundary, hx)
        }
        _ => {
            let (hx, hy) = (ext[0] / n as f64, ext[1] / n as f64);
            let id = |ix: usize, iy: usize| iy * (n + 1) + ix;
            let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
            let mut boundary = Vec::with_capacity((n + 1) * (n + 1));
            for iy in 0..=n {
                for ix in 0..=n {
                    nodes.push([ix as f64 * hx, iy as f64 * hy]);
                    boundary.push(ix == 0 || iy == 0 || ix == n || iy == n);
                }
            }
            let mut cells = Vec::with_capacity(6 * n * n);
            for iy in 0..n {
                for ix in 0..n {
                    let (v00, v10, v11, v01) = (id(ix, iy), id(ix + 1, iy), id(ix + 1, iy + 1), id(ix, iy + 1));
                    cells.extend([v00, v10, v11]);
                    cells.extend([v00, v11, v01]);
                }
            }
            (nodes, cells, boundary, hx.hypot(hy))
        }
    };
    let mut dof_of_node = Vec::with_capacity(boundary.len());
    let mut node_of_dof = Vec::new();
    for (node, &b) in boundary.iter().enumerate() {
        if b {
            dof_of_node.push(None);
        } else {
            dof_of_node.push(Some(node_of_dof.len()));
            node_of_dof.push(node);
        }
    }
    Ok(Mesh {
        domain,
        n_per_side,
        nodes,
        cells,
        boundary,
        h,
        dof_of_node,
        node_of_dof,
    })
}

impl Mesh {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn n_per_side(&self) -> usize {
        self.n_per_side
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn vertices_per_cell(&self) -> usize {
        self.dim() + 1
    }

    pub fn cells(&self) -> ChunksExact<'_, usize> {
        self.cells.chunks_exact(self.vertices_per_cell())
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / self.vertices_per_cell()
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    /// Largest element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_dofs(&self) -> usize {
        self.node_of_dof.len()
    }

    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        self.dof_of_node[node]
    }

    pub fn node_of_dof(&self) -> &[usize] {
        &self.node_of_dof
    }

    /// Signed measure of a cell (length or area).
    pub fn cell_measure(&self, cell: &[usize]) -> f64 {
        let p = |i: usize| self.nodes[cell[i]];
        match cell.len() {
            2 => p(1)[0] - p(0)[0],
            _ => {
                let (a, b, c) = (p(0), p(1), p(2));
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
            }
        }
    }

    /// Diameter (longest edge) of each cell.
    pub fn cell_diameters(&self) -> Vec<f64> {
        self.cells()
            .map(|cell| {
                let mut d: f64 = 0.0;
                for (i, &a) in cell.iter().enumerate() {
                    for &b in &cell[i + 1..] {
                        let (pa, pb) = (self.nodes[a], self.nodes[b]);
                        d = d.max((pa[0] - pb[0]).hypot(pa[1] - pb[1]));
                    }
                }
                d
            })
            .collect()
    }

    /// Locates `x` and returns the cell's vertices with their barycentric weights.
    pub fn locate(&self, x: &[f64]) -> (&[usize], [f64; 3]) {
        let n = self.n_per_side;
        let ext = self.domain.extent();
        let grid = |axis: usize| {
            let s = (x[axis] / ext[axis] * n as f64).clamp(0.0, n as f64);
            let i = (s.floor() as usize).min(n - 1);
            (i, s - i as f64)
        };
        let vpc = self.vertices_per_cell();
        match self.dim() {
            1 => {
                let (i, s) = grid(0);
                (&self.cells[vpc * i..vpc * (i + 1)], [1.0 - s, s, 0.0])
            }
            _ => {
                let ((ix, sx), (iy, sy)) = (grid(0), grid(1));
                let square = iy * n + ix;
                if sy <= sx {
                    let c = 2 * square;
                    (&self.cells[vpc * c..vpc * (c + 1)], [1.0 - sx, sx - sy, sy])
                } else {
                    let c = 2 * square + 1;
                    (&self.cells[vpc * c..vpc * (c + 1)], [1.0 - sy, sx, sy - sx])
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn interval_with_four_cells() {
        let m = build_mesh(Domain::unit(1).unwrap(), 4).unwrap();
        let xs: Vec<f64> = m.nodes().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(m.boundary_mask(), &[true, false, false, false, true]);
        assert_eq!(m.num_dofs(), 3);
        assert_eq!(m.h(), 0.25);
    }

    #[test]
    fn square_two_by_two() {
        let m = build_mesh(Domain::unit(2).unwrap(), 2).unwrap();
        assert_eq!(m.num_nodes(), 9);
        assert_eq!(m.num_cells(), 8);
        assert_eq!(m.boundary_mask().iter().filter(|&&b| b).count(), 8);
        assert_eq!(m.node_of_dof(), &[4]);
        assert_relative_eq!(m.h(), 2f64.sqrt() / 2.0);
    }

    #[test]
    fn fine_interval_spacing() {
        let m = build_mesh(Domain::unit(1).unwrap(), 1024).unwrap();
        assert_eq!(m.h(), 1.0 / 1024.0);
    }

    #[test]
    fn rejects_coarse() {
        assert!(build_mesh(Domain::unit(1).unwrap(), 1).is_err());
        assert!(build_mesh(Domain::unit(2).unwrap(), 0).is_err());
    }

    #[test]
    fn cells_cover_domain_positively() {
        for dim in 1..=2 {
            let m = build_mesh(Domain::new(dim, &[1.5, 0.5][..dim]).unwrap(), 7).unwrap();
            let total: f64 = m.cells().map(|c| m.cell_measure(c)).sum();
            assert_relative_eq!(total, m.domain().measure(), max_relative = 1e-13);
            assert!(m.cells().all(|c| m.cell_measure(c) > 0.0));
            let d = m.cell_diameters();
            let (lo, hi) = d.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
            assert!(hi / lo <= 2.0);
            assert_relative_eq!(hi, m.h(), max_relative = 1e-14);
        }
    }

    #[test]
    fn boundary_nodes_are_on_the_boundary() {
        let m = build_mesh(Domain::unit(2).unwrap(), 5).unwrap();
        for (p, &b) in m.nodes().iter().zip(m.boundary_mask()) {
            let on = p.iter().any(|&c| c.abs() < 1e-14 || (c - 1.0).abs() < 1e-14);
            assert_eq!(on, b);
        }
    }

    #[test]
    fn locate_reproduces_coordinates() {
        let m = build_mesh(Domain::unit(2).unwrap(), 6).unwrap();
        for x in [[0.1, 0.7], [0.5, 0.5], [0.99, 0.01], [0.0, 1.0], [0.33, 0.34]] {
            let (cell, w) = m.locate(&x);
            let mut back = [0.0; 2];
            for (v, wi) in cell.iter().zip(w) {
                assert!(wi >= -1e-12);
                back[0] += wi * m.nodes()[*v][0];
                back[1] += wi * m.nodes()[*v][1];
            }
            assert_relative_eq!(back[0], x[0], epsilon = 1e-13);
            assert_relative_eq!(back[1], x[1], epsilon = 1e-13);
        }
    }
}
