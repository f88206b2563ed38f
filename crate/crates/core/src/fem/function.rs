use std::io::Write;
use std::sync::Arc;

use crate::fem::mesh::Mesh;
use crate::{Error, Result};

/// A continuous piecewise-linear function given by its nodal values.
/// Dirichlet nodes always hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FemFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl FemFunction {
    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let values = vec![0.0; mesh.num_nodes()];
        Self { mesh, values }
    }

    /// Scatters interior values onto all nodes.
    pub fn from_interior(mesh: Arc<Mesh>, interior: &[f64]) -> Result<Self> {
        if interior.len() != mesh.num_dofs() {
            return Err(Error::InvalidArgument(format!(
                "{} interior values for {} unknowns",
                interior.len(),
                mesh.num_dofs()
            )));
        }
        let mut values = vec![0.0; mesh.num_nodes()];
        for (&node, &v) in mesh.node_of_dof().iter().zip(interior) {
            values[node] = v;
        }
        Ok(Self { mesh, values })
    }

    /// Nodal interpolant of `f`, with boundary values forced to zero.
    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = mesh
            .nodes()
            .iter()
            .zip(mesh.boundary_mask())
            .map(|(p, &b)| if b { 0.0 } else { f(p) })
            .collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.mesh.node_of_dof().iter().map(|&n| self.values[n]).collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let (cell, w) = self.mesh.locate(x);
        cell.iter().zip(w).map(|(&v, wi)| wi * self.values[v]).sum()
    }

    /// Interpolates onto another mesh. Exact when `target` refines this mesh.
    pub fn transfer_to(&self, target: Arc<Mesh>) -> Self {
        Self::interpolate(target, |x| self.eval(x))
    }

    /// Writes `x,value` (1D) or `x,y,value` (2D) rows.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let dim = self.mesh.dim();
        writeln!(out, "{}", if dim == 1 { "x,value" } else { "x,y,value" })?;
        for (p, v) in self.mesh.nodes().iter().zip(&self.values) {
            match dim {
                1 => writeln!(out, "{},{}", p[0], v)?,
                _ => writeln!(out, "{},{},{}", p[0], p[1], v)?,
            }
        }
        Ok(())
    }

    /// Writes 2D values as whitespace-separated `x y value` blocks, one block
    /// per grid row, for gnuplot's `splot ... with pm3d`.
    pub fn write_grid(&self, mut out: impl Write) -> Result<()> {
        if self.mesh.dim() != 2 {
            return Err(Error::Unsupported("grid export needs a 2D mesh".into()));
        }
        let n = self.mesh.n_per_side();
        for iy in 0..=n {
            for ix in 0..=n {
                let node = iy * (n + 1) + ix;
                let p = self.mesh.nodes()[node];
                writeln!(out, "{} {} {}", p[0], p[1], self.values[node])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenbasis::Domain;
    use crate::fem::mesh::build_mesh;
    use approx::assert_relative_eq;

    fn mesh(dim: usize, n: usize) -> Arc<Mesh> {
        Arc::new(build_mesh(Domain::unit(dim).unwrap(), n).unwrap())
    }

    #[test]
    fn interior_roundtrip() {
        let m = mesh(2, 4);
        let vals: Vec<f64> = (0..m.num_dofs()).map(|i| i as f64).collect();
        let f = FemFunction::from_interior(m.clone(), &vals).unwrap();
        assert_eq!(f.interior_values(), vals);
        assert!(f.values().iter().zip(m.boundary_mask()).all(|(v, &b)| !b || *v == 0.0));
        assert!(FemFunction::from_interior(m, &[1.0]).is_err());
    }

    #[test]
    fn eval_reproduces_linear_functions() {
        let m = mesh(2, 5);
        let f = FemFunction {
            values: m.nodes().iter().map(|p| 2.0 * p[0] - 3.0 * p[1] + 0.5).collect(),
            mesh: m,
        };
        for x in [[0.13, 0.77], [0.5, 0.5], [0.91, 0.02]] {
            assert_relative_eq!(f.eval(&x), 2.0 * x[0] - 3.0 * x[1] + 0.5, epsilon = 1e-13);
        }
    }

    #[test]
    fn transfer_to_refinement_is_exact() {
        for dim in 1..=2 {
            let coarse = mesh(dim, 4);
            let fine = mesh(dim, 16);
            let f = FemFunction::interpolate(coarse, |x| x.iter().map(|c| (3.0 * c).sin()).product());
            let g = f.transfer_to(fine.clone());
            for p in fine.nodes() {
                assert_relative_eq!(g.eval(p), f.eval(p), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn csv_and_grid_exports() {
        let f = FemFunction::interpolate(mesh(2, 2), |x| x[0] + x[1]);
        let mut csv = Vec::new();
        f.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("x,y,value\n"));
        assert_eq!(text.lines().count(), 10);
        assert!(text.contains("0.5,0.5,1\n"));
        let mut grid = Vec::new();
        f.write_grid(&mut grid).unwrap();
        let text = String::from_utf8(grid).unwrap();
        assert_eq!(text.split("\n\n").filter(|b| !b.trim().is_empty()).count(), 3);

        let g = FemFunction::zeros(mesh(1, 2));
        assert!(g.write_grid(Vec::new()).is_err());
        let mut csv = Vec::new();
        g.write_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap(), "x,value\n0,0\n0.5,0\n1,0\n");
    }
}
