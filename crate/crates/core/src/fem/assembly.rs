use std::sync::Arc;

use crate::fem::mesh::Mesh;
use crate::linalg::CsrMatrix;
use crate::{Error, Result};

/// Stiffness, mass and noise load on the interior (non-Dirichlet) nodes.
#[derive(Debug, Clone)]
pub struct FemSystem {
    pub mesh: Arc<Mesh>,
    /// `S_ij = (∇χ_i, ∇χ_j)`.
    pub stiffness: CsrMatrix,
    /// `M_ij = (χ_i, χ_j)`.
    pub mass: CsrMatrix,
    /// `b_i = (P_N Ẇ^Q, χ_i)`; zero until a noise load is attached.
    pub noise_load: Vec<f64>,
}

impl FemSystem {
    pub fn num_dofs(&self) -> usize {
        self.mesh.num_dofs()
    }

    pub fn with_noise_load(mut self, load: Vec<f64>) -> Result<Self> {
        self.set_noise_load(load)?;
        Ok(self)
    }

    pub fn set_noise_load(&mut self, load: Vec<f64>) -> Result<()> {
        if load.len() != self.num_dofs() {
            return Err(Error::InvalidArgument(format!(
                "noise load has {} entries, system has {} unknowns",
                load.len(),
                self.num_dofs()
            )));
        }
        self.noise_load = load;
        Ok(())
    }

    /// Discrete L² norm `sqrt(uᵀ M u)` of interior values.
    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        self.mass.quadratic_form(u).max(0.0).sqrt()
    }
}

type ElementMatrix = [[f64; 3]; 3];

/// Element stiffness and mass for a segment or triangle.
fn element_matrices(mesh: &Mesh, index: usize, cell: &[usize]) -> Result<(ElementMatrix, ElementMatrix)> {
    let measure = mesh.cell_measure(cell);
    let scale = mesh.h().powi(mesh.dim() as i32);
    if !(measure > 1e-12 * scale) {
        return Err(Error::DegenerateElement(index));
    }
    let mut k = [[0.0; 3]; 3];
    let mut m = [[0.0; 3]; 3];
    match cell.len() {
        2 => {
            let len = measure;
            k[0][0] = 1.0 / len;
            k[1][1] = 1.0 / len;
            k[0][1] = -1.0 / len;
            k[1][0] = -1.0 / len;
            m[0][0] = len / 3.0;
            m[1][1] = len / 3.0;
            m[0][1] = len / 6.0;
            m[1][0] = len / 6.0;
        }
        _ => {
            let p: Vec<[f64; 2]> = cell.iter().map(|&v| mesh.nodes()[v]).collect();
            let area = measure;
            // ∇λ_i = perp(p_{i+2} - p_{i+1}) / (2 area)
            let grads: Vec<[f64; 2]> = (0..3)
                .map(|i| {
                    let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                    [(a[1] - b[1]) / (2.0 * area), (b[0] - a[0]) / (2.0 * area)]
                })
                .collect();
            for i in 0..3 {
                for j in 0..3 {
                    k[i][j] = area * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                    m[i][j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                }
            }
        }
    }
    Ok((k, m))
}

/// Stiffness and mass over all nodes, before Dirichlet elimination.
pub fn assemble_full(mesh: &Mesh) -> Result<(CsrMatrix, CsrMatrix)> {
    let n = mesh.num_nodes();
    let (mut kt, mut mt) = (Vec::new(), Vec::new());
    for (index, cell) in mesh.cells().enumerate() {
        let (k, m) = element_matrices(mesh, index, cell)?;
        for (a, &va) in cell.iter().enumerate() {
            for (b, &vb) in cell.iter().enumerate() {
                kt.push((va, vb, k[a][b]));
                mt.push((va, vb, m[a][b]));
            }
        }
    }
    Ok((CsrMatrix::from_triplets(n, n, kt), CsrMatrix::from_triplets(n, n, mt)))
}

/// Assembles stiffness and mass on the interior nodes; the noise load starts at zero.
pub fn assemble(mesh: Arc<Mesh>) -> Result<FemSystem> {
    let n = mesh.num_dofs();
    let (mut kt, mut mt) = (Vec::new(), Vec::new());
    for (index, cell) in mesh.cells().enumerate() {
        let (k, m) = element_matrices(&mesh, index, cell)?;
        for (a, &va) in cell.iter().enumerate() {
            let Some(da) = mesh.dof_of_node(va) else { continue };
            for (b, &vb) in cell.iter().enumerate() {
                let Some(db) = mesh.dof_of_node(vb) else { continue };
                kt.push((da, db, k[a][b]));
                mt.push((da, db, m[a][b]));
            }
        }
    }
    Ok(FemSystem {
        stiffness: CsrMatrix::from_triplets(n, n, kt),
        mass: CsrMatrix::from_triplets(n, n, mt),
        noise_load: vec![0.0; n],
        mesh,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigenbasis::Domain;
    use crate::fem::mesh::build_mesh;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn system(dim: usize, n: usize) -> FemSystem {
        assemble(Arc::new(build_mesh(Domain::unit(dim).unwrap(), n).unwrap())).unwrap()
    }

    /// Dense Cholesky; `None` if a pivot is not positive.
    fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
        let n = a.len();
        let mut l = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
                if i == j {
                    let d = a[i][i] - s;
                    if d <= 0.0 {
                        return None;
                    }
                    l[i][i] = d.sqrt();
                } else {
                    l[i][j] = (a[i][j] - s) / l[j][j];
                }
            }
        }
        Some(l)
    }

    #[test]
    fn interval_stencils() {
        let s = system(1, 8);
        let h = 1.0 / 8.0;
        for i in 1..6 {
            assert_relative_eq!(s.stiffness.get(i, i - 1), -1.0 / h, max_relative = 1e-14);
            assert_relative_eq!(s.stiffness.get(i, i), 2.0 / h, max_relative = 1e-14);
            assert_relative_eq!(s.stiffness.get(i, i + 1), -1.0 / h, max_relative = 1e-14);
            assert_relative_eq!(s.mass.get(i, i - 1), h / 6.0, max_relative = 1e-14);
            assert_relative_eq!(s.mass.get(i, i), 2.0 * h / 3.0, max_relative = 1e-14);
            assert_relative_eq!(s.mass.get(i, i + 1), h / 6.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn single_interior_node_on_square() {
        // Six triangles of area 1/8 touch the centre. It is the right-angle
        // vertex of two of them (|∇λ|² area = 1 each) and an acute vertex of
        // the other four (1/2 each): total 4.
        let s = system(2, 2);
        assert_eq!(s.num_dofs(), 1);
        assert_relative_eq!(s.stiffness.get(0, 0), 4.0, max_relative = 1e-14);
        // Mass: six times area/6.
        assert_relative_eq!(s.mass.get(0, 0), 0.125, max_relative = 1e-14);
    }

    #[test]
    fn square_stiffness_is_five_point() {
        // The diagonal couplings of the triangulation cancel to zero.
        let s = system(2, 5);
        let side = 4;
        for i in 0..s.num_dofs() {
            let (cols, vals) = s.stiffness.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let dist = (i % side).abs_diff(j % side) + (i / side).abs_diff(j / side);
                let expect = match dist {
                    0 => 4.0,
                    1 => -1.0,
                    _ => 0.0,
                };
                assert_relative_eq!(v, expect, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn full_stiffness_rows_sum_to_zero() {
        for dim in 1..=2 {
            let mesh = build_mesh(Domain::new(dim, &[1.3, 0.7][..dim]).unwrap(), 6).unwrap();
            let (k, m) = assemble_full(&mesh).unwrap();
            assert!(k.row_sums().iter().all(|r| r.abs() < 1e-12));
            let total_mass: f64 = m.row_sums().iter().sum();
            assert_relative_eq!(total_mass, mesh.domain().measure(), max_relative = 1e-13);
        }
    }

    #[test]
    fn symmetric_and_positive_definite() {
        for dim in 1..=2 {
            let s = system(dim, 6);
            assert!(s.stiffness.asymmetry() < 1e-14);
            assert!(s.mass.asymmetry() < 1e-14);
            assert!(cholesky(&s.stiffness.to_dense()).is_some());
            assert!(cholesky(&s.mass.to_dense()).is_some());
        }
    }

    #[test]
    fn noise_load_length_checked() {
        let s = system(1, 4);
        assert!(s.clone().with_noise_load(vec![1.0; 2]).is_err());
        assert_eq!(s.with_noise_load(vec![1.0; 3]).unwrap().noise_load, vec![1.0; 3]);
    }

    proptest! {
        #[test]
        fn stiffness_energy_positive(x in prop::collection::vec(-1.0f64..1.0, 49), dim in 1usize..=2) {
            let s = system(dim, 8);
            let x = &x[..s.num_dofs()];
            prop_assume!(x.iter().any(|v| v.abs() > 1e-6));
            prop_assert!(s.stiffness.quadratic_form(x) > 0.0);
        }
    }
}
