//! Inner products `(φ_m, χ_i)` between eigenmodes and P1 hat functions.
//!
//! In 1D these are integrals of sines against hats and are evaluated in closed
//! form. In 2D each triangle is integrated with a collapsed (Duffy) tensor
//! Gauss–Legendre rule whose size follows [`QuadraturePolicy`] for the mode's
//! phase variation across the element. The angle-addition formula splits
//! `sin(k·x)` into a per-cell phase and a per-shape local part, so the local
//! quadrature sums are computed once per triangle shape and reused on every
//! cell.

use rayon::prelude::*;

use crate::covariance::NoiseSample;
use crate::eigenbasis::{EigenBasis, EigenPair};
use crate::fem::mesh::Mesh;
use crate::quadrature::{GaussLegendre, QuadraturePolicy};
use crate::{Error, Result};

/// Dense `dofs × modes` matrix of `(φ_m, χ_i)`, stored by mode.
#[derive(Debug, Clone)]
pub struct ModeLoads {
    ndofs: usize,
    modes: usize,
    columns: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadRule {
    /// Closed form in 1D, quadrature in 2D.
    Exact,
    /// Element quadrature in every dimension.
    Quadrature,
}

impl ModeLoads {
    /// `(φ_m, χ_i)` for the leading `modes` eigenpairs.
    pub fn build(mesh: &Mesh, basis: &EigenBasis, modes: usize, policy: QuadraturePolicy) -> Result<Self> {
        Self::build_with(mesh, basis, modes, policy, LoadRule::Exact)
    }

    pub fn build_with(
        mesh: &Mesh,
        basis: &EigenBasis,
        modes: usize,
        policy: QuadraturePolicy,
        rule: LoadRule,
    ) -> Result<Self> {
        basis.require(modes)?;
        if basis.dim() != mesh.dim() {
            return Err(Error::InvalidArgument(format!(
                "basis is {}-dimensional, mesh is {}-dimensional",
                basis.dim(),
                mesh.dim()
            )));
        }
        let ndofs = mesh.num_dofs();
        let pairs = &basis.pairs()[..modes];
        let mut columns = vec![0.0; ndofs * modes];
        if ndofs == 0 {
            return Ok(Self { ndofs, modes, columns });
        }
        match (mesh.dim(), rule) {
            (1, LoadRule::Exact) => {
                columns
                    .par_chunks_mut(ndofs)
                    .zip(pairs)
                    .for_each(|(col, pair)| closed_form_1d(mesh, pair, col));
            }
            (1, LoadRule::Quadrature) => {
                let rules = RuleTable::new(mesh, pairs, policy)?;
                columns
                    .par_chunks_mut(ndofs)
                    .zip(pairs)
                    .for_each(|(col, pair)| quadrature_1d(mesh, pair, &rules, col));
            }
            _ => {
                let shapes = ShapeTable::new(mesh);
                let rules = RuleTable::new(mesh, pairs, policy)?;
                columns
                    .par_chunks_mut(ndofs)
                    .zip(pairs)
                    .for_each(|(col, pair)| quadrature_2d(mesh, &shapes, pair, &rules, col));
            }
        }
        Ok(Self { ndofs, modes, columns })
    }

    pub fn ndofs(&self) -> usize {
        self.ndofs
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// `(φ_m, χ_i)` over interior dofs `i`, for 0-based mode `m`.
    pub fn column(&self, m: usize) -> &[f64] {
        &self.columns[m * self.ndofs..(m + 1) * self.ndofs]
    }

    /// `b_i = Σ_m c_m (φ_m, χ_i)` for the leading `coeffs.len()` modes.
    pub fn load(&self, coeffs: &[f64]) -> Vec<f64> {
        assert!(coeffs.len() <= self.modes, "more coefficients than modes");
        let mut b = vec![0.0; self.ndofs];
        for (m, &c) in coeffs.iter().enumerate() {
            if c != 0.0 {
                b.iter_mut().zip(self.column(m)).for_each(|(bi, v)| *bi += c * v);
            }
        }
        b
    }

    /// `(Σ_i u_i χ_i, φ_m)` for every mode: the spectral coefficients of a P1 function.
    pub fn project(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.ndofs);
        self.columns
            .chunks_exact(self.ndofs.max(1))
            .take(self.modes)
            .map(|col| col.iter().zip(u).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `(Σ_m c_m φ_m, Σ_i u_i χ_i)`.
    pub fn inner(&self, coeffs: &[f64], u: &[f64]) -> f64 {
        assert!(coeffs.len() <= self.modes);
        coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(m, c)| c * self.column(m).iter().zip(u).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    }
}

/// Load vector `b_i = (P_N Ẇ^Q, χ_i)` for one noise sample.
pub fn assemble_noise_load(mesh: &Mesh, basis: &EigenBasis, w: &NoiseSample) -> Result<Vec<f64>> {
    let loads = ModeLoads::build(mesh, basis, w.n, QuadraturePolicy::default())?;
    Ok(loads.load(&w.coeffs))
}

/// `∫_0^H cos(kt)(1 - t/H) dt`.
fn hat_cos(k: f64, len: f64) -> f64 {
    let s = (0.5 * k * len).sin();
    2.0 * s * s / (k * k * len)
}

/// `∫_0^H sin(kt)(1 - t/H) dt = (z - sin z)/(k² H)` with `z = kH`.
fn hat_sin(k: f64, len: f64) -> f64 {
    let z = k * len;
    let z_minus_sin = if z < 0.5 {
        // Alternating series z³/3! - z⁵/5! + ...; eight terms reach round-off for z < 0.5.
        let z2 = z * z;
        let mut term = z * z2 / 6.0;
        let mut sum = 0.0;
        for n in 0..8 {
            sum += term;
            let k = 2 * n + 4;
            term *= -z2 / (k * (k + 1)) as f64;
        }
        sum
    } else {
        z - z.sin()
    };
    z_minus_sin / (k * k * len)
}

fn closed_form_1d(mesh: &Mesh, pair: &EigenPair, col: &mut [f64]) {
    let k = pair.frequencies[0];
    let nodes = mesh.nodes();
    for (dof, &node) in mesh.node_of_dof().iter().enumerate() {
        let x = nodes[node][0];
        let (hl, hr) = (x - nodes[node - 1][0], nodes[node + 1][0] - x);
        let (s, c) = (k * x).sin_cos();
        col[dof] = pair.amplitude
            * (s * (hat_cos(k, hl) + hat_cos(k, hr)) + c * (hat_sin(k, hr) - hat_sin(k, hl)));
    }
}

/// Gauss rules keyed by point count, built for every count the modes need.
struct RuleTable {
    rules: Vec<Option<GaussLegendre>>,
    points: Vec<usize>,
}

impl RuleTable {
    fn new(mesh: &Mesh, pairs: &[EigenPair], policy: QuadraturePolicy) -> Result<Self> {
        let reach = element_reach(mesh);
        let mut points = Vec::with_capacity(pairs.len());
        for pair in pairs {
            let span: f64 = pair.frequencies.iter().zip(reach).map(|(k, r)| k * r).sum();
            let n = policy.points_for(span).ok_or(Error::UnresolvableMode {
                mode: pair.index,
                required: policy.required_points(span),
                max: policy.max_points,
            })?;
            points.push(n);
        }
        let max = points.iter().copied().max().unwrap_or(0);
        let mut rules: Vec<Option<GaussLegendre>> = vec![None; max + 1];
        for &n in &points {
            if rules[n].is_none() {
                rules[n] = Some(GaussLegendre::new(n));
            }
        }
        Ok(Self { rules, points })
    }

    fn for_mode(&self, pair: &EigenPair) -> &GaussLegendre {
        let n = self.points[pair.index - 1];
        self.rules[n].as_ref().expect("rule built for every mode")
    }
}

/// Per-axis bound on `|d1| + |d2|` over element edge vectors, i.e. how far the
/// collapsed coordinates move along each axis.
fn element_reach(mesh: &Mesh) -> [f64; 2] {
    let nodes = mesh.nodes();
    let mut reach = [0.0f64; 2];
    for cell in mesh.cells() {
        for axis in 0..2 {
            let r: f64 = cell.windows(2).map(|w| (nodes[w[1]][axis] - nodes[w[0]][axis]).abs()).sum();
            reach[axis] = reach[axis].max(r);
        }
    }
    reach
}

fn quadrature_1d(mesh: &Mesh, pair: &EigenPair, rules: &RuleTable, col: &mut [f64]) {
    let rule = rules.for_mode(pair);
    let nodes = mesh.nodes();
    for cell in mesh.cells() {
        let (a, b) = (nodes[cell[0]][0], nodes[cell[1]][0]);
        let len = b - a;
        let (mut left, mut right) = (0.0, 0.0);
        for (&t, &w) in rule.nodes().iter().zip(rule.weights()) {
            let phi = pair.eval(&[a + t * len]);
            left += w * phi * (1.0 - t);
            right += w * phi * t;
        }
        if let Some(d) = mesh.dof_of_node(cell[0]) {
            col[d] += left * len;
        }
        if let Some(d) = mesh.dof_of_node(cell[1]) {
            col[d] += right * len;
        }
    }
}

/// Distinct triangle shapes `(p1 - p0, p2 - p1)` and the shape of each cell.
struct ShapeTable {
    shapes: Vec<([f64; 2], [f64; 2], f64)>,
    of_cell: Vec<usize>,
}

impl ShapeTable {
    fn new(mesh: &Mesh) -> Self {
        let nodes = mesh.nodes();
        let mut shapes: Vec<([f64; 2], [f64; 2], f64)> = Vec::new();
        let mut of_cell = Vec::with_capacity(mesh.num_cells());
        for cell in mesh.cells() {
            let (p0, p1, p2) = (nodes[cell[0]], nodes[cell[1]], nodes[cell[2]]);
            let d1 = [p1[0] - p0[0], p1[1] - p0[1]];
            let d2 = [p2[0] - p1[0], p2[1] - p1[1]];
            let same = |s: &([f64; 2], [f64; 2], f64)| {
                (0..2).all(|a| (s.0[a] - d1[a]).abs() <= 1e-12 * mesh.h() && (s.1[a] - d2[a]).abs() <= 1e-12 * mesh.h())
            };
            let id = match shapes.iter().position(same) {
                Some(id) => id,
                None => {
                    shapes.push((d1, d2, 2.0 * mesh.cell_measure(cell)));
                    shapes.len() - 1
                }
            };
            of_cell.push(id);
        }
        Self { shapes, of_cell }
    }
}

/// Collapsed-rule sums `Σ w a λ_v · {cos,sin}(θx) · {cos,sin}(θy)` for one shape,
/// ordered `[cc, cs, sc, ss]` per vertex.
fn local_moments(k: [f64; 2], d1: [f64; 2], d2: [f64; 2], rule: &GaussLegendre) -> [[f64; 4]; 3] {
    let mut mom = [[0.0; 4]; 3];
    for (&a, &wa) in rule.nodes().iter().zip(rule.weights()) {
        for (&b, &wb) in rule.nodes().iter().zip(rule.weights()) {
            let ab = a * b;
            let (sx, cx) = (k[0] * (a * d1[0] + ab * d2[0])).sin_cos();
            let (sy, cy) = (k[1] * (a * d1[1] + ab * d2[1])).sin_cos();
            let w = wa * wb * a;
            let lam = [1.0 - a, a - ab, ab];
            let trig = [cx * cy, cx * sy, sx * cy, sx * sy];
            for (v, l) in lam.iter().enumerate() {
                for (c, t) in trig.iter().enumerate() {
                    mom[v][c] += w * l * t;
                }
            }
        }
    }
    mom
}

fn quadrature_2d(mesh: &Mesh, shapes: &ShapeTable, pair: &EigenPair, rules: &RuleTable, col: &mut [f64]) {
    let rule = rules.for_mode(pair);
    let k = pair.frequencies;
    let moments: Vec<[[f64; 4]; 3]> = shapes
        .shapes
        .iter()
        .map(|(d1, d2, jac)| {
            let mut m = local_moments(k, *d1, *d2, rule);
            m.iter_mut().flatten().for_each(|v| *v *= jac * pair.amplitude);
            m
        })
        .collect();
    let nodes = mesh.nodes();
    for (cell, &shape) in mesh.cells().zip(&shapes.of_cell) {
        let p0 = nodes[cell[0]];
        let (sx, cx) = (k[0] * p0[0]).sin_cos();
        let (sy, cy) = (k[1] * p0[1]).sin_cos();
        let phase = [sx * sy, sx * cy, cx * sy, cx * cy];
        for (v, &node) in cell.iter().enumerate() {
            if let Some(d) = mesh.dof_of_node(node) {
                col[d] += moments[shape][v].iter().zip(&phase).map(|(m, p)| m * p).sum::<f64>();
            }
        }
    }
}
