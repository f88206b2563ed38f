//! Ritz projection and L² distances between P1 functions and spectral expansions.

use crate::eigenbasis::EigenBasis;
use crate::fem::assembly::FemSystem;
use crate::fem::function::FemFunction;
use crate::fem::load::ModeLoads;
use crate::linalg::{CsrMatrix, ConjugateGradient};
use crate::quadrature::QuadraturePolicy;
use crate::{Error, Result};

/// `R_h w` for `w = Σ_m w_m φ_m`: solves `S c = g` with
/// `g_i = (∇w, ∇χ_i) = Σ_m λ_m w_m (φ_m, χ_i)`.
pub fn ritz_project(system: &FemSystem, basis: &EigenBasis, w: &[f64]) -> Result<FemFunction> {
    let loads = ModeLoads::build(&system.mesh, basis, w.len(), QuadraturePolicy::default())?;
    ritz_project_with(system, basis, &loads, w)
}

pub fn ritz_project_with(
    system: &FemSystem,
    basis: &EigenBasis,
    loads: &ModeLoads,
    w: &[f64],
) -> Result<FemFunction> {
    let scaled: Vec<f64> = w.iter().zip(basis.lambdas()).map(|(c, l)| c * l).collect();
    ritz_project_rhs(system, &loads.load(&scaled), &ConjugateGradient::default())
}

/// Ritz projection from precomputed energy products `g_i = (∇w, ∇χ_i)`.
pub fn ritz_project_rhs(system: &FemSystem, g: &[f64], cg: &ConjugateGradient) -> Result<FemFunction> {
    if g.len() != system.num_dofs() {
        return Err(Error::InvalidArgument(format!(
            "{} energy products for {} unknowns",
            g.len(),
            system.num_dofs()
        )));
    }
    let mut c = vec![0.0; g.len()];
    cg.solve(&system.stiffness, g, &mut c)?;
    FemFunction::from_interior(system.mesh.clone(), &c)
}

/// `‖fe - Σ_m w_m φ_m‖_{L²}`.
pub fn l2_error(fe: &FemFunction, basis: &EigenBasis, w: &[f64]) -> Result<f64> {
    let loads = ModeLoads::build(fe.mesh(), basis, w.len(), QuadraturePolicy::default())?;
    let mass = crate::fem::assembly::assemble(fe.mesh().clone())?.mass;
    Ok(l2_error_with(&mass, &loads, &fe.interior_values(), w))
}

/// `‖u_h - Σ w_m φ_m‖²` expanded as `‖w‖² - 2 (w, u_h) + uᵀ M u`; the cross
/// term uses the exact mode–hat products, so no pointwise evaluation is needed.
pub fn l2_error_sq_with(mass: &CsrMatrix, loads: &ModeLoads, u: &[f64], w: &[f64]) -> f64 {
    let spectral: f64 = w.iter().map(|c| c * c).sum();
    let cross = loads.inner(w, u);
    let fe = mass.quadratic_form(u);
    (spectral - 2.0 * cross + fe).max(0.0)
}

pub fn l2_error_with(mass: &CsrMatrix, loads: &ModeLoads, u: &[f64], w: &[f64]) -> f64 {
    l2_error_sq_with(mass, loads, u, w).sqrt()
}
