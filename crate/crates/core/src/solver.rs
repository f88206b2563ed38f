//! Solvers for the spectrally truncated problem `u_N = A^{-1} f(u_N) + A^{-1} P_N Ẇ^Q`.
//!
//! Both solvers iterate the fixed-point map (Picard), which contracts with
//! modulus `‖f‖_Lip / γ` whenever the Lipschitz constant of `f` is below the
//! Poincaré constant `γ = λ_1`. Linear right-hand sides are solved directly.

use serde::{Deserialize, Serialize};

use crate::covariance::NoiseSample;
use crate::eigenbasis::EigenBasis;
use crate::fem::{FemFunction, FemSystem};
use crate::linalg::{ConjugateGradient, CsrMatrix};
use crate::{Error, Result};

/// The semilinear term `f(u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Nonlinearity {
    Zero,
    Linear { c: f64 },
    #[serde(alias = "sin")]
    ScaledSin { c: f64 },
    #[serde(alias = "tanh")]
    ScaledTanh { c: f64 },
}

impl Nonlinearity {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { c } => c * u,
            Nonlinearity::ScaledSin { c } => c * u.sin(),
            Nonlinearity::ScaledTanh { c } => c * u.tanh(),
        }
    }

    /// Lipschitz constant `|c|`.
    pub fn lip(&self) -> f64 {
        match *self {
            Nonlinearity::Zero => 0.0,
            Nonlinearity::Linear { c } | Nonlinearity::ScaledSin { c } | Nonlinearity::ScaledTanh { c } => c.abs(),
        }
    }

    /// Whether the fixed point is available without iteration.
    pub fn is_linear(&self) -> bool {
        matches!(self, Nonlinearity::Zero | Nonlinearity::Linear { .. })
    }

    /// Refuses nonlinearities whose Lipschitz constant reaches `gamma`.
    pub fn check_contractive(&self, gamma: f64) -> Result<()> {
        let lip = self.lip();
        if !(lip < gamma) {
            return Err(Error::NotContractive { lip, gamma });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Picard stopping tolerance on the L² norm of the increment.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative residual for the inner conjugate gradient solves.
    pub cg_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-11,
            max_iter: 200,
            cg_tol: 1e-12,
        }
    }
}

/// Norms of successive Picard increments `‖u^{(j+1)} - u^{(j)}‖`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PicardTrace {
    /// Solved without iterating (linear `f`).
    pub direct: bool,
    pub increments: Vec<f64>,
}

/// Largest ratio of successive increments, an empirical contraction modulus.
/// Zero for direct solves.
pub fn contraction_estimate(trace: &PicardTrace) -> Result<f64> {
    if trace.direct {
        return Ok(0.0);
    }
    if trace.increments.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "contraction estimate needs at least 3 Picard iterations, got {}",
            trace.increments.len()
        )));
    }
    Ok(trace
        .increments
        .windows(2)
        .filter(|w| w[0] > 0.0)
        .map(|w| w[1] / w[0])
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSolution {
    /// `(u_N, φ_m)` for `m ≤ N`.
    pub coeffs: Vec<f64>,
    pub iterations: usize,
    /// `‖T(u) - u‖` of the fixed-point map at the returned coefficients.
    pub residual: f64,
    pub trace: PicardTrace,
}

/// Spectral Galerkin solution in `span{φ_1..φ_N}`.
///
/// Zero and linear `f` are solved in closed form, `w_m / (λ_m - c)`. Otherwise
/// `P_N f(u)` is evaluated pseudo-spectrally on `4N - 1` interior points of the
/// interval, where the discrete sine transform is exactly orthogonal.
pub fn solve_spectral(
    basis: &EigenBasis,
    n: usize,
    f: Nonlinearity,
    w: &NoiseSample,
    opts: &SolverOptions,
) -> Result<SpectralSolution> {
    basis.require(n)?;
    if w.coeffs.len() < n {
        return Err(Error::NotEnoughModes {
            requested: n,
            available: w.coeffs.len(),
        });
    }
    f.check_contractive(basis.poincare_constant())?;
    let lambdas: Vec<f64> = basis.lambdas().take(n).collect();
    let noise = &w.coeffs[..n];

    if f.is_linear() {
        let c = match f {
            Nonlinearity::Linear { c } => c,
            _ => 0.0,
        };
        let coeffs = noise.iter().zip(&lambdas).map(|(w, l)| w / (l - c)).collect();
        return Ok(SpectralSolution {
            coeffs,
            iterations: 0,
            residual: 0.0,
            trace: PicardTrace {
                direct: true,
                increments: Vec::new(),
            },
        });
    }
    if basis.dim() != 1 {
        return Err(Error::Unsupported(
            "the spectral oracle handles nonlinear f only in one dimension".into(),
        ));
    }

    let grid = PseudoSpectralGrid::new(basis, n);
    let map = |c: &[f64]| -> Vec<f64> {
        let proj = grid.project_nonlinearity(c, f);
        proj.iter()
            .zip(noise)
            .zip(&lambdas)
            .map(|((p, w), l)| (p + w) / l)
            .collect()
    };
    let mut coeffs = vec![0.0; n];
    let mut increments = Vec::new();
    loop {
        let next = map(&coeffs);
        let inc = l2_distance(&next, &coeffs);
        increments.push(inc);
        coeffs = next;
        if inc <= opts.tol {
            break;
        }
        if increments.len() >= opts.max_iter {
            return Err(Error::PicardNotConverged {
                iterations: increments.len(),
                increment: inc,
            });
        }
    }
    let residual = l2_distance(&map(&coeffs), &coeffs);
    Ok(SpectralSolution {
        coeffs,
        iterations: increments.len(),
        residual,
        trace: PicardTrace {
            direct: false,
            increments,
        },
    })
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Sample matrix of the first `N` modes on the interior trapezoid grid.
struct PseudoSpectralGrid {
    /// Row-major `points × modes`.
    samples: Vec<f64>,
    modes: usize,
    weight: f64,
}

impl PseudoSpectralGrid {
    fn new(basis: &EigenBasis, n: usize) -> Self {
        let len = basis.domain().extent()[0];
        let m = 4 * n;
        let samples = (1..m)
            .flat_map(|j| {
                let x = j as f64 * len / m as f64;
                basis.pairs()[..n].iter().map(move |p| p.eval(&[x]))
            })
            .collect();
        Self {
            samples,
            modes: n,
            weight: len / m as f64,
        }
    }

    /// `(f(Σ c_m φ_m), φ_k)` for `k ≤ N`.
    fn project_nonlinearity(&self, coeffs: &[f64], f: Nonlinearity) -> Vec<f64> {
        let mut out = vec![0.0; self.modes];
        for row in self.samples.chunks_exact(self.modes) {
            let u: f64 = row.iter().zip(coeffs).map(|(p, c)| p * c).sum();
            let fu = self.weight * f.eval(u);
            out.iter_mut().zip(row).for_each(|(o, p)| *o += fu * p);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FemSolution {
    pub function: FemFunction,
    pub iterations: usize,
    /// Picard: mass-weighted defect `‖T(u) - u‖` of the discrete fixed-point map.
    /// Direct solves: relative residual of the linear solve.
    pub residual: f64,
    pub trace: PicardTrace,
}

/// Solves `S u = M f(u) + b` with `f` applied at the nodes.
///
/// Zero and linear `f` give one SPD solve (`S` or `S - cM`); other kinds use
/// Picard iteration with warm-started conjugate gradients.
pub fn solve_fem(system: &FemSystem, f: Nonlinearity, opts: &SolverOptions) -> Result<FemSolution> {
    solve_fem_with_load(system, &system.noise_load, f, opts)
}

/// [`solve_fem`] with the load `b` supplied separately from the system.
pub fn solve_fem_with_load(
    system: &FemSystem,
    b: &[f64],
    f: Nonlinearity,
    opts: &SolverOptions,
) -> Result<FemSolution> {
    let n = system.num_dofs();
    if b.len() != n {
        return Err(Error::InvalidArgument(format!("load of length {} for {n} unknowns", b.len())));
    }
    let gamma = EigenBasis::build(*system.mesh.domain(), 1)?.poincare_constant();
    f.check_contractive(gamma)?;
    let cg = ConjugateGradient::new(opts.cg_tol);

    if f.is_linear() {
        let mut u = vec![0.0; n];
        let report = match f {
            Nonlinearity::Linear { c } if c != 0.0 => {
                let shifted: CsrMatrix = system.stiffness.add_scaled(-c, &system.mass);
                cg.solve(&shifted, b, &mut u)?
            }
            _ => cg.solve(&system.stiffness, b, &mut u)?,
        };
        return Ok(FemSolution {
            function: FemFunction::from_interior(system.mesh.clone(), &u)?,
            iterations: 1,
            residual: report.relative_residual,
            trace: PicardTrace {
                direct: true,
                increments: Vec::new(),
            },
        });
    }

    let apply = |u: &[f64], out: &mut Vec<f64>| -> Result<()> {
        let fu: Vec<f64> = u.iter().map(|&v| f.eval(v)).collect();
        let mut rhs = system.mass.mul_vec(&fu);
        rhs.iter_mut().zip(b).for_each(|(r, bi)| *r += bi);
        out.clear();
        out.extend_from_slice(u);
        cg.solve(&system.stiffness, &rhs, out)?;
        Ok(())
    };
    let mut u = vec![0.0; n];
    let mut next = Vec::with_capacity(n);
    let mut increments = Vec::new();
    loop {
        apply(&u, &mut next)?;
        let diff: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
        let inc = system.l2_norm(&diff);
        increments.push(inc);
        std::mem::swap(&mut u, &mut next);
        if inc <= opts.tol {
            break;
        }
        if increments.len() >= opts.max_iter {
            return Err(Error::PicardNotConverged {
                iterations: increments.len(),
                increment: inc,
            });
        }
    }
    apply(&u, &mut next)?;
    let diff: Vec<f64> = next.iter().zip(&u).map(|(a, b)| a - b).collect();
    let residual = system.l2_norm(&diff);
    Ok(FemSolution {
        function: FemFunction::from_interior(system.mesh.clone(), &u)?,
        iterations: increments.len(),
        residual,
        trace: PicardTrace {
            direct: false,
            increments,
        },
    })
}
