//! Analytic eigensystem of the negative Dirichlet Laplacian on an interval or a
//! rectangle.
//!
//! On `(0, L)` the eigenpairs are `λ_k = (kπ/L)²`, `φ_k(x) = √(2/L) sin(kπx/L)`.
//! On `(0, Lx) × (0, Ly)` they are tensor products indexed by `(i, j)`, flattened
//! into a single sequence sorted by eigenvalue with ties broken lexicographically
//! on `(i, j)`. The ordering is deterministic, which is what lets Monte Carlo
//! samples be coupled across truncation levels.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// The physical domain: an interval (`dim = 1`) or a rectangle (`dim = 2`)
/// anchored at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    dim: usize,
    extent: [f64; 2],
}

impl Domain {
    pub fn new(dim: usize, extent: &[f64]) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidDomain(format!(
                "dimension must be 1 or 2, got {dim}"
            )));
        }
        if extent.len() != dim {
            return Err(Error::InvalidDomain(format!(
                "expected {dim} side lengths, got {}",
                extent.len()
            )));
        }
        if let Some(bad) = extent.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidDomain(format!(
                "side lengths must be positive and finite, got {bad}"
            )));
        }
        let mut ext = [1.0; 2];
        ext[..dim].copy_from_slice(extent);
        Ok(Self { dim, extent: ext })
    }

    /// Unit interval or unit square.
    pub fn unit(dim: usize) -> Result<Self> {
        Self::new(dim, &[1.0, 1.0][..dim.min(2)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> &[f64] {
        &self.extent[..self.dim]
    }

    pub fn measure(&self) -> f64 {
        self.extent().iter().product()
    }
}

/// One eigenpair `(λ_k, φ_k)`. The mode is evaluated in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenPair {
    /// 1-based position in the ascending ordering.
    pub index: usize,
    pub lambda: f64,
    /// Wavenumber indices `(i, j)`; `j = 0` in one dimension.
    pub wavenumbers: [usize; 2],
    /// Angular frequencies `iπ/Lx`, `jπ/Ly` (zero for unused axes).
    pub frequencies: [f64; 2],
    /// L²-normalisation factor.
    pub amplitude: f64,
}

impl EigenPair {
    fn new(index: usize, wavenumbers: [usize; 2], domain: &Domain) -> Self {
        let mut frequencies = [0.0; 2];
        for (axis, freq) in frequencies.iter_mut().enumerate().take(domain.dim) {
            *freq = wavenumbers[axis] as f64 * PI / domain.extent[axis];
        }
        let lambda = PI * PI * wave_sq(&wavenumbers, domain);
        let amplitude = domain
            .extent()
            .iter()
            .map(|l| (2.0 / l).sqrt())
            .product();
        Self {
            index,
            lambda,
            wavenumbers,
            frequencies,
            amplitude,
        }
    }

    fn dim(&self) -> usize {
        if self.wavenumbers[1] == 0 {
            1
        } else {
            2
        }
    }

    /// `φ_k(x)`; `x` holds one coordinate per dimension.
    pub fn eval(&self, x: &[f64]) -> f64 {
        (0..self.dim()).fold(self.amplitude, |acc, axis| {
            acc * (self.frequencies[axis] * x[axis]).sin()
        })
    }

    /// Gradient of `φ_k` at `x` (second entry zero in one dimension).
    pub fn gradient(&self, x: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        let d = self.dim();
        for (axis, slot) in g.iter_mut().enumerate().take(d) {
            let mut v = self.amplitude * self.frequencies[axis] * (self.frequencies[axis] * x[axis]).cos();
            for other in (0..d).filter(|&o| o != axis) {
                v *= (self.frequencies[other] * x[other]).sin();
            }
            *slot = v;
        }
        g
    }

    /// `-Δφ_k(x)` from the second derivatives of the sine factors.
    pub fn neg_laplacian(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        (0..d)
            .map(|axis| {
                let k = self.frequencies[axis];
                let mut term = self.amplitude * k * k * (k * x[axis]).sin();
                for other in (0..d).filter(|&o| o != axis) {
                    term *= (self.frequencies[other] * x[other]).sin();
                }
                term
            })
            .sum()
    }
}

/// The first `K` eigenpairs of the Dirichlet Laplacian, sorted ascending.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    domain: Domain,
    pairs: Vec<EigenPair>,
}

impl EigenBasis {
    /// Builds the first `count` eigenpairs on `domain`.
    pub fn build(domain: Domain, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidArgument(
                "eigenbasis needs at least one mode".into(),
            ));
        }
        let indices = match domain.dim {
            1 => (1..=count).map(|k| [k, 0]).collect(),
            2 => lowest_rectangle_modes(&domain, count),
            d => unreachable!("domain dimension {d} passed validation"),
        };
        let pairs = indices
            .into_iter()
            .enumerate()
            .map(|(pos, wn)| EigenPair::new(pos + 1, wn, &domain))
            .collect();
        Ok(Self { domain, pairs })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[EigenPair] {
        &self.pairs
    }

    pub fn pair(&self, m: usize) -> &EigenPair {
        &self.pairs[m]
    }

    pub fn lambdas(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().map(|p| p.lambda)
    }

    /// Fails unless the basis holds at least `n` modes.
    pub fn require(&self, n: usize) -> Result<()> {
        if n > self.len() {
            return Err(Error::NotEnoughModes {
                requested: n,
                available: self.len(),
            });
        }
        Ok(())
    }

    /// `λ_k / k^{2/d}` for every mode; bounded above and below by Weyl's law.
    pub fn weyl_ratios(&self) -> Vec<f64> {
        let exponent = 2.0 / self.dim() as f64;
        self.pairs
            .iter()
            .map(|p| p.lambda / (p.index as f64).powf(exponent))
            .collect()
    }

    /// Sharp Poincaré constant `γ = λ_1`.
    pub fn poincare_constant(&self) -> f64 {
        self.pairs[0].lambda
    }

    /// Evaluates `Σ_m c_m φ_m(x)` for the leading `coeffs.len()` modes.
    pub fn synthesize(&self, coeffs: &[f64], x: &[f64]) -> f64 {
        self.pairs
            .iter()
            .zip(coeffs)
            .map(|(p, c)| c * p.eval(x))
            .sum()
    }
}

/// `Σ (w_axis / L_axis)²` with the integer square formed first, so equal
/// eigenvalues from different lattice points compare equal exactly.
fn wave_sq(wavenumbers: &[usize; 2], domain: &Domain) -> f64 {
    (0..domain.dim)
        .map(|a| (wavenumbers[a] * wavenumbers[a]) as f64 / (domain.extent[a] * domain.extent[a]))
        .sum()
}

/// Enumerates lattice points `(i, j) ≥ 1` by increasing `(i/Lx)² + (j/Ly)²`.
fn lowest_rectangle_modes(domain: &Domain, count: usize) -> Vec<[usize; 2]> {
    let [lx, ly] = domain.extent;
    let key = |i: usize, j: usize| {
        let (a, b) = (i as f64 / lx, j as f64 / ly);
        a * a + b * b
    };
    // Quarter-ellipse area estimate of the radius, grown until enough points fall inside.
    let mut radius_sq = 4.0 * count as f64 / (PI * lx * ly) + key(1, 1);
    loop {
        let mut found = Vec::new();
        let i_max = (radius_sq.sqrt() * lx).floor() as usize;
        for i in 1..=i_max {
            let rem = radius_sq - (i as f64 / lx).powi(2);
            if rem < 0.0 {
                break;
            }
            let j_max = (rem.sqrt() * ly).floor() as usize;
            found.extend((1..=j_max).map(|j| [i, j]));
        }
        if found.len() >= count {
            found.sort_by(|a, b| {
                wave_sq(a, domain)
                    .total_cmp(&wave_sq(b, domain))
                    .then_with(|| a.cmp(b))
            });
            found.truncate(count);
            return found;
        }
        radius_sq *= 1.5;
    }
}
