//! Covariance operators `Q`, Karhunen–Loève sampling of the projected noise
//! `P_N Ẇ^Q`, and the Hilbert–Schmidt sums that measure noise regularity.
//!
//! Everything is expressed through the coefficients `(Q^{1/2} ψ_k, φ_m)`:
//! for the commuting variants (power law, diagonal) this matrix is diagonal with
//! entries `σ_m^{1/2}`; for the general variant it is the user-supplied square
//! root `B`.

use serde::{Deserialize, Serialize};

use crate::eigenbasis::{Domain, EigenBasis};
use crate::rng::NoiseStream;
use crate::{Error, Result};

/// Relative change over the last decade of partial sums below which a series is
/// declared (heuristically) convergent.
pub const STAGNATION_TOL: f64 = 1e-8;

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SqrtMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SqrtMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("square-root matrix is empty".into()));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::InvalidArgument(format!(
                "square-root matrix must be {dim}x{dim}; row {bad} has {} entries",
                rows[bad].len()
            )));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "square-root matrix has non-finite entries".into(),
            ));
        }
        Ok(Self {
            dim,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.dim..(m + 1) * self.dim]
    }

    pub fn get(&self, m: usize, k: usize) -> f64 {
        self.data[m * self.dim + k]
    }

    /// `B Bᵀ`, the covariance of the coefficient vector.
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| self.row(i).iter().zip(self.row(j)).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect()
    }
}

impl TryFrom<Vec<Vec<f64>>> for SqrtMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl From<SqrtMatrix> for Vec<Vec<f64>> {
    fn from(m: SqrtMatrix) -> Self {
        m.data.chunks(m.dim).map(<[f64]>::to_vec).collect()
    }
}

/// The covariance operator of the noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CovarianceSpec {
    /// `Q = A^ρ`; `ρ = 0` is white noise.
    PowerLaw { rho: f64 },
    /// `Q φ_m = σ_m φ_m`.
    Diagonal { sigmas: Vec<f64> },
    /// Finite-rank square root in the eigenbasis, `B[m][k] = (Q^{1/2} ψ_k, φ_m)`.
    General { sqrt_coeffs: SqrtMatrix },
}

impl CovarianceSpec {
    pub fn white_noise() -> Self {
        CovarianceSpec::PowerLaw { rho: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CovarianceSpec::PowerLaw { rho } if !rho.is_finite() => {
                Err(Error::InvalidArgument(format!("rho must be finite, got {rho}")))
            }
            CovarianceSpec::Diagonal { sigmas } => {
                match sigmas.iter().position(|s| !(*s >= 0.0 && s.is_finite())) {
                    Some(i) => Err(Error::NegativeSigma {
                        index: i + 1,
                        value: sigmas[i],
                    }),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }

    /// Number of modes the operator is defined on (`None` = unbounded).
    pub fn mode_capacity(&self) -> Option<usize> {
        match self {
            CovarianceSpec::PowerLaw { .. } => None,
            CovarianceSpec::Diagonal { sigmas } => Some(sigmas.len()),
            CovarianceSpec::General { sqrt_coeffs } => Some(sqrt_coeffs.dim()),
        }
    }

    /// How many standard normals a sample with `n` retained modes consumes.
    pub fn eta_count(&self, n: usize) -> usize {
        match self {
            CovarianceSpec::General { sqrt_coeffs } => sqrt_coeffs.dim(),
            _ => n,
        }
    }

    /// `Σ_k (Q^{1/2}ψ_k, φ_m)²`, the variance of the m-th coefficient (0-based `m`).
    /// For the general variant rows beyond the matrix are zero.
    pub fn mode_variance(&self, basis: &EigenBasis, m: usize) -> f64 {
        match self {
            CovarianceSpec::PowerLaw { rho } => basis.pair(m).lambda.powf(*rho),
            CovarianceSpec::Diagonal { sigmas } => sigmas.get(m).copied().unwrap_or(0.0),
            CovarianceSpec::General { sqrt_coeffs } => {
                if m < sqrt_coeffs.dim() {
                    sqrt_coeffs.row(m).iter().map(|b| b * b).sum()
                } else {
                    0.0
                }
            }
        }
    }

    fn check_modes(&self, basis: &EigenBasis, n: usize) -> Result<()> {
        basis.require(n)?;
        match self.mode_capacity() {
            Some(cap) if n > cap => Err(Error::NotEnoughModes {
                requested: n,
                available: cap,
            }),
            _ => Ok(()),
        }
    }
}

/// One draw of `P_N Ẇ^Q` as coefficients against `φ_1..φ_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSample {
    pub n: usize,
    /// `w_m = (P_N Ẇ^Q, φ_m)`.
    pub coeffs: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    /// The standard normals behind `coeffs`, kept for coupling.
    pub eta: Vec<f64>,
}

impl NoiseSample {
    /// Builds the truncated coefficients from given normals. Only the first
    /// `q.eta_count(n)` entries of `eta` are used, so a longer draw shared across
    /// truncation levels gives coupled samples.
    pub fn from_eta(
        q: &CovarianceSpec,
        basis: &EigenBasis,
        n: usize,
        eta: &[f64],
        seed: u64,
        stream: u64,
    ) -> Result<Self> {
        q.validate()?;
        q.check_modes(basis, n)?;
        let needed = q.eta_count(n);
        if eta.len() < needed {
            return Err(Error::InvalidArgument(format!(
                "need {needed} standard normals, got {}",
                eta.len()
            )));
        }
        let eta = &eta[..needed];
        let coeffs = match q {
            CovarianceSpec::PowerLaw { .. } | CovarianceSpec::Diagonal { .. } => eta
                .iter()
                .enumerate()
                .map(|(m, e)| q.mode_variance(basis, m).sqrt() * e)
                .collect(),
            CovarianceSpec::General { sqrt_coeffs } => (0..n)
                .map(|m| sqrt_coeffs.row(m).iter().zip(eta).map(|(b, e)| b * e).sum())
                .collect(),
        };
        Ok(Self {
            n,
            coeffs,
            seed,
            stream,
            eta: eta.to_vec(),
        })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            coeffs: vec![0.0; n],
            seed: 0,
            stream: 0,
            eta: vec![0.0; n],
        }
    }
}

/// Draws `P_N Ẇ^Q` from a stream; the stream's next normals become `η_1, η_2, ...`.
pub fn sample_projected_noise(
    q: &CovarianceSpec,
    basis: &EigenBasis,
    n: usize,
    stream: &mut NoiseStream,
) -> Result<NoiseSample> {
    q.validate()?;
    q.check_modes(basis, n)?;
    let eta = stream.standard_normals(q.eta_count(n));
    NoiseSample::from_eta(q, basis, n, &eta, stream.seed(), stream.stream())
}

/// Partial Hilbert–Schmidt sum for `‖A^{(β-2)/2}‖²_{L_2^0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityIndex {
    pub beta: f64,
    pub hs_norm_sq: f64,
    /// Power law: the analytic tail criterion. Otherwise a stagnation heuristic.
    pub converged: bool,
}

/// `Σ_{m ≤ K} λ_m^{β-2} Σ_k (Q^{1/2}ψ_k, φ_m)²`.
pub fn hs_norm_sq(
    q: &CovarianceSpec,
    basis: &EigenBasis,
    beta: f64,
    trunc: usize,
) -> Result<RegularityIndex> {
    if !(0.0..=2.0).contains(&beta) {
        return Err(Error::BetaOutOfRange(beta));
    }
    q.validate()?;
    basis.require(trunc)?;
    let term = |m: usize| basis.pair(m).lambda.powf(beta - 2.0) * q.mode_variance(basis, m);
    let partial: Vec<f64> = (0..trunc)
        .scan(0.0, |acc, m| {
            *acc += term(m);
            Some(*acc)
        })
        .collect();
    let total = partial.last().copied().unwrap_or(0.0);
    let converged = match q {
        CovarianceSpec::PowerLaw { rho } => beta - 2.0 + rho < -(basis.dim() as f64) / 2.0,
        _ => {
            let earlier = if trunc >= 10 { partial[trunc / 10 - 1] } else { 0.0 };
            (total - earlier).abs() <= STAGNATION_TOL * total.abs()
        }
    };
    Ok(RegularityIndex {
        beta,
        hs_norm_sq: total,
        converged,
    })
}

/// Power-law regularity supremum `β* = 2 - d/2 - ρ` (open bound).
pub fn beta_star(dim: usize, rho: f64) -> f64 {
    2.0 - dim as f64 / 2.0 - rho
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellPosedness {
    pub well_posed: bool,
    /// `2 - d/2 - ρ` for power laws; `None` when only the heuristic applies.
    pub margin: Option<f64>,
}

/// Existence of a mild solution: `ρ < 2 - d/2` for power laws, the `β = 0`
/// Hilbert–Schmidt series otherwise.
pub fn is_well_posed(q: &CovarianceSpec, domain: &Domain) -> Result<WellPosedness> {
    q.validate()?;
    match q {
        CovarianceSpec::PowerLaw { rho } => {
            let margin = beta_star(domain.dim(), *rho);
            Ok(WellPosedness {
                well_posed: margin > 0.0,
                margin: Some(margin),
            })
        }
        _ => {
            let k = q.mode_capacity().unwrap_or(0);
            if k == 0 {
                return Ok(WellPosedness {
                    well_posed: true,
                    margin: None,
                });
            }
            let basis = EigenBasis::build(*domain, k)?;
            let reg = hs_norm_sq(q, &basis, 0.0, k)?;
            Ok(WellPosedness {
                well_posed: reg.converged,
                margin: None,
            })
        }
    }
}

/// Expected squared L² truncation error of the linear solution,
/// `Σ_{m=N+1}^{K} λ_m^{-2} Σ_k (Q^{1/2}ψ_k, φ_m)²`.
pub fn truncation_error_sq(
    q: &CovarianceSpec,
    basis: &EigenBasis,
    n: usize,
    trunc: usize,
) -> Result<f64> {
    if n >= trunc {
        return Err(Error::InvalidArgument(format!(
            "truncation level N = {n} must be below the summation cap K = {trunc}"
        )));
    }
    q.validate()?;
    basis.require(trunc)?;
    Ok((n..trunc)
        .map(|m| q.mode_variance(basis, m) / basis.pair(m).lambda.powi(2))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn interval(k: usize) -> EigenBasis {
        EigenBasis::build(Domain::unit(1).unwrap(), k).unwrap()
    }

    fn rotation(theta: f64) -> SqrtMatrix {
        SqrtMatrix::from_rows(vec![
            vec![theta.cos(), -theta.sin()],
            vec![theta.sin(), theta.cos()],
        ])
        .unwrap()
    }

    #[test]
    fn zero_operator_gives_zero_noise() {
        let basis = interval(16);
        let q = CovarianceSpec::Diagonal { sigmas: vec![0.0; 16] };
        let w = sample_projected_noise(&q, &basis, 16, &mut NoiseStream::new(1, 0)).unwrap();
        assert!(w.coeffs.iter().all(|&c| c == 0.0));
        assert_eq!(w.eta.len(), 16);
    }

    #[test]
    fn white_noise_coefficients_are_the_normals() {
        let basis = interval(8);
        let w = sample_projected_noise(&CovarianceSpec::white_noise(), &basis, 8, &mut NoiseStream::new(5, 2))
            .unwrap();
        assert_eq!(w.coeffs, w.eta);
        assert_eq!((w.seed, w.stream), (5, 2));
    }

    #[test]
    fn power_law_scaling() {
        let basis = interval(4);
        let q = CovarianceSpec::PowerLaw { rho: 0.5 };
        let w = sample_projected_noise(&q, &basis, 4, &mut NoiseStream::new(9, 0)).unwrap();
        for (m, (c, e)) in w.coeffs.iter().zip(&w.eta).enumerate() {
            let sigma = ((m + 1) as f64 * PI).powi(2).powf(0.5);
            assert_relative_eq!(*c, sigma.sqrt() * e, max_relative = 1e-15);
        }
    }

    #[test]
    fn reproducible_and_coupled() {
        let basis = interval(64);
        let q = CovarianceSpec::PowerLaw { rho: -0.3 };
        let a = sample_projected_noise(&q, &basis, 32, &mut NoiseStream::new(11, 4)).unwrap();
        let b = sample_projected_noise(&q, &basis, 32, &mut NoiseStream::new(11, 4)).unwrap();
        assert_eq!(a, b);
        let fine = sample_projected_noise(&q, &basis, 64, &mut NoiseStream::new(11, 4)).unwrap();
        assert_eq!(a.coeffs[..], fine.coeffs[..32]);
    }

    #[test]
    fn general_uses_all_normals() {
        let basis = interval(2);
        let q = CovarianceSpec::General { sqrt_coeffs: rotation(0.3) };
        let w = sample_projected_noise(&q, &basis, 1, &mut NoiseStream::new(3, 0)).unwrap();
        assert_eq!(w.eta.len(), 2);
        assert_relative_eq!(w.coeffs[0], 0.3f64.cos() * w.eta[0] - 0.3f64.sin() * w.eta[1]);
    }

    #[test]
    fn rotation_covariance_is_identity() {
        // R Rᵀ = I for every angle.
        for theta in [0.0, 0.4, 1.3, PI] {
            let cov = rotation(theta).covariance();
            assert_relative_eq!(cov[0][0], 1.0, epsilon = 1e-15);
            assert_relative_eq!(cov[1][1], 1.0, epsilon = 1e-15);
            assert_relative_eq!(cov[0][1], 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn sampling_errors() {
        let basis = interval(8);
        let q = CovarianceSpec::white_noise();
        assert!(matches!(
            sample_projected_noise(&q, &basis, 9, &mut NoiseStream::new(0, 0)),
            Err(Error::NotEnoughModes { requested: 9, available: 8 })
        ));
        let neg = CovarianceSpec::Diagonal { sigmas: vec![1.0, -0.5, 1.0] };
        assert!(matches!(
            sample_projected_noise(&neg, &basis, 3, &mut NoiseStream::new(0, 0)),
            Err(Error::NegativeSigma { index: 2, .. })
        ));
        let short = CovarianceSpec::Diagonal { sigmas: vec![1.0; 3] };
        assert!(sample_projected_noise(&short, &basis, 4, &mut NoiseStream::new(0, 0)).is_err());
        let gen = CovarianceSpec::General { sqrt_coeffs: rotation(0.1) };
        assert!(sample_projected_noise(&gen, &basis, 3, &mut NoiseStream::new(0, 0)).is_err());
    }

    #[test]
    fn white_noise_hs_sum_closed_form() {
        // β = 1: Σ (kπ)^{-2} = 1/6, tail past K = 1e5 about 1e-6.
        // β = 0: Σ (kπ)^{-4} = 1/90.
        let basis = interval(100_000);
        let q = CovarianceSpec::white_noise();
        let reg = hs_norm_sq(&q, &basis, 1.0, 100_000).unwrap();
        assert!((reg.hs_norm_sq - 1.0 / 6.0).abs() < 2e-6);
        assert!(reg.converged);
        let reg = hs_norm_sq(&q, &basis, 0.0, 100_000).unwrap();
        assert_relative_eq!(reg.hs_norm_sq, 1.0 / 90.0, max_relative = 1e-12);
        assert!(reg.converged);
    }

    #[test]
    fn boundary_power_law_diverges() {
        for dim in 1..=2 {
            let basis = EigenBasis::build(Domain::unit(dim).unwrap(), 200).unwrap();
            let rho = 2.0 - dim as f64 / 2.0;
            for beta in [0.0, 0.5, 2.0] {
                let reg = hs_norm_sq(&CovarianceSpec::PowerLaw { rho }, &basis, beta, 200).unwrap();
                assert!(!reg.converged);
            }
        }
    }

    #[test]
    fn zero_diagonal_hs_sum() {
        let basis = interval(50);
        let q = CovarianceSpec::Diagonal { sigmas: vec![0.0; 50] };
        let reg = hs_norm_sq(&q, &basis, 1.0, 50).unwrap();
        assert_eq!(reg.hs_norm_sq, 0.0);
        assert!(reg.converged);
    }

    #[test]
    fn diagonal_stagnation_heuristic() {
        let basis = interval(2000);
        let fast = CovarianceSpec::Diagonal {
            sigmas: (1..=2000).map(|k| (k as f64).powi(-8)).collect(),
        };
        assert!(hs_norm_sq(&fast, &basis, 0.0, 2000).unwrap().converged);
        let slow = CovarianceSpec::Diagonal {
            sigmas: (1..=2000).map(|k| (k as f64).powi(3)).collect(),
        };
        assert!(!hs_norm_sq(&slow, &basis, 0.0, 2000).unwrap().converged);
    }

    #[test]
    fn beta_range_checked() {
        let basis = interval(4);
        let q = CovarianceSpec::white_noise();
        assert!(matches!(hs_norm_sq(&q, &basis, -0.1, 4), Err(Error::BetaOutOfRange(_))));
        assert!(matches!(hs_norm_sq(&q, &basis, 2.5, 4), Err(Error::BetaOutOfRange(_))));
    }

    #[test]
    fn well_posedness_examples() {
        let d1 = Domain::unit(1).unwrap();
        let d2 = Domain::unit(2).unwrap();
        let wp = is_well_posed(&CovarianceSpec::white_noise(), &d1).unwrap();
        assert!(wp.well_posed);
        assert_relative_eq!(wp.margin.unwrap(), 1.5);
        let wp = is_well_posed(&CovarianceSpec::white_noise(), &d2).unwrap();
        assert!(wp.well_posed);
        assert_relative_eq!(wp.margin.unwrap(), 1.0);
        assert!(!is_well_posed(&CovarianceSpec::PowerLaw { rho: 1.0 }, &d2).unwrap().well_posed);
        let zero = CovarianceSpec::Diagonal { sigmas: vec![0.0; 10] };
        assert!(is_well_posed(&zero, &d1).unwrap().well_posed);
    }

    #[test]
    fn truncation_tail_white_noise() {
        // Direct summation of Σ_{m=11}^{1e5} (mπ)^{-4}.
        let basis = interval(100_000);
        let tail = truncation_error_sq(&CovarianceSpec::white_noise(), &basis, 10, 100_000).unwrap();
        assert_relative_eq!(tail, 2.942746044937951e-6, max_relative = 1e-9);
    }

    #[test]
    fn truncation_tail_ratio_approaches_one_eighth() {
        // Integral comparison: tail(N) ~ N^{-3}/(3π⁴), so tail(2N)/tail(N) → 1/8.
        // Direct-summation ratios: N=10 → 0.13482, N=80 → 0.12618, N=160 → 0.12559.
        let basis = interval(100_000);
        let q = CovarianceSpec::white_noise();
        let ratio = |n| {
            truncation_error_sq(&q, &basis, 2 * n, 100_000).unwrap()
                / truncation_error_sq(&q, &basis, n, 100_000).unwrap()
        };
        assert_relative_eq!(ratio(10), 0.13481832984227388, max_relative = 1e-8);
        assert_relative_eq!(ratio(160), 0.12558775918192416, max_relative = 1e-8);
        assert!((ratio(160) - 0.125).abs() < (ratio(80) - 0.125).abs());
    }

    #[test]
    fn truncation_errors() {
        let basis = interval(20);
        let q = CovarianceSpec::white_noise();
        assert!(truncation_error_sq(&q, &basis, 20, 20).is_err());
        assert!(truncation_error_sq(&q, &basis, 5, 21).is_err());
        let zero = CovarianceSpec::Diagonal { sigmas: vec![0.0; 20] };
        assert_eq!(truncation_error_sq(&zero, &basis, 5, 20).unwrap(), 0.0);
    }

    #[test]
    fn sqrt_matrix_serde_roundtrip() {
        let q = CovarianceSpec::General { sqrt_coeffs: rotation(0.7) };
        let json = serde_json::to_string(&q).unwrap();
        let back: CovarianceSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(q, back);
        assert!(serde_json::from_str::<SqrtMatrix>("[[1.0, 2.0]]").is_err());
    }
}
