//! Theoretical convergence rates and least-squares rate fitting.
//!
//! Strong errors are bounded by a truncation term `N^a` plus a finite element
//! term `h^{r+1} N^b`. Coupling `h = N^{-1/d}` turns both into powers of `h`;
//! the slower one is the predicted rate.

use crate::covariance::beta_star;
use crate::{Error, Result};

/// Rate difference tolerated between fitted and predicted slopes.
pub const RATE_TOLERANCE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// `h = N^{-1/d}`.
    Optimal,
    /// `N` and `h` chosen independently; no single rate in `h`.
    Independent,
}

/// Exponents of `error ≲ N^{truncation} + h^{fe_h} N^{fe_n}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateDecomposition {
    pub truncation_n_exponent: f64,
    pub fe_h_exponent: f64,
    pub fe_n_exponent: f64,
    /// Net order in `h` under [`Coupling::Optimal`].
    pub coupled_rate: Option<f64>,
}

impl RateDecomposition {
    fn new(dim: usize, truncation: f64, order: usize, fe_n: f64, coupling: Coupling) -> Self {
        let d = dim as f64;
        let fe_h = order as f64 + 1.0;
        let coupled_rate = match coupling {
            Coupling::Optimal => Some((-d * truncation).min(fe_h - d * fe_n)),
            Coupling::Independent => None,
        };
        Self {
            truncation_n_exponent: truncation,
            fe_h_exponent: fe_h,
            fe_n_exponent: fe_n,
            coupled_rate,
        }
    }
}

/// Rates for power-law noise `Q = A^ρ` with elements of degree `order`.
///
/// The finite element term carries `(Σ_{k≤N} k^{2ρ/d})^{1/2}`, which stops
/// growing with `N` once `ρ < -d/2`; its exponent is clamped at zero there.
pub fn predicted_rate(dim: usize, rho: f64, order: usize, coupling: Coupling) -> Result<RateDecomposition> {
    check_dim_order(dim, order)?;
    let bound = beta_star(dim, 0.0);
    if !(rho < bound) {
        return Err(Error::IllPosed { rho, bound });
    }
    let d = dim as f64;
    let truncation = (rho - 2.0) / d + 0.5;
    let fe_n = if order == 1 {
        rho / d + 0.5
    } else {
        (rho + order as f64 - 1.0) / d + 0.5
    };
    Ok(RateDecomposition::new(dim, truncation, order, fe_n.max(0.0), coupling))
}

/// Rates under a regularity index `β` of the noise.
pub fn predicted_rate_beta(dim: usize, beta: f64, order: usize, coupling: Coupling) -> Result<RateDecomposition> {
    check_dim_order(dim, order)?;
    if !(0.0..=2.0).contains(&beta) {
        return Err(Error::BetaOutOfRange(beta));
    }
    let d = dim as f64;
    let fe_n = (order as f64 + 1.0 - beta) / d;
    Ok(RateDecomposition::new(dim, -beta / d, order, fe_n, coupling))
}

fn check_dim_order(dim: usize, order: usize) -> Result<()> {
    if !(1..=2).contains(&dim) {
        return Err(Error::InvalidDomain(format!("dimension must be 1 or 2, got {dim}")));
    }
    if order == 0 {
        return Err(Error::InvalidArgument("element degree must be at least 1".into()));
    }
    Ok(())
}

/// Ordinary least-squares slope of `ln y` against `ln x`. `None` with fewer than
/// three points or any non-positive value.
pub fn fit_log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 3 || xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
