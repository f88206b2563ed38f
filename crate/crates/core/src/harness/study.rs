use std::sync::Arc;

use rayon::prelude::*;

use crate::covariance::{is_well_posed, truncation_error_sq, CovarianceSpec, NoiseSample};
use crate::eigenbasis::EigenBasis;
use crate::fem::{assemble, build_mesh, l2_error_sq_with, FemFunction, FemSystem, ModeLoads};
use crate::harness::config::{Level, StudyConfig};
use crate::harness::rates::{fit_log_log_slope, predicted_rate, Coupling, RATE_TOLERANCE};
use crate::rng::NoiseStream;
use crate::solver::{solve_fem_with_load, solve_spectral, Nonlinearity};
use crate::{Error, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SPDEFEM_THREADS";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelResult {
    pub h: f64,
    pub n_modes: usize,
    pub n_per_side: usize,
    /// `(mean ‖e‖^p)^{1/p}`.
    pub error: f64,
    /// Jackknife standard error of `error`; zero for a single sample.
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelResult>,
    /// Least-squares slope of `ln error` against `ln h`.
    pub fitted_rate: Option<f64>,
    pub predicted_rate: Option<f64>,
    /// Fitted within [`RATE_TOLERANCE`] of predicted; true when either is missing.
    pub pass: bool,
    pub reference_modes: usize,
    pub samples: usize,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationLevel {
    pub n_modes: usize,
    pub error: f64,
    pub stderr: f64,
    /// Sample mean of `‖u - u_N‖²` and its standard error.
    pub mean_sq: f64,
    pub mean_sq_stderr: f64,
    /// `E‖u - u_N‖²` summed up to the reference cap.
    pub expected_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncationReport {
    pub levels: Vec<TruncationLevel>,
    /// Decay order in `N`: minus the slope of `ln error` against `ln N`.
    pub fitted_rate: Option<f64>,
    pub predicted_rate: Option<f64>,
    pub pass: bool,
    pub reference_modes: usize,
    pub samples: usize,
}

/// `(mean x^p)^{1/p}` with its jackknife standard error.
pub fn moment_estimate(errors: &[f64], p: f64) -> (f64, f64) {
    let m = errors.len();
    if m == 0 {
        return (0.0, 0.0);
    }
    let powers: Vec<f64> = errors.iter().map(|e| e.powf(p)).collect();
    let total: f64 = powers.iter().sum();
    let estimate = (total / m as f64).powf(1.0 / p);
    if m == 1 {
        return (estimate, 0.0);
    }
    let leave_out: Vec<f64> = powers
        .iter()
        .map(|x| ((total - x).max(0.0) / (m - 1) as f64).powf(1.0 / p))
        .collect();
    let mean = leave_out.iter().sum::<f64>() / m as f64;
    let var = leave_out.iter().map(|t| (t - mean).powi(2)).sum::<f64>();
    (estimate, ((m - 1) as f64 / m as f64 * var).sqrt())
}

fn worker_count(config: &StudyConfig) -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let requested = config.threads.unwrap_or(available);
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    cap.map_or(requested, |c| requested.min(c)).max(1)
}

fn with_pool<T: Send>(config: &StudyConfig, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(config))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

fn check_preconditions(config: &StudyConfig) -> Result<()> {
    config.validate()?;
    if let CovarianceSpec::PowerLaw { rho } = config.covariance {
        let wp = is_well_posed(&config.covariance, &config.domain)?;
        if !wp.well_posed {
            let bound = 2.0 - config.dim() as f64 / 2.0;
            return Err(Error::IllPosed { rho, bound });
        }
    }
    Ok(())
}

/// Per-sample coupled noise at the reference mode count.
fn reference_noise(config: &StudyConfig, basis: &EigenBasis, sample: usize) -> Result<NoiseSample> {
    let n_ref = basis.len();
    let q = &config.covariance;
    let mut stream = NoiseStream::new(config.master_seed, sample as u64);
    let eta = stream.standard_normals(q.eta_count(n_ref));
    NoiseSample::from_eta(q, basis, n_ref, &eta, config.master_seed, sample as u64)
}

struct LevelOperator {
    level: Level,
    h: f64,
    system: FemSystem,
    loads: ModeLoads,
}

enum Reference {
    /// Spectral solution at `N_ref`; level loads carry all `N_ref` columns.
    Spectral,
    /// Overkill FEM solve on a nested finer mesh.
    Fem(Box<(FemSystem, ModeLoads)>),
}

fn level_operator(config: &StudyConfig, basis: &EigenBasis, level: Level, columns: usize) -> Result<LevelOperator> {
    let mesh = Arc::new(build_mesh(config.domain, level.n_per_side)?);
    let loads = ModeLoads::build(&mesh, basis, columns, config.quadrature)?;
    let h = mesh.h();
    Ok(LevelOperator {
        level,
        h,
        system: assemble(mesh)?,
        loads,
    })
}

/// Coupled Monte Carlo estimate of `(E‖u - u_N^h‖^p)^{1/p}` on every level.
pub fn run_study(config: &StudyConfig) -> Result<ConvergenceReport> {
    check_preconditions(config)?;
    with_pool(config, || run_study_inner(config))?
}

fn run_study_inner(config: &StudyConfig) -> Result<ConvergenceReport> {
    let n_ref = config.reference_modes();
    let basis = EigenBasis::build(config.domain, n_ref)?;
    let f = config.nonlinearity;
    let spectral = f.is_linear();

    let reference = if spectral {
        Reference::Spectral
    } else {
        let n_fine = config.reference.mesh_mult * config.levels.iter().map(|l| l.n_per_side).max().unwrap_or(2);
        if let Some(bad) = config.levels.iter().find(|l| !n_fine.is_multiple_of(l.n_per_side)) {
            return Err(Error::Config(format!(
                "level mesh n = {} is not nested in the reference mesh n = {n_fine}",
                bad.n_per_side
            )));
        }
        let op = level_operator(config, &basis, Level::new(n_ref, n_fine), n_ref)?;
        Reference::Fem(Box::new((op.system, op.loads)))
    };

    let operators: Vec<LevelOperator> = config
        .levels
        .iter()
        .map(|&level| level_operator(config, &basis, level, if spectral { n_ref } else { level.n_modes }))
        .collect::<Result<_>>()?;

    let per_sample: Vec<Result<Vec<f64>>> = (0..config.samples)
        .into_par_iter()
        .map(|s| sample_errors(config, &basis, &reference, &operators, f, s))
        .collect();
    let mut errors = vec![Vec::with_capacity(config.samples); operators.len()];
    for result in per_sample {
        for (acc, e) in errors.iter_mut().zip(result?) {
            acc.push(e);
        }
    }

    let levels: Vec<LevelResult> = operators
        .iter()
        .zip(&errors)
        .map(|(op, errs)| {
            let (error, stderr) = moment_estimate(errs, config.p);
            LevelResult {
                h: op.h,
                n_modes: op.level.n_modes,
                n_per_side: op.level.n_per_side,
                error,
                stderr,
            }
        })
        .collect();
    let hs: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let es: Vec<f64> = levels.iter().map(|l| l.error).collect();
    let fitted_rate = fit_log_log_slope(&hs, &es);
    let predicted = match config.covariance {
        CovarianceSpec::PowerLaw { rho } => predicted_rate(config.dim(), rho, 1, Coupling::Optimal)?.coupled_rate,
        _ => None,
    };
    Ok(ConvergenceReport {
        pass: rates_agree(fitted_rate, predicted),
        levels,
        fitted_rate,
        predicted_rate: predicted,
        reference_modes: n_ref,
        samples: config.samples,
        p: config.p,
    })
}

fn rates_agree(fitted: Option<f64>, predicted: Option<f64>) -> bool {
    match (fitted, predicted) {
        (Some(a), Some(b)) => (a - b).abs() <= RATE_TOLERANCE,
        _ => true,
    }
}

fn sample_errors(
    config: &StudyConfig,
    basis: &EigenBasis,
    reference: &Reference,
    operators: &[LevelOperator],
    f: Nonlinearity,
    sample: usize,
) -> Result<Vec<f64>> {
    let n_ref = basis.len();
    let fail = |level: usize, n_modes: usize, e: Error| Error::SolveFailed {
        level,
        n_modes,
        sample,
        source: Box::new(e),
    };
    let noise = reference_noise(config, basis, sample)?;

    let fine = match reference {
        Reference::Spectral => None,
        Reference::Fem(fem) => {
            let (system, loads) = &**fem;
            let b = loads.load(&noise.coeffs);
            let sol = solve_fem_with_load(system, &b, f, &config.solver)
                .map_err(|e| fail(operators.len(), n_ref, e))?;
            Some((system, sol.function))
        }
    };
    let spectral_ref = match reference {
        Reference::Spectral => Some(
            solve_spectral(basis, n_ref, f, &noise, &config.solver)
                .map_err(|e| fail(operators.len(), n_ref, e))?
                .coeffs,
        ),
        Reference::Fem(_) => None,
    };

    operators
        .iter()
        .enumerate()
        .map(|(i, op)| {
            let n = op.level.n_modes;
            let b = op.loads.load(&noise.coeffs[..n]);
            let sol = solve_fem_with_load(&op.system, &b, f, &config.solver).map_err(|e| fail(i, n, e))?;
            let u = sol.function.interior_values();
            let err_sq = match (&spectral_ref, &fine) {
                (Some(c), _) => l2_error_sq_with(&op.system.mass, &op.loads, &u, c),
                (None, Some((system, u_fine))) => nested_error_sq(system, u_fine, &sol.function),
                (None, None) => unreachable!("a reference is always built"),
            };
            Ok(err_sq.sqrt())
        })
        .collect()
}

fn nested_error_sq(fine: &FemSystem, u_fine: &FemFunction, coarse: &FemFunction) -> f64 {
    let lifted = coarse.transfer_to(fine.mesh.clone());
    let diff: Vec<f64> = u_fine
        .interior_values()
        .iter()
        .zip(lifted.interior_values())
        .map(|(a, b)| a - b)
        .collect();
    fine.mass.quadratic_form(&diff).max(0.0)
}

/// Spectral truncation error `‖u - u_N‖` for `f = 0`, evaluated exactly per
/// sample as `(Σ_{N<m≤N_ref} w_m² / λ_m²)^{1/2}`.
pub fn run_truncation_study(config: &StudyConfig) -> Result<TruncationReport> {
    check_preconditions(config)?;
    if config.nonlinearity != Nonlinearity::Zero {
        return Err(Error::Unsupported(
            "exact truncation errors need f = 0".into(),
        ));
    }
    with_pool(config, || truncation_inner(config))?
}

fn truncation_inner(config: &StudyConfig) -> Result<TruncationReport> {
    let n_ref = config.reference_modes();
    let basis = EigenBasis::build(config.domain, n_ref)?;
    let lambdas: Vec<f64> = basis.lambdas().collect();

    let per_sample: Vec<Result<Vec<f64>>> = (0..config.samples)
        .into_par_iter()
        .map(|s| {
            let noise = reference_noise(config, &basis, s)?;
            // tail[m] = Σ_{k ≥ m} (w_k / λ_k)², accumulated from the top.
            let mut tail = vec![0.0; n_ref + 1];
            for m in (0..n_ref).rev() {
                tail[m] = tail[m + 1] + (noise.coeffs[m] / lambdas[m]).powi(2);
            }
            Ok(config.levels.iter().map(|l| tail[l.n_modes.min(n_ref)]).collect())
        })
        .collect();
    let mut sq = vec![Vec::with_capacity(config.samples); config.levels.len()];
    for result in per_sample {
        for (acc, e) in sq.iter_mut().zip(result?) {
            acc.push(e);
        }
    }

    let m = config.samples as f64;
    let levels: Vec<TruncationLevel> = config
        .levels
        .iter()
        .zip(&sq)
        .map(|(level, sq)| {
            let errs: Vec<f64> = sq.iter().map(|s| s.sqrt()).collect();
            let (error, stderr) = moment_estimate(&errs, config.p);
            let mean_sq = sq.iter().sum::<f64>() / m;
            let mean_sq_stderr = if config.samples > 1 {
                (sq.iter().map(|s| (s - mean_sq).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt()
            } else {
                0.0
            };
            let expected_sq = if level.n_modes < n_ref {
                truncation_error_sq(&config.covariance, &basis, level.n_modes, n_ref)?
            } else {
                0.0
            };
            Ok(TruncationLevel {
                n_modes: level.n_modes,
                error,
                stderr,
                mean_sq,
                mean_sq_stderr,
                expected_sq,
            })
        })
        .collect::<Result<_>>()?;

    let ns: Vec<f64> = levels.iter().map(|l| l.n_modes as f64).collect();
    let es: Vec<f64> = levels.iter().map(|l| l.error).collect();
    let fitted_rate = fit_log_log_slope(&ns, &es).map(|s| -s);
    let predicted = match config.covariance {
        CovarianceSpec::PowerLaw { rho } => {
            Some(-predicted_rate(config.dim(), rho, 1, Coupling::Independent)?.truncation_n_exponent)
        }
        _ => None,
    };
    Ok(TruncationReport {
        pass: rates_agree(fitted_rate, predicted),
        levels,
        fitted_rate,
        predicted_rate: predicted,
        reference_modes: n_ref,
        samples: config.samples,
    })
}
