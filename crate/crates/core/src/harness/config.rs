use std::path::Path;

use serde::Deserialize;

use crate::covariance::{CovarianceSpec, SqrtMatrix};
use crate::eigenbasis::Domain;
use crate::quadrature::QuadraturePolicy;
use crate::solver::{Nonlinearity, SolverOptions};
use crate::{Error, Result};

/// One discretisation level: `N` noise modes on a mesh with `n` cells per side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Level {
    pub n_modes: usize,
    pub n_per_side: usize,
}

impl Level {
    pub fn new(n_modes: usize, n_per_side: usize) -> Self {
        Self { n_modes, n_per_side }
    }

    /// `n = round(N^{1/d})`, at least 2.
    pub fn coupled(dim: usize, n_modes: usize) -> Self {
        let n = (n_modes as f64).powf(1.0 / dim as f64).round() as usize;
        Self::new(n_modes, n.max(2))
    }
}

/// Reference resolution for the Monte Carlo error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceConfig {
    /// `N_ref = n_mult · max N`.
    pub n_mult: usize,
    /// Mesh refinement factor of the reference FEM solve, used when `f` is nonlinear.
    pub mesh_mult: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { n_mult: 8, mesh_mult: 4 }
    }
}

/// Everything a convergence or truncation study needs.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub domain: Domain,
    pub covariance: CovarianceSpec,
    pub nonlinearity: Nonlinearity,
    /// Moment of the strong error, `(E‖e‖^p)^{1/p}`.
    pub p: f64,
    pub levels: Vec<Level>,
    pub samples: usize,
    pub master_seed: u64,
    pub reference: ReferenceConfig,
    pub solver: SolverOptions,
    pub quadrature: QuadraturePolicy,
    /// Worker threads; the `SPDEFEM_THREADS` variable overrides it.
    pub threads: Option<usize>,
}

impl StudyConfig {
    /// White noise, `f = 0`, `p = 2`, default reference and solver settings.
    pub fn new(dim: usize, levels: Vec<Level>, samples: usize, master_seed: u64) -> Result<Self> {
        Ok(Self {
            domain: Domain::unit(dim)?,
            covariance: CovarianceSpec::white_noise(),
            nonlinearity: Nonlinearity::Zero,
            p: 2.0,
            levels,
            samples,
            master_seed,
            reference: ReferenceConfig::default(),
            solver: SolverOptions::default(),
            quadrature: QuadraturePolicy::default(),
            threads: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// `N_ref = n_mult · max N`.
    pub fn reference_modes(&self) -> usize {
        let max_n = self.levels.iter().map(|l| l.n_modes).max().unwrap_or(0);
        self.reference.n_mult * max_n
    }

    pub fn validate(&self) -> Result<()> {
        self.covariance.validate()?;
        if self.levels.is_empty() {
            return Err(Error::Config("at least one level is required".into()));
        }
        for pair in self.levels.windows(2) {
            if pair[1].n_modes <= pair[0].n_modes || pair[1].n_per_side <= pair[0].n_per_side {
                return Err(Error::Config(format!(
                    "levels must be strictly refining: {:?} follows {:?}",
                    pair[1], pair[0]
                )));
            }
        }
        if let Some(bad) = self.levels.iter().find(|l| l.n_modes == 0 || l.n_per_side < 2) {
            return Err(Error::Config(format!(
                "level {bad:?} needs N >= 1 and n >= 2"
            )));
        }
        if self.samples == 0 {
            return Err(Error::Config("samples must be positive".into()));
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(Error::Config(format!("p must be a finite number >= 1, got {}", self.p)));
        }
        if self.reference.n_mult < 2 {
            return Err(Error::Config("reference.n_mult must be at least 2".into()));
        }
        if self.reference.mesh_mult < 2 {
            return Err(Error::Config("reference.mesh_mult must be at least 2".into()));
        }
        if let Some(cap) = self.covariance.mode_capacity() {
            let need = self.reference_modes();
            if cap < need {
                return Err(Error::Config(format!(
                    "covariance describes {cap} modes but the reference needs {need}"
                )));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: StudyFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.into_config()
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: StudyFile = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.into_config()
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum LevelSpec {
    Pair([usize; 2]),
    Modes(usize),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StudyFile {
    dim: usize,
    extent: Option<Vec<f64>>,
    rho: Option<f64>,
    sigmas: Option<Vec<f64>>,
    sqrt_matrix: Option<SqrtMatrix>,
    #[serde(default = "zero_f")]
    f: Nonlinearity,
    #[serde(default = "default_p")]
    p: f64,
    levels: Vec<LevelSpec>,
    samples: usize,
    seed: u64,
    #[serde(default)]
    reference: ReferenceConfig,
    #[serde(default)]
    solver: SolverOptions,
    max_quadrature_points: Option<usize>,
    threads: Option<usize>,
}

fn zero_f() -> Nonlinearity {
    Nonlinearity::Zero
}

fn default_p() -> f64 {
    2.0
}

impl StudyFile {
    fn into_config(self) -> Result<StudyConfig> {
        let domain = match &self.extent {
            Some(e) => Domain::new(self.dim, e),
            None => Domain::unit(self.dim),
        }
        .map_err(|e| Error::Config(e.to_string()))?;
        let covariance = match (self.rho, self.sigmas, self.sqrt_matrix) {
            (Some(rho), None, None) => CovarianceSpec::PowerLaw { rho },
            (None, Some(sigmas), None) => CovarianceSpec::Diagonal { sigmas },
            (None, None, Some(sqrt_coeffs)) => CovarianceSpec::General { sqrt_coeffs },
            (None, None, None) => CovarianceSpec::white_noise(),
            _ => {
                return Err(Error::Config(
                    "give at most one of rho, sigmas, sqrt_matrix".into(),
                ))
            }
        };
        let levels = self
            .levels
            .iter()
            .map(|l| match *l {
                LevelSpec::Pair([n_modes, n]) => Level::new(n_modes, n),
                LevelSpec::Modes(n_modes) => Level::coupled(self.dim, n_modes),
            })
            .collect();
        let mut quadrature = QuadraturePolicy::default();
        if let Some(max) = self.max_quadrature_points {
            quadrature.max_points = max;
        }
        let config = StudyConfig {
            domain,
            covariance,
            nonlinearity: self.f,
            p: self.p,
            levels,
            samples: self.samples,
            master_seed: self.seed,
            reference: self.reference,
            solver: self.solver,
            quadrature,
            threads: self.threads,
        };
        config.validate().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
dim = 1
rho = 0.0
p = 2
levels = [[16, 16], [32, 32], [64, 64]]
samples = 10
seed = 7
reference = { n_mult = 4 }
"#;

    #[test]
    fn parses_toml() {
        let c = StudyConfig::from_toml_str(BASIC).unwrap();
        assert_eq!(c.levels[2], Level::new(64, 64));
        assert_eq!(c.reference_modes(), 256);
        assert_eq!(c.nonlinearity, Nonlinearity::Zero);
        assert_eq!(c.covariance, CovarianceSpec::PowerLaw { rho: 0.0 });
        assert_eq!(c.reference.mesh_mult, 4);
    }

    #[test]
    fn parses_json_with_nonlinearity_and_coupled_levels() {
        let c = StudyConfig::from_json_str(
            r#"{"dim": 2, "f": {"kind": "sin", "c": 3.0}, "levels": [16, 64, 256],
                "samples": 5, "seed": 1}"#,
        )
        .unwrap();
        assert_eq!(c.levels, vec![Level::new(16, 4), Level::new(64, 8), Level::new(256, 16)]);
        assert_eq!(c.nonlinearity, Nonlinearity::ScaledSin { c: 3.0 });
        assert_eq!(c.covariance, CovarianceSpec::white_noise());
    }

    #[test]
    fn rejects_bad_configs() {
        let cases = [
            BASIC.replace("rho = 0.0", "rho = 0.0\nsigmas = [1.0]"),
            BASIC.replace("[[16, 16], [32, 32], [64, 64]]", "[[32, 32], [16, 16]]"),
            BASIC.replace("samples = 10", "samples = 0"),
            BASIC.replace("p = 2", "p = 0.5"),
            BASIC.replace("n_mult = 4", "n_mult = 1"),
            BASIC.replace("rho = 0.0", "sigmas = [1.0, 0.5]"),
            BASIC.replace("dim = 1", "dim = 3"),
            BASIC.replace("seed = 7", "seed = 7\nbogus = 1"),
        ];
        for text in cases {
            assert!(matches!(StudyConfig::from_toml_str(&text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn coupled_levels() {
        assert_eq!(Level::coupled(1, 37), Level::new(37, 37));
        assert_eq!(Level::coupled(2, 1024), Level::new(1024, 32));
        assert_eq!(Level::coupled(2, 1), Level::new(1, 2));
    }
}
