use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spdefem::covariance::sample_projected_noise;
use spdefem::harness::{
    predicted_rate, run_study, run_truncation_study, write_report_files, write_truncation_csv, Coupling,
    StudyConfig, TRUNCATION_CSV,
};
use spdefem::rng::NoiseStream;
use spdefem::{CovarianceSpec, Domain, EigenBasis, Error, Result};

/// Finite element convergence studies for semilinear elliptic SPDEs.
#[derive(Debug, Parser)]
#[command(name = "spdefem", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dirichlet eigenvalues and Weyl ratios on the unit interval or square.
    Eigen {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        count: usize,
        #[command(flatten)]
        out: CsvOut,
    },
    /// Coefficients of one projected power-law noise sample.
    Sample {
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        rho: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[command(flatten)]
        out: CsvOut,
    },
    /// Coupled Monte Carlo convergence study; writes report.csv and report.gp.
    Converge {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Exact spectral truncation study for f = 0; writes truncation.csv.
    Truncate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Predicted strong convergence rate in h under the coupling h = N^{-1/d}.
    Rates {
        #[arg(long)]
        dim: usize,
        #[arg(long, allow_negative_numbers = true)]
        rho: f64,
        /// Polynomial degree of the elements.
        #[arg(long, default_value_t = 1)]
        order: usize,
    },
}

#[derive(Debug, Args)]
struct CsvOut {
    /// Write CSV here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl CsvOut {
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.csv {
            Some(path) => Box::new(std::io::BufWriter::new(std::fs::File::create(path)?)),
            None => Box::new(std::io::stdout().lock()),
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Eigen { dim, count, out } => {
            let basis = EigenBasis::build(Domain::unit(dim)?, count)?;
            let mut w = out.writer()?;
            writeln!(w, "k,lambda,weyl_ratio")?;
            for (p, r) in basis.pairs().iter().zip(basis.weyl_ratios()) {
                writeln!(w, "{},{},{}", p.index, p.lambda, r)?;
            }
            w.flush()?;
        }
        Command::Sample { dim, rho, n, seed, stream, out } => {
            let basis = EigenBasis::build(Domain::unit(dim)?, n)?;
            let q = CovarianceSpec::PowerLaw { rho };
            let sample = sample_projected_noise(&q, &basis, n, &mut NoiseStream::new(seed, stream))?;
            let mut w = out.writer()?;
            writeln!(w, "m,coeff")?;
            for (m, c) in sample.coeffs.iter().enumerate() {
                writeln!(w, "{},{}", m + 1, c)?;
            }
            w.flush()?;
        }
        Command::Converge { config, out } => {
            let config = StudyConfig::from_path(&config)?;
            let report = run_study(&config)?;
            let (csv, gp) = write_report_files(&report, &out)?;
            for l in &report.levels {
                println!("h={} N={} error={:e} stderr={:e}", l.h, l.n_modes, l.error, l.stderr);
            }
            println!("fitted_rate={}", show(report.fitted_rate));
            println!("predicted_rate={}", show(report.predicted_rate));
            println!("pass={}", report.pass);
            println!("wrote {} and {}", csv.display(), gp.display());
        }
        Command::Truncate { config, out } => {
            let config = StudyConfig::from_path(&config)?;
            let report = run_truncation_study(&config)?;
            std::fs::create_dir_all(&out)?;
            let path = out.join(TRUNCATION_CSV);
            write_truncation_csv(&report, std::io::BufWriter::new(std::fs::File::create(&path)?))?;
            println!("fitted_rate={}", show(report.fitted_rate));
            println!("predicted_rate={}", show(report.predicted_rate));
            println!("pass={}", report.pass);
            println!("wrote {}", path.display());
        }
        Command::Rates { dim, rho, order } => {
            let r = predicted_rate(dim, rho, order, Coupling::Optimal)?;
            let rate = r.coupled_rate.ok_or_else(|| Error::InvalidArgument("no coupled rate".into()))?;
            println!("predicted_rate={rate}");
        }
    }
    Ok(())
}

fn show(x: Option<f64>) -> String {
    x.map_or_else(|| "none".to_string(), |v| format!("{v:.4}"))
}
