use std::io::Write;
use std::path::{Path, PathBuf};

use crate::harness::study::{ConvergenceReport, TruncationReport};
use crate::Result;

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_GP: &str = "report.gp";
pub const TRUNCATION_CSV: &str = "truncation.csv";

/// `h,N,error,stderr`, one row per level.
pub fn write_report_csv(report: &ConvergenceReport, mut out: impl Write) -> Result<()> {
    writeln!(out, "h,N,error,stderr")?;
    for l in &report.levels {
        writeln!(out, "{},{},{},{}", l.h, l.n_modes, l.error, l.stderr)?;
    }
    Ok(())
}

/// Log-log plot of `csv` with error bars and, when known, a reference slope.
pub fn write_gnuplot(report: &ConvergenceReport, csv: &str, mut out: impl Write) -> Result<()> {
    writeln!(out, "set datafile separator ','")?;
    writeln!(out, "set logscale xy")?;
    writeln!(out, "set xlabel 'h'")?;
    writeln!(out, "set ylabel 'error'")?;
    writeln!(out, "set key top left")?;
    let mut plot = format!("plot '{csv}' using 1:3:4 skip 1 with yerrorlines title 'measured'");
    if let (Some(rate), Some(first)) = (report.predicted_rate, report.levels.first()) {
        let c = first.error / first.h.powf(rate);
        writeln!(out, "ref(x) = {c:e} * x**{rate}")?;
        plot.push_str(&format!(", ref(x) with lines dashtype 2 title 'h^{{{rate}}}'"));
    }
    writeln!(out, "{plot}")?;
    writeln!(out, "pause -1")?;
    Ok(())
}

/// Writes `report.csv` and `report.gp` into `dir`, returning their paths.
pub fn write_report_files(report: &ConvergenceReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let csv = dir.join(REPORT_CSV);
    let gp = dir.join(REPORT_GP);
    write_report_csv(report, std::io::BufWriter::new(std::fs::File::create(&csv)?))?;
    write_gnuplot(report, REPORT_CSV, std::io::BufWriter::new(std::fs::File::create(&gp)?))?;
    Ok((csv, gp))
}

pub fn write_truncation_csv(report: &TruncationReport, mut out: impl Write) -> Result<()> {
    writeln!(out, "N,error,stderr,mean_sq,mean_sq_stderr,expected_sq")?;
    for l in &report.levels {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            l.n_modes, l.error, l.stderr, l.mean_sq, l.mean_sq_stderr, l.expected_sq
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::study::LevelResult;

    fn report() -> ConvergenceReport {
        ConvergenceReport {
            levels: vec![
                LevelResult { h: 0.5, n_modes: 2, n_per_side: 2, error: 0.25, stderr: 0.01 },
                LevelResult { h: 0.25, n_modes: 4, n_per_side: 4, error: 0.0625, stderr: 0.002 },
            ],
            fitted_rate: None,
            predicted_rate: Some(2.0),
            pass: true,
            reference_modes: 32,
            samples: 4,
            p: 2.0,
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_report_csv(&report(), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "h,N,error,stderr\n0.5,2,0.25,0.01\n0.25,4,0.0625,0.002\n"
        );
    }

    #[test]
    fn gnuplot_has_reference_slope() {
        let mut buf = Vec::new();
        write_gnuplot(&report(), "report.csv", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("ref(x) = 1e0 * x**2"));
        assert!(text.contains("plot 'report.csv' using 1:3:4"));
    }

    #[test]
    fn files_written() {
        let dir = tempfile::tempdir().unwrap();
        let (csv, gp) = write_report_files(&report(), &dir.path().join("out")).unwrap();
        assert!(std::fs::read_to_string(csv).unwrap().starts_with("h,N,error,stderr\n"));
        assert!(gp.exists());
    }
}
