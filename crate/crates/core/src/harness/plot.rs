//! Companion CSV and gnuplot files for rate reports.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::sweep::{MetricRate, RateReport};
use crate::error::Result;

/// `param,sup_error` rows of one metric (valid points only).
pub fn write_metric_csv(rate: &MetricRate, mut w: impl Write) -> Result<()> {
    writeln!(w, "param,sup_error")?;
    for &(x, y) in &rate.points {
        writeln!(w, "{:e},{:e}", x.exp(), y.exp())?;
    }
    Ok(())
}

/// Gnuplot script plotting every metric's `<metric>.csv` on log-log axes with
/// its fitted line.
pub fn gnuplot_script(report: &RateReport) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset logscale xy\nset key left top\n");
    s.push_str("set xlabel 'parameter'\nset ylabel 'sup-in-time error'\n");
    s.push_str("set terminal pngcairo size 800,600\n");
    for r in &report.rates {
        let name = r.metric.name();
        let _ = writeln!(s, "set output 'rate_{name}.png'");
        let _ = write!(
            s,
            "plot 'rate_{name}.csv' skip 1 using 1:2 with linespoints title '{name}'"
        );
        if let Some(f) = r.fit {
            let _ = write!(
                s,
                ", exp({:.17e}) * x**({:.17e}) with lines dashtype 2 title 'slope {:.3}'",
                f.intercept, f.slope, f.slope
            );
        }
        s.push('\n');
    }
    s
}

/// Writes `rate_<metric>.csv` files and `rates.gp` into `dir`; returns the paths.
pub fn emit_plots(report: &RateReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for r in &report.rates {
        let path = dir.join(format!("rate_{}.csv", r.metric.name()));
        let mut buf = Vec::new();
        write_metric_csv(r, &mut buf)?;
        fs::write(&path, buf)?;
        out.push(path);
    }
    let gp = dir.join("rates.gp");
    fs::write(&gp, gnuplot_script(report))?;
    out.push(gp);
    Ok(out)
}
