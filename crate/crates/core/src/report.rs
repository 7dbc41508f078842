//! CSV writers with fixed headers. Floats use shortest round-trip
//! exponent notation so identical inputs give byte-identical files.

use std::io::Write;
use std::path::Path;

use crate::heat::{GammaRow, VerifyReport};
use crate::matfmt::format_entry;
use crate::maxreg::MaxRegReport;
use crate::spectrum::SpectralData;
use crate::synthesis::{FeedbackLaw, RankReport};
use crate::{Result, C64};

pub const MAXREG_HEADER: [&str; 7] = ["model", "mode", "p", "T", "C_estimate", "imag_sup", "verdict"];
pub const SPECTRUM_HEADER: [&str; 4] = ["k", "re_lambda", "im_lambda", "unstable"];
pub const FEEDBACK_HEADER: [&str; 4] = ["k", "mode", "target", "achieved"];
pub const RANK_HEADER: [&str; 5] = ["k", "re_lambda", "im_lambda", "hautus_margin", "status"];
pub const GAMMA_HEADER: [&str; 3] = ["n", "gamma", "norm"];
pub const VERIFY_HEADER: [&str; 3] = ["check", "status", "detail"];

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    wr.write_record(header)?;
    Ok(wr)
}

/// One row per (p, T) pair.
pub fn write_maxreg<W: Write>(w: W, model: &str, mode: &str, reports: &[MaxRegReport]) -> Result<()> {
    let mut wr = writer(w, &MAXREG_HEADER)?;
    for r in reports {
        for (t, c) in r.t_grid.iter().zip(&r.c_estimates) {
            wr.write_record([
                model.to_string(),
                mode.to_string(),
                num(r.p),
                num(*t),
                num(*c),
                opt(r.imag_axis_sup),
                r.verdict.to_string(),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}

pub fn write_spectrum<W: Write>(w: W, sd: &SpectralData) -> Result<()> {
    let mut wr = writer(w, &SPECTRUM_HEADER)?;
    for (i, z) in sd.eigenvalues.iter().enumerate() {
        let unstable = i < sd.unstable_count;
        wr.write_record([(i + 1).to_string(), num(z.re), num(z.im), unstable.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// Targets against the achieved closed-loop eigenvalues, paired in order.
pub fn write_feedback<W: Write>(w: W, law: &FeedbackLaw, achieved: &[C64]) -> Result<()> {
    let mut wr = writer(w, &FEEDBACK_HEADER)?;
    for (i, t) in law.targets.iter().enumerate() {
        let a = achieved.get(i).map_or_else(String::new, |z| format_entry(*z));
        wr.write_record([(i + 1).to_string(), law.mode.to_string(), format_entry(*t), a])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_rank<W: Write>(w: W, r: &RankReport) -> Result<()> {
    let mut wr = writer(w, &RANK_HEADER)?;
    for (i, (z, m)) in r.eigenvalues.iter().zip(&r.margins).enumerate() {
        let status = if *m > r.tol { "PASS" } else { "FAIL" };
        wr.write_record([(i + 1).to_string(), num(z.re), num(z.im), num(*m), status.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_gamma_scan<W: Write>(w: W, rows: &[GammaRow]) -> Result<()> {
    let mut wr = writer(w, &GAMMA_HEADER)?;
    for r in rows {
        wr.write_record([r.n.to_string(), num(r.gamma), num(r.norm)])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_verify<W: Write>(w: W, r: &VerifyReport) -> Result<()> {
    let mut wr = writer(w, &VERIFY_HEADER)?;
    for c in &r.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        wr.write_record([c.name.as_str(), status, c.detail.as_str()])?;
    }
    wr.flush()?;
    Ok(())
}

/// Writes `bytes` next to `path` and renames over it, so readers never see
/// a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })?;
    Ok(())
}
