//! CSV artifacts with fixed headers. Floats are written with 17 significant
//! digits so every value round-trips exactly.

use std::io::Write;
use std::path::Path;

use crate::attractor::StateCloud;
use crate::diagnostics::{e1_norm, energy_norm, EnergyReport, PerturbedEnergyReport};
use crate::error::{Error, Result};
use crate::solver::Trajectory;
use crate::splitting::SplitReport;

pub const ENERGY_HEADER: [&str; 9] = [
    "t",
    "e_norm",
    "e_norm_modified",
    "full_energy",
    "e1_norm",
    "dissipation_accum",
    "identity_residual",
    "e_alpha",
    "perturbed_residual",
];
pub const SPLIT_HEADER: [&str; 3] = ["t", "v_e_norm", "w_e_delta_norm"];
pub const CLOUD_HEADER: [&str; 4] = ["id", "t", "e_norm", "e1_norm"];
pub const CURVE_HEADER: [&str; 2] = ["t", "semidist"];

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows<W: Write>(out: W, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path)?))
}

pub fn write_energy_csv<W: Write>(out: W, energy: &[EnergyReport], perturbed: &[PerturbedEnergyReport]) -> Result<()> {
    if energy.len() != perturbed.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![energy.len()],
            actual: vec![perturbed.len()],
        });
    }
    write_rows(
        out,
        &ENERGY_HEADER,
        energy.iter().zip(perturbed).map(|(e, p)| {
            [
                e.t,
                e.e_norm,
                e.e_norm_modified,
                e.full_energy,
                e.e1_norm,
                e.dissipation_accum,
                e.identity_residual,
                p.e_alpha,
                p.residual,
            ]
            .into_iter()
            .map(fmt_f64)
            .collect()
        }),
    )
}

pub fn write_split_csv<W: Write>(out: W, report: &SplitReport) -> Result<()> {
    write_rows(
        out,
        &SPLIT_HEADER,
        report
            .v_e_series
            .iter()
            .zip(&report.w_e_delta_series)
            .map(|(v, w)| vec![fmt_f64(v.0), fmt_f64(v.1), fmt_f64(w.1)]),
    )
}

pub fn write_cloud_csv<W: Write>(out: W, cloud: &StateCloud) -> Result<()> {
    write_rows(
        out,
        &CLOUD_HEADER,
        cloud.states.iter().zip(&cloud.provenance).map(|(xi, (id, t))| {
            vec![
                id.to_string(),
                fmt_f64(*t),
                fmt_f64(energy_norm(xi)),
                fmt_f64(e1_norm(xi)),
            ]
        }),
    )
}

pub fn write_curve_csv<W: Write>(out: W, curve: &[(f64, f64)]) -> Result<()> {
    write_rows(
        out,
        &CURVE_HEADER,
        curve.iter().map(|(t, d)| vec![fmt_f64(*t), fmt_f64(*d)]),
    )
}

/// Generic table: named columns of equal length.
pub fn write_table<W: Write>(out: W, header: &[&str], columns: &[Vec<f64>]) -> Result<()> {
    let n = columns.first().map_or(0, Vec::len);
    if columns.len() != header.len() || columns.iter().any(|c| c.len() != n) {
        return Err(Error::ShapeMismatch {
            expected: vec![header.len(), n],
            actual: columns.iter().map(Vec::len).collect(),
        });
    }
    write_rows(
        out,
        header,
        (0..n).map(|i| columns.iter().map(|c| fmt_f64(c[i])).collect()),
    )
}

/// `t, u_1.., ut_1..` with coefficients in sorted mode order.
pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    let m = traj.basis().total_modes();
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=m).map(|k| format!("u_{k}")));
    header.extend((1..=m).map(|k| format!("ut_{k}")));
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    write_rows(
        out,
        &header_ref,
        traj.states().iter().enumerate().map(|(i, xi)| {
            std::iter::once(traj.time(i))
                .chain(xi.u.coeffs().iter().copied())
                .chain(xi.ut.coeffs().iter().copied())
                .map(fmt_f64)
                .collect()
        }),
    )
}

/// Opens `path` for writing (creating parent directories) and hands the
/// buffered writer to `f`.
pub fn to_file<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>,
{
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}
