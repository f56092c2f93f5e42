//! CSV output. Every file starts with a `# s3 <kind> v<version>` line
//! followed by a header row.

use std::io::Write;

use crate::cocycle::UnstableFrame;
use crate::density::DensityField;
use crate::error::{Result, S3Error};
use crate::split::SplitFields;
use crate::torus::TorusPoint;

pub const CSV_SCHEMA_VERSION: u32 = 1;

fn io_err(e: impl std::fmt::Display) -> S3Error {
    S3Error::Io(e.to_string())
}

fn writer<W: Write>(mut w: W, kind: &str, header: &[&str]) -> Result<csv::Writer<W>> {
    writeln!(w, "# s3 {kind} v{CSV_SCHEMA_VERSION}").map_err(io_err)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header).map_err(io_err)?;
    Ok(out)
}

fn row<W: Write>(out: &mut csv::Writer<W>, values: &[f64], k: usize) -> Result<()> {
    let mut rec = Vec::with_capacity(values.len() + 1);
    rec.push(k.to_string());
    rec.extend(values.iter().map(|v| format!("{v:e}")));
    out.write_record(&rec).map_err(io_err)
}

pub fn write_orbit_csv<W: Write>(w: W, points: &[TorusPoint]) -> Result<()> {
    let mut out = writer(w, "orbit", &["k", "x", "y"])?;
    for (k, p) in points.iter().enumerate() {
        row(&mut out, &[p.x, p.y], k)?;
    }
    out.flush().map_err(io_err)
}

/// Rows from the first index with every frame quantity defined.
pub fn write_frame_csv<W: Write>(w: W, frame: &UnstableFrame) -> Result<()> {
    let mut out = writer(
        w,
        "frame",
        &["k", "x", "y", "Xu_x", "Xu_y", "h", "curv_x", "curv_y", "Xu_h"],
    )?;
    for k in frame.xu_h_start..frame.len() {
        let p = frame.points[k];
        let (u, c) = (frame.xu[k], frame.curvature[k]);
        row(&mut out, &[p.x, p.y, u[0], u[1], frame.h[k], c[0], c[1], frame.xu_h[k]], k)?;
    }
    out.flush().map_err(io_err)
}

pub fn write_split_csv<W: Write>(w: W, frame: &UnstableFrame, split: &SplitFields) -> Result<()> {
    let mut out = writer(
        w,
        "split",
        &["k", "x", "y", "V_x", "V_y", "dV_x", "dV_y", "Y_x", "Y_y", "a", "Xu_a", "residual"],
    )?;
    for k in split.start..split.len() {
        let p = frame.points[k];
        let (v, y) = (split.v[k], split.y[k].v);
        row(
            &mut out,
            &[p.x, p.y, v.v[0], v.v[1], v.dv[0], v.dv[1], y[0], y[1], split.a[k], split.xu_a[k], split.residual[k]],
            k,
        )?;
    }
    out.flush().map_err(io_err)
}

pub fn write_density_csv<W: Write>(w: W, frame: &UnstableFrame, density: &DensityField) -> Result<()> {
    let mut out = writer(w, "density", &["k", "x", "y", "rho0", "rho"])?;
    for k in density.start..frame.len() {
        let p = frame.points[k];
        row(&mut out, &[p.x, p.y, density.rho0[k], density.rho[k]], k)?;
    }
    out.flush().map_err(io_err)
}

/// Correlation terms `k, term, stderr`.
pub fn write_series_csv<W: Write>(w: W, terms: &[f64], stderr: &[f64]) -> Result<()> {
    let mut out = writer(w, "series", &["k", "term", "stderr"])?;
    for (k, (t, e)) in terms.iter().zip(stderr).enumerate() {
        row(&mut out, &[*t, *e], k)?;
    }
    out.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_csv_layout() {
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &[0.5, -0.25], &[0.1, 0.2]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# s3 series v1");
        assert_eq!(lines[1], "k,term,stderr");
        assert_eq!(lines[2], "0,5e-1,1e-1");
        assert_eq!(lines.len(), 4);
    }

    #[test]
    fn orbit_csv_round_trips_values() {
        let pts = vec![TorusPoint::new(0.1, 0.2), TorusPoint::new(0.4, 0.3)];
        let mut buf = Vec::new();
        write_orbit_csv(&mut buf, &pts).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let last: Vec<f64> = s.lines().last().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(last, vec![1.0, 0.4, 0.3]);
    }
}
