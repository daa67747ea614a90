//! Result files: per-step series and diagnostics as CSV, convergence
//! tables, and legacy ASCII VTK snapshots. Numbers are written with
//! Rust's locale-independent formatting.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::scheme::{Spaces, State};
use crate::study::{DiagnosticRow, ErrorReport, Norm, SeriesRow, Variable};

#[derive(Debug, Error)]
#[error("{}: {source}", path.display())]
pub struct OutputError {
    pub path: PathBuf,
    #[source]
    pub source: std::io::Error,
}

fn num(v: f64) -> String {
    format!("{v:.15e}")
}

/// Writes `contents`, creating missing parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<(), OutputError> {
    let err = |source| OutputError { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(err)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(err)?);
    f.write_all(contents.as_bytes()).map_err(err)?;
    f.flush().map_err(err)
}

pub const SERIES_HEADER: &str = "t,int_n,int_w,int_c,l2_u";

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut out = format!("{SERIES_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", num(r.t), num(r.int_n), num(r.int_w), num(r.int_c), num(r.l2_u));
    }
    out
}

pub fn write_series_csv(rows: &[SeriesRow], path: &Path) -> Result<(), OutputError> {
    write_file(path, &series_csv(rows))
}

pub const DIAGNOSTICS_HEADER: &str = "t,s_l10_3,c_l10_3,max_div,min_n,min_w";

pub fn diagnostics_csv(rows: &[DiagnosticRow]) -> String {
    let mut out = format!("{DIAGNOSTICS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            num(r.t),
            num(r.s_norm),
            num(r.c_norm),
            num(r.max_divergence),
            num(r.min_n),
            num(r.min_w)
        );
    }
    out
}

pub fn write_diagnostics_csv(rows: &[DiagnosticRow], path: &Path) -> Result<(), OutputError> {
    write_file(path, &diagnostics_csv(rows))
}

pub const CONVERGENCE_HEADER: &str = "resolution,var,norm,error,order";

/// One line per row, variable and norm. Failed rows carry `NaN` errors;
/// the order column is empty where undefined.
pub fn convergence_csv(report: &ErrorReport) -> String {
    let mut out = format!("{CONVERGENCE_HEADER}\n");
    for var in Variable::ALL {
        for norm in Norm::ALL.into_iter().filter(|n| n.reported_for(var)) {
            let orders = report.orders(var, norm);
            for (i, row) in report.rows.iter().enumerate() {
                let error = report.error(i, var, norm).map_or_else(|| "NaN".to_string(), num);
                let order = orders[i].map_or_else(String::new, |o| format!("{o:.4}"));
                let _ = writeln!(out, "{},{var},{norm},{error},{order}", row.label);
            }
        }
    }
    out
}

pub fn write_convergence_csv(report: &ErrorReport, path: &Path) -> Result<(), OutputError> {
    write_file(path, &convergence_csv(report))
}

/// Vertex values of component `c` of a field; bubble coefficients are
/// skipped.
fn vertex_values<'a>(space: &crate::fespace::FeSpace, coeffs: &'a [f64], c: usize) -> &'a [f64] {
    let nv = space.mesh().num_vertices();
    let off = c * space.component_block();
    &coeffs[off..off + nv]
}

/// Legacy VTK (3.0, ASCII) unstructured grid with point data.
pub fn vtk_snapshot(spaces: &Spaces, state: &State) -> String {
    let mesh = &spaces.mesh;
    let (nv, nt) = (mesh.num_vertices(), mesh.num_triangles());
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "chemofluid step {} t={:?}", state.m, state.t);
    let _ = writeln!(out, "ASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {nv} double");
    for p in mesh.vertices() {
        let _ = writeln!(out, "{} {} 0", num(p[0]), num(p[1]));
    }
    let _ = writeln!(out, "CELLS {nt} {}", 4 * nt);
    for t in mesh.triangles() {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nt}");
    for _ in 0..nt {
        let _ = writeln!(out, "5");
    }
    let _ = writeln!(out, "POINT_DATA {nv}");
    for (name, space, coeffs) in [
        ("n", &spaces.scalar, &state.n),
        ("w", &spaces.scalar, &state.w),
        ("c", &spaces.scalar, &state.c),
        ("pi", &spaces.pressure, &state.pi),
    ] {
        let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
        for v in vertex_values(space, coeffs, 0) {
            let _ = writeln!(out, "{}", num(*v));
        }
    }
    for (name, space, coeffs) in [("s", &spaces.flux, &state.s), ("u", &spaces.velocity, &state.u)] {
        let _ = writeln!(out, "VECTORS {name} double");
        let (x, y) = (vertex_values(space, coeffs, 0), vertex_values(space, coeffs, 1));
        for (a, b) in x.iter().zip(y) {
            let _ = writeln!(out, "{} {} 0", num(*a), num(*b));
        }
    }
    out
}

pub fn write_vtk_snapshot(spaces: &Spaces, state: &State, path: &Path) -> Result<(), OutputError> {
    write_file(path, &vtk_snapshot(spaces, state))
}
