//! Deterministic CSV/JSON writers: 17 significant digits everywhere so that
//! re-running a config reproduces byte-identical artifacts and values
//! round-trip exactly.

use horizon_core::fbp_solver::{Boundary, ValueSurface};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_boundary_csv(path: &Path, boundary: &Boundary) -> io::Result<()> {
    let mut out = String::from("t,b\n");
    for (t, b) in boundary.times().iter().zip(boundary.values()) {
        let _ = writeln!(out, "{},{}", fmt_f64(*t), fmt_f64(*b));
    }
    fs::write(path, out)
}

pub fn write_surface_csv(path: &Path, surface: &ValueSurface) -> io::Result<()> {
    let mut out = String::from("t,y,V,G,region\n");
    for i in 0..surface.times.len() {
        for j in 0..surface.y_grid.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(surface.times[i]),
                fmt_f64(surface.y_grid[j]),
                fmt_f64(surface.values[i][j]),
                fmt_f64(surface.gains[i][j]),
                surface.region(i, j)
            );
        }
    }
    fs::write(path, out)
}

/// Two-column map `y -> (V, G)` used by the perpetual table and figures.
pub fn write_value_table_csv(path: &Path, rows: &[(f64, f64, f64)]) -> io::Result<()> {
    let mut out = String::from("y,V,G\n");
    for (y, v, g) in rows {
        let _ = writeln!(out, "{},{},{}", fmt_f64(*y), fmt_f64(*v), fmt_f64(*g));
    }
    fs::write(path, out)
}
