//! Field serialization: CSV with 17 significant digits (exact f64 round
//! trips) plus a sidecar metadata file.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use periflow::{FlowState, Grid, NozzleGeometry, StreamField, VerificationReport};

pub const FIELD_HEADER: &str = "x1,x2,psi,rho,u,v,mach";

/// Serialize the solution fields, row-major over the grid (`x1` outer, `x2`
/// inner) including the periodic closure column at `x1 = L`.
pub fn fields_to_csv(
    grid: &Grid,
    geom: &NozzleGeometry,
    stream: &StreamField,
    flow: &FlowState,
) -> String {
    let mut out = String::new();
    out.push_str(FIELD_HEADER);
    out.push('\n');
    let (nx, ny) = (grid.nx, grid.ny);
    for i in 0..=nx {
        let iw = i % nx;
        let xi = i as f64 * grid.h_xi;
        for j in 0..=ny {
            let ((x1, x2), _) = geom.map_to_physical(xi, grid.eta(j));
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                x1,
                x2,
                stream.psi[[iw, j]],
                flow.rho[[iw, j]],
                flow.u[[iw, j]],
                flow.v[[iw, j]],
                flow.mach[[iw, j]],
            )
            .expect("string write");
        }
    }
    out
}

/// Parsed CSV row of a field file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldRow {
    pub x1: f64,
    pub x2: f64,
    pub psi: f64,
    pub rho: f64,
    pub u: f64,
    pub v: f64,
    pub mach: f64,
}

pub fn read_fields(text: &str) -> Result<Vec<FieldRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == FIELD_HEADER => {}
        other => return Err(format!("bad header: {other:?}")),
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| format!("row {}: {e}", k + 2))?;
        if vals.len() != 7 {
            return Err(format!("row {}: expected 7 columns", k + 2));
        }
        rows.push(FieldRow {
            x1: vals[0],
            x2: vals[1],
            psi: vals[2],
            rho: vals[3],
            u: vals[4],
            v: vals[5],
            mach: vals[6],
        });
    }
    Ok(rows)
}

/// Everything the sidecar records about a run.
pub struct RunMetadata<'a> {
    pub config_sha256: String,
    pub command: &'a str,
    pub nx: usize,
    pub ny: usize,
    pub mass_flux: f64,
    pub iterations: usize,
    pub residual: f64,
    pub margin: f64,
    pub theta0: f64,
    pub near_sonic: bool,
    pub t_iterations: Option<usize>,
    pub t_residual: Option<f64>,
    pub report: Option<&'a VerificationReport>,
}

pub fn metadata_to_string(meta: &RunMetadata) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push('=');
        out.push_str(&v);
        out.push('\n');
    };
    kv("config_sha256", meta.config_sha256.clone());
    kv("command", meta.command.to_string());
    kv("nx", meta.nx.to_string());
    kv("ny", meta.ny.to_string());
    kv("mass_flux", format!("{:.16e}", meta.mass_flux));
    kv("iterations", meta.iterations.to_string());
    kv("residual", format!("{:.16e}", meta.residual));
    kv("margin", format!("{:.16e}", meta.margin));
    kv("theta0", format!("{:.16e}", meta.theta0));
    kv("near_sonic", meta.near_sonic.to_string());
    if let Some(ti) = meta.t_iterations {
        kv("t_iterations", ti.to_string());
    }
    if let Some(tr) = meta.t_residual {
        kv("t_residual", format!("{:.16e}", tr));
    }
    if let Some(report) = meta.report {
        for (k, v) in report.key_values() {
            kv(k, v);
        }
    }
    out
}

/// Write the field CSV and its `<path>.meta` sidecar.
pub fn write_fields(
    path: &Path,
    grid: &Grid,
    geom: &NozzleGeometry,
    stream: &StreamField,
    flow: &FlowState,
    meta: &RunMetadata,
) -> io::Result<PathBuf> {
    fs::write(path, fields_to_csv(grid, geom, stream, flow))?;
    let meta_path = sidecar_path(path);
    fs::write(&meta_path, metadata_to_string(meta))?;
    Ok(meta_path)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_os_string();
    os.push(".meta");
    PathBuf::from(os)
}

pub fn sha256_hex(text: &str) -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
