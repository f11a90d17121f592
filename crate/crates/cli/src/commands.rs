//! Subcommand implementations. Each returns the process exit code: zero only
//! when the run converged and every mandatory check passed.

use std::fs;
use std::path::Path;

use periflow::{
    find_critical, solve_euler, solve_potential, sweep, CriticalOpts, EulerOpts, Grid,
    MonotoneCubic, SweepRecord, TruncationParams, VerificationReport,
};

use crate::config::{parse_config, RunConfig};
use crate::io::{self, RunMetadata};

pub type CliResult = Result<i32, Box<dyn std::error::Error>>;

fn load_config(path: &Path) -> Result<(RunConfig, String), Box<dyn std::error::Error>> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let cfg = parse_config(&text)?;
    Ok((cfg, text))
}

fn b_bar_of(cfg: &RunConfig) -> f64 {
    let samples = cfg.b0.samples();
    MonotoneCubic::new(0.0, 1.0, &samples).total_integral()
}

fn print_report(report: &VerificationReport) {
    for (k, v) in report.key_values() {
        println!("{k}={v}");
    }
}

pub fn cmd_solve_potential(config_path: &Path, out: Option<&Path>) -> CliResult {
    let (cfg, text) = load_config(config_path)?;
    let grid = Grid::new(&cfg.geometry, cfg.solver.nx, cfg.solver.ny)?;
    let opts = cfg.solver.picard_opts();
    let b_bar = b_bar_of(&cfg);
    let pot = solve_potential(
        &grid,
        &cfg.gas,
        b_bar,
        cfg.mass_flux,
        cfg.solver.theta0_frac,
        &opts,
    )?;
    let bprof = periflow::BernoulliProfile::constant(b_bar, cfg.mass_flux);
    let trunc = TruncationParams::new(pot.stream.theta0)?;
    let report = periflow::diagnostics::verify_solution(
        &grid,
        &cfg.geometry,
        &cfg.gas,
        &bprof,
        &trunc,
        &pot.stream,
        &pot.flow,
        &opts,
    )?;
    println!(
        "potential solve: {} iterations, residual {:.3e}, margin {:.3e}, sigma0 {:.6e}, sigma1 {:.6e}",
        pot.stream.iterations, pot.stream.residual, pot.stream.margin, pot.sigma0, pot.sigma1
    );
    print_report(&report);
    if let Some(path) = out.or(cfg.output.path.as_deref()) {
        let meta = RunMetadata {
            config_sha256: io::sha256_hex(&text),
            command: "solve-potential",
            nx: grid.nx,
            ny: grid.ny,
            mass_flux: cfg.mass_flux,
            iterations: pot.stream.iterations,
            residual: pot.stream.residual,
            margin: pot.stream.margin,
            theta0: pot.stream.theta0,
            near_sonic: pot.stream.near_sonic,
            t_iterations: None,
            t_residual: None,
            report: Some(&report),
        };
        io::write_fields(path, &grid, &cfg.geometry, &pot.stream, &pot.flow, &meta)?;
    }
    Ok(if report.mandatory_pass() { 0 } else { 1 })
}

pub fn cmd_solve_euler(config_path: &Path, out: Option<&Path>) -> CliResult {
    let (cfg, text) = load_config(config_path)?;
    let grid = Grid::new(&cfg.geometry, cfg.solver.nx, cfg.solver.ny)?;
    let b0 = cfg.b0.samples();
    let opts = EulerOpts {
        fp_tol: cfg.fixedpoint.tol,
        max_iter: cfg.fixedpoint.max_iter,
        damping: cfg.fixedpoint.damping,
        theta0_frac: cfg.solver.theta0_frac,
        picard: cfg.solver.picard_opts(),
        ..EulerOpts::default()
    };
    let sol = solve_euler(&grid, &cfg.gas, &b0, cfg.mass_flux, &opts)?;
    if sol.bprofile.eps > cfg.eps_warn {
        eprintln!(
            "warning: measured datum variation eps = {:.3e} exceeds eps_warn = {:.3e}",
            sol.bprofile.eps, cfg.eps_warn
        );
    }
    let trunc = TruncationParams::new(sol.stream.theta0)?;
    let report = periflow::diagnostics::verify_solution(
        &grid,
        &cfg.geometry,
        &cfg.gas,
        &sol.bprofile,
        &trunc,
        &sol.stream,
        &sol.flow,
        &opts.picard,
    )?;
    println!(
        "euler solve: {} T-iterations, T-residual {:.3e}, inner residual {:.3e}, margin {:.3e}",
        sol.t_iterations, sol.t_residual, sol.stream.residual, sol.stream.margin
    );
    print_report(&report);
    if let Some(path) = out.or(cfg.output.path.as_deref()) {
        let meta = RunMetadata {
            config_sha256: io::sha256_hex(&text),
            command: "solve-euler",
            nx: grid.nx,
            ny: grid.ny,
            mass_flux: cfg.mass_flux,
            iterations: sol.stream.iterations,
            residual: sol.stream.residual,
            margin: sol.stream.margin,
            theta0: sol.stream.theta0,
            near_sonic: sol.stream.near_sonic,
            t_iterations: Some(sol.t_iterations),
            t_residual: Some(sol.t_residual),
            report: Some(&report),
        };
        io::write_fields(path, &grid, &cfg.geometry, &sol.stream, &sol.flow, &meta)?;
    }
    Ok(if report.mandatory_pass() { 0 } else { 1 })
}

fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("m,max_mach,margin,converged\n");
    for r in records {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{}\n",
            r.m, r.max_mach, r.margin, r.converged
        ));
    }
    out
}

pub fn cmd_sweep(config_path: &Path, out: Option<&Path>, m_values: &[f64]) -> CliResult {
    if m_values.is_empty() {
        return Err("sweep needs --m-values".into());
    }
    let mut sorted = m_values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (cfg, _) = load_config(config_path)?;
    let grid = Grid::new(&cfg.geometry, cfg.solver.nx, cfg.solver.ny)?;
    let b_bar = b_bar_of(&cfg);
    let records = sweep(
        &grid,
        &cfg.gas,
        b_bar,
        &sorted,
        cfg.solver.theta0_frac,
        &cfg.solver.picard_opts(),
    )?;
    let csv = sweep_csv(&records);
    match out.or(cfg.output.path.as_deref()) {
        Some(path) => fs::write(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(if records.iter().all(|r| r.converged) {
        0
    } else {
        1
    })
}

pub fn cmd_critical(
    config_path: &Path,
    out: Option<&Path>,
    bracket_tol: Option<f64>,
    mach_delta: Option<f64>,
    m_start: Option<f64>,
) -> CliResult {
    let (cfg, _) = load_config(config_path)?;
    let grid = Grid::new(&cfg.geometry, cfg.solver.nx, cfg.solver.ny)?;
    let b_bar = b_bar_of(&cfg);
    let mut opts = CriticalOpts {
        theta0_frac: cfg.solver.theta0_frac,
        picard: cfg.solver.picard_opts(),
        m_start,
        ..CriticalOpts::default()
    };
    if let Some(t) = bracket_tol {
        opts.bracket_tol = t;
    }
    if let Some(d) = mach_delta {
        opts.mach_delta = d;
    }
    let bracket = find_critical(&grid, &cfg.geometry, &cfg.gas, b_bar, &opts)?;
    println!(
        "critical mass flux bracket: [{:.10e}, {:.10e}], estimate {:.10e}, relative width {:.3e}",
        bracket.m_lo,
        bracket.m_hi,
        bracket.estimate(),
        bracket.relative_width()
    );
    let csv = sweep_csv(&bracket.records);
    match out.or(cfg.output.path.as_deref()) {
        Some(path) => fs::write(path, &csv)?,
        None => print!("{csv}"),
    }
    Ok(0)
}

pub fn cmd_verify(config_path: &Path, out: Option<&Path>) -> CliResult {
    // Verification always runs the full rotational pipeline; a constant datum
    // reduces to the potential case after one T-step.
    cmd_solve_euler(config_path, out)
}
