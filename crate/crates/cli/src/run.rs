//! Subcommand dispatch.

use crate::config::{EvalPoint, FileConfig};
use crate::output;
use horizon_core::azema_kernel::{perpetual_gain, Kernel};
use horizon_core::fbp_solver;
use horizon_core::market_model::{make_uniform_grid, Horizon, ModelParams};
use horizon_core::mc_validator::{
    estimate_original_value, estimate_reduced_value, estimate_z, McConfig, McEstimate,
};
use horizon_core::perpetual_solver;
use horizon_core::y_law::TransitionLaw;
use horizon_core::Error as CoreError;
use serde::Serialize;
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Perpetual,
    Boundary,
    Value,
    Surface,
    Validate,
    Figures,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<CoreError> for CliError {
    fn from(err: CoreError) -> Self {
        match err {
            CoreError::Domain(m) => CliError::Domain(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let path = path.ok_or_else(|| {
        CliError::Config("this subcommand requires --config <path>".to_string())
    })?;
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{e}")))
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Ok(())
}

pub fn run(
    command: Command,
    config: Option<&Path>,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    match command {
        Command::Perpetual => run_perpetual(load_config(config)?, out_dir),
        Command::Boundary => run_boundary(load_config(config)?, out_dir),
        Command::Value => run_value(load_config(config)?, out_dir),
        Command::Surface => run_surface(load_config(config)?, out_dir),
        Command::Validate => run_validate(load_config(config)?, out_dir, seed_override),
        Command::Figures => run_figures(out_dir),
    }
}

#[derive(Serialize)]
struct PerpetualReport {
    b_star: f64,
    p1: f64,
    p2: f64,
    c1_coef: f64,
    c2_coef: f64,
}

fn run_perpetual(cfg: FileConfig, out_dir: &Path) -> Result<(), CliError> {
    let params = ModelParams {
        horizon: Horizon::Perpetual,
        ..cfg.params()
    };
    let sol = perpetual_solver::solve_boundary(&params)?;
    ensure_dir(out_dir)?;

    let report = PerpetualReport {
        b_star: sol.b_star,
        p1: sol.p1,
        p2: sol.p2,
        c1_coef: sol.c1_coef,
        c2_coef: sol.c2_coef,
    };
    fs::write(
        out_dir.join("perpetual.json"),
        serde_json::to_string_pretty(&report).expect("serializable report"),
    )?;

    let rows: Vec<(f64, f64, f64)> = cfg
        .y_grid_nodes()
        .iter()
        .map(|&y| {
            let v = perpetual_solver::perpetual_value(&sol, y).expect("y >= 1 grid");
            let g = perpetual_gain(&params, y).expect("y >= 1 grid");
            (y, v, g)
        })
        .collect();
    output::write_value_table_csv(&out_dir.join("perpetual_value.csv"), &rows)?;
    println!(
        "perpetual: b_star = {}, outputs in {}",
        output::fmt_f64(sol.b_star),
        out_dir.display()
    );
    Ok(())
}

fn solve_finite(cfg: &FileConfig) -> Result<(ModelParams, fbp_solver::BoundarySolve), CliError> {
    let params = cfg.params();
    if !params.horizon.is_finite() {
        return Err(CliError::Domain(
            "this subcommand needs a finite horizon T".to_string(),
        ));
    }
    let grid = make_uniform_grid(params.maturity(), cfg.grid_n)?;
    let solve = fbp_solver::solve_boundary(&params, &grid)?;
    Ok((params, solve))
}

fn run_boundary(cfg: FileConfig, out_dir: &Path) -> Result<(), CliError> {
    let (_, solve) = solve_finite(&cfg)?;
    ensure_dir(out_dir)?;
    output::write_boundary_csv(&out_dir.join("boundary.csv"), &solve.boundary)?;
    println!(
        "boundary: {} nodes, b(0) = {}, b(T) = {}, outputs in {}",
        solve.boundary.times().len(),
        output::fmt_f64(solve.boundary.values()[0]),
        output::fmt_f64(*solve.boundary.values().last().unwrap()),
        out_dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ValueReport {
    points: Vec<ValuePoint>,
}

#[derive(Serialize)]
struct ValuePoint {
    t: f64,
    y: f64,
    value: f64,
    gain: f64,
    region: char,
}

fn run_value(cfg: FileConfig, out_dir: &Path) -> Result<(), CliError> {
    let (params, solve) = solve_finite(&cfg)?;
    let kernel = Kernel::new(&params)?;
    let evals: Vec<EvalPoint> = if cfg.eval.is_empty() {
        vec![EvalPoint { t: 0.0, y: 1.0 }]
    } else {
        cfg.eval.clone()
    };
    let mut points = Vec::new();
    for ep in evals {
        let v = fbp_solver::value_at(&params, &solve.boundary, ep.t, ep.y)?;
        let g = if params.maturity() - ep.t < 1e-12 {
            0.0
        } else {
            kernel.eval_gain(ep.t, ep.y)?
        };
        let region = if ep.y < solve.boundary.eval(ep.t) { 'C' } else { 'D' };
        points.push(ValuePoint {
            t: ep.t,
            y: ep.y,
            value: v,
            gain: g,
            region,
        });
    }
    ensure_dir(out_dir)?;
    fs::write(
        out_dir.join("value.json"),
        serde_json::to_string_pretty(&ValueReport { points }).expect("serializable report"),
    )?;
    println!("value: outputs in {}", out_dir.display());
    Ok(())
}

fn run_surface(cfg: FileConfig, out_dir: &Path) -> Result<(), CliError> {
    let (params, solve) = solve_finite(&cfg)?;
    let y_grid = cfg.y_grid_nodes();
    let surface = fbp_solver::build_surface(&params, &solve.boundary, &y_grid)?;
    ensure_dir(out_dir)?;
    output::write_boundary_csv(&out_dir.join("boundary.csv"), &solve.boundary)?;
    output::write_surface_csv(&out_dir.join("surface.csv"), &surface)?;
    println!("surface: outputs in {}", out_dir.display());
    Ok(())
}

#[derive(Serialize)]
struct McReportJson {
    estimate: f64,
    std_error: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    bias_band: f64,
}

#[derive(Serialize)]
struct ValidateReport {
    z_checks: Vec<ZCheck>,
    survival_checks: Vec<SurvivalCheck>,
    reduced_value: McComparison,
    original_value: McComparison,
    theta_sensitivity: Vec<(f64, f64)>,
    all_pass: bool,
}

#[derive(Serialize)]
struct ZCheck {
    t: f64,
    y: f64,
    analytic: f64,
    mc: McReportJson,
    pass: bool,
}

#[derive(Serialize)]
struct SurvivalCheck {
    u: f64,
    y0: f64,
    z: f64,
    analytic: f64,
    mc: McReportJson,
    pass: bool,
}

#[derive(Serialize)]
struct McComparison {
    t: f64,
    y: f64,
    analytic: f64,
    mc: McReportJson,
    pass: bool,
}

fn to_json(est: &McEstimate, n_steps: usize, bias_band: f64) -> McReportJson {
    McReportJson {
        estimate: est.mean,
        std_error: est.std_error,
        n_paths: est.n_paths,
        n_steps,
        seed: est.seed,
        bias_band,
    }
}

/// Values below this are treated as zero when comparing simulation against
/// the analytic result; degenerate parameter sets produce prices far beneath
/// any statistical resolution.
const PASS_FLOOR: f64 = 1e-12;

/// Three-sigma gate for a probability estimate. The binomial standard error
/// at the analytic value covers the rare-event case where the empirical
/// standard error degenerates to zero.
fn proportion_pass(analytic: f64, est: &McEstimate) -> bool {
    let binom_se = (analytic * (1.0 - analytic) / est.n_paths as f64).sqrt();
    (est.mean - analytic).abs() <= 3.0 * est.std_error.max(binom_se) + PASS_FLOOR
}

fn run_validate(
    cfg: FileConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let (params, solve) = solve_finite(&cfg)?;
    let kernel = Kernel::new(&params)?;
    let maturity = params.maturity();
    let mut mc = McConfig {
        n_paths: cfg.mc.n_paths,
        n_steps: cfg.mc.n_steps,
        seed: seed_override.unwrap_or(cfg.mc.seed),
        bridge: true,
    };
    let mut all_pass = true;

    // Survival kernel vs simulation at a few interior points.
    let mut z_checks = Vec::new();
    for (frac, y) in [(0.5, 2.0), (0.2, 1.5), (0.8, 3.0)] {
        let t = frac * maturity;
        let analytic = kernel.eval_z(t, y)?;
        let est = estimate_z(&params, t, y, &mc)?;
        let pass = proportion_pass(analytic, &est);
        all_pass &= pass;
        z_checks.push(ZCheck {
            t,
            y,
            analytic,
            mc: to_json(&est, mc.n_steps, 0.0),
            pass,
        });
    }

    // Transition law vs simulation.
    let mut survival_checks = Vec::new();
    for (u_frac, y0, z) in [(0.1, 1.0, 1.5), (0.25, 1.5, 2.0), (0.5, 3.0, 4.0)] {
        let u = u_frac * maturity;
        let law = TransitionLaw::new(&params, u, y0)?;
        let analytic = law.survival(z)?;
        let est =
            horizon_core::mc_validator::estimate_survival(&params, y0, u, z, &mc)?;
        let pass = proportion_pass(analytic, &est);
        all_pass &= pass;
        survival_checks.push(SurvivalCheck {
            u,
            y0,
            z,
            analytic,
            mc: to_json(&est, mc.n_steps, 0.0),
            pass,
        });
    }

    // Reduced-problem value under the solved boundary.
    let (t_red, y_red) = (0.25 * maturity, 1.5);
    let analytic_red = fbp_solver::value_at(&params, &solve.boundary, t_red, y_red)?;
    let est_red = estimate_reduced_value(&params, &solve.boundary, t_red, y_red, &mc)?;
    let pass_red = (est_red.mean - analytic_red).abs() <= 3.0 * est_red.std_error + PASS_FLOOR;
    all_pass &= pass_red;

    // End-to-end original-measure value at (0, 1).
    mc.seed = mc.seed.wrapping_add(1);
    let analytic_orig = fbp_solver::value_at(&params, &solve.boundary, 0.0, 1.0)?;
    let orig = estimate_original_value(&params, &solve.boundary, &mc)?;
    let pass_orig = (orig.estimate.mean - analytic_orig).abs()
        <= 3.0 * orig.estimate.std_error + orig.bias_band + PASS_FLOOR;
    all_pass &= pass_orig;

    let report = ValidateReport {
        z_checks,
        survival_checks,
        reduced_value: McComparison {
            t: t_red,
            y: y_red,
            analytic: analytic_red,
            mc: to_json(&est_red, mc.n_steps, 0.0),
            pass: pass_red,
        },
        original_value: McComparison {
            t: 0.0,
            y: 1.0,
            analytic: analytic_orig,
            mc: to_json(&orig.estimate, mc.n_steps, orig.bias_band),
            pass: pass_orig,
        },
        theta_sensitivity: orig.theta_sensitivity,
        all_pass,
    };
    ensure_dir(out_dir)?;
    fs::write(
        out_dir.join("validate.json"),
        serde_json::to_string_pretty(&report).expect("serializable report"),
    )?;
    println!(
        "validate: all_pass = {all_pass}, report in {}",
        out_dir.display()
    );
    if !all_pass {
        return Err(CliError::Numerical(
            "validation report contains failing comparisons".to_string(),
        ));
    }
    Ok(())
}

/// Reference parameter sets used by the two standard plots: the perpetual
/// value/gain map for (L=4, r=0.02, sigma=0.3, lambda=0.5) and the
/// finite-horizon boundary for (r=0.02, sigma=0.3, lambda=0.4, L=5, T=10).
fn run_figures(out_dir: &Path) -> Result<(), CliError> {
    ensure_dir(out_dir)?;

    let p1 = ModelParams::new(0.02, 0.3, 0.5, 4.0, Horizon::Perpetual);
    let sol = perpetual_solver::solve_boundary(&p1)?;
    let rows: Vec<(f64, f64, f64)> = (0..=400)
        .map(|j| 1.0 + (2.0 * sol.b_star - 1.0) * j as f64 / 400.0)
        .map(|y| {
            let v = perpetual_solver::perpetual_value(&sol, y).expect("y >= 1 grid");
            let g = perpetual_gain(&p1, y).expect("y >= 1 grid");
            (y, v, g)
        })
        .collect();
    output::write_value_table_csv(&out_dir.join("figure1_value_map.csv"), &rows)?;

    let p2 = ModelParams::new(0.02, 0.3, 0.4, 5.0, Horizon::Finite(10.0));
    let grid = make_uniform_grid(10.0, 100)?;
    let solve = fbp_solver::solve_boundary(&p2, &grid)?;
    output::write_boundary_csv(&out_dir.join("figure2_boundary.csv"), &solve.boundary)?;

    println!(
        "figures: plot data in {} (b_star = {}, b(0) = {})",
        out_dir.display(),
        output::fmt_f64(sol.b_star),
        output::fmt_f64(solve.boundary.values()[0])
    );
    Ok(())
}
