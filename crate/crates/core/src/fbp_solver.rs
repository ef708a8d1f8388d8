//! Finite-horizon free boundary via a nonlinear Volterra integral equation.
//!
//! The optimal stopping boundary is the unique decreasing solution of
//!
//! ```text
//! (b(t) - L) Z(t, b(t)) = -Int_0^{T-t} e^{-lambda u}
//!         E_{y0 = b(t)}[ H(t+u, Y_u) 1{Y_u >= b(t+u)} ] du,
//! ```
//!
//! with `b(T) = L`. The sweep runs backward from the terminal node: at each
//! grid time the future of the boundary is known, the right-hand side is a
//! nested quadrature (time integral of a law-weighted kernel expectation),
//! and the node value is a bracketed root of the residual on
//! `(L, b_star]` with `b_star` the perpetual boundary. The value function
//! reuses the same representation with the solved boundary.

use crate::azema_kernel::{check_h_time_monotonicity, Kernel};
use crate::error::{Error, Result};
use crate::market_model::{validate, ModelParams, TimeGrid};
use crate::numerics::{find_root_bracketed, integrate, QuadConfig, RootConfig};
use crate::perpetual_solver;
use crate::y_law::TransitionLaw;
use rayon::prelude::*;

/// Node spacing fraction used as the bracket floor above the strike.
const FLOOR_EPS: f64 = 1e-15;

/// Monotone-decreasing piecewise-linear boundary on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    times: Vec<f64>,
    values: Vec<f64>,
    strike: f64,
}

impl Boundary {
    /// Builds a boundary from nodes, checking shape invariants: strictly
    /// increasing times, values never below the strike, non-increasing in
    /// time.
    pub fn new(times: Vec<f64>, values: Vec<f64>, strike: f64) -> Result<Self> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(Error::domain("boundary needs matching times/values, len >= 2"));
        }
        if !times.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::domain("boundary times must be strictly increasing"));
        }
        if values.iter().any(|v| *v < strike) {
            return Err(Error::domain("boundary values must not drop below the strike"));
        }
        if !values.windows(2).all(|w| w[1] <= w[0] + 1e-10) {
            return Err(Error::Monotonicity(
                "boundary values must be non-increasing in time".into(),
            ));
        }
        Ok(Boundary {
            times,
            values,
            strike,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Piecewise-linear evaluation, clamped to the end values outside the
    /// node range.
    pub fn eval(&self, t: f64) -> f64 {
        let times = &self.times;
        if t <= times[0] {
            return self.values[0];
        }
        if t >= *times.last().unwrap() {
            return *self.values.last().unwrap();
        }
        // Binary search for the segment containing t.
        let idx = match times.binary_search_by(|probe| probe.total_cmp(&t)) {
            Ok(i) => return self.values[i],
            Err(i) => i,
        };
        let (t0, t1) = (times[idx - 1], times[idx]);
        let (v0, v1) = (self.values[idx - 1], self.values[idx]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }
}

/// Quadrature configuration pair used by the integral representation.
#[derive(Debug, Clone, Copy)]
pub struct FbpConfig {
    /// Time integral over `u`.
    pub outer: QuadConfig,
    /// Expectation over the transition law at fixed `u`.
    pub inner: QuadConfig,
    /// Root tolerance for each node of the backward sweep.
    pub root: RootConfig,
}

impl Default for FbpConfig {
    fn default() -> Self {
        FbpConfig {
            outer: QuadConfig {
                rel_tol: 1e-8,
                abs_tol: 1e-300,
                max_subdivisions: 200,
            },
            inner: QuadConfig {
                rel_tol: 1e-8,
                abs_tol: 1e-300,
                max_subdivisions: 200,
            },
            root: RootConfig {
                abs_tol: 5e-13,
                max_iter: 120,
            },
        }
    }
}

/// Diagnostics of one backward sweep.
#[derive(Debug, Clone, Default)]
pub struct SolveDiagnostics {
    /// Worst `|residual| / max(|lhs|, |rhs|)` over resolved nodes.
    pub max_rel_residual: f64,
    /// Nodes pinned to the bracket floor because the root sits below the
    /// resolvable distance from the strike.
    pub clamped_nodes: usize,
    /// Quadrature panels that exhausted their subdivision budget.
    pub unconverged_panels: usize,
    /// Nodes that fell back to damped fixed-point iteration.
    pub picard_nodes: usize,
}

/// Boundary plus context produced by [`solve_boundary`].
#[derive(Debug, Clone)]
pub struct BoundarySolve {
    pub boundary: Boundary,
    /// Perpetual boundary for the same parameters (upper bound and bracket).
    pub b_star: f64,
    pub diagnostics: SolveDiagnostics,
}

struct SolverCtx {
    params: ModelParams,
    kernel: Kernel,
    maturity: f64,
    cfg: FbpConfig,
}

impl SolverCtx {
    fn new(params: &ModelParams, cfg: FbpConfig) -> Result<Self> {
        validate(params)?;
        let kernel = Kernel::new(params)?;
        Ok(SolverCtx {
            params: *params,
            kernel,
            maturity: params.maturity(),
            cfg,
        })
    }

    /// `Int e^{-lambda u} E_{y0}[H(t+u, Y_u) 1{Y_u >= b(t+u)}] du` over the
    /// breakpoint intervals `0 = k_0 < k_1 < ... < k_m = T - t` given in
    /// `kinks` (offsets from `t`). Returns the integral and the count of
    /// unconverged panels.
    fn kernel_time_integral<B>(&self, t: f64, y0: f64, b_at: &B, kinks: &[f64]) -> (f64, usize)
    where
        B: Fn(f64) -> f64 + Sync,
    {
        let lambda = self.params.lambda;
        let pieces: Vec<(f64, bool)> = kinks
            .par_windows(2)
            .map(|w| {
                let (u_lo, u_hi) = (w[0], w[1]);
                let res = integrate(
                    |u| {
                        let s = t + u;
                        let law = TransitionLaw::new(&self.params, u, y0)
                            .expect("validated parameters and u > 0 at quadrature nodes");
                        let cutoff = b_at(s).max(1.0);
                        let expectation = law
                            .expect_indicator(
                                |z| self.kernel.h_at_remaining(self.maturity - s, z),
                                cutoff,
                                &self.cfg.inner,
                            )
                            .expect("cutoff >= 1 by construction");
                        (-lambda * u).exp() * expectation.value
                    },
                    u_lo,
                    u_hi,
                    &self.cfg.outer,
                )
                .expect("ordered quadrature interval");
                (res.value, res.converged)
            })
            .collect();
        let total = pieces.iter().map(|p| p.0).sum();
        let flagged = pieces.iter().filter(|p| !p.1).count();
        (total, flagged)
    }

    /// Residual of the boundary equation at `(t, c)` with the boundary known
    /// at the `tail` nodes (strictly after `t`) and linearly interpolated from
    /// `(t, c)` to the first tail node. Returns `(residual, lhs, rhs_abs,
    /// unconverged panels)`.
    fn residual(
        &self,
        t: f64,
        c: f64,
        tail_times: &[f64],
        tail_values: &[f64],
    ) -> (f64, f64, f64, usize) {
        let lhs = (c - self.params.strike_ratio) * self.kernel.z_at_remaining(self.maturity - t, c);
        let first_tail_t = tail_times[0];
        let first_tail_v = tail_values[0];
        let b_at = |s: f64| -> f64 {
            if s <= first_tail_t {
                let w = (s - t) / (first_tail_t - t);
                c + (first_tail_v - c) * w
            } else {
                interp_nodes(tail_times, tail_values, s)
            }
        };
        let mut kinks = Vec::with_capacity(tail_times.len() + 1);
        kinks.push(0.0);
        kinks.extend(tail_times.iter().map(|s| s - t));
        let (integral, flagged) = self.kernel_time_integral(t, c, &b_at, &kinks);
        (lhs + integral, lhs, integral.abs(), flagged)
    }
}

fn interp_nodes(times: &[f64], values: &[f64], s: f64) -> f64 {
    if s <= times[0] {
        return values[0];
    }
    if s >= *times.last().unwrap() {
        return *values.last().unwrap();
    }
    let idx = match times.binary_search_by(|probe| probe.total_cmp(&s)) {
        Ok(i) => return values[i],
        Err(i) => i,
    };
    values[idx - 1]
        + (values[idx] - values[idx - 1]) * (s - times[idx - 1]) / (times[idx] - times[idx - 1])
}

/// Residual of the boundary integral equation at time `t` for a candidate
/// boundary level, with the future of the boundary supplied by `tail`.
pub fn boundary_residual(
    params: &ModelParams,
    t: f64,
    b_candidate: f64,
    tail: &Boundary,
) -> Result<f64> {
    let ctx = SolverCtx::new(params, FbpConfig::default())?;
    if !(b_candidate > params.strike_ratio) {
        return Err(Error::domain("candidate must exceed the strike"));
    }
    if t >= ctx.maturity {
        return Err(Error::domain("residual needs t < T"));
    }
    let (times, values): (Vec<f64>, Vec<f64>) = tail
        .times()
        .iter()
        .zip(tail.values())
        .filter(|(s, _)| **s > t)
        .map(|(s, v)| (*s, *v))
        .unzip();
    if times.is_empty() || (times.last().unwrap() - ctx.maturity).abs() > 1e-12 {
        return Err(Error::domain("tail must cover (t, T]"));
    }
    Ok(ctx.residual(t, b_candidate, &times, &values).0)
}

/// Solves the boundary on `grid` by backward induction from `b(T) = L`.
pub fn solve_boundary(params: &ModelParams, grid: &TimeGrid) -> Result<BoundarySolve> {
    solve_boundary_with(params, grid, FbpConfig::default())
}

pub fn solve_boundary_with(
    params: &ModelParams,
    grid: &TimeGrid,
    cfg: FbpConfig,
) -> Result<BoundarySolve> {
    validate(params)?;
    let maturity = params
        .horizon
        .maturity()
        .ok_or_else(|| Error::domain("finite-horizon solver needs a finite maturity"))?;
    if (grid.horizon() - maturity).abs() > 1e-12 {
        return Err(Error::domain("grid horizon must equal the contract maturity"));
    }
    if params.lambda <= 0.0 {
        return Err(Error::Validity(
            "finite-horizon sweep requires lambda > 0: the perpetual boundary that brackets \
             the root from above does not exist at lambda = 0"
                .into(),
        ));
    }

    // Gate: the closed-form certificate for the kernel-monotonicity regime.
    let strike = params.strike_ratio;
    let y_probe = [
        strike * 1.01,
        strike * 1.1,
        strike * 1.5,
        strike * 2.0,
        strike * 4.0,
    ];
    let h_report = check_h_time_monotonicity(params, grid, &y_probe)?;
    if !h_report.bound_certifies {
        return Err(Error::Validity(format!(
            "kernel monotonicity certificate failed: bracket = {:+e} > 0",
            h_report.bound_bracket
        )));
    }

    // Perpetual boundary for the same (r, sigma, lambda, L): upper bracket.
    let perpetual_params = ModelParams {
        horizon: crate::market_model::Horizon::Perpetual,
        ..*params
    };
    let b_star = perpetual_solver::solve_boundary(&perpetual_params)?.b_star;

    let ctx = SolverCtx::new(params, cfg)?;
    let nodes = grid.nodes();
    let n_nodes = nodes.len();
    let mut b_vals = vec![strike; n_nodes];
    let mut diags = SolveDiagnostics::default();
    let floor = strike * (1.0 + FLOOR_EPS);

    for n in (0..n_nodes - 1).rev() {
        let t_n = nodes[n];
        let tail_times = &nodes[n + 1..];
        let tail_values = &b_vals[n + 1..];

        let eval = |c: f64| ctx.residual(t_n, c, tail_times, tail_values);
        let (f_floor, _, _, flagged) = eval(floor);
        diags.unconverged_panels += flagged;

        let root = if f_floor >= 0.0 {
            // The root is below the resolvable distance from the strike.
            diags.clamped_nodes += 1;
            floor
        } else {
            let hi = b_star * (1.0 + 1e-12);
            let (f_hi, _, _, _) = eval(hi);
            if f_hi <= 0.0 {
                // No sign change against the perpetual cap: damped
                // fixed-point fallback on c = L + rhs / Z.
                diags.picard_nodes += 1;
                picard_fallback(&ctx, t_n, tail_times, tail_values, floor, hi)?
            } else {
                find_root_bracketed(|c| eval(c).0, floor, hi, &ctx.cfg.root)?
            }
        };

        // Residual quality at the accepted root.
        let (res, lhs, rhs_abs, _) = eval(root);
        let scale = lhs.abs().max(rhs_abs);
        if scale > 0.0 {
            let rel = res.abs() / scale;
            // Nodes at the floor cannot do better than the floor offset.
            if root > floor {
                if rel > 1e-9 && (root - floor) > 2e-12 {
                    return Err(Error::NoConvergence(format!(
                        "node t = {t_n}: relative residual {rel:e} above tolerance"
                    )));
                }
                diags.max_rel_residual = diags.max_rel_residual.max(rel);
            }
        }

        // Monotone repair: the boundary must not increase with time.
        let next = b_vals[n + 1];
        if root < next - 1e-10 {
            return Err(Error::Monotonicity(format!(
                "b({t_n}) = {root} fell below b({}) = {next}",
                nodes[n + 1]
            )));
        }
        b_vals[n] = root.max(next);
    }

    let boundary = Boundary::new(nodes.to_vec(), b_vals, strike)?;
    Ok(BoundarySolve {
        boundary,
        b_star,
        diagnostics: diags,
    })
}

fn picard_fallback(
    ctx: &SolverCtx,
    t: f64,
    tail_times: &[f64],
    tail_values: &[f64],
    floor: f64,
    hi: f64,
) -> Result<f64> {
    let strike = ctx.params.strike_ratio;
    let mut c = 0.5 * (floor + hi);
    for _ in 0..300 {
        let z = ctx.kernel.z_at_remaining(ctx.maturity - t, c);
        if z <= 0.0 {
            return Err(Error::NoConvergence(
                "fixed-point fallback hit a vanishing survival factor".into(),
            ));
        }
        let (_, _, rhs_abs, _) = ctx.residual(t, c, tail_times, tail_values);
        let target = (strike + rhs_abs / z).clamp(floor, hi);
        let next = c + 0.5 * (target - c);
        if (next - c).abs() <= 1e-12 * c {
            return Ok(next);
        }
        c = next;
    }
    Err(Error::NoConvergence(
        "fixed-point fallback did not converge".into(),
    ))
}

/// Value function by the integral representation under a solved boundary.
pub fn value_at(params: &ModelParams, boundary: &Boundary, t: f64, y: f64) -> Result<f64> {
    value_at_with(params, boundary, t, y, FbpConfig::default())
}

pub fn value_at_with(
    params: &ModelParams,
    boundary: &Boundary,
    t: f64,
    y: f64,
    cfg: FbpConfig,
) -> Result<f64> {
    let ctx = SolverCtx::new(params, cfg)?;
    if !(y >= 1.0) {
        return Err(Error::domain(format!("value requires y >= 1, got {y}")));
    }
    if !(t >= 0.0) || t > ctx.maturity {
        return Err(Error::domain(format!("value requires 0 <= t <= T, got {t}")));
    }
    let remaining = ctx.maturity - t;
    if remaining < 1e-12 {
        return Ok(0.0);
    }
    let mut kinks: Vec<f64> = vec![0.0];
    kinks.extend(
        boundary
            .times()
            .iter()
            .filter(|s| **s > t + 1e-15)
            .map(|s| s - t),
    );
    if (kinks.last().unwrap() - remaining).abs() > 1e-12 {
        kinks.push(remaining);
    }
    let b_at = |s: f64| boundary.eval(s);
    let (integral, _) = ctx.kernel_time_integral(t, y, &b_at, &kinks);
    // The kernel is nonpositive, so the value is nonnegative; avoid -0.0.
    Ok(if integral == 0.0 { 0.0 } else { -integral })
}

/// Tabulated value surface on `times x y_grid`.
#[derive(Debug, Clone)]
pub struct ValueSurface {
    pub times: Vec<f64>,
    pub y_grid: Vec<f64>,
    /// `values[i][j] = V(times[i], y_grid[j])`.
    pub values: Vec<Vec<f64>>,
    /// Gains `G(times[i], y_grid[j])`.
    pub gains: Vec<Vec<f64>>,
    pub boundary: Boundary,
}

impl ValueSurface {
    /// Region label at a cell: continuation `C` (`y < b(t)`) or stopping `D`.
    pub fn region(&self, i: usize, j: usize) -> char {
        if self.y_grid[j] < self.boundary.eval(self.times[i]) {
            'C'
        } else {
            'D'
        }
    }
}

/// Tabulates the value surface over the boundary's grid times and `y_grid`.
pub fn build_surface(
    params: &ModelParams,
    boundary: &Boundary,
    y_grid: &[f64],
) -> Result<ValueSurface> {
    build_surface_with(params, boundary, y_grid, FbpConfig::default())
}

pub fn build_surface_with(
    params: &ModelParams,
    boundary: &Boundary,
    y_grid: &[f64],
    cfg: FbpConfig,
) -> Result<ValueSurface> {
    if y_grid.is_empty() || y_grid[0] < 1.0 || !y_grid.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::domain("y grid must be increasing and start at >= 1"));
    }
    let kernel = Kernel::new(params)?;
    let times = boundary.times().to_vec();
    let maturity = *times.last().unwrap();

    let cells: Vec<(f64, f64)> = times
        .par_iter()
        .flat_map_iter(|&t| {
            y_grid.iter().map(move |&y| (t, y))
        })
        .map(|(t, y)| {
            let v = value_at_with(params, boundary, t, y, cfg).expect("valid surface cell");
            let g = if maturity - t < 1e-12 {
                0.0
            } else {
                kernel.eval_gain(t, y).expect("valid gain cell")
            };
            (v, g)
        })
        .collect();

    let ny = y_grid.len();
    let values = cells
        .chunks(ny)
        .map(|row| row.iter().map(|c| c.0).collect())
        .collect();
    let gains = cells
        .chunks(ny)
        .map(|row| row.iter().map(|c| c.1).collect())
        .collect();

    Ok(ValueSurface {
        times,
        y_grid: y_grid.to_vec(),
        values,
        gains,
        boundary: boundary.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_model::{make_uniform_grid, Horizon};
    use approx::assert_abs_diff_eq;

    fn fig2_params() -> ModelParams {
        ModelParams::new(0.02, 0.3, 0.4, 5.0, Horizon::Finite(10.0))
    }

    fn flat_tail(strike: f64, t_from: f64, maturity: f64) -> Boundary {
        Boundary::new(vec![t_from, maturity], vec![strike, strike], strike).unwrap()
    }

    #[test]
    fn boundary_eval_interpolates_and_clamps() {
        let b = Boundary::new(vec![0.0, 1.0, 2.0], vec![6.0, 5.5, 5.0], 5.0).unwrap();
        assert_eq!(b.eval(-1.0), 6.0);
        assert_eq!(b.eval(0.0), 6.0);
        assert_abs_diff_eq!(b.eval(0.5), 5.75, epsilon = 1e-14);
        assert_eq!(b.eval(1.0), 5.5);
        assert_eq!(b.eval(3.0), 5.0);
    }

    #[test]
    fn boundary_rejects_bad_shapes() {
        assert!(Boundary::new(vec![0.0, 1.0], vec![5.0, 5.5], 5.0).is_err());
        assert!(Boundary::new(vec![0.0, 0.0], vec![5.5, 5.0], 5.0).is_err());
        assert!(Boundary::new(vec![0.0, 1.0], vec![4.0, 4.0], 5.0).is_err());
    }

    #[test]
    fn residual_with_flat_tail_has_root_just_above_strike_near_maturity() {
        let p = fig2_params();
        let t = 9.8;
        let tail = flat_tail(5.0, 9.9, 10.0);
        let f = |c: f64| boundary_residual(&p, t, c, &tail).unwrap();
        // Residual scan places the root in (5.02, 5.03) for this tail, a
        // whisker below the full-sweep boundary at the same node.
        let lo = 5.0 * (1.0 + 1e-15);
        assert!(f(lo) < 0.0, "f(lo) = {:e}", f(lo));
        assert!(f(5.02) < 0.0, "f(5.02) = {:e}", f(5.02));
        assert!(f(5.03) > 0.0, "f(5.03) = {:e}", f(5.03));
    }

    #[test]
    fn residual_is_increasing_in_the_candidate() {
        let p = fig2_params();
        let tail = flat_tail(5.0, 5.5, 10.0);
        let t = 5.0;
        let mut prev = f64::NEG_INFINITY;
        for &c in &[5.0005, 5.01, 5.05, 5.2, 5.5, 6.0, 7.0] {
            let r = boundary_residual(&p, t, c, &tail).unwrap();
            assert!(r > prev, "residual not increasing at c = {c}: {r} <= {prev}");
            prev = r;
        }
    }

    #[test]
    fn solve_on_coarse_grid_matches_structure() {
        let p = fig2_params();
        let grid = make_uniform_grid(10.0, 50).unwrap();
        let solve = solve_boundary(&p, &grid).unwrap();
        let b = &solve.boundary;

        // Terminal condition, exact.
        assert_eq!(*b.values().last().unwrap(), 5.0);
        // Strictly above the strike before maturity, capped by the perpetual
        // boundary, non-increasing.
        for (i, v) in b.values().iter().enumerate() {
            if i + 1 < b.values().len() {
                assert!(*v > 5.0, "b[{i}] = {v}");
                assert!(*v <= solve.b_star + 1e-9);
            }
        }
        assert!(b
            .values()
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-12));
        assert!(b.values()[0] <= solve.b_star);
        println!(
            "b(0) = {:.6}, b_star = {:.6}, diag = {:?}",
            b.values()[0],
            solve.b_star,
            solve.diagnostics
        );
        println!(
            "b(9.0) = {:.10}, b(9.6) = {:.10}, b(9.8) = {:.12}",
            b.eval(9.0),
            b.eval(9.6),
            b.eval(9.8)
        );
    }

    #[test]
    fn solve_is_deterministic() {
        let p = fig2_params();
        let grid = make_uniform_grid(10.0, 20).unwrap();
        let a = solve_boundary(&p, &grid).unwrap();
        let b = solve_boundary(&p, &grid).unwrap();
        assert_eq!(a.boundary, b.boundary);
    }

    #[test]
    fn solve_refuses_uncertified_parameters() {
        let p = ModelParams::new(0.02, 0.9, 0.4, 1.01, Horizon::Finite(10.0));
        let grid = make_uniform_grid(10.0, 10).unwrap();
        match solve_boundary(&p, &grid) {
            Err(Error::Validity(_)) => {}
            other => panic!("expected Validity error, got {other:?}"),
        }
    }

    #[test]
    fn solve_refuses_lambda_zero() {
        let p = ModelParams::new(0.02, 0.3, 0.0, 5.0, Horizon::Finite(10.0));
        let grid = make_uniform_grid(10.0, 10).unwrap();
        assert!(matches!(
            solve_boundary(&p, &grid),
            Err(Error::Validity(_))
        ));
    }

    #[test]
    fn value_matches_gain_in_the_stopping_region() {
        let p = fig2_params();
        let grid = make_uniform_grid(10.0, 40).unwrap();
        let solve = solve_boundary(&p, &grid).unwrap();
        let kernel = Kernel::new(&p).unwrap();
        for &(t, y_off) in &[(2.0, 0.3), (5.0, 0.1), (5.0, 2.0), (8.0, 1.0)] {
            let y = solve.boundary.eval(t) + y_off;
            let v = value_at(&p, &solve.boundary, t, y).unwrap();
            let g = kernel.eval_gain(t, y).unwrap();
            assert!(
                (v - g).abs() <= 1e-6,
                "V({t}, {y}) = {v} vs G = {g}, gap {:e}",
                (v - g).abs()
            );
        }
    }

    #[test]
    fn value_vanishes_at_maturity_and_dominates_gain() {
        let p = fig2_params();
        let grid = make_uniform_grid(10.0, 40).unwrap();
        let solve = solve_boundary(&p, &grid).unwrap();
        let kernel = Kernel::new(&p).unwrap();

        assert_eq!(value_at(&p, &solve.boundary, 10.0, 3.0).unwrap(), 0.0);
        let near_t = value_at(&p, &solve.boundary, 10.0 - 1e-9, 3.0).unwrap();
        assert!(near_t.abs() < 1e-9, "V(T-, 3) = {near_t:e}");

        for &(t, y) in &[(0.0, 1.0), (3.0, 2.0), (6.0, 4.5), (9.0, 5.05)] {
            let v = value_at(&p, &solve.boundary, t, y).unwrap();
            let g = kernel.eval_gain(t, y).unwrap();
            assert!(v >= g - 1e-7, "V({t},{y}) = {v} < G = {g}");
            assert!(v >= -1e-12);
        }
    }

    #[test]
    fn surface_invariants_on_a_small_grid() {
        let p = fig2_params();
        let grid = make_uniform_grid(10.0, 25).unwrap();
        let solve = solve_boundary(&p, &grid).unwrap();
        let y_grid: Vec<f64> = (0..30).map(|j| 1.0 + 6.0 * j as f64 / 29.0).collect();
        let surf = build_surface(&p, &solve.boundary, &y_grid).unwrap();

        for i in 0..surf.times.len() {
            for j in 0..surf.y_grid.len() {
                let v = surf.values[i][j];
                let g = surf.gains[i][j];
                assert!(v >= g - 1e-6, "V < G at cell ({i}, {j})");
                // Monotone in t.
                if i + 1 < surf.times.len() {
                    assert!(
                        surf.values[i][j] >= surf.values[i + 1][j] - 1e-8,
                        "V increasing in t at ({i}, {j})"
                    );
                }
                let region = surf.region(i, j);
                if region == 'D' && surf.times[i] < 10.0 - 1e-9 {
                    assert!((v - g).abs() <= 1e-6, "V != G in D at ({i}, {j})");
                }
            }
        }
    }

    /// Halving the time step should move the boundary by shrinking amounts.
    #[test]
    fn grid_refinement_converges() {
        let p = ModelParams::new(0.02, 0.3, 0.4, 5.0, Horizon::Finite(2.0));
        let mut at_one = Vec::new();
        for n in [10, 20, 40] {
            let grid = make_uniform_grid(2.0, n).unwrap();
            let solve = solve_boundary(&p, &grid).unwrap();
            at_one.push(solve.boundary.eval(1.0));
        }
        let d1 = (at_one[0] - at_one[1]).abs();
        let d2 = (at_one[1] - at_one[2]).abs();
        println!("refinement moves: {d1:e}, {d2:e}");
        assert!(d2 <= d1, "refinement not contracting: {d1:e} -> {d2:e}");
    }
}
