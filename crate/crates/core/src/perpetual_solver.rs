//! Infinite-horizon solver: exponents, optimal boundary, value function.
//!
//! On `[1, b]` the value function solves the Cauchy–Euler equation
//! `sigma^2 y^2 V''/2 - r y V' - lambda V = 0`, giving power solutions
//! `y^{p1}`, `y^{p2}` with `p1 > 1`, `p2 <= 0` the roots of
//! `sigma^2 p^2 / 2 - (r + sigma^2/2) p - lambda = 0`. Value matching and
//! normal reflection pin the coefficients; smooth fit at the boundary turns
//! into a transcendental equation `g(b) = 0` with `g` strictly decreasing, so
//! the boundary is found by expanding a bracket upward until the sign flips.

use crate::error::{Error, Result};
use crate::market_model::{validate, ModelParams};
use crate::numerics::{find_root_bracketed, RootConfig};

/// Solution of the perpetual problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerpetualSolution {
    pub p1: f64,
    pub p2: f64,
    /// Optimal stopping ratio, `> max(1, L)`.
    pub b_star: f64,
    /// Coefficient of `y^{p1}` on the continuation interval.
    pub c1_coef: f64,
    /// Coefficient of `y^{p2}` on the continuation interval.
    pub c2_coef: f64,
    alpha: f64,
    strike: f64,
}

/// Roots `(p1, p2)` of `sigma^2 p^2/2 - (r + sigma^2/2) p - lambda = 0`.
///
/// `p1` comes from the numerically stable branch of the quadratic formula and
/// `p2` from the product identity `p1 p2 = -2 lambda / sigma^2`, which keeps
/// `p2` exact (zero) in the degenerate `lambda = 0` case.
pub fn solve_exponents(params: &ModelParams) -> Result<(f64, f64)> {
    let c = validate(params)?;
    let sigma2 = params.sigma * params.sigma;
    let disc = c.beta * c.beta + 2.0 * params.lambda * sigma2;
    let p1 = (c.beta + disc.sqrt()) / sigma2;
    let p2 = -2.0 * params.lambda / sigma2 / p1;
    Ok((p1, p2))
}

/// Smooth-fit residual `g(y)` whose unique root on `(max(1, L), inf)` is the
/// optimal boundary:
///
/// ```text
/// g(y) = (alpha+1)(p1 y^{p2} - p2 y^{p1})
///        - alpha L (p1 y^{p2-1} - p2 y^{p1-1})
///        - p1 p2 (y - L)(y^{p2-1} - y^{p1-1})
/// ```
pub fn g_residual(params: &ModelParams, exponents: (f64, f64), y: f64) -> f64 {
    let (p1, p2) = exponents;
    let strike = params.strike_ratio;
    let sigma2 = params.sigma * params.sigma;
    let alpha = 2.0 * params.r / sigma2 - 1.0;

    // Grouped as y^{p1} A(y) + y^{p2} B(y) so the overflow guard below can
    // fall back on the dominant coefficient's sign.
    let a = -p2 * ((alpha + 1.0) - alpha * strike / y - p1 * (1.0 - strike / y));
    let b = p1 * ((alpha + 1.0) - alpha * strike / y - p2 * (1.0 - strike / y));

    let ln_y = y.ln();
    if p1 * ln_y > 700.0 {
        // y^{p1} overflows; only the sign of the dominant term matters for
        // bracketing at that scale.
        return if a != 0.0 { a.signum() * 1e300 } else { b * (p2 * ln_y).exp() };
    }
    (p1 * ln_y).exp() * a + (p2 * ln_y).exp() * b
}

/// Solves the perpetual problem: boundary `b_star` and value coefficients.
pub fn solve_boundary(params: &ModelParams) -> Result<PerpetualSolution> {
    let c = validate(params)?;
    let (p1, p2) = solve_exponents(params)?;
    let strike = params.strike_ratio;

    if params.lambda == 0.0 {
        // g tends to p1 (alpha + 1) > 0 at infinity, so no sign change: the
        // undiscounted perpetual gain is unbounded along the reflected ratio
        // process and no finite optimal boundary exists.
        return Err(Error::NoConvergence(
            "perpetual boundary does not exist for lambda = 0: g(y) has no root; \
             the undiscounted gain is unbounded"
                .into(),
        ));
    }

    let g = |y: f64| g_residual(params, (p1, p2), y);
    let floor = strike.max(1.0);
    let lo = floor * (1.0 + 1e-9);
    if !(g(lo) > 0.0) {
        return Err(Error::NoConvergence(format!(
            "g({lo}) = {} is not positive at the bracket floor",
            g(lo)
        )));
    }
    let mut hi = 2.0 * floor;
    let mut doubles = 0;
    while g(hi) >= 0.0 {
        hi *= 2.0;
        doubles += 1;
        if doubles > 200 {
            return Err(Error::NoConvergence(
                "bracket expansion for the perpetual boundary did not find a sign change".into(),
            ));
        }
    }

    let cfg = RootConfig {
        abs_tol: 1e-13,
        max_iter: 300,
    };
    let b_star = find_root_bracketed(g, lo, hi, &cfg)?;
    if g(b_star).abs() > 1e-10 * (1.0 + b_star.powf(p1)) {
        return Err(Error::NoConvergence(format!(
            "perpetual boundary residual g({b_star}) = {} too large",
            g(b_star)
        )));
    }

    let k = (b_star.powf(c.alpha + 1.0) - strike * b_star.powf(c.alpha))
        / (p1 * b_star.powf(p2) - p2 * b_star.powf(p1));
    Ok(PerpetualSolution {
        p1,
        p2,
        b_star,
        c1_coef: -p2 * k,
        c2_coef: p1 * k,
        alpha: c.alpha,
        strike,
    })
}

/// Perpetual value function: coefficient branch on `[1, b_star]`, the gain
/// `(y - L) y^alpha` beyond; continuous across the boundary.
pub fn perpetual_value(sol: &PerpetualSolution, y: f64) -> Result<f64> {
    if !(y >= 1.0) {
        return Err(Error::domain(format!("value requires y >= 1, got {y}")));
    }
    if y >= sol.b_star {
        return Ok((y - sol.strike) * y.powf(sol.alpha));
    }
    Ok(sol.c1_coef * y.powf(sol.p1) + sol.c2_coef * y.powf(sol.p2))
}

/// Generator slack `L_Y V - lambda V`; zero on the continuation interval by
/// construction and strictly negative in the stopping region.
pub fn generator_slack(params: &ModelParams, sol: &PerpetualSolution, y: f64) -> Result<f64> {
    let c = validate(params)?;
    if !(y >= 1.0) {
        return Err(Error::domain(format!("slack requires y >= 1, got {y}")));
    }
    let sigma2 = params.sigma * params.sigma;
    if y < sol.b_star {
        let term = |coef: f64, p: f64| {
            coef * y.powf(p) * (0.5 * sigma2 * p * (p - 1.0) - params.r * p - params.lambda)
        };
        Ok(term(sol.c1_coef, sol.p1) + term(sol.c2_coef, sol.p2))
    } else {
        // (L_Y - lambda) G = -(lambda + r) y^{alpha+1} + L (lambda + 2r - sigma^2) y^alpha
        Ok(-(params.lambda + params.r) * y.powf(c.alpha + 1.0)
            + sol.strike * (params.lambda + 2.0 * params.r - sigma2) * y.powf(c.alpha))
    }
}
