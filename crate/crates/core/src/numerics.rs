//! Shared numerics: normal CDF, bracketed root finding, adaptive quadrature.
//!
//! The normal CDF goes through the complementary error function so the deep
//! tails keep full relative accuracy; the solvers probe arguments beyond -30
//! where a series evaluation of `Phi` would be useless.

use crate::error::{Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal CDF, accurate to about one ulp absolute over the real line.
///
/// Saturates cleanly at 0 and 1 for large arguments.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Tolerances for the bracketed root finder.
#[derive(Debug, Clone, Copy)]
pub struct RootConfig {
    /// Absolute tolerance on the root location.
    pub abs_tol: f64,
    /// Iteration cap.
    pub max_iter: usize,
}

impl Default for RootConfig {
    fn default() -> Self {
        RootConfig {
            abs_tol: 1e-12,
            max_iter: 200,
        }
    }
}

/// Brent's method on a bracketing interval.
///
/// Inverse quadratic interpolation with a bisection safeguard, after
/// Numerical Recipes. The bracket may be given in either order; behaviour is
/// identical under a swap. Requires a sign change: `f(lo) * f(hi) <= 0`.
pub fn find_root_bracketed<F>(f: F, lo: f64, hi: f64, cfg: &RootConfig) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);

    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoBracket {
            lo: a,
            hi: b,
            f_lo: fa,
            f_hi: fb,
        });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    let eps = f64::EPSILON;

    for _ in 0..cfg.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * eps * b.abs() + 0.5 * cfg.abs_tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // Inverse quadratic interpolation (secant when a == c).
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                q = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
                q = (q - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += tol1.copysign(xm);
        }
        fb = f(b);
    }
    Err(Error::NoConvergence(format!(
        "root finder exhausted {} iterations on [{lo}, {hi}]",
        cfg.max_iter
    )))
}

/// Tolerances and budget for the adaptive quadrature.
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Cap on the number of panel subdivisions.
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_subdivisions: 4000,
        }
    }
}

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Accumulated error estimate for the accepted panels.
    pub error_estimate: f64,
    /// False when the subdivision budget ran out; `value` is then the best
    /// available estimate.
    pub converged: bool,
}

// 15-point Kronrod abscissae (positive half), Gauss weights for the embedded
// 7-point rule, and Kronrod weights. Standard QUADPACK values.
const XGK15: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_33,
    0.949_107_912_342_758_524_526_189_684_047_85,
    0.864_864_423_359_769_072_789_712_788_640_93,
    0.741_531_185_599_394_439_863_864_773_280_79,
    0.586_087_235_467_691_130_294_144_838_258_73,
    0.405_845_151_377_397_166_906_606_412_076_96,
    0.207_784_955_007_898_467_600_689_403_773_24,
    0.0,
];
const WG7: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_08,
    0.279_705_391_489_276_667_901_467_771_423_78,
    0.381_830_050_505_118_944_950_369_775_488_98,
    0.417_959_183_673_469_387_755_102_040_816_33,
];
const WGK15: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_97,
    0.063_092_092_629_978_553_290_700_663_189_2,
    0.104_790_010_322_250_183_839_876_322_541_52,
    0.140_653_259_715_525_918_745_189_590_510_24,
    0.169_004_726_639_267_902_826_583_426_598_55,
    0.190_350_578_064_785_409_913_256_402_421_01,
    0.204_432_940_075_298_892_414_161_999_234_65,
    0.209_482_141_084_727_828_012_999_174_891_71,
];

/// One 15-point Gauss–Kronrod panel. Returns (integral, error estimate).
fn gk15_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);

    let mut res_gauss = WG7[3] * fc;
    let mut res_kronrod = WGK15[7] * fc;
    let mut res_abs = WGK15[7] * fc.abs();
    let mut fv = [0.0f64; 14];

    for j in 0..7 {
        let dx = half * XGK15[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = f1;
        fv[7 + j] = f2;
        res_kronrod += WGK15[j] * (f1 + f2);
        res_abs += WGK15[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            // Odd Kronrod indices are the embedded Gauss-7 nodes.
            res_gauss += WG7[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK15[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK15[j] * ((fv[j] - mean).abs() + (fv[7 + j] - mean).abs());
    }

    let value = res_kronrod * half;
    res_abs *= half.abs();
    res_asc *= half.abs();

    // QUADPACK-style rescaled error.
    let mut err = ((res_kronrod - res_gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * 1.0f64.min((200.0 * err / res_asc).powf(1.5));
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, err)
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// Bisects the worst panel first, so integrable endpoint singularities (the
/// rule is open and never evaluates `a` or `b`) converge by zooming into the
/// endpoint. When the subdivision budget runs out the best estimate comes
/// back with `converged = false`.
pub fn integrate<F>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    if !(a <= b) {
        return Err(Error::domain(format!("integrate: a = {a} > b = {b}")));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error_estimate: 0.0,
            converged: true,
        });
    }

    struct Panel {
        a: f64,
        b: f64,
        value: f64,
        err: f64,
    }

    let (v0, e0) = gk15_panel(&f, a, b);
    let mut panels = vec![Panel {
        a,
        b,
        value: v0,
        err: e0,
    }];
    let mut subdivisions = 0usize;

    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let total_err: f64 = panels.iter().map(|p| p.err).sum();
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.abs());
        if total_err <= tol {
            return Ok(QuadResult {
                value: total,
                error_estimate: total_err,
                converged: true,
            });
        }
        if subdivisions >= cfg.max_subdivisions {
            return Ok(QuadResult {
                value: total,
                error_estimate: total_err,
                converged: false,
            });
        }

        // Split the panel with the largest error estimate.
        let (worst_idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .unwrap();
        let worst = panels.swap_remove(worst_idx);
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval no longer splittable in f64; keep it and accept.
            let mut total = worst.value;
            let mut total_err = worst.err;
            for p in &panels {
                total += p.value;
                total_err += p.err;
            }
            return Ok(QuadResult {
                value: total,
                error_estimate: total_err,
                converged: total_err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()),
            });
        }
        let (vl, el) = gk15_panel(&f, worst.a, mid);
        let (vr, er) = gk15_panel(&f, mid, worst.b);
        panels.push(Panel {
            a: worst.a,
            b: mid,
            value: vl,
            err: el,
        });
        panels.push(Panel {
            a: mid,
            b: worst.b,
            value: vr,
            err: er,
        });
        subdivisions += 1;
    }
}
