//! Transition law of the reflected ratio process under the auxiliary measure.
//!
//! Under the auxiliary measure the log price is a Brownian motion with drift
//! `beta = r + sigma^2/2`, and the ratio starts at `y0 = s/x >= 1`:
//!
//! ```text
//! Y_u = exp( max(ln y0, M_u) - B_u ),   B_u = beta u + sigma W_u,
//! M_u = max_{0<=s<=u} B_s.
//! ```
//!
//! Splitting on whether the running maximum beats the inherited one and
//! integrating the reflection-principle joint law of `(M_u, B_u)` gives the
//! closed-form survival function
//!
//! ```text
//! P(Y_u >= z) = Phi((a - zeta - beta u) / (sigma sqrt(u)))
//!             + e^{-2 beta zeta / sigma^2} Phi((beta u - zeta - a) / (sigma sqrt(u)))
//! ```
//!
//! with `a = ln y0`, `zeta = ln z`. Checks worth noting: it equals 1 at
//! `z = 1`, tends to `z^{-(alpha+2)}` as `u -> inf` (the stationary tail of
//! the reflected ratio), and for `y0 = 1` reduces to the classical law of the
//! maximum of a drifted Brownian motion. The exact path sampler in this
//! module is the independent check: closed form and simulation must agree
//! before anything downstream is trusted.

use crate::error::{Error, Result};
use crate::market_model::{validate, DerivedConstants, ModelParams};
use crate::numerics::{integrate, norm_cdf, norm_pdf, QuadConfig, QuadResult};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Which measure a simulation runs under; fixes the log-price drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// Pricing measure: drift `r - sigma^2/2`.
    Original,
    /// Auxiliary measure (price as numeraire): drift `r + sigma^2/2`.
    Auxiliary,
}

/// One-step sampler for the log price and its running maximum.
///
/// Increments are exact in law; the only discretisation artefact is the
/// running maximum, optionally repaired by sampling the within-step maximum
/// of the Brownian bridge between consecutive log prices.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepSampler {
    pub drift: f64,
    pub sigma: f64,
    pub dt: f64,
    pub bridge: bool,
    sqrt_dt: f64,
}

impl StepSampler {
    pub fn new(
        consts: &DerivedConstants,
        sigma: f64,
        measure: Measure,
        dt: f64,
        bridge: bool,
    ) -> Self {
        let drift = match measure {
            Measure::Original => consts.drift,
            Measure::Auxiliary => consts.beta,
        };
        // The two measures differ exactly by sigma^2 in the log drift.
        debug_assert!((consts.beta - consts.drift - sigma * sigma).abs() <= 1e-12);
        StepSampler {
            drift,
            sigma,
            dt,
            bridge,
            sqrt_dt: dt.sqrt(),
        }
    }

    /// Advances the log price one step and updates the running log maximum.
    #[inline]
    pub fn step(&self, rng: &mut ChaCha8Rng, log_x: &mut f64, log_max: &mut f64) {
        let z: f64 = rng.sample(rand_distr::StandardNormal);
        let prev = *log_x;
        let next = prev + self.drift * self.dt + self.sigma * self.sqrt_dt * z;
        *log_x = next;
        if self.bridge {
            // Maximum of the Brownian bridge between (prev, next):
            // (l0 + l1 + sqrt((l1-l0)^2 - 2 sigma^2 dt ln U)) / 2, U in (0,1].
            let u: f64 = rng.sample(rand::distr::OpenClosed01);
            let diff = next - prev;
            let m = 0.5
                * (prev
                    + next
                    + (diff * diff - 2.0 * self.sigma * self.sigma * self.dt * u.ln()).sqrt());
            if m > *log_max {
                *log_max = m;
            }
        } else if next > *log_max {
            *log_max = next;
        }
    }
}

/// Runs `n_paths` independent substreams and collects one value per path.
///
/// Each path index gets its own ChaCha stream, so the result is a pure
/// function of `(seed, path index)`: identical across runs and across any
/// number of worker threads. The returned vector is ordered by path index.
pub(crate) fn run_paths<T, F>(n_paths: usize, seed: u64, per_path: F) -> Vec<T>
where
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync,
    T: Send,
{
    (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            per_path(i, &mut rng)
        })
        .collect()
}

/// A simulated path of the price, its running maximum, and the ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct McPath {
    pub times: Vec<f64>,
    pub x_path: Vec<f64>,
    pub s_path: Vec<f64>,
    pub y_path: Vec<f64>,
}

/// Samples full paths of `(X, S, Y)` under the auxiliary measure starting
/// from `x = 1`, `s = y0`. Increments of `X` are exact in law; the running
/// maximum uses the bridge correction when `bridge` is set.
pub fn sample_paths(
    params: &ModelParams,
    y0: f64,
    horizon: f64,
    n_steps: usize,
    n_paths: usize,
    bridge: bool,
    seed: u64,
) -> Result<Vec<McPath>> {
    let consts = validate(params)?;
    if !(y0 >= 1.0) {
        return Err(Error::domain(format!("y0 must be >= 1, got {y0}")));
    }
    if n_steps < 1 || n_paths < 1 {
        return Err(Error::domain("need n_steps >= 1 and n_paths >= 1"));
    }
    if !(horizon > 0.0) {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    let dt = horizon / n_steps as f64;
    let sampler = StepSampler::new(&consts, params.sigma, Measure::Auxiliary, dt, bridge);
    let a = y0.ln();

    Ok(run_paths(n_paths, seed, move |_i, rng| {
        let mut times = Vec::with_capacity(n_steps + 1);
        let mut x_path = Vec::with_capacity(n_steps + 1);
        let mut s_path = Vec::with_capacity(n_steps + 1);
        let mut y_path = Vec::with_capacity(n_steps + 1);
        let mut log_x = 0.0;
        let mut log_max = 0.0;
        times.push(0.0);
        x_path.push(1.0);
        s_path.push(y0);
        y_path.push(y0);
        for k in 1..=n_steps {
            sampler.step(rng, &mut log_x, &mut log_max);
            let x = log_x.exp();
            let s = a.max(log_max).exp();
            times.push(k as f64 * dt);
            x_path.push(x);
            s_path.push(s);
            y_path.push(s / x);
        }
        McPath {
            times,
            x_path,
            s_path,
            y_path,
        }
    }))
}

/// Closed-form transition law of `Y` over a duration `u` from `y0`.
#[derive(Debug, Clone, Copy)]
pub struct TransitionLaw {
    params: ModelParams,
    pub u: f64,
    pub y0: f64,
    beta: f64,
    /// `ln y0`
    a: f64,
    /// `sigma * sqrt(u)`
    sq: f64,
    /// `2 beta / sigma^2`
    two_beta_over_sigma2: f64,
}

impl TransitionLaw {
    pub fn new(params: &ModelParams, u: f64, y0: f64) -> Result<Self> {
        let consts = validate(params)?;
        if !(u > 0.0) || !u.is_finite() {
            return Err(Error::domain(format!("duration must be positive, got {u}")));
        }
        if !(y0 >= 1.0) {
            return Err(Error::domain(format!("y0 must be >= 1, got {y0}")));
        }
        let sigma = params.sigma;
        Ok(TransitionLaw {
            params: *params,
            u,
            y0,
            beta: consts.beta,
            a: y0.ln(),
            sq: sigma * u.sqrt(),
            two_beta_over_sigma2: 2.0 * consts.beta / (sigma * sigma),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn survival_unchecked(&self, z: f64) -> f64 {
        let zeta = z.ln();
        let q1 = (self.a - zeta - self.beta * self.u) / self.sq;
        let q2 = (self.beta * self.u - zeta - self.a) / self.sq;
        (norm_cdf(q1) + (-self.two_beta_over_sigma2 * zeta).exp() * norm_cdf(q2)).min(1.0)
    }

    /// `P(Y_u >= z | Y_0 = y0)`.
    pub fn survival(&self, z: f64) -> Result<f64> {
        if !(z >= 1.0) {
            return Err(Error::domain(format!("survival requires z >= 1, got {z}")));
        }
        Ok(self.survival_unchecked(z))
    }

    fn density_unchecked(&self, z: f64) -> f64 {
        let zeta = z.ln();
        let q1 = (self.a - zeta - self.beta * self.u) / self.sq;
        let q2 = (self.beta * self.u - zeta - self.a) / self.sq;
        let w = (-self.two_beta_over_sigma2 * zeta).exp();
        ((norm_pdf(q1) + w * norm_pdf(q2)) / self.sq
            + self.two_beta_over_sigma2 * w * norm_cdf(q2))
            / z
    }

    /// Transition density `-d/dz P(Y_u >= z)` on `z > 1`.
    pub fn density(&self, z: f64) -> Result<f64> {
        if !(z > 1.0) {
            return Err(Error::domain(format!("density requires z > 1, got {z}")));
        }
        Ok(self.density_unchecked(z))
    }

    /// Smallest probed level with `P(Y_u >= z) < eps`.
    pub fn tail_cutoff(&self, eps: f64) -> f64 {
        let mut zeta = self.a + self.beta * self.u + 8.0 * self.sq + 1e-6;
        let step = 2.0 * self.sq + 0.25;
        for _ in 0..500 {
            if self.survival_unchecked(zeta.exp()) < eps {
                break;
            }
            zeta += step;
        }
        zeta.exp()
    }

    /// `E[ f(Y_u) 1{Y_u >= c} ]` by quadrature in `ln z`, truncated where the
    /// survival probability drops below 1e-12.
    pub fn expect_indicator<F>(&self, f: F, c: f64, cfg: &QuadConfig) -> Result<QuadResult>
    where
        F: Fn(f64) -> f64,
    {
        if !(c >= 1.0) {
            return Err(Error::domain(format!(
                "expect_indicator requires c >= 1, got {c}"
            )));
        }
        if self.sq < 1e-10 {
            // Degenerate duration: the law is a point mass at y0.
            return Ok(QuadResult {
                value: f(self.y0) * self.survival_unchecked(c),
                error_estimate: 0.0,
                converged: true,
            });
        }
        let zeta_lo = c.ln();
        let zeta_hi = self.tail_cutoff(1e-12).ln();
        if zeta_hi <= zeta_lo {
            return Ok(QuadResult {
                value: 0.0,
                error_estimate: 0.0,
                converged: true,
            });
        }
        integrate(
            |zeta| {
                let z = zeta.exp();
                f(z) * self.density_unchecked(z) * z
            },
            zeta_lo,
            zeta_hi,
            cfg,
        )
    }
}
