//! Market and contract parameters, derived constants, and time grids.
//!
//! Everything downstream (kernel, solvers, Monte Carlo) consumes a validated
//! [`ModelParams`]. Validation enforces the regime `r - sigma^2/2 < 0`, in
//! which the last-exit survival probability is nontrivial; the opposite
//! regime is the classical Russian option and is out of scope here.

use crate::error::{Error, Result};

/// Time horizon of the contract: a finite maturity or the perpetual contract.
///
/// The two horizons have structurally different value functions, so they are
/// kept as distinct variants rather than approximating the perpetual case by
/// a large `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Perpetual,
}

impl Horizon {
    pub fn is_finite(&self) -> bool {
        matches!(self, Horizon::Finite(_))
    }

    /// Maturity of a finite horizon; `None` for the perpetual contract.
    pub fn maturity(&self) -> Option<f64> {
        match self {
            Horizon::Finite(t) => Some(*t),
            Horizon::Perpetual => None,
        }
    }
}

/// Market and contract parameters.
///
/// * `r` — interest rate per unit time, `> 0`
/// * `sigma` — volatility per sqrt unit time, `> 0`
/// * `lambda` — withdrawal/discount intensity per unit time, `>= 0`
/// * `strike_ratio` — the multiplier `L` of the current price in the payoff
/// * `horizon` — finite maturity or perpetual
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub r: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub strike_ratio: f64,
    pub horizon: Horizon,
}

impl ModelParams {
    pub fn new(r: f64, sigma: f64, lambda: f64, strike_ratio: f64, horizon: Horizon) -> Self {
        ModelParams {
            r,
            sigma,
            lambda,
            strike_ratio,
            horizon,
        }
    }

    /// Strike multiplier `L`.
    pub fn strike(&self) -> f64 {
        self.strike_ratio
    }

    /// Maturity of a finite-horizon contract.
    ///
    /// Panics if called on a perpetual contract; solver modules that require
    /// a finite horizon validate this up front.
    pub fn maturity(&self) -> f64 {
        self.horizon
            .maturity()
            .expect("maturity() called on a perpetual contract")
    }
}

/// Constants derived from validated parameters.
///
/// * `alpha = 2r/sigma^2 - 1`, negative in the supported regime
/// * `drift` — log-price drift `r - sigma^2/2` under the pricing measure
/// * `beta` — log-price drift `r + sigma^2/2` under the auxiliary measure
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub alpha: f64,
    pub drift: f64,
    pub beta: f64,
}

/// Validates parameters and returns the derived constants.
///
/// Every rejected parameter set gets an error naming the violated invariant.
pub fn validate(params: &ModelParams) -> Result<DerivedConstants> {
    if !(params.r > 0.0) || !params.r.is_finite() {
        return Err(Error::domain(format!("r must be positive, got {}", params.r)));
    }
    if !(params.sigma > 0.0) || !params.sigma.is_finite() {
        return Err(Error::domain(format!(
            "sigma must be positive, got {}",
            params.sigma
        )));
    }
    if !(params.lambda >= 0.0) || !params.lambda.is_finite() {
        return Err(Error::domain(format!(
            "lambda must be nonnegative, got {}",
            params.lambda
        )));
    }
    let drift = params.r - 0.5 * params.sigma * params.sigma;
    if drift >= 0.0 {
        return Err(Error::domain(format!(
            "r - sigma^2/2 >= 0 (got {drift:+e}): classic Russian option regime, unsupported"
        )));
    }
    match params.horizon {
        Horizon::Perpetual => {
            if !(params.strike_ratio > 0.0) {
                return Err(Error::domain(format!(
                    "perpetual horizon requires L > 0, got {}",
                    params.strike_ratio
                )));
            }
        }
        Horizon::Finite(t) => {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::domain(format!("maturity must be positive, got {t}")));
            }
            if !(params.strike_ratio > 1.0) {
                return Err(Error::domain(format!(
                    "finite horizon requires L > 1, got {}",
                    params.strike_ratio
                )));
            }
        }
    }
    let sigma2 = params.sigma * params.sigma;
    Ok(DerivedConstants {
        alpha: 2.0 * params.r / sigma2 - 1.0,
        drift,
        beta: params.r + 0.5 * sigma2,
    })
}

/// Strictly increasing time grid on `[0, T]`, first node 0 and last node T.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

impl TimeGrid {
    /// Builds a grid from explicit nodes, checking the grid invariants.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::domain("time grid needs at least 2 nodes"));
        }
        if nodes[0] != 0.0 {
            return Err(Error::domain("time grid must start at 0"));
        }
        if !nodes.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::domain("time grid must be strictly increasing"));
        }
        Ok(TimeGrid { nodes })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Final node, i.e. the maturity the grid was built for.
    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }
}

/// `n + 1` equally spaced nodes from 0 to `horizon`.
pub fn make_uniform_grid(horizon: f64, n: usize) -> Result<TimeGrid> {
    if n < 2 {
        return Err(Error::domain(format!("uniform grid needs n >= 2, got {n}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    let step = horizon / n as f64;
    let mut nodes: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
    // Pin the last node to the exact horizon so `b(T) = L` lands on T itself.
    nodes[n] = horizon;
    TimeGrid::from_nodes(nodes)
}
