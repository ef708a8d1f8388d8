//! JSON configuration parsing.
//!
//! Market fields are fixed-name: `{"r":…, "sigma":…, "lambda":…, "L":…,
//! "T":… | "inf", "grid_n":…}`, optionally extended with a `y_grid` spec and
//! a Monte Carlo block.

use horizon_core::market_model::{Horizon, ModelParams};
use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub r: f64,
    pub sigma: f64,
    pub lambda: f64,
    #[serde(rename = "L")]
    pub strike: f64,
    #[serde(rename = "T")]
    pub horizon: HorizonField,
    #[serde(default = "default_grid_n")]
    pub grid_n: usize,
    #[serde(default)]
    pub y_grid: YGridSpec,
    #[serde(default)]
    pub mc: McSpec,
    /// Times at which `value` evaluates the surface; defaults to t = 0.
    #[serde(default)]
    pub eval: Vec<EvalPoint>,
}

fn default_grid_n() -> usize {
    100
}

/// `T` accepts a positive number or the string `"inf"`.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum HorizonField {
    Number(f64),
    Tag(InfTag),
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub enum InfTag {
    #[serde(rename = "inf")]
    Inf,
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct YGridSpec {
    /// The lower edge is pinned at 1.
    pub max: f64,
    pub n: usize,
}

impl Default for YGridSpec {
    fn default() -> Self {
        YGridSpec { max: 8.0, n: 71 }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct McSpec {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl Default for McSpec {
    fn default() -> Self {
        McSpec {
            n_paths: 100_000,
            n_steps: 2_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct EvalPoint {
    pub t: f64,
    pub y: f64,
}

impl FileConfig {
    pub fn params(&self) -> ModelParams {
        let horizon = match self.horizon {
            HorizonField::Number(t) => Horizon::Finite(t),
            HorizonField::Tag(_) => Horizon::Perpetual,
        };
        ModelParams::new(self.r, self.sigma, self.lambda, self.strike, horizon)
    }

    pub fn y_grid_nodes(&self) -> Vec<f64> {
        let n = self.y_grid.n.max(2);
        let max = self.y_grid.max;
        (0..n)
            .map(|j| 1.0 + (max - 1.0) * j as f64 / (n - 1) as f64)
            .collect()
    }
}
