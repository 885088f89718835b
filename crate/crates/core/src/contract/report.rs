//! Incentive-compatibility report.

use serde::{Deserialize, Serialize};

use super::Deviation;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationResult {
    pub name: String,
    pub deviation: Deviation,
    /// Monte Carlo agent value under this strategy.
    pub mean: f64,
    pub std_error: f64,
    /// Mean of `value(a_hat) - value(deviation)` path by path.
    pub gap: f64,
    pub combined_std_error: f64,
    /// Standard error of the paired difference (common random numbers).
    pub paired_std_error: f64,
    /// `mean <= value(a_hat) + sigmas * combined_std_error`.
    pub pass: bool,
    pub mean_k: f64,
    pub min_k_increment: f64,
    pub clamped_steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IcReport {
    pub y0: f64,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub sigmas: f64,
    pub deviations: Vec<DeviationResult>,
    /// `value(a_hat) - Y0`.
    pub representation_residual: f64,
    pub representation_std_error: f64,
    pub representation_pass: bool,
    pub principal_value: f64,
    pub principal_std_error: f64,
    pub mean_k: f64,
    pub mean_k_std_error: f64,
    pub min_k_increment: f64,
    pub ic_pass: bool,
    pub pass: bool,
}
