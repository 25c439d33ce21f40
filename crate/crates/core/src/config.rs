use serde::{Deserialize, Serialize};

/// Numerical tolerances shared by every module.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Row sums, probability ranges, detailed balance.
    pub structural: f64,
    /// Residual accepted from linear solves.
    pub solver_residual: f64,
    /// Survival curves stop once `P(tau > t)` drops below this.
    pub truncation: f64,
    /// Hard cap on survival iteration length.
    pub step_cap: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            structural: 1e-12,
            solver_residual: 1e-10,
            truncation: 1e-12,
            step_cap: 100_000_000,
        }
    }
}

/// Default quantile level, `e^{-1}`.
pub const DEFAULT_ZETA: f64 = 0.367_879_441_171_442_33;
