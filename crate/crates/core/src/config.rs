use serde::{Deserialize, Serialize};

/// Numerical thresholds used across the pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Eigenvalues with `|λ| ≥ 1 - peripheral` are peripheral.
    pub peripheral: f64,
    /// Slack on the contraction check `‖T_φ‖ ≤ 1 + hypothesis`.
    pub hypothesis: f64,
    /// Relative eigenvalue floor for faithfulness: `λ_min > faithful · λ_max`.
    pub faithful: f64,
    /// Relative floor below which density-matrix eigenvalues count as zero.
    pub support_rank: f64,
    /// Eigenvalues closer than this are treated as one cluster.
    pub cluster: f64,
    /// Relative singular-value floor for null spaces of `T - λ`.
    pub null_space: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            peripheral: 1e-8,
            hypothesis: 1e-9,
            faithful: 1e-10,
            support_rank: 1e-12,
            cluster: 1e-6,
            null_space: 1e-8,
        }
    }
}

/// Width of the warning band below the peripheral threshold.
pub const NEAR_PERIPHERAL_BAND: f64 = 1e-6;

/// Largest cyclic order searched when detecting the peripheral group.
pub const MAX_GROUP_ORDER: usize = 64;
