//! Per-sample branch costs for sequence detection.

use std::sync::Arc;

use crate::noise::DensityGrid;

/// Pluggable per-sample cost ρ(e) on the residual `e = y - s`. All three
/// kinds are even with their minimum at zero.
#[derive(Debug, Clone)]
pub enum BranchMetric {
    /// ρ(e) = e²
    Gaussian,
    /// ρ(e) = log(k² + e²)
    Myriad { k: f64 },
    /// ρ(e) = -log p̂(e) under a tabulated density; residuals outside the
    /// grid are clamped to the boundary cost.
    Aml { grid: Arc<DensityGrid> },
}

impl BranchMetric {
    pub fn aml(grid: DensityGrid) -> Self {
        BranchMetric::Aml {
            grid: Arc::new(grid),
        }
    }

    #[inline]
    pub fn cost(&self, e: f64) -> f64 {
        match self {
            BranchMetric::Gaussian => e * e,
            BranchMetric::Myriad { k } => (k * k + e * e).ln(),
            BranchMetric::Aml { grid } => -grid.log_pdf_at(e),
        }
    }
}

pub fn branch_cost_gaussian(e: f64) -> f64 {
    e * e
}

pub fn branch_cost_myriad(e: f64, k: f64) -> f64 {
    assert!(k > 0.0, "myriad linearity parameter must be positive");
    (k * k + e * e).ln()
}

pub fn branch_cost_aml(e: f64, grid: &DensityGrid) -> f64 {
    -grid.log_pdf_at(e)
}
