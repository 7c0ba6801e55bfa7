use serde::Serialize;

use crate::scalar::Scalar;

/// Minimum ratio (log10 of the eigenvalue ratio) for a solution to count as
/// rank one.
pub const DEFAULT_RANK_ONE_THRESHOLD: f64 = 6.0;

/// Ratio reported for a singular matrix: the second eigenvalue is floored at
/// `1e-12` times the first.
pub const MAX_RATIO: f64 = 12.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelaxationRatio {
    /// Per cone, `log10(lambda_1 / lambda_2)`.
    pub ratios: Vec<f64>,
    /// Smallest ratio; [`MAX_RATIO`] without cones.
    pub min: f64,
}

impl RelaxationRatio {
    pub fn is_rank_one(&self, threshold: f64) -> bool {
        self.min >= threshold
    }
}

/// Eigenvalues of `[gamma flow; flow rho]`, largest first.
pub fn eigenvalues(gamma: f64, flow: f64, rho: f64) -> (f64, f64) {
    let half_sum = 0.5 * (gamma + rho);
    let half_diff = 0.5 * (gamma - rho);
    let radius = half_diff.hypot(flow);
    let l1 = half_sum + radius;
    // The product form keeps the small eigenvalue accurate near rank one.
    let l2 = if l1 > 0.0 { (gamma * rho - flow * flow) / l1 } else { half_sum - radius };
    (l1, l2)
}

/// Ratio for one `[gamma, flow, rho]` matrix.
pub fn matrix_ratio(gamma: f64, flow: f64, rho: f64) -> f64 {
    let (l1, l2) = eigenvalues(gamma, flow, rho);
    if !(l1 > 0.0) {
        return MAX_RATIO;
    }
    (l1 / l2.max(1e-12 * l1)).log10().min(MAX_RATIO)
}

pub fn relaxation_ratio<T: Scalar>(matrices: &[[T; 3]]) -> RelaxationRatio {
    let ratios: Vec<f64> = matrices
        .iter()
        .map(|m| matrix_ratio(m[0].to_f64_lossy(), m[1].to_f64_lossy(), m[2].to_f64_lossy()))
        .collect();
    let min = ratios.iter().copied().fold(MAX_RATIO, f64::min);
    RelaxationRatio { ratios, min }
}
