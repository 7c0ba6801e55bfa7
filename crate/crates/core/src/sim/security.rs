use serde::Serialize;

use crate::network::GasNetwork;
use crate::scalar::Scalar;

use super::Trajectory;

/// Relative tolerance applied to every security limit.
pub const DEFAULT_SECURITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DensityBound,
    Linepack,
    /// Unit withdrawal below its no-load fuel use (negative electric output).
    NonnegOutput,
    WellOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Node, unit or well id; `"network"` for linepack.
    pub location: String,
    /// Time level; `None` for limits that do not vary over the horizon.
    pub time: Option<usize>,
    /// Amount by which the limit is exceeded.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct SecurityReport {
    pub violations: Vec<Violation>,
}

impl SecurityReport {
    pub fn is_secure(&self) -> bool {
        self.violations.is_empty()
    }

    /// Largest violation magnitude, zero when secure.
    pub fn worst(&self) -> f64 {
        self.violations.iter().fold(0.0, |a, v| a.max(v.magnitude))
    }
}

fn excess(value: f64, limit: f64, tolerance: f64, above: bool) -> Option<f64> {
    let slack = tolerance * limit.abs().max(1.0);
    let d = if above { value - limit } else { limit - value };
    (d > slack).then_some(d)
}

/// Checks node density bounds and the linepack floor at every time level
/// after the initial one, plus unit and well output limits.
pub fn check_security<T: Scalar>(network: &GasNetwork, trajectory: &Trajectory<T>, tolerance: f64) -> SecurityReport {
    let mut violations = Vec::new();
    for (t, state) in trajectory.states.iter().enumerate().skip(1) {
        for (node, rho) in network.nodes.iter().zip(&state.node_rho) {
            let rho = rho.to_f64_lossy();
            let d = excess(rho, node.density_max, tolerance, true).or_else(|| excess(rho, node.density_min, tolerance, false));
            if let Some(d) = d {
                violations.push(Violation {
                    kind: ViolationKind::DensityBound,
                    location: node.id.clone(),
                    time: Some(t),
                    magnitude: d,
                });
            }
        }
        let lp = trajectory.linepack[t].to_f64_lossy();
        if let Some(d) = excess(lp, network.globals.linepack_min, tolerance, false) {
            violations.push(Violation {
                kind: ViolationKind::Linepack,
                location: "network".into(),
                time: Some(t),
                magnitude: d,
            });
        }
    }
    for (unit, d) in network.units.iter().zip(&trajectory.units) {
        if let Some(e) = excess(d.to_f64_lossy(), unit.fuel_intercept, tolerance, false) {
            violations.push(Violation {
                kind: ViolationKind::NonnegOutput,
                location: unit.id.clone(),
                time: None,
                magnitude: e,
            });
        }
    }
    for (well, out) in network.wells.iter().zip(&trajectory.wells) {
        let out = out.to_f64_lossy();
        let lo = well.min_output.and_then(|l| excess(out, l, tolerance, false));
        let hi = well.max_output.and_then(|u| excess(out, u, tolerance, true));
        if let Some(e) = lo.or(hi) {
            violations.push(Violation {
                kind: ViolationKind::WellOutput,
                location: well.id.clone(),
                time: None,
                magnitude: e,
            });
        }
    }
    SecurityReport { violations }
}
