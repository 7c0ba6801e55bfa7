//! Security regions in unit-withdrawal space.
//!
//! Both boundaries of the total adjustment `d_G` come from the boundary
//! search; unit `u` then withdraws `dispatch_u + beta_u * d_G`, so the region
//! maps to one interval per unit and, summed over members, one per node. The
//! raster is the brute-force counterpart: a grid of constant withdrawals at
//! two nodes or units, each simulated over the horizon.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::{evaluate_boundary_model, BoundaryResult, FeOptions, Verdict};
use crate::grid::Grid;
use crate::network::GasNetwork;
use crate::program::{build, Direction, Model, Objective};
use crate::scalar::Scalar;
use crate::sim::{check_security, simulate, solve_steady, Boundary, NewtonOptions, SteadyState, Trajectory, ViolationKind};

/// Largest raster side.
pub const MAX_RASTER_RESOLUTION: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionMode {
    Dynamic,
    Steady,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitInterval {
    pub id: String,
    pub node: String,
    pub lo: f64,
    pub hi: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeInterval {
    pub id: String,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Smaller of the two boundary solutions' relaxation ratios.
    pub min_ratio: f64,
    /// Bisection rounds over both boundaries.
    pub rounds: usize,
    /// Seconds.
    pub wallclock: f64,
    pub certified_upper: bool,
    pub certified_lower: bool,
}

/// Region in withdrawal space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DSRegion {
    pub mode: RegionMode,
    #[serde(rename = "dG_lower")]
    pub d_g_lower: f64,
    #[serde(rename = "dG_upper")]
    pub d_g_upper: f64,
    pub units: Vec<UnitInterval>,
    pub nodes: Vec<NodeInterval>,
    /// Product of the node interval widths, kg^2/s^2; two unit nodes only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    pub diagnostics: Diagnostics,
}

impl DSRegion {
    /// Allocates `[lower, upper]` to units and nodes.
    pub fn from_bounds(network: &GasNetwork, mode: RegionMode, lower: f64, upper: f64, diagnostics: Diagnostics) -> Self {
        let units: Vec<UnitInterval> = network
            .units
            .iter()
            .map(|u| UnitInterval {
                id: u.id.clone(),
                node: network.nodes[u.node].id.clone(),
                lo: u.dispatch + u.participation * lower,
                hi: u.dispatch + u.participation * upper,
                beta: u.participation,
            })
            .collect();
        let nodes: Vec<NodeInterval> = network
            .unit_nodes()
            .into_iter()
            .map(|j| {
                let (lo, hi) = network
                    .units
                    .iter()
                    .zip(&units)
                    .filter(|(u, _)| u.node == j)
                    .fold((0.0, 0.0), |(a, b), (_, iv)| (a + iv.lo, b + iv.hi));
                NodeInterval {
                    id: network.nodes[j].id.clone(),
                    lo,
                    hi,
                }
            })
            .collect();
        let area = (nodes.len() == 2).then(|| nodes.iter().map(|n| n.hi - n.lo).product());
        Self {
            mode,
            d_g_lower: lower,
            d_g_upper: upper,
            units,
            nodes,
            area,
            diagnostics,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("region serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Region with the boundary searches that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct RegionEvaluation<T> {
    pub region: DSRegion,
    pub upper: BoundaryResult<T>,
    pub lower: BoundaryResult<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionOptions {
    pub fe: FeOptions,
    /// Re-simulate both boundaries and attach the verdicts.
    pub verify: bool,
}

impl Default for RegionOptions {
    fn default() -> Self {
        Self {
            fe: FeOptions::default(),
            verify: true,
        }
    }
}

fn assemble<T: Scalar>(network: &GasNetwork, mode: RegionMode, upper: BoundaryResult<T>, lower: BoundaryResult<T>, start: Instant) -> RegionEvaluation<T> {
    let diagnostics = Diagnostics {
        min_ratio: upper.min_ratio.min(lower.min_ratio),
        rounds: upper.trace.rounds.len() + lower.trace.rounds.len(),
        wallclock: start.elapsed().as_secs_f64(),
        certified_upper: upper.certified,
        certified_lower: lower.certified,
    };
    RegionEvaluation {
        region: DSRegion::from_bounds(network, mode, lower.d_g, upper.d_g, diagnostics),
        upper,
        lower,
    }
}

/// Dynamic security region from the initial state `initial`.
pub fn evaluate_dsr<T: Scalar>(network: &GasNetwork, grid: &Grid, initial: &SteadyState<T>, options: &RegionOptions) -> Result<RegionEvaluation<T>> {
    let start = Instant::now();
    let model = Model::Dynamic { initial };
    let (upper, lower) = rayon::join(
        || evaluate_boundary_model(network, grid, model, Direction::Upper, &options.fe),
        || evaluate_boundary_model(network, grid, model, Direction::Lower, &options.fe),
    );
    let (mut upper, mut lower) = (upper?, lower?);
    if options.verify {
        for b in [&mut upper, &mut lower] {
            b.verdict = Some(crate::fe::verify_withdrawal(network, grid, initial, b.d_g, &NewtonOptions::default(), crate::sim::DEFAULT_SECURITY_TOLERANCE)?);
        }
    }
    Ok(assemble(network, RegionMode::Dynamic, upper, lower, start))
}

/// Steady-state security region: one steady time level, wells with output
/// bounds free within them, the others at their output in `initial`.
pub fn evaluate_ssr<T: Scalar>(network: &GasNetwork, grid: &Grid, initial: &SteadyState<T>, options: &RegionOptions) -> Result<RegionEvaluation<T>> {
    let start = Instant::now();
    let model = Model::Steady { wells: &initial.wells };
    let (upper, lower) = rayon::join(
        || evaluate_boundary_model(network, grid, model, Direction::Upper, &options.fe),
        || evaluate_boundary_model(network, grid, model, Direction::Lower, &options.fe),
    );
    let (mut upper, mut lower) = (upper?, lower?);
    if options.verify {
        for b in [&mut upper, &mut lower] {
            b.verdict = Some(verify_steady(network, grid, initial, b)?);
        }
    }
    Ok(assemble(network, RegionMode::Steady, upper, lower, start))
}

/// Re-solves a steady boundary point with the simulator's steady solver. The
/// reference density and the outputs of all but the first bounded well are
/// taken from the program solution; that well balances the network.
pub fn verify_steady<T: Scalar>(network: &GasNetwork, grid: &Grid, initial: &SteadyState<T>, result: &BoundaryResult<T>) -> Result<Verdict> {
    let built = build(network, grid, Model::Steady { wells: &initial.wells }, Objective::RankMin, result.direction)?;
    let x = &result.solution.x;
    if x.len() != built.program.n_vars {
        return Err(Error::Build("boundary solution does not match the steady program".into()));
    }
    let slack = network.wells.iter().position(|w| w.min_output.is_some() || w.max_output.is_some());
    let wells: Vec<Option<T>> = built
        .wells
        .iter()
        .enumerate()
        .map(|(w, v)| match v {
            _ if Some(w) == slack => None,
            Some(v) => Some(x[*v]),
            None => Some(initial.wells[w]),
        })
        .collect();
    let boundary = Boundary {
        wells,
        units: network.withdrawals(result.d_g).into_iter().map(T::of).collect(),
    };
    let reference = x[built.node_rho[0][network.globals.reference_node]];
    let steady = solve_steady(network, grid, &boundary, reference, &NewtonOptions::default())?;
    let traj = Trajectory {
        states: vec![steady.state.clone(), steady.state.clone()],
        linepack: vec![T::zero(); 2],
        units: boundary.units.clone(),
        wells: steady.wells.clone(),
    };
    let mut report = check_security(network, &traj, crate::sim::DEFAULT_SECURITY_TOLERANCE);
    report.violations.retain(|v| v.kind != ViolationKind::Linepack);
    let density_margin = network
        .nodes
        .iter()
        .zip(&steady.state.node_rho)
        .map(|(n, r)| (r.to_f64_lossy() - n.density_min).min(n.density_max - r.to_f64_lossy()))
        .fold(f64::INFINITY, f64::min);
    Ok(Verdict {
        d_g: result.d_g,
        secure: report.is_secure(),
        report,
        density_margin,
        linepack_margin: f64::INFINITY,
    })
}

/// How a withdrawal point relates to a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Containment {
    Outside,
    /// On the adjustment ray between the two boundaries, which the boundary
    /// search certifies.
    OnRay,
    /// Inside every unit interval but off the ray.
    IntervalOnly,
}

impl Containment {
    pub fn is_inside(self) -> bool {
        self != Containment::Outside
    }
}

/// Tests per-unit withdrawals against the region's unit intervals. Bounds are
/// inclusive up to `tolerance` kg/s.
pub fn region_contains(network: &GasNetwork, region: &DSRegion, withdrawals: &[f64], tolerance: f64) -> Containment {
    if withdrawals.len() != region.units.len() {
        return Containment::Outside;
    }
    let inside = region
        .units
        .iter()
        .zip(withdrawals)
        .all(|(iv, w)| *w >= iv.lo.min(iv.hi) - tolerance && *w <= iv.lo.max(iv.hi) + tolerance);
    if !inside {
        return Containment::Outside;
    }
    let total_beta: f64 = network.units.iter().map(|u| u.participation).sum();
    if total_beta <= 0.0 {
        return Containment::IntervalOnly;
    }
    // Least-squares adjustment along the ray, then the distance to it.
    let num: f64 = network.units.iter().zip(withdrawals).map(|(u, w)| u.participation * (w - u.dispatch)).sum();
    let den: f64 = network.units.iter().map(|u| u.participation * u.participation).sum();
    let d = num / den;
    let on_ray = network.units.iter().zip(withdrawals).all(|(u, w)| (u.dispatch + u.participation * d - w).abs() <= tolerance);
    if on_ray && d >= region.d_g_lower - tolerance && d <= region.d_g_upper + tolerance {
        Containment::OnRay
    } else {
        Containment::IntervalOnly
    }
}

/// One raster axis: total withdrawal at a node, shared by its units in
/// proportion to their participation, or the withdrawal of one unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Node(usize),
    Unit(usize),
}

impl Axis {
    pub fn label(self, network: &GasNetwork) -> String {
        match self {
            Axis::Node(j) => format!("node {}", network.nodes[j].id),
            Axis::Unit(u) => format!("unit {}", network.units[u].id),
        }
    }

    fn members(self, network: &GasNetwork) -> Vec<usize> {
        match self {
            Axis::Node(j) => network.units.iter().enumerate().filter(|(_, u)| u.node == j).map(|(i, _)| i).collect(),
            Axis::Unit(u) => vec![u],
        }
    }

    /// Axis value of a unit withdrawal vector.
    pub fn value(self, network: &GasNetwork, withdrawals: &[f64]) -> f64 {
        self.members(network).into_iter().map(|u| withdrawals[u]).sum()
    }

    fn assign(self, network: &GasNetwork, total: f64, withdrawals: &mut [f64]) {
        let members = self.members(network);
        let beta: f64 = members.iter().map(|&u| network.units[u].participation).sum();
        for &u in &members {
            let share = if beta > 0.0 { network.units[u].participation / beta } else { 1.0 / members.len() as f64 };
            withdrawals[u] = total * share;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RasterSpec {
    pub axes: [Axis; 2],
    /// `[min, max]` per axis, kg/s.
    pub ranges: [[f64; 2]; 2],
    pub resolution: [usize; 2],
}

impl RasterSpec {
    /// Both axes from zero to twice the scheduled withdrawal (at least 1 kg/s).
    pub fn around_dispatch(network: &GasNetwork, axes: [Axis; 2], resolution: usize) -> Self {
        let dispatch = network.dispatch();
        let range = |a: Axis| [0.0, (2.0 * a.value(network, &dispatch)).max(1.0)];
        Self {
            axes,
            ranges: [range(axes[0]), range(axes[1])],
            resolution: [resolution, resolution],
        }
    }

    fn validate(&self, network: &GasNetwork) -> Result<()> {
        if self.axes[0] == self.axes[1] {
            return Err(Error::validation("axes", "raster axes must differ"));
        }
        for (k, a) in self.axes.iter().enumerate() {
            match *a {
                Axis::Node(j) if j >= network.nodes.len() => return Err(Error::validation(format!("axes[{k}]"), "node out of range")),
                Axis::Unit(u) if u >= network.units.len() => return Err(Error::validation(format!("axes[{k}]"), "unit out of range")),
                _ => {}
            }
            if a.members(network).is_empty() {
                return Err(Error::validation(format!("axes[{k}]"), format!("{} hosts no gas-fired unit", a.label(network))));
            }
        }
        if let (Axis::Node(j), Axis::Unit(u)) | (Axis::Unit(u), Axis::Node(j)) = (self.axes[0], self.axes[1]) {
            if network.units[u].node == j {
                return Err(Error::validation("axes", "unit axis lies on the node axis"));
            }
        }
        for (k, r) in self.resolution.iter().enumerate() {
            if !(2..=MAX_RASTER_RESOLUTION).contains(r) {
                return Err(Error::validation(format!("resolution[{k}]"), format!("must be within 2..={MAX_RASTER_RESOLUTION}, got {r}")));
            }
        }
        for (k, r) in self.ranges.iter().enumerate() {
            if !(r[0] < r[1]) || !r[0].is_finite() || !r[1].is_finite() {
                return Err(Error::validation(format!("ranges[{k}]"), "range must be increasing and finite"));
            }
        }
        Ok(())
    }

    fn coordinate(&self, axis: usize, i: usize) -> f64 {
        let [lo, hi] = self.ranges[axis];
        lo + (hi - lo) * i as f64 / (self.resolution[axis] - 1) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CellState {
    Secure,
    Insecure,
    /// The simulator failed; counted as insecure.
    Diverged,
}

/// Brute-force security raster.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Raster {
    pub labels: [String; 2],
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Row-major in `y`: cell `(i, j)` at `j * x.len() + i`.
    pub cells: Vec<CellState>,
}

impl Raster {
    pub fn cell(&self, i: usize, j: usize) -> CellState {
        self.cells[j * self.x.len() + i]
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|c| **c == state).count()
    }

    /// Secure cell indices, in raster order.
    pub fn secure_set(&self) -> Vec<usize> {
        self.cells.iter().enumerate().filter(|(_, c)| **c == CellState::Secure).map(|(k, _)| k).collect()
    }

    fn nearest(values: &[f64], v: f64) -> usize {
        let step = (values[values.len() - 1] - values[0]) / (values.len() - 1) as f64;
        ((v - values[0]) / step).round().clamp(0.0, (values.len() - 1) as f64) as usize
    }

    /// True when the cell nearest to `(x, y)` is secure or borders a secure
    /// cell. Points outside the raster are never accepted.
    pub fn secure_or_frontier(&self, x: f64, y: f64) -> bool {
        let (nx, ny) = (self.x.len(), self.y.len());
        let half = |v: &[f64]| 0.5 * (v[1] - v[0]);
        if x < self.x[0] - half(&self.x) || x > self.x[nx - 1] + half(&self.x) || y < self.y[0] - half(&self.y) || y > self.y[ny - 1] + half(&self.y) {
            return false;
        }
        let (i, j) = (Self::nearest(&self.x, x), Self::nearest(&self.y, y));
        for dj in -1i64..=1 {
            for di in -1i64..=1 {
                let (a, b) = (i as i64 + di, j as i64 + dj);
                if a >= 0 && b >= 0 && (a as usize) < nx && (b as usize) < ny && self.cell(a as usize, b as usize) == CellState::Secure {
                    return true;
                }
            }
        }
        false
    }

    /// CSV with header `x,y,state`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,state\n");
        for (j, y) in self.y.iter().enumerate() {
            for (i, x) in self.x.iter().enumerate() {
                let state = match self.cell(i, j) {
                    CellState::Secure => "secure",
                    CellState::Insecure => "insecure",
                    CellState::Diverged => "diverged",
                };
                out.push_str(&format!("{x},{y},{state}\n"));
            }
        }
        out
    }

    pub fn from_csv(text: &str, labels: [String; 2]) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut rows = Vec::new();
        for (k, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Parse(format!("raster line {}: {line}", k + 1));
            if f.len() != 3 {
                return Err(bad());
            }
            let x: f64 = f[0].parse().map_err(|_| bad())?;
            let y: f64 = f[1].parse().map_err(|_| bad())?;
            let state = match f[2] {
                "secure" => CellState::Secure,
                "insecure" => CellState::Insecure,
                "diverged" => CellState::Diverged,
                _ => return Err(bad()),
            };
            if !xs.contains(&x) {
                xs.push(x);
            }
            if !ys.contains(&y) {
                ys.push(y);
            }
            rows.push(state);
        }
        if xs.len() < 2 || ys.len() < 2 || rows.len() != xs.len() * ys.len() {
            return Err(Error::Parse("raster is not a full grid".into()));
        }
        Ok(Self {
            labels,
            x: xs,
            y: ys,
            cells: rows,
        })
    }
}

/// Simulates every raster cell with constant withdrawals. Units off both
/// axes stay at their dispatch.
pub fn raster_region<T: Scalar>(network: &GasNetwork, grid: &Grid, initial: &SteadyState<T>, spec: &RasterSpec, newton: &NewtonOptions, tolerance: f64) -> Result<Raster> {
    spec.validate(network)?;
    let x: Vec<f64> = (0..spec.resolution[0]).map(|i| spec.coordinate(0, i)).collect();
    let y: Vec<f64> = (0..spec.resolution[1]).map(|j| spec.coordinate(1, j)).collect();
    let dispatch = network.dispatch();
    let cells: Vec<CellState> = (0..x.len() * y.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % x.len(), k / x.len());
            let mut w = dispatch.clone();
            spec.axes[0].assign(network, x[i], &mut w);
            spec.axes[1].assign(network, y[j], &mut w);
            let units: Vec<T> = w.into_iter().map(T::of).collect();
            match simulate(network, grid, initial, &units, newton) {
                Ok(traj) if check_security(network, &traj, tolerance).is_secure() => CellState::Secure,
                Ok(_) => CellState::Insecure,
                Err(_) => CellState::Diverged,
            }
        })
        .collect();
    let diverged = cells.iter().filter(|c| **c == CellState::Diverged).count();
    if diverged > 0 {
        log::warn!("{diverged} raster cells failed to simulate");
    }
    Ok(Raster {
        labels: [spec.axes[0].label(network), spec.axes[1].label(network)],
        x,
        y,
        cells,
    })
}

/// Axis coordinates of the withdrawal point with adjustment `d_g`.
pub fn ray_point(network: &GasNetwork, axes: [Axis; 2], d_g: f64) -> [f64; 2] {
    let w = network.withdrawals(d_g);
    [axes[0].value(network, &w), axes[1].value(network, &w)]
}
