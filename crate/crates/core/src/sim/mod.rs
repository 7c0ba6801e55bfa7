//! Nonlinear solver for the discretized gas dynamics.
//!
//! Each pipe carries densities and mass flows at its segmentation points.
//! Between two points the momentum balance reads
//! `rho_{s+1} - rho_s + phi m_s^2 / rho_s = 0` with `phi = 8 f dx / (pi^2 D^5)`
//! (divided by the squared sound speed under
//! [`MomentumScaling::SoundSpeedSquared`]), and the mass balance uses the
//! storage stencil of the grid with the flux difference at the new time level.
//! Pipe ends take the density of their node, scaled by the compression ratio
//! for pipes leaving a compressor node, and every node balances its pipe flows
//! against wells, loads, gas-fired units and compressor fuel.
//!
//! A Newton step eliminates each pipe's local unknowns and solves a dense
//! system in the node densities only; a dense solve of the full system is the
//! fallback when a pipe block is singular (zero flow).

mod newton;
mod security;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Grid, StorageStencil};
use crate::network::{GasNetwork, LinepackForm, MomentumScaling};
use crate::scalar::Scalar;

pub use security::{check_security, SecurityReport, Violation, ViolationKind, DEFAULT_SECURITY_TOLERANCE};

/// Densities (kg/m3) and mass flows (kg/s) at one time level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemState<T> {
    /// `rho[pipe][seg]`.
    pub rho: Vec<Vec<T>>,
    /// `flow[pipe][seg]`.
    pub flow: Vec<Vec<T>>,
    pub node_rho: Vec<T>,
}

impl<T: Scalar> SystemState<T> {
    /// Uniform density, zero flow.
    pub fn uniform(network: &GasNetwork, grid: &Grid, rho: T) -> Self {
        Self {
            rho: grid.pipes.iter().map(|p| vec![rho; p.n_seg]).collect(),
            flow: grid.pipes.iter().map(|p| vec![T::zero(); p.n_seg]).collect(),
            node_rho: vec![rho; network.nodes.len()],
        }
    }
}

/// States at every time level of the horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory<T> {
    pub states: Vec<SystemState<T>>,
    /// Linepack at each time level in the network's configured form.
    pub linepack: Vec<T>,
    /// Unit withdrawals applied over the horizon.
    pub units: Vec<T>,
    pub wells: Vec<T>,
}

/// Fixed injections and withdrawals.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary<T> {
    /// Well outputs; `None` marks the well that balances a steady solve.
    pub wells: Vec<Option<T>>,
    pub units: Vec<T>,
}

/// Steady state together with the resolved well outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteadyState<T> {
    pub state: SystemState<T>,
    pub wells: Vec<T>,
}

/// Newton controls.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Scaled residual tolerance (density rows by the reference density, flow
    /// rows by the total withdrawal).
    pub tolerance: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            tolerance: 1e-8,
            max_halvings: 10,
        }
    }
}

/// Per-pipe coefficient of `m^2 / rho` in the momentum balance between two
/// neighbouring points.
pub fn momentum_coefficient(network: &GasNetwork, pipe: usize, dx: f64) -> f64 {
    let p = &network.pipes[pipe];
    let k = p.friction_coefficient() * dx;
    match network.globals.momentum {
        MomentumScaling::Literal => k,
        MomentumScaling::SoundSpeedSquared => k / (network.globals.sound_speed * network.globals.sound_speed),
    }
}

/// Stored gas mass `sum rho A dx` with the grid's storage weights.
pub fn stored_mass<T: Scalar>(network: &GasNetwork, grid: &Grid, state: &SystemState<T>) -> T {
    let mut total = T::zero();
    for (p, pg) in grid.pipes.iter().enumerate() {
        let scale = T::of(network.pipes[p].area() * pg.dx);
        for (w, rho) in grid.storage_weights(p).iter().zip(&state.rho[p]) {
            total += T::of(*w) * *rho * scale;
        }
    }
    total
}

/// Weight of each point of a pipe in the network's linepack sum: `A dx` times
/// the storage weight for stored mass, or `pi D^2 dx / (8 dt)` per point for
/// the printed rate form.
pub fn linepack_weights(network: &GasNetwork, grid: &Grid, pipe: usize) -> Vec<f64> {
    let pg = &grid.pipes[pipe];
    let p = &network.pipes[pipe];
    match network.globals.linepack_form {
        LinepackForm::Mass => grid.storage_weights(pipe).into_iter().map(|w| w * p.area() * pg.dx).collect(),
        LinepackForm::PrintedRate => vec![std::f64::consts::PI * p.diameter * p.diameter * pg.dx / (8.0 * grid.dt); pg.n_seg],
    }
}

/// Linepack in the form configured for the network.
pub fn linepack<T: Scalar>(network: &GasNetwork, grid: &Grid, state: &SystemState<T>) -> T {
    let mut total = T::zero();
    for p in 0..grid.pipes.len() {
        for (w, rho) in linepack_weights(network, grid, p).into_iter().zip(&state.rho[p]) {
            total += T::of(w) * *rho;
        }
    }
    total
}

/// Net withdrawal per node: loads plus units minus wells with fixed output.
pub(crate) fn node_withdrawals<T: Scalar>(network: &GasNetwork, boundary: &Boundary<T>) -> Vec<T> {
    let mut w = vec![T::zero(); network.nodes.len()];
    for l in &network.loads {
        w[l.node] += T::of(l.demand);
    }
    for (u, d) in network.units.iter().zip(&boundary.units) {
        w[u.node] += *d;
    }
    for (g, out) in network.wells.iter().zip(&boundary.wells) {
        if let Some(v) = out {
            w[g.node] -= *v;
        }
    }
    w
}

/// Compressor fuel drawn at each node for a state.
pub fn compressor_fuel<T: Scalar>(network: &GasNetwork, state: &SystemState<T>) -> Vec<T> {
    let mut fuel = vec![T::zero(); network.nodes.len()];
    for (j, node) in network.nodes.iter().enumerate() {
        if let Some(c) = node.compressor {
            let k = T::of(c.consumption_factor());
            for p in network.pipes_from(j) {
                fuel[j] += k * state.flow[p][0];
            }
        }
    }
    fuel
}

/// Net mass injection into the pipes (wells minus loads, units and
/// compressor fuel) for a state.
pub fn net_injection<T: Scalar>(network: &GasNetwork, state: &SystemState<T>, units: &[T], wells: &[T]) -> T {
    let boundary = Boundary {
        wells: wells.iter().map(|w| Some(*w)).collect(),
        units: units.to_vec(),
    };
    let w: T = node_withdrawals(network, &boundary).into_iter().fold(T::zero(), |a, v| a + v);
    let fuel: T = compressor_fuel(network, state).into_iter().fold(T::zero(), |a, v| a + v);
    -w - fuel
}

/// One implicit time step from `prev` under fixed injections.
pub fn step<T: Scalar>(network: &GasNetwork, grid: &Grid, prev: &SystemState<T>, boundary: &Boundary<T>, options: &NewtonOptions) -> Result<SystemState<T>> {
    if boundary.wells.iter().any(Option::is_none) {
        return Err(Error::validation("wells", "transient steps need every well output fixed"));
    }
    newton::solve(network, grid, newton::Mode::Transient { prev }, boundary, prev.clone(), options)
}

/// Steady state with the given withdrawals. The density at the network's
/// reference node is pinned to `reference_density`. A well with open output
/// balances the network; without one, supply and demand must already balance.
pub fn solve_steady<T: Scalar>(network: &GasNetwork, grid: &Grid, boundary: &Boundary<T>, reference_density: T, options: &NewtonOptions) -> Result<SteadyState<T>> {
    let slack = boundary.wells.iter().position(Option::is_none);
    if boundary.wells.iter().filter(|w| w.is_none()).count() > 1 {
        return Err(Error::validation("wells", "at most one well may balance a steady state"));
    }
    let mut guess = SystemState::uniform(network, grid, reference_density);
    // Flow in the nominal pipe direction; the value only breaks the symmetry
    // of the friction term.
    guess.flow.iter_mut().for_each(|f| f.iter_mut().for_each(|v| *v = T::one()));
    let (state, slack_value) = newton::solve_steady(network, grid, boundary, slack, reference_density, guess, options)?;
    let wells = boundary
        .wells
        .iter()
        .map(|w| w.unwrap_or(slack_value))
        .collect();
    Ok(SteadyState { state, wells })
}

/// Initial condition built from the network's initial-state specification:
/// a steady state with withdrawals scaled from the dispatch point.
pub fn initialize<T: Scalar>(network: &GasNetwork, grid: &Grid, options: &NewtonOptions) -> Result<SteadyState<T>> {
    let scale = network.initial.withdrawal_scale;
    let boundary = Boundary {
        wells: network.wells.iter().map(|w| w.output.map(T::of)).collect(),
        units: network.units.iter().map(|u| T::of(u.dispatch * scale)).collect(),
    };
    let rho = network.initial.reference_density.unwrap_or(network.globals.reference_density);
    solve_steady(network, grid, &boundary, T::of(rho), options)
}

/// Runs the horizon with constant unit withdrawals and the well outputs of
/// the initial condition.
pub fn simulate<T: Scalar>(network: &GasNetwork, grid: &Grid, initial: &SteadyState<T>, units: &[T], options: &NewtonOptions) -> Result<Trajectory<T>> {
    if units.len() != network.units.len() {
        return Err(Error::validation("units", format!("expected {} withdrawals, got {}", network.units.len(), units.len())));
    }
    let boundary = Boundary {
        wells: initial.wells.iter().map(|w| Some(*w)).collect(),
        units: units.to_vec(),
    };
    let mut states = Vec::with_capacity(grid.time_points());
    states.push(initial.state.clone());
    for t in 0..grid.steps {
        let next = step(network, grid, &states[t], &boundary, options)?;
        states.push(next);
    }
    let linepack = states.iter().map(|s| linepack(network, grid, s)).collect();
    Ok(Trajectory {
        states,
        linepack,
        units: units.to_vec(),
        wells: initial.wells.clone(),
    })
}

/// Weights of the upstream and downstream point in a segment's storage term,
/// in units of `area * dx / dt`.
pub(crate) fn storage_coefficients(stencil: StorageStencil) -> (f64, f64) {
    match stencil {
        StorageStencil::Averaged => (0.5, 0.5),
        StorageStencil::Downstream => (0.0, 1.0),
    }
}

#[cfg(test)]
mod tests;
