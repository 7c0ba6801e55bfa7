//! Finite-difference space-time grid and the variable index map shared by the
//! simulator and the program builder.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::GasNetwork;

/// Which points carry the storage (time-derivative) term of a segment's mass
/// balance. The flux difference is always taken at the new time level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageStencil {
    /// Average of the two segment endpoints.
    #[default]
    Averaged,
    /// Downstream endpoint only.
    Downstream,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Density,
    Flow,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipeGrid {
    pub n_seg: usize,
    /// Metres.
    pub dx: f64,
    /// First point of this pipe in the flat point numbering.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Seconds.
    pub dt: f64,
    /// Seconds.
    pub horizon: f64,
    /// Number of steps; time points run `0..=steps`.
    pub steps: usize,
    pub pipes: Vec<PipeGrid>,
    pub n_points: usize,
    pub stencil: StorageStencil,
}

/// Builds the grid. `horizon` must be a whole number of steps.
pub fn build_grid(network: &GasNetwork, dt: f64, horizon: f64) -> Result<Grid> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Grid(format!("time step must be positive, got {dt}")));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Grid(format!("horizon must be positive, got {horizon}")));
    }
    let ratio = horizon / dt;
    let steps = ratio.round();
    if (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::Grid(format!("horizon {horizon} s is not a multiple of the step {dt} s")));
    }
    let mut offset = 0;
    let pipes = network
        .pipes
        .iter()
        .map(|p| {
            let g = PipeGrid {
                n_seg: p.n_seg,
                dx: p.segment_length(),
                offset,
            };
            offset += p.n_seg;
            g
        })
        .collect();
    Ok(Grid {
        dt,
        horizon,
        steps: steps as usize,
        pipes,
        n_points: offset,
        stencil: StorageStencil::default(),
    })
}

impl Grid {
    pub fn with_stencil(mut self, stencil: StorageStencil) -> Self {
        self.stencil = stencil;
        self
    }

    pub fn time_points(&self) -> usize {
        self.steps + 1
    }

    /// Number of `(rho, m)` variables over all points and time levels.
    pub fn n_vars(&self) -> usize {
        2 * self.n_points * self.time_points()
    }

    /// Flat index of a state variable. Ordering: pipes in file order, then
    /// segmentation points, then time levels, density before flow.
    pub fn index(&self, pipe: usize, seg: usize, time: usize, field: Field) -> usize {
        let pg = &self.pipes[pipe];
        debug_assert!(seg < pg.n_seg && time <= self.steps);
        let point = (pg.offset + seg) * self.time_points() + time;
        2 * point
            + match field {
                Field::Density => 0,
                Field::Flow => 1,
            }
    }

    /// Inverse of [`Grid::index`].
    pub fn locate(&self, index: usize) -> Option<(usize, usize, usize, Field)> {
        if index >= self.n_vars() {
            return None;
        }
        let field = if index.is_multiple_of(2) { Field::Density } else { Field::Flow };
        let point = index / 2;
        let tp = self.time_points();
        let (flat, time) = (point / tp, point % tp);
        let pipe = self.pipes.partition_point(|g| g.offset <= flat) - 1;
        Some((pipe, flat - self.pipes[pipe].offset, time, field))
    }

    /// Total segments (point pairs) over all pipes.
    pub fn n_segments(&self) -> usize {
        self.pipes.iter().map(|p| p.n_seg - 1).sum()
    }

    /// Weight of each point of a pipe in the stored-mass sum, in units of
    /// `area * dx`. Matches the storage stencil so that stored mass changes by
    /// exactly `dt` times the net inflow.
    pub fn storage_weights(&self, pipe: usize) -> Vec<f64> {
        let n = self.pipes[pipe].n_seg;
        match self.stencil {
            StorageStencil::Averaged => (0..n)
                .map(|s| if s == 0 || s == n - 1 { 0.5 } else { 1.0 })
                .collect(),
            StorageStencil::Downstream => (0..n).map(|s| if s == 0 { 0.0 } else { 1.0 }).collect(),
        }
    }
}
