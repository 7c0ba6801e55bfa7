use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::network::GasNetwork;
use crate::scalar::Scalar;
use crate::sim::{linepack, linepack_weights, momentum_coefficient, storage_coefficients, SteadyState, SystemState};
use crate::solver::SolveResult;

use super::conic::{ConeTag, ConicProgram, RotatedCone};

/// Which end of the adjustment range a program pushes towards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Largest extra withdrawal.
    Upper,
    /// Largest withdrawal reduction.
    Lower,
}

impl Direction {
    /// `+1` for upper, `-1` for lower: the bound objective is `-sign * d_G`.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Upper => 1.0,
            Direction::Lower => -1.0,
        }
    }
}

/// Objective of a built program.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective<T> {
    /// Minimize the sum of lifted variables.
    RankMin,
    /// Rank minimization with the adjustment capped: `-sign * d_G <= eta`.
    RankMinCapped(T),
    /// Minimize `-sign * d_G` under the relaxation.
    Bound,
}

/// Time model of a built program.
#[derive(Debug, Clone, Copy)]
pub enum Model<'a, T> {
    /// Transient horizon from a known initial state with fixed well outputs.
    Dynamic { initial: &'a SteadyState<T> },
    /// One steady time level. Wells with output bounds are free within them,
    /// the others are held at `wells`.
    Steady { wells: &'a [T] },
}

/// A program together with the map from model quantities to its variables.
#[derive(Debug, Clone)]
pub struct BuiltProgram<T> {
    pub program: ConicProgram<T>,
    pub direction: Direction,
    /// Total adjustment variable.
    pub d_g: usize,
    /// Time levels carrying decision variables.
    pub levels: Vec<usize>,
    /// `rho[level][point]`, points numbered as in the grid.
    pub rho: Vec<Vec<usize>>,
    pub flow: Vec<Vec<usize>>,
    /// `node_rho[level][node]`.
    pub node_rho: Vec<Vec<usize>>,
    /// Free well outputs (steady programs only).
    pub wells: Vec<Option<usize>>,
    /// Linepack per level divided by the sum of linepack weights, i.e. a mean
    /// density (dynamic programs only).
    pub linepack: Vec<usize>,
    pub linepack_scale: f64,
}

/// Solution of a built program in model terms.
#[derive(Debug, Clone, Serialize)]
pub struct LiftedSolution<T> {
    pub x: Vec<T>,
    /// `[gamma, flow, rho]` per cone, i.e. the matrix `[gamma flow; flow rho]`.
    pub matrices: Vec<[T; 3]>,
    pub tags: Vec<ConeTag>,
    pub objective: T,
    /// Total adjustment of unit withdrawals, kg/s.
    pub d_g: T,
}

impl<T: Scalar> BuiltProgram<T> {
    pub fn lift(&self, result: &SolveResult<T>) -> LiftedSolution<T> {
        self.lift_point(result.x.clone(), result.primal_objective)
    }

    fn lift_point(&self, x: Vec<T>, objective: T) -> LiftedSolution<T> {
        let matrices = self.program.cones.iter().map(|c| [x[c.gamma], x[c.flow], x[c.rho]]).collect();
        LiftedSolution {
            d_g: x[self.d_g],
            matrices,
            tags: self.program.cone_tags.clone(),
            objective,
            x,
        }
    }

    /// Program point for a simulated trajectory with adjustment `d_g`, lifting
    /// each product with `gamma = m^2 / rho`.
    pub fn point_from_states(&self, network: &GasNetwork, grid: &Grid, states: &[SystemState<T>], d_g: T, wells: &[T]) -> Vec<T> {
        let p = &self.program;
        let mut x = vec![T::zero(); p.n_vars];
        x[self.d_g] = d_g;
        for (k, &t) in self.levels.iter().enumerate() {
            let st = &states[t];
            for (pi, pg) in grid.pipes.iter().enumerate() {
                for s in 0..pg.n_seg {
                    x[self.rho[k][pg.offset + s]] = st.rho[pi][s];
                    x[self.flow[k][pg.offset + s]] = st.flow[pi][s];
                }
            }
            for (j, v) in self.node_rho[k].iter().enumerate() {
                x[*v] = st.node_rho[j];
            }
        }
        for c in &p.cones {
            x[c.gamma] = x[c.flow] * x[c.flow] / x[c.rho];
        }
        for (w, v) in self.wells.iter().enumerate() {
            if let Some(v) = v {
                x[*v] = wells[w];
            }
        }
        for (k, &t) in self.levels.iter().enumerate().take(self.linepack.len()) {
            x[self.linepack[k]] = linepack(network, grid, &states[t]) / T::of(self.linepack_scale);
        }
        x
    }
}

fn cap_note(direction: Direction) -> &'static str {
    match direction {
        Direction::Upper => "adjustment cap: -d_G <= eta",
        Direction::Lower => "adjustment cap: d_G <= eta",
    }
}

/// Builds a lifted program over `grid` for `model`.
///
/// Variables, level by level: point densities and flows, one lifted variable
/// per segment, node densities; then `d_G`, free well outputs and one slack
/// per linepack row. The lifted variable of segment `s` replaces `m_s^2 / rho_s`
/// in the momentum balance and sits in the cone `gamma rho >= m^2`.
pub fn build<T: Scalar>(network: &GasNetwork, grid: &Grid, model: Model<'_, T>, objective: Objective<T>, direction: Direction) -> Result<BuiltProgram<T>> {
    if grid.pipes.len() != network.pipes.len() {
        return Err(Error::Build("grid does not belong to this network".into()));
    }
    let levels: Vec<usize> = match model {
        Model::Dynamic { initial } => {
            let st = &initial.state;
            let shape_ok = st.rho.len() == network.pipes.len()
                && st.rho.iter().zip(&grid.pipes).all(|(r, g)| r.len() == g.n_seg)
                && st.flow.iter().zip(&grid.pipes).all(|(r, g)| r.len() == g.n_seg)
                && st.node_rho.len() == network.nodes.len()
                && initial.wells.len() == network.wells.len();
            if !shape_ok {
                return Err(Error::Build("initial state does not match the grid".into()));
            }
            (1..=grid.steps).collect()
        }
        Model::Steady { wells } => {
            if wells.len() != network.wells.len() {
                return Err(Error::Build("well outputs do not match the network".into()));
            }
            vec![0]
        }
    };
    let mut prog = ConicProgram::<T>::new(0);
    let n_nodes = network.nodes.len();
    let mut rho = Vec::with_capacity(levels.len());
    let mut flow = Vec::with_capacity(levels.len());
    let mut node_rho = Vec::with_capacity(levels.len());
    let mut gamma = Vec::with_capacity(levels.len());

    // Redundant boxes implied by monotone densities along each pipe.
    let phis: Vec<f64> = grid
        .pipes
        .iter()
        .enumerate()
        .map(|(p, pg)| momentum_coefficient(network, p, pg.dx))
        .collect();
    let boxes: Vec<(f64, f64, f64, f64)> = network
        .pipes
        .iter()
        .enumerate()
        .map(|(p, pipe)| {
            let hi = network.nodes[pipe.from].boost() * network.nodes[pipe.from].density_max;
            let lo = network.nodes[pipe.to].density_min;
            let g = (hi - lo).max(0.0) / phis[p];
            (lo, hi, g, (g * hi).sqrt())
        })
        .collect();

    for &t in &levels {
        let mut r = vec![0; grid.n_points];
        let mut m = vec![0; grid.n_points];
        let mut g = vec![None; grid.n_points];
        for (p, pg) in grid.pipes.iter().enumerate() {
            let (lo, hi, gmax, mmax) = boxes[p];
            for s in 0..pg.n_seg {
                let i = pg.offset + s;
                r[i] = prog.add_var(T::of(lo), T::of(hi));
                m[i] = prog.add_var(T::of(-mmax), T::of(mmax));
                if s + 1 < pg.n_seg {
                    let gi = prog.add_var(T::zero(), T::of(gmax));
                    g[i] = Some(gi);
                    prog.add_cone(RotatedCone { gamma: gi, rho: r[i], flow: m[i] });
                    prog.cone_tags.push(ConeTag { pipe: p, seg: s, time: t });
                }
            }
        }
        let nr: Vec<usize> = network
            .nodes
            .iter()
            .map(|n| prog.add_var(T::of(n.density_min), T::of(n.density_max)))
            .collect();
        rho.push(r);
        flow.push(m);
        gamma.push(g);
        node_rho.push(nr);
    }
    prog.notes.push("redundant boxes on point densities, flows and lifted variables from monotone density along each pipe".into());

    // Unit output nonnegativity: dispatch + beta d_G >= fuel intercept.
    let mut dg_lo = f64::NEG_INFINITY;
    let mut dg_hi = f64::INFINITY;
    for u in &network.units {
        let need = u.fuel_intercept - u.dispatch;
        if u.participation > 0.0 {
            dg_lo = dg_lo.max(need / u.participation);
        } else if need > 0.0 {
            return Err(Error::Build(format!("unit {} is dispatched below its no-load fuel use", u.id)));
        }
    }
    match objective {
        Objective::RankMinCapped(eta) => {
            let eta = eta.to_f64_lossy();
            if !eta.is_finite() {
                return Err(Error::Build("adjustment cap must be finite".into()));
            }
            match direction {
                Direction::Upper => dg_lo = dg_lo.max(-eta),
                Direction::Lower => dg_hi = dg_hi.min(eta),
            }
            prog.notes.push(cap_note(direction).into());
        }
        Objective::RankMin | Objective::Bound => {}
    }
    let d_g = prog.add_var(T::of(dg_lo), T::of(dg_hi));

    let wells: Vec<Option<usize>> = match model {
        Model::Dynamic { .. } => vec![None; network.wells.len()],
        Model::Steady { .. } => network
            .wells
            .iter()
            .map(|w| match (w.min_output, w.max_output) {
                (None, None) => None,
                (lo, hi) => Some(prog.add_var(T::of(lo.unwrap_or(0.0)), hi.map_or(T::infinity(), T::of))),
            })
            .collect(),
    };
    let fixed_wells: Vec<T> = match model {
        Model::Dynamic { initial } => initial.wells.clone(),
        Model::Steady { wells } => wells.to_vec(),
    };

    let (wa, wb) = storage_coefficients(grid.stencil);
    let mut linepack_vars = Vec::new();
    let lp_weights: Vec<Vec<f64>> = (0..network.pipes.len()).map(|p| linepack_weights(network, grid, p)).collect();
    let lp_total: f64 = lp_weights.iter().flatten().sum();

    for k in 0..levels.len() {
        for (p, pg) in grid.pipes.iter().enumerate() {
            let pipe = &network.pipes[p];
            let n = pg.n_seg;
            let o = pg.offset;
            let cap = pipe.area() * pg.dx / grid.dt;
            for s in 0..n - 1 {
                let (r0, r1, m0, m1) = (rho[k][o + s], rho[k][o + s + 1], flow[k][o + s], flow[k][o + s + 1]);
                let g = gamma[k][o + s].expect("segment has a lifted variable");
                prog.add_eq(&[(r1, T::one()), (r0, -T::one()), (g, T::of(phis[p]))], T::zero());
                match model {
                    Model::Steady { .. } => {
                        prog.add_eq(&[(m1, T::one()), (m0, -T::one())], T::zero());
                    }
                    Model::Dynamic { initial } => {
                        let mut terms = vec![(m1, T::one()), (m0, -T::one()), (r0, T::of(cap * wa)), (r1, T::of(cap * wb))];
                        let rhs = if k == 0 {
                            let old = &initial.state.rho[p];
                            T::of(cap) * (T::of(wa) * old[s] + T::of(wb) * old[s + 1])
                        } else {
                            terms.push((rho[k - 1][o + s], T::of(-cap * wa)));
                            terms.push((rho[k - 1][o + s + 1], T::of(-cap * wb)));
                            T::zero()
                        };
                        terms.retain(|(_, v)| *v != T::zero());
                        prog.add_eq(&terms, rhs);
                    }
                }
            }
            let boost = network.nodes[pipe.from].boost();
            prog.add_eq(&[(rho[k][o], T::one()), (node_rho[k][pipe.from], T::of(-boost))], T::zero());
            prog.add_eq(&[(rho[k][o + n - 1], T::one()), (node_rho[k][pipe.to], -T::one())], T::zero());
        }
        for j in 0..n_nodes {
            let mut terms = Vec::new();
            let mut rhs = 0.0;
            for p in network.pipes_to(j) {
                terms.push((flow[k][grid.pipes[p].offset + grid.pipes[p].n_seg - 1], T::one()));
            }
            let fuel = 1.0 + network.nodes[j].compressor.map_or(0.0, |c| c.consumption_factor());
            for p in network.pipes_from(j) {
                terms.push((flow[k][grid.pipes[p].offset], T::of(-fuel)));
            }
            let mut beta = 0.0;
            for u in network.units.iter().filter(|u| u.node == j) {
                rhs += u.dispatch;
                beta += u.participation;
            }
            if beta != 0.0 {
                terms.push((d_g, T::of(-beta)));
            }
            for l in network.loads.iter().filter(|l| l.node == j) {
                rhs += l.demand;
            }
            let mut rhs = T::of(rhs);
            for (w, _) in network.wells.iter().enumerate().filter(|(_, w)| w.node == j) {
                match wells[w] {
                    Some(v) => terms.push((v, T::one())),
                    None => rhs -= fixed_wells[w],
                }
            }
            if terms.is_empty() {
                if rhs != T::zero() {
                    return Err(Error::Build(format!("node {} has no pipes but a nonzero balance", network.nodes[j].id)));
                }
                continue;
            }
            prog.add_eq(&terms, rhs);
        }
        if let Model::Dynamic { .. } = model {
            let slack = prog.add_var(T::of(network.globals.linepack_min / lp_total), T::infinity());
            linepack_vars.push(slack);
            let mut terms = vec![(slack, -T::one())];
            for (p, pg) in grid.pipes.iter().enumerate() {
                for (s, w) in lp_weights[p].iter().enumerate() {
                    if *w != 0.0 {
                        terms.push((rho[k][pg.offset + s], T::of(*w / lp_total)));
                    }
                }
            }
            prog.add_eq(&terms, T::zero());
        }
    }

    match objective {
        Objective::RankMin | Objective::RankMinCapped(_) => {
            for c in &prog.cones {
                prog.objective[c.gamma] = T::one();
            }
        }
        Objective::Bound => prog.objective[d_g] = T::of(-direction.sign()),
    }
    prog.validate()?;
    Ok(BuiltProgram {
        program: prog,
        direction,
        d_g,
        levels,
        rho,
        flow,
        node_rho,
        wells,
        linepack: linepack_vars,
        linepack_scale: lp_total,
    })
}

/// Rank-minimizing program over the transient horizon with `d_G` free.
pub fn build_dsr1<T: Scalar>(network: &GasNetwork, grid: &Grid, initial: &SteadyState<T>, direction: Direction) -> Result<BuiltProgram<T>> {
    build(network, grid, Model::Dynamic { initial }, Objective::RankMin, direction)
}

/// Rank-minimizing program with the adjustment capped by `eta`.
pub fn build_dsr2<T: Scalar>(network: &GasNetwork, grid: &Grid, initial: &SteadyState<T>, eta: T, direction: Direction) -> Result<BuiltProgram<T>> {
    build(network, grid, Model::Dynamic { initial }, Objective::RankMinCapped(eta), direction)
}

/// Relaxation pushing `d_G` to its bound; the optimum is the lower end of the
/// cap search range.
pub fn build_relaxed_bound<T: Scalar>(network: &GasNetwork, grid: &Grid, initial: &SteadyState<T>, direction: Direction) -> Result<BuiltProgram<T>> {
    build(network, grid, Model::Dynamic { initial }, Objective::Bound, direction)
}

/// Steady-state counterpart of the transient programs.
pub fn build_ssr<T: Scalar>(network: &GasNetwork, grid: &Grid, wells: &[T], objective: Objective<T>, direction: Direction) -> Result<BuiltProgram<T>> {
    build(network, grid, Model::Steady { wells }, objective, direction)
}
