//! Boundary search: rank-minimizing relaxations with a cap on the adjustment,
//! and a parallel bisection over the cap for the tightest rank-one solution.
//!
//! The cap `eta` bounds `-d_G` for the upper boundary and `d_G` for the lower
//! one. The relaxed bound gives the smallest cap worth trying; when the capped
//! program is already rank one there, that solution is the boundary.
//! Otherwise each round samples the bracket at evenly spaced caps, endpoints
//! included, keeps the smallest rank-one sample as the new upper end and its
//! left neighbour as the new lower end, until the bracket is narrower than
//! the tolerance.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::network::GasNetwork;
use crate::program::{build, relaxation_ratio, Direction, LiftedSolution, Model, Objective, DEFAULT_RANK_ONE_THRESHOLD};
use crate::scalar::Scalar;
use crate::sim::{check_security, simulate, NewtonOptions, SecurityReport, SteadyState, DEFAULT_SECURITY_TOLERANCE};
use crate::solver::{solve, SolveStatus, SolverOptions};

/// Samples per round used when nothing else is configured.
pub const DEFAULT_SAMPLES: usize = 11;

#[derive(Debug, Clone, PartialEq)]
pub struct FeOptions {
    /// Caps sampled per round, bracket ends included. At least 3.
    pub samples: usize,
    /// Bracket width at which the search stops. `None` picks
    /// `1e-3 * max(|eta_min|, 1)`.
    pub epsilon: Option<f64>,
    /// Worker threads; `None` uses `samples - 2`.
    pub threads: Option<usize>,
    pub rank_one_threshold: f64,
    pub max_rounds: usize,
    pub solver: SolverOptions,
}

impl Default for FeOptions {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SAMPLES,
            epsilon: None,
            threads: None,
            rank_one_threshold: DEFAULT_RANK_ONE_THRESHOLD,
            max_rounds: 50,
            solver: SolverOptions::default(),
        }
    }
}

impl FeOptions {
    fn validate(&self) -> Result<()> {
        if self.samples < 3 {
            return Err(Error::validation("samples", format!("at least 3 samples per round required, got {}", self.samples)));
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0) {
                return Err(Error::validation("epsilon", format!("must be positive, got {e}")));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::validation("threads", "must be positive"));
        }
        Ok(())
    }

    pub fn thread_count(&self) -> usize {
        self.threads.unwrap_or(self.samples - 2).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleOutcome {
    RankOne,
    NotRankOne,
    /// Solver error or a status other than (almost) optimal.
    Failed,
}

/// One capped solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub eta: f64,
    pub outcome: SampleOutcome,
    pub status: Option<SolveStatus>,
    pub min_ratio: Option<f64>,
    pub d_g: Option<f64>,
    pub iterations: usize,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Round {
    pub samples: Vec<Sample>,
    /// Bracket `[lower, upper]` kept after this round.
    pub bracket: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionTrace {
    pub direction: Direction,
    /// Optimum of the relaxed bound program.
    pub eta_min: f64,
    pub epsilon: f64,
    /// Capped solve at `eta_min`.
    pub first: Sample,
    pub rounds: Vec<Round>,
    /// Boundary taken from the first capped solve.
    pub short_circuit: bool,
}

/// Simulator check of a withdrawal point on the adjustment ray.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub d_g: f64,
    pub secure: bool,
    pub report: SecurityReport,
    /// Smallest distance of a node density to its bounds over the horizon,
    /// negative when violated.
    pub density_margin: f64,
    /// Smallest linepack minus its floor over the horizon.
    pub linepack_margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryResult<T> {
    pub direction: Direction,
    /// Total adjustment at the boundary, kg/s.
    pub d_g: f64,
    /// Cap of the accepted solve.
    pub eta: f64,
    pub min_ratio: f64,
    /// False when no capped solve was rank one and the uncapped
    /// rank-minimizing solution is reported instead, with `d_g` clamped to
    /// the dispatch side of zero.
    pub certified: bool,
    #[serde(skip)]
    pub solution: LiftedSolution<T>,
    pub trace: BisectionTrace,
    pub verdict: Option<Verdict>,
}

struct Solved<T> {
    sample: Sample,
    solution: Option<LiftedSolution<T>>,
}

fn run_capped<T: Scalar>(network: &GasNetwork, grid: &Grid, model: Model<'_, T>, objective: Objective<T>, eta: f64, direction: Direction, options: &FeOptions) -> Solved<T> {
    let start = Instant::now();
    let mut sample = Sample {
        eta,
        outcome: SampleOutcome::Failed,
        status: None,
        min_ratio: None,
        d_g: None,
        iterations: 0,
        seconds: 0.0,
        error: None,
    };
    let result = build(network, grid, model, objective, direction).and_then(|b| solve(&b.program, &options.solver).map(|r| (b, r)));
    let solution = match result {
        Ok((built, r)) => {
            sample.status = Some(r.status);
            sample.iterations = r.iterations;
            if r.status.is_solved() {
                let lifted = built.lift(&r);
                let ratio = relaxation_ratio(&lifted.matrices);
                sample.min_ratio = Some(ratio.min);
                sample.d_g = Some(lifted.d_g.to_f64_lossy());
                sample.outcome = if ratio.is_rank_one(options.rank_one_threshold) {
                    SampleOutcome::RankOne
                } else {
                    SampleOutcome::NotRankOne
                };
                Some(lifted)
            } else {
                None
            }
        }
        Err(e) => {
            sample.error = Some(e.to_string());
            None
        }
    };
    sample.seconds = start.elapsed().as_secs_f64();
    Solved { sample, solution }
}

/// Evenly spaced caps over `[lo, hi]`, both ends exact.
pub fn sample_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| match i {
            0 => lo,
            i if i == n - 1 => hi,
            i => lo + (hi - lo) * i as f64 / (n - 1) as f64,
        })
        .collect()
}

/// Outcome of the bracket search.
pub(crate) struct Search<P> {
    pub rounds: Vec<Round>,
    /// Accepted cap and its payload; `None` when no sample was rank one.
    pub accepted: Option<(f64, Sample, P)>,
}

/// Runs the bracket search from `[lo, hi]`, where `lo` was already solved
/// (`first`) and is not rank one. `solve` must be deterministic.
pub(crate) fn bracket_search<P, F>(lo: f64, hi: f64, first: (Sample, Option<P>), epsilon: f64, samples: usize, max_rounds: usize, pool: &rayon::ThreadPool, solve: F) -> Search<P>
where
    P: Send,
    F: Fn(f64) -> (Sample, Option<P>) + Sync,
{
    let (mut lo, mut hi) = (lo, hi);
    let mut lo_end = Some(first);
    let mut hi_end: Option<(Sample, Option<P>)> = None;
    let mut rounds = Vec::new();
    let mut accepted = None;
    for _ in 0..max_rounds {
        let etas = sample_points(lo, hi, samples);
        let todo: Vec<usize> = (1..samples).filter(|&i| i < samples - 1 || hi_end.is_none()).collect();
        let solved: Vec<(Sample, Option<P>)> = pool.install(|| todo.par_iter().map(|&i| solve(etas[i])).collect());
        let mut slots: Vec<Option<(Sample, Option<P>)>> = (0..samples).map(|_| None).collect();
        slots[0] = lo_end.take();
        if let Some(h) = hi_end.take() {
            slots[samples - 1] = Some(h);
        }
        for (i, s) in todo.into_iter().zip(solved) {
            slots[i] = Some(s);
        }
        let trace: Vec<Sample> = slots.iter().map(|s| s.as_ref().expect("every sample solved").0.clone()).collect();
        let best = trace.iter().position(|s| s.outcome == SampleOutcome::RankOne);
        let Some(b) = best else {
            rounds.push(Round {
                samples: trace,
                bracket: [lo, hi],
            });
            return Search { rounds, accepted: None };
        };
        let left = b.saturating_sub(1);
        lo = etas[left];
        hi = etas[b];
        rounds.push(Round {
            samples: trace,
            bracket: [lo, hi],
        });
        let (hs, hp) = slots[b].take().expect("sample present");
        let done = hi - lo <= epsilon || b == 0;
        if done {
            accepted = hp.map(|p| (hi, hs, p));
            break;
        }
        if left < b {
            lo_end = slots[left].take();
        }
        hi_end = Some((hs, hp));
    }
    if accepted.is_none() {
        if let Some((s, Some(p))) = hi_end {
            accepted = Some((hi, s, p));
        }
    }
    Search { rounds, accepted }
}

/// Default stopping width for a relaxed bound `eta_min`.
pub fn default_epsilon(eta_min: f64) -> f64 {
    1e-3 * eta_min.abs().max(1.0)
}

/// Boundary of the adjustment range in `direction` for `model`.
pub fn evaluate_boundary_model<T: Scalar>(network: &GasNetwork, grid: &Grid, model: Model<'_, T>, direction: Direction, options: &FeOptions) -> Result<BoundaryResult<T>> {
    options.validate()?;
    let bound = run_capped(network, grid, model, Objective::Bound, f64::NAN, direction, options);
    let eta_min = match (&bound.solution, bound.sample.status) {
        (Some(s), _) => -direction.sign() * s.d_g.to_f64_lossy(),
        (None, Some(SolveStatus::PrimalInfeasible)) => {
            return Err(Error::Infeasible(format!("relaxed {direction:?} bound program has no feasible point")));
        }
        (None, status) => {
            return Err(Error::NumericalFailure {
                message: format!("relaxed {direction:?} bound solve ended with {status:?}: {}", bound.sample.error.unwrap_or_default()),
                trace: Vec::new(),
            })
        }
    };
    let epsilon = options.epsilon.unwrap_or_else(|| default_epsilon(eta_min));
    let capped = |eta: f64| {
        let s = run_capped(network, grid, model, Objective::RankMinCapped(T::of(eta)), eta, direction, options);
        (s.sample, s.solution)
    };
    let first = capped(eta_min);
    let mut trace = BisectionTrace {
        direction,
        eta_min,
        epsilon,
        first: first.0.clone(),
        rounds: Vec::new(),
        short_circuit: false,
    };
    if first.0.outcome == SampleOutcome::RankOne {
        trace.short_circuit = true;
        let solution = first.1.expect("rank-one sample carries a solution");
        return Ok(finish(direction, eta_min, first.0, solution, true, trace));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.thread_count())
        .build()
        .map_err(|e| Error::validation("threads", e.to_string()))?;
    let search = bracket_search(eta_min, eta_min.max(0.0), first, epsilon, options.samples, options.max_rounds, &pool, capped);
    trace.rounds = search.rounds;
    if let Some((eta, sample, solution)) = search.accepted {
        return Ok(finish(direction, eta, sample, solution, true, trace));
    }

    log::warn!("no rank-one solution for the {direction:?} boundary; reporting the uncapped rank-minimizing solution");
    let fallback = run_capped(network, grid, model, Objective::RankMin, f64::NAN, direction, options);
    match fallback.solution {
        Some(solution) => {
            let mut result = finish(direction, f64::NAN, fallback.sample, solution, false, trace);
            // The uncapped solve pushes d_G towards less flow; never report a
            // boundary on the wrong side of the dispatch point.
            if direction.sign() * result.d_g < 0.0 {
                result.d_g = 0.0;
            }
            Ok(result)
        }
        None => Err(Error::NoRankOneFound),
    }
}

fn finish<T: Scalar>(direction: Direction, eta: f64, sample: Sample, solution: LiftedSolution<T>, certified: bool, trace: BisectionTrace) -> BoundaryResult<T> {
    BoundaryResult {
        direction,
        d_g: solution.d_g.to_f64_lossy(),
        eta,
        min_ratio: sample.min_ratio.unwrap_or(f64::NAN),
        certified,
        solution,
        trace,
        verdict: None,
    }
}

/// Boundary of the dynamic security region in `direction`.
pub fn evaluate_boundary<T: Scalar>(network: &GasNetwork, grid: &Grid, initial: &SteadyState<T>, direction: Direction, options: &FeOptions) -> Result<BoundaryResult<T>> {
    evaluate_boundary_model(network, grid, Model::Dynamic { initial }, direction, options)
}

/// Simulates the horizon with unit withdrawals `dispatch + beta * d_g` and
/// checks every security limit.
pub fn verify_withdrawal<T: Scalar>(network: &GasNetwork, grid: &Grid, initial: &SteadyState<T>, d_g: f64, newton: &NewtonOptions, tolerance: f64) -> Result<Verdict> {
    let units: Vec<T> = network.withdrawals(d_g).into_iter().map(T::of).collect();
    let traj = simulate(network, grid, initial, &units, newton)?;
    let report = check_security(network, &traj, tolerance);
    let mut density_margin = f64::INFINITY;
    for state in traj.states.iter().skip(1) {
        for (node, rho) in network.nodes.iter().zip(&state.node_rho) {
            let rho = rho.to_f64_lossy();
            density_margin = density_margin.min(rho - node.density_min).min(node.density_max - rho);
        }
    }
    let linepack_margin = traj
        .linepack
        .iter()
        .skip(1)
        .map(|l| l.to_f64_lossy() - network.globals.linepack_min)
        .fold(f64::INFINITY, f64::min);
    Ok(Verdict {
        d_g,
        secure: report.is_secure(),
        report,
        density_margin,
        linepack_margin,
    })
}

/// Re-simulates an accepted boundary; fails when the simulator finds any
/// violation.
pub fn verify_boundary<T: Scalar>(result: &BoundaryResult<T>, network: &GasNetwork, grid: &Grid, initial: &SteadyState<T>) -> Result<Verdict> {
    let verdict = verify_withdrawal(network, grid, initial, result.d_g, &NewtonOptions::default(), DEFAULT_SECURITY_TOLERANCE)?;
    if verdict.secure {
        Ok(verdict)
    } else {
        let list: Vec<String> = verdict
            .report
            .violations
            .iter()
            .map(|v| format!("{:?} at {} t={:?} by {:.3e}", v.kind, v.location, v.time, v.magnitude))
            .collect();
        Err(Error::VerificationFailed(format!("{:?} boundary d_G = {}: {}", result.direction, result.d_g, list.join("; "))))
    }
}

#[cfg(test)]
mod tests;
