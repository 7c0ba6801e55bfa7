use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::DenseLu;
use crate::network::GasNetwork;
use crate::scalar::Scalar;

use super::{momentum_coefficient, node_withdrawals, storage_coefficients, Boundary, NewtonOptions, SystemState};

pub(super) enum Mode<'a, T> {
    Transient { prev: &'a SystemState<T> },
    Steady,
}

/// Global unknowns are the node densities, followed by the balancing well
/// output when there is one. Global rows are the node balances; the
/// reference density equation either replaces the reference node's balance
/// (no balancing well) or is appended.
struct Ctx<'a, T> {
    network: &'a GasNetwork,
    mode: Mode<'a, T>,
    withdrawals: Vec<T>,
    phi: Vec<T>,
    /// `area * dx / dt` per pipe.
    cap: Vec<T>,
    weights: (T, T),
    slack_node: Option<usize>,
    reference: Option<(usize, T)>,
    n_global: usize,
    rho_scale: T,
    flow_scale: T,
}

/// Local Jacobian of one pipe plus its couplings to the global unknowns.
struct PipeJacobian<T> {
    dim: usize,
    local: Vec<T>,
    /// `(local row, global column, value)`.
    to_global: Vec<(usize, usize, T)>,
    /// `(global row, local column, value)`.
    from_global: Vec<(usize, usize, T)>,
}

impl<'a, T: Scalar> Ctx<'a, T> {
    fn new(network: &'a GasNetwork, grid: &Grid, mode: Mode<'a, T>, boundary: &Boundary<T>, slack: Option<usize>, reference: Option<(usize, T)>) -> Self {
        let withdrawals = node_withdrawals(network, boundary);
        let phi = grid
            .pipes
            .iter()
            .enumerate()
            .map(|(p, pg)| T::of(momentum_coefficient(network, p, pg.dx)))
            .collect();
        let cap = grid
            .pipes
            .iter()
            .enumerate()
            .map(|(p, pg)| T::of(network.pipes[p].area() * pg.dx / grid.dt))
            .collect();
        let (a, b) = storage_coefficients(grid.stencil);
        let slack_node = slack.map(|w| network.wells[w].node);
        let n_global = network.nodes.len() + usize::from(slack_node.is_some());
        let rho_scale = match (&mode, reference) {
            (_, Some((_, r))) => r,
            (Mode::Transient { prev }, None) => prev.node_rho.iter().fold(T::zero(), |m, v| m.max(*v)),
            (Mode::Steady, None) => T::one(),
        }
        .max(T::one());
        let total: T = network.loads.iter().map(|l| T::of(l.demand)).sum::<T>() + boundary.units.iter().map(|u| u.abs()).sum::<T>();
        let flow_scale = total.max(T::one());
        Self {
            network,
            mode,
            withdrawals,
            phi,
            cap,
            weights: (T::of(a), T::of(b)),
            slack_node,
            reference,
            n_global,
            rho_scale,
            flow_scale,
        }
    }

    fn boost(&self, node: usize) -> T {
        T::of(self.network.nodes[node].boost())
    }

    fn fuel_factor(&self, node: usize) -> T {
        T::of(self.network.nodes[node].compressor.map_or(0.0, |c| c.consumption_factor()))
    }

    /// Row holding node `j`'s balance, `None` when the reference equation
    /// replaced it.
    fn balance_row(&self, j: usize) -> Option<usize> {
        match (self.slack_node, self.reference) {
            (None, Some((r, _))) if r == j => None,
            _ => Some(j),
        }
    }

    fn reference_row(&self) -> Option<usize> {
        match (self.slack_node, self.reference) {
            (Some(_), Some(_)) => Some(self.network.nodes.len()),
            (None, Some((r, _))) => Some(r),
            _ => None,
        }
    }

    /// Scaled residual: per pipe `[mom_0, mass_0, ..., c0, c1]`, then global rows.
    fn residual(&self, x: &SystemState<T>, slack: T) -> (Vec<Vec<T>>, Vec<T>) {
        let net = self.network;
        let mut pipes = Vec::with_capacity(net.pipes.len());
        for (p, pipe) in net.pipes.iter().enumerate() {
            let (rho, m) = (&x.rho[p], &x.flow[p]);
            let n = rho.len();
            let mut r = vec![T::zero(); 2 * n];
            for s in 0..n - 1 {
                r[2 * s] = (rho[s + 1] - rho[s] + self.phi[p] * m[s] * m[s] / rho[s]) / self.rho_scale;
                let flux = m[s + 1] - m[s];
                r[2 * s + 1] = match &self.mode {
                    Mode::Steady => flux,
                    Mode::Transient { prev } => {
                        let old = &prev.rho[p];
                        self.cap[p] * (self.weights.0 * (rho[s] - old[s]) + self.weights.1 * (rho[s + 1] - old[s + 1])) + flux
                    }
                } / self.flow_scale;
            }
            r[2 * n - 2] = (rho[0] - self.boost(pipe.from) * x.node_rho[pipe.from]) / self.rho_scale;
            r[2 * n - 1] = (rho[n - 1] - x.node_rho[pipe.to]) / self.rho_scale;
            pipes.push(r);
        }
        let mut global = vec![T::zero(); self.n_global];
        for j in 0..net.nodes.len() {
            let Some(row) = self.balance_row(j) else { continue };
            let mut v = -self.withdrawals[j];
            for p in net.pipes_to(j) {
                v += *x.flow[p].last().unwrap();
            }
            let k = T::one() + self.fuel_factor(j);
            for p in net.pipes_from(j) {
                v -= k * x.flow[p][0];
            }
            if self.slack_node == Some(j) {
                v += slack;
            }
            global[row] = v / self.flow_scale;
        }
        if let (Some(row), Some((r, rho))) = (self.reference_row(), self.reference) {
            global[row] = (x.node_rho[r] - rho) / self.rho_scale;
        }
        (pipes, global)
    }

    fn jacobian(&self, x: &SystemState<T>) -> (Vec<PipeJacobian<T>>, Vec<T>) {
        let net = self.network;
        let g = self.n_global;
        let mut out = Vec::with_capacity(net.pipes.len());
        let (rs, fs) = (self.rho_scale, self.flow_scale);
        for (p, pipe) in net.pipes.iter().enumerate() {
            let (rho, m) = (&x.rho[p], &x.flow[p]);
            let n = rho.len();
            let dim = 2 * n;
            let mut a = vec![T::zero(); dim * dim];
            let mut set = |i: usize, j: usize, v: T| a[i * dim + j] += v;
            for s in 0..n - 1 {
                let phi = self.phi[p];
                set(2 * s, 2 * s, (-T::one() - phi * m[s] * m[s] / (rho[s] * rho[s])) / rs);
                set(2 * s, 2 * s + 2, T::one() / rs);
                set(2 * s, 2 * s + 1, T::of(2.0) * phi * m[s] / rho[s] / rs);
                if let Mode::Transient { .. } = self.mode {
                    set(2 * s + 1, 2 * s, self.cap[p] * self.weights.0 / fs);
                    set(2 * s + 1, 2 * s + 2, self.cap[p] * self.weights.1 / fs);
                }
                set(2 * s + 1, 2 * s + 3, T::one() / fs);
                set(2 * s + 1, 2 * s + 1, -T::one() / fs);
            }
            set(2 * n - 2, 0, T::one() / rs);
            set(2 * n - 1, 2 * n - 2, T::one() / rs);
            let to_global = vec![(2 * n - 2, pipe.from, -self.boost(pipe.from) / rs), (2 * n - 1, pipe.to, -T::one() / rs)];
            let mut from_global = Vec::new();
            if let Some(row) = self.balance_row(pipe.to) {
                from_global.push((row, 2 * n - 1, T::one() / fs));
            }
            if let Some(row) = self.balance_row(pipe.from) {
                from_global.push((row, 1, -(T::one() + self.fuel_factor(pipe.from)) / fs));
            }
            out.push(PipeJacobian {
                dim,
                local: a,
                to_global,
                from_global,
            });
        }
        let mut d = vec![T::zero(); g * g];
        if let Some(j) = self.slack_node {
            if let Some(row) = self.balance_row(j) {
                d[row * g + net.nodes.len()] += T::one() / fs;
            }
        }
        if let (Some(row), Some((r, _))) = (self.reference_row(), self.reference) {
            d[row * g + r] += T::one() / rs;
        }
        (out, d)
    }
}

fn norm<T: Scalar>(pipes: &[Vec<T>], global: &[T]) -> T {
    pipes
        .iter()
        .flat_map(|r| r.iter())
        .chain(global.iter())
        .fold(T::zero(), |a, v| a.max(v.abs()))
}

/// Newton direction for the residual, by pipe-wise elimination onto the global
/// unknowns, or a dense solve of the whole system when a pipe block is singular.
fn direction<T: Scalar>(jac: &[PipeJacobian<T>], d: &[T], g: usize, rp: &[Vec<T>], rg: &[T]) -> Option<(Vec<Vec<T>>, Vec<T>)> {
    schur_direction(jac, d, g, rp, rg).or_else(|| dense_direction(jac, d, g, rp, rg))
}

fn schur_direction<T: Scalar>(jac: &[PipeJacobian<T>], d: &[T], g: usize, rp: &[Vec<T>], rg: &[T]) -> Option<(Vec<Vec<T>>, Vec<T>)> {
    let mut s = d.to_vec();
    let mut rhs: Vec<T> = rg.iter().map(|v| -*v).collect();
    let mut parts = Vec::with_capacity(jac.len());
    for (pj, r) in jac.iter().zip(rp) {
        let lu = DenseLu::factor(pj.dim, pj.local.clone()).ok()?;
        let mut y = r.clone();
        lu.solve(&mut y);
        // Columns of L^{-1} B, one per distinct global column.
        let mut cols: Vec<(usize, Vec<T>)> = Vec::new();
        for &(row, col, val) in &pj.to_global {
            let mut e = vec![T::zero(); pj.dim];
            e[row] = val;
            lu.solve(&mut e);
            match cols.iter_mut().find(|(c, _)| *c == col) {
                Some((_, v)) => v.iter_mut().zip(&e).for_each(|(a, b)| *a += *b),
                None => cols.push((col, e)),
            }
        }
        for &(grow, lcol, val) in &pj.from_global {
            rhs[grow] += val * y[lcol];
            for (gcol, z) in &cols {
                s[grow * g + gcol] -= val * z[lcol];
            }
        }
        parts.push((y, cols));
    }
    let lu = DenseLu::factor(g, s).ok()?;
    lu.solve(&mut rhs);
    let du = rhs;
    let dv = parts
        .into_iter()
        .map(|(y, cols)| {
            let mut v: Vec<T> = y.iter().map(|a| -*a).collect();
            for (gcol, z) in &cols {
                for k in 0..v.len() {
                    v[k] -= z[k] * du[*gcol];
                }
            }
            v
        })
        .collect();
    Some((dv, du))
}

fn dense_direction<T: Scalar>(jac: &[PipeJacobian<T>], d: &[T], g: usize, rp: &[Vec<T>], rg: &[T]) -> Option<(Vec<Vec<T>>, Vec<T>)> {
    let mut offsets = Vec::with_capacity(jac.len());
    let mut n_local = 0;
    for pj in jac {
        offsets.push(n_local);
        n_local += pj.dim;
    }
    let n = n_local + g;
    let mut a = vec![T::zero(); n * n];
    let mut b = vec![T::zero(); n];
    for ((pj, r), &off) in jac.iter().zip(rp).zip(&offsets) {
        for i in 0..pj.dim {
            for j in 0..pj.dim {
                a[(off + i) * n + off + j] = pj.local[i * pj.dim + j];
            }
            b[off + i] = -r[i];
        }
        for &(row, col, val) in &pj.to_global {
            a[(off + row) * n + n_local + col] += val;
        }
        for &(row, col, val) in &pj.from_global {
            a[(n_local + row) * n + off + col] += val;
        }
    }
    for i in 0..g {
        for j in 0..g {
            a[(n_local + i) * n + n_local + j] = d[i * g + j];
        }
        b[n_local + i] = -rg[i];
    }
    let lu = DenseLu::factor(n, a).ok()?;
    lu.solve(&mut b);
    let dv = jac.iter().zip(&offsets).map(|(pj, &off)| b[off..off + pj.dim].to_vec()).collect();
    Some((dv, b[n_local..].to_vec()))
}

fn apply<T: Scalar>(x: &SystemState<T>, slack: T, dv: &[Vec<T>], du: &[T], alpha: T, n_nodes: usize) -> (SystemState<T>, T) {
    let mut y = x.clone();
    for (p, d) in dv.iter().enumerate() {
        for s in 0..y.rho[p].len() {
            y.rho[p][s] += alpha * d[2 * s];
            y.flow[p][s] += alpha * d[2 * s + 1];
        }
    }
    for j in 0..n_nodes {
        y.node_rho[j] += alpha * du[j];
    }
    let slack = if du.len() > n_nodes { slack + alpha * du[n_nodes] } else { slack };
    (y, slack)
}

fn positive<T: Scalar>(x: &SystemState<T>) -> bool {
    x.rho.iter().flatten().chain(x.node_rho.iter()).all(|r| *r > T::zero() && r.is_finite()) && x.flow.iter().flatten().all(|m| m.is_finite())
}

fn iterate<T: Scalar>(ctx: &Ctx<'_, T>, mut x: SystemState<T>, mut slack: T, options: &NewtonOptions) -> Result<(SystemState<T>, T)> {
    let tol = T::of(options.tolerance).max(T::epsilon() * T::of(100.0));
    let n_nodes = ctx.network.nodes.len();
    let (mut rp, mut rg) = ctx.residual(&x, slack);
    let mut err = norm(&rp, &rg);
    for it in 0..options.max_iter {
        if err <= tol {
            return Ok((x, slack));
        }
        let (jac, d) = ctx.jacobian(&x);
        let Some((dv, du)) = direction(&jac, &d, ctx.n_global, &rp, &rg) else {
            return Err(Error::NewtonDivergence {
                iterations: it,
                residual: err.to_f64_lossy(),
            });
        };
        let mut alpha = T::one();
        let mut accepted = None;
        let mut fallback = None;
        for _ in 0..=options.max_halvings {
            let (y, sl) = apply(&x, slack, &dv, &du, alpha, n_nodes);
            if positive(&y) {
                let (ryp, ryg) = ctx.residual(&y, sl);
                let e = norm(&ryp, &ryg);
                if e < err {
                    accepted = Some((y, sl, ryp, ryg, e));
                    break;
                }
                fallback = Some((y, sl, ryp, ryg, e));
            }
            alpha /= T::of(2.0);
        }
        let Some((y, sl, ryp, ryg, e)) = accepted.or(fallback) else {
            return Err(Error::NonPhysical("density became non-positive during Newton iteration".into()));
        };
        x = y;
        slack = sl;
        rp = ryp;
        rg = ryg;
        err = e;
    }
    if err <= tol {
        return Ok((x, slack));
    }
    Err(Error::NewtonDivergence {
        iterations: options.max_iter,
        residual: err.to_f64_lossy(),
    })
}

pub(super) fn solve<T: Scalar>(network: &GasNetwork, grid: &Grid, mode: Mode<'_, T>, boundary: &Boundary<T>, guess: SystemState<T>, options: &NewtonOptions) -> Result<SystemState<T>> {
    let ctx = Ctx::new(network, grid, mode, boundary, None, None);
    iterate(&ctx, guess, T::zero(), options).map(|(x, _)| x)
}

pub(super) fn solve_steady<T: Scalar>(
    network: &GasNetwork,
    grid: &Grid,
    boundary: &Boundary<T>,
    slack: Option<usize>,
    reference_density: T,
    guess: SystemState<T>,
    options: &NewtonOptions,
) -> Result<(SystemState<T>, T)> {
    let reference = Some((network.globals.reference_node, reference_density));
    let ctx = Ctx::new(network, grid, Mode::Steady, boundary, slack, reference);
    let (x, s) = iterate(&ctx, guess, T::zero(), options)?;
    if slack.is_none() {
        // The reference node's balance was not enforced; it must hold anyway.
        let full = Ctx::new(network, grid, Mode::Steady, boundary, None, None);
        let (_, rg) = full.residual(&x, T::zero());
        let j = network.globals.reference_node;
        let imbalance = rg[j].abs() * full.flow_scale;
        if rg[j].abs() > T::of(options.tolerance).max(T::epsilon() * T::of(100.0)) * T::of(100.0) {
            return Err(Error::NonPhysical(format!(
                "supply and demand differ by {:.6e} kg/s and no well balances the network",
                imbalance.to_f64_lossy()
            )));
        }
    }
    Ok((x, s))
}
