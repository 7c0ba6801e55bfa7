//! Homogeneous self-dual interior-point iteration with Nesterov-Todd scaling
//! and Mehrotra predictor-corrector steps.

use crate::error::{Error, Result};
use crate::linalg::{CscMatrix, LdlSolver};
use crate::scalar::{dot, norm_inf, Scalar};

use super::cones::{self, Block, Scaling};
use super::standard::StandardForm;
use super::{SolveStatus, SolverOptions};

/// Raw outcome in the unscaled standard-form space.
pub(crate) struct IpmOutput<T> {
    pub status: SolveStatus,
    pub x: Vec<T>,
    pub z: Vec<T>,
    pub pobj: T,
    pub dobj: T,
    pub gap: T,
    pub pres: T,
    pub dres: T,
    pub iterations: usize,
    pub trace: Vec<String>,
}

struct Kkt<T> {
    n: usize,
    m: usize,
    ldl: LdlSolver<T>,
    values: Vec<T>,
    shift: Vec<T>,
    n_a: usize,
    /// Offset into `values` of each block's Hessian entries.
    h_offset: Vec<usize>,
    hbuf: Vec<T>,
}

impl<T: Scalar> Kkt<T> {
    fn new(sf: &StandardForm<T>, reg: T) -> Self {
        let (n, m) = (sf.n, sf.m);
        let mut upper: Vec<(usize, usize)> = sf.a_triplets.iter().map(|&(i, j, _)| (j, n + i)).collect();
        let mut values: Vec<T> = sf.a_triplets.iter().map(|t| t.2).collect();
        let n_a = values.len();
        let mut h_offset = Vec::with_capacity(sf.blocks.len());
        for blk in &sf.blocks {
            h_offset.push(upper.len());
            match *blk {
                Block::Zero { .. } => {}
                Block::Nonneg { start, dim } => upper.extend((start..start + dim).map(|r| (n + r, n + r))),
                Block::Soc { start, dim } => {
                    for i in 0..dim {
                        for j in i..dim {
                            upper.push((n + start + i, n + start + j));
                        }
                    }
                }
            }
        }
        values.resize(upper.len(), T::zero());
        let signs: Vec<i8> = (0..n + m).map(|k| if k < n { 1 } else { -1 }).collect();
        let ldl = LdlSolver::new(n + m, &upper, &signs);
        let shift = (0..n + m).map(|k| if k < n { reg } else { -reg }).collect();
        Self {
            n,
            m,
            ldl,
            values,
            shift,
            n_a,
            h_offset,
            hbuf: Vec::new(),
        }
    }

    fn set_static_reg(&mut self, reg: T) {
        for k in 0..self.n + self.m {
            self.shift[k] = if k < self.n { reg } else { -reg };
        }
    }

    fn update(&mut self, scalings: &[Scaling<T>]) -> std::result::Result<(), crate::linalg::LdlError> {
        for (b, w) in scalings.iter().enumerate() {
            w.hessian_upper(&mut self.hbuf);
            let off = self.h_offset[b];
            for (k, v) in self.hbuf.iter().enumerate() {
                self.values[off + k] = -*v;
            }
        }
        debug_assert!(self.values.len() >= self.n_a);
        self.ldl.set_values(&self.values, &self.shift);
        self.ldl.factor()
    }
}

struct Workspace<'a, T> {
    sf: &'a StandardForm<T>,
    kkt: Kkt<T>,
    scalings: Vec<Scaling<T>>,
    max_refine: usize,
}

impl<T: Scalar> Workspace<'_, T> {
    /// Applies the unregularized KKT matrix `[0 A'; A -H]`.
    fn kkt_mul(&self, x: &[T], z: &[T], ox: &mut [T], oz: &mut [T]) {
        self.sf.a.tmul_vec(z, ox);
        self.sf.a.mul_vec(x, oz);
        let mut t1 = [T::zero(); 3];
        let mut t2 = [T::zero(); 3];
        for (blk, w) in self.sf.blocks.iter().zip(&self.scalings) {
            let r = blk.range();
            match blk {
                Block::Zero { .. } => {}
                Block::Nonneg { .. } => {
                    if let Scaling::Nonneg { w } = w {
                        for (k, i) in r.enumerate() {
                            oz[i] -= w[k] * w[k] * z[i];
                        }
                    }
                }
                Block::Soc { dim, .. } => {
                    let d = *dim;
                    w.mul_w(&z[r.clone()], &mut t1[..d]);
                    w.mul_w(&t1[..d], &mut t2[..d]);
                    for (k, i) in r.enumerate() {
                        oz[i] -= t2[k];
                    }
                }
            }
        }
    }

    /// Solves `K [x; z] = [rx; rz]` with iterative refinement against the
    /// unregularized matrix.
    fn solve(&self, rx: &[T], rz: &[T]) -> (Vec<T>, Vec<T>) {
        let (n, m) = (self.sf.n, self.sf.m);
        let mut sol: Vec<T> = rx.iter().chain(rz.iter()).copied().collect();
        self.kkt.ldl.solve(&mut sol);
        let rhs_norm = norm_inf(rx).max(norm_inf(rz));
        let mut ox = vec![T::zero(); n];
        let mut oz = vec![T::zero(); m];
        let mut res = vec![T::zero(); n + m];
        let residual = |sol: &[T], ox: &mut [T], oz: &mut [T], res: &mut [T]| {
            self.kkt_mul(&sol[..n], &sol[n..], ox, oz);
            for i in 0..n {
                res[i] = rx[i] - ox[i];
            }
            for i in 0..m {
                res[n + i] = rz[i] - oz[i];
            }
            norm_inf(res)
        };
        let mut err = residual(&sol, &mut ox, &mut oz, &mut res);
        for _ in 0..self.max_refine {
            if err <= T::epsilon() * T::of(10.0) * (T::one() + rhs_norm) {
                break;
            }
            let mut corr = res.clone();
            self.kkt.ldl.solve(&mut corr);
            let cand: Vec<T> = sol.iter().zip(&corr).map(|(a, b)| *a + *b).collect();
            let mut res2 = vec![T::zero(); n + m];
            let e2 = residual(&cand, &mut ox, &mut oz, &mut res2);
            if !(e2 < err) {
                break;
            }
            sol = cand;
            res = res2;
            err = e2;
        }
        let z = sol.split_off(n);
        (sol, z)
    }
}

fn blockwise<T: Scalar>(blocks: &[Block], f: impl Fn(Block, std::ops::Range<usize>) -> T, init: T, comb: impl Fn(T, T) -> T) -> T {
    blocks.iter().fold(init, |acc, b| comb(acc, f(*b, b.range())))
}

/// Moves `u` into the interior of every block. Zero-cone rows are cleared for
/// slacks and left untouched for duals.
fn shift_into_cone<T: Scalar>(blocks: &[Block], u: &mut [T], slack: bool) {
    for blk in blocks {
        let r = blk.range();
        match blk {
            Block::Zero { .. } => {
                if slack {
                    u[r].iter_mut().for_each(|v| *v = T::zero());
                }
            }
            _ => {
                let e = cones::min_eig(*blk, &u[r.clone()]);
                if e <= T::zero() {
                    cones::add_identity(*blk, &mut u[r], T::one() - e);
                }
            }
        }
    }
}

pub(crate) fn run<T: Scalar>(sf: &StandardForm<T>, orig: &StandardForm<T>, opts: &SolverOptions) -> Result<IpmOutput<T>> {
    let (n, m) = (sf.n, sf.m);
    let floor = T::epsilon() * T::of(100.0);
    let tol_feas = T::of(opts.tol_feas).max(floor);
    let tol_gap = T::of(opts.tol_gap).max(floor);
    let reduced_feas = T::of(opts.reduced_tol_feas).max(tol_feas);
    let reduced_gap = T::of(opts.reduced_tol_gap).max(tol_gap);
    let tol_infeas = T::of(opts.tol_infeas).max(floor);
    let mut reg = T::of(opts.static_reg).max(T::epsilon() * T::of(10.0));
    let blocks = &sf.blocks;
    let degree = blocks.iter().map(|b| b.degree()).sum::<usize>() + 1;

    let identity: Vec<Scaling<T>> = blocks
        .iter()
        .map(|b| match *b {
            Block::Zero { .. } => Scaling::Zero,
            Block::Nonneg { dim, .. } => Scaling::Nonneg { w: vec![T::one(); dim] },
            Block::Soc { dim, .. } => {
                let mut w = vec![T::zero(); dim];
                w[0] = T::one();
                Scaling::Soc { w, eta: T::one() }
            }
        })
        .collect();
    let mut ws = Workspace {
        sf,
        kkt: Kkt::new(sf, reg),
        scalings: identity,
        max_refine: opts.max_refine,
    };
    let mut trace = Vec::new();
    let fail = |msg: String, trace: &Vec<String>| Error::NumericalFailure {
        message: msg,
        trace: trace.clone(),
    };

    if ws.kkt.update(&ws.scalings).is_err() {
        return Err(fail("initial KKT factorization failed".into(), &trace));
    }
    let (mut x, z0) = ws.solve(&vec![T::zero(); n], &sf.b);
    let mut s: Vec<T> = z0.iter().map(|v| -*v).collect();
    shift_into_cone(blocks, &mut s, true);
    let neg_c: Vec<T> = sf.c.iter().map(|v| -*v).collect();
    let (_, mut z) = ws.solve(&neg_c, &vec![T::zero(); m]);
    shift_into_cone(blocks, &mut z, false);
    let mut tau = T::one();
    let mut kappa = T::one();

    let mut status = SolveStatus::MaxIterations;
    let mut iterations = 0;
    let step_fraction = T::of(opts.step_fraction);
    let mut best: Option<(T, Vec<T>, Vec<T>, Vec<T>, T)> = None;

    let mut rx = vec![T::zero(); n];
    let mut rz = vec![T::zero(); m];
    let mut lambda = vec![T::zero(); m];
    let mut tmp = vec![T::zero(); 3];

    let mut report = Report::default();
    let mut breakdowns = 0;
    for it in 0..=opts.max_iter {
        iterations = it;
        // Residuals of the embedding.
        sf.a.tmul_vec(&z, &mut rx);
        for j in 0..n {
            rx[j] += sf.c[j] * tau;
        }
        sf.a.mul_vec(&x, &mut rz);
        for i in 0..m {
            rz[i] += s[i] - sf.b[i] * tau;
        }
        let rtau = dot(&sf.c, &x) + dot(&sf.b, &z) + kappa;
        let mu = (dot(&s, &z) + tau * kappa) / T::of(degree as f64);

        report = evaluate(sf, orig, &x, &s, &z, tau);
        trace.push(format!(
            "{it:3} pobj {:+.6e} dobj {:+.6e} gap {:.2e} pres {:.2e} dres {:.2e} tau {:.2e} kappa {:.2e} mu {:.2e}",
            report.pobj.to_f64_lossy(),
            report.dobj.to_f64_lossy(),
            report.gap.to_f64_lossy(),
            report.pres.to_f64_lossy(),
            report.dres.to_f64_lossy(),
            tau.to_f64_lossy(),
            kappa.to_f64_lossy(),
            mu.to_f64_lossy()
        ));
        if report.pres <= tol_feas && report.dres <= tol_feas && report.gap <= tol_gap {
            status = SolveStatus::Optimal;
            break;
        }
        let merit = report.pres.max(report.dres).max(report.gap);
        if best.as_ref().is_none_or(|b| merit < b.0) {
            best = Some((merit, x.clone(), s.clone(), z.clone(), tau));
        }
        if tau < kappa {
            let (pinf, dinf) = infeasibility(orig, sf, &x, &s, &z);
            if let Some(r) = pinf {
                if r <= tol_infeas {
                    status = SolveStatus::PrimalInfeasible;
                    break;
                }
            }
            if let Some(r) = dinf {
                if r <= tol_infeas {
                    status = SolveStatus::DualInfeasible;
                    break;
                }
            }
        }
        if it == opts.max_iter {
            break;
        }

        // Scaling and factorization.
        let mut scalings = Vec::with_capacity(blocks.len());
        for blk in blocks {
            let r = blk.range();
            match Scaling::compute(*blk, &s[r.clone()], &z[r]) {
                Some(w) => scalings.push(w),
                None => break,
            }
        }
        if scalings.len() < blocks.len() {
            if best.is_none() {
                return Err(fail(format!("cone scaling lost interiority at iteration {it}"), &trace));
            }
            trace.push("cone scaling lost interiority, stopping".into());
            break;
        }
        ws.scalings = scalings;
        let mut factored = false;
        for _ in 0..4 {
            if ws.kkt.update(&ws.scalings).is_ok() {
                factored = true;
                break;
            }
            reg *= T::of(100.0);
            ws.kkt.set_static_reg(reg);
        }
        if !factored {
            if best.is_none() {
                return Err(fail(format!("KKT factorization failed at iteration {it}"), &trace));
            }
            trace.push("KKT factorization failed, stopping".into());
            break;
        }
        for (blk, w) in blocks.iter().zip(&ws.scalings) {
            let r = blk.range();
            w.mul_w(&z[r.clone()], &mut lambda[r]);
        }

        let neg_c: Vec<T> = sf.c.iter().map(|v| -*v).collect();
        let (x1, z1) = ws.solve(&neg_c, &sf.b);
        let denom_base = dot(&sf.c, &x1) + dot(&sf.b, &z1);

        // Predictor (eta = 1, d_s = lambda o lambda, d_kappa = tau kappa).
        let mut ds = vec![T::zero(); m];
        for blk in blocks {
            let r = blk.range();
            cones::jordan_product(*blk, &lambda[r.clone()], &lambda[r.clone()], &mut ds[r]);
        }
        let dir_a = direction(&ws, &rx, &rz, rtau, T::one(), &ds, tau * kappa, tau, kappa, &lambda, &x1, &z1, denom_base, &mut tmp);
        let alpha_a = max_step(blocks, &s, &z, tau, kappa, &dir_a).min(T::one());
        let sigma = (T::one() - alpha_a).powi(3);

        // Corrector.
        let mut ws_a = vec![T::zero(); m];
        let mut wz_a = vec![T::zero(); m];
        for (blk, w) in blocks.iter().zip(&ws.scalings) {
            let r = blk.range();
            w.mul_winv(&dir_a.ds[r.clone()], &mut ws_a[r.clone()]);
            w.mul_w(&dir_a.dz[r.clone()], &mut wz_a[r.clone()]);
            let d = r.len();
            let mut prod = vec![T::zero(); d];
            cones::jordan_product(*blk, &ws_a[r.clone()], &wz_a[r.clone()], &mut prod);
            for (k, i) in r.clone().enumerate() {
                ds[i] += prod[k];
            }
            cones::add_identity(*blk, &mut ds[r], -sigma * mu);
        }
        let dkappa = tau * kappa + dir_a.dtau * dir_a.dkappa - sigma * mu;
        let dir = direction(&ws, &rx, &rz, rtau, T::one() - sigma, &ds, dkappa, tau, kappa, &lambda, &x1, &z1, denom_base, &mut tmp);
        if !dir.is_finite() {
            if breakdowns == 3 {
                trace.push("non-finite search direction, stopping".into());
                break;
            }
            breakdowns += 1;
            reg *= T::of(100.0);
            ws.kkt.set_static_reg(reg);
            trace.push(format!("non-finite search direction, regularization raised to {:.1e}", reg.to_f64_lossy()));
            continue;
        }
        let alpha = (step_fraction * max_step(blocks, &s, &z, tau, kappa, &dir)).min(T::one());
        if !(alpha > T::of(1e-10)) {
            trace.push(format!("step length {:.2e} too small, stopping", alpha.to_f64_lossy()));
            break;
        }
        for j in 0..n {
            x[j] += alpha * dir.dx[j];
        }
        for i in 0..m {
            s[i] += alpha * dir.ds[i];
            z[i] += alpha * dir.dz[i];
        }
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
        if !(tau > T::zero() && kappa > T::zero()) || x.iter().any(|v| !v.is_finite()) {
            return Err(fail(format!("iterate left the cone at iteration {it}"), &trace));
        }
    }

    if status == SolveStatus::MaxIterations {
        if let Some((_, bx, bs, bz, bt)) = best {
            let r = evaluate(sf, orig, &bx, &bs, &bz, bt);
            if r.pres.max(r.dres).max(r.gap) < report.pres.max(report.dres).max(report.gap) {
                x = bx;
                s = bs;
                z = bz;
                tau = bt;
                report = r;
            }
        }
        if report.pres <= reduced_feas && report.dres <= reduced_feas && report.gap <= reduced_gap {
            status = SolveStatus::AlmostOptimal;
        }
    }

    let (xo, zo) = match status {
        SolveStatus::PrimalInfeasible => {
            let (_, _, zu) = unscale(sf, &x, &s, &z, T::one());
            let bz = -dot(&orig.b, &zu);
            (vec![T::zero(); n], zu.iter().map(|v| *v / bz).collect())
        }
        SolveStatus::DualInfeasible => {
            let (xu, _, _) = unscale(sf, &x, &s, &z, T::one());
            let cx = -dot(&orig.c, &xu);
            (xu.iter().map(|v| *v / cx).collect(), vec![T::zero(); m])
        }
        _ => {
            let (xu, _, zu) = unscale(sf, &x, &s, &z, tau);
            (xu, zu)
        }
    };
    Ok(IpmOutput {
        status,
        x: xo,
        z: zo,
        pobj: report.pobj,
        dobj: report.dobj,
        gap: report.gap,
        pres: report.pres,
        dres: report.dres,
        iterations,
        trace,
    })
}

struct Direction<T> {
    dx: Vec<T>,
    ds: Vec<T>,
    dz: Vec<T>,
    dtau: T,
    dkappa: T,
}

impl<T: Scalar> Direction<T> {
    fn is_finite(&self) -> bool {
        self.dtau.is_finite() && self.dkappa.is_finite() && self.dx.iter().chain(&self.ds).chain(&self.dz).all(|v| v.is_finite())
    }
}

#[allow(clippy::too_many_arguments)]
fn direction<T: Scalar>(
    ws: &Workspace<'_, T>,
    rx: &[T],
    rz: &[T],
    rtau: T,
    eta: T,
    ds_rhs: &[T],
    dkappa_rhs: T,
    tau: T,
    kappa: T,
    lambda: &[T],
    x1: &[T],
    z1: &[T],
    denom_base: T,
    tmp: &mut [T],
) -> Direction<T> {
    let sf = ws.sf;
    let m = sf.m;
    // u = lambda \ d_s, then W u.
    let mut u = vec![T::zero(); m];
    let mut wu = vec![T::zero(); m];
    for (blk, w) in sf.blocks.iter().zip(&ws.scalings) {
        let r = blk.range();
        cones::jordan_div(*blk, &lambda[r.clone()], &ds_rhs[r.clone()], &mut u[r.clone()]);
        w.mul_w(&u[r.clone()], &mut wu[r]);
    }
    let bx: Vec<T> = rx.iter().map(|v| -eta * *v).collect();
    let bz: Vec<T> = rz.iter().zip(&wu).map(|(r, w)| -eta * *r + *w).collect();
    let (x2, z2) = ws.solve(&bx, &bz);
    let dtau = (-eta * rtau - dot(&sf.c, &x2) - dot(&sf.b, &z2) + dkappa_rhs / tau) / (denom_base - kappa / tau);
    let dx: Vec<T> = x2.iter().zip(x1).map(|(a, b)| *a + dtau * *b).collect();
    let dz: Vec<T> = z2.iter().zip(z1).map(|(a, b)| *a + dtau * *b).collect();
    let mut ds = vec![T::zero(); m];
    for (blk, w) in sf.blocks.iter().zip(&ws.scalings) {
        let r = blk.range();
        let d = r.len();
        if let Block::Zero { .. } = blk {
            continue;
        }
        if d <= tmp.len() {
            w.mul_w(&dz[r.clone()], &mut tmp[..d]);
            let v: Vec<T> = (0..d).map(|k| u[r.start + k] + tmp[k]).collect();
            w.mul_w(&v, &mut ds[r]);
        } else {
            let mut t = vec![T::zero(); d];
            w.mul_w(&dz[r.clone()], &mut t);
            let v: Vec<T> = (0..d).map(|k| u[r.start + k] + t[k]).collect();
            w.mul_w(&v, &mut ds[r]);
        }
    }
    ds.iter_mut().for_each(|v| *v = -*v);
    let dkappa = -(dkappa_rhs + kappa * dtau) / tau;
    Direction { dx, ds, dz, dtau, dkappa }
}

fn max_step<T: Scalar>(blocks: &[Block], s: &[T], z: &[T], tau: T, kappa: T, d: &Direction<T>) -> T {
    let mut a = blockwise(
        blocks,
        |b, r| cones::step_to_boundary(b, &s[r.clone()], &d.ds[r.clone()]).min(cones::step_to_boundary(b, &z[r.clone()], &d.dz[r])),
        T::infinity(),
        |x, y| x.min(y),
    );
    if d.dtau < T::zero() {
        a = a.min(-tau / d.dtau);
    }
    if d.dkappa < T::zero() {
        a = a.min(-kappa / d.dkappa);
    }
    a
}

#[derive(Default)]
struct Report<T> {
    pobj: T,
    dobj: T,
    gap: T,
    pres: T,
    dres: T,
}

fn unscale<T: Scalar>(sf: &StandardForm<T>, x: &[T], s: &[T], z: &[T], tau: T) -> (Vec<T>, Vec<T>, Vec<T>) {
    let xu = x.iter().zip(&sf.col_scale).map(|(v, d)| *v * *d / tau).collect();
    let su = s.iter().zip(&sf.row_scale).map(|(v, e)| *v / (*e * tau)).collect();
    let zu = z.iter().zip(&sf.row_scale).map(|(v, e)| *v * *e / (sf.cost_scale * tau)).collect();
    (xu, su, zu)
}

fn evaluate<T: Scalar>(sf: &StandardForm<T>, orig: &StandardForm<T>, x: &[T], s: &[T], z: &[T], tau: T) -> Report<T> {
    let (xu, su, zu) = unscale(sf, x, s, z, tau);
    let a: &CscMatrix<T> = &orig.a;
    let mut ax = vec![T::zero(); orig.m];
    a.mul_vec(&xu, &mut ax);
    let pr: Vec<T> = (0..orig.m).map(|i| ax[i] + su[i] - orig.b[i]).collect();
    let pres = norm_inf(&pr) / T::one().max(norm_inf(&orig.b)).max(norm_inf(&ax)).max(norm_inf(&su));
    let mut atz = vec![T::zero(); orig.n];
    a.tmul_vec(&zu, &mut atz);
    let dr: Vec<T> = (0..orig.n).map(|j| atz[j] + orig.c[j]).collect();
    let dres = norm_inf(&dr) / T::one().max(norm_inf(&orig.c)).max(norm_inf(&atz));
    let pobj = dot(&orig.c, &xu);
    let dobj = -dot(&orig.b, &zu);
    let gap = (pobj - dobj).abs() / T::one().max(pobj.abs().min(dobj.abs()));
    Report { pobj, dobj, gap, pres, dres }
}

/// Returns the primal and dual infeasibility certificate residuals when the
/// corresponding sign condition holds.
fn infeasibility<T: Scalar>(orig: &StandardForm<T>, sf: &StandardForm<T>, x: &[T], s: &[T], z: &[T]) -> (Option<T>, Option<T>) {
    let (xu, su, zu) = unscale(sf, x, s, z, T::one());
    let bz = dot(&orig.b, &zu);
    let pinf = if bz < T::zero() {
        let mut atz = vec![T::zero(); orig.n];
        orig.a.tmul_vec(&zu, &mut atz);
        Some(norm_inf(&atz) / -bz)
    } else {
        None
    };
    let cx = dot(&orig.c, &xu);
    let dinf = if cx < T::zero() {
        let mut ax = vec![T::zero(); orig.m];
        orig.a.mul_vec(&xu, &mut ax);
        let r: Vec<T> = ax.iter().zip(&su).map(|(a, b)| *a + *b).collect();
        Some(norm_inf(&r) / -cx)
    } else {
        None
    };
    (pinf, dinf)
}
