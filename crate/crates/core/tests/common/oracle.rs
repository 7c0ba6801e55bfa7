//! Dense primal log-barrier method used as a reference for the conic solver.
//! Works only for programs with finite boxes on every variable and a known
//! strictly feasible starting point.

#![allow(clippy::needless_range_loop)]

use gas_dsr::program::{ConicProgram, RotatedCone};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub program: ConicProgram<f64>,
    /// Strictly feasible point, `None` for instances built to be infeasible.
    pub interior: Option<Vec<f64>>,
}

/// Random program with at most 30 variables and 10 disjoint cones.
pub fn random_instance(rng: &mut ChaCha8Rng, infeasible: bool) -> Instance {
    let n_cones = rng.gen_range(0..=10usize);
    let n = (3 * n_cones + rng.gen_range(1..=6usize)).clamp(3, 30);
    let n_cones = n_cones.min(n / 3);
    let mut x0 = vec![0.0; n];
    let mut p = ConicProgram::<f64>::new(n);
    for k in 0..n_cones {
        let (g, r, f) = (3 * k, 3 * k + 1, 3 * k + 2);
        let m: f64 = rng.gen_range(-2.0..2.0);
        let rho: f64 = rng.gen_range(0.5..3.0);
        let gamma = (m * m + rng.gen_range(0.2..2.0)) / rho;
        x0[g] = gamma;
        x0[r] = rho;
        x0[f] = m;
        p.add_cone(RotatedCone { gamma: g, rho: r, flow: f });
    }
    for j in 3 * n_cones..n {
        x0[j] = rng.gen_range(-3.0..3.0);
    }
    for j in 0..n {
        p.lower[j] = x0[j] - rng.gen_range(0.3..2.0);
        p.upper[j] = x0[j] + rng.gen_range(0.3..2.0);
        p.objective[j] = rng.gen_range(-1.0..1.0);
    }
    let n_eq = rng.gen_range(0..=n / 3);
    for _ in 0..n_eq {
        let mut terms: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.4) {
                terms.push((j, rng.gen_range(-1.0..1.0)));
            }
        }
        if terms.len() < 2 {
            terms.push((rng.gen_range(0..n), 1.0));
        }
        let rhs = terms.iter().map(|&(j, v)| v * x0[j]).sum();
        p.add_eq(&terms, rhs);
    }
    if infeasible {
        let upper_sum: f64 = p.upper.iter().sum();
        let terms: Vec<(usize, f64)> = (0..n).map(|j| (j, 1.0)).collect();
        p.add_eq(&terms, upper_sum + rng.gen_range(0.5..2.0));
        return Instance { program: p, interior: None };
    }
    Instance { program: p, interior: Some(x0) }
}

fn barrier_terms(p: &ConicProgram<f64>, x: &[f64]) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
    let n = p.n_vars;
    let mut f = 0.0;
    let mut g = DVector::zeros(n);
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        let (a, b) = (x[j] - p.lower[j], p.upper[j] - x[j]);
        if a <= 0.0 || b <= 0.0 {
            return None;
        }
        f -= a.ln() + b.ln();
        g[j] += -1.0 / a + 1.0 / b;
        h[(j, j)] += 1.0 / (a * a) + 1.0 / (b * b);
    }
    for c in &p.cones {
        let (gm, r, m) = (x[c.gamma], x[c.rho], x[c.flow]);
        let q = gm * r - m * m;
        if q <= 0.0 || gm <= 0.0 {
            return None;
        }
        f -= q.ln();
        let idx = [c.gamma, c.rho, c.flow];
        let dq = [r, gm, -2.0 * m];
        // Hessian of q: d2q/dgamma drho = 1, d2q/dm2 = -2.
        let mut d2q = [[0.0; 3]; 3];
        d2q[0][1] = 1.0;
        d2q[1][0] = 1.0;
        d2q[2][2] = -2.0;
        for a in 0..3 {
            g[idx[a]] -= dq[a] / q;
            for b in 0..3 {
                h[(idx[a], idx[b])] += dq[a] * dq[b] / (q * q) - d2q[a][b] / q;
            }
        }
    }
    Some((f, g, h))
}

/// Minimizes the program starting from a strictly feasible `x0`; returns the
/// objective value (including the offset).
pub fn barrier_solve(p: &ConicProgram<f64>, x0: &[f64]) -> f64 {
    let n = p.n_vars;
    let m = p.n_eq;
    let mut a = DMatrix::zeros(m, n);
    for &(i, j, v) in &p.eq_triplets {
        a[(i, j)] += v;
    }
    let b = DVector::from_vec(p.eq_rhs.clone());
    let c = DVector::from_vec(p.objective.clone());
    let nu = (2 * n + 2 * p.cones.len()) as f64;
    let mut x = DVector::from_vec(x0.to_vec());
    let mut t = 1.0;
    loop {
        for _ in 0..200 {
            let (_, g, h) = barrier_terms(p, x.as_slice()).expect("iterate left the domain");
            let grad = &c * t + &g;
            let mut kkt = DMatrix::zeros(n + m, n + m);
            kkt.view_mut((0, 0), (n, n)).copy_from(&h);
            kkt.view_mut((0, n), (n, m)).copy_from(&a.transpose());
            kkt.view_mut((n, 0), (m, n)).copy_from(&a);
            let mut rhs = DVector::zeros(n + m);
            rhs.rows_mut(0, n).copy_from(&(-&grad));
            // Pulls accumulated round-off back onto the affine set.
            rhs.rows_mut(n, m).copy_from(&(&b - &a * &x));
            let sol = kkt.lu().solve(&rhs).expect("singular barrier KKT");
            let dx = sol.rows(0, n).into_owned();
            let decrement = -grad.dot(&dx);
            if decrement / 2.0 <= 1e-12 {
                break;
            }
            let phi = |y: &DVector<f64>| barrier_terms(p, y.as_slice()).map(|(f, _, _)| t * c.dot(y) + f);
            let f0 = phi(&x).unwrap();
            let mut step = 1.0;
            loop {
                let y = &x + &dx * step;
                if let Some(fy) = phi(&y) {
                    if fy <= f0 - 0.25 * step * decrement {
                        x = y;
                        break;
                    }
                }
                step *= 0.5;
                if step < 1e-14 {
                    break;
                }
            }
            if step < 1e-14 {
                break;
            }
        }
        let obj = c.dot(&x);
        if nu / t <= 1e-8 * obj.abs().max(1.0) {
            return obj + p.objective_offset;
        }
        t *= 8.0;
    }
}
