//! Cone kernels for the interior-point method: Nesterov-Todd scalings, Jordan
//! algebra and step-to-boundary computations for the nonnegative orthant and
//! second-order cones.

use crate::scalar::Scalar;

/// A block of rows of the standard-form slack `s` (and dual `z`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    /// `s = 0`, `z` free.
    Zero { start: usize, dim: usize },
    /// Elementwise `s, z >= 0`.
    Nonneg { start: usize, dim: usize },
    /// `s_0 >= ||s_{1..}||`.
    Soc { start: usize, dim: usize },
}

impl Block {
    pub fn range(&self) -> std::ops::Range<usize> {
        match *self {
            Block::Zero { start, dim } | Block::Nonneg { start, dim } | Block::Soc { start, dim } => start..start + dim,
        }
    }

    /// Barrier degree used for the complementarity measure.
    pub fn degree(&self) -> usize {
        match *self {
            Block::Zero { .. } => 0,
            Block::Nonneg { dim, .. } => dim,
            Block::Soc { .. } => 1,
        }
    }
}

/// NT scaling of one block. For SOC blocks `w` stores the normalized scaling
/// point and `eta` the scale factor; `W = eta * [w0 w1'; w1 I + w1 w1'/(1+w0)]`.
#[derive(Debug, Clone)]
pub enum Scaling<T> {
    Zero,
    Nonneg { w: Vec<T> },
    Soc { w: Vec<T>, eta: T },
}

fn soc_det<T: Scalar>(u: &[T]) -> T {
    let tail: T = u[1..].iter().map(|v| *v * *v).sum();
    (u[0] - tail.sqrt()) * (u[0] + tail.sqrt())
}

/// Smallest "eigenvalue" of a point relative to the block's cone.
pub fn min_eig<T: Scalar>(block: Block, u: &[T]) -> T {
    match block {
        Block::Zero { .. } => T::infinity(),
        Block::Nonneg { .. } => u.iter().fold(T::infinity(), |a, v| a.min(*v)),
        Block::Soc { .. } => {
            let tail: T = u[1..].iter().map(|v| *v * *v).sum();
            u[0] - tail.sqrt()
        }
    }
}

/// Adds `alpha * e` to `u` (`e` is the identity element of the block).
pub fn add_identity<T: Scalar>(block: Block, u: &mut [T], alpha: T) {
    match block {
        Block::Zero { .. } => {}
        Block::Nonneg { .. } => u.iter_mut().for_each(|v| *v += alpha),
        Block::Soc { .. } => u[0] += alpha,
    }
}

impl<T: Scalar> Scaling<T> {
    /// NT scaling for interior `s`, `z`.
    pub fn compute(block: Block, s: &[T], z: &[T]) -> Option<Self> {
        match block {
            Block::Zero { .. } => Some(Scaling::Zero),
            Block::Nonneg { .. } => {
                let w: Vec<T> = s.iter().zip(z).map(|(a, b)| (*a / *b).sqrt()).collect();
                w.iter().all(|v| v.is_finite() && *v > T::zero()).then_some(Scaling::Nonneg { w })
            }
            Block::Soc { dim, .. } => {
                let (sd, zd) = (soc_det(s), soc_det(z));
                if !(sd > T::zero() && zd > T::zero()) {
                    return None;
                }
                let (ss, zs) = (sd.sqrt(), zd.sqrt());
                let sbar: Vec<T> = s.iter().map(|v| *v / ss).collect();
                let zbar: Vec<T> = z.iter().map(|v| *v / zs).collect();
                let dotsz: T = sbar.iter().zip(&zbar).map(|(a, b)| *a * *b).sum();
                let gamma = ((T::one() + dotsz) / T::of(2.0)).sqrt();
                let mut w = vec![T::zero(); dim];
                w[0] = (sbar[0] + zbar[0]) / (T::of(2.0) * gamma);
                for i in 1..dim {
                    w[i] = (sbar[i] - zbar[i]) / (T::of(2.0) * gamma);
                }
                let eta = (sd / zd).sqrt().sqrt();
                (eta.is_finite() && w.iter().all(|v| v.is_finite())).then_some(Scaling::Soc { w, eta })
            }
        }
    }

    /// `out = W v`.
    pub fn mul_w(&self, v: &[T], out: &mut [T]) {
        match self {
            Scaling::Zero => out.iter_mut().for_each(|o| *o = T::zero()),
            Scaling::Nonneg { w } => {
                for i in 0..v.len() {
                    out[i] = w[i] * v[i];
                }
            }
            Scaling::Soc { w, eta } => soc_w_apply(w, *eta, v, out, false),
        }
    }

    /// `out = W^{-1} v`.
    pub fn mul_winv(&self, v: &[T], out: &mut [T]) {
        match self {
            Scaling::Zero => out.iter_mut().for_each(|o| *o = T::zero()),
            Scaling::Nonneg { w } => {
                for i in 0..v.len() {
                    out[i] = v[i] / w[i];
                }
            }
            Scaling::Soc { w, eta } => soc_w_apply(w, T::one() / *eta, v, out, true),
        }
    }

    /// Dense upper triangle of `H = W^2`, row-major `(i, j, value)` with `i <= j`
    /// relative to the block start.
    pub fn hessian_upper(&self, out: &mut Vec<T>) {
        out.clear();
        match self {
            Scaling::Zero => {}
            Scaling::Nonneg { w } => out.extend(w.iter().map(|v| *v * *v)),
            Scaling::Soc { w, eta } => {
                // W^2 = eta^2 (2 w w' - J).
                let e2 = *eta * *eta;
                let d = w.len();
                for i in 0..d {
                    for j in i..d {
                        let mut v = T::of(2.0) * w[i] * w[j];
                        if i == j {
                            v += if i == 0 { -T::one() } else { T::one() };
                        }
                        out.push(e2 * v);
                    }
                }
            }
        }
    }
}

fn soc_w_apply<T: Scalar>(w: &[T], scale: T, v: &[T], out: &mut [T], inverse: bool) {
    // W = [w0 w1'; w1 I + w1 w1'/(1+w0)], W^{-1} flips the sign of w1.
    let sign = if inverse { -T::one() } else { T::one() };
    let w0 = w[0];
    let dot1: T = w[1..].iter().zip(&v[1..]).map(|(a, b)| *a * *b).sum::<T>() * sign;
    out[0] = scale * (w0 * v[0] + dot1);
    let c = sign * (v[0] + dot1 / (T::one() + w0));
    for i in 1..w.len() {
        out[i] = scale * (v[i] + c * w[i]);
    }
}

/// Jordan product `u o v`.
pub fn jordan_product<T: Scalar>(block: Block, u: &[T], v: &[T], out: &mut [T]) {
    match block {
        Block::Zero { .. } => out.iter_mut().for_each(|o| *o = T::zero()),
        Block::Nonneg { .. } => {
            for i in 0..u.len() {
                out[i] = u[i] * v[i];
            }
        }
        Block::Soc { .. } => {
            out[0] = u.iter().zip(v).map(|(a, b)| *a * *b).sum();
            for i in 1..u.len() {
                out[i] = u[0] * v[i] + v[0] * u[i];
            }
        }
    }
}

/// Solves `lambda o x = d` for `x`.
pub fn jordan_div<T: Scalar>(block: Block, lambda: &[T], d: &[T], out: &mut [T]) {
    match block {
        Block::Zero { .. } => out.iter_mut().for_each(|o| *o = T::zero()),
        Block::Nonneg { .. } => {
            for i in 0..d.len() {
                out[i] = d[i] / lambda[i];
            }
        }
        Block::Soc { .. } => {
            let det = soc_det(lambda);
            let l1d1: T = lambda[1..].iter().zip(&d[1..]).map(|(a, b)| *a * *b).sum();
            let x0 = (lambda[0] * d[0] - l1d1) / det;
            out[0] = x0;
            for i in 1..d.len() {
                out[i] = (d[i] - x0 * lambda[i]) / lambda[0];
            }
        }
    }
}

/// Largest `alpha` with `u + alpha du` in the cone (may be infinite).
pub fn step_to_boundary<T: Scalar>(block: Block, u: &[T], du: &[T]) -> T {
    match block {
        Block::Zero { .. } => T::infinity(),
        Block::Nonneg { .. } => u
            .iter()
            .zip(du)
            .filter(|(_, d)| **d < T::zero())
            .fold(T::infinity(), |a, (v, d)| a.min(-*v / *d)),
        Block::Soc { .. } => {
            let c = soc_det(u);
            if !(c > T::zero()) || u[0] <= T::zero() {
                return T::zero();
            }
            let a = soc_det(du);
            let b = T::of(2.0) * (u[0] * du[0] - u[1..].iter().zip(&du[1..]).map(|(x, y)| *x * *y).sum::<T>());
            let scale = du.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            if a.abs() <= T::epsilon() * scale * scale {
                return if b < T::zero() { -c / b } else { T::infinity() };
            }
            let disc = b * b - T::of(4.0) * a * c;
            if disc < T::zero() {
                return T::infinity();
            }
            let sq = disc.sqrt();
            let q = if b >= T::zero() { -(b + sq) / T::of(2.0) } else { (-b + sq) / T::of(2.0) };
            let mut best = T::infinity();
            for r in [q / a, c / q] {
                if r.is_finite() && r > T::zero() {
                    best = best.min(r);
                }
            }
            best
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOC: Block = Block::Soc { start: 0, dim: 3 };

    #[test]
    fn nt_scaling_maps_z_and_s_to_same_point() {
        let s: [f64; 3] = [2.0, 0.5, -1.0];
        let z: [f64; 3] = [1.5, -0.3, 0.8];
        let w = Scaling::compute(SOC, &s, &z).unwrap();
        let mut a = [0.0f64; 3];
        let mut b = [0.0f64; 3];
        w.mul_w(&z, &mut a);
        w.mul_winv(&s, &mut b);
        for i in 0..3 {
            assert!((a[i] - b[i]).abs() < 1e-12, "{a:?} vs {b:?}");
        }
        // W W^{-1} = I
        let mut c = [0.0; 3];
        w.mul_winv(&a, &mut c);
        w.mul_w(&c, &mut b);
        for i in 0..3 {
            assert!((b[i] - a[i]).abs() < 1e-12);
        }
        // H z = s
        let mut h = Vec::new();
        w.hessian_upper(&mut h);
        // Row-major upper triangle offsets of a 3x3 matrix.
        let full = |i: usize, j: usize| {
            let (i, j) = (i.min(j), i.max(j));
            h[[0, 3, 5][i] + j - i]
        };
        for i in 0..3 {
            let hz: f64 = (0..3).map(|j| full(i, j) * z[j]).sum();
            assert!((hz - s[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn jordan_division_inverts_product() {
        let l = [2.0, 0.3, -0.7];
        let x: [f64; 3] = [0.4, 1.1, -2.0];
        let mut d = [0.0; 3];
        jordan_product(SOC, &l, &x, &mut d);
        let mut back = [0.0; 3];
        jordan_div(SOC, &l, &d, &mut back);
        for i in 0..3 {
            assert!((back[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn soc_step_hits_boundary() {
        let u = [1.0, 0.0, 0.0];
        let du: [f64; 3] = [0.0, 1.0, 0.0];
        assert!((step_to_boundary(SOC, &u, &du) - 1.0).abs() < 1e-12);
        let du: [f64; 3] = [1.0, 0.5, 0.0];
        assert!(step_to_boundary(SOC, &u, &du).is_infinite());
        let du: [f64; 3] = [-1.0, 0.0, 0.0];
        assert!((step_to_boundary(SOC, &u, &du) - 1.0).abs() < 1e-12);
        let nn = Block::Nonneg { start: 0, dim: 2 };
        assert_eq!(step_to_boundary(nn, &[1.0, 2.0], &[-0.5, -4.0]), 0.5);
    }
}
