//! Conversion of a [`ConicProgram`] into the solver's standard form
//!
//! ```text
//! min c'x   s.t.  A x + s = b,  s in {0}^p x R+^q x SOC3 x ... x SOC3
//! ```
//!
//! followed by Ruiz equilibration.

use crate::linalg::CscMatrix;
use crate::program::ConicProgram;
use crate::scalar::Scalar;

use super::cones::Block;

/// Origin of a standard-form row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Equality(usize),
    /// `x_j = l_j` from a box with equal ends.
    Fixed(usize),
    Lower(usize),
    Upper(usize),
    /// Component of a cone: `(cone, 0..3)`.
    Cone(usize, usize),
}

#[derive(Debug, Clone)]
pub struct StandardForm<T> {
    pub n: usize,
    pub m: usize,
    pub a: CscMatrix<T>,
    /// Same entries as `a` as `(row, col, value)`, column-major.
    pub a_triplets: Vec<(usize, usize, T)>,
    pub b: Vec<T>,
    pub c: Vec<T>,
    pub blocks: Vec<Block>,
    pub rows: Vec<RowKind>,
    /// Column scaling: `x = col_scale * x_hat`.
    pub col_scale: Vec<T>,
    /// Row scaling: `s = s_hat / row_scale`, `z = row_scale * z_hat / cost_scale`.
    pub row_scale: Vec<T>,
    pub cost_scale: T,
}

impl<T: Scalar> StandardForm<T> {
    pub fn from_program(p: &ConicProgram<T>) -> Self {
        let n = p.n_vars;
        let mut trip: Vec<(usize, usize, T)> = Vec::new();
        let mut b = Vec::new();
        let mut rows = Vec::new();
        let mut blocks = Vec::new();

        for &(i, j, v) in &p.eq_triplets {
            trip.push((i, j, v));
        }
        b.extend_from_slice(&p.eq_rhs);
        rows.extend((0..p.n_eq).map(RowKind::Equality));
        for j in 0..n {
            if p.lower[j] == p.upper[j] {
                trip.push((rows.len(), j, T::one()));
                b.push(p.lower[j]);
                rows.push(RowKind::Fixed(j));
            }
        }
        if !rows.is_empty() {
            blocks.push(Block::Zero { start: 0, dim: rows.len() });
        }

        let nn_start = rows.len();
        for j in 0..n {
            if p.lower[j] == p.upper[j] {
                continue;
            }
            if p.lower[j].is_finite() {
                trip.push((rows.len(), j, -T::one()));
                b.push(-p.lower[j]);
                rows.push(RowKind::Lower(j));
            }
            if p.upper[j].is_finite() {
                trip.push((rows.len(), j, T::one()));
                b.push(p.upper[j]);
                rows.push(RowKind::Upper(j));
            }
        }
        if rows.len() > nn_start {
            blocks.push(Block::Nonneg {
                start: nn_start,
                dim: rows.len() - nn_start,
            });
        }

        let r2 = T::of(std::f64::consts::FRAC_1_SQRT_2);
        let sq2 = T::of(std::f64::consts::SQRT_2);
        for (k, cone) in p.cones.iter().enumerate() {
            let start = rows.len();
            trip.push((start, cone.gamma, -r2));
            trip.push((start, cone.rho, -r2));
            trip.push((start + 1, cone.gamma, -r2));
            trip.push((start + 1, cone.rho, r2));
            trip.push((start + 2, cone.flow, -sq2));
            b.extend([T::zero(); 3]);
            rows.extend((0..3).map(|c| RowKind::Cone(k, c)));
            blocks.push(Block::Soc { start, dim: 3 });
        }

        let m = rows.len();
        let a = CscMatrix::from_triplets(m, n, &trip);
        let a_triplets: Vec<_> = a.iter().collect();
        Self {
            n,
            m,
            a,
            a_triplets,
            b,
            c: p.objective.clone(),
            blocks,
            rows,
            col_scale: vec![T::one(); n],
            row_scale: vec![T::one(); m],
            cost_scale: T::one(),
        }
    }

    /// Ruiz equilibration of `A`, keeping each cone block uniformly scaled,
    /// then scales the cost vector to unit infinity norm.
    pub fn equilibrate(&mut self, iterations: usize) {
        let (lo, hi) = (T::of(1e-4), T::of(1e4));
        let mut trip = self.a_triplets.clone();
        for _ in 0..iterations {
            let mut colmax = vec![T::zero(); self.n];
            let mut rowmax = vec![T::zero(); self.m];
            for &(i, j, v) in &trip {
                colmax[j] = colmax[j].max(v.abs());
                rowmax[i] = rowmax[i].max(v.abs());
            }
            for blk in &self.blocks {
                if let Block::Soc { .. } = blk {
                    let r = blk.range();
                    let mx = rowmax[r.clone()].iter().fold(T::zero(), |a, v| a.max(*v));
                    rowmax[r].iter_mut().for_each(|v| *v = mx);
                }
            }
            let dc: Vec<T> = colmax.iter().map(|v| if *v > T::zero() { T::one() / v.sqrt() } else { T::one() }).collect();
            let dr: Vec<T> = rowmax.iter().map(|v| if *v > T::zero() { T::one() / v.sqrt() } else { T::one() }).collect();
            let mut done = true;
            for j in 0..self.n {
                let new = (self.col_scale[j] * dc[j]).max(lo).min(hi);
                done &= (new / self.col_scale[j] - T::one()).abs() < T::of(1e-3);
                self.col_scale[j] = new;
            }
            for i in 0..self.m {
                let new = (self.row_scale[i] * dr[i]).max(lo).min(hi);
                done &= (new / self.row_scale[i] - T::one()).abs() < T::of(1e-3);
                self.row_scale[i] = new;
            }
            trip = self
                .a_triplets
                .iter()
                .map(|&(i, j, v)| (i, j, v * self.row_scale[i] * self.col_scale[j]))
                .collect();
            if done {
                break;
            }
        }
        self.a_triplets = trip;
        self.a = CscMatrix::from_triplets(self.m, self.n, &self.a_triplets);
        for i in 0..self.m {
            self.b[i] *= self.row_scale[i];
        }
        for j in 0..self.n {
            self.c[j] *= self.col_scale[j];
        }
        let cmax = self.c.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        self.cost_scale = if cmax > T::zero() { T::one() / cmax } else { T::one() };
        self.cost_scale = self.cost_scale.max(lo).min(hi);
        let cs = self.cost_scale;
        self.c.iter_mut().for_each(|v| *v *= cs);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::RotatedCone;

    #[test]
    fn rows_are_grouped_by_cone_type() {
        let mut p = ConicProgram::<f64>::new(4);
        p.add_eq(&[(0, 1.0), (1, 1.0)], 2.0);
        p.lower[3] = 1.0;
        p.upper[3] = 1.0;
        p.lower[0] = 0.0;
        p.upper[1] = 5.0;
        p.add_cone(RotatedCone { gamma: 0, rho: 1, flow: 2 });
        let sf = StandardForm::from_program(&p);
        assert_eq!(sf.rows[..2], [RowKind::Equality(0), RowKind::Fixed(3)]);
        assert_eq!(sf.rows[2..4], [RowKind::Lower(0), RowKind::Upper(1)]);
        assert_eq!(sf.blocks.len(), 3);
        assert_eq!(sf.m, 7);
        // s = b - A x must equal the cone point for x = (gamma, rho, flow).
        let x = [2.0, 0.5, 1.0, 1.0];
        let mut ax = vec![0.0; sf.m];
        sf.a.mul_vec(&x, &mut ax);
        let s: Vec<f64> = (4..7).map(|i| sf.b[i] - ax[i]).collect();
        assert!((s[0] * s[0] - s[1] * s[1] - s[2] * s[2] - 2.0 * (2.0 * 0.5 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn equilibration_keeps_cone_rows_uniform() {
        let mut p = ConicProgram::<f64>::new(3);
        p.add_eq(&[(0, 1000.0), (1, 0.001)], 2.0);
        p.add_cone(RotatedCone { gamma: 0, rho: 1, flow: 2 });
        let mut sf = StandardForm::from_program(&p);
        sf.equilibrate(25);
        let r = &sf.row_scale;
        assert_eq!(r[1], r[2]);
        assert_eq!(r[2], r[3]);
        let amax = sf.a_triplets.iter().fold(0.0f64, |a, t| a.max(t.2.abs()));
        assert!(amax < 10.0);
    }
}
