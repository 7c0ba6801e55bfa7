use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `x[gamma] * x[rho] >= x[flow]^2` with `x[gamma], x[rho] >= 0`, i.e. the
/// 2x2 matrix `[gamma flow; flow rho]` is positive semidefinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct RotatedCone {
    pub gamma: usize,
    pub rho: usize,
    pub flow: usize,
}

/// Where a cone came from in the space-time grid. Steady programs use time 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ConeTag {
    pub pipe: usize,
    pub seg: usize,
    pub time: usize,
}

/// Linear objective, sparse equalities, variable boxes and rotated cones:
///
/// ```text
/// min  c'x + offset
/// s.t. A x = b
///      lower <= x <= upper
///      x[gamma_k] x[rho_k] >= x[flow_k]^2,  x[gamma_k], x[rho_k] >= 0
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram<T> {
    pub n_vars: usize,
    pub objective: Vec<T>,
    pub objective_offset: T,
    pub n_eq: usize,
    /// `(row, col, value)`; duplicates are summed.
    pub eq_triplets: Vec<(usize, usize, T)>,
    pub eq_rhs: Vec<T>,
    /// `-inf` when absent.
    pub lower: Vec<T>,
    /// `+inf` when absent.
    pub upper: Vec<T>,
    pub cones: Vec<RotatedCone>,
    /// One tag per cone when the program was built from a grid.
    pub cone_tags: Vec<ConeTag>,
    /// Free-form notes, e.g. presolve boxes added by the builder.
    pub notes: Vec<String>,
}

impl<T: Scalar> ConicProgram<T> {
    pub fn new(n_vars: usize) -> Self {
        Self {
            n_vars,
            objective: vec![T::zero(); n_vars],
            objective_offset: T::zero(),
            n_eq: 0,
            eq_triplets: Vec::new(),
            eq_rhs: Vec::new(),
            lower: vec![T::neg_infinity(); n_vars],
            upper: vec![T::infinity(); n_vars],
            cones: Vec::new(),
            cone_tags: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn add_var(&mut self, lower: T, upper: T) -> usize {
        self.n_vars += 1;
        self.objective.push(T::zero());
        self.lower.push(lower);
        self.upper.push(upper);
        self.n_vars - 1
    }

    /// Appends `sum coeff * x[col] = rhs`; returns the row index.
    pub fn add_eq(&mut self, terms: &[(usize, T)], rhs: T) -> usize {
        let row = self.n_eq;
        self.eq_triplets.extend(terms.iter().map(|&(j, v)| (row, j, v)));
        self.eq_rhs.push(rhs);
        self.n_eq += 1;
        row
    }

    pub fn add_cone(&mut self, cone: RotatedCone) {
        self.cones.push(cone);
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).map(|(c, v)| *c * *v).sum::<T>() + self.objective_offset
    }

    /// Checks index ranges, cone index distinctness and tag consistency.
    pub fn validate(&self) -> Result<()> {
        let n = self.n_vars;
        if self.objective.len() != n || self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Build("vector lengths disagree with variable count".into()));
        }
        if self.eq_rhs.len() != self.n_eq {
            return Err(Error::Build("right-hand side length disagrees with row count".into()));
        }
        if let Some(&(i, j, _)) = self.eq_triplets.iter().find(|&&(i, j, _)| i >= self.n_eq || j >= n) {
            return Err(Error::Build(format!("equality entry ({i}, {j}) out of range")));
        }
        for (k, c) in self.cones.iter().enumerate() {
            if c.gamma >= n || c.rho >= n || c.flow >= n {
                return Err(Error::Build(format!("cone {k} references a variable out of range")));
            }
            if c.gamma == c.rho || c.gamma == c.flow || c.rho == c.flow {
                return Err(Error::Build(format!("cone {k} indices are not distinct")));
            }
        }
        if !self.cone_tags.is_empty() && self.cone_tags.len() != self.cones.len() {
            return Err(Error::Build("cone tags do not match cones".into()));
        }
        Ok(())
    }

    /// Largest violation of equalities, bounds and cones at `x`.
    pub fn max_violation(&self, x: &[T]) -> T {
        let mut r = self.eq_rhs.iter().map(|b| -*b).collect::<Vec<_>>();
        for &(i, j, v) in &self.eq_triplets {
            r[i] += v * x[j];
        }
        let mut worst = r.iter().fold(T::zero(), |a, v| a.max(v.abs()));
        for j in 0..self.n_vars {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        for c in &self.cones {
            let (g, r, m) = (x[c.gamma], x[c.rho], x[c.flow]);
            worst = worst.max(-g).max(-r).max(m * m - g * r);
        }
        worst
    }

    /// Plain-text sparse triplet dump for cross-checking with external tools.
    ///
    /// ```text
    /// vars <n>
    /// eqs <m>
    /// cones <k>
    /// c <col> <value>          nonzero objective entries
    /// A <row> <col> <value>    equality entries
    /// b <row> <value>
    /// lb <col> <value>         finite bounds only
    /// ub <col> <value>
    /// cone <k> <gamma> <rho> <flow>
    /// ```
    pub fn write_triplets<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "vars {}", self.n_vars)?;
        writeln!(out, "eqs {}", self.n_eq)?;
        writeln!(out, "cones {}", self.cones.len())?;
        if self.objective_offset != T::zero() {
            writeln!(out, "offset {:e}", self.objective_offset.to_f64_lossy())?;
        }
        for (j, c) in self.objective.iter().enumerate() {
            if *c != T::zero() {
                writeln!(out, "c {j} {:e}", c.to_f64_lossy())?;
            }
        }
        for &(i, j, v) in &self.eq_triplets {
            writeln!(out, "A {i} {j} {:e}", v.to_f64_lossy())?;
        }
        for (i, b) in self.eq_rhs.iter().enumerate() {
            writeln!(out, "b {i} {:e}", b.to_f64_lossy())?;
        }
        for (j, l) in self.lower.iter().enumerate() {
            if l.is_finite() {
                writeln!(out, "lb {j} {:e}", l.to_f64_lossy())?;
            }
        }
        for (j, u) in self.upper.iter().enumerate() {
            if u.is_finite() {
                writeln!(out, "ub {j} {:e}", u.to_f64_lossy())?;
            }
        }
        for (k, c) in self.cones.iter().enumerate() {
            writeln!(out, "cone {k} {} {} {}", c.gamma, c.rho, c.flow)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_catches_bad_cones() {
        let mut p = ConicProgram::<f64>::new(3);
        p.add_cone(RotatedCone { gamma: 0, rho: 0, flow: 1 });
        assert!(p.validate().is_err());
        let mut p = ConicProgram::<f64>::new(3);
        p.add_cone(RotatedCone { gamma: 0, rho: 1, flow: 5 });
        assert!(p.validate().is_err());
        let mut p = ConicProgram::<f64>::new(3);
        p.add_cone(RotatedCone { gamma: 0, rho: 1, flow: 2 });
        p.add_eq(&[(0, 1.0)], 1.0);
        assert!(p.validate().is_ok());
    }

    #[test]
    fn triplet_dump_is_stable() {
        let mut p = ConicProgram::<f64>::new(3);
        p.objective[0] = 1.0;
        p.add_eq(&[(1, 1.0)], 1.0);
        p.lower[0] = 0.0;
        p.add_cone(RotatedCone { gamma: 0, rho: 1, flow: 2 });
        let mut buf = Vec::new();
        p.write_triplets(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "vars 3\neqs 1\ncones 1\nc 0 1e0\nA 0 1 1e0\nb 0 1e0\nlb 0 0e0\ncone 0 0 1 2\n");
    }

    #[test]
    fn violation_measure() {
        let mut p = ConicProgram::<f64>::new(3);
        p.add_cone(RotatedCone { gamma: 0, rho: 1, flow: 2 });
        assert_eq!(p.max_violation(&[1.0, 1.0, 1.0]), 0.0);
        assert!((p.max_violation(&[1.0, 1.0, 2.0]) - 3.0).abs() < 1e-15);
    }
}
